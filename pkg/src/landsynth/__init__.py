"""Synthetic tabular inventories from sparse observations, plus fidelity evaluation."""

from .baselines import MarginalModel, SmoteConfig, mc_fit, mc_generate, smote_generate
from .bench import BenchResult, Scenario, emit_report, get_scenario, make_scenario, run_comparison
from .generator import (
    Candidate,
    ConditionalModel,
    GenerationConfig,
    KernelBackend,
    generate_pool,
    generate_row,
    load_pool,
    plausibility,
    pool_to_inventory,
    save_pool,
)
from .metrics import (
    MetricReport,
    dependence_delta,
    full_report,
    js_divergence,
    ks_statistic,
    wasserstein1,
)
from .preprocess import TransformPipeline, TransformStep, fit_apply_pipeline
from .schema import (
    MISSING,
    DataError,
    FeatureSchema,
    FeatureSpec,
    Inventory,
    SchemaError,
    infer_schema,
    load_csv,
    dedupe,
    load_schema,
    save_csv,
    save_schema,
    scan_csv,
    validate,
)
from .selection import MixedCorpus, SelectionConfig, mix, select, select_top_quantile

__version__ = "0.1.0"
