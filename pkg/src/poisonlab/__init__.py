"""Data-poisoning vulnerability workbench for binary classifiers."""

from .data import (
    NEGATIVE,
    POSITIVE,
    CsvFormatError,
    Dataset,
    Instance,
    Provenance,
    export_csv,
    from_arrays,
    load_csv,
    standardize,
    stratified_subsample,
)
from .classifier import (
    LogisticRegressionGD,
    Metrics,
    ModelConfig,
    evaluate,
    feature_importance,
    model_from_dict,
    model_to_dict,
    predict,
    predict_proba,
    roc_auc,
    train,
)
from .attacks import (
    ALGORITHMS,
    BINARY_SEARCH,
    STINGRAY,
    AttackConfig,
    AttackResult,
    TraceRecord,
    attack_result_to_dict,
    binary_search_candidate,
    run_attack,
    stingray_candidate,
)
from .vulnerability import (
    AlgorithmOutcome,
    DbdConfig,
    VulnerabilityRow,
    default_cap,
    estimate_dbd,
    mcsa,
    risk_level,
    sample_unit_directions,
    sweep_records,
    vulnerability_sweep,
    write_sweep_csv,
)
from .impact import (
    ConnectorEdge,
    ImpactEdge,
    LocalImpactGraph,
    LocalImpactNode,
    build_local_impact_graph,
    relative_impact,
)
from .projection import ProjectionConfig, ProjectionResult, tsne_embed
from .reporting import (
    FeatureReportRow,
    InstanceAttributeRow,
    ModelOverview,
    feature_report,
    instance_attributes,
    model_overview,
)

__version__ = "0.1.0"

__all__ = [
    "NEGATIVE",
    "POSITIVE",
    "CsvFormatError",
    "Dataset",
    "Instance",
    "Provenance",
    "export_csv",
    "from_arrays",
    "load_csv",
    "standardize",
    "stratified_subsample",
    "LogisticRegressionGD",
    "Metrics",
    "ModelConfig",
    "evaluate",
    "feature_importance",
    "model_from_dict",
    "model_to_dict",
    "predict",
    "predict_proba",
    "roc_auc",
    "train",
    "ALGORITHMS",
    "BINARY_SEARCH",
    "STINGRAY",
    "AttackConfig",
    "AttackResult",
    "TraceRecord",
    "attack_result_to_dict",
    "binary_search_candidate",
    "run_attack",
    "stingray_candidate",
    "AlgorithmOutcome",
    "DbdConfig",
    "VulnerabilityRow",
    "default_cap",
    "estimate_dbd",
    "mcsa",
    "risk_level",
    "sample_unit_directions",
    "sweep_records",
    "vulnerability_sweep",
    "write_sweep_csv",
    "ConnectorEdge",
    "ImpactEdge",
    "LocalImpactGraph",
    "LocalImpactNode",
    "build_local_impact_graph",
    "relative_impact",
    "ProjectionConfig",
    "ProjectionResult",
    "tsne_embed",
    "FeatureReportRow",
    "InstanceAttributeRow",
    "ModelOverview",
    "feature_report",
    "instance_attributes",
    "model_overview",
    "__version__",
]
