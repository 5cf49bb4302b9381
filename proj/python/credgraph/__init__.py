"""Website credibility graphs, curriculum-scheduled GraphSAGE training, and
unreliable-domain discovery evaluation.

The heavy lifting lives in the compiled extension; this package re-exports
its public surface.
"""

from credgraph._core import (  # noqa: F401
    DEFAULT_BINARIZE_THRESHOLD,
    ConfigError,
    CredgraphError,
    DataError,
    GraphBuilder,
    HeteroGraph,
    SchemaError,
    TrainingError,
    __version__,
    accuracy_f1,
    binarize_label,
    filter_dredge_mentions,
    generate_walks,
    graph_union,
    label_assortativity,
    load_snapshot,
    normalize_domain,
    partial_metrics,
    positional_features,
    precision_at_k,
    quintile_batches,
    run_pipeline,
    save_snapshot,
    stratified_split,
    summarize_run,
    threshold_sweep,
    validate_config,
)

__all__ = [
    "DEFAULT_BINARIZE_THRESHOLD",
    "ConfigError",
    "CredgraphError",
    "DataError",
    "GraphBuilder",
    "HeteroGraph",
    "SchemaError",
    "TrainingError",
    "__version__",
    "accuracy_f1",
    "binarize_label",
    "filter_dredge_mentions",
    "generate_walks",
    "graph_union",
    "label_assortativity",
    "load_snapshot",
    "normalize_domain",
    "partial_metrics",
    "positional_features",
    "precision_at_k",
    "quintile_batches",
    "run_pipeline",
    "save_snapshot",
    "stratified_split",
    "summarize_run",
    "threshold_sweep",
    "validate_config",
]
