"""Concept-drift detection and root-cause analysis for process event logs."""

from .analysis import (
    ComponentBreakdown,
    DensitySummary,
    OutlierReport,
    attribute_density,
    compare_segments,
    decompose_attribute,
    flag_outliers,
)
from .drift import (
    DriftPoint,
    PValueSeries,
    Segment,
    detect_drift_points,
    ks_two_sample,
    segment_log,
    sliding_window_pvalues,
)
from .eventlog import (
    DiscretizerSpec,
    Event,
    EventLog,
    Schema,
    Trace,
    apply_bins,
    discretize,
    filter_attributes,
    infer_schema,
    parse_log,
    split_train,
    write_csv,
)
from .parameters import (
    CPT,
    EDBNModel,
    FDMap,
    Rates,
    learn_parameters,
    load_model,
    save_model,
    train_model,
)
from .scoring import (
    AttributeScore,
    EventScore,
    TraceScore,
    score_event,
    score_log,
    score_log_table,
    score_trace,
)
from .structure import (
    CDEdge,
    DependencyGraph,
    FDEdge,
    Node,
    StructureConfig,
    build_structure,
    discover_cds,
    discover_fds,
)

__version__ = "0.1.0"
