"""Graph-aware information-maximizing subset selection.

Pick a fixed-size subset of labeled, quality-scored records that maximizes
a concave information measure computed over a label-similarity graph:
each record contributes its quality to its labels, contributions spread to
similar labels through a row-stochastic propagation matrix, and a concave
function of the accumulated per-label mass rewards spreading the budget
across semantically distinct regions instead of piling onto one.
"""

__version__ = "0.1.0"

from .baselines import FacilityLocationSelector, RandomSelector, TopQualitySelector
from .errors import (
    ConfigError,
    EmbeddingFormatError,
    GraphArtifactError,
    InternalInvariantError,
    PoolFormatError,
    ValidationError,
)
from .graph import (
    LabelGraph,
    align_pool,
    build_graph,
    load_graph,
    save_graph,
    with_propagation,
)
from .measure import (
    InfoFunction,
    LinearInfo,
    PowerInfo,
    SaturatingExpInfo,
    accumulate_raw,
    dataset_information,
    default_info_function,
    info_function,
    propagate,
    raw_info,
)
from .pool import (
    DataPoint,
    LabelEmbeddings,
    LabelRemap,
    LabelVocabulary,
    Pool,
    load_embeddings,
    load_pool,
    normalize_labels,
    write_embeddings,
    write_pool,
)
from .selection import (
    InfoGainSelector,
    SelectionReport,
    SelectionResult,
    exact_gain,
    gradient_gain,
    lazy_select,
    select,
)
from .synthetic import SyntheticPoolSpec, generate_pool

__all__ = [
    "__version__",
    "ConfigError",
    "DataPoint",
    "EmbeddingFormatError",
    "FacilityLocationSelector",
    "GraphArtifactError",
    "InfoFunction",
    "InfoGainSelector",
    "InternalInvariantError",
    "LabelEmbeddings",
    "LabelGraph",
    "LabelRemap",
    "LabelVocabulary",
    "LinearInfo",
    "Pool",
    "PoolFormatError",
    "PowerInfo",
    "RandomSelector",
    "SaturatingExpInfo",
    "SelectionReport",
    "SelectionResult",
    "SyntheticPoolSpec",
    "TopQualitySelector",
    "ValidationError",
    "accumulate_raw",
    "align_pool",
    "build_graph",
    "dataset_information",
    "default_info_function",
    "exact_gain",
    "generate_pool",
    "gradient_gain",
    "info_function",
    "lazy_select",
    "load_embeddings",
    "load_graph",
    "load_pool",
    "normalize_labels",
    "propagate",
    "raw_info",
    "save_graph",
    "select",
    "with_propagation",
    "write_embeddings",
    "write_pool",
]
