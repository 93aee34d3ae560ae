"""GCNH: a from-scratch GNN engine for node classification under heterophily.

The package is organized as a small numpy/scipy library:

- :mod:`gcnh.graph` CSR graphs, homophily statistics, normalized adjacency
- :mod:`gcnh.tensor` reverse-mode autodiff over dense matrices plus sparse
  neighbor-aggregation kernels
- :mod:`gcnh.optim` / :mod:`gcnh.gradcheck` Adam and finite-difference checks
- :mod:`gcnh.models` GCNH, GCN, and MLP definitions
- :mod:`gcnh.data` canonical dataset format and synthetic graph generation
- :mod:`gcnh.training` transductive training, split protocol, grid search
- :mod:`gcnh.experiments` / :mod:`gcnh.cli` experiment drivers and the CLI
"""
from .graph import (
    Graph,
    HomophilyReport,
    LabelVector,
    build_graph,
    class_edge_matrix,
    degree,
    edge_homophily,
    normalized_adjacency,
)
from .tensor import (
    AggregationMode,
    Tape,
    Tensor,
    add_row_bias,
    convex_mix,
    dropout,
    leaky_relu,
    matmul,
    neighbor_aggregate,
    sigmoid_scalar,
    softmax_nll,
    spmm,
)
from .optim import Adam, AdamState, adam_step
from .gradcheck import finite_diff_check
from .models import (
    ClassifierParams,
    DenseLayerParams,
    GCNHLayerParams,
    Model,
    ModelConfig,
    PredictionOutput,
    count_params,
    extract_betas,
    forward,
    gcn_layer_forward,
    gcnh_layer_forward,
    init_model,
    load_checkpoint,
    predict,
    save_checkpoint,
)
from .data import (
    Dataset,
    DatasetFormatError,
    GenerationReport,
    LabelRangeError,
    MalformedLineError,
    MissingFileError,
    SplitIndexError,
    SplitMask,
    SynthConfig,
    generate_splits,
    generate_synthetic,
    grow_preferential_graph,
    homophily_sweep_generate,
    load_dataset,
    marker_feature_pool,
    save_dataset,
)
from .training import (
    FULL_BATCH,
    GridSearchResult,
    HyperGrid,
    NonFiniteLossError,
    ProtocolResult,
    RunResult,
    TrainConfig,
    evaluate,
    grid_search,
    run_protocol,
    train,
)

__version__ = "0.1.0"
