"""Claim dependency graphs and GNN classifiers for patent approval prediction."""

__version__ = "0.1.0"

from .model import (  # noqa: F401
    Application,
    Claim,
    ClaimSegment,
    DatasetSplit,
    Identity,
    SegmentKind,
)
from .parsing import (  # noqa: F401
    ParsedClaim,
    ParseWarnings,
    detect_reference,
    extract_identity,
    parse,
    segment_claim,
)
from .graph import (  # noqa: F401
    FlanGraph,
    FlanNode,
    build_application_graphs,
    build_coarse_graph,
    build_flan_graph,
    build_solitary,
    export_graph,
    graph_from_json,
    match_preamble,
    validate_graph,
)
from .embed import (  # noqa: F401
    EmbeddedGraph,
    EmbeddingTable,
    HashBackend,
    TableBackend,
    embed_graph,
    fnv1a_64,
    hash_embed,
    load_embedding_table,
    text_key,
    write_embedding_table,
)
from .gnn import (  # noqa: F401
    ModelConfig,
    TrainReport,
    bce_loss,
    forward,
    gat_layer,
    gcn_layer,
    init_params,
    load_checkpoint,
    predict,
    readout,
    sage_layer,
    save_checkpoint,
    train,
)
from .metrics import (  # noqa: F401
    EvalReport,
    aggregate_seeds,
    evaluate,
    macro_f1,
    roc_auc,
)
from .data import (  # noqa: F401
    CorpusStats,
    FeatureStore,
    corpus_stats,
    load_applications,
    load_features,
    split_by_date,
)
