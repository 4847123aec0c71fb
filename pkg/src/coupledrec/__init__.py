"""Coupling-aware categorical similarity, clustering and recommendation.

The toolkit measures similarity between categorical objects by coupling
the occurrence frequencies of attribute values with the dependencies
between attributes, clusters objects with a K-modes variant driven by
that similarity, and predicts ratings with cluster-scoped collaborative
filtering and with factor models augmented by user/item relation graphs.
"""

from .data import (
    MISSING,
    CategoricalTable,
    DataError,
    RatingDataset,
    RelationGraph,
    load_attribute_table,
    load_graph,
    load_ratings,
    save_attribute_table,
)
from .coupling import (
    CouplingParams,
    FrequencyIndex,
    SimilarityMatrix,
    build_frequency_index,
    cavs,
    cavs_tables,
    cis,
    coupling_matrix,
    iaavs,
    icp,
    ieavs,
    ieavs_pair,
    ieavs_pair_exhaustive,
)
from .ckmodes import ClusterModel, assign, ck_modes, init_modes, plain_k_modes, update_mode
from .cf import (
    MeanCache,
    PredictionRequest,
    predict_coupled,
    predict_item_based,
    predict_slope_one,
    predict_user_based,
    rating_similarity,
    top_n,
)
from .mf import (
    FactorModel,
    TrainConfig,
    TrainingDiverged,
    base_predict,
    cmf_predict,
    gradients,
    load_model,
    loss,
    mf_predict_batch,
    save_model,
    train,
)
from .evaluate import (
    ALGORITHMS,
    BenchResult,
    EvalReport,
    FoldPlan,
    adjusted_rand_index,
    cross_validate,
    kfold,
    mae,
    make_predictor,
    rmse,
    synth_coupled,
    throughput_bench,
)

__version__ = "0.1.0"
