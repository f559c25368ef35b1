"""POI category selection for ride-hailing supply-demand gap estimation."""
from .boosting import BoostParams, GbdtModel, train
from .clustering import block_profiles, cluster_blocks, kmeans, kmeans_pp_init
from .core_data import DataError, InvariantError, PoiTable, parse_calendar, parse_orders, parse_poi_table, slice_of
from .gaps import FeatureConfig, GapTensor, build_items, compute_gap_tensor
from .metrics import EvalReport, accuracy, evaluate, f1, mae, rmse
from .selection import gain_rank, pca, ppce_rank, random_select, rank_pois, select_top, similarity_report
from .synth import SynthConfig, generate

__all__ = [
    "BoostParams", "DataError", "EvalReport", "FeatureConfig", "GapTensor", "GbdtModel", "InvariantError",
    "PoiTable", "SynthConfig", "accuracy", "block_profiles", "build_items", "cluster_blocks",
    "compute_gap_tensor", "evaluate", "f1", "gain_rank", "generate", "kmeans", "kmeans_pp_init", "mae",
    "parse_calendar", "parse_orders", "parse_poi_table", "pca", "ppce_rank", "random_select", "rank_pois",
    "rmse", "select_top", "similarity_report", "slice_of", "train",
]
__version__ = "0.1.0"
