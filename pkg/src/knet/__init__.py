"""Deep kernel clustering by HSIC maximisation (KNet)."""

from .cluster_eval import assign_nearest, kmeans, nmi
from .data import LabeledDataset, gen_moons, gen_spirals, standardize
from .trainer import KNetConfig, KNetModel, embed, fit, predict

__all__ = [
    "KNetConfig", "KNetModel", "LabeledDataset", "assign_nearest", "embed", "fit",
    "gen_moons", "gen_spirals", "kmeans", "nmi", "predict", "standardize",
]
