"""Multi-view urban region embeddings from mobility, POI, and check-in graphs."""

from .autodiff import Tape, Tensor, cosine_sim, soft_threshold, softmax
from .data import Dataset, generate_city, load_dataset, save_dataset
from .evaluation import ari, kfold_regress, kmeans, lasso_fit, nmi
from .gradcheck import compare_gradients, finite_diff_grad
from .graphs import VIEWS, DependencyGraph, build_graphs, cleanse
from .optim import Adam
from .training import AblationFlags, Model, TrainConfig, TrainResult, train

__version__ = "0.1.0"

__all__ = [
    "Tape",
    "Tensor",
    "cosine_sim",
    "soft_threshold",
    "softmax",
    "Dataset",
    "generate_city",
    "load_dataset",
    "save_dataset",
    "ari",
    "kfold_regress",
    "kmeans",
    "lasso_fit",
    "nmi",
    "compare_gradients",
    "finite_diff_grad",
    "VIEWS",
    "DependencyGraph",
    "build_graphs",
    "cleanse",
    "Adam",
    "AblationFlags",
    "Model",
    "TrainConfig",
    "TrainResult",
    "train",
]
