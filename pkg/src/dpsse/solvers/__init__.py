from .admm import AdmmEstimator
from .central import CentralizedEstimator
from .decomposition import DecompositionEstimator
from .gossip import GossipEstimator
from .matrix_splitting import MatrixSplittingEstimator

ESTIMATORS = {
    "central": CentralizedEstimator,
    "matrix-splitting": MatrixSplittingEstimator,
    "gossip": GossipEstimator,
    "decomposition": DecompositionEstimator,
    "admm": AdmmEstimator,
}

__all__ = [
    "AdmmEstimator",
    "CentralizedEstimator",
    "DecompositionEstimator",
    "ESTIMATORS",
    "GossipEstimator",
    "MatrixSplittingEstimator",
]
