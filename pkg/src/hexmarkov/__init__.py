"""Hexagonal-grid Markov mobility models from AIS vessel reports."""
from .hexgrid import BoundingBox, CellId, GridConfig, cell_of, center_of, discretize, neighbors
from .markov import MarkovModel, TransitionStats, accumulate, fit, stationary

__version__ = "0.1.0"

__all__ = [
    "BoundingBox", "CellId", "GridConfig", "MarkovModel", "TransitionStats",
    "accumulate", "cell_of", "center_of", "discretize", "fit", "neighbors", "stationary",
]
