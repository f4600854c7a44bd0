"""Per-user cardinality estimation over graph streams with shared sketches."""

__version__ = "0.1.0"

from .analysis import (alpha_constant, beta_constant, freebs_exact_E_inv_q, freebs_freers_crossover,
                       freers_approx_E_inv_q, lpc_moments, variance_bounds)
from .base import HllSketch, LpcSketch
from .errors import InvalidArgument, OutOfRegime, SaturationError, SketchError, UnsupportedSize
from .free import FreeBS, FreeRS, UpdateOutcome
from .hashing import family_index, geometric_rank, split_hash, uniform_index
from .metrics import detect_super_spreaders, rse_by_cardinality
from .oracle import ExactOracle
from .shared import CseArray, VhllArray
from .snapshot import load as load_snapshot
from .stream import StreamSpec, generate_stream, read_edges, write_edges

__all__ = [
    "CseArray", "ExactOracle", "FreeBS", "FreeRS", "HllSketch", "InvalidArgument", "LpcSketch", "OutOfRegime",
    "SaturationError", "SketchError", "StreamSpec", "UnsupportedSize", "UpdateOutcome", "VhllArray",
    "alpha_constant", "beta_constant", "detect_super_spreaders", "family_index", "freebs_exact_E_inv_q",
    "freebs_freers_crossover", "freers_approx_E_inv_q", "generate_stream", "geometric_rank", "load_snapshot",
    "lpc_moments", "read_edges", "rse_by_cardinality", "split_hash", "uniform_index", "variance_bounds",
    "write_edges",
]
