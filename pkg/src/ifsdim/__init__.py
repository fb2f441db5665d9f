"""Dimension bounds and sampling for probabilistic iterated function systems."""

__version__ = "0.1.0"

from ._backend import NAME as BACKEND
from .dynamics import PointCloud, coding_map, cylinder_mass, forward_orbit
from .estimation import BallIndex, build_index, dimension_profile, local_dimension
from .geometry import check_osc, check_sosc_mass
from .model import (
    PRESETS,
    ConfigError,
    IfsSystem,
    apply_map,
    from_config,
    load_config,
    preset,
    validate,
)
from .moments import check_membership, dimension_bounds, moment_sums
from .symbolic import hitting_time, occupation_count, sample_stream, shift

__all__ = [
    "BACKEND", "PRESETS", "BallIndex", "ConfigError", "IfsSystem", "PointCloud",
    "apply_map", "build_index", "check_membership", "check_osc", "check_sosc_mass",
    "coding_map", "cylinder_mass", "dimension_bounds", "dimension_profile",
    "forward_orbit", "from_config", "hitting_time", "load_config", "local_dimension",
    "moment_sums", "occupation_count", "preset", "sample_stream", "shift", "validate",
]
