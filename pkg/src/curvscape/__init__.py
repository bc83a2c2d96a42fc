"""curvscape: curvature estimation for constant-curvature disks via persistent homology."""

from .errors import CurvscapeError, DomainError, NumericalError, ResourceError
from .geometry import (
    PolarPoint,
    TriangleBirthDeath,
    TriangleSides,
    disk_area,
    equilateral_persistence,
    geodesic_distance,
    inverse_cdf_radius,
    sample_disk,
    triangle_birth_death,
)

__all__ = [
    "CurvscapeError",
    "DomainError",
    "NumericalError",
    "ResourceError",
    "PolarPoint",
    "TriangleBirthDeath",
    "TriangleSides",
    "disk_area",
    "equilateral_persistence",
    "geodesic_distance",
    "inverse_cdf_radius",
    "sample_disk",
    "triangle_birth_death",
]

__version__ = "0.1.0"
