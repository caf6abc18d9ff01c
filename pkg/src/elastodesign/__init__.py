"""A-optimal placement of boundary pressure activations for linearized
elasticity imaging: geometry, P2 elasticity solver, linearized forward map,
Gaussian posterior objective, and the design-search algorithms."""

from .geometry import (
    ActivationShape,
    BoundaryGeometry,
    activation_field,
    activation_position_derivative,
    arclength_parameter,
    boundary_point,
    exterior_normal,
)

__version__ = "0.1.0"

__all__ = [
    "ActivationShape",
    "BoundaryGeometry",
    "activation_field",
    "activation_position_derivative",
    "arclength_parameter",
    "boundary_point",
    "exterior_normal",
    "__version__",
]
