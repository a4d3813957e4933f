"""Order conditions, Hall coordinates and obstructions for two-channel splitting schemes."""

from .errors import (ConfigurationError, ContractError, DomainError, NotLieError,
                     ParseError, SplitOrderError)
from .freealg import GaussianRational, Polynomial, bch, exp_truncated, log_truncated
from .hall import (HallBasis, LieCoordinates, X0, X1, build_M, build_Q1, build_W,
                   generate_hall, lie_coordinates, parse_bracket, render, validate_hall)
from .scheme import (DiracControl, Impulse, Scheme, Stage, formal_series, order_of_scheme,
                     scheme_to_control, xi_coordinates, zeta_coordinates)

__all__ = [
    "ConfigurationError", "ContractError", "DomainError", "NotLieError", "ParseError", "SplitOrderError",
    "GaussianRational", "Polynomial", "bch", "exp_truncated", "log_truncated",
    "HallBasis", "LieCoordinates", "X0", "X1", "build_M", "build_Q1", "build_W",
    "generate_hall", "lie_coordinates", "parse_bracket", "render", "validate_hall",
    "DiracControl", "Impulse", "Scheme", "Stage", "formal_series", "order_of_scheme",
    "scheme_to_control", "xi_coordinates", "zeta_coordinates",
]

__version__ = "0.1.0"
