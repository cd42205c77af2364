"""Lower estimates for positive approximation operators via moduli of smoothness,
K-functionals and the spectra of their collocation matrices."""

__version__ = "0.1.0"

from .funcspace import (  # noqa: E402
    Grid,
    SampledFunction,
    k_functional_upper,
    modulus_of_smoothness,
    norm,
    seminorm,
)
from .operators import (  # noqa: E402
    collocation_matrix,
    make_bernstein,
    make_integral_schoenberg,
    make_kantorovich,
    make_schoenberg,
    parse_operator,
)
from .splines import KnotSequence, greville_nodes  # noqa: E402

__all__ = [
    "Grid",
    "KnotSequence",
    "SampledFunction",
    "collocation_matrix",
    "greville_nodes",
    "k_functional_upper",
    "make_bernstein",
    "make_integral_schoenberg",
    "make_kantorovich",
    "make_schoenberg",
    "modulus_of_smoothness",
    "norm",
    "parse_operator",
    "seminorm",
]
