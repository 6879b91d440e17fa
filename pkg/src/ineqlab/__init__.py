"""Numerical verification of the I(a) family of functional inequalities.

The family ``E f^2 - (E f^p)^(2/p) <= C (2-p)^a E|grad f|^2`` runs from the
Poincare inequality (``a = 0``) to the logarithmic Sobolev inequality
(``a = 1``).
"""

from .errors import (
    ArityError,
    DegenerateInstance,
    DegenerateWitness,
    DomainError,
    IneqLabError,
    InsufficientData,
    LipschitzViolation,
    NonConvergent,
    ParseError,
    RegimeError,
    SizeError,
)
from . import two_point as _two_point_module  # noqa: F401  load first so the measure constructor keeps the name
from .expr import parse_expression, test_function
from .functionals import dirichlet_energy, entropy, ia_ratio, p_variance, phi_curve
from .measures import (
    DiscreteMeasure,
    ProductMeasure,
    Seed,
    exp_power,
    exp_power_normalizer,
    gauss,
    parse_measure,
    product,
    sym_exp,
    two_point,
)

__version__ = "0.1.0"
