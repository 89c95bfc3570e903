"""Explicit solutions of the dynamical canonical system Y_t = j (Hcal Y)_x
built by a generalized Backlund-Darboux transformation, with a harness that
verifies every identity the construction relies on."""
from .errors import (
    GBDTError,
    NonFiniteError,
    NotPositiveDefiniteError,
    PositivityLoss,
    RetryBudgetExceeded,
    ShapeError,
    SingularMatrixError,
    SpectralSeparationError,
)
from .triple import (
    GBDTTriple,
    SignatureJ,
    complete_S0,
    ex1_triple,
    random_admissible,
    triple_from_json,
    triple_to_json,
    verify_identity,
)
from .explicit import ExplicitModel, SolutionField, build_model, field
from .generalham import HamiltonianField, Trajectory, integrate, parse_hamiltonian
from ._kernels import BACKEND

__version__ = "0.1.0"
