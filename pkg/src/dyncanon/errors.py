"""Exception hierarchy shared by all modules."""


class GBDTError(Exception):
    """Base class for all errors raised by :mod:`dyncanon`."""


class ShapeError(GBDTError, ValueError):
    """Matrix operands have incompatible or invalid shapes."""


class NonFiniteError(GBDTError, ValueError):
    """An input or result contains NaN or Inf."""


class SpectralSeparationError(GBDTError):
    """Sylvester operands share (numerically) part of their spectrum."""

    def __init__(self, gap, sep_tol):
        self.gap = float(gap)
        self.sep_tol = float(sep_tol)
        super().__init__(
            f"spectra not separated: minimum eigenvalue gap {self.gap:.3e} "
            f"<= sep_tol {self.sep_tol:.3e}"
        )


class NotPositiveDefiniteError(GBDTError):
    """A matrix that must be Hermitian positive definite is not."""

    def __init__(self, what, min_eig, context=""):
        self.what = what
        self.min_eig = float(min_eig)
        msg = f"{what} is not positive definite (min eigenvalue {self.min_eig:.6e})"
        if context:
            msg += f" [{context}]"
        super().__init__(msg)


class SingularMatrixError(GBDTError):
    """A matrix that must be invertible is numerically singular."""


class RetryBudgetExceeded(GBDTError):
    """The random triple generator could not find an admissible draw."""


class PositivityLoss(GBDTError):
    """ODE integration lost positivity of S; carries the partial trajectory."""

    def __init__(self, message, trajectory=None, node=None):
        super().__init__(message)
        self.trajectory = trajectory
        self.node = node
