"""Exception hierarchy.

Two families: :class:`ValidationError` for bad inputs (shapes, symmetry,
positivity, preconditions) and :class:`NumericalError` for failures that
only show up while computing (unstable matrices, step sizes, divergences).
The CLI maps the first family to exit code 2 and the second to exit code 3.
"""


class QdbError(Exception):
    """Base class for all package errors."""


class ValidationError(QdbError, ValueError):
    """Input violates a documented precondition."""


class NotHermitianError(ValidationError):
    def __init__(self, worst_pair, deviation):
        self.worst_pair = worst_pair
        self.deviation = deviation
        i, j = worst_pair
        super().__init__(
            f"matrix is not Hermitian: |m[{i},{j}] - conj(m[{j},{i}])| = {deviation:.3e}"
        )


class PSDViolationError(ValidationError):
    def __init__(self, min_eigenvalue, what="matrix"):
        self.min_eigenvalue = min_eigenvalue
        super().__init__(f"{what} is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")


class SingularStateError(ValidationError):
    """State is rank deficient where a logarithm is required."""


class FluctuationDissipationError(ValidationError):
    """D - i*hbar*C is not positive semidefinite."""


class NotStationaryError(ValidationError):
    def __init__(self, residual):
        self.residual = residual
        super().__init__(f"reference state is not stationary: ||L[rho_s]|| = {residual:.3e}")


class ConfigError(ValidationError):
    """Scenario configuration failed schema validation.

    ``problems`` is a list of ``(key_path, message)`` tuples.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        lines = [f"{path}: {msg}" for path, msg in self.problems]
        super().__init__("invalid scenario config:\n  " + "\n  ".join(lines))


class NumericalError(QdbError, ArithmeticError):
    """A computation could not meet its accuracy contract."""


class StabilityError(NumericalError):
    """Matrix is not asymptotically stable (some eigenvalue has Re >= 0)."""


class DegeneracyError(NumericalError):
    """Linear system is singular or the requested object is not unique."""


class DivergenceError(NumericalError):
    """Quantity is infinite or its formula is singular at this input.

    ``value`` carries the limiting value (``inf`` for relative entropy
    support violations).
    """

    def __init__(self, message, value=float("inf")):
        self.value = value
        super().__init__(message)


class StepSizeError(NumericalError):
    """Integration or finite-difference step is outside its usable range."""


class CutoffError(NumericalError):
    def __init__(self, tail_mass, required_cutoff):
        self.tail_mass = tail_mass
        self.required_cutoff = required_cutoff
        super().__init__(
            f"Fock cutoff too small: tail mass {tail_mass:.3e} exceeds tolerance; "
            f"try cutoff >= {required_cutoff}"
        )


class IdentityCheckError(NumericalError):
    """A cross-validation identity failed; message names the identity."""
