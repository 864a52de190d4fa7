"""Exception hierarchy."""


class SMDError(Exception):
    """Base class for all errors raised by smdrate."""


class BoundaryPointError(SMDError, ValueError):
    """A point that must be interior lies on (or outside) the boundary of X."""


class NumericOverflowError(SMDError, ArithmeticError):
    """A computed quantity is not finite."""


class StepSolverError(SMDError, RuntimeError):
    """The mirror-step inner solver did not converge.

    Carries the best iterate found and the final residual.
    """

    def __init__(self, message, best=None, residual=float("nan"), iteration=None):
        super().__init__(message)
        self.best = best
        self.residual = residual
        self.iteration = iteration


class IllPosedProxError(SMDError, ValueError):
    """lambda * rho >= 1, so the proximal subproblem is not strongly convex."""


class ProxSolverError(SMDError, RuntimeError):
    def __init__(self, message, best=None, residual=float("nan")):
        super().__init__(message)
        self.best = best
        self.residual = residual


class InconsistentInputsError(SMDError, ValueError):
    pass


class DegenerateGapError(InconsistentInputsError):
    """Envelope gap of zero: the stepsize constant would vanish."""


class InvalidProbeError(SMDError, ValueError):
    pass


class DivergenceError(SMDError, FloatingPointError):
    """An iterate became non-finite. Indicates a bug since X is enforced."""


class UnsupportedDiagnosticError(SMDError, NotImplementedError):
    pass


class ConfigError(SMDError, ValueError):
    """Bad configuration; ``str()`` reads ``source:line: message``."""

    def __init__(self, message, line=None, source=None):
        super().__init__(message)
        self.message = message
        self.line = line
        self.source = source

    def __str__(self):
        where = ""
        if self.source is not None:
            where = f"{self.source}:"
        if self.line is not None:
            where = f"{where}{self.line}: "
        elif where:
            where += " "
        return f"{where}{self.message}"
