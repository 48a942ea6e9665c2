"""
Exception hierarchy for the plasma sheath lab

Every failure a solver or stage can signal derives from SheathLabError so
the CLI can map it to an exit code in one place.
"""


class SheathLabError(Exception):
    """Base class for all lab errors"""


class InvalidParams(SheathLabError, ValueError):
    """Physical parameters or call arguments violate a precondition"""


class ConfigError(SheathLabError):
    """Run configuration is missing a key or cannot be parsed"""


class DomainError(SheathLabError):
    """A function was evaluated outside its domain (e.g. n <= 0)"""


class BranchExceeded(SheathLabError):
    """phi lies below f(c_crit): no density on the admissible branch"""


class ConvergenceFailure(SheathLabError):
    """A bracketed or iterative solve did not converge"""


class ExistenceViolation(SheathLabError):
    """The boundary potential admits no monotone sheath"""


class QuadratureSingularity(SheathLabError):
    """The Sagdeev potential vanishes inside the integration range"""


class InsufficientTail(SheathLabError):
    """The profile does not decay enough to fit a tail rate"""


class InsufficientResolution(SheathLabError):
    """Finite-difference noise dominates the measured quantity"""


class NewtonDivergence(SheathLabError):
    """The Poisson Newton iteration failed within max_iter"""


class CharacteristicSignViolation(SheathLabError):
    """A characteristic speed became non-negative under strict upwinding"""


class PositivityLoss(SheathLabError):
    """Temperature became non-positive (or fields non-finite) during a step"""


class CFLViolation(SheathLabError):
    """Requested time step exceeds the CFL bound"""


class DegenerateFit(SheathLabError):
    """A decay fit has too few or constant samples"""


class DependencyMissing(SheathLabError):
    """A pipeline stage needs an artifact that was not produced"""


class StageFailure(SheathLabError):
    """A pipeline stage failed; keeps the stage name and the cause"""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
