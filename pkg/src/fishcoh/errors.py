"""Exception hierarchy.

Every error carries its class name as the diagnostic token that the CLI
reports, so ``type(err).__name__`` is part of the public contract.
"""


class FishcohError(ValueError):
    """Base class for all package errors."""


# linear algebra / states
class NonSquare(FishcohError):
    pass


class NotHermitian(FishcohError):
    pass


class InvalidState(FishcohError):
    """A matrix failed one of the density-matrix invariants.

    ``invariant`` names the failed check (``hermitian``, ``unit_trace``,
    ``positive_semidefinite``, ``shape``).
    """

    def __init__(self, invariant, detail=""):
        self.invariant = invariant
        msg = f"density matrix violates invariant '{invariant}'"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class DimensionMismatch(FishcohError):
    pass


# incoherent operations
class InvalidKraus(FishcohError):
    pass


class InvalidIO(FishcohError):
    pass


class IncompleteAtTheta0(InvalidIO):
    def __init__(self, residual, report=None):
        self.residual = residual
        self.report = report
        super().__init__(f"completeness residual at theta0 is {residual:.3e}")


class IncompleteAtTheta(InvalidIO):
    def __init__(self, theta, residual, report=None):
        self.theta = theta
        self.residual = residual
        self.report = report
        super().__init__(f"completeness residual {residual:.3e} at theta={theta:.6g}")


class Incomplete(InvalidIO):
    pass


class StateIncoherent(FishcohError):
    pass


# Fisher information
class SingularOutcome(FishcohError):
    """Outcome with vanishing probability but nonzero derivative."""


class SingularFamily(FishcohError):
    """State derivative has weight on the kernel-kernel block of the state."""

    def __init__(self, block_norm):
        self.block_norm = block_norm
        super().__init__(f"derivative leaks into the state's kernel (block norm {block_norm:.3e})")


class WrongDimension(FishcohError):
    pass


class NotPure(FishcohError):
    pass


class DimensionTooLarge(FishcohError):
    pass


# optimizer
class InvalidPoint(FishcohError):
    pass
