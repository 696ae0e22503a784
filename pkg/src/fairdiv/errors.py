"""Exception hierarchy for fairdiv."""


class FairDivError(Exception):
    """Base class for every error raised by this package."""


class InvalidInstanceError(FairDivError, ValueError):
    """Malformed or structurally unusable allocation space."""


class EmptySpaceError(InvalidInstanceError):
    """A generator's constraints admit no feasible allocation."""


class InvarianceViolationError(FairDivError):
    """An agent swap maps an allocation outside the space."""


class NonConvergenceError(FairDivError, RuntimeError):
    def __init__(self, message, gap):
        super().__init__(f"{message} (last gap {gap:.3e})")
        self.gap = gap


class LuckyViolationError(FairDivError, RuntimeError):
    """No supported agent is envy-free at the regularized optimum."""

    def __init__(self, message, envy):
        super().__init__(message)
        self.envy = envy


class SpernerViolationError(FairDivError, RuntimeError):
    pass


class RefinementFailureError(FairDivError, RuntimeError):
    """The mesh schedule ran out before an envy-free weight was found.

    ``best`` holds the ``(WeightVector, max_envy)`` pair with least envy seen.
    """

    def __init__(self, message, best):
        super().__init__(message)
        self.best = best


class WPECheckFailure(FairDivError, RuntimeError):
    pass


class FarkasViolationError(FairDivError, RuntimeError):
    pass


class AtomError(FairDivError, ValueError):
    """Atomless conversion requested on a measure carrying atoms."""


class CertificationError(FairDivError, AssertionError):
    pass
