"""Exception hierarchy shared by the toolkit."""


class KamError(Exception):
    """Base class for numeric precondition failures."""


class WindowMismatchError(KamError, ValueError):
    pass


class ComponentMismatchError(KamError, ValueError):
    pass


class DomainViolation(KamError):
    """A series expansion was asked to run outside its convergence radius."""


class NeumannError(KamError):
    """The Neumann series precondition ||I - M|| < 1 failed."""

    def __init__(self, mu: float):
        super().__init__(f"not invertible by Neumann series: ||I - M|| = {mu:.6g} >= 1")
        self.mu = mu


class ResonanceError(KamError):
    """An (numerically) exact resonance k . omega = 0 was met."""

    def __init__(self, k, value: float):
        self.k = tuple(int(v) for v in k)
        super().__init__(f"resonance at k={list(self.k)}: |k.omega| = {value:.3g}")
        self.value = value


class EmptyRangeError(KamError):
    pass


class ResourceError(KamError):
    """Mode or enumeration budget exceeded."""


class SmallnessError(KamError):
    """A quantitative smallness hypothesis of the step or iteration is violated."""


class BallExitError(KamError):
    pass


class ConvergenceError(KamError):
    pass


class ConfigError(KamError, ValueError):
    pass
