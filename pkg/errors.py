"""Exceptions raised by the walker model, simulator, solvers and sweep runner."""

from typing import Any, Optional


class WalkerError(Exception):
    """Base class for every error signalled by the laboratory."""


class SingularInertiaError(WalkerError):
    """The inertia matrix could not be inverted (points at a derivation bug)."""


class InvalidEventError(WalkerError):
    """The impact map was called on a state that is not a touchdown."""


class NonDissipativeImpactError(WalkerError):
    """The impact map produced more kinetic energy than it received."""

    def __init__(self, kinetic_before: float, kinetic_after: float):
        super().__init__(
            f"Non-dissipative impact: KE before {kinetic_before:.6e}, after {kinetic_after:.6e}"
        )
        self.kinetic_before = kinetic_before
        self.kinetic_after = kinetic_after


class IntegrationFailedError(WalkerError):
    """The ODE stepper gave up (step size underflow or non-finite state)."""


class MapUndefinedError(WalkerError):
    """The Poincare map is undefined at the iterate (walker fell or timed out)."""

    def __init__(self, message: str, iterate: Optional[Any] = None, termination: Optional[str] = None):
        super().__init__(message)
        self.iterate = iterate
        self.termination = termination


class NoConvergenceError(WalkerError):
    """Newton shooting did not reach the residual tolerance."""

    def __init__(self, message: str, iterate: Optional[Any] = None, residual: float = float("nan")):
        super().__init__(message)
        self.iterate = iterate
        self.residual = residual


class FreeFallSingularityError(WalkerError):
    """Apparent gravity vanishes (1 + y_g'' too small), the ZMP is undefined."""


class ZeroSpeedStrideError(WalkerError):
    """Stride with no forward progress; cost of transport is undefined."""


class AmbiguousClassificationError(WalkerError):
    """Wobble and stance-rate criteria disagree on the solution group."""


class SweepConfigError(WalkerError):
    """The sweep specification or a result file is unusable."""


class SweepIOError(WalkerError):
    """Reading or writing sweep results failed; the checkpoint on disk is kept."""
