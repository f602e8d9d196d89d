"""Exception types shared across the package."""


class EllipticError(ValueError):
    """Base class for evaluation errors of elliptic-function objects."""


class PoleProximity(EllipticError):
    """An argument lies inside the exclusion disk around a pole."""

    def __init__(self, argument, value, distance, eps):
        self.argument = argument
        self.value = value
        self.distance = distance
        self.eps = eps
        super().__init__(
            f"argument {argument!r}={value!r} is {distance:.3g} from a pole "
            f"(pole_eps={eps:.3g})"
        )


class ZeroCharacteristicAtPole(EllipticError):
    """phi_alpha requested at alpha=(0,0), u=0, where it is singular."""


class EvaluationError(EllipticError):
    """Non-finite value produced by a series evaluation."""


class IntegrationAborted(RuntimeError):
    """A trajectory entered a pole-exclusion zone."""

    def __init__(self, time, reason):
        self.time = time
        self.reason = reason
        super().__init__(f"integration aborted at t={time:.6g}: {reason}")


class ConfigError(ValueError):
    """Invalid run configuration."""
