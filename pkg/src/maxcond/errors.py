"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class MaxCondError(Exception):
    pass


class ModelError(MaxCondError, ValueError):
    """Invalid model construction (zero profile, non-PSD covariance, ...)."""


class CapacityError(MaxCondError, ValueError):
    """Problem size beyond a hard limit (partition count, MVN dimension)."""


class TieDetected(MaxCondError):
    """Two atoms attain the maximum at a conditioning site."""

    def __init__(self, site: int, atoms: tuple[int, ...]):
        self.site = site
        self.atoms = atoms
        super().__init__(f"tie at site {site} between atoms {atoms}")


class InconsistentObservation(MaxCondError):
    """Every hitting scenario has zero weight: y is not attainable under the model."""


class AcceptanceFloorError(MaxCondError):
    def __init__(self, rate: float, floor: float, what: str = ""):
        self.rate = rate
        self.floor = floor
        msg = f"acceptance rate {rate:.3g} below floor {floor:.3g}"
        if what:
            msg += f" ({what})"
        super().__init__(msg + "; review the constraints")


class AccuracyError(MaxCondError):
    """Requested accuracy not reached within the evaluation budget."""

    def __init__(self, achieved: float, requested: float, value: float = float("nan")):
        self.achieved = achieved
        self.requested = requested
        self.value = value
        super().__init__(
            f"achieved standard error {achieved:.3g} above target {requested:.3g} "
            f"(estimate {value:.6g})"
        )


class SimulationBudgetError(MaxCondError):
    """Series simulation did not reach its stopping rule within the atom budget."""

    def __init__(self, msg: str, partial=None):
        self.partial = partial
        super().__init__(msg)


class InvariantViolation(MaxCondError, AssertionError):
    pass


class ConfigError(MaxCondError, ValueError):
    def __init__(self, msg: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {msg}" if where else msg)
