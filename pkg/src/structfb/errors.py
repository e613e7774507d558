"""Exception hierarchy shared by all modules.

Every error carries an optional ``witness`` mapping with the numbers that
explain the failure (an offending eigenvalue, a violation norm, ...). The CLI
serializes it verbatim into its error JSON.
"""

from __future__ import annotations

from typing import Any


class StructFBError(Exception):
    """Base class for all toolkit errors."""

    def __init__(self, message: str, witness: dict[str, Any] | None = None):
        super().__init__(message)
        self.witness = witness or {}

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"error": str(self), "type": type(self).__name__}
        if self.witness:
            out["witness"] = self.witness
        return out


class DimensionError(StructFBError, ValueError):
    pass


class NonFiniteError(StructFBError, ValueError):
    pass


class NotSymmetricError(StructFBError, ValueError):
    pass


class DefinitenessError(StructFBError, ValueError):
    pass


class ConvergenceError(StructFBError):
    pass


class NotHurwitzError(StructFBError):
    pass


class NotEigenvalueError(StructFBError, ValueError):
    pass


class ControllabilityError(StructFBError):
    pass


class NotStabilizableError(ControllabilityError):
    pass


class NoStabilizingSolutionError(StructFBError):
    pass


class NotStabilizingError(StructFBError):
    """The initial guess handed to Newton-Kleinman does not stabilize."""


class ReductionError(StructFBError):
    """The output map does not admit a closed reduced system."""


class OrthonormalityError(ReductionError, ValueError):
    pass


class SimulationError(StructFBError):
    pass


class ConfigError(StructFBError):
    """Problem config failed validation; ``errors`` lists ``(pointer, message)``."""

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = list(errors)
        lines = "; ".join(f"{ptr or '/'}: {msg}" for ptr, msg in self.errors)
        super().__init__(
            f"invalid config: {lines}",
            {"errors": [{"path": p or "/", "message": m} for p, m in self.errors]},
        )
