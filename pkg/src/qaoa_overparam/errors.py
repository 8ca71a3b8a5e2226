"""Exception types raised across the package."""


class QaoaError(Exception):
    """Base class for all package errors."""

    kind = "error"

    def to_dict(self) -> dict:
        return {"error": self.kind, "message": str(self)}


class DimensionMismatchError(QaoaError, ValueError):
    kind = "dimension_mismatch"


class InvalidSizeError(QaoaError, ValueError):
    kind = "invalid_size"


class InvalidDepthError(QaoaError, ValueError):
    kind = "invalid_depth"


class UndefinedGapError(QaoaError, ValueError):
    kind = "undefined_gap"


class NumericalFailureError(QaoaError, ArithmeticError):
    kind = "numerical_failure"

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["diagnostics"] = self.diagnostics
        return d


class OverparamDepthNotFound(QaoaError, RuntimeError):
    """EQD did not stagnate before the depth budget ran out."""

    kind = "not_found"

    def __init__(self, message: str, curve: list):
        super().__init__(message)
        self.curve = curve

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["curve"] = [r.eqd for r in self.curve]
        return d


class ConfigError(QaoaError, ValueError):
    kind = "invalid_config"
