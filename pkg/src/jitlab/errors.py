"""Exception types. Each carries a stable ``code`` used in CLI messages."""

from __future__ import annotations


class JitError(Exception):
    code = "E_GENERIC"
    context: tuple[str, ...] = ()

    def annotate(self, note: str) -> "JitError":
        """Attach where the error happened; shown after the message."""
        self.context = (*self.context, note)
        return self

    def _message(self) -> str:
        msg = super().__str__()
        return f"{self.code}: {msg}" if msg else self.code

    def __str__(self) -> str:
        return "".join([self._message(), *(f" ({c})" for c in self.context)])


class SchemaError(JitError):
    code = "E_SCHEMA"


class ParseError(JitError):
    code = "E_PARSE"


class LabelError(JitError):
    code = "E_LABEL"


class UnknownFeatureError(JitError, KeyError):
    code = "E_UNKNOWN_FEATURE"

    def __init__(self, name: str):
        super().__init__(name)
        self.name = name

    def _message(self) -> str:
        return f"{self.code}: {self.name!r}"


class ProbabilityError(JitError, ValueError):
    code = "E_PROB"


class EmptyError(JitError, ValueError):
    code = "E_EMPTY"


class FileCountError(JitError, ValueError):
    code = "E_NF"


class UndefinedMetricError(JitError, ZeroDivisionError):
    code = "E_UNDEFINED"


class OneClassError(JitError, ValueError):
    code = "E_ONE_CLASS"


class LogDomainError(JitError, ValueError):
    """Strict log transform hit non-positive cells.

    ``offenders`` holds every ``(row, column)`` pair that failed.
    """

    code = "E_LOG_DOMAIN"

    def __init__(self, offenders: list[tuple[int, str]]):
        self.offenders = offenders
        shown = ", ".join(f"(row {r}, {c})" for r, c in offenders[:10])
        more = f" and {len(offenders) - 10} more" if len(offenders) > 10 else ""
        super().__init__(f"{len(offenders)} non-positive cell(s): {shown}{more}")


class MissingParamsError(JitError, KeyError):
    code = "E_MISSING_PARAMS"


class TooSmallError(JitError, ValueError):
    code = "E_TOO_SMALL"


class DimensionError(JitError, ValueError):
    code = "E_DIM"


class DegenerateError(JitError, ValueError):
    code = "E_DEGENERATE"


class FeatureMismatchError(JitError, ValueError):
    code = "E_FEATURE_MISMATCH"


class NonFiniteError(JitError, FloatingPointError):
    code = "E_NONFINITE"


class SpecError(JitError, ValueError):
    code = "E_SPEC"


class OutputError(JitError, OSError):
    code = "E_IO"
