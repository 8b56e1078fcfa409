"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigurationError -> 2,
ParseError/OSError -> 3, NumericError -> 4.
"""


class FlowProtoError(Exception):
    """Base class for all package errors."""


class ConfigurationError(FlowProtoError):
    """Invalid or insufficient configuration (bad value, too few classes, ...)."""


class ParseError(FlowProtoError):
    """Malformed file content (bad magic, CRC mismatch, ragged CSV row, ...)."""

    def __init__(self, message: str, *, offset: int | None = None, line: int | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"byte offset {offset}")
        suffix = f" ({', '.join(where)})" if where else ""
        super().__init__(message + suffix)
        self.offset = offset
        self.line = line


class VersionError(ParseError):
    """File carries an unsupported format version."""


class NumericError(FlowProtoError):
    """Non-finite value produced where the contract requires finite results."""

    def __init__(self, message: str, *, layer: int | None = None, epoch: int | None = None, step: int | None = None):
        ctx = []
        if layer is not None:
            ctx.append(f"layer {layer}")
        if epoch is not None:
            ctx.append(f"epoch {epoch}")
        if step is not None:
            ctx.append(f"step {step}")
        suffix = f" [{', '.join(ctx)}]" if ctx else ""
        super().__init__(message + suffix)
        self.layer = layer
        self.epoch = epoch
        self.step = step


class ContractViolation(FlowProtoError):
    """A caller broke an API precondition (mismatched lengths, stale cache, ...)."""
