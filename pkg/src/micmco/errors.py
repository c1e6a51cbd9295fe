"""
Error Hierarchy
Every failure raised by the library derives from MicmcoError so that the CLI
and HTTP boundaries can translate it into a single diagnostic.
"""

from typing import Optional, Sequence


class MicmcoError(Exception):
    """Base class for all library errors"""


# ============== Engine ==============

class ShapeError(MicmcoError):
    """Operands of an op have incompatible shapes"""

    def __init__(self, op: str, shapes: Sequence[tuple], detail: str = ""):
        self.op = op
        self.shapes = [tuple(s) for s in shapes]
        message = f"{op}: incompatible shapes {self.shapes}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class DomainError(MicmcoError):
    """An op was evaluated outside its mathematical domain"""

    def __init__(self, op: str, detail: str):
        self.op = op
        super().__init__(f"{op}: {detail}")


class UnknownOpError(MicmcoError):
    """forward_op was asked for an op-kind that is not registered"""


class NonScalarRootError(MicmcoError):
    """backward was called on a node with more than one element"""


class CategoryIndexError(MicmcoError):
    """A categorical or symbol index lies outside its range"""


# ============== Checkpoints ==============

class CheckpointError(MicmcoError):
    """Base class for checkpoint decoding failures"""


class CheckpointFormatError(CheckpointError):
    """Bad magic bytes or a truncated header"""


class CheckpointVersionError(CheckpointError):
    """The checkpoint was written by an unknown format version"""


class CheckpointLengthError(CheckpointError):
    """The float payload disagrees with the shape table"""


class SpecMismatchError(CheckpointError):
    """The checkpoint's latent spec or layout differs from the expected one"""


# ============== Configuration ==============

class ConfigError(MicmcoError):
    """A configuration document or grid failed to parse or validate"""

    def __init__(self, message: str, key: Optional[str] = None, line: Optional[int] = None):
        self.key = key
        self.line = line
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if key is not None:
            prefix += f"{key}: "
        super().__init__(prefix + message)


# ============== Oracle ==============

class EnumerationTooLargeError(MicmcoError):
    """|Z|^K exceeds the enumeration budget; use Monte-Carlo instead"""


# ============== Training ==============

class NonFiniteGradientError(MicmcoError):
    """A gradient entry is NaN or infinite"""

    def __init__(self, parameter: str):
        self.parameter = parameter
        super().__init__(f"non-finite gradient for parameter '{parameter}'")


class DivergenceError(MicmcoError):
    """Training produced a non-finite loss"""

    def __init__(self, step: int, detail: str = "loss is not finite"):
        self.step = step
        super().__init__(f"diverged at step {step}: {detail}")
