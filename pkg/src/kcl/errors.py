"""Exception hierarchy shared by all kcl modules.

Two families matter for the CLI exit codes: ``ValidationError`` (bad
inputs or configuration, exit 1) and ``FormatError`` (malformed files,
exit 2, alongside the builtin ``OSError``).
"""
from __future__ import annotations


class KCLError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(KCLError):
    """Inputs or configuration violate a documented contract."""


class NonFinite(ValidationError):
    def __init__(self, index: int, what: str = "matrix"):
        self.index = index
        super().__init__(f"{what} row {index} contains NaN or Inf")


class ZeroRow(ValidationError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"row {index} has (near-)zero norm and cannot be normalized")


class NotNormalized(ValidationError):
    def __init__(self, index: int, norm: float, what: str = "class weights"):
        self.index = index
        super().__init__(f"{what} row {index} has L2 norm {norm:.6g}, expected 1")


class DimMismatch(ValidationError):
    pass


class EmptyTestSet(ValidationError):
    def __init__(self):
        super().__init__("test feature matrix has zero rows")


class MissingLabels(ValidationError):
    pass


class NonPositiveBeta(ValidationError):
    def __init__(self, value: float):
        super().__init__(f"affinity sharpness must be > 0, got {value}")


class IndexNotRemaining(ValidationError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"test index {index} is not in the remaining set")


class EmptyGrid(ValidationError):
    def __init__(self, name: str):
        super().__init__(f"search grid {name!r} is empty")


class LengthMismatch(ValidationError):
    pass


class DegenerateSpec(ValidationError):
    pass


class FormatError(KCLError):
    """A data file does not match its declared binary layout."""


class BadMagic(FormatError):
    def __init__(self, expected: bytes, got: bytes):
        super().__init__(f"bad magic: expected {expected!r}, got {got!r}")


class TruncatedPayload(FormatError):
    def __init__(self, detail: str):
        super().__init__(f"payload size mismatch: {detail}")
