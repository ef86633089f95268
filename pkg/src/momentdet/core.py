from typing import TYPE_CHECKING, Optional

VERSION = "0.1.0"

if TYPE_CHECKING:
    from .client import DeterminacyClient
    from .settings import Settings


class MomentDetException(Exception):
    """Root of every error raised by momentdet."""

    def __init__(self, error_msg: str = ""):
        self.error_msg = error_msg

    def __str__(self):
        return self.error_msg


class DomainError(MomentDetException):
    """An evaluator was called outside the region where it is defined."""


class NumericError(MomentDetException):
    """Quadrature, summation or optimization failed to produce a usable number."""


class InvalidTransformError(MomentDetException):
    pass


class SpecError(MomentDetException):
    """Class for errors relating to spec documents."""

    def __init__(self, error_msg: str = "", line: Optional[int] = None):
        self.error_msg = error_msg
        self.line = line

    def __str__(self):
        if self.line is None:
            return f"{self.error_msg}"
        return f"line {self.line}: {self.error_msg}"


class TraceInvariantError(MomentDetException):
    """A conclusion of one of the proof steps failed numerically."""

    def __init__(self, error_msg: str = "", step: str = ""):
        self.error_msg = error_msg
        self.step = step

    def __str__(self):
        return f"{self.step}: {self.error_msg}"


class ContradictionError(MomentDetException):
    """Rules concluding determinacy and indeterminacy fired on the same spec."""

    def __init__(self, error_msg: str, verdict=None):
        self.error_msg = error_msg
        self.verdict = verdict
        self.analysis = None


class DeterminacyAPI:
    def __init__(self, client: "DeterminacyClient"):
        self.client = client

    @property
    def settings(self) -> "Settings":
        return self.client.settings
