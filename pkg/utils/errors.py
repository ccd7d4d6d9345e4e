import logging
from typing import Any, Dict

logger = logging.getLogger(__name__)


class GaborFlowError(Exception):
    """
    Runtime failure of a transform or evolution.

    Every failure carries a short kebab-case code (``window-not-frame``,
    ``cfl-violated``, ...) so that callers can branch on it, and a free-form
    diagnostics dict that ends up in the run report.
    """

    def __init__(self, code: str, message: str, **diagnostics: Any):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message
        self.diagnostics: Dict[str, Any] = diagnostics

    def to_dict(self) -> Dict[str, Any]:
        return {"code": self.code, "message": self.message, "diagnostics": self.diagnostics}


class InputValidationError(GaborFlowError):
    """Bad user input: missing files, malformed sidecars, inconsistent shapes or flags."""


def require(condition: bool, code: str, message: str, **diagnostics: Any) -> None:
    """Raise an InputValidationError unless ``condition`` holds."""
    if not condition:
        raise InputValidationError(code, message, **diagnostics)
