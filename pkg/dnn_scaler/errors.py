"""Exception types raised across dnn_scaler.

Every error carries an ``error_type`` (a key of
``error_renderer.CODE_ERROR_DEFS``) and the ``error_data`` context needed to
render it, so the CLI can turn any failure into an ``ErrorReport``.
See docs/ERROR_HANDLING.md.
"""
from typing import Any, Dict, Optional

# Exit codes used by the CLI
EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class DnnScalerError(Exception):
    """Base error for the package.

    Args:
        diagnostics: Human-readable explanation of what went wrong.
        error_type: Template key used by the error renderer.
        error_data: Extra template context (e.g. ``dnn_id``, ``path``).
    """
    error_type = "runtime_failure"
    exit_code = EXIT_RUNTIME

    def __init__(self, diagnostics: str, error_type: Optional[str] = None,
                 error_data: Optional[Dict[str, Any]] = None):
        super().__init__(diagnostics)
        self.diagnostics = diagnostics
        if error_type is not None:
            self.error_type = error_type
        self.error_data: Dict[str, Any] = dict(error_data or {})
        self.error_data.setdefault("diagnostics", diagnostics)


class ConfigError(DnnScalerError, ValueError):
    """Invalid configuration, scenario or command-line input."""
    error_type = "invalid_argument"
    exit_code = EXIT_USAGE


class SchemaError(ConfigError):
    """A catalog, scenario or latency-row file failed schema validation."""
    error_type = "schema_violation"

    def __init__(self, path: str, validation_error: Any):
        self.path = path
        self.validation_error = validation_error
        super().__init__(f"{path}: {validation_error}", error_data={"path": path})


class UnknownDnnError(DnnScalerError, KeyError):
    """A job or command referenced a DNN that the catalog does not hold."""
    error_type = "unknown_dnn"
    exit_code = EXIT_USAGE

    def __str__(self) -> str:
        # KeyError would otherwise quote the message
        return self.diagnostics


class StatisticsError(DnnScalerError, ValueError):
    error_type = "no_samples"


class CalibrationError(DnnScalerError, ValueError):
    error_type = "singular_system"


class PerfModelError(DnnScalerError, ValueError):
    error_type = "out_of_range"


class ProfilerError(DnnScalerError, ValueError):
    error_type = "invalid_argument"


class CompletionError(DnnScalerError, ValueError):
    error_type = "rank_infeasible"


class ScalerError(DnnScalerError, ValueError):
    error_type = "invalid_argument"


class HarnessError(DnnScalerError):
    error_type = "runtime_failure"
