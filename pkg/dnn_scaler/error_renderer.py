"""Unified error rendering for the dnn-scaler command line.

Turns a ``DnnScalerError`` (or a pydantic ``ValidationError``) into an
``ErrorReport`` using code-based templates. See docs/ERROR_HANDLING.md.
"""
from .schemas import ErrorReport
from .errors import DnnScalerError, SchemaError, EXIT_RUNTIME, EXIT_USAGE
from typing import List, Dict, Any, Optional, Sequence
from pydantic import ValidationError
import logging

logger = logging.getLogger(__name__)

## CODE_ERROR_DEFS: unified mapping of error types to template definitions
# Keys:
#   - template: Python format string for friendly_message
#   - next_steps: guidance string, may include markdown
#   - required_fields: list of context keys that must be present
#   - exit_code: process exit code for the CLI
CODE_ERROR_DEFS = {
    "unknown_dnn": {
        "template": "No calibration entry was found for DNN '{dnn_id}' (dataset '{dataset_tag}').",
        "next_steps": "Check the DNN id and dataset tag against the catalog, or pass --catalog with a file that defines it.",
        "required_fields": ["dnn_id", "dataset_tag"],
        "exit_code": EXIT_USAGE,
    },
    "schema_violation": {
        "template": "The file '{path}' does not match the expected schema: {diagnostics}",
        "next_steps": "Fix the field(s) listed in the issues below. The schema is documented in docs/SCHEMAS.md.",
        "required_fields": ["path"],
        "exit_code": EXIT_USAGE,
    },
    "invalid_argument": {
        "template": "Invalid input: {diagnostics}",
        "next_steps": "Run the command with --help to see the accepted values.",
        "required_fields": [],
        "exit_code": EXIT_USAGE,
    },
    "zero_duration": {
        "template": "Job {job_id} has zero duration; nothing can be simulated.",
        "next_steps": "Give every job a positive 'duration' in simulated seconds.",
        "required_fields": ["job_id"],
        "exit_code": EXIT_USAGE,
    },
    "empty_scenario": {
        "template": "The scenario does not contain any jobs.",
        "next_steps": "Add at least one entry to 'jobs'.",
        "required_fields": [],
        "exit_code": EXIT_USAGE,
    },
    "no_samples": {
        "template": "A latency statistic was requested over no samples.",
        "next_steps": None,
        "required_fields": [],
        "exit_code": EXIT_RUNTIME,
    },
    "invalid_baseline": {
        "template": "Throughput improvement needs a positive baseline, got {t_base}.",
        "next_steps": None,
        "required_fields": ["t_base"],
        "exit_code": EXIT_RUNTIME,
    },
    "singular_system": {
        "template": "The calibration points cannot be fitted: {diagnostics}",
        "next_steps": "Provide at least two points with distinct batch sizes and positive throughput.",
        "required_fields": [],
        "exit_code": EXIT_USAGE,
    },
    "rank_infeasible": {
        "template": "Matrix completion cannot run: {diagnostics}",
        "next_steps": "Use a rank between 1 and min(rows, columns).",
        "required_fields": [],
        "exit_code": EXIT_RUNTIME,
    },
    "empty_row": {
        "template": "Matrix completion cannot run: {diagnostics}",
        "next_steps": "Every row needs at least one observed latency.",
        "required_fields": [],
        "exit_code": EXIT_RUNTIME,
    },
    "out_of_range": {
        "template": "A control knob left its allowed range: {diagnostics}",
        "next_steps": None,
        "required_fields": [],
        "exit_code": EXIT_RUNTIME,
    },
    "runtime_failure": {
        "template": "The simulation failed: {diagnostics}",
        "next_steps": "Re-run with DNNSCALER_LOG=DEBUG for details.",
        "required_fields": [],
        "exit_code": EXIT_RUNTIME,
    },
    # Add more error types here as needed
}


def render_choices_markdown(choices: Sequence[Dict[str, Any]]) -> str:
    """
    Generate a markdown table of valid choices (e.g. catalog entries).

    Args:
        choices: list of dicts with 'id' and 'dataset_tag'.

    Returns:
        Markdown-formatted table string for embedding in next_steps.
    """
    headers = ["id", "dataset_tag"]
    table = ["| " + " | ".join(headers) + " |", "| " + " | ".join(["---"] * len(headers)) + " |"]
    for choice in choices:
        table.append("| " + " | ".join(str(choice.get(h, "") or "") for h in headers) + " |")
    return "\n".join(table)


def render_error(error_type: str, error_data: Dict[str, Any]) -> ErrorReport:
    """
    Build and return an ErrorReport by applying the selected template and context.

    Workflow:
    1. Lookup the error definition in CODE_ERROR_DEFS; fallback if missing.
    2. Format 'friendly_message' and 'next_steps', appending a choices table if provided.
    3. Collect required fields that are missing and flag them as an extra issue.
    4. Normalize each issue dict to include all schema fields.

    Args:
        error_type: Identifier for template selection (e.g., 'unknown_dnn').
        error_data: Context dict supplying template placeholders and raw 'issues'.

    Returns:
        ErrorReport: Fully populated error report.
    """
    error_def = CODE_ERROR_DEFS.get(error_type)
    choices = error_data.get("choices")
    missing: List[str] = []

    if error_def:
        format_data = dict(error_data)
        for field in error_def.get("required_fields", []):
            if format_data.get(field) is None:
                missing.append(field)
                format_data[field] = f"<missing {field}>"
        format_data.setdefault("diagnostics", "")
        friendly_message = error_def["template"].format(**format_data)
        try:
            next_steps = error_def["next_steps"].format(**format_data) if error_def.get("next_steps") else None
        except (KeyError, IndexError):
            next_steps = None
        exit_code = error_def.get("exit_code", EXIT_RUNTIME)
    else:
        logger.warning(f"render_error: Unknown error_type '{error_type}'")
        friendly_message = error_data.get("diagnostics") or "An error occurred."
        next_steps = None
        exit_code = EXIT_RUNTIME

    if choices:
        table = render_choices_markdown(choices)
        next_steps = f"{next_steps}\n\n{table}" if next_steps else table

    issues = []
    for issue in error_data.get("issues", []):
        issues.append({
            "severity": issue.get("severity", "error"),
            "code": issue.get("code", "unknown"),
            "diagnostics": issue.get("diagnostics", "<missing diagnostics>"),
            "details": issue.get("details"),
        })
    if missing:
        issues.append({
            "severity": "information",
            "code": "incomplete-context",
            "diagnostics": f"Warning: Missing fields for this error: {missing}",
            "details": None,
        })

    return ErrorReport(
        error=error_type.replace("_", " ").capitalize(),
        friendly_message=friendly_message,
        next_steps=next_steps,
        exit_code=exit_code,
        issues=issues,
    )


def render_exception(exc: DnnScalerError) -> ErrorReport:
    """Render a package exception, keeping its exit code."""
    if isinstance(exc, SchemaError) and isinstance(exc.validation_error, ValidationError):
        return render_validation_error(exc.validation_error, exc.path)
    data = dict(exc.error_data)
    data.setdefault("issues", [{"severity": "error", "code": exc.error_type, "diagnostics": exc.diagnostics}])
    report = render_error(exc.error_type, data)
    return report.model_copy(update={"exit_code": exc.exit_code})


def render_validation_error(exc: ValidationError, path: Optional[str]) -> ErrorReport:
    """
    Convert a pydantic ValidationError raised while loading a file into a
    'schema_violation' report naming the file and each offending field.
    """
    issues = []
    for err in exc.errors():
        location = ".".join(str(part) for part in err.get("loc", ())) or "<root>"
        issues.append({
            "severity": "error",
            "code": err.get("type", "invalid"),
            "diagnostics": f"{location}: {err.get('msg', 'invalid value')}",
            "details": location,
        })
    first = issues[0]["diagnostics"] if issues else "invalid document"
    return render_error("schema_violation", {"path": path, "diagnostics": first, "issues": issues})


def format_report(report: ErrorReport) -> str:
    """Plain-text rendering of a report for stderr."""
    lines = [f"error: {report.friendly_message}"]
    for issue in report.issues:
        lines.append(f"  - [{issue.code}] {issue.diagnostics}")
    if report.next_steps:
        lines.append("")
        lines.append(report.next_steps)
    return "\n".join(lines)
