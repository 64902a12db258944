import logging
from typing import Iterable, Optional

from solver.models import RunReport, StochasticGame

logger = logging.getLogger(__name__)


def format_config(game: StochasticGame, v: int) -> str:
    if game.labels is not None and game.labels[v] is not None:
        return f"{v}:{game.labels[v]}"
    return str(v)


def format_region(game: StochasticGame, region: Iterable[int]) -> str:
    """Config ids in increasing order, each followed by its label when the game has one."""
    return "[" + ", ".join(format_config(game, v) for v in sorted(region)) + "]"


def format_report(report: RunReport) -> str:
    lines = [f"command: {report.command}"]
    for name, digest in report.inputs.items():
        lines.append(f"input.{name}.sha256: {digest}")
    for key, value in report.fields:
        lines.append(f"{key}: {value}")
    if report.timing is not None:
        lines.append(f"timing: {report.timing:.3f}s")
    return "\n".join(lines) + "\n"


def log_run(
    report: RunReport,
    status: str = "success",
    error_message: Optional[str] = None,
):
    """
    Log a finished run

    Args:
        report: The report of the run
        status: The status of the run (success/refuted/error)
        error_message: Any error message (if applicable)
    """
    summary = {key: value for key, value in report.fields if key in ("mode", "region", "memory", "verified")}
    if error_message is not None:
        logger.error(f"{report.command} finished with {status}: {error_message}")
    else:
        logger.info(f"{report.command} finished with {status} {summary}")
