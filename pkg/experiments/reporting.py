"""
Run reports: check records, byte-stable JSON, CSV tables and console output.

Floats are written with config.FLOAT_DIGITS significant digits everywhere,
so a report rebuilt from the same config and seed is identical byte for byte.
"""

import csv
import enum
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from tabulate import tabulate

import config

logger = logging.getLogger("experiment_cli")

BOUNDS_COLUMNS = ("quantity", "n", "k1", "k2", "m", "r", "value")
SURVIVAL_COLUMNS = ("t", "n", "k", "p_hat", "wilson_lo", "wilson_hi")


class Verdict(enum.Enum):
    PASS = "pass"
    FAIL = "fail"
    REPORT_ONLY = "report-only"


@dataclass
class CheckRecord:
    """One verified quantity; ``anchor`` names the statement it checks."""
    name: str
    anchor: str
    point: float
    interval: Optional[Tuple[float, float]] = None
    bound: Optional[float] = None
    verdict: Verdict = Verdict.REPORT_ONLY
    note: str = ""

    @classmethod
    def judged(cls, name: str, anchor: str, point: float, holds: bool, interval=None, bound=None,
               note: str = "") -> "CheckRecord":
        return cls(name, anchor, float(point), interval, bound, Verdict.PASS if holds else Verdict.FAIL, note)

    @property
    def failed(self) -> bool:
        return self.verdict is Verdict.FAIL

    def as_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "anchor": self.anchor,
            "point": self.point,
            "interval": list(self.interval) if self.interval is not None else None,
            "bound": self.bound,
            "verdict": self.verdict.value,
            "note": self.note,
        }


@dataclass
class RunReport:
    command: str
    config: Dict[str, Any]
    seed: int
    checks: List[CheckRecord] = field(default_factory=list)
    columns: Sequence[str] = ()
    rows: List[Dict[str, Any]] = field(default_factory=list)
    engine_version: str = config.ENGINE_VERSION
    elapsed: Optional[float] = None

    @property
    def passed(self) -> bool:
        return not any(check.failed for check in self.checks)

    @property
    def counts(self) -> Dict[str, int]:
        tally = {verdict.value: 0 for verdict in Verdict}
        for check in self.checks:
            tally[check.verdict.value] += 1
        return tally

    def as_dict(self, timing: bool = False) -> Dict[str, Any]:
        out = {
            "command": self.command,
            "engine_version": self.engine_version,
            "seed": self.seed,
            "config": self.config,
            "checks": [check.as_dict() for check in self.checks],
            "columns": list(self.columns),
            "rows": self.rows,
            "passed": self.passed,
        }
        if timing and self.elapsed is not None:
            out["elapsed_seconds"] = self.elapsed
        return out


def format_float(value: float) -> str:
    if math.isnan(value):
        return "NaN"
    if math.isinf(value):
        return "Infinity" if value > 0 else "-Infinity"
    return f"{value:.{config.FLOAT_DIGITS}g}"


def _encode(value: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    close = " " * (indent * level)
    if isinstance(value, enum.Enum):
        value = value.value
    if value is None or isinstance(value, (bool, np.bool_)):
        return json.dumps(None if value is None else bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(k), ensure_ascii=False)}: {_encode(v, indent, level + 1)}"
                 for k, v in value.items()]
        return "{\n" + ",\n".join(items) + f"\n{close}}}"
    if isinstance(value, (list, tuple, np.ndarray)):
        if len(value) == 0:
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + f"\n{close}]"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def to_json(report: RunReport, timing: bool = False, indent: int = 2) -> str:
    """JSON text of the report; wall-clock time is included only with ``timing``."""
    return _encode(report.as_dict(timing), indent, 0) + "\n"


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return format_float(float(value))
    if isinstance(value, enum.Enum):
        return str(value.value)
    return str(value)


def write_csv(path: Path, columns: Sequence[str], rows: List[Dict[str, Any]]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row[column]) for column in columns])
    logger.info(f"Wrote {len(rows)} rows to {path}")


def write_report(report: RunReport, out: Optional[Path], fmt: str, timing: bool = False) -> Optional[Path]:
    """Write the report in ``fmt``; csv writes the row table, or the check table when there are no rows."""
    if out is None:
        return None
    out = Path(out)
    if fmt == "json":
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as f:
            f.write(to_json(report, timing))
        logger.info(f"Wrote JSON report to {out}")
    elif report.rows:
        write_csv(out, report.columns, report.rows)
    else:
        rows = [check.as_dict() for check in report.checks]
        write_csv(out, ("name", "anchor", "point", "interval", "bound", "verdict", "note"), rows)
    return out


# ANSI colours for verdicts on the console
_VERDICT_COLORS = {
    Verdict.PASS: "\033[32m",
    Verdict.FAIL: "\033[31m",
    Verdict.REPORT_ONLY: "\033[36m",
}
_RESET = "\033[0m"


def _short(value: Any) -> str:
    if value is None:
        return "-"
    if isinstance(value, (tuple, list)):
        return "(" + ", ".join(_short(v) for v in value) + ")"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def render_checks(report: RunReport, color: bool = True) -> str:
    table = []
    for check in report.checks:
        verdict = check.verdict.value
        if color:
            verdict = f"{_VERDICT_COLORS[check.verdict]}{verdict}{_RESET}"
        table.append([check.name, _short(check.point), _short(check.interval), _short(check.bound), verdict])
    return tabulate(table, headers=["Check", "Point", "Interval", "Bound", "Verdict"], tablefmt="grid")


def render_rows(report: RunReport, limit: int = 40) -> str:
    shown = report.rows[:limit]
    table = [[_short(row[column]) for column in report.columns] for row in shown]
    text = tabulate(table, headers=list(report.columns), tablefmt="grid")
    if len(report.rows) > limit:
        text += f"\n... {len(report.rows) - limit} more rows"
    return text


def print_report(report: RunReport):
    print(f"\n=== coupleman {report.command} (seed {report.seed}, engine {report.engine_version}) ===")
    if report.rows:
        print(render_rows(report))
    if report.checks:
        print(render_checks(report))
        tally = report.counts
        print(f"\nSummary: {tally['pass']} pass, {tally['fail']} fail, {tally['report-only']} report-only")
