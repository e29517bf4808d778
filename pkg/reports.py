"""Machine-readable task reports and their table rendering."""

import json
import math
from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field, field_serializer

import config


class Status(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    ERROR = "error"


EXIT_CODES = {Status.PASS: 0, Status.FAIL: 1, Status.ERROR: 2}
STATUS_MARKERS = {"pass": "✅", "fail": "❌", "error": "⚠️"}
SIGNIFICANT_DIGITS = 12


def round_floats(value: Any) -> Any:
    """Round floats to SIGNIFICANT_DIGITS; non-finite floats become None."""
    if isinstance(value, float):
        return float(f"{value:.{SIGNIFICANT_DIGITS}g}") if math.isfinite(value) else None
    if isinstance(value, (list, tuple)):
        return [round_floats(v) for v in value]
    if isinstance(value, dict):
        return {k: round_floats(v) for k, v in value.items()}
    return value


class TaskResult(BaseModel):
    """Outcome of one scenario task."""
    command: str = Field(..., description="Task command")
    status: Status = Field(..., description="pass, fail or error")
    tolerance: Optional[float] = Field(None, description="Tolerance the numbers were computed under")
    parameters: Dict[str, Any] = Field(default_factory=dict, description="Effective task parameters")
    values: Dict[str, Any] = Field(default_factory=dict, description="Computed tables, residuals and values")
    message: str = Field("", description="Failure or error explanation")

    @field_serializer("values")
    def _round_values(self, values: Dict[str, Any]) -> Dict[str, Any]:
        return round_floats(values)


class Report(BaseModel):
    """Report of a scenario run."""
    scenario: str = Field(..., description="Scenario name")
    engine_version: str = Field(config.ENGINE_VERSION, description="Engine version")
    status: Status = Field(Status.PASS, description="pass iff every task passed")
    seed: int = Field(config.DEFAULT_SEED, description="Sampling seed")
    tolerance: float = Field(config.DEFAULT_TOL, description="Default quadrature tolerance")
    sign_flag: Optional[int] = Field(None, description="Sign s with D(U1) = s C1, when calibrated")
    tasks: List[TaskResult] = Field(default_factory=list, description="Per-task results")

    def add(self, result: TaskResult):
        self.tasks.append(result)
        self.status = overall_status(self.tasks)

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.status]

    def to_json(self) -> str:
        """Deterministic JSON: sorted keys, rounded floats."""
        return json.dumps(self.model_dump(mode="json"), indent=2, sort_keys=True, ensure_ascii=False)


def overall_status(results: List[TaskResult]) -> Status:
    statuses = {r.status for r in results}
    if Status.ERROR in statuses:
        return Status.ERROR
    if Status.FAIL in statuses:
        return Status.FAIL
    return Status.PASS


def _format_value(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, list):
        return "(" + ", ".join(_format_value(v) for v in value) + ")"
    if isinstance(value, dict):
        return ", ".join(f"{k}={_format_value(v)}" for k, v in value.items())
    return str(value)


def render_table(report_json: str) -> str:
    """Human-readable summary derived from the JSON report."""
    data = json.loads(report_json)
    lines = [
        f"{STATUS_MARKERS[data['status']]} {data['scenario']}  "
        f"(engine {data['engine_version']}, tol {data['tolerance']:g}, seed {data['seed']})"
    ]
    if data.get("sign_flag") is not None:
        lines.append(f"   sign flag s = {data['sign_flag']:+d}")
    for task in data["tasks"]:
        tolerance = f"  [tol {task['tolerance']:g}]" if task.get("tolerance") is not None else ""
        lines.append(f"{STATUS_MARKERS[task['status']]} {task['command']}{tolerance}")
        for key, value in task["values"].items():
            lines.append(f"   {key:<22} {_format_value(value)}")
        if task.get("message"):
            lines.append(f"   💡 {task['message']}")
    return "\n".join(lines)
