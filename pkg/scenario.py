"""Scenario files: presentations, connections and tasks in one text format."""

import logging
import os
import re
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import sympy as sp

import config
from category import (
    OBJECT_ID,
    CategoryPresentation,
    Chart,
    EmbeddingArrow,
    OneObjectModel,
    Presentation,
    ValidationReport,
    validate_model,
    validate_presentation,
)
from chernweil import ConnectionAssignment
from errors import LeafspaceError
from forms import DifferentialForm, MatrixForm, SmoothMap
from symexpr import VariableContext, chart_symbols, parse_expr

logger = logging.getLogger(__name__)

SCENARIO_SUFFIX = ".scn"
COMMANDS = ("validate", "betti", "duality", "basic", "cocycle", "thurston", "collapse-check")
SECTIONS = ("scenario", "chart", "embedding", "compose", "model", "map", "connection", "task")

_PAIR = re.compile(r'\s*([\w-]+)\s*=\s*("[^"]*"|\[[^\]]*\]|[^,]*)\s*(?:,|$)')
_HEADER = re.compile(r"\[(\w+)\]")


class ScenarioError(LeafspaceError):
    """Malformed scenario text, reported with its line and column."""

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}" if line else message)


@dataclass(frozen=True)
class Task:
    command: str
    params: Dict[str, str] = field(default_factory=dict)
    line: int = 0


@dataclass
class Scenario:
    """A validated presentation with its named connections and task list."""
    name: str
    presentation: Presentation
    tasks: List[Task] = field(default_factory=list)
    connections: Dict[str, ConnectionAssignment] = field(default_factory=dict)
    description: str = ""
    validation: ValidationReport = field(default_factory=ValidationReport)
    path: str = ""

    @property
    def is_model(self) -> bool:
        return isinstance(self.presentation, OneObjectModel)

    def tasks_for(self, command: str) -> List[Task]:
        return [t for t in self.tasks if t.command == command]

    def connection(self, name: Optional[str]) -> ConnectionAssignment:
        if not name or name == "trivial":
            return ConnectionAssignment.trivial(self.presentation.dim)
        try:
            return self.connections[name]
        except KeyError:
            raise ScenarioError(f"unknown connection {name!r}")

    def with_seed(self, seed: int) -> "Scenario":
        """A copy whose presentation samples under seed, validated again."""
        presentation = self.presentation.reseeded(seed)
        return replace(self, presentation=presentation, validation=validate(presentation))


@dataclass
class _Record:
    section: str
    values: Dict[str, str]
    columns: Dict[str, int]
    line: int

    def get(self, key: str, default: Optional[str] = None) -> str:
        if key in self.values:
            return self.values[key]
        if default is not None:
            return default
        raise ScenarioError(f"[{self.section}] needs {key}=", self.line, 1)

    def column(self, key: str) -> int:
        return self.columns.get(key, 1)


def _unquote(value: str) -> str:
    value = value.strip()
    if len(value) >= 2 and value[0] == value[-1] == '"':
        return value[1:-1]
    return value


def _parse_pairs(text: str, line: int, offset: int) -> Tuple[Dict[str, str], Dict[str, int]]:
    values, columns = {}, {}
    position = 0
    text = text.rstrip()
    while position < len(text):
        match = _PAIR.match(text, position)
        if not match or match.end() == position:
            raise ScenarioError(f"expected key=value near {text[position:position + 20]!r}", line,
                                offset + position + 1)
        key = match.group(1).replace("-", "_")
        if key in values:
            raise ScenarioError(f"duplicate key {key!r}", line, offset + match.start(1) + 1)
        values[key] = _unquote(match.group(2))
        columns[key] = offset + match.start(2) + 1
        position = match.end()
    return values, columns


def _strip_comment(raw: str) -> str:
    quoted = False
    for i, char in enumerate(raw):
        if char == '"':
            quoted = not quoted
        elif char == "#" and not quoted:
            return raw[:i]
    return raw


def _records(text: str) -> List[_Record]:
    records: List[_Record] = []
    section = None
    for number, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line.strip():
            continue
        indent = len(line) - len(line.lstrip())
        header = _HEADER.match(line.strip())
        if header:
            section = header.group(1)
            if section not in SECTIONS:
                raise ScenarioError(f"unknown section [{section}]", number, indent + 1)
            rest_offset = indent + header.end()
            values, columns = _parse_pairs(line[rest_offset:], number, rest_offset)
            if section == "compose":
                # the table entries follow on their own lines
                if values:
                    raise ScenarioError("[compose] takes no key=value pairs", number, rest_offset + 1)
                continue
            records.append(_Record(section, values, columns, number))
        elif section == "compose":
            records.append(_Record("compose", {"entry": line.strip()}, {"entry": indent + 1}, number))
        else:
            raise ScenarioError("text outside a section record", number, indent + 1)
    return records


def parse_rational(text: str, line: int = 0, column: int = 0) -> sp.Rational:
    try:
        return sp.Rational(text.strip())
    except (TypeError, ValueError, SyntaxError):
        raise ScenarioError(f"{text.strip()!r} is not a rational number", line, column)


def parse_box(text: str, line: int = 0, column: int = 0):
    """[a1,b1;a2,b2;...] into exact bounds."""
    body = text.strip()
    if not (body.startswith("[") and body.endswith("]")):
        raise ScenarioError(f"box {body!r} must be written [a1,b1;...]", line, column)
    box = []
    for part in body[1:-1].split(";"):
        ends = part.split(",")
        if len(ends) != 2:
            raise ScenarioError(f"box side {part!r} needs two ends", line, column)
        a, b = (parse_rational(e, line, column) for e in ends)
        if not a < b:
            raise ScenarioError(f"box side [{a}, {b}] is empty", line, column)
        box.append((a, b))
    return tuple(box)


def _parse_map(record: _Record, dim: int, domain, codomain) -> SmoothMap:
    text = record.get("map")
    texts = [t for t in text.split(";")]
    if len(texts) != dim:
        raise ScenarioError(f"map {text!r} has {len(texts)} components for dimension {dim}",
                            record.line, record.column("map"))
    try:
        return SmoothMap.from_text(texts, domain, codomain)
    except LeafspaceError as exc:
        raise ScenarioError(f"map {text!r}: {exc}", record.line, record.column("map")) from exc


def parse_connection_matrix(text: str, q: int, line: int = 0, column: int = 0) -> MatrixForm:
    """Rows split by ';', entries by '|', dx-coefficients of each entry by ','."""
    context = VariableContext(q)
    variables = chart_symbols(q)
    rows = []
    for row_text in text.split(";"):
        entries = row_text.split("|")
        if len(entries) != q:
            raise ScenarioError(f"connection row {row_text.strip()!r} needs {q} entries", line, column)
        row = []
        for entry in entries:
            coefficients = entry.split(",")
            if len(coefficients) != q:
                raise ScenarioError(f"connection entry {entry.strip()!r} needs {q} dx-coefficients", line, column)
            try:
                exprs = [parse_expr(c, context).expr for c in coefficients]
            except LeafspaceError as exc:
                raise ScenarioError(f"connection entry {entry.strip()!r}: {exc}", line, column) from exc
            row.append(DifferentialForm.one_form(variables, exprs))
        rows.append(row)
    if len(rows) != q:
        raise ScenarioError(f"connection matrix needs {q} rows", line, column)
    return MatrixForm.from_rows(rows)


def _check_task(record: _Record, q: int):
    command = record.get("command")
    if command not in COMMANDS:
        raise ScenarioError(f"unknown command {command!r}", record.line, record.column("command"))
    for key, bound in (("max_degree", config.MAX_DEGREE), ("max_k", q + 2)):
        if key in record.values:
            try:
                value = int(record.values[key])
            except ValueError:
                raise ScenarioError(f"{key} must be an integer", record.line, record.column(key))
            if not 0 <= value <= bound:
                raise ScenarioError(f"{key}={value} outside 0..{bound}", record.line, record.column(key))


def parse_scenario(text: str, path: str = "") -> Scenario:
    """Build a scenario from its text and run presentation validation.

    Args:
        text: Scenario file contents
        path: Where the text came from, for reports

    Returns:
        Scenario carrying its ValidationReport

    Raises:
        ScenarioError: Syntax, resolution or range problems, with line and column
    """
    records = _records(text)
    meta = next((r for r in records if r.section == "scenario"), None)
    name = meta.get("name", "") if meta else ""
    name = name or os.path.splitext(os.path.basename(path))[0] or "scenario"
    description = meta.get("description", "") if meta else ""

    models = [r for r in records if r.section == "model"]
    charts: Dict[str, Chart] = {}
    for r in (r for r in records if r.section == "chart"):
        chart_id = r.get("id")
        if chart_id in charts:
            raise ScenarioError(f"chart id {chart_id!r} is declared twice", r.line, r.column("id"))
        dim = _int(r, "dim")
        box = parse_box(r.get("box"), r.line, r.column("box"))
        if len(box) != dim:
            raise ScenarioError(f"chart {chart_id!r} has a {len(box)}-dimensional box for dim={dim}",
                                r.line, r.column("box"))
        charts[chart_id] = Chart(chart_id, dim, box)
    if models and charts:
        raise ScenarioError("a scenario declares either charts or one [model]", models[0].line, 1)
    if len(models) > 1:
        raise ScenarioError("only one [model] per scenario", models[1].line, 1)

    if models:
        presentation = _build_model(models[0], records, name)
    else:
        if not charts:
            raise ScenarioError("scenario declares no charts")
        presentation = _build_presentation(charts, records, name)

    q = presentation.dim
    if not 1 <= q <= config.MAX_CODIMENSION:
        raise ScenarioError(f"dimension {q} outside 1..{config.MAX_CODIMENSION}")

    connections = _build_connections(records, presentation)
    tasks = []
    for r in (r for r in records if r.section == "task"):
        _check_task(r, q)
        params = {k: v for k, v in r.values.items() if k != "command"}
        tasks.append(Task(r.values["command"], params, r.line))

    validation = validate(presentation)
    logger.info("scenario %s: %d tasks, validation %s", name, len(tasks), "ok" if validation.ok else "failed")
    return Scenario(name, presentation, tasks, connections, description, validation, path)


def validate(presentation: Presentation) -> ValidationReport:
    if isinstance(presentation, OneObjectModel):
        return validate_model(presentation)
    return validate_presentation(presentation)


def _int(record: _Record, key: str) -> int:
    try:
        return int(record.get(key))
    except ValueError:
        raise ScenarioError(f"{key} must be an integer", record.line, record.column(key))


def _build_presentation(charts: Dict[str, Chart], records: List[_Record], name: str) -> CategoryPresentation:
    arrows = []
    for r in (r for r in records if r.section == "embedding"):
        src, dst = r.get("src"), r.get("dst")
        for key, chart_id in (("src", src), ("dst", dst)):
            if chart_id not in charts:
                raise ScenarioError(f"embedding {r.get('id')!r} names undeclared chart {chart_id!r}",
                                    r.line, r.column(key))
        dim = charts[src].dim
        arrows.append(EmbeddingArrow(r.get("id"), src, dst, _parse_map(r, dim, charts[src].box, charts[dst].box)))
    table = {}
    for r in (r for r in records if r.section == "compose"):
        match = re.fullmatch(r"([\w.-]+?)\.([\w-]+)\s*=\s*([\w.-]+)", r.values["entry"])
        if not match:
            raise ScenarioError(f"compose entry {r.values['entry']!r} must read g.f=h", r.line, r.column("entry"))
        g, f, h = match.groups()
        if (g, f) in table:
            raise ScenarioError(f"compose entry {g}.{f} is given twice", r.line, r.column("entry"))
        table[(g, f)] = h
    return CategoryPresentation(list(charts.values()), arrows, table, name)


def _build_model(record: _Record, records: List[_Record], name: str) -> OneObjectModel:
    dim = _int(record, "dim")
    box = parse_box(record.get("box"), record.line, record.column("box"))
    if len(box) != dim:
        raise ScenarioError(f"model box has dimension {len(box)} for dim={dim}", record.line, record.column("box"))
    maps = {}
    for r in (r for r in records if r.section in ("map", "embedding")):
        map_id = r.get("id")
        if map_id in maps:
            raise ScenarioError(f"map id {map_id!r} is declared twice", r.line, r.column("id"))
        maps[map_id] = _parse_map(r, dim, box, box)
    return OneObjectModel(dim, box, maps, name)


def _build_connections(records: List[_Record], presentation: Presentation) -> Dict[str, ConnectionAssignment]:
    q = presentation.dim
    collected: Dict[str, Dict[str, MatrixForm]] = {}
    for r in (r for r in records if r.section == "connection"):
        connection_name = r.get("name")
        chart_id = r.get("chart", OBJECT_ID)
        try:
            presentation.chart(chart_id)
        except LeafspaceError:
            raise ScenarioError(f"connection {connection_name!r} names undeclared chart {chart_id!r}",
                                r.line, r.column("chart"))
        matrix = parse_connection_matrix(r.get("matrix"), q, r.line, r.column("matrix"))
        forms = collected.setdefault(connection_name, {})
        if chart_id in forms:
            raise ScenarioError(f"connection {connection_name!r} is given twice on {chart_id!r}", r.line, 1)
        forms[chart_id] = matrix
    try:
        return {n: ConnectionAssignment(q, forms, n) for n, forms in collected.items()}
    except LeafspaceError as exc:
        raise ScenarioError(str(exc)) from exc


def bundled_scenarios() -> List[str]:
    """Names of the fixtures shipped in the scenario directory."""
    if not os.path.isdir(config.SCENARIO_DIR):
        return []
    return sorted(f[:-len(SCENARIO_SUFFIX)] for f in os.listdir(config.SCENARIO_DIR) if f.endswith(SCENARIO_SUFFIX))


def resolve_scenario_path(name_or_path: str) -> str:
    """A file path as given, or a bundled fixture by name."""
    if os.path.isfile(name_or_path):
        return name_or_path
    candidate = os.path.join(config.SCENARIO_DIR, name_or_path)
    if not candidate.endswith(SCENARIO_SUFFIX):
        candidate += SCENARIO_SUFFIX
    if os.path.isfile(candidate):
        return candidate
    raise ScenarioError(f"no scenario file or bundled fixture named {name_or_path!r}")


def load_scenario(name_or_path: str) -> Scenario:
    path = resolve_scenario_path(name_or_path)
    with open(path, encoding="utf-8") as handle:
        return parse_scenario(handle.read(), path)
