"""Command-line interface: scenario tasks dispatched to the engine modules."""

import logging
import sys
from typing import Any, Callable, Dict, List, Optional

import click

import config
import tracing
from basic import basic_cohomology, compact_basic_coinvariants, invariant_forms
from category import CategoryPresentation, OneObjectModel
from cech import CoefficientSystem, betti, delta_squared_check, duality_check
from chernweil import (
    CocycleDescriptor,
    CocycleDescriptorError,
    CocycleKind,
    calibrate_sign,
    closed_formula_cocycle,
    connection_homotopy,
    cw_cocycle,
    stokes_check,
)
from cochains import residual_sweep, total_coboundary
from collapse import collapse_check, thurston_gv
from errors import LeafspaceError
from reports import Report, Status, TaskResult, render_table
from scenario import Scenario, ScenarioError, Task, load_scenario

logger = logging.getLogger(__name__)

DEFAULT_STRING_LIMIT = 20
SHARED_OPTIONS = ("max_degree", "max_k", "tol")
TRUE_WORDS = ("1", "true", "yes", "on")


# ---------------------------------------------------------------------------
# Parameter access
# ---------------------------------------------------------------------------

def _int(params: Dict[str, Any], key: str, default: Optional[int] = None) -> Optional[int]:
    value = params.get(key)
    if value is None:
        return default
    try:
        return int(value)
    except (TypeError, ValueError):
        raise ScenarioError(f"{key}={value!r} is not an integer")


def _float(params: Dict[str, Any], key: str, default: Optional[float] = None) -> Optional[float]:
    value = params.get(key)
    if value is None:
        return default
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ScenarioError(f"{key}={value!r} is not a number")


def _flag(params: Dict[str, Any], key: str) -> bool:
    value = params.get(key)
    if isinstance(value, bool):
        return value
    return value is not None and str(value).strip().lower() in TRUE_WORDS


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ScenarioError(f"expected a comma separated list of integers, got {text!r}")


def _triples(text: str) -> List[List[str]]:
    triples = []
    for part in str(text).split(";"):
        ids = [a.strip() for a in part.split(",") if a.strip()]
        if len(ids) != 3:
            raise ScenarioError(f"triple {part.strip()!r} must name three maps")
        triples.append(ids)
    return triples


def _require_category(scenario: Scenario, command: str) -> CategoryPresentation:
    if scenario.is_model:
        raise ScenarioError(f"{command} needs a finite category presentation, not a one-object model")
    return scenario.presentation


def _require_model(scenario: Scenario, command: str) -> OneObjectModel:
    if not scenario.is_model:
        raise ScenarioError(f"{command} needs a one-object [model] scenario")
    return scenario.presentation


def _expect_list(params: Dict[str, Any], actual) -> Optional[str]:
    if params.get("expect") is None:
        return None
    expected = _int_list(params["expect"])
    shared = min(len(expected), len(actual))
    if list(actual[:shared]) != expected[:shared]:
        return f"expected {expected[:shared]}, got {list(actual[:shared])}"
    return None


# ---------------------------------------------------------------------------
# Task handlers
# ---------------------------------------------------------------------------

def run_validate(scenario: Scenario, params: Dict[str, Any], report: Report) -> TaskResult:
    p = scenario.presentation
    failures = [f"[{f.kind}] {f.message}" for f in scenario.validation.failures]
    values = {
        "charts": len(p.charts),
        "arrows": len(p.arrows) + len(p.charts),
        "non_identity_arrows": len(p.arrows),
        "failures": failures,
    }
    status = Status.PASS if scenario.validation.ok else Status.FAIL
    message = "" if status is Status.PASS else f"{len(failures)} validation failures"
    return TaskResult(command="validate", status=status, values=values, message=message)


def run_betti(scenario: Scenario, params: Dict[str, Any], report: Report) -> TaskResult:
    p = _require_category(scenario, "betti")
    coefficient = CoefficientSystem.parse(str(params.get("coefficient", "trivial")))
    N = _int(params, "max_degree", 8)
    table = betti(p, coefficient, N)
    squared_zero = delta_squared_check(p, coefficient, N)
    values = {"coefficient": table.coefficient, "betti": list(table.betti), "delta_squared_zero": squared_zero}
    mismatch = _expect_list(params, table.betti)
    status = Status.PASS if squared_zero and mismatch is None else Status.FAIL
    message = mismatch or ("" if squared_zero else "delta^2 is not zero")
    return TaskResult(command="betti", status=status, parameters={"max_degree": N}, values=values, message=message)


def run_duality(scenario: Scenario, params: Dict[str, Any], report: Report) -> TaskResult:
    p = _require_category(scenario, "duality")
    N = _int(params, "max_degree", 6)
    result = duality_check(p, p.dim, N)
    pairs = [[pair.degree, pair.cohomology_dim, pair.compact_degree, pair.compact_dim] for pair in result.pairs]
    status = Status.PASS if result.passed else Status.FAIL
    message = "" if result.passed else "dimensions differ in some degree"
    return TaskResult(command="duality", status=status, parameters={"max_degree": N},
                      values={"codimension": result.codimension, "pairs": pairs}, message=message)


def run_basic(scenario: Scenario, params: Dict[str, Any], report: Report) -> TaskResult:
    p = _require_category(scenario, "basic")
    D = _int(params, "poly_degree", 2)
    form_degree = _int(params, "form_degree")
    if form_degree is not None:
        dimension = invariant_forms(p, form_degree, D).dimension
        values = {"form_degree": form_degree, "poly_degree": D, "invariant_dimension": dimension}
        expected = _int(params, "expect")
        ok = expected is None or expected == dimension
        return TaskResult(command="basic", status=Status.PASS if ok else Status.FAIL, values=values,
                          message="" if ok else f"expected {expected}, got {dimension}")
    N = _int(params, "max_degree", p.dim)
    result = basic_cohomology(p, D, N)
    coinvariants = [compact_basic_coinvariants(p, l, D - l) for l in range(p.dim + 1)]
    values = {
        "ansatz": result.ansatz_kind,
        "poly_degree": D,
        "invariant_dims": list(result.invariant_dims),
        "betti": list(result.betti),
        "compact_coinvariants": coinvariants,
        "closure_ok": result.closure_ok,
    }
    mismatch = _expect_list(params, result.betti)
    ok = result.closure_ok and mismatch is None
    return TaskResult(command="basic", status=Status.PASS if ok else Status.FAIL, values=values,
                      message=mismatch or ("" if result.closure_ok else "d leaves the invariant forms"))


def _cocycle(scenario: Scenario, descriptor: CocycleDescriptor, connection_name, max_k, tol):
    p = scenario.presentation
    conn = scenario.connection(connection_name)
    closed_kinds = (CocycleKind.U1, CocycleKind.GV, CocycleKind.BOTT_GV)
    if descriptor.kind in closed_kinds or (descriptor.kind is CocycleKind.CHERN_CHARACTER and conn.is_trivial()):
        if descriptor.kind in closed_kinds and not conn.is_trivial():
            raise CocycleDescriptorError(f"{descriptor.label} is defined for the trivial connection only")
        return closed_formula_cocycle(descriptor, p, max_k, tol)
    return cw_cocycle(p, descriptor, conn, max_k, tol)


def run_cocycle(scenario: Scenario, params: Dict[str, Any], report: Report) -> TaskResult:
    p = scenario.presentation
    q = p.dim
    tol = _float(params, "tol", config.DEFAULT_TOL)
    max_k = _int(params, "max_k", q + 2)
    points = _int(params, "points", config.RESIDUAL_SAMPLES)
    limit = _int(params, "string_limit", DEFAULT_STRING_LIMIT)
    label = str(params.get("class", "c1"))
    descriptor = CocycleDescriptor.parse(label, q)
    connection_name = params.get("connection")
    sweep = dict(max_k=max_k, points_per_string=points, string_limit=limit, tol=tol)
    cocycle = _cocycle(scenario, descriptor, connection_name, max_k, tol)

    values: Dict[str, Any] = {"class": label, "bidegrees": [list(b) for b in cocycle.bidegrees]}
    failures = []
    if report.sign_flag is None:
        report.sign_flag = calibrate_sign(p, tol, points, limit).sign

    if _flag(params, "check_closed"):
        residual = residual_sweep(total_coboundary(cocycle), **sweep).max_residual
        values["closed_residual"] = residual
        if not residual < config.RESIDUAL_THRESHOLD:
            failures.append(f"D({label}) residual {residual:.3e}")
    if _flag(params, "expect_vanishing"):
        residual = residual_sweep(cocycle, **sweep).max_residual
        values["max_coefficient"] = residual
        if not residual < config.VANISHING_THRESHOLD:
            failures.append(f"{label} does not vanish: {residual:.3e}")
    if _flag(params, "check_stokes"):
        if descriptor.kind not in (CocycleKind.INVARIANT_POLYNOMIAL, CocycleKind.CHERN_CHARACTER):
            raise CocycleDescriptorError(f"the Stokes identity needs an invariant polynomial, not {label}")
        residual = stokes_check(p, scenario.connection(connection_name), descriptor, min(max_k, 3), tol,
                                points, limit).max_residual
        values["stokes_residual"] = residual
        if not residual < config.RESIDUAL_THRESHOLD:
            failures.append(f"Stokes residual {residual:.3e}")
    against = params.get("homotopy_against")
    if against:
        conn, conn_prime = scenario.connection(connection_name), scenario.connection(against)
        homotopy = connection_homotopy(descriptor, conn, conn_prime, p, max_k, tol)
        difference = cw_cocycle(p, descriptor, conn, max_k, tol) - cw_cocycle(p, descriptor, conn_prime, max_k, tol)
        residual = residual_sweep(total_coboundary(homotopy) - difference, **sweep).max_residual
        values["homotopy_residual"] = residual
        if not residual < config.RESIDUAL_THRESHOLD:
            failures.append(f"D(H) residual {residual:.3e}")
    values["sign_flag"] = report.sign_flag
    status = Status.FAIL if failures else Status.PASS
    return TaskResult(command="cocycle", status=status, tolerance=tol,
                      parameters={"max_k": max_k, "points": points, "string_limit": limit,
                                  "connection": connection_name or "trivial"},
                      values=values, message="; ".join(failures))


def run_thurston(scenario: Scenario, params: Dict[str, Any], report: Report) -> TaskResult:
    model = _require_model(scenario, "thurston")
    tol = _float(params, "tol", config.DEFAULT_TOL)
    if not params.get("triple"):
        raise ScenarioError("thurston needs triple=f,g,h")
    (triple,) = _triples(params["triple"])
    value = thurston_gv(*(model.arrow(a) for a in triple), tol=tol)
    values: Dict[str, Any] = {"triple": triple, "value": value}
    expected = _float(params, "expect")
    ok = expected is None or abs(value - expected) < _float(params, "expect_tol", config.VALUE_THRESHOLD)
    return TaskResult(command="thurston", status=Status.PASS if ok else Status.FAIL, tolerance=tol, values=values,
                      message="" if ok else f"expected {expected}")


def run_collapse_check(scenario: Scenario, params: Dict[str, Any], report: Report) -> TaskResult:
    model = _require_model(scenario, "collapse-check")
    tol = _float(params, "tol", config.DEFAULT_TOL)
    if not params.get("triples"):
        raise ScenarioError("collapse-check needs triples=f,g,h;...")
    samples = _int(params, "cocycle_samples", 0)
    maps = [m.strip() for m in str(params.get("cocycle_maps", "")).split(",") if m.strip()]
    result = collapse_check(model, _triples(params["triples"]), tol, samples, maps or None)
    values: Dict[str, Any] = {
        "triples": [list(t) for t in result.triples],
        "thurston_values": list(result.thurston_values),
        "collapse_values": list(result.collapse_values),
        "max_discrepancy": result.max_discrepancy,
    }
    failures = []
    if not result.max_discrepancy < config.COLLAPSE_THRESHOLD:
        failures.append(f"collapse and Thurston differ by {result.max_discrepancy:.3e}")
    if result.cocycle_residual is not None:
        values["cocycle_residual"] = result.cocycle_residual
        if not result.cocycle_residual < config.COCYCLE_THRESHOLD:
            failures.append(f"Thurston cocycle residual {result.cocycle_residual:.3e}")
    return TaskResult(command="collapse-check", status=Status.FAIL if failures else Status.PASS, tolerance=tol,
                      values=values, message="; ".join(failures))


HANDLERS: Dict[str, Callable[[Scenario, Dict[str, Any], Report], TaskResult]] = {
    "validate": run_validate,
    "betti": run_betti,
    "duality": run_duality,
    "basic": run_basic,
    "cocycle": run_cocycle,
    "thurston": run_thurston,
    "collapse-check": run_collapse_check,
}


def _check_ranges(scenario: Scenario, params: Dict[str, Any]):
    max_degree = _int(params, "max_degree")
    if max_degree is not None and not 0 <= max_degree <= config.MAX_DEGREE:
        raise ScenarioError(f"max_degree={max_degree} outside 0..{config.MAX_DEGREE}")
    max_k = _int(params, "max_k")
    q = scenario.presentation.dim
    if max_k is not None and not 0 <= max_k <= q + 2:
        raise ScenarioError(f"max_k={max_k} outside 0..{q + 2}")
    tol = _float(params, "tol")
    if tol is not None and not tol > 0:
        raise ScenarioError("tol must be positive")


def run_task(scenario: Scenario, task: Task, overrides: Dict[str, Any], report: Report) -> TaskResult:
    """Run one task with command-line overrides; engine errors become status=error."""
    params = {**task.params, **overrides}
    try:
        _check_ranges(scenario, params)
        if task.command != "validate" and not scenario.validation.ok:
            raise ScenarioError(f"presentation failed validation: {scenario.validation.failures[0].message}")
        return HANDLERS[task.command](scenario, params, report)
    except LeafspaceError as exc:
        logger.warning("task %s on %s failed: %s", task.command, scenario.name, exc)
        return TaskResult(command=task.command, status=Status.ERROR, message=str(exc))


def run(scenario: Scenario, overrides: Dict[str, Any] = None, command: Optional[str] = None) -> Report:
    """Execute the scenario's tasks in order, or only those of one command.

    Args:
        scenario: Loaded scenario
        overrides: Command-line parameters, applied over each task's own
        command: Restrict to one command; a bare task runs when the file has
            none or when the overrides carry options specific to the command

    Returns:
        Report with per-task results and the overall status
    """
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None and v is not False}
    seed = overrides.pop("seed", None)
    if seed is not None:
        scenario = scenario.with_seed(seed)
    tol = _float(overrides, "tol", config.DEFAULT_TOL)
    report = Report(scenario=scenario.name, seed=config.DEFAULT_SEED if seed is None else seed, tolerance=tol)
    if command is None:
        tasks = scenario.tasks
    else:
        specific = [k for k in overrides if k not in SHARED_OPTIONS]
        tasks = [] if specific else scenario.tasks_for(command)
        tasks = tasks or [Task(command)]
    tracer = tracing.setup_tracing()
    for task in tasks:
        with tracing.trace_task(tracer, task.command, scenario.name):
            report.add(run_task(scenario, task, overrides, report))
    logger.info("scenario %s: %s", scenario.name, report.status.value)
    return report


# ---------------------------------------------------------------------------
# Click commands
# ---------------------------------------------------------------------------

def scenario_options(f):
    """Options shared by every scenario command."""
    options = [
        click.option("--scenario", "scenario_name", required=True,
                     help="Scenario file or bundled fixture name"),
        click.option("--max-degree", type=int, default=None, help="Largest degree computed"),
        click.option("--max-k", type=int, default=None, help="Longest string sampled"),
        click.option("--tol", type=float, default=None, help="Quadrature tolerance"),
        click.option("--report", "report_format", type=click.Choice(["json", "table"]), default="table",
                     help="Output format"),
        click.option("--seed", type=int, default=None, help="Sampling seed"),
    ]
    for option in reversed(options):
        f = option(f)
    return f


def _emit(report: Report, report_format: str):
    text = report.to_json()
    click.echo(text if report_format == "json" else render_table(text))
    sys.exit(report.exit_code)


def execute(command: Optional[str], scenario_name: str, report_format: str, **overrides):
    """Load, run and print; a scenario that does not load is reported as an error."""
    try:
        scenario = load_scenario(scenario_name)
    except LeafspaceError as exc:
        report = Report(scenario=scenario_name)
        report.add(TaskResult(command=command or "run", status=Status.ERROR, message=str(exc)))
        _emit(report, report_format)
        return
    _emit(run(scenario, overrides, command), report_format)


@click.group()
@click.option("--log-level", default=None, help="Logging level (default from LEAFSPACE_LOG_LEVEL)")
def cli(log_level):
    """Čech and Čech-De Rham invariants of leaf spaces."""
    logging.basicConfig(level=(log_level or config.LOG_LEVEL).upper(),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


@cli.command()
@scenario_options
def validate(scenario_name, report_format, **options):
    """Audit the presentation: resolution, embeddings, closure, associativity."""
    execute("validate", scenario_name, report_format, **options)


@cli.command(name="betti")
@scenario_options
@click.option("--coefficient", type=click.Choice(["trivial", "orientation"]), default=None)
def betti_command(scenario_name, report_format, **options):
    """Betti numbers of the nerve complex."""
    execute("betti", scenario_name, report_format, **options)


@cli.command()
@scenario_options
def duality(scenario_name, report_format, **options):
    """Compare twisted cohomology with compactly supported cohomology."""
    execute("duality", scenario_name, report_format, **options)


@cli.command()
@scenario_options
@click.option("--form-degree", type=int, default=None, help="Report invariant forms of this degree only")
@click.option("--poly-degree", type=int, default=None, help="Polynomial degree bound of the ansatz")
def basic(scenario_name, report_format, **options):
    """Basic cohomology within the polynomial ansatz."""
    execute("basic", scenario_name, report_format, **options)


@cli.command()
@scenario_options
@click.option("--class", "class_", default=None, help="c1, c1^2, c1*c2, u1, gv, gv:a,b or ch:N")
@click.option("--connection", default=None, help="Connection name declared in the scenario")
@click.option("--check-closed", is_flag=True, help="Sweep D of the cocycle")
@click.option("--check-stokes", is_flag=True, help="Sweep the Chern-Simons Stokes identity")
@click.option("--homotopy-against", default=None, help="Second connection for the homotopy check")
def cocycle(scenario_name, report_format, class_, **options):
    """Characteristic-class cocycles and their identities."""
    execute("cocycle", scenario_name, report_format, **{"class": class_}, **options)


@cli.command()
@scenario_options
@click.option("--triple", default=None, help="Three map ids f,g,h of the model")
def thurston(scenario_name, report_format, **options):
    """Thurston's Godbillon-Vey integral on a triple of model maps."""
    execute("thurston", scenario_name, report_format, **options)


@cli.command(name="collapse-check")
@scenario_options
@click.option("--triples", default=None, help="Semicolon separated triples f,g,h")
@click.option("--cocycle-samples", type=int, default=None, help="4-strings for the Thurston cocycle sweep")
@click.option("--cocycle-maps", default=None, help="Comma separated map ids the 4-strings are drawn from")
def collapse_check_command(scenario_name, report_format, **options):
    """Compare the collapsed gv cocycle with Thurston's formula."""
    execute("collapse-check", scenario_name, report_format, **options)


@cli.command(name="run")
@scenario_options
def run_command(scenario_name, report_format, **options):
    """Run every task listed in the scenario."""
    execute(None, scenario_name, report_format, **options)

