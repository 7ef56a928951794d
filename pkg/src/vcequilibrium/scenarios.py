"""Scenario configuration, comparative-statics experiments and table output.

Config files are flat UTF-8 text, one ``section.key = value`` per line with
``#`` comments. Sections:

``params.<name>``
    any :class:`ModelParams` field.
``grid.<field>``
    any :class:`GridSpec` field.
``solver.<field>``
    any :class:`SolverControls` field, plus ``M0`` and ``H0`` (free-entry start).
``perturb.<label>.<param>``
    a perturbed economy; the value is absolute, or ``*k`` to scale the base value.
    Any ``perturb.*`` line replaces the default experiment set.
``output.<field>``
    ``dir``, ``policies``, ``regions``.
``transition.<field>``
    ``T``, ``M0``, ``H0``.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import model
from .distribution import GridSpec, TypeGrid
from .dynamics import simulate_transition
from .equilibrium import (
    BENCHMARK_ROWS,
    EquilibriumState,
    FreeEntry,
    SolverControls,
    aggregate_report,
    solve_steady_state,
)
from .errors import BracketFailure, NonConvergence, ParseError, ValidationError
from .model import ModelParams

# --- configuration -----------------------------------------------------------


@dataclass(frozen=True)
class Perturbation:
    label: str
    changes: tuple  # of (param, op, value) with op "=" or "*"

    def apply(self, base: ModelParams) -> ModelParams:
        new = {}
        for name, op, value in self.changes:
            new[name] = value if op == "=" else getattr(base, name) * value
        try:
            return base.replace(**new)
        except ValidationError as exc:
            raise ValidationError(f"perturb.{self.label}.{exc.key}", str(exc).split(": ", 1)[-1]) from exc

    def describe(self, base: ModelParams) -> str:
        applied = self.apply(base)
        return " ".join(f"{name}={getattr(applied, name):.6g}" for name, _, _ in self.changes)


DEFAULT_PERTURBATIONS = (
    Perturbation("lower_I", (("I", "*", 0.8),)),
    Perturbation("lower_r", (("r", "=", 0.02),)),
    Perturbation("lower_kappa_v", (("kappa_v", "*", 0.5),)),
)


@dataclass(frozen=True)
class OutputSpec:
    dir: str = "out"
    policies: bool = True
    regions: bool = True


@dataclass(frozen=True)
class TransitionSpec:
    T: int = 200
    M0: float = 0.0
    H0: float = 0.0

    def __post_init__(self):
        if isinstance(self.T, bool) or int(self.T) != self.T or self.T < 1:
            raise ValidationError("transition.T", "must be an integer >= 1")
        object.__setattr__(self, "T", int(self.T))
        for name in ("M0", "H0"):
            if not getattr(self, name) >= 0:
                raise ValidationError(f"transition.{name}", "must be nonnegative")


@dataclass(frozen=True)
class ScenarioConfig:
    params: ModelParams = field(default_factory=ModelParams)
    grid: GridSpec = field(default_factory=GridSpec)
    solver: SolverControls = field(default_factory=SolverControls)
    start: FreeEntry = field(default_factory=FreeEntry)
    perturbations: tuple = DEFAULT_PERTURBATIONS
    output: OutputSpec = field(default_factory=OutputSpec)
    transition: TransitionSpec = field(default_factory=TransitionSpec)


_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _coerce(key, raw, kind):
    try:
        if kind is bool:
            return _BOOL[raw.lower()]
        if kind is int:
            x = float(raw)
            if x != int(x):
                raise ValueError
            return int(x)
        if kind is float:
            return float(raw)
        return raw
    except (KeyError, ValueError):
        raise ValidationError(key, f"cannot read {raw!r} as {kind.__name__}") from None


def _field_kinds(cls):
    default = cls()
    return {f.name: type(getattr(default, f.name)) for f in fields(cls)}


def _parse_lines(text):
    entries = []
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParseError(n, "expected 'section.key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or "." not in key:
            raise ParseError(n, f"key {key!r} has no section prefix")
        if not value:
            raise ParseError(n, f"missing value for {key!r}")
        entries.append((n, key, value))
    return entries


def parse_config(text: str) -> ScenarioConfig:
    sections = {"params": {}, "grid": {}, "solver": {}, "output": {}, "transition": {}}
    kinds = {
        "params": {name: float for name in model.PARAM_NAMES},
        "grid": _field_kinds(GridSpec),
        "solver": {**_field_kinds(SolverControls), "M0": float, "H0": float},
        "output": _field_kinds(OutputSpec),
        "transition": _field_kinds(TransitionSpec),
    }
    perturb = {}
    seen = set()
    for n, key, value in _parse_lines(text):
        if key in seen:
            raise ParseError(n, f"duplicate key {key!r}")
        seen.add(key)
        section, rest = key.split(".", 1)
        if section == "perturb":
            label, _, name = rest.partition(".")
            if not label or not name or "." in name:
                raise ParseError(n, "expected 'perturb.<label>.<param>'")
            if name not in model.PARAM_NAMES:
                raise ValidationError(key, "not a model parameter")
            op = "*" if value.startswith("*") else "="
            number = _coerce(key, value[1:].strip() if op == "*" else value, float)
            perturb.setdefault(label, []).append((name, op, number))
            continue
        if section not in sections:
            raise ParseError(n, f"unknown section {section!r}")
        if rest not in kinds[section]:
            raise ValidationError(key, f"unknown key in section {section!r}")
        sections[section][rest] = _coerce(key, value, kinds[section][rest])

    def build(cls, section):
        try:
            return cls(**sections[section])
        except ValidationError as exc:
            key = exc.key if exc.key.startswith(section + ".") else f"{section}.{exc.key}"
            raise ValidationError(key, str(exc).split(": ", 1)[-1]) from exc

    params = build(ModelParams, "params")
    grid = build(GridSpec, "grid")
    solver_kw = dict(sections["solver"])
    start = FreeEntry(solver_kw.pop("M0", FreeEntry.M0), solver_kw.pop("H0", FreeEntry.H0))
    if not (start.M0 > 0 and start.H0 > 0):
        raise ValidationError("solver.M0", "free-entry starting masses must be positive")
    sections["solver"] = solver_kw
    solver = build(SolverControls, "solver")
    _check_solver(solver)
    output = build(OutputSpec, "output")
    transition = build(TransitionSpec, "transition")

    perturbations = DEFAULT_PERTURBATIONS
    if perturb:
        perturbations = tuple(Perturbation(label, tuple(changes)) for label, changes in perturb.items())
    for p in perturbations:
        p.apply(params)
    return ScenarioConfig(params, grid, solver, start, perturbations, output, transition)


def _check_solver(s: SolverControls):
    for name in ("price_tol", "entry_tol", "damping", "max_step"):
        if not getattr(s, name) > 0:
            raise ValidationError(f"solver.{name}", "must be strictly positive")
    for name in ("max_outer", "max_entry", "max_doublings"):
        if not getattr(s, name) >= 1:
            raise ValidationError(f"solver.{name}", "must be at least 1")


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(config: ScenarioConfig) -> str:
    """Every effective setting, in a form :func:`parse_config` reads back identically."""

    def fmt(x):
        if isinstance(x, bool):
            return "true" if x else "false"
        if isinstance(x, float):
            return repr(x)
        return str(x)

    lines = []
    for section, obj in (("params", config.params), ("grid", config.grid), ("solver", config.solver)):
        lines += [f"{section}.{f.name} = {fmt(getattr(obj, f.name))}" for f in fields(obj)]
    lines.append(f"solver.M0 = {fmt(float(config.start.M0))}")
    lines.append(f"solver.H0 = {fmt(float(config.start.H0))}")
    for p in config.perturbations:
        for name, op, value in p.changes:
            lines.append(f"perturb.{p.label}.{name} = {'*' if op == '*' else ''}{fmt(float(value))}")
    for section, obj in (("output", config.output), ("transition", config.transition)):
        lines += [f"{section}.{f.name} = {fmt(getattr(obj, f.name))}" for f in fields(obj)]
    return "\n".join(lines) + "\n"


def with_overrides(config: ScenarioConfig, out=None, resolution=None) -> ScenarioConfig:
    if out is not None:
        config = replace(config, output=replace(config.output, dir=str(out)))
    if resolution is not None:
        try:
            config = replace(config, grid=replace(config.grid, nz=resolution, nc=resolution))
        except ValidationError as exc:
            raise ValidationError("--resolution", str(exc)) from exc
    return config


# --- tables ------------------------------------------------------------------


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    return str(x)


def write_table(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(x) for x in row])
    return path


def read_table(path):
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def write_effective_config(config: ScenarioConfig, out_dir):
    path = os.path.join(out_dir, "effective_config.txt")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dump_config(config))
    return path


# --- single economy ----------------------------------------------------------

SOLVER_ERRORS = (NonConvergence, BracketFailure)


def solve(config: ScenarioConfig, params: ModelParams | None = None, grid: TypeGrid | None = None,
          start: FreeEntry | None = None) -> EquilibriumState:
    params = params or config.params
    grid = grid or config.grid.build()
    return solve_steady_state(params, grid, start or config.start, config.solver)


def policy_rows(state: EquilibriumState, grid: TypeGrid, params: ModelParams):
    Z, C = grid.mesh()
    pol = model.evaluate_policies(Z, C, state.prices, params)
    cols = (Z, C, pol.mode, pol.f, pol.h, pol.l, pol.S_e, pol.S_v)
    flat = [np.asarray(x).ravel() for x in cols]
    for i in range(flat[0].size):
        yield (float(flat[0][i]), float(flat[1][i]), int(flat[2][i])) + tuple(float(x[i]) for x in flat[3:])


POLICY_HEADER = ("z", "c", "mode", "f", "h", "l", "S_e", "S_v")
REGION_HEADER = ("c", "z_s", "z_vc", "vc_dominates", "z_vc_status")


def region_rows(state: EquilibriumState, grid: TypeGrid, params: ModelParams):
    rb = model.region_boundaries(state.prices, params, grid.c_nodes)
    for i, c in enumerate(rb.c):
        yield (float(c), float(rb.z_s[i]), float(rb.z_vc[i]), bool(c >= rb.c_v), rb.z_vc_status[i])


def emit_region_data(state: EquilibriumState, config: ScenarioConfig, path=None,
                     params: ModelParams | None = None):
    """One row per configured c node: bank threshold, VC threshold and region flags."""
    grid = config.grid.build()
    path = path or os.path.join(config.output.dir, "regions.csv")
    return write_table(path, REGION_HEADER, region_rows(state, grid, params or config.params))


def summary_rows(state: EquilibriumState):
    rep = aggregate_report(state)
    return list(rep.rows + rep.diagnostics)


def run_benchmark(config: ScenarioConfig):
    """Solve the benchmark and write summary, policy and region tables."""
    out = config.output.dir
    os.makedirs(out, exist_ok=True)
    write_effective_config(config, out)
    grid = config.grid.build()
    state = solve(config, grid=grid)
    files = [write_table(os.path.join(out, "summary.csv"), ("quantity", "value"), summary_rows(state))]
    if config.output.policies:
        files.append(write_table(os.path.join(out, "policies.csv"), POLICY_HEADER,
                                 policy_rows(state, grid, config.params)))
    if config.output.regions:
        files.append(emit_region_data(state, config))
    return state, files


# --- comparative statics -----------------------------------------------------


@dataclass(frozen=True)
class SignCheck:
    proposition: str
    scenario: str
    claim: str
    expected: str
    observed: str
    passed: bool


@dataclass
class ScenarioResult:
    label: str
    description: str
    params: ModelParams
    state: EquilibriumState | None
    error: str = ""
    policies: list = field(default_factory=list)
    regions: list = field(default_factory=list)


@dataclass
class ComparativeReport:
    benchmark: ScenarioResult
    scenarios: list
    checks: list

    @property
    def solver_failed(self):
        return any(r.state is None for r in [self.benchmark] + self.scenarios)

    @property
    def checks_passed(self):
        return all(c.passed for c in self.checks)


# claim family checked for a one-parameter decrease
PROPOSITIONS = {"I": "cheaper investment", "r": "lower interest rate", "kappa_v": "cheaper VC entry"}


def _direction(new, old):
    if new > old:
        return "rises"
    if new < old:
        return "falls"
    return "unchanged"


def _pointwise(new_vals, old_vals):
    d = np.asarray(new_vals) - np.asarray(old_vals)
    if d.size == 0:
        return "empty"
    if np.all(d < 0):
        return "falls"
    if np.all(d > 0):
        return "rises"
    return f"mixed ({int(np.sum(d < 0))} fall, {int(np.sum(d > 0))} rise)"


def _summary(result: ScenarioResult):
    return dict(summary_rows(result.state))


def _boundary_direction(base: ScenarioResult, alt: ScenarioResult, column):
    idx = REGION_HEADER.index(column)
    old = np.array([r[idx] for r in base.regions], dtype=float)
    new = np.array([r[idx] for r in alt.regions], dtype=float)
    if column == "z_vc":
        st = REGION_HEADER.index("z_vc_status")
        keep = np.array([(a[st] == "interior") and (b[st] == "interior") for a, b in zip(base.regions, alt.regions)])
        old, new = old[keep], new[keep]
    return _pointwise(new, old)


def _h_direction(base: ScenarioResult, alt: ScenarioResult):
    mode, h = POLICY_HEADER.index("mode"), POLICY_HEADER.index("h")
    both = [(a[h], b[h]) for a, b in zip(base.policies, alt.policies)
            if a[mode] == model.Mode.VC and b[mode] == model.Mode.VC]
    if not both:
        return "empty"
    old, new = np.array(both).T
    return _pointwise(new, old)


def sign_checks(base: ScenarioResult, alt: ScenarioResult, perturbation: Perturbation):
    """Proposition checks for a one-parameter decrease in I, r or kappa_v."""
    if len(perturbation.changes) != 1:
        return []
    name = perturbation.changes[0][0]
    if name not in PROPOSITIONS or not getattr(alt.params, name) < getattr(base.params, name):
        return []
    prop = PROPOSITIONS[name]

    def rec(claim, expected, observed):
        return SignCheck(prop, alt.label, claim, expected, observed, expected == observed)

    if alt.state is None or base.state is None:
        return [rec("scenario solved", "converged", "failed")]

    s0, s1 = _summary(base), _summary(alt)
    checks = []
    if name in ("I", "r"):
        checks.append(rec("bank threshold z_s(c)", "falls", _boundary_direction(base, alt, "z_s")))
        checks.append(rec("VC threshold z_vc(c)", "falls", _boundary_direction(base, alt, "z_vc")))
    if name == "I":
        checks.append(rec("VC effort h on common VC set", "falls", _h_direction(base, alt)))
    if name == "kappa_v":
        checks.append(rec("VC cost cutoff c_v", "falls", _direction(s1["c_v"], s0["c_v"])))
        checks.append(rec("VC effort h on common VC set", "rises", _h_direction(base, alt)))
    if name in ("I", "r"):
        checks.append(rec("entrepreneur mass M", "rises", _direction(s1["M"], s0["M"])))
    if name in ("r", "kappa_v"):
        checks.append(rec("VC effort supply H", "rises", _direction(s1["H"], s0["H"])))
    checks.append(rec("labor productivity Y/L", "rises", _direction(s1["Y/L"], s0["Y/L"])))
    return checks


def solve_scenario(config, label, description, params, grid, start=None) -> ScenarioResult:
    """Solve one economy and tabulate its policies and regions; failures are recorded, not raised."""
    try:
        state = solve(config, params=params, grid=grid, start=start)
    except SOLVER_ERRORS as exc:
        return ScenarioResult(label, description, params, None, error=str(exc))
    return ScenarioResult(
        label, description, params, state,
        policies=list(policy_rows(state, grid, params)),
        regions=list(region_rows(state, grid, params)),
    )


def run_comparative(config: ScenarioConfig) -> ComparativeReport:
    """Benchmark plus every perturbed economy, sign checks and tables.

    Perturbed solves start from the benchmark masses. A scenario that fails to
    solve is reported with a flag and NaN entries; the rest still run.
    """
    if not config.perturbations:
        raise ValidationError("perturb", "at least one perturbation is required")
    out = config.output.dir
    os.makedirs(out, exist_ok=True)
    write_effective_config(config, out)
    grid = config.grid.build()

    base = solve_scenario(config, "benchmark", "benchmark", config.params, grid)
    start = FreeEntry(base.state.M, base.state.H) if base.state is not None else None
    results, checks = [], []
    for p in config.perturbations:
        params = p.apply(config.params)
        res = solve_scenario(config, p.label, p.describe(config.params), params, grid, start)
        results.append(res)
        checks.extend(sign_checks(base, res, p))

    report = ComparativeReport(base, results, checks)
    _write_comparative(report, config)
    return report


def _write_comparative(report: ComparativeReport, config: ScenarioConfig):
    out = config.output.dir
    columns = [report.benchmark] + report.scenarios
    header = ["quantity"] + [r.label if r.label == "benchmark" else f"{r.label} ({r.description})" for r in columns]
    tables = [dict(summary_rows(r.state)) if r.state is not None else {} for r in columns]
    keys = list(BENCHMARK_ROWS)
    if report.benchmark.state is not None:
        keys = [k for k, _ in summary_rows(report.benchmark.state)]
    rows = [[k] + [t.get(k, math.nan) for t in tables] for k in keys]
    rows.append(["converged"] + [r.state is not None for r in columns])
    write_table(os.path.join(out, "summary.csv"), header, rows)

    write_table(
        os.path.join(out, "proposition_checks.csv"),
        ("proposition", "scenario", "claim", "expected", "observed", "passed"),
        [(c.proposition, c.scenario, c.claim, c.expected, c.observed, c.passed) for c in report.checks],
    )
    for r in columns:
        if r.state is None:
            continue
        if config.output.policies:
            write_table(os.path.join(out, f"policies_{r.label}.csv"), POLICY_HEADER, r.policies)
        if config.output.regions:
            write_table(os.path.join(out, f"regions_{r.label}.csv"), REGION_HEADER, r.regions)


# --- transition --------------------------------------------------------------


def run_transition(config: ScenarioConfig):
    """Benchmark steady state, then the mass path from the configured start."""
    out = config.output.dir
    os.makedirs(out, exist_ok=True)
    write_effective_config(config, out)
    state = solve(config)
    tr = config.transition
    path = simulate_transition(tr.M0, tr.H0, tr.T, config.params, state.M, state.H)
    file = write_table(os.path.join(out, "transition.csv"), ("t", "M", "H", "m_e", "m_v"), path.rows())
    return state, path, file
