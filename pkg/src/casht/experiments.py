"""Scenario configuration, experiment runners and CSV emission.

Config files are flat ``key = value`` lines with ``#`` comments; dotted keys
group related settings::

    name = loglogistic-desk
    hypotheses = 8
    actions = 4
    trials = 2000
    seed = 2024
    policies = chernoff, nj1, phidelta
    deltas = 0.1, 0.01, 0.001, 0.0001
    deadline = median
    instance.seed = 1
    cost.family = loglogistic
    cost.alpha = uniform(1, 2)
    cost.beta = alpha            # tie the shape to the drawn scale
    cost.seed = 7
    cost.action.2 = pareto(2.5, 1.5)   # explicit per-action override

Every CSV float is written with 17 significant digits, so files round-trip
exactly and identical runs give identical bytes.
"""
from __future__ import annotations

import csv
import io
import math
import os
import re
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .costs import FAMILIES, CostModel, Erlang, LogLogistic, Pareto, make_cost_model
from .deadlines import MODES, DeadlinePlan, benefit_verdict, pareto_optimal_deadline, plan_deadlines
from .engine import TIMINGS, Arm, BatchSummary, run_batch
from .numerics import incomplete_beta, rng_stream
from .observations import ObservationModel, generate_benchmark_instance
from .policies import POLICY_KINDS, PolicyConfig

OUTPUT_ENV = "CASHT_OUTPUT_DIR"
RESULT_COLUMNS = (
    "policy", "cost_family", "deadline_mode", "delta", "trials", "avg_total_cost", "stderr",
    "empirical_error", "avg_N", "avg_N_eff", "avg_N_cancel", "censored_count",
)
KAPPA_COLUMNS = ("family", "params", "T", "kappa", "mean", "overshoot", "verdict")

FAMILY_PARAMS = {
    "exponential": ("rate",),
    "erlang": ("k", "rate"),
    "hyperexponential": ("p", "rate1", "rate2"),
    "pareto": ("x_min", "alpha"),
    "loglogistic": ("alpha", "beta"),
}
# hyper-draw rules used when a parameter is not configured
FAMILY_DEFAULTS = {
    "pareto": {"x_min": ("uniform", 2.0, 3.0), "alpha": ("uniform", 1.1, 2.0)},
    "loglogistic": {"alpha": ("uniform", 1.0, 2.0), "beta": ("ref", "alpha")},
}


class ConfigError(ValueError):
    pass


def default_output_dir() -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "results"))


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# scenario
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Scenario:
    name: str = "scenario"
    hypotheses: int = 8
    actions: int = 4
    trials: int = 2000
    seed: int = 2024
    parallelism: int = 1
    max_steps: int = 1_000_000
    timing: str = "ex_ante"
    deadline: str = "optimal"
    deadline_fixed: tuple[float, ...] = ()
    policies: tuple[str, ...] = POLICY_KINDS
    deltas: tuple[float, ...] = (1e-1, 1e-2, 1e-3, 1e-4)
    rho_tilde: float = 0.75
    instance_seed: int = 1
    instance_file: str = ""
    cost_family: str = "pareto"
    cost_seed: int = 7
    cost_params: tuple[tuple[str, tuple], ...] = ()
    cost_actions: tuple[tuple[int, str], ...] = ()
    output: str = ""

    def __post_init__(self):
        if self.hypotheses < 2:
            raise ConfigError("hypotheses: need at least 2")
        if self.actions < 1:
            raise ConfigError("actions: need at least 1")
        if self.trials < 1:
            raise ConfigError("trials: must be >= 1")
        if self.parallelism < 1:
            raise ConfigError("parallelism: must be >= 1")
        if self.max_steps < 1:
            raise ConfigError("max_steps: must be >= 1")
        if self.timing not in TIMINGS:
            raise ConfigError(f"timing: must be one of {TIMINGS}")
        if self.deadline not in MODES:
            raise ConfigError(f"deadline: must be one of {MODES}")
        if self.deadline == "fixed" and not self.deadline_fixed:
            raise ConfigError("deadline.fixed: required when deadline = fixed")
        if not self.policies or any(p not in POLICY_KINDS for p in self.policies):
            raise ConfigError(f"policies: each must be one of {POLICY_KINDS}")
        if not self.deltas or any(not 0.0 < d < 1.0 for d in self.deltas):
            raise ConfigError("delta: every value must lie in (0, 1)")
        if not 0.5 < self.rho_tilde < 1.0:
            raise ConfigError("rho_tilde: must lie in (0.5, 1)")
        if self.cost_family not in FAMILIES:
            raise ConfigError(f"cost.family: must be one of {sorted(FAMILIES)}")
        known = FAMILY_PARAMS[self.cost_family]
        for k, _ in self.cost_params:
            if k not in known:
                raise ConfigError(f"cost.{k}: not a parameter of {self.cost_family} {known}")
        for a, _ in self.cost_actions:
            if not 0 <= a < self.actions:
                raise ConfigError(f"cost.action.{a}: action index out of range")

    # -- resolution --------------------------------------------------------
    def param_rules(self) -> dict[str, tuple]:
        rules = dict(FAMILY_DEFAULTS.get(self.cost_family, {}))
        rules.update(dict(self.cost_params))
        missing = [p for p in FAMILY_PARAMS[self.cost_family] if p not in rules]
        explicit = {a for a, _ in self.cost_actions}
        if missing and len(explicit) < self.actions:
            raise ConfigError(f"cost.{missing[0]}: required for family {self.cost_family}")
        return rules

    def cost_models(self) -> list[CostModel]:
        """Per-action cost models; hyperparameters are drawn once from ``cost.seed``."""
        rules = self.param_rules()
        overrides = dict(self.cost_actions)
        rng = rng_stream(self.cost_seed, 0)
        out = []
        for a in range(self.actions):
            if a in overrides:
                out.append(parse_model_spec(overrides[a]))
                continue
            drawn: dict[str, float] = {}
            for p in FAMILY_PARAMS[self.cost_family]:
                rule = rules[p]
                if rule[0] == "fixed":
                    drawn[p] = rule[1]
                elif rule[0] == "uniform":
                    drawn[p] = float(rng.uniform(rule[1], rule[2]))
                else:
                    drawn[p] = drawn[rule[1]]
            out.append(make_cost_model(self.cost_family, *(drawn[p] for p in FAMILY_PARAMS[self.cost_family])))
        return out

    def observation_model(self) -> ObservationModel:
        if self.instance_file:
            obs = ObservationModel.load(self.instance_file)
            if obs.means.shape != (self.hypotheses, self.actions):
                raise ConfigError(f"instance.file: shape {obs.means.shape} does not match hypotheses x actions")
            return obs
        return generate_benchmark_instance(self.hypotheses, self.actions, rng_stream(self.instance_seed, 0))

    def plan(self, models: Sequence[CostModel]) -> DeadlinePlan:
        fixed = self.deadline_fixed if self.deadline == "fixed" else None
        if fixed is not None and len(fixed) == 1:
            fixed = fixed[0]
        return plan_deadlines(models, self.deadline, fixed)

    # -- serialisation -----------------------------------------------------
    def to_config(self) -> str:
        lines = []
        for key, value in _scenario_items(self):
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def _rule_text(rule: tuple) -> str:
    if rule[0] == "fixed":
        return fmt(rule[1])
    if rule[0] == "uniform":
        return f"uniform({fmt(rule[1])}, {fmt(rule[2])})"
    return rule[1]


def _scenario_items(s: Scenario):
    yield "name", s.name
    yield "hypotheses", fmt(s.hypotheses)
    yield "actions", fmt(s.actions)
    yield "trials", fmt(s.trials)
    yield "seed", fmt(s.seed)
    yield "parallelism", fmt(s.parallelism)
    yield "max_steps", fmt(s.max_steps)
    yield "timing", s.timing
    yield "deadline", s.deadline
    if s.deadline_fixed:
        yield "deadline.fixed", ", ".join(fmt(v) for v in s.deadline_fixed)
    yield "policies", ", ".join(s.policies)
    yield "deltas", ", ".join(fmt(d) for d in s.deltas)
    yield "rho_tilde", fmt(s.rho_tilde)
    yield "instance.seed", fmt(s.instance_seed)
    if s.instance_file:
        yield "instance.file", s.instance_file
    yield "cost.family", s.cost_family
    yield "cost.seed", fmt(s.cost_seed)
    for k, rule in s.cost_params:
        yield f"cost.{k}", _rule_text(rule)
    for a, spec in s.cost_actions:
        yield f"cost.action.{a}", spec
    if s.output:
        yield "output", s.output


_MODEL_RE = re.compile(r"^\s*([a-z]+)\s*\(([^)]*)\)\s*$")
_UNIFORM_RE = re.compile(r"^uniform\(\s*([^,]+),\s*([^)]+)\)$")


def parse_model_spec(text: str) -> CostModel:
    """``"pareto(1, 1.5)"`` or ``"pareto:1,1.5"`` to a cost model."""
    m = _MODEL_RE.match(text)
    if m:
        family, args = m.group(1), m.group(2)
    elif ":" in text:
        family, args = text.split(":", 1)
    else:
        raise ValueError(f"cannot parse cost model {text!r}; expected family(p1, p2, ...)")
    params = [float(x) for x in args.replace(";", ",").split(",") if x.strip()]
    return make_cost_model(family.strip(), *params)


def model_spec(model: CostModel) -> str:
    return f"{model.family}({', '.join(fmt(p) for p in model.params)})"


def _parse_int(key, v):
    try:
        f = float(v)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {v!r}") from None
    if f != int(f):
        raise ConfigError(f"{key}: expected an integer, got {v!r}")
    return int(f)


def _parse_float(key, v):
    try:
        return float(v)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {v!r}") from None


def _parse_list(v):
    return [x.strip() for x in v.split(",") if x.strip()]


def load_config(text: str) -> Scenario:
    """Parse a flat ``key = value`` config into a validated :class:`Scenario`.

    Unknown keys are rejected. Parse errors carry the line number;
    validation errors name the offending key.
    """
    kw: dict = {}
    cost_params: list = []
    cost_actions: list = []
    seen: set[str] = set()
    scalar = {
        "name": ("name", str), "hypotheses": ("hypotheses", _parse_int), "actions": ("actions", _parse_int),
        "trials": ("trials", _parse_int), "seed": ("seed", _parse_int),
        "parallelism": ("parallelism", _parse_int), "max_steps": ("max_steps", _parse_int),
        "timing": ("timing", str), "deadline": ("deadline", str), "rho_tilde": ("rho_tilde", _parse_float),
        "instance.seed": ("instance_seed", _parse_int), "instance.file": ("instance_file", str),
        "cost.family": ("cost_family", str), "cost.seed": ("cost_seed", _parse_int), "output": ("output", str),
    }
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        if key in scalar:
            attr, conv = scalar[key]
            kw[attr] = value if conv is str else conv(key, value)
        elif key in ("policies", "policy"):
            kw["policies"] = tuple(p.lower() for p in _parse_list(value))
        elif key in ("deltas", "delta"):
            kw["deltas"] = tuple(_parse_float(key, v) for v in _parse_list(value))
        elif key == "deadline.fixed":
            kw["deadline_fixed"] = tuple(_parse_float(key, v) for v in _parse_list(value))
        elif key.startswith("cost.action."):
            idx = _parse_int(key, key.rsplit(".", 1)[1])
            try:
                parse_model_spec(value)
            except ValueError as exc:
                raise ConfigError(f"{key}: {exc}") from None
            cost_actions.append((idx, value))
        elif key.startswith("cost.") and key.count(".") == 1:
            pname = key.split(".", 1)[1]
            m = _UNIFORM_RE.match(value)
            if m:
                rule = ("uniform", _parse_float(key, m.group(1)), _parse_float(key, m.group(2)))
            elif re.fullmatch(r"[a-z_][a-z0-9_]*", value):
                rule = ("ref", value)
            else:
                rule = ("fixed", _parse_float(key, value))
            cost_params.append((pname, rule))
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    kw["cost_params"] = tuple(cost_params)
    kw["cost_actions"] = tuple(sorted(cost_actions))
    try:
        scenario = Scenario(**kw)
        family_params = FAMILY_PARAMS[scenario.cost_family]
        for p, rule in scenario.cost_params:
            if rule[0] == "ref" and (rule[1] not in family_params or family_params.index(rule[1]) >= family_params.index(p)):
                raise ConfigError(f"cost.{p}: can only reference an earlier parameter of {scenario.cost_family}")
        scenario.param_rules()
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return scenario


def benchmark_scenario(family: str, full_scale: bool = False, **overrides) -> Scenario:
    """The two benchmark designs: log-logistic costs with median deadlines, or
    Pareto costs with optimal deadlines. Desk scale unless ``full_scale``."""
    if family == "loglogistic":
        base = Scenario(name="loglogistic", cost_family="loglogistic", deadline="median")
    elif family == "pareto":
        base = Scenario(name="pareto", cost_family="pareto", deadline="optimal")
    else:
        raise ValueError("family must be 'loglogistic' or 'pareto'")
    if full_scale:
        base = replace(base, hypotheses=32, actions=16, trials=50000)
    return replace(base, **overrides)


def scale_up(s: Scenario) -> Scenario:
    return replace(s, hypotheses=32, actions=16, trials=50000)


# ---------------------------------------------------------------------------
# CSV helpers
# ---------------------------------------------------------------------------

def rows_to_csv(columns: Sequence[str], rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if r.get(c) is None else (r[c] if isinstance(r[c], str) else fmt(r[c])) for c in columns])
    return buf.getvalue()


def read_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))


def emit_kappa_curve(model: CostModel, t_grid: Sequence[float]) -> list[dict]:
    """One row per deadline: effective cost, mean, overshoot and verdict.

    Points with ``F(T) = 0`` keep the row but leave ``kappa`` and ``verdict``
    empty.
    """
    rows = []
    params = ";".join(fmt(p) for p in model.params)
    for t in t_grid:
        t = float(t)
        row = {"family": model.family, "params": params, "T": t, "mean": model.mean,
               "overshoot": model.overshoot(t), "kappa": None, "verdict": None}
        if model.cdf(t) > 0.0:
            row["kappa"] = model.kappa(t)
            row["verdict"] = benefit_verdict(model, t).verdict
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# running scenarios
# ---------------------------------------------------------------------------

@dataclass
class ScenarioResult:
    rows: list[dict]
    summaries: dict = field(default_factory=dict)
    costs: list = field(default_factory=list)
    plan: DeadlinePlan | None = None
    paths: dict = field(default_factory=dict)


def manifest_text(s: Scenario, costs: Sequence[CostModel], plan: DeadlinePlan) -> str:
    """A loadable config with every drawn hyperparameter pinned, plus notes.

    Running it again reproduces the results CSV byte for byte.
    """
    pinned = replace(s, cost_actions=tuple((a, model_spec(m)) for a, m in enumerate(costs)))
    notes = [
        "# replay manifest: load with `casht simulate --config <this file>`",
        "# trial t of every batch uses rng_stream(seed, t); the true hypothesis is drawn from it",
        f"# instance: generate_benchmark_instance({s.hypotheses}, {s.actions}, rng_stream({s.instance_seed}, 0))",
        f"# hyperparameters drawn from rng_stream({s.cost_seed}, 0)",
        f"# planned deadlines ({plan.mode}): " + ", ".join(fmt(t) for t in plan.deadlines),
        "# effective costs: " + ", ".join(fmt(k) for k in plan.effective_costs),
    ]
    # parallelism never changes results, so it stays out of the replay record
    body = "".join(line + "\n" for line in pinned.to_config().splitlines() if not line.startswith("parallelism ="))
    return "\n".join(notes) + "\n" + body


def run_scenario(s: Scenario, out_dir=None, results_name: str = "results.csv", backend: str | None = None) -> ScenarioResult:
    """Run every (policy, delta, arm) combination and write CSV + manifest.

    The two arms are ``none`` (no deadlines) and the scenario's deadline mode;
    both see identical trial streams.
    """
    obs = s.observation_model()
    costs = s.cost_models()
    planned = s.plan(costs)
    arms = [("none", plan_deadlines(costs, "none"))]
    if s.deadline != "none":
        arms.append((s.deadline, planned))
    rows, summaries = [], {}
    for policy in s.policies:
        for delta in s.deltas:
            for label, plan in arms:
                arm = Arm(PolicyConfig(policy, delta, s.rho_tilde), obs, costs, plan, s.timing, s.max_steps)
                summ: BatchSummary = run_batch(arm, s.trials, s.seed, s.parallelism, backend)
                summaries[(policy, delta, label)] = summ
                rows.append({
                    "policy": policy, "cost_family": s.cost_family, "deadline_mode": label, "delta": delta,
                    "trials": s.trials, "avg_total_cost": summ.avg_total_cost, "stderr": summ.stderr,
                    "empirical_error": summ.empirical_error, "avg_N": summ.avg_n, "avg_N_eff": summ.avg_n_eff,
                    "avg_N_cancel": summ.avg_n_cancel, "censored_count": summ.censored,
                })
    result = ScenarioResult(rows, summaries, costs, planned)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        res_path = out / results_name
        res_path.write_text(rows_to_csv(RESULT_COLUMNS, rows))
        stem = res_path.stem
        man_path = out / f"{stem}.manifest.txt"
        man_path.write_text(manifest_text(s, costs, planned))
        inst_path = out / f"{stem}.instance.csv"
        inst_path.write_text(obs.to_csv())
        result.paths = {"results": res_path, "manifest": man_path, "instance": inst_path}
    return result


# ---------------------------------------------------------------------------
# figure data
# ---------------------------------------------------------------------------

FIGURE_IDS = (2, 3, 4, 5, 6, 7)


def _curve_with_markers(model: CostModel, grid: Sequence[float], marks: dict[str, float]) -> tuple[list, str]:
    pts = sorted(set(float(t) for t in grid) | set(marks.values()))
    rows = emit_kappa_curve(model, pts)
    names = {v: k for k, v in marks.items()}
    for r in rows:
        r["marker"] = names.get(r["T"], "")
    return rows, rows_to_csv(KAPPA_COLUMNS + ("marker",), rows)


def figure_rows(fig: int) -> tuple[list[dict], str]:
    """Data series behind the analytic figures (2, 3, 6, 7)."""
    if fig == 2:
        opt = pareto_optimal_deadline(1.0, 1.5)
        grid = np.linspace(1.05, 10.0, 180)
        return _curve_with_markers(Pareto(1.0, 1.5), grid, {"threshold": 1.5, "T_star": opt.T_star})
    if fig == 3:
        grid = np.linspace(0.1, 20.0, 200)
        return _curve_with_markers(LogLogistic(4.0, 1.5), grid, {"median": 4.0})
    if fig == 6:
        e = Erlang(2, 1.0)
        rows = [{"T": t, "overshoot": e.overshoot(t), "mean": e.mean, "gap": e.overshoot(t) - e.mean}
                for t in (i / 100.0 for i in range(201))]
        return rows, rows_to_csv(("T", "overshoot", "mean", "gap"), rows)
    if fig == 7:
        rows = []
        for k in range(1, 201):
            beta = (100 + k) / 100.0
            b = 1.0 / beta
            lhs = 2.0 * b * incomplete_beta(0.5, b, 1.0 - b)
            rhs = incomplete_beta(1.0, 1.0 - b, 1.0 + b)
            rows.append({"beta": beta, "kappa_side": lhs, "mean_side": rhs,
                         "holds": lhs <= rhs * (1.0 + 1e-12)})
        return rows, rows_to_csv(("beta", "kappa_side", "mean_side", "holds"), rows)
    raise ValueError(f"unknown figure id {fig}; choose from {FIGURE_IDS}")


def reproduce_figure(fig: int, out=None, desk_scale: bool = False, backend: str | None = None, **overrides):
    """Write the data behind figure ``fig``.

    Figures 4 and 5 run the log-logistic and Pareto scenarios (full scale
    unless ``desk_scale``); ``out`` is then the results CSV path. For the
    others ``out`` is the CSV path, or ``None`` to only return the text.
    """
    if fig in (4, 5):
        family = "loglogistic" if fig == 4 else "pareto"
        s = benchmark_scenario(family, full_scale=not desk_scale, **overrides)
        out_path = Path(out) if out else default_output_dir() / f"figure{fig}.csv"
        res = run_scenario(s, out_path.parent, out_path.name, backend)
        return rows_to_csv(RESULT_COLUMNS, res.rows)
    _, text = figure_rows(fig)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    return text


def cost_vs_log_fit(deltas: Sequence[float], costs: Sequence[float]) -> tuple[float, float, float]:
    """Least-squares ``cost ~ a + b log(1/delta)``; returns ``(a, b, R^2)``."""
    x = np.log(1.0 / np.asarray(deltas, dtype=float))
    y = np.asarray(costs, dtype=float)
    b, a = np.polyfit(x, y, 1)
    resid = y - (a + b * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(a), float(b), r2


def scenario_field_names() -> list[str]:
    return [f.name for f in fields(Scenario)]
