"""Experiment orchestration: JSON configs in, CSV tables out."""
from __future__ import annotations

import copy
import csv
import dataclasses
import io
import json
import math
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import blockage_analytic as ba
from . import coverage as cv
from . import montecarlo as mc
from .channel import ChannelParams, QosTarget, gamma_threshold
from .errors import ConfigError
from .scene import BlockageDisk, SceneConfig, equispaced_angles

AXES = ("b", "nB", "lambda_B", "R", "RB", "n_R", "r", "phi", "r0")
MODES = ("analytic", "montecarlo", "both")

DEFAULTS = {
    "scene": {"seed": 0, "radial_law": "area", "theta": 0.0},
    "channel": {
        "P_dBm": 46.0, "antenna_gain_dBi": 17.0, "fc_Hz": 3.5e9, "bandwidth_Hz": 1e6,
        "N0_dBm_per_Hz": -174.0, "alpha": 2.0, "M": 64, "m_nak": 3.0, "omega": 1.0,
    },
    "qos": {"beta": 1.0, "T": 1e-3},
    "analytic": {"user": "average", "placement": "uniform", "form": "marginal",
                 "quantity": "coverage"},
    "montecarlo": {"trials": 100_000, "correlation_model": "exact_geometric", "workers": 1},
    "min_ris": {"target": 0.05, "n_max": 16, "lambda_B": []},
}
REQUIRED = {"scene": ("R", "RB", "nB"), "qos": ("b",)}
SCENE_KEYS = {"R", "r0", "RB", "nB", "n_R", "ris_angles", "seed", "radial_law", "theta"}
TOP_KEYS = {"scenario", "scene", "channel", "qos", "mode", "sweep", "analytic",
            "montecarlo", "min_ris", "output", "relay_curve"}


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    scene: SceneConfig
    channel: ChannelParams
    qos: QosTarget
    mode: str
    sweep_param: Optional[str]
    sweep_values: tuple
    output: Optional[str]
    relay_curve: Optional[str]
    resolved: dict = field(compare=False, hash=False)
    notes: tuple = ()

    @property
    def analytic(self):
        return self.resolved["analytic"]

    @property
    def montecarlo(self):
        return self.resolved["montecarlo"]

    @property
    def min_ris(self):
        return self.resolved["min_ris"]

    @property
    def seed(self):
        return self.scene.rng_seed


@dataclass
class ResultRow:
    axis: float
    analytic_coverage: Optional[float] = None
    analytic_outage: Optional[float] = None
    mc_coverage: Optional[float] = None
    mc_outage: Optional[float] = None
    mc_half_width: Optional[float] = None
    agree: Optional[bool] = None
    wall_time_s: float = 0.0
    extra: dict = field(default_factory=dict)


# --- loading --------------------------------------------------------------

def _parse_json(text, source):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _check_keys(block, allowed, where):
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(unknown)}")


def _fill(raw, notes):
    data = copy.deepcopy(raw)
    _check_keys(data, TOP_KEYS, "config")
    for block, defaults in DEFAULTS.items():
        section = data.setdefault(block, {})
        if not isinstance(section, dict):
            raise ConfigError(f"{block}: expected an object")
        for key, value in defaults.items():
            if key not in section:
                section[key] = copy.deepcopy(value)
                notes.append(f"default {block}.{key} = {json.dumps(value)}")
    for block, keys in REQUIRED.items():
        section = data.get(block, {})
        for key in keys:
            if key not in section:
                raise ConfigError(f"{block}.{key}: required field missing")
    if "W" not in data["qos"]:
        data["qos"]["W"] = data["channel"]["bandwidth_Hz"]
        notes.append("default qos.W = channel.bandwidth_Hz")
    if "mode" not in data:
        data["mode"] = "analytic"
        notes.append('default mode = "analytic"')
    data.setdefault("scenario", "unnamed")
    data.setdefault("output", None)
    data.setdefault("relay_curve", None)
    scene = data["scene"]
    if "r0" not in scene:
        scene["r0"] = scene["R"] / 2
        notes.append("default scene.r0 = R/2")
    if "n_R" not in scene and "ris_angles" not in scene:
        raise ConfigError("scene: give n_R or ris_angles")
    return data


def _num(section, key, where, kind=float):
    value = section[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {value!r}")
    if not math.isfinite(value):
        raise ConfigError(f"{where}.{key}: must be finite")
    if kind is int:
        if int(value) != value:
            raise ConfigError(f"{where}.{key}: expected an integer, got {value!r}")
        return int(value)
    return float(value)


def _choice(section, key, options, where):
    value = section[key]
    if value not in options:
        raise ConfigError(f"{where}.{key}: must be one of {options}, got {value!r}")
    return value


def _scene_from(s):
    _check_keys(s, SCENE_KEYS, "scene")
    if "ris_angles" in s:
        angles = tuple(float(a) for a in s["ris_angles"])
    else:
        angles = equispaced_angles(_num(s, "n_R", "scene", int))
    try:
        return SceneConfig(
            R=_num(s, "R", "scene"), r0=_num(s, "r0", "scene"), RB=_num(s, "RB", "scene"),
            nB=_num(s, "nB", "scene", int), ris_angles=angles,
            rng_seed=_num(s, "seed", "scene", int), radial_law=s["radial_law"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _channel_from(c):
    _check_keys(c, DEFAULTS["channel"], "channel")
    try:
        return ChannelParams.from_db(
            P_dBm=_num(c, "P_dBm", "channel"), fc_Hz=_num(c, "fc_Hz", "channel"),
            bandwidth_Hz=_num(c, "bandwidth_Hz", "channel"),
            N0_dBm_per_Hz=_num(c, "N0_dBm_per_Hz", "channel"), alpha=_num(c, "alpha", "channel"),
            antenna_gain_dBi=_num(c, "antenna_gain_dBi", "channel"), M=_num(c, "M", "channel", int),
            m_nak=_num(c, "m_nak", "channel"), omega=_num(c, "omega", "channel"),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _qos_from(q):
    _check_keys(q, ("b", "beta", "T", "W"), "qos")
    try:
        return QosTarget(b=_num(q, "b", "qos"), beta=_num(q, "beta", "qos"),
                         T=_num(q, "T", "qos"), W=_num(q, "W", "qos"))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def parse_config(raw, source="config", echo=None):
    """Validate a config mapping and apply defaults."""
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: top level must be an object")
    notes = []
    data = _fill(raw, notes)
    scene = _scene_from(data["scene"])
    channel = _channel_from(data["channel"])
    qos = _qos_from(data["qos"])
    mode = _choice(data, "mode", MODES, "config")

    a = data["analytic"]
    _check_keys(a, DEFAULTS["analytic"], "analytic")
    _choice(a, "user", ("average", "fixed"), "analytic")
    _choice(a, "placement", cv.PLACEMENTS, "analytic")
    _choice(a, "form", ("marginal", "void"), "analytic")
    _choice(a, "quantity", ("coverage", "blockage"), "analytic")
    if a["user"] == "fixed":
        try:
            scene.check_user_distance()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    m = data["montecarlo"]
    _check_keys(m, DEFAULTS["montecarlo"], "montecarlo")
    if _num(m, "trials", "montecarlo", int) < 1:
        raise ConfigError("montecarlo.trials: must be at least 1")
    _choice(m, "correlation_model", mc.CORRELATION_MODELS, "montecarlo")
    _num(m, "workers", "montecarlo", int)
    r = data["min_ris"]
    _check_keys(r, DEFAULTS["min_ris"], "min_ris")
    _num(r, "n_max", "min_ris", int)
    if not 0 < _num(r, "target", "min_ris") < 1:
        raise ConfigError("min_ris.target: must lie in (0, 1)")
    _values(r["lambda_B"], "min_ris.lambda_B", allow_empty=True)

    sweep = data.get("sweep")
    param, values = None, ()
    if sweep is not None:
        _check_keys(sweep, ("param", "values"), "sweep")
        if "param" not in sweep or "values" not in sweep:
            raise ConfigError("sweep: needs param and values")
        param = _choice(sweep, "param", AXES, "sweep")
        values = _values(sweep["values"], "sweep.values")
    if notes and echo is not None:
        for n in notes:
            print(f"note: {n}", file=echo)
    return ExperimentConfig(
        name=str(data["scenario"]), scene=scene, channel=channel, qos=qos, mode=mode,
        sweep_param=param, sweep_values=values, output=data["output"],
        relay_curve=data["relay_curve"], resolved=data, notes=tuple(notes),
    )


def _values(values, where, allow_empty=False):
    if not isinstance(values, list) or (not values and not allow_empty):
        raise ConfigError(f"{where}: expected a non-empty list")
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"{where}: values must be finite numbers, got {v!r}")
        out.append(float(v))
    if out != sorted(out):
        raise ConfigError(f"{where}: values must be sorted ascending")
    return tuple(out)


def load_config(path, echo=sys.stderr):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None
    return parse_config(_parse_json(text, path), source=str(path), echo=echo)


# --- evaluation -----------------------------------------------------------

def _with(exp, scene=None, qos=None):
    return dataclasses.replace(exp, scene=scene or exp.scene, qos=qos or exp.qos)


def apply_axis(exp, param, value):
    """Experiment with one swept parameter set to ``value``."""
    s = exp.scene
    avg = exp.analytic["user"] == "average"

    def scene(**kw):
        new = dataclasses.replace(s, **kw)
        return new

    try:
        if param == "b":
            return _with(exp, qos=dataclasses.replace(exp.qos, b=value))
        if param in ("nB", "lambda_B"):
            nB = value if param == "nB" else round(value * math.pi * s.R ** 2)
            if int(nB) != nB:
                raise ConfigError(f"sweep: nB value {value} is not an integer")
            return _with(exp, scene=scene(nB=int(nB)))
        if param == "R":
            # the user distance is a placeholder when averaging over users
            r0 = value / 2 if avg else s.r0
            return _with(exp, scene=scene(R=value, r0=r0))
        if param == "RB":
            return _with(exp, scene=scene(RB=value))
        if param == "n_R":
            if int(value) != value or value < 0:
                raise ConfigError(f"sweep: n_R value {value} is not a count")
            return _with(exp, scene=scene(ris_angles=equispaced_angles(int(value))))
        if param == "r0":
            return _with(exp, scene=scene(r0=value))
        if param == "phi":
            return _with(exp, scene=scene(ris_angles=(value % (2 * math.pi),)))
        if param == "r":
            return exp  # the blockage position is read from the axis value
    except ValueError as exc:
        raise ConfigError(f"sweep {param}={value}: {exc}") from None
    raise ConfigError(f"sweep: unknown parameter {param!r}")


def _coverage_inputs(exp):
    a = exp.analytic
    placement = "fixed" if exp.sweep_param == "phi" else a["placement"]
    return cv.CoverageInputs(exp.scene, exp.channel, gamma_threshold(exp.qos),
                             placement=placement, form=a["form"])


def _sim_spec(exp, point):
    a, m = exp.analytic, exp.montecarlo
    fixed_ris = exp.sweep_param == "phi" or a["placement"] == "fixed"
    return mc.SimSpec(
        cfg=exp.scene, cp=exp.channel, gamma_th=gamma_threshold(exp.qos),
        n_trials=int(m["trials"]), correlation_model=m["correlation_model"], seed=exp.seed,
        user_law="uniform" if a["user"] == "average" else "fixed",
        ris_law="fixed" if fixed_ris else "uniform", form=a["form"], point=point,
    )


def _blockage_row(exp, value, point, row):
    s = exp.scene
    do_a = exp.mode in ("analytic", "both")
    do_m = exp.mode in ("montecarlo", "both")
    trials = int(exp.montecarlo["trials"])
    if exp.sweep_param == "r":
        disk = BlockageDisk(value, exp.resolved["scene"]["theta"])
        if do_a:
            p = ba.single_blockage_probs(disk, s.r0, s.R, s.RB)
            row.extra.update(analytic_p_ris_user=p.p_ris_user, analytic_p_bs_ris=p.p_bs_ris,
                             analytic_p_cascade=p.p_cascade)
        if do_m:
            p = mc.estimate_single_blockage_probs(disk, s.r0, s.R, s.RB, trials, exp.seed + point)
            row.extra.update(mc_p_ris_user=p.p_ris_user, mc_p_bs_ris=p.p_bs_ris,
                             mc_p_cascade=p.p_cascade)
        return
    form = exp.analytic["form"]
    if do_a:
        q = np.asarray(ba.cascade_block_prob(np.asarray(s.ris_angles), s.r0, s.R, s.RB, s.nB, form))
        row.extra.update(analytic_q_direct=float(ba.q_direct(s.r0, s.R, s.RB, s.nB)),
                         analytic_q_cascade=float(np.mean(q)),
                         analytic_q_all_cascades=float(np.prod(q)))
    if do_m:
        spec = dataclasses.replace(_sim_spec(exp, point), user_law="fixed", ris_law="fixed")
        st = mc.estimate_link_probs(spec, int(exp.montecarlo["workers"]))
        row.extra.update(mc_q_direct=st.direct, mc_q_cascade=float(np.mean(st.cascade)),
                         mc_q_all_cascades=st.all_cascades)


def evaluate_point(exp, value, point):
    row = ResultRow(axis=value)
    t0 = time.perf_counter()
    if exp.sweep_param == "r" or exp.analytic["quantity"] == "blockage":
        _blockage_row(exp, value, point, row)
    else:
        if exp.mode in ("analytic", "both"):
            inp = _coverage_inputs(exp)
            if exp.analytic["user"] == "average":
                c = cv.coverage_avg(inp)
            else:
                c = cv.coverage_at(exp.scene.r0, inp)
            row.analytic_coverage, row.analytic_outage = c, cv.outage(c)
        if exp.mode in ("montecarlo", "both"):
            res = mc.simulate_coverage(_sim_spec(exp, point), int(exp.montecarlo["workers"]))
            row.mc_coverage, row.mc_outage = res.coverage.value, res.outage
            row.mc_half_width = res.coverage.half_width
            if row.analytic_coverage is not None:
                row.agree = bool(abs(row.analytic_coverage - row.mc_coverage) <= 3 * res.std_error + 0.01)
    row.wall_time_s = time.perf_counter() - t0
    return row


def run_experiment(exp, out_path=None):
    """Evaluate the sweep and write the CSV (when a path is known)."""
    if exp.sweep_param is None:
        points = [(None, exp)]
    else:
        points = [(v, apply_axis(exp, exp.sweep_param, v)) for v in exp.sweep_values]
    rows = []
    for i, (v, e) in enumerate(points):
        axis = v if v is not None else float("nan")
        rows.append(evaluate_point(e, axis, i))
    path = out_path or exp.output
    if path:
        relay = read_relay_curve(exp.relay_curve) if exp.relay_curve else None
        write_results(path, exp, rows, relay)
    return rows


@dataclass
class MinRisRow:
    lambda_B: float
    nB: int
    target: float
    n_R: Optional[int]
    outage: Optional[float]
    zero_ris_suffices: bool
    wall_time_s: float


def min_ris_cli(exp, target=None, lambda_values=None, n_max=None, out_path=None):
    r = exp.min_ris
    target = float(r["target"] if target is None else target)
    n_max = int(r["n_max"] if n_max is None else n_max)
    lams = list(lambda_values if lambda_values is not None else
                (exp.sweep_values if exp.sweep_param == "lambda_B" else r["lambda_B"]))
    if not lams:
        raise ConfigError("min_ris.lambda_B: no densities to search")
    base = dataclasses.replace(_coverage_inputs(exp), placement="fixed")
    rows = []
    for lam in lams:
        t0 = time.perf_counter()
        res = cv.min_ris_search(lam, target, base, n_max)
        rows.append(MinRisRow(lam, res.nB, target, res.n_R, res.outage,
                              res.zero_ris_suffices, time.perf_counter() - t0))
    path = out_path or exp.output
    if path:
        write_min_ris(path, exp, rows)
    return rows


# --- CSV ------------------------------------------------------------------

def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def _header(exp, kind):
    lines = [f"# riscover {kind}", f"# scenario: {exp.name}",
             "# config: " + json.dumps(exp.resolved, sort_keys=True)]
    lines += [f"# note: {n}" for n in exp.notes]
    return "\n".join(lines) + "\n"


ROW_FIELDS = ("axis", "analytic_coverage", "analytic_outage", "mc_coverage", "mc_outage",
              "mc_half_width", "agree", "wall_time_s")


def write_results(path, exp, rows, relay=None):
    extras = sorted({k for r in rows for k in r.extra})
    cols = [exp.sweep_param or "axis"] + list(ROW_FIELDS[1:]) + extras
    if relay is not None:
        cols += ["relay_axis", "relay_outage"]
    buf = io.StringIO()
    buf.write(_header(exp, "results"))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    n = max(len(rows), len(relay) if relay else 0)
    for i in range(n):
        if i < len(rows):
            r = rows[i]
            vals = [_fmt(getattr(r, f)) for f in ROW_FIELDS] + [_fmt(r.extra.get(k)) for k in extras]
        else:
            vals = [""] * (len(ROW_FIELDS) + len(extras))
        if relay is not None:
            vals += list(relay[i]) if i < len(relay) else ["", ""]
        w.writerow(vals)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def write_min_ris(path, exp, rows):
    buf = io.StringIO()
    buf.write(_header(exp, "min-ris"))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["lambda_B", "nB", "target", "n_R", "outage", "zero_ris_suffices", "wall_time_s"])
    for r in rows:
        w.writerow([_fmt(r.lambda_B), r.nB, _fmt(r.target),
                    "unattainable" if r.n_R is None else r.n_R, _fmt(r.outage),
                    _fmt(r.zero_ris_suffices), _fmt(r.wall_time_s)])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def _cell(text):
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    try:
        return float(text)
    except ValueError:
        return text


def read_results(path):
    """Parse an emitted CSV into ``(config, rows)``; numbers come back as floats."""
    config = None
    body = []
    with open(path, encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.startswith("# config: "):
                config = json.loads(line[len("# config: "):])
            elif not line.startswith("#"):
                body.append(line)
    reader = csv.DictReader(body)
    return config, [{k: _cell(v) for k, v in row.items()} for row in reader]


def read_relay_curve(path):
    """Rows ``(axis, outage)`` as the original strings."""
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(line for line in fh if not line.startswith("#"))
            if reader.fieldnames is None or not {"axis", "outage"} <= set(reader.fieldnames):
                raise ConfigError(f"{path}: relay curve needs columns axis,outage")
            return [(row["axis"], row["outage"]) for row in reader]
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from None


# --- self-test ------------------------------------------------------------

def selftest():
    """Quick invariant battery; returns ``[(name, passed, detail)]``."""
    from .quadrature import QuadSpec, integrate_finite, integrate_semi_infinite_oscillatory

    cp = ChannelParams.from_db(46, 3.5e9, 1e6, -174, 2.0, antenna_gain_dBi=17)
    cfg = SceneConfig(100, 50, 0.2, 20, equispaced_angles(2))
    g = gamma_threshold(QosTarget(32000))
    inp = cv.CoverageInputs(cfg, cp, g)
    checks = []

    def check(name, fn):
        try:
            ok, detail = fn()
        except Exception as exc:  # report, do not abort the battery
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        checks.append((name, bool(ok), detail))

    def sin2():
        v, _ = integrate_finite(lambda x: np.sin(x) ** 2, 0, 2 * math.pi)
        return abs(v - math.pi) < 1e-10, f"{float(v)!r}"

    def dirichlet():
        v, _ = integrate_semi_infinite_oscillatory(lambda t: np.sinc(t / math.pi),
                                                   QuadSpec(tail_threshold=1e-10), freq=1.0)
        return abs(v - math.pi / 2) < 1e-6, f"{float(v)!r}"

    def lt_origin():
        v = cv.laplace_T(0.0, inp)
        return abs(v - 1) < 1e-9, f"{v!r}"

    def cf_origin():
        v = cv.char_fn_indirect(0.0, inp)
        return abs(v - 1) < 1e-9, f"{v!r}"

    def monotone_gamma():
        vals = [cv.coverage_at(50, dataclasses.replace(inp, gamma_th=gamma_threshold(QosTarget(b))))
                for b in np.linspace(28000, 36000, 10)]
        ok = all(a >= b - 1e-9 for a, b in zip(vals, vals[1:])) and all(0 <= v <= 1 for v in vals)
        return ok, ", ".join(f"{v:.4g}" for v in vals)

    def bonferroni():
        q = np.asarray(ba.q_cascade(np.linspace(0, 2 * math.pi, 50, endpoint=False), cfg))
        return bool(np.all((q >= 0) & (q <= 1))), f"max {q.max():.4g}"

    def determinism():
        spec = mc.SimSpec(cfg, cp, g, 2000, seed=7)
        a, b = mc.simulate_coverage(spec), mc.simulate_coverage(spec)
        return a.coverage.value == b.coverage.value, f"{a.coverage.value!r}"

    for name, fn in [("sin^2 integral", sin2), ("Dirichlet integral", dirichlet),
                     ("laplace_T(0) = 1", lt_origin), ("char_fn(0) = 1", cf_origin),
                     ("coverage nonincreasing in threshold", monotone_gamma),
                     ("cascade probabilities in [0, 1]", bonferroni),
                     ("seeded simulation repeats", determinism)]:
        check(name, fn)
    return checks
