"""Experiment configs, dispatch and report writing.

A config is a flat ``key = value`` file (see :mod:`qlab.flatfile`).  Every
kind has a fixed parameter schema; unknown keys are errors and only the
tolerances and run-size knobs carry defaults.
"""

from __future__ import annotations

import cmath
import json
import math
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from . import liepoisson as lp
from . import nctorus as nc
from . import poismap as pm
from . import weylrn as wr
from .errors import ConfigError, QlabError
from .flatfile import Entry, parse_flat
from .numkit import DEFAULT_TOL, PeriodicGrid, TrigPoly, Tolerances, central_diff, loglog_slope

KINDS = (
    "nctorus-star",
    "semiclassical",
    "weyl",
    "sphere-ode",
    "poisson-residual",
    "jacobi-check",
    "bracket-validate",
)

REQUIRED = object()


# ---------------------------------------------------------------------------
# value converters: accept JSON values from files and raw strings from flags


def _number(v):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ValueError(f"expected a number, got {v!r}")
    return v


def to_float(v):
    if isinstance(v, str):
        return float(v)
    x = float(_number(v))
    if not math.isfinite(x):
        raise ValueError(f"{v!r} is not finite")
    return x


def to_int(v):
    if isinstance(v, str):
        return int(v)
    x = _number(v)
    if isinstance(x, float) and not x.is_integer():
        raise ValueError(f"expected an integer, got {v!r}")
    return int(x)


def to_float_list(v):
    if isinstance(v, str):
        v = [x for x in v.translate(str.maketrans("", "", " []")).split(",") if x]
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        v = [v]
    if not isinstance(v, list) or not v:
        raise ValueError(f"expected a non-empty list of numbers, got {v!r}")
    return [to_float(x) for x in v]


def to_skew(v):
    if isinstance(v, list) and v and all(isinstance(row, list) for row in v):
        return nc.SkewForm(np.asarray([[to_float(x) for x in row] for row in v]))
    return nc.SkewForm.from_rows(to_float_list(v))


def to_str(v):
    if not isinstance(v, str):
        raise ValueError(f"expected a string, got {v!r}")
    return v


def choice(*options):
    def convert(v):
        v = to_str(v)
        if v not in options:
            raise ValueError(f"{v!r} is not one of {', '.join(options)}")
        return v

    return convert


def positive(convert):
    def checked(v):
        x = convert(v)
        if not x > 0:
            raise ValueError(f"must be positive, got {x!r}")
        return x

    return checked


@dataclass(frozen=True)
class Param:
    convert: Callable[[Any], Any]
    default: Any = REQUIRED
    help: str = ""


COMMON = {
    "kind": Param(choice(*KINDS), REQUIRED, "experiment kind"),
    "name": Param(to_str, None, "report name (defaults to the kind)"),
    "output": Param(to_str, None, "CSV path (defaults to <name>.csv)"),
}
SEED = {"seed": Param(to_int, REQUIRED, "64-bit RNG seed")}

SCHEMAS: dict[str, dict[str, Param]] = {
    "nctorus-star": {
        "eta": Param(to_skew, REQUIRED, "skew matrix, nested or row-major"),
        "hbar": Param(to_float, REQUIRED, "deformation parameter"),
        "a": Param(to_str, REQUIRED, "mode list 'r1,r2:re,im;...'"),
        "b": Param(to_str, REQUIRED, "mode list 'r1,r2:re,im;...'"),
        "tol": Param(positive(to_float), 1e-10, "operator-composition cross-check tolerance"),
    },
    "semiclassical": {
        "eta": Param(to_skew, REQUIRED, "skew matrix, nested or row-major"),
        "hbar_list": Param(to_float_list, REQUIRED, "hbar values, decreasing"),
        **SEED,
        "trials": Param(positive(to_int), 20, "random (a, b) pairs"),
        "support": Param(positive(to_int), 3, "modes per random element"),
        "max_mode": Param(positive(to_int), 2, "mode range [-max_mode, max_mode]"),
        "expected_slope": Param(to_float, 2.0, "expected log-log order"),
        "slope_tol": Param(positive(to_float), 0.05, "allowed slope deviation"),
        "bound_slack": Param(to_float, 1e-10, "relative slack on the remainder bound"),
    },
    "weyl": {
        "n": Param(positive(to_int), REQUIRED, "dimension"),
        "grid_size": Param(positive(to_int), REQUIRED, "points per dimension"),
        "hbar_list": Param(to_float_list, REQUIRED, "hbar values"),
        "symbol_f": Param(to_str, REQUIRED, "symbol, e.g. 'X1^2'"),
        "symbol_g": Param(to_str, REQUIRED, "symbol, e.g. 'sin(p1)'"),
        "expected_slope": Param(to_float, None, "if set, pass iff the slope matches"),
        "slope_tol": Param(positive(to_float), 0.1, "allowed slope deviation"),
        "tol": Param(positive(to_float), 1e-10, "deviation bound when no slope is expected"),
    },
    "sphere-ode": {
        "a": Param(to_float, REQUIRED, "branch constant in alpha = a/t + t/2"),
        "t0": Param(positive(to_float), REQUIRED, "initial time, > 0"),
        "t1": Param(to_float, REQUIRED, "final time, < 2"),
        "step": Param(positive(to_float), REQUIRED, "RK4 step"),
        "alpha0": Param(to_float, None, "initial value (defaults to the closed form)"),
        "tol": Param(positive(to_float), 1e-8, "max deviation from the closed form"),
    },
    "poisson-residual": {
        "geometry": Param(choice("torus", "sphere"), REQUIRED, "torus or sphere"),
        "profile": Param(choice("arcsin", "half", "file"), "arcsin", "sphere radial profile"),
        "profile_file": Param(to_str, None, "CSV with columns t, mu (profile = file)"),
        "eta": Param(to_skew, None, "torus bivector (required for the torus)"),
        "samples": Param(positive(to_int), REQUIRED, "number of tangent vectors"),
        **SEED,
        "umax": Param(positive(to_float), REQUIRED, "max |u|"),
        "unorm": Param(positive(to_float), None, "fix |u| for every sample"),
        "expect": Param(choice("poisson", "non-poisson"), "poisson", "expected outcome"),
        "tol": Param(positive(to_float), 1e-6, "max residual when expect = poisson"),
        "threshold": Param(positive(to_float), 1e-2, "min residual when expect = non-poisson"),
        "fd_step": Param(positive(to_float), DEFAULT_TOL.fd_step, "finite-difference step"),
    },
    "jacobi-check": {
        "samples": Param(positive(to_int), REQUIRED, "number of tangent vectors"),
        **SEED,
        "umax": Param(positive(to_float), REQUIRED, "max |u|, < pi"),
        "tol": Param(positive(to_float), 1e-7, "max deviation from finite differences"),
        "fd_step": Param(positive(to_float), DEFAULT_TOL.fd_step, "finite-difference step"),
    },
    "bracket-validate": {
        "chart": Param(choice("so3", "tangent", "file"), REQUIRED, "algebroid chart"),
        "chart_file": Param(to_str, None, "flat chart file (chart = file)"),
        "fiber_dim": Param(positive(to_int), 2, "fibre dimension of the tangent chart"),
        "samples": Param(positive(to_int), REQUIRED, "random (F, G, H, point) samples"),
        **SEED,
        "degree": Param(positive(to_int), 2, "degree of random symbols"),
        "tol": Param(positive(to_float), 1e-8, "max identity residual"),
        "fd_tol": Param(positive(to_float), 1e-7, "max exact-vs-FD bracket gap"),
        "fd_step": Param(positive(to_float), DEFAULT_TOL.fd_step, "finite-difference step"),
    },
}

COLUMNS = {
    "nctorus-star": ("mode", "re", "im"),
    "semiclassical": ("hbar", "max_error", "bound", "slope_running"),
    "weyl": ("hbar", "deviation", "slope"),
    "sphere-ode": ("t", "alpha", "closed_form", "deviation"),
    "poisson-residual": ("sample_id", "unorm", "residual"),
    "jacobi-check": ("sample_id", "unorm", "d1_error", "d2_error", "jacobi_error", "deta_norm"),
    "bracket-validate": ("sample_id", "antisymmetry", "leibniz", "jacobi", "exact_vs_fd"),
}


# ---------------------------------------------------------------------------
# configs


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    kind: str
    parameters: Mapping[str, Any]
    seed: int | None
    output_path: str

    def __getitem__(self, key):
        return self.parameters[key]

    def echo(self) -> dict[str, Any]:
        """Normalised, JSON-friendly view of the config."""
        out: dict[str, Any] = {"name": self.name, "kind": self.kind}
        if self.seed is not None:
            out["seed"] = self.seed
        out["output"] = self.output_path
        for k, v in self.parameters.items():
            if k == "seed":
                continue
            out[k] = v.eta.tolist() if isinstance(v, nc.SkewForm) else v
        return out


def _where(e: Entry | None, source: str) -> str:
    # line 0 marks values given as command-line flags
    if e is None:
        return source
    return f"{source}:{e.line}" if e.line else f"--{e.key.replace('_', '-')}"


def validate_entries(entries: Mapping[str, Entry], source: str = "<config>") -> ExperimentConfig:
    problems: list[str] = []

    def where(e: Entry) -> str:
        return _where(e, source)

    kind_entry = entries.get("kind")
    if kind_entry is None:
        raise ConfigError([f"{source}: missing key: kind"])
    try:
        kind = COMMON["kind"].convert(kind_entry.value)
    except ValueError as exc:
        raise ConfigError([f"{where(kind_entry)}: kind: {exc}"]) from None
    schema = {**COMMON, **SCHEMAS[kind]}

    values: dict[str, Any] = {}
    for key, e in entries.items():
        if key not in schema:
            problems.append(f"{where(e)}: unknown key: {key}")
            continue
        try:
            values[key] = schema[key].convert(e.value)
        except (ValueError, TypeError, QlabError) as exc:
            problems.append(f"{where(e)}: {key}: {exc}")
    for key, param in schema.items():
        if key in values or key in entries:
            continue
        if param.default is REQUIRED:
            problems.append(f"{source}: missing key: {key}")
        else:
            values[key] = param.default
    if not problems:
        problems += _cross_checks(kind, values, entries, source)
    if problems:
        raise ConfigError(problems)

    name = values.pop("name") or kind
    output = values.pop("output") or f"{name}.csv"
    values.pop("kind")
    return ExperimentConfig(name, kind, values, values.get("seed"), output)


def _cross_checks(kind, v, entries, source) -> list[str]:
    out = []
    if kind == "sphere-ode" and not 0 < v["t0"] < v["t1"] < 2:
        out.append(f"{source}: need 0 < t0 < t1 < 2")
    if kind == "poisson-residual":
        if v["geometry"] == "torus" and v["eta"] is None:
            out.append(f"{source}: missing key: eta")
        if v["profile"] == "file" and v["profile_file"] is None:
            out.append(f"{source}: missing key: profile_file")
        if v["unorm"] is not None and v["unorm"] > v["umax"]:
            out.append(f"{source}: unorm exceeds umax")
    if kind == "jacobi-check" and v["umax"] >= math.pi:
        out.append(f"{source}: umax must be below pi")
    if kind == "bracket-validate" and v["chart"] == "file" and v["chart_file"] is None:
        out.append(f"{source}: missing key: chart_file")
    if kind in ("semiclassical", "weyl"):
        if any(h <= 0 for h in v["hbar_list"]):
            out.append(f"{source}: hbar_list entries must be positive")
    if kind == "weyl":
        for key in ("symbol_f", "symbol_g"):
            try:
                wr.parse_symbol(v[key], v["n"])
            except wr.SymbolSyntaxError as exc:
                out.append(f"{_where(entries.get(key), source)}: {key}: {exc}")
        if v["grid_size"] < 4 or v["grid_size"] % 2:
            out.append(f"{source}: grid_size must be even and at least 4")
    if kind == "nctorus-star":
        for key in ("a", "b"):
            try:
                nc.parse_modes(v[key], v["eta"].n)
            except (ValueError, QlabError) as exc:
                out.append(f"{_where(entries.get(key), source)}: {key}: {exc}")
    return out


def validate_config(raw: str, source: str = "<config>") -> ExperimentConfig:
    """Parse and validate flat config text; raises ConfigError with diagnostics."""
    return validate_entries(parse_flat(raw, source), source)


# ---------------------------------------------------------------------------
# reports


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{x:.17g}"
    return str(value)


ReportRow = tuple


def render_csv(columns: Sequence[str], rows: Sequence[ReportRow]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        if len(row) != len(columns):
            raise ValueError(f"row {row!r} does not match columns {columns!r}")
        lines.append(",".join(fmt(x) for x in row))
    return "\n".join(lines) + "\n"


def atomic_write(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class Outcome:
    rows: list[ReportRow]
    passed: bool
    max_error: float
    notes: dict[str, Any] = field(default_factory=dict)


class SampleFailure(Exception):
    def __init__(self, sample: Any, cause: BaseException):
        super().__init__(f"sample {sample}: {type(cause).__name__}: {cause}")
        self.sample = sample
        self.cause = cause


def thread_count() -> int:
    raw = os.environ.get("QLAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def ordered_map(fn: Callable, items: Sequence) -> list:
    """map() over items, parallel up to QLAB_THREADS, results in input order."""

    def guarded(pair):
        i, item = pair
        try:
            return fn(item)
        except (QlabError, ArithmeticError, ValueError) as exc:
            raise SampleFailure(i, exc) from exc

    threads = thread_count()
    if threads == 1 or len(items) < 2:
        return [guarded(p) for p in enumerate(items)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(guarded, enumerate(items)))


def running_slopes(xs: Sequence[float], ys: Sequence[float]) -> list[float | None]:
    out: list[float | None] = [None]
    for k in range(2, len(xs) + 1):
        if min(ys[:k]) <= 0:
            out.append(None)
        else:
            out.append(loglog_slope(xs[:k], ys[:k]))
    return out


# ---------------------------------------------------------------------------
# experiment kinds


def _star_cross_check_H(hbar, u, q):
    u = np.asarray(u, dtype=float)
    q = np.asarray(q, dtype=float)
    return cmath.exp(1j * (0.3 * u.sum() + 0.2 * float(u @ u))) * (1.5 + math.cos(q.sum()))


def _quantised(a: TrigPoly, eta: nc.SkewForm) -> nc.Operator:
    terms = [nc.quantised_character(r, eta, c) for r, c in a.coeffs.items()]
    return lambda hbar, q, H: sum((D(hbar, q, H) for D in terms), 0j)


def run_nctorus_star(cfg: ExperimentConfig) -> Outcome:
    eta, hbar = cfg["eta"], cfg["hbar"]
    a = nc.parse_modes(cfg["a"], eta.n)
    b = nc.parse_modes(cfg["b"], eta.n)
    product = nc.star(a, b, eta, hbar)
    composed = nc.compose_operators(_quantised(a, eta), _quantised(b, eta))
    direct = _quantised(product, eta)
    worst = 0.0
    for q in ([0.0] * eta.n, [0.7] * eta.n, list(np.linspace(1.1, 2.3, eta.n))):
        lhs = composed(hbar, q, _star_cross_check_H)
        rhs = direct(hbar, q, _star_cross_check_H)
        worst = max(worst, abs(lhs - rhs))
    rows = [(" ".join(str(x) for x in r), c.real, c.imag) for r, c in sorted(product.coeffs.items())]
    return Outcome(rows, worst <= cfg["tol"], worst, {"product": nc.format_modes(product)})


def run_semiclassical(cfg: ExperimentConfig) -> Outcome:
    eta, hbars = cfg["eta"], cfg["hbar_list"]
    rng = np.random.default_rng(cfg["seed"])
    pairs = [
        (
            nc.random_trigpoly(rng, eta.n, cfg["support"], cfg["max_mode"]),
            nc.random_trigpoly(rng, eta.n, cfg["support"], cfg["max_mode"]),
        )
        for _ in range(cfg["trials"])
    ]

    def per_pair(pair):
        a, b = pair
        errs = [nc.semiclassical_error(a, b, eta, h) for h in hbars]
        bounds = [nc.semiclassical_bound(a, b, eta, h) for h in hbars]
        return errs, bounds

    results = ordered_map(per_pair, pairs)
    slack = 1 + cfg["bound_slack"]
    bound_ok = all(e <= b * slack for errs, bounds in results for e, b in zip(errs, bounds))
    max_err = [max(r[0][k] for r in results) for k in range(len(hbars))]
    max_bound = [max(r[1][k] for r in results) for k in range(len(hbars))]
    slopes = running_slopes(hbars, max_err)
    final = slopes[-1]
    slope_ok = final is not None and abs(final - cfg["expected_slope"]) <= cfg["slope_tol"]
    rows = [(h, e, b, s) for h, e, b, s in zip(hbars, max_err, max_bound, slopes)]
    return Outcome(rows, bound_ok and slope_ok, max(max_err), {"slope": final})


def run_weyl(cfg: ExperimentConfig) -> Outcome:
    n = cfg["n"]
    grid = PeriodicGrid(n, cfg["grid_size"])
    f = wr.parse_symbol(cfg["symbol_f"], n)
    g = wr.parse_symbol(cfg["symbol_g"], n)
    H = wr.default_test_function(grid)
    hbars = cfg["hbar_list"]
    reports = ordered_map(lambda h: wr.commutator_check(f, g, h, H, grid), hbars)
    devs = [r.deviation for r in reports]
    slopes = running_slopes(hbars, devs)
    if cfg["expected_slope"] is None:
        passed = max(devs) <= cfg["tol"]
    else:
        passed = slopes[-1] is not None and abs(slopes[-1] - cfg["expected_slope"]) <= cfg["slope_tol"]
    rows = [(h, d, s) for h, d, s in zip(hbars, devs, slopes)]
    return Outcome(rows, passed, max(devs), {"slope": slopes[-1]})


def run_sphere_ode(cfg: ExperimentConfig) -> Outcome:
    a, t0 = cfg["a"], cfg["t0"]
    alpha0 = cfg["alpha0"] if cfg["alpha0"] is not None else a / t0 + t0 / 2
    traj = pm.solve_profile_ode(a, t0, alpha0, cfg["t1"], cfg["step"])
    t, alpha = traj.as_arrays()
    closed = pm.profile_closed_form(a, t)
    dev = np.abs(alpha - closed)
    rows = list(zip(t.tolist(), alpha.tolist(), closed.tolist(), dev.tolist()))
    worst = float(dev.max())
    return Outcome(rows, worst <= cfg["tol"], worst)


def _residual_setup(cfg: ExperimentConfig):
    if cfg["geometry"] == "torus":
        geom = pm.FlatTorus(cfg["eta"])
        return geom, geom.poisson_map()
    geom = pm.RoundSphere()
    profile = {
        "arcsin": pm.arcsin_profile,
        "half": pm.half_profile,
        "file": lambda: pm.load_profile(cfg["profile_file"]),
    }[cfg["profile"]]()
    return geom, geom.poisson_map(profile)


def run_poisson_residual(cfg: ExperimentConfig) -> Outcome:
    geom, pi = _residual_setup(cfg)
    rng = np.random.default_rng(cfg["seed"])
    samples = [geom.random_tangent(rng, cfg["umax"]) for _ in range(cfg["samples"])]
    if cfg["unorm"] is not None:
        samples = [pm.TangentVec(v.base, v.u * (cfg["unorm"] / v.norm)) for v in samples]
    tol = Tolerances(fd_step=cfg["fd_step"])
    residuals = ordered_map(lambda v: pm.poisson_map_residual(pi, v, geom, tol=tol), samples)
    rows: list[ReportRow] = [(i, v.norm, r) for i, (v, r) in enumerate(zip(samples, residuals))]
    worst, mean = max(residuals), float(np.mean(residuals))
    rows += [("max", None, worst), ("mean", None, mean)]
    if cfg["expect"] == "poisson":
        passed = worst <= cfg["tol"]
    else:
        passed = min(residuals) >= cfg["threshold"]
    return Outcome(rows, passed, worst, {"min_residual": min(residuals)})


def _fd(curve: Callable[[float], np.ndarray], step: float) -> np.ndarray:
    return central_diff(curve, 0.0, 1.0, step)


def jacobi_sample_errors(v: pm.TangentVec, rng: np.random.Generator, tol: Tolerances):
    """FD-vs-closed-form errors for d1_exp, d2_exp and jacobi_dexp at v, plus |D eta|."""
    p = v.base
    basis = pm.RoundSphere().tangent_basis(p)
    h = rng.normal(size=2) @ basis
    e = rng.normal(size=2) @ basis
    step = tol.fd_step
    fd1 = _fd(lambda s: pm.exp_sphere(pm.TangentVec(p, v.u + s * h)), step)
    d1 = float(np.max(np.abs(pm.d1_exp(v, h) - fd1)))
    fd2 = _fd(lambda s: pm.lemma_variation(v, (e, np.zeros(3)), s), step)
    d2 = float(np.max(np.abs(pm.d2_exp(v, e) - fd2)))
    fdj = _fd(lambda s: pm.lemma_variation(v, (e, h), s), step)
    dj = float(np.max(np.abs(pm.jacobi_dexp(v, (e, h)) - fdj)))
    deta = float(np.max(np.abs(pm.vertical_derivative_eta(v, pm.RoundSphere(), tol))))
    return d1, d2, dj, deta


def run_jacobi_check(cfg: ExperimentConfig) -> Outcome:
    rng = np.random.default_rng(cfg["seed"])
    geom = pm.RoundSphere()
    tol = Tolerances(fd_step=cfg["fd_step"])
    jobs = []
    for _ in range(cfg["samples"]):
        v = geom.random_tangent(rng, cfg["umax"])
        jobs.append((v, np.random.default_rng(rng.integers(2**63))))
    results = ordered_map(lambda job: jacobi_sample_errors(job[0], job[1], tol), jobs)
    rows = [(i, job[0].norm, *errs) for i, (job, errs) in enumerate(zip(jobs, results))]
    worst = max(max(errs) for errs in results)
    return Outcome(rows, worst <= cfg["tol"], worst)


def _chart(cfg: ExperimentConfig) -> lp.AlgebroidChart:
    if cfg["chart"] == "so3":
        return lp.so3_chart()
    if cfg["chart"] == "tangent":
        return lp.tangent_chart(cfg["fiber_dim"])
    return lp.load_chart(cfg["chart_file"])


def bracket_sample_errors(chart, rng: np.random.Generator, degree: int, tol: Tolerances):
    m, n = chart.base_dim, chart.fiber_dim
    F, G, H = (lp.random_fiber_polynomial(rng, m, n, degree=degree) for _ in range(3))
    point = (rng.uniform(-1, 1, size=m), rng.uniform(-1, 1, size=n))
    br = lambda A, B: lp.lie_poisson_bracket(A, B, point, chart, tol)
    anti = abs(br(F, G) + br(G, F))
    leibniz = abs(br(F, G * H) - br(F, G) * H(*point) - G(*point) * br(F, H))
    jac = lp.jacobi_residual(chart, F, G, H, point, tol)
    fd = abs(br(F, G) - lp.lie_poisson_bracket(lp.as_callable(F), lp.as_callable(G), point, chart, tol))
    return anti, leibniz, jac, fd


def run_bracket_validate(cfg: ExperimentConfig) -> Outcome:
    chart = _chart(cfg)
    rng = np.random.default_rng(cfg["seed"])
    tol = Tolerances(fd_step=cfg["fd_step"])
    seeds = [np.random.default_rng(rng.integers(2**63)) for _ in range(cfg["samples"])]
    results = ordered_map(lambda r: bracket_sample_errors(chart, r, cfg["degree"], tol), seeds)
    rows = [(i, *errs) for i, errs in enumerate(results)]
    identity = max(max(e[:3]) for e in results)
    fd_gap = max(e[3] for e in results)
    passed = identity <= cfg["tol"] and fd_gap <= cfg["fd_tol"]
    return Outcome(rows, passed, max(identity, fd_gap), {"fd_gap": fd_gap})


RUNNERS: dict[str, Callable[[ExperimentConfig], Outcome]] = {
    "nctorus-star": run_nctorus_star,
    "semiclassical": run_semiclassical,
    "weyl": run_weyl,
    "sphere-ode": run_sphere_ode,
    "poisson-residual": run_poisson_residual,
    "jacobi-check": run_jacobi_check,
    "bracket-validate": run_bracket_validate,
}


def summary_path(output: str | Path) -> Path:
    return Path(output).with_suffix(".json")


def run_experiment(cfg: ExperimentConfig) -> tuple[int, dict[str, Any]]:
    """Run, write CSV and JSON summary; returns (exit code, summary).

    On a numerical failure no CSV is written; the summary records the
    failing sample.
    """
    start = time.perf_counter()
    summary: dict[str, Any] = {"name": cfg.name}
    try:
        outcome = RUNNERS[cfg.kind](cfg)
    except SampleFailure as exc:
        summary.update(pass_=False, max_error=None, failing_sample=exc.sample, error=str(exc.cause))
        code = 1
    except (QlabError, ArithmeticError, ValueError) as exc:
        summary.update(pass_=False, max_error=None, error=f"{type(exc).__name__}: {exc}")
        code = 1
    else:
        atomic_write(cfg.output_path, render_csv(COLUMNS[cfg.kind], outcome.rows))
        summary.update(pass_=bool(outcome.passed), max_error=float(outcome.max_error))
        summary.update({k: v for k, v in outcome.notes.items()})
        code = 0 if outcome.passed else 1
    summary["runtime_ms"] = round((time.perf_counter() - start) * 1000.0, 3)
    summary["pass"] = summary.pop("pass_")
    ordered = {k: summary[k] for k in ("name", "pass", "max_error", "runtime_ms")}
    ordered.update({k: v for k, v in summary.items() if k not in ordered})
    atomic_write(summary_path(cfg.output_path), json.dumps(ordered, indent=2) + "\n")
    return code, ordered
