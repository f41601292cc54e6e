"""Poisson structure on tangent bundles and Poisson maps TP -> P.

For a Poisson manifold (P, eta) with a torsion-free connection the bracket
of two functions on TP at v in T_xP is

    {f, g}(v) = <Deta(v), d1 f ^ d1 g> + <eta(x), d1 f ^ d2 g - d1 g ^ d2 f>

where d1 is the vertical (fibre) derivative, d2 the horizontal one and
Deta the vertical part of the derivative of eta.  Bivectors are stored as
skew matrices ``M`` in ambient coordinates and paired with covectors as
``<M, a ^ b> = a^T M b``.

Two geometries are built in: the flat torus with a constant bivector and
the round unit sphere with its area bivector
``eta(p) = u ^ (p x u) / |u|^2`` (any nonzero tangent u), which in ambient
coordinates is ``eta(p)[i, j] = eps_ijk p_k`` so that {x, y} = z.
The ambient 2-form printed for the sphere's symplectic form has ``z`` as
its first coefficient where ``x`` would be expected; the bivector above is
derived from the complex structure u -> u x p and the metric instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import DimensionMismatchError, DomainError, OutOfChartError
from .nctorus import SkewForm
from .numkit import DEFAULT_TOL, TWO_PI, Tolerances, Trajectory, central_diff, rk4_solve

SERIES_CUTOFF = 1e-4
UNIT_TOL = 1e-12


# ---------------------------------------------------------------------------
# small-argument-safe helpers


def sinc(t: float) -> float:
    """sin(t)/t with the limit 1 at t = 0."""
    if abs(t) < SERIES_CUTOFF:
        t2 = t * t
        return 1.0 - t2 / 6.0 + t2 * t2 / 120.0
    return math.sin(t) / t


# (t cos t - sin t) loses about half its digits near t = 1e-4, so the two
# helpers built on it use their power series up to this larger cutoff
CANCELLATION_CUTOFF = 0.5


def _radial_coeff(t: float) -> float:
    # (t cos t - sin t) / t^3 = sum_{k>=1} (-1)^k 2k t^(2k-2) / (2k+1)!
    if abs(t) < CANCELLATION_CUTOFF:
        t2 = t * t
        total, power, fact = 0.0, 1.0, 6.0
        for k in range(1, 12):
            total += (-1) ** k * 2 * k * power / fact
            power *= t2
            fact *= (2 * k + 2) * (2 * k + 3)
        return total
    return (t * math.cos(t) - math.sin(t)) / t**3


def sinc_prime(t: float) -> float:
    """Derivative of sin(t)/t; satisfies t f'(t) = cos t - f(t)."""
    return t * _radial_coeff(t)


# ---------------------------------------------------------------------------
# tangent vectors


def _vec(x) -> np.ndarray:
    out = np.array(x, dtype=float).reshape(-1)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class TangentVec:
    """A point ``base`` of the manifold together with a tangent vector ``u`` there."""

    base: np.ndarray
    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", _vec(self.base))
        object.__setattr__(self, "u", _vec(self.u))
        if self.base.shape != self.u.shape:
            raise DimensionMismatchError("base point and tangent vector differ in dimension")

    @classmethod
    def on_sphere(cls, p, u) -> TangentVec:
        v = cls(p, u)
        check_sphere_point(v.base)
        if abs(float(v.base @ v.u)) > UNIT_TOL * max(1.0, float(np.linalg.norm(v.u))):
            raise DomainError(f"u is not tangent at p: <p,u> = {float(v.base @ v.u):.3g}")
        return v

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.u))


def check_sphere_point(p) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (3,) or abs(float(np.linalg.norm(p)) - 1.0) > UNIT_TOL:
        raise DomainError(f"{p!r} is not a point of the unit sphere")
    return p


def _check_tangent(p: np.ndarray, w, what: str) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (3,):
        raise DimensionMismatchError(f"{what} must be a 3-vector")
    if abs(float(p @ w)) > 1e-10 * max(1.0, float(np.linalg.norm(w))):
        raise DomainError(f"{what} is not tangent at p: <p,{what}> = {float(p @ w):.3g}")
    return w


# ---------------------------------------------------------------------------
# sphere geometry


def exp_sphere(v: TangentVec) -> np.ndarray:
    """Exp_p(u) = p cos|u| + (sin|u| / |u|) u."""
    t = v.norm
    return v.base * math.cos(t) + sinc(t) * v.u


def d1_exp(v: TangentVec, h) -> np.ndarray:
    """Differential of Exp_p along the fibre, applied to h in T_pS^2."""
    p, u, t = v.base, v.u, v.norm
    if t >= math.pi:
        raise OutOfChartError(f"|u| = {t} >= pi")
    h = _check_tangent(p, h, "h")
    uh = float(u @ h)
    return sinc(t) * (h - uh * p) + _radial_coeff(t) * uh * u


def d2_exp(v: TangentVec, eps) -> np.ndarray:
    """Horizontal differential: d/dt Exp_{sigma(t)} phi_{sigma(t)}(u), sigma(t) = Exp_p(t eps)."""
    p, u, t = v.base, v.u, v.norm
    if t >= math.pi:
        raise OutOfChartError(f"|u| = {t} >= pi")
    eps = _check_tangent(p, eps, "eps")
    return math.cos(t) * eps - sinc(t) * float(u @ eps) * p


def parallel_transport_sphere(p, eps, t: float, w) -> np.ndarray:
    """Transport w from p along the great circle cos(t) p + sin(t) eps."""
    p = check_sphere_point(p)
    eps = np.asarray(eps, dtype=float)
    if abs(float(np.linalg.norm(eps)) - 1.0) > UNIT_TOL:
        raise DomainError("eps must be a unit vector")
    _check_tangent(p, eps, "eps")
    w = _check_tangent(p, w, "w")
    n = np.cross(p, eps)
    return float(w @ eps) * (-math.sin(t) * p + math.cos(t) * eps) + float(w @ n) * n


def _transport_rotation(p: np.ndarray, eps: np.ndarray, t: float) -> np.ndarray:
    # rotation taking p -> sigma(t), eps -> sigma'(t), p x eps -> itself
    n = np.cross(p, eps)
    sigma = math.cos(t) * p + math.sin(t) * eps
    dsigma = -math.sin(t) * p + math.cos(t) * eps
    return np.outer(sigma, p) + np.outer(dsigma, eps) + np.outer(n, n)


def jacobi_dexp(v: TangentVec, w: tuple[Sequence[float], Sequence[float]]) -> np.ndarray:
    """T_v Exp(w) for w = (horizontal, vertical), via the Jacobi field at s = 1.

    Along c(s) = Exp_p(s u) the Jacobi equation on the unit sphere splits in
    a parallel frame: the component along c' is affine in s, the normal
    component solves J'' + |u|^2 J = 0.
    """
    p, u, t = v.base, v.u, v.norm
    if t >= math.pi:
        raise OutOfChartError(f"|u| = {t} >= pi")
    h = _check_tangent(p, w[0], "horizontal component")
    e = _check_tangent(p, w[1], "vertical component")
    if t == 0.0:
        return h + e
    uhat = u / t
    a_t, b_t = float(h @ uhat), float(e @ uhat)
    normal = (h - a_t * uhat) * math.cos(t) + (e - b_t * uhat) * sinc(t)
    tangent_end = -math.sin(t) * p + math.cos(t) * uhat
    return (a_t + b_t) * tangent_end + normal


def lemma_variation(v: TangentVec, w, t: float) -> np.ndarray:
    """gamma_1(t) = Exp_{sigma(t)}(phi_{sigma(t)}(u + t V w)), sigma(t) = Exp_p(t H w).

    Its t-derivative at 0 is T_v Exp(w); used as a finite-difference oracle.
    """
    p, u = v.base, v.u
    hw, vw = np.asarray(w[0], dtype=float), np.asarray(w[1], dtype=float)
    moved = u + t * vw
    hn = float(np.linalg.norm(hw))
    if hn == 0.0:
        return exp_sphere(TangentVec(p, moved))
    e = hw / hn
    base = math.cos(t * hn) * p + math.sin(t * hn) * e
    return exp_sphere(TangentVec(base, _transport_rotation(p, e, t * hn) @ moved))


# ---------------------------------------------------------------------------
# radial profiles and the profile ODE


@dataclass(frozen=True)
class RadialProfile:
    """Scalar rescaling mu(|u|) in pi(u, p) = Exp_p(mu(|u|) u)."""

    mu: Callable[[float], float]
    closed_form: bool
    name: str = "custom"
    max_norm: float = 2.0

    def __call__(self, t: float) -> float:
        return self.mu(t)


def _arcsin_mu(t: float) -> float:
    if abs(t) < SERIES_CUTOFF:
        t2 = t * t
        return 0.5 + t2 / 48.0 + 3.0 * t2 * t2 / 1280.0
    return math.asin(t / 2.0) / t


def arcsin_profile() -> RadialProfile:
    """mu(t) = arcsin(t/2) / t, the Poisson profile for the round sphere."""
    return RadialProfile(_arcsin_mu, True, "arcsin", 2.0)


def half_profile() -> RadialProfile:
    """mu = 1/2, the naive half-exponential (not Poisson on the sphere)."""
    return RadialProfile(lambda t: 0.5, True, "half", math.inf)


def tabulated_profile(ts: Sequence[float], mus: Sequence[float]) -> RadialProfile:
    """Cubic-spline profile through tabulated (t, mu) values."""
    from scipy.interpolate import CubicSpline

    ts = np.asarray(ts, dtype=float)
    spline = CubicSpline(ts, np.asarray(mus, dtype=float))
    lo, hi = float(ts[0]), float(ts[-1])

    def mu(t: float) -> float:
        if not lo <= t <= hi:
            raise DomainError(f"|u| = {t} outside tabulated range [{lo}, {hi}]")
        return float(spline(t))

    return RadialProfile(mu, False, "file", hi)


def load_profile(path) -> RadialProfile:
    """Read a CSV with columns ``t`` and ``mu`` (header required)."""
    import csv

    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or "t" not in rows[0] or "mu" not in rows[0]:
        raise DomainError(f"{path}: profile file needs columns t, mu")
    return tabulated_profile([float(r["t"]) for r in rows], [float(r["mu"]) for r in rows])


def solve_profile_ode(a: float, t0: float, alpha0: float, t1: float, step: float) -> Trajectory:
    """Integrate t alpha' + alpha = t from (t0, alpha0) with RK4.

    The general solution is alpha(t) = a/t + t/2; ``a`` only labels the
    branch the caller expects and is not used by the integration.
    """
    if t0 <= 0:
        raise DomainError("t0 must be positive: the ODE is singular at t = 0")
    if not t0 < t1 < 2:
        raise DomainError("need 0 < t0 < t1 < 2")
    return rk4_solve(lambda t, y: (t - y) / t, t0, alpha0, t1, step)


def profile_closed_form(a: float, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    return a / t + t / 2


def compare_closed_form(trajectory: Trajectory, a: float) -> float:
    t, alpha = trajectory.as_arrays()
    return float(np.max(np.abs(alpha - profile_closed_form(a, t))))


def profile_from_alpha(trajectory: Trajectory) -> tuple[np.ndarray, np.ndarray]:
    """mu(t) = arcsin(alpha(t)) / t along the trajectory."""
    t, alpha = trajectory.as_arrays()
    return t, np.arcsin(alpha) / t


# ---------------------------------------------------------------------------
# Poisson maps


def pi_sphere(v: TangentVec, profile: RadialProfile | None = None) -> np.ndarray:
    profile = profile or arcsin_profile()
    t = v.norm
    if t >= profile.max_norm:
        raise DomainError(f"|u| = {t} outside the domain |u| < {profile.max_norm}")
    return exp_sphere(TangentVec(v.base, profile(t) * v.u))


def pi_torus(v: TangentVec) -> np.ndarray:
    """p + u/2 reduced to [0, 2 pi)^n."""
    return np.mod(v.base + 0.5 * v.u, TWO_PI)


# ---------------------------------------------------------------------------
# geometries


class FlatTorus:
    """R^n / 2 pi Z^n with the flat metric and a constant bivector."""

    def __init__(self, eta: SkewForm):
        self.eta = eta
        self.dim = eta.n

    def tangent_basis(self, x) -> np.ndarray:
        return np.eye(self.dim)

    def eta_at(self, x) -> np.ndarray:
        return self.eta.eta

    def exp(self, x, w) -> np.ndarray:
        return np.mod(np.asarray(x, dtype=float) + np.asarray(w, dtype=float), TWO_PI)

    def transport_matrix(self, x, direction, t: float) -> np.ndarray:
        return np.eye(self.dim)

    def horizontal(self, x, u, e, t: float) -> tuple[np.ndarray, np.ndarray]:
        return self.exp(x, t * np.asarray(e, dtype=float)), np.asarray(u, dtype=float)

    def poisson_map(self) -> Callable:
        return lambda x, u: pi_torus(TangentVec(x, u))

    def test_functions(self) -> list[tuple[Callable, Callable]]:
        chars = [
            (lambda y, i=i: np.exp(1j * float(np.asarray(y)[i]))) for i in range(self.dim)
        ]
        return [(chars[i], chars[j]) for i in range(self.dim) for j in range(i + 1, self.dim)]

    def random_tangent(self, rng: np.random.Generator, umax: float) -> TangentVec:
        x = rng.uniform(0, TWO_PI, size=self.dim)
        d = rng.normal(size=self.dim)
        d /= np.linalg.norm(d)
        return TangentVec(x, rng.uniform(0, umax) * d)


class RoundSphere:
    """Unit sphere in R^3 with the Levi-Civita connection and area bivector."""

    dim = 2

    def tangent_basis(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        trial = np.eye(3)[int(np.argmin(np.abs(p)))]
        e1 = trial - float(trial @ p) * p
        e1 /= np.linalg.norm(e1)
        return np.array([e1, np.cross(p, e1)])  # e1 x e2 = p

    def eta_at(self, p) -> np.ndarray:
        x, y, z = np.asarray(p, dtype=float)
        return np.array([[0.0, z, -y], [-z, 0.0, x], [y, -x, 0.0]])

    def eta_from_tangent(self, p, u) -> np.ndarray:
        """u ^ (p x u) / |u|^2 as a skew matrix; independent of the choice of u."""
        p, u = np.asarray(p, dtype=float), np.asarray(u, dtype=float)
        w = np.cross(p, u)
        return (np.outer(u, w) - np.outer(w, u)) / float(u @ u)

    def exp(self, p, w) -> np.ndarray:
        return exp_sphere(TangentVec(p, w))

    def transport_matrix(self, p, direction, t: float) -> np.ndarray:
        return _transport_rotation(np.asarray(p, dtype=float), np.asarray(direction, dtype=float), t)

    def horizontal(self, p, u, e, t: float) -> tuple[np.ndarray, np.ndarray]:
        p, e = np.asarray(p, dtype=float), np.asarray(e, dtype=float)
        en = float(np.linalg.norm(e))
        if en == 0.0:
            return p, np.asarray(u, dtype=float)
        R = _transport_rotation(p, e / en, t * en)
        return R @ p, R @ np.asarray(u, dtype=float)

    def poisson_map(self, profile: RadialProfile | None = None) -> Callable:
        profile = profile or arcsin_profile()
        return lambda x, u: pi_sphere(TangentVec(x, u), profile)

    def test_functions(self) -> list[tuple[Callable, Callable]]:
        coord = [lambda y, i=i: float(np.asarray(y)[i]) for i in range(3)]
        return [(coord[0], coord[1]), (coord[1], coord[2]), (coord[2], coord[0])]

    def random_tangent(self, rng: np.random.Generator, umax: float) -> TangentVec:
        p = rng.normal(size=3)
        p /= np.linalg.norm(p)
        d = rng.normal(size=3)
        d -= float(d @ p) * p
        d /= np.linalg.norm(d)
        return TangentVec.on_sphere(p, rng.uniform(0, umax) * d)


PoissonGeometry = FlatTorus | RoundSphere


# ---------------------------------------------------------------------------
# brackets


def vertical_derivative_eta(v: TangentVec, geom, tol: Tolerances = DEFAULT_TOL) -> np.ndarray:
    """Covariant derivative of eta along v, as a skew matrix at the base point.

    Finite difference of the parallel-transported-back bivector along the
    geodesic through v.
    """
    norm = v.norm
    if norm == 0.0:
        return np.zeros_like(geom.eta_at(v.base))
    e = v.u / norm
    x = v.base

    def pulled_back(t):
        R = geom.transport_matrix(x, e, t)
        return R.T @ geom.eta_at(geom.exp(x, t * e)) @ R

    return norm * central_diff(pulled_back, 0.0, 1.0, tol.fd_step)


def _covectors(f: Callable, v: TangentVec, geom, step: float) -> tuple[np.ndarray, np.ndarray]:
    x, u = v.base, v.u
    basis = geom.tangent_basis(x)
    d1 = [central_diff(lambda s: f(x, u + s * e), 0.0, 1.0, step) for e in basis]
    d2 = [central_diff(lambda s: f(*geom.horizontal(x, u, e, s)), 0.0, 1.0, step) for e in basis]
    return np.asarray(d1) @ basis, np.asarray(d2) @ basis


def tp_bracket(f: Callable, g: Callable, v: TangentVec, geom, tol: Tolerances = DEFAULT_TOL):
    """{f, g}_{TP}(v) for functions ``f(x, u)`` on the tangent bundle."""
    f1, f2 = _covectors(f, v, geom, tol.fd_step)
    g1, g2 = _covectors(g, v, geom, tol.fd_step)
    eta = geom.eta_at(v.base)
    deta = vertical_derivative_eta(v, geom, tol)
    value = f1 @ deta @ g1 + f1 @ eta @ g2 - g1 @ eta @ f2
    return value.item() if hasattr(value, "item") else value


def base_bracket(f: Callable, g: Callable, y, geom, tol: Tolerances = DEFAULT_TOL):
    """{f, g}_P(y) = df^T eta(y) dg, differentials along geodesics."""
    basis = geom.tangent_basis(y)
    df = np.asarray(
        [central_diff(lambda s: f(geom.exp(y, s * e)), 0.0, 1.0, tol.fd_step) for e in basis]
    ) @ basis
    dg = np.asarray(
        [central_diff(lambda s: g(geom.exp(y, s * e)), 0.0, 1.0, tol.fd_step) for e in basis]
    ) @ basis
    value = df @ geom.eta_at(y) @ dg
    return value.item() if hasattr(value, "item") else value


def poisson_map_residual(
    pi: Callable,
    v: TangentVec,
    geom,
    test_pairs: Sequence[tuple[Callable, Callable]] | None = None,
    tol: Tolerances = DEFAULT_TOL,
) -> float:
    """max over test pairs of |{pi*f, pi*g}_{TP}(v) - {f, g}_P(pi(v))|."""
    pairs = test_pairs if test_pairs is not None else geom.test_functions()
    image = pi(v.base, v.u)
    worst = 0.0
    for f, g in pairs:
        lhs = tp_bracket(lambda x, u: f(pi(x, u)), lambda x, u: g(pi(x, u)), v, geom, tol)
        rhs = base_bracket(f, g, image, geom, tol)
        worst = max(worst, abs(lhs - rhs))
    return float(worst)


def exp_differential_matrix(v: TangentVec) -> np.ndarray:
    """4 x 3 matrix of T_v Exp on (horizontal e1, e2, vertical e1, e2)."""
    basis = RoundSphere().tangent_basis(v.base)
    zero = np.zeros(3)
    rows = [jacobi_dexp(v, (e, zero)) for e in basis] + [jacobi_dexp(v, (zero, e)) for e in basis]
    return np.array(rows)
