"""Quantisation of the torus R^n / 2 pi Z^n with a constant Poisson structure.

Elements of the algebra are finite sums ``sum a_r g_r`` of characters
``g_r(q) = exp(i <r, q>)``, stored as :class:`~qlab.numkit.TrigPoly`.
The deformed product is

    g_r *_hbar g_s = exp(i hbar/2 <r, eta s>) g_{r+s}.

The module also carries the tangent groupoid ``R x R^n x P`` with
``s(hbar, u, q) = (hbar, q)`` and ``t(hbar, u, q) = (hbar, q + hbar u)``, and
the closed-form quantised operators Q(f_r) acting on functions on it.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import CompositionError, DimensionMismatchError, DomainError
from .numkit import TWO_PI, TrigPoly, central_diff

__all__ = [
    "BRACKET_ORIENTATION",
    "COMMUTATOR_ORIENTATION",
    "GroupoidPoint",
    "SkewForm",
    "TrigPoly",
    "compose_operators",
    "evaluate_quantised",
    "groupoid_product",
    "groupoid_source",
    "groupoid_target",
    "involution",
    "orientation_oracle",
    "poisson_bracket_const",
    "quantised_character",
    "semiclassical_error",
    "semiclassical_error_direct",
    "semiclassical_bound",
    "star",
    "trace",
]

# {g_r, g_s} = BRACKET_ORIENTATION * <r, eta s> g_{r+s}, i.e. the bracket
# <eta, df ^ dg> = df^T eta dg evaluated on characters.
BRACKET_ORIENTATION = -1
# (1/(i hbar)) [a, b]_* is compared against COMMUTATOR_ORIENTATION * {a, b}.
COMMUTATOR_ORIENTATION = -1

COMPOSABLE_TOL = 1e-12
SKEW_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SkewForm:
    """Constant Poisson bivector on the n-torus, as a real skew n x n matrix."""

    eta: np.ndarray

    def __post_init__(self):
        eta = np.array(self.eta, dtype=float)
        if eta.ndim != 2 or eta.shape[0] != eta.shape[1]:
            raise DimensionMismatchError(f"eta must be square, got shape {eta.shape}")
        skew = (eta - eta.T) / 2
        defect = np.abs(skew - eta)
        if defect.max(initial=0.0) > SKEW_TOL:
            i, j = np.unravel_index(int(np.argmax(defect)), defect.shape)
            raise DomainError(
                f"eta is not skew-symmetric: |eta[{i},{j}] + eta[{j},{i}]| = "
                f"{abs(eta[i, j] + eta[j, i]):.3g} exceeds {SKEW_TOL}"
            )
        skew.flags.writeable = False
        object.__setattr__(self, "eta", skew)

    @classmethod
    def from_rows(cls, values: Sequence[float]) -> SkewForm:
        n = math.isqrt(len(values))
        if n * n != len(values):
            raise DimensionMismatchError(f"{len(values)} entries do not form a square matrix")
        return cls(np.asarray(values, dtype=float).reshape(n, n))

    @classmethod
    def standard(cls) -> SkewForm:
        return cls(np.array([[0.0, 1.0], [-1.0, 0.0]]))

    @property
    def n(self) -> int:
        return self.eta.shape[0]

    def pair(self, r, s) -> float:
        """<r, eta s>."""
        return float(np.asarray(r, dtype=float) @ self.eta @ np.asarray(s, dtype=float))

    def __call__(self, xi) -> np.ndarray:
        return self.eta @ np.asarray(xi, dtype=float)

    def projections(self, threshold: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
        """Orthogonal projections onto Ker(eta) and Im(eta)."""
        w, v = np.linalg.eigh(self.eta.T @ self.eta)
        image = v[:, w > threshold]
        pr2 = image @ image.T
        return np.eye(self.n) - pr2, pr2

    def __eq__(self, other):
        return isinstance(other, SkewForm) and np.array_equal(self.eta, other.eta)

    __hash__ = None


# ---------------------------------------------------------------------------
# tangent groupoid


def _reduce(q) -> tuple[float, ...]:
    return tuple(float(x) % TWO_PI for x in np.asarray(q, dtype=float).reshape(-1))


def _torus_distance(a, b) -> float:
    d = (np.asarray(a) - np.asarray(b) + math.pi) % TWO_PI - math.pi
    return float(np.max(np.abs(d), initial=0.0))


@dataclass(frozen=True)
class GroupoidPoint:
    hbar: float
    u: tuple[float, ...]
    q: tuple[float, ...]

    def __post_init__(self):
        u = tuple(float(x) for x in np.asarray(self.u, dtype=float).reshape(-1))
        q = _reduce(self.q)
        if len(u) != len(q):
            raise DimensionMismatchError("u and q must have the same dimension")
        object.__setattr__(self, "hbar", float(self.hbar))
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "q", q)


def groupoid_source(x: GroupoidPoint) -> tuple[float, tuple[float, ...]]:
    return x.hbar, x.q


def groupoid_target(x: GroupoidPoint) -> tuple[float, tuple[float, ...]]:
    return x.hbar, _reduce(np.asarray(x.q) + x.hbar * np.asarray(x.u))


def groupoid_product(x: GroupoidPoint, y: GroupoidPoint) -> GroupoidPoint:
    """x . y, defined when source(x) = target(y)."""
    hx, qx = groupoid_source(x)
    hy, qy = groupoid_target(y)
    mismatch = max(abs(hx - hy), _torus_distance(qx, qy))
    if mismatch > COMPOSABLE_TOL:
        raise CompositionError(
            f"source(x)={groupoid_source(x)} != target(y)={groupoid_target(y)}", mismatch
        )
    return GroupoidPoint(y.hbar, np.add(x.u, y.u), y.q)


def unscaled_target(u, p, eta: SkewForm) -> tuple[float, ...]:
    """Target p + pr_2(u) of the groupoid integrating T*P (pr_2 onto Im eta)."""
    _, pr2 = eta.projections()
    return _reduce(np.asarray(p, dtype=float) + pr2 @ np.asarray(u, dtype=float))


# ---------------------------------------------------------------------------
# quantised operators
#
# An operator family is a callable ``D(hbar, q, H) -> complex`` where ``H`` is
# a function on the groupoid, ``H(hbar, u, q)``.

Operator = Callable[[float, Sequence[float], Callable], complex]


def evaluate_quantised(r, H: Callable, hbar: float, q, eta: SkewForm) -> complex:
    """Q(f_r)_{hbar,q}(H) = exp(i <r, q>) H(hbar, eta(r/2), q).

    f_r(X, q) = exp(i<r,q>) exp(i<r,X>/2) is a pure phase in X, so the
    oscillatory double integral collapses to a point evaluation.
    """
    r = np.asarray(r, dtype=float)
    if r.size != eta.n:
        raise DimensionMismatchError(f"mode {r} does not match eta of size {eta.n}")
    q = np.asarray(_reduce(q))
    return cmath.exp(1j * float(r @ q)) * H(hbar, eta(r / 2), tuple(q))


def quantised_character(r, eta: SkewForm, coeff: complex = 1.0) -> Operator:
    r = tuple(int(x) for x in r)
    return lambda hbar, q, H: coeff * evaluate_quantised(r, H, hbar, q, eta)


def compose_operators(D: Operator, E: Operator) -> Operator:
    """(D * E)_q(h) = E_q(z -> D_{t(z)}(R_z^* h)), with R_z^* h(x) = h(x . z)."""

    def product(hbar, q, H):
        def inner(hb, u, q_z):
            z = GroupoidPoint(hb, u, q_z)
            _, tz = groupoid_target(z)

            def shifted(hb2, v, q_x):
                return H(*_as_args(groupoid_product(GroupoidPoint(hb2, v, q_x), z)))

            return D(hb, tz, shifted)

        return E(hbar, q, inner)

    return product


def _as_args(x: GroupoidPoint):
    return x.hbar, np.asarray(x.u), x.q


# ---------------------------------------------------------------------------
# the deformed algebra


def _check_dims(a: TrigPoly, b: TrigPoly, eta: SkewForm):
    if a.dim != eta.n or b.dim != eta.n:
        raise DimensionMismatchError(
            f"dimensions a={a.dim}, b={b.dim}, eta={eta.n} do not agree"
        )


def star(a: TrigPoly, b: TrigPoly, eta: SkewForm, hbar: float) -> TrigPoly:
    """(a *_hbar b)(m) = sum_{r+s=m} a_r b_s exp(i hbar/2 <r, eta s>)."""
    _check_dims(a, b, eta)
    out: dict[tuple[int, ...], complex] = {}
    for r, ar in a.coeffs.items():
        eta_r = eta.eta.T @ np.asarray(r, dtype=float)  # <r, eta s> = (eta^T r).s
        for s, bs in b.coeffs.items():
            m = tuple(x + y for x, y in zip(r, s))
            phase = cmath.exp(0.5j * hbar * float(eta_r @ np.asarray(s, dtype=float)))
            out[m] = out.get(m, 0j) + ar * bs * phase
    return TrigPoly(a.dim, out)


def involution(a: TrigPoly) -> TrigPoly:
    """a*(r) = conj(a(-r))."""
    return TrigPoly(a.dim, {tuple(-x for x in r): c.conjugate() for r, c in a.coeffs.items()})


def trace(a: TrigPoly) -> complex:
    return a[(0,) * a.dim]


def poisson_bracket_const(a: TrigPoly, b: TrigPoly, eta: SkewForm) -> TrigPoly:
    _check_dims(a, b, eta)
    out: dict[tuple[int, ...], complex] = {}
    for r, ar in a.coeffs.items():
        for s, bs in b.coeffs.items():
            c = eta.pair(r, s)
            if c == 0:
                continue
            m = tuple(x + y for x, y in zip(r, s))
            out[m] = out.get(m, 0j) + BRACKET_ORIENTATION * c * ar * bs
    return TrigPoly(a.dim, out)


def commutator_over_ihbar(a: TrigPoly, b: TrigPoly, eta: SkewForm, hbar: float) -> TrigPoly:
    if hbar == 0:
        raise ZeroDivisionError("the commutator is divided by i*hbar; hbar must be nonzero")
    return (star(a, b, eta, hbar) - star(b, a, eta, hbar)).scale(1 / (1j * hbar))


def _sinc_remainder(x: float) -> float:
    """1 - sin(x)/x without cancellation for small x."""
    if abs(x) < 0.5:
        x2 = x * x
        total, term = 0.0, 1.0
        for k in range(1, 8):
            term *= -x2 / ((2 * k) * (2 * k + 1))
            total -= term
        return total
    return 1.0 - math.sin(x) / x


def semiclassical_error(a: TrigPoly, b: TrigPoly, eta: SkewForm, hbar: float) -> float:
    """max_m |(1/(i hbar))(a*b - b*a)(m) - sigma {a, b}(m)|.

    Evaluated through the per-mode identity
    (1/(i hbar))(e^{i hbar c/2} - e^{-i hbar c/2}) - c = -c (1 - sinc(hbar c/2)),
    valid because sigma * sigma_P = 1; subtracting the two star products
    directly (see :func:`semiclassical_error_direct`) loses about
    1e-16/hbar absolutely, which swamps the hbar^2 remainder for small c.
    """
    if hbar == 0:
        raise ZeroDivisionError("the commutator is divided by i*hbar; hbar must be nonzero")
    if BRACKET_ORIENTATION * COMMUTATOR_ORIENTATION != 1:
        return semiclassical_error_direct(a, b, eta, hbar)
    _check_dims(a, b, eta)
    out: dict[tuple[int, ...], complex] = {}
    for r, ar in a.coeffs.items():
        for s, bs in b.coeffs.items():
            c = eta.pair(r, s)
            if c == 0:
                continue
            m = tuple(x + y for x, y in zip(r, s))
            out[m] = out.get(m, 0j) - ar * bs * c * _sinc_remainder(hbar * c / 2)
    return max((abs(v) for v in out.values()), default=0.0)


def semiclassical_error_direct(a: TrigPoly, b: TrigPoly, eta: SkewForm, hbar: float) -> float:
    """Same quantity computed literally from star products and the bracket."""
    lhs = commutator_over_ihbar(a, b, eta, hbar)
    rhs = poisson_bracket_const(a, b, eta).scale(COMMUTATOR_ORIENTATION)
    return lhs.max_abs_diff(rhs)


def semiclassical_bound(a: TrigPoly, b: TrigPoly, eta: SkewForm, hbar: float) -> float:
    """sum |a_r| |b_s| |<r, eta s>|^3 hbar^2 / 24 (Taylor remainder of 2 sin(x/2))."""
    return sum(
        abs(ar) * abs(bs) * abs(eta.pair(r, s)) ** 3
        for r, ar in a.coeffs.items()
        for s, bs in b.coeffs.items()
    ) * hbar**2 / 24


def orientation_oracle(step: float = 1e-3) -> tuple[int, int]:
    """Recompute (bracket, commutator) orientation from the canonical pair.

    The bracket sign comes from a finite-difference evaluation of
    ``df^T eta dg`` on g_(1,0), g_(0,1); the commutator sign is whatever makes
    the star commutator reproduce that bracket as hbar -> 0.
    """
    eta = SkewForm.standard()
    q = np.array([0.3, 1.1])
    r, s = (1, 0), (0, 1)
    f = lambda x: cmath.exp(1j * (x @ np.array(r)))
    g = lambda x: cmath.exp(1j * (x @ np.array(s)))
    df = np.array([central_diff(f, q, e, step) for e in np.eye(2)])
    dg = np.array([central_diff(g, q, e, step) for e in np.eye(2)])
    value = df @ eta.eta @ dg / (f(q) * g(q))
    bracket_sign = int(np.sign(value.real / eta.pair(r, s)))
    a, b = TrigPoly.character(r), TrigPoly.character(s)
    limit = commutator_over_ihbar(a, b, eta, 1e-6)[(1, 1)]
    bracket = bracket_sign * eta.pair(r, s)
    commutator_sign = int(np.sign(limit.real / bracket))
    return bracket_sign, commutator_sign


def random_trigpoly(rng: np.random.Generator, dim: int, support: int, max_mode: int) -> TrigPoly:
    """Random element with ``support`` modes in [-max_mode, max_mode]^dim, |coeff| <= 1."""
    coeffs = {}
    for _ in range(support):
        r = tuple(int(x) for x in rng.integers(-max_mode, max_mode + 1, size=dim))
        radius = rng.uniform(0, 1)
        angle = rng.uniform(0, TWO_PI)
        coeffs[r] = radius * cmath.exp(1j * angle)
    return TrigPoly(dim, coeffs)


def parse_modes(text: str, dim: int | None = None) -> TrigPoly:
    """Parse ``"r1,r2:re,im;..."`` into a trigonometric polynomial."""
    coeffs: dict[tuple[int, ...], complex] = {}
    for chunk in filter(None, (c.strip() for c in text.split(";"))):
        mode_text, sep, value_text = chunk.partition(":")
        if not sep:
            raise ValueError(f"mode entry {chunk!r} lacks ':'")
        r = tuple(int(x) for x in mode_text.split(","))
        parts = [float(x) for x in value_text.split(",")]
        if len(parts) not in (1, 2):
            raise ValueError(f"coefficient {value_text!r} must be 're' or 're,im'")
        c = complex(parts[0], parts[1] if len(parts) == 2 else 0.0)
        if dim is None:
            dim = len(r)
        if len(r) != dim:
            raise DimensionMismatchError(f"mode {r} has length {len(r)}, expected {dim}")
        coeffs[r] = coeffs.get(r, 0j) + c
    if dim is None:
        raise ValueError("empty mode list")
    return TrigPoly(dim, coeffs)


def format_modes(a: TrigPoly) -> str:
    return ";".join(
        f"{','.join(str(x) for x in r)}:{c.real!r},{c.imag!r}" for r, c in a.coeffs.items()
    )
