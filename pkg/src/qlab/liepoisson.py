"""Lie-Poisson bracket on the dual of a Lie algebroid, in local coordinates.

A chart supplies the structure functions ``B[j, k, h] = B^j_{kh}(u)`` of the
local groupoid multiplication and the anchor matrix
``rho[h, k] = d sigma_h / d v_k (u, 0)``.  For functions ``F(u, Z)`` on
``U x R^n`` the bracket is

    {F, G} = sum_{k,h,j} dF/dZ_k dG/dZ_h (B^j_{hk} - B^j_{kh}) Z_j
           + sum_{k,h} (dF/dZ_k dG/du_h - dF/du_h dG/dZ_k) rho[h, k]

with exactly this index order; every sign-sensitive check in the package
goes through :func:`lie_poisson_bracket`.
"""

from __future__ import annotations

import enum
import numbers
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Callable, Mapping, Union

import numpy as np

from .errors import ConfigError, DimensionMismatchError, EvaluationError
from .flatfile import read_flat
from .numkit import DEFAULT_TOL, Tolerances, central_diff

Mode = tuple[int, ...]


# ---------------------------------------------------------------------------
# charts


@dataclass(frozen=True)
class AlgebroidChart:
    base_dim: int
    fiber_dim: int
    B: Callable[[np.ndarray], np.ndarray]
    rho: Callable[[np.ndarray], np.ndarray]
    constant: bool = False

    def __post_init__(self):
        if self.base_dim < 0 or self.fiber_dim < 1:
            raise ValueError("need base_dim >= 0 and fiber_dim >= 1")

    @classmethod
    def from_constants(cls, B, rho) -> AlgebroidChart:
        B = np.array(B, dtype=float)
        n = B.shape[0] if B.ndim else 0
        if B.shape != (n, n, n) or n < 1:
            raise DimensionMismatchError(f"B must have shape (n, n, n), got {B.shape}")
        rho = np.array(rho, dtype=float).reshape(-1, n)
        B.flags.writeable = False
        rho.flags.writeable = False
        return cls(rho.shape[0], n, lambda u: B, lambda u: rho, constant=True)

    def structure_at(self, u) -> tuple[np.ndarray, np.ndarray]:
        n, m = self.fiber_dim, self.base_dim
        B = np.asarray(self.B(u), dtype=float)
        rho = np.asarray(self.rho(u), dtype=float).reshape(-1, n) if m else np.zeros((0, n))
        if B.shape != (n, n, n):
            raise DimensionMismatchError(f"B(u) has shape {B.shape}, expected {(n, n, n)}")
        if rho.shape != (m, n):
            raise DimensionMismatchError(f"rho(u) has shape {rho.shape}, expected {(m, n)}")
        if not (np.all(np.isfinite(B)) and np.all(np.isfinite(rho))):
            raise EvaluationError(f"chart data not finite at u={u!r}")
        return B, rho


def so3_chart(scale: float = 1.0) -> AlgebroidChart:
    """Algebroid over a point with B^3_{12} = scale, B^1_{23} = B^2_{31} = 1."""
    B = np.zeros((3, 3, 3))
    B[2, 0, 1] = scale
    B[0, 1, 2] = 1.0
    B[1, 2, 0] = 1.0
    return AlgebroidChart.from_constants(B, np.zeros((0, 3)))


def tangent_chart(n: int) -> AlgebroidChart:
    """Tangent algebroid of R^n: B = 0, anchor = identity."""
    return AlgebroidChart.from_constants(np.zeros((n, n, n)), np.eye(n))


def abelian_chart(fiber_dim: int, base_dim: int = 0) -> AlgebroidChart:
    return AlgebroidChart.from_constants(
        np.zeros((fiber_dim,) * 3), np.zeros((base_dim, fiber_dim))
    )


def load_chart(path) -> AlgebroidChart:
    """Read a constant chart (keys base_dim, fiber_dim, B, rho) from a flat file."""
    entries = read_flat(path)
    problems = []
    for key in ("base_dim", "fiber_dim", "B", "rho"):
        if key not in entries:
            problems.append(f"{path}: missing key: {key}")
    for key, e in entries.items():
        if key not in ("base_dim", "fiber_dim", "B", "rho"):
            problems.append(f"{path}:{e.line}: unknown key: {key}")
    if problems:
        raise ConfigError(problems)
    m, n = int(entries["base_dim"].value), int(entries["fiber_dim"].value)
    B = np.array(entries["B"].value, dtype=float)
    rho = np.array(entries["rho"].value, dtype=float)
    if B.shape != (n, n, n):
        raise ConfigError([f"{path}:{entries['B'].line}: B has shape {B.shape}, expected {(n, n, n)}"])
    if rho.size != m * n:
        raise ConfigError(
            [f"{path}:{entries['rho'].line}: rho has {rho.size} entries, expected {m}x{n}"]
        )
    return AlgebroidChart.from_constants(B, rho.reshape(m, n))


# ---------------------------------------------------------------------------
# symbols polynomial in the fibre


@dataclass(frozen=True, eq=False)
class BasePolynomial:
    """Polynomial in the base coordinates u: {exponent tuple: coefficient}."""

    dim: int
    coeffs: Mapping[Mode, complex] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for e, c in self.coeffs.items():
            e = tuple(int(x) for x in e)
            if len(e) != self.dim or min(e, default=0) < 0:
                raise DimensionMismatchError(f"bad exponent {e} for base_dim {self.dim}")
            if c != 0:
                clean[e] = c
        object.__setattr__(self, "coeffs", MappingProxyType(dict(sorted(clean.items()))))

    @classmethod
    def coordinate(cls, h: int, dim: int) -> BasePolynomial:
        e = [0] * dim
        e[h] = 1
        return cls(dim, {tuple(e): 1.0})

    def __call__(self, u):
        u = np.asarray(u, dtype=float).reshape(-1)
        total = 0.0
        for e, c in self.coeffs.items():
            total = total + c * float(np.prod(u ** np.asarray(e))) if e else total + c
        return total

    def diff(self, h: int) -> BasePolynomial:
        out = {}
        for e, c in self.coeffs.items():
            if e[h]:
                e2 = list(e)
                e2[h] -= 1
                out[tuple(e2)] = c * e[h]
        return BasePolynomial(self.dim, out)

    def _coerce(self, other):
        if isinstance(other, BasePolynomial):
            if other.dim != self.dim:
                raise DimensionMismatchError("base dimensions differ")
            return other
        if isinstance(other, numbers.Number):
            return BasePolynomial(self.dim, {(0,) * self.dim: other})
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        out = dict(self.coeffs)
        for e, c in other.coeffs.items():
            out[e] = out.get(e, 0) + c
        return BasePolynomial(self.dim, out)

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, numbers.Number):
            return BasePolynomial(self.dim, {e: other * c for e, c in self.coeffs.items()})
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        out: dict[Mode, complex] = {}
        for e1, c1 in self.coeffs.items():
            for e2, c2 in other.coeffs.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return BasePolynomial(self.dim, out)

    __rmul__ = __mul__


Coefficient = Union[numbers.Number, BasePolynomial, Callable[[np.ndarray], Any]]


def _is_exact(c) -> bool:
    return isinstance(c, numbers.Number) or hasattr(c, "diff")


def _eval_coeff(c, u):
    return c if isinstance(c, numbers.Number) else c(u)


def _coeff_mul(a, b):
    if _is_exact(a) and _is_exact(b):
        return a * b
    return lambda u: _eval_coeff(a, u) * _eval_coeff(b, u)


def _coeff_add(a, b):
    if _is_exact(a) and _is_exact(b):
        return a + b
    return lambda u: _eval_coeff(a, u) + _eval_coeff(b, u)


def _is_zero(c) -> bool:
    if isinstance(c, numbers.Number):
        return c == 0
    coeffs = getattr(c, "coeffs", None)
    return coeffs is not None and hasattr(c, "diff") and len(coeffs) == 0


@dataclass(frozen=True, eq=False)
class FiberPolynomial:
    """f(u, Z) = sum_alpha a_alpha(u) Z^alpha with finitely many terms.

    Coefficients are numbers, exact differentiable objects (anything with
    ``diff(h)``, ``__call__`` and ring operations, e.g. :class:`BasePolynomial`
    or :class:`qlab.numkit.TrigPoly`) or opaque callables ``u -> value``.
    """

    terms: Mapping[Mode, Coefficient]
    base_dim: int
    fiber_dim: int

    def __post_init__(self):
        clean = {}
        for alpha, c in self.terms.items():
            alpha = tuple(int(a) for a in alpha)
            if len(alpha) != self.fiber_dim or min(alpha, default=0) < 0:
                raise DimensionMismatchError(
                    f"multi-index {alpha} invalid for fiber_dim {self.fiber_dim}"
                )
            if not _is_zero(c):
                clean[alpha] = c
        object.__setattr__(self, "terms", MappingProxyType(dict(sorted(clean.items()))))

    # constructors
    @classmethod
    def coordinate(cls, k: int, fiber_dim: int, base_dim: int = 0) -> FiberPolynomial:
        alpha = [0] * fiber_dim
        alpha[k] = 1
        return cls({tuple(alpha): 1.0}, base_dim, fiber_dim)

    @classmethod
    def base_function(cls, coeff: Coefficient, fiber_dim: int, base_dim: int) -> FiberPolynomial:
        return cls({(0,) * fiber_dim: coeff}, base_dim, fiber_dim)

    @classmethod
    def monomial(cls, alpha, coeff: Coefficient = 1.0, base_dim: int = 0) -> FiberPolynomial:
        alpha = tuple(alpha)
        return cls({alpha: coeff}, base_dim, len(alpha))

    # structure
    @property
    def is_exact(self) -> bool:
        return all(_is_exact(c) for c in self.terms.values())

    @property
    def degree(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    def __call__(self, u, Z):
        Z = np.asarray(Z, dtype=float).reshape(-1)
        if Z.size != self.fiber_dim:
            raise DimensionMismatchError(f"Z has {Z.size} entries, expected {self.fiber_dim}")
        total = 0.0
        for alpha, c in self.terms.items():
            total = total + _eval_coeff(c, u) * float(np.prod(Z ** np.asarray(alpha)))
        return total

    def d_fiber(self, k: int) -> FiberPolynomial:
        out = {}
        for alpha, c in self.terms.items():
            if alpha[k]:
                a2 = list(alpha)
                a2[k] -= 1
                out[tuple(a2)] = alpha[k] * c if _is_exact(c) else _coeff_mul(alpha[k], c)
        return FiberPolynomial(out, self.base_dim, self.fiber_dim)

    def d_base(self, h: int) -> FiberPolynomial:
        if not self.is_exact:
            raise TypeError("exact base derivative needs differentiable coefficients")
        out = {}
        for alpha, c in self.terms.items():
            if not isinstance(c, numbers.Number):
                out[alpha] = c.diff(h)
        return FiberPolynomial(out, self.base_dim, self.fiber_dim)

    # algebra
    def _check(self, other: FiberPolynomial):
        if (other.base_dim, other.fiber_dim) != (self.base_dim, self.fiber_dim):
            raise DimensionMismatchError("fibre polynomials over different charts")

    def __add__(self, other):
        if isinstance(other, numbers.Number):
            other = FiberPolynomial.base_function(other, self.fiber_dim, self.base_dim)
        if not isinstance(other, FiberPolynomial):
            return NotImplemented
        self._check(other)
        out = dict(self.terms)
        for alpha, c in other.terms.items():
            out[alpha] = _coeff_add(out[alpha], c) if alpha in out else c
        return FiberPolynomial(out, self.base_dim, self.fiber_dim)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, numbers.Number):
            return FiberPolynomial(
                {a: _coeff_mul(other, c) for a, c in self.terms.items()},
                self.base_dim,
                self.fiber_dim,
            )
        if not isinstance(other, FiberPolynomial):
            return NotImplemented
        self._check(other)
        out: dict[Mode, Coefficient] = {}
        for a1, c1 in self.terms.items():
            for a2, c2 in other.terms.items():
                a = tuple(x + y for x, y in zip(a1, a2))
                c = _coeff_mul(c1, c2)
                out[a] = _coeff_add(out[a], c) if a in out else c
        return FiberPolynomial(out, self.base_dim, self.fiber_dim)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            return NotImplemented
        out = FiberPolynomial.base_function(1.0, self.fiber_dim, self.base_dim)
        for _ in range(k):
            out = out * self
        return out


# ---------------------------------------------------------------------------
# quantisable families


class QuantisableTag(enum.Enum):
    FOURIER_OF_COMPACT = "FourierOfCompact"
    FIBER_POLYNOMIAL = "FiberPolynomial"
    COMPACT_CHARACTER = "CompactCharacter"


@dataclass(frozen=True)
class FiberCharacter:
    """X_q -> exp(i <ell(q), X>) for a section ``ell`` of the algebroid.

    ``base_compact`` records whether the base manifold is compact (so any
    smooth ``ell`` is compactly supported); otherwise ``ell_support_radius``
    must bound the support of ``ell``.
    """

    ell: Callable[[Any], np.ndarray]
    base_compact: bool = False
    ell_support_radius: float | None = None

    def __call__(self, q, X):
        return np.exp(1j * float(np.dot(self.ell(q), np.asarray(X, dtype=float))))


@dataclass(frozen=True)
class FourierOfCompact:
    """X -> int exp(-i <xi, X>) g(xi) d xi for g supported in |xi| <= support_radius."""

    g: Callable[[Any, np.ndarray], complex]
    support_radius: float


def classify_quantisable(f) -> QuantisableTag | None:
    """Tag ``f`` with its quantisable family, or return None for opaque input.

    Membership cannot be decided from samples, so plain callables are
    always rejected.
    """
    if isinstance(f, FiberPolynomial):
        return QuantisableTag.FIBER_POLYNOMIAL
    if isinstance(f, FiberCharacter):
        if f.base_compact or f.ell_support_radius is not None:
            return QuantisableTag.COMPACT_CHARACTER
        return None
    if isinstance(f, FourierOfCompact):
        if np.isfinite(f.support_radius) and f.support_radius >= 0:
            return QuantisableTag.FOURIER_OF_COMPACT
        return None
    return None


# ---------------------------------------------------------------------------
# the bracket


def _as_callable(F):
    return F if callable(F) else (lambda u, Z: F)


def _gradients(F, u, Z, m, n, tol: Tolerances, exact: bool):
    if exact:
        dZ = np.array([F.d_fiber(k)(u, Z) for k in range(n)])
        du = np.array([F.d_base(h)(u, Z) for h in range(m)])
        return dZ, du
    f = _as_callable(F)
    step = tol.fd_step
    dZ = np.array(
        [central_diff(lambda z: f(u, z), Z, np.eye(n)[k], step) for k in range(n)]
    )
    du = np.array(
        [central_diff(lambda v: f(v, Z), u, np.eye(m)[h], step) for h in range(m)]
    )
    return dZ, du


def _structure_tensor(B: np.ndarray) -> np.ndarray:
    # C[j, k, h] = B^j_{hk} - B^j_{kh}
    return np.transpose(B, (0, 2, 1)) - B


def _real(value):
    value = complex(value)
    return value.real if value.imag == 0 else value


def lie_poisson_bracket(F, G, point, chart: AlgebroidChart, tol: Tolerances = DEFAULT_TOL):
    """Evaluate {F, G} at ``point = (u, Z)``.

    Exact derivatives are used when both arguments are exact fibre
    polynomials, finite differences with ``tol.fd_step`` otherwise.
    """
    u, Z = point
    m, n = chart.base_dim, chart.fiber_dim
    u = np.asarray(u, dtype=float).reshape(-1)
    Z = np.asarray(Z, dtype=float).reshape(-1)
    if u.size != m or Z.size != n:
        raise DimensionMismatchError(
            f"point has shapes ({u.size}, {Z.size}), chart expects ({m}, {n})"
        )
    for X in (F, G):
        if isinstance(X, FiberPolynomial) and (X.base_dim, X.fiber_dim) != (m, n):
            raise DimensionMismatchError("fibre polynomial does not match the chart")
    exact = all(isinstance(X, FiberPolynomial) and X.is_exact for X in (F, G))
    B, rho = chart.structure_at(u)
    Fz, Fu = _gradients(F, u, Z, m, n, tol, exact)
    Gz, Gu = _gradients(G, u, Z, m, n, tol, exact)
    C = _structure_tensor(B)
    lie_part = np.einsum("k,h,jkh,j->", Fz, Gz, C, Z)
    anchor_part = np.einsum("k,h,hk->", Fz, Gu, rho) - np.einsum("h,k,hk->", Fu, Gz, rho)
    value = lie_part + anchor_part
    if not np.isfinite(value):
        raise EvaluationError(f"bracket not finite at {point!r}")
    return _real(value)


def bracket_symbol(F: FiberPolynomial, G: FiberPolynomial, chart: AlgebroidChart) -> FiberPolynomial:
    """{F, G} as a fibre polynomial (constant charts, exact coefficients)."""
    if not chart.constant:
        raise TypeError("symbolic bracket needs a constant chart")
    if not (F.is_exact and G.is_exact):
        raise TypeError("symbolic bracket needs exact coefficients")
    m, n = chart.base_dim, chart.fiber_dim
    B, rho = chart.structure_at(np.zeros(m))
    C = _structure_tensor(B)
    Z = [FiberPolynomial.coordinate(j, n, m) for j in range(n)]
    dFz = [F.d_fiber(k) for k in range(n)]
    dGz = [G.d_fiber(h) for h in range(n)]
    dFu = [F.d_base(h) for h in range(m)]
    dGu = [G.d_base(h) for h in range(m)]
    out = FiberPolynomial({}, m, n)
    for k in range(n):
        for h in range(n):
            lin = [(C[j, k, h], Z[j]) for j in range(n) if C[j, k, h] != 0]
            if lin:
                zsum = sum((c * z for c, z in lin[1:]), lin[0][0] * lin[0][1])
                out = out + dFz[k] * dGz[h] * zsum
    for h in range(m):
        for k in range(n):
            if rho[h, k] != 0:
                out = out + (dFz[k] * dGu[h] - dFu[h] * dGz[k]) * float(rho[h, k])
    return out


def jacobi_residual(chart: AlgebroidChart, F, G, H, point, tol: Tolerances = DEFAULT_TOL) -> float:
    """|{F,{G,H}} + {G,{H,F}} + {H,{F,G}}| at ``point``."""
    symbolic = chart.constant and all(
        isinstance(X, FiberPolynomial) and X.is_exact for X in (F, G, H)
    )

    def inner(A, Bf):
        if symbolic:
            return bracket_symbol(A, Bf, chart)
        return lambda u, Z: lie_poisson_bracket(A, Bf, (u, Z), chart, tol)

    total = (
        lie_poisson_bracket(F, inner(G, H), point, chart, tol)
        + lie_poisson_bracket(G, inner(H, F), point, chart, tol)
        + lie_poisson_bracket(H, inner(F, G), point, chart, tol)
    )
    return float(abs(total))


def random_fiber_polynomial(
    rng: np.random.Generator, base_dim: int, fiber_dim: int, degree: int = 2, n_terms: int = 4
) -> FiberPolynomial:
    """Random fibre polynomial with affine-in-u coefficients (for property checks)."""
    terms: dict[Mode, Coefficient] = {}
    for _ in range(n_terms):
        alpha = [0] * fiber_dim
        for _ in range(int(rng.integers(0, degree + 1))):
            alpha[int(rng.integers(0, fiber_dim))] += 1
        coeffs = {(0,) * base_dim: float(rng.uniform(-1, 1))}
        for h in range(base_dim):
            e = [0] * base_dim
            e[h] = 1
            coeffs[tuple(e)] = float(rng.uniform(-1, 1))
        c = BasePolynomial(base_dim, coeffs)
        key = tuple(alpha)
        terms[key] = terms[key] + c if key in terms else c
    return FiberPolynomial(terms, base_dim, fiber_dim)


def as_callable(F: FiberPolynomial) -> Callable:
    """Hide the polynomial structure so the finite-difference path is taken."""
    return lambda u, Z: F(u, Z)
