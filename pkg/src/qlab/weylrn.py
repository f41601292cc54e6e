"""Quantisation of symbols on T*R^n = R^{2n}, realised on a periodic box.

A symbol ``f(p, X) = sum_alpha a_alpha(p) X^alpha`` is polynomial in the
fibre variable X with trigonometric-polynomial coefficients.  Its
quantisation at ``hbar`` is the differential operator

    Q_hbar(f) H = sum_alpha a_alpha(p) (-i hbar d/dp)^alpha H,

coefficients to the left of derivatives, because the defining integral
evaluates ``f`` at the outer base point.  With the Fourier pairing
normalised by ``dX dxi / (2 pi)^n``, Q(1) is the identity,
Q(X_k) = -i hbar d/dp_k and Q(a(p)) is multiplication by ``a``.

The position observable p_k itself is not periodic; on the box it is
replaced by characters such as exp(i p_k).  Both Q(X_k) and Q(p_k) are
unbounded on the line, which the periodic surrogate sidesteps.
"""

from __future__ import annotations

import ast
import numbers
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatchError, UnsupportedSymbolError
from .liepoisson import (
    AlgebroidChart,
    FiberPolynomial,
    QuantisableTag,
    bracket_symbol,
    classify_quantisable,
    tangent_chart,
)
from .numkit import TWO_PI, PeriodicGrid, TrigPoly, loglog_slope, spectral_derivative

# (1/(i hbar)) [Q(f), Q(g)] is compared against Q({f, g}) after multiplying by
# this sign; the star product composes operator families in convolution
# order, which reverses naive operator composition.
COMMUTATOR_ORIENTATION = -1


@dataclass(frozen=True)
class QuantisedOperator:
    hbar: float
    terms: tuple[tuple[TrigPoly, tuple[int, ...]], ...]
    grid: PeriodicGrid

    def __post_init__(self):
        for coeff, alpha in self.terms:
            if len(alpha) != self.grid.dim or coeff.dim != self.grid.dim:
                raise DimensionMismatchError("operator term does not match the grid")

    def __call__(self, H) -> np.ndarray:
        return apply(self, H)


def _as_trig(c, dim: int, period: float) -> TrigPoly:
    if isinstance(c, numbers.Number):
        return TrigPoly.constant(c, dim, period)
    if isinstance(c, TrigPoly):
        if c.dim != dim:
            raise DimensionMismatchError(f"coefficient dim {c.dim} != {dim}")
        if c.period != period:
            raise UnsupportedSymbolError(
                f"coefficient period {c.period} differs from the grid period {period}"
            )
        return c
    raise UnsupportedSymbolError(
        f"coefficient {c!r} is not a trigonometric polynomial; only band-limited "
        "coefficients can be differentiated exactly on the grid"
    )


def quantise(f: FiberPolynomial, hbar: float, grid: PeriodicGrid) -> QuantisedOperator:
    if classify_quantisable(f) is not QuantisableTag.FIBER_POLYNOMIAL:
        raise UnsupportedSymbolError(f"only fibre-polynomial symbols are supported, got {f!r}")
    n = grid.dim
    if f.base_dim != n or f.fiber_dim != n:
        raise DimensionMismatchError(
            f"symbol over ({f.base_dim}, {f.fiber_dim}) does not match grid dim {n}"
        )
    terms = []
    for alpha, c in f.terms.items():
        factor = (-1j * hbar) ** sum(alpha)
        if factor == 0:
            continue
        terms.append((_as_trig(c, n, grid.period).scale(factor), alpha))
    return QuantisedOperator(float(hbar), tuple(terms), grid)


def apply(op: QuantisedOperator, H) -> np.ndarray:
    """Apply ``op`` to grid samples: spectral derivatives, nodal coefficients."""
    grid = op.grid
    H = np.asarray(H, dtype=complex)
    if H.shape != grid.shape:
        raise DimensionMismatchError(f"samples of shape {H.shape} on a grid of shape {grid.shape}")
    out = np.zeros(grid.shape, dtype=complex)
    derivatives: dict[tuple[int, ...], np.ndarray] = {}
    for coeff, alpha in op.terms:
        if alpha not in derivatives:
            derivatives[alpha] = H if not any(alpha) else spectral_derivative(H, grid, alpha)
        out += coeff.sample(grid) * derivatives[alpha]
    return out


@dataclass(frozen=True)
class CommutatorReport:
    hbar: float
    deviation: float


def commutator_check(
    f: FiberPolynomial,
    g: FiberPolynomial,
    hbar: float,
    H,
    grid: PeriodicGrid,
    chart: AlgebroidChart | None = None,
) -> CommutatorReport:
    """Sup-norm distance between sigma (1/(i hbar)) [Q(f), Q(g)] H and Q({f, g}) H."""
    if hbar == 0:
        raise ZeroDivisionError("hbar must be nonzero")
    chart = chart or tangent_chart(grid.dim)
    Qf, Qg = quantise(f, hbar, grid), quantise(g, hbar, grid)
    comm = apply(Qf, apply(Qg, H)) - apply(Qg, apply(Qf, H))
    lhs = COMMUTATOR_ORIENTATION * comm / (1j * hbar)
    rhs = apply(quantise(bracket_symbol(f, g, chart), hbar, grid), H)
    return CommutatorReport(float(hbar), float(np.max(np.abs(lhs - rhs))))


def commutator_sweep(
    f: FiberPolynomial,
    g: FiberPolynomial,
    hbars: Sequence[float],
    H,
    grid: PeriodicGrid,
) -> tuple[list[CommutatorReport], float | None]:
    """Reports for each hbar plus the log-log slope of the deviation (None if exact)."""
    reports = [commutator_check(f, g, h, H, grid) for h in hbars]
    devs = [r.deviation for r in reports]
    if len(devs) < 2 or min(devs) == 0:
        return reports, None
    return reports, loglog_slope(hbars, devs)


def orientation_oracle(hbar: float = 0.1, points: int = 16) -> int:
    """Sign that makes the canonical pair (X, exp(i p)) commute to its bracket."""
    grid = PeriodicGrid(1, points)
    X = FiberPolynomial.coordinate(0, 1, 1)
    a = FiberPolynomial.base_function(TrigPoly.character((1,)), 1, 1)
    H = TrigPoly(1, {(0,): 1.0, (2,): 0.5}).sample(grid)
    Qx, Qa = quantise(X, hbar, grid), quantise(a, hbar, grid)
    comm = (apply(Qx, apply(Qa, H)) - apply(Qa, apply(Qx, H))) / (1j * hbar)
    target = apply(quantise(bracket_symbol(X, a, tangent_chart(1)), hbar, grid), H)
    plus = np.max(np.abs(comm - target))
    minus = np.max(np.abs(-comm - target))
    return 1 if plus < minus else -1


def default_test_function(grid: PeriodicGrid) -> np.ndarray:
    """Band-limited H(p) = prod_h (1 + cos p_h / 2 + sin 2 p_h / 4)."""
    n = grid.dim
    factor = {0: 1.0, 1: 0.25, -1: 0.25, 2: -0.125j, -2: 0.125j}
    H = TrigPoly.constant(1.0, n, grid.period)
    for axis in range(n):
        modes = {}
        for k, c in factor.items():
            r = [0] * n
            r[axis] = k
            modes[tuple(r)] = c
        H = H * TrigPoly(n, modes, grid.period)
    return H.sample(grid)


# ---------------------------------------------------------------------------
# tiny symbol language: polynomials in X with trigonometric coefficients
#
#   X1^2*cos(p1) + 2*X2 - 0.5*sin(2*p1 - p2) + expi(p1)
#
# X (or p) without an index is accepted when n == 1.  Trig arguments must be
# integer combinations of p_1..p_n; sin(k p) means sin(2 pi k p / L).


class SymbolSyntaxError(ValueError):
    pass


def _index(name: str, prefix: str, n: int) -> int | None:
    if not name.startswith(prefix):
        return None
    rest = name[len(prefix):]
    if rest == "" and n == 1:
        return 0
    if rest.isdigit() and 1 <= int(rest) <= n:
        return int(rest) - 1
    return None


def parse_symbol(text: str, n: int, period: float = TWO_PI) -> FiberPolynomial:
    try:
        tree = ast.parse(text.replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise SymbolSyntaxError(f"cannot parse symbol {text!r}: {exc.msg}") from None

    def linear(node) -> np.ndarray:
        if isinstance(node, ast.Name):
            i = _index(node.id, "p", n)
            if i is None:
                raise SymbolSyntaxError(f"unknown base variable {node.id!r}")
            v = np.zeros(n, dtype=int)
            v[i] = 1
            return v
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
            return -linear(node.operand)
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.UAdd):
            return linear(node.operand)
        if isinstance(node, ast.BinOp) and isinstance(node.op, (ast.Add, ast.Sub)):
            sign = 1 if isinstance(node.op, ast.Add) else -1
            return linear(node.left) + sign * linear(node.right)
        if isinstance(node, ast.BinOp) and isinstance(node.op, ast.Mult):
            for k, other in ((node.left, node.right), (node.right, node.left)):
                try:
                    value = ast.literal_eval(k)
                except ValueError:
                    continue
                if isinstance(value, int):
                    return value * linear(other)
        raise SymbolSyntaxError(
            f"trigonometric arguments must be integer combinations of p: {ast.unparse(node)!r}"
        )

    def trig(fn: str, r: np.ndarray) -> TrigPoly:
        r = tuple(int(x) for x in r)
        mr = tuple(-x for x in r)
        if fn == "expi":
            return TrigPoly(n, {r: 1.0}, period)
        if fn == "cos":
            return TrigPoly(n, {r: 0.5}, period) + TrigPoly(n, {mr: 0.5}, period)
        if fn == "sin":
            return TrigPoly(n, {r: -0.5j}, period) + TrigPoly(n, {mr: 0.5j}, period)
        raise SymbolSyntaxError(f"unknown function {fn!r}; use sin, cos or expi")

    def const(c) -> FiberPolynomial:
        return FiberPolynomial.base_function(c, n, n)

    def walk(node) -> FiberPolynomial:
        if isinstance(node, ast.Expression):
            return walk(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
            return const(node.value)
        if isinstance(node, ast.Name):
            k = _index(node.id, "X", n)
            if k is None:
                raise SymbolSyntaxError(
                    f"unknown name {node.id!r}; base variables may only appear inside sin/cos/expi"
                )
            return FiberPolynomial.coordinate(k, n, n)
        if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
            if len(node.args) != 1 or node.keywords:
                raise SymbolSyntaxError(f"{node.func.id} takes exactly one argument")
            return const(trig(node.func.id, linear(node.args[0])))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            inner = walk(node.operand)
            return -inner if isinstance(node.op, ast.USub) else inner
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                if not (isinstance(node.right, ast.Constant) and isinstance(node.right.value, int)
                        and node.right.value >= 0):
                    raise SymbolSyntaxError("exponents must be non-negative integer literals")
                return walk(node.left) ** node.right.value
            left, right = walk(node.left), walk(node.right)
            if isinstance(node.op, ast.Add):
                return left + right
            if isinstance(node.op, ast.Sub):
                return left - right
            if isinstance(node.op, ast.Mult):
                return left * right
        raise SymbolSyntaxError(f"unsupported expression {ast.unparse(node)!r}")

    return walk(tree)
