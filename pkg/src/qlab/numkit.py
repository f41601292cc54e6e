"""Shared numerical substrate.

Periodic grids with direct-summation discrete Fourier analysis, finite
trigonometric polynomials, a fourth-order central difference and a
fixed-step classical Runge-Kutta integrator.  Everything here is pure and
operates on immutable values.
"""

from __future__ import annotations

import cmath
import math
import numbers
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .errors import DimensionMismatchError, EvaluationError, IntegrationDivergedError

TWO_PI = 2.0 * math.pi
PRUNE_THRESHOLD = 1e-300

Mode = tuple[int, ...]


@dataclass(frozen=True)
class PeriodicGrid:
    """Nodal grid x_j = j L / N on the box [0, L)^dim."""

    dim: int
    points_per_dim: int
    period: float = TWO_PI

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        n = self.points_per_dim
        if n < 4 or n % 2:
            raise ValueError(f"points_per_dim must be even and >= 4, got {n}")
        if not self.period > 0:
            raise ValueError(f"period must be positive, got {self.period}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_dim,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_dim**self.dim

    def axis_nodes(self) -> np.ndarray:
        n = self.points_per_dim
        return np.arange(n) * (self.period / n)

    def nodes(self) -> list[np.ndarray]:
        """Coordinate arrays (``indexing='ij'``), one per axis."""
        axes = [self.axis_nodes()] * self.dim
        return list(np.meshgrid(*axes, indexing="ij"))

    def axis_modes(self) -> np.ndarray:
        """The balanced mode range (-N/2, N/2] in ascending order."""
        n = self.points_per_dim
        return np.arange(-n // 2 + 1, n // 2 + 1)

    def wavenumbers(self) -> np.ndarray:
        return self.axis_modes() * (TWO_PI / self.period)

    def sample(self, fn: Callable[..., object]) -> np.ndarray:
        """Evaluate ``fn(x_1, ..., x_dim)`` on every node (vectorised call)."""
        values = np.asarray(fn(*self.nodes()), dtype=complex)
        return np.broadcast_to(values, self.shape).copy()


@dataclass(frozen=True)
class Tolerances:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    fd_step: float = 1e-3

    def __post_init__(self):
        if not (0 <= self.abs_tol < 1 and 0 <= self.rel_tol < 1):
            raise ValueError("abs_tol and rel_tol must lie in [0, 1)")
        if not self.fd_step > 0:
            raise ValueError("fd_step must be positive")
        if self.fd_step >= TWO_PI / 10:
            raise ValueError("fd_step must be smaller than period/10")


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class Trajectory:
    times: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.times) != len(self.values):
            raise DimensionMismatchError("times and values differ in length")
        if any(b <= a for a, b in zip(self.times, self.times[1:])):
            raise ValueError("times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.times), np.asarray(self.values)


# ---------------------------------------------------------------------------
# discrete Fourier analysis


def _roots(n: int) -> np.ndarray:
    # exp(2 pi i r / n) for r in [0, n); reducing k*j mod n first keeps every
    # entry within one rounding of the exact root of unity
    r = np.arange(n)
    return np.exp(2j * np.pi * r / n)


def _forward_matrix(n: int) -> np.ndarray:
    k = np.arange(-n // 2 + 1, n // 2 + 1)
    j = np.arange(n)
    return np.conj(_roots(n))[np.outer(k, j) % n] / n


def _inverse_matrix(n: int) -> np.ndarray:
    k = np.arange(-n // 2 + 1, n // 2 + 1)
    j = np.arange(n)
    return _roots(n)[np.outer(j, k) % n]


def _apply_per_axis(matrix: np.ndarray, data: np.ndarray) -> np.ndarray:
    out = data
    for axis in range(data.ndim):
        out = np.moveaxis(np.tensordot(matrix, out, axes=([1], [axis])), 0, axis)
    return out


def _check_samples(samples, grid: PeriodicGrid) -> np.ndarray:
    arr = np.asarray(samples, dtype=complex)
    if arr.shape != grid.shape:
        raise DimensionMismatchError(
            f"expected samples of shape {grid.shape}, got {arr.shape}"
        )
    return arr


def dft_coefficients(samples, grid: PeriodicGrid) -> np.ndarray:
    """Trigonometric-interpolation coefficients, indexed like ``grid.axis_modes()``.

    Direct O(N^2) summation along each axis.
    """
    arr = _check_samples(samples, grid)
    return _apply_per_axis(_forward_matrix(grid.points_per_dim), arr)


def inverse_dft(coefficients, grid: PeriodicGrid) -> np.ndarray:
    arr = _check_samples(coefficients, grid)
    return _apply_per_axis(_inverse_matrix(grid.points_per_dim), arr)


def dft_modes(samples, grid: PeriodicGrid) -> dict[Mode, complex]:
    """Map every balanced mode vector to its coefficient."""
    coeffs = dft_coefficients(samples, grid)
    modes = grid.axis_modes()
    out = {}
    for index in np.ndindex(*grid.shape):
        out[tuple(int(modes[i]) for i in index)] = complex(coeffs[index])
    return out


def spectral_derivative(samples, grid: PeriodicGrid, order: Sequence[int]) -> np.ndarray:
    """Apply prod_h d^{order[h]}/dx_h^{order[h]} spectrally.

    The Nyquist mode is dropped for odd orders so that real data stay real.
    """
    if len(order) != grid.dim:
        raise DimensionMismatchError(
            f"derivative order has {len(order)} entries, grid has dim {grid.dim}"
        )
    coeffs = dft_coefficients(samples, grid)
    if not any(order):
        return inverse_dft(coeffs, grid)
    k = grid.wavenumbers()
    n = grid.points_per_dim
    for axis, a in enumerate(order):
        if a == 0:
            continue
        factor = (1j * k) ** a
        if a % 2:
            factor[n - 1] = 0.0  # Nyquist sits at the last balanced index
        shape = [1] * grid.dim
        shape[axis] = n
        coeffs = coeffs * factor.reshape(shape)
    return inverse_dft(coeffs, grid)


# ---------------------------------------------------------------------------
# trigonometric polynomials


def _freeze(coeffs: Mapping[Mode, complex]) -> Mapping[Mode, complex]:
    clean = {
        tuple(int(x) for x in r): complex(c)
        for r, c in coeffs.items()
        if abs(c) >= PRUNE_THRESHOLD
    }
    return MappingProxyType(dict(sorted(clean.items())))


@dataclass(frozen=True, eq=False)
class TrigPoly:
    """Finite sum of characters x -> exp(2 pi i <r, x> / L), r in Z^dim."""

    dim: int
    coeffs: Mapping[Mode, complex] = field(default_factory=dict)
    period: float = TWO_PI

    def __post_init__(self):
        for r in self.coeffs:
            if len(r) != self.dim:
                raise DimensionMismatchError(f"mode {r} does not have length {self.dim}")
        object.__setattr__(self, "coeffs", _freeze(self.coeffs))

    @classmethod
    def character(cls, r: Iterable[int], coeff: complex = 1.0, period: float = TWO_PI):
        r = tuple(int(x) for x in r)
        return cls(len(r), {r: coeff}, period)

    @classmethod
    def constant(cls, value: complex, dim: int, period: float = TWO_PI):
        return cls(dim, {(0,) * dim: value}, period)

    @property
    def support(self) -> tuple[Mode, ...]:
        return tuple(self.coeffs)

    def __getitem__(self, r: Mode) -> complex:
        return self.coeffs.get(tuple(r), 0j)

    def __eq__(self, other):
        if isinstance(other, TrigPoly):
            return (
                self.dim == other.dim
                and self.period == other.period
                and dict(self.coeffs) == dict(other.coeffs)
            )
        return NotImplemented

    __hash__ = None

    def __repr__(self):
        terms = ", ".join(f"{r}: {c:.6g}" for r, c in self.coeffs.items())
        return f"TrigPoly(dim={self.dim}, {{{terms}}})"

    def _check(self, other: TrigPoly):
        if other.dim != self.dim:
            raise DimensionMismatchError(f"dimensions {self.dim} and {other.dim} differ")
        if other.period != self.period:
            raise DimensionMismatchError("trigonometric polynomials on different boxes")

    def _coerce(self, other):
        if isinstance(other, TrigPoly):
            self._check(other)
            return other
        if isinstance(other, numbers.Number):
            return TrigPoly.constant(other, self.dim, self.period)
        return None

    def __add__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        out = dict(self.coeffs)
        for r, c in other.coeffs.items():
            out[r] = out.get(r, 0j) + c
        return TrigPoly(self.dim, out, self.period)

    __radd__ = __add__

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, factor: complex) -> TrigPoly:
        return TrigPoly(self.dim, {r: factor * c for r, c in self.coeffs.items()}, self.period)

    def __mul__(self, other):
        """Pointwise product, i.e. convolution of coefficients."""
        if isinstance(other, numbers.Number):
            return self.scale(other)
        if not isinstance(other, TrigPoly):
            return NotImplemented
        self._check(other)
        out: dict[Mode, complex] = {}
        for r, a in self.coeffs.items():
            for s, b in other.coeffs.items():
                m = tuple(x + y for x, y in zip(r, s))
                out[m] = out.get(m, 0j) + a * b
        return TrigPoly(self.dim, out, self.period)

    def __rmul__(self, other):
        if isinstance(other, numbers.Number):
            return self.scale(other)
        return NotImplemented

    def diff(self, axis: int) -> TrigPoly:
        w = TWO_PI / self.period
        return TrigPoly(
            self.dim,
            {r: 1j * w * r[axis] * c for r, c in self.coeffs.items() if r[axis]},
            self.period,
        )

    def __call__(self, x) -> complex:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dim:
            raise DimensionMismatchError(f"point has {x.size} coordinates, expected {self.dim}")
        w = TWO_PI / self.period
        return sum(
            (c * cmath.exp(1j * w * float(np.dot(r, x))) for r, c in self.coeffs.items()),
            0j,
        )

    def sample(self, grid: PeriodicGrid) -> np.ndarray:
        if grid.dim != self.dim:
            raise DimensionMismatchError(f"grid dim {grid.dim} != {self.dim}")
        xs = grid.nodes()
        w = TWO_PI / self.period
        out = np.zeros(grid.shape, dtype=complex)
        for r, c in self.coeffs.items():
            phase = sum(ri * xi for ri, xi in zip(r, xs))
            out += c * np.exp(1j * w * phase)
        return out

    def max_abs_diff(self, other: TrigPoly) -> float:
        keys = set(self.coeffs) | set(other.coeffs)
        return max((abs(self[r] - other[r]) for r in keys), default=0.0)


def trig_from_samples(samples, grid: PeriodicGrid, tol: float = 0.0) -> TrigPoly:
    """Interpolating trigonometric polynomial, dropping coefficients with |c| <= tol."""
    modes = {r: c for r, c in dft_modes(samples, grid).items() if abs(c) > tol}
    return TrigPoly(grid.dim, modes, grid.period)


# ---------------------------------------------------------------------------
# finite differences and ODEs


def _finite(value) -> bool:
    return bool(np.all(np.isfinite(np.asarray(value))))


def central_diff(f: Callable, x, direction, step: float):
    """Fourth-order central estimate of the directional derivative of ``f`` at ``x``.

    ``f`` may return scalars or arrays; ``x`` and ``direction`` may be scalars
    or vectors of matching shape.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, dtype=float)
    d = np.asarray(direction, dtype=float)
    if x.ndim == 0 and d.ndim == 0:
        x, d = float(x), float(d)
    values = []
    for k in (2, 1, -1, -2):
        v = f(x + k * step * d)
        if not _finite(v):
            raise EvaluationError(f"non-finite value at offset {k}*step from {x!r}")
        values.append(np.asarray(v))
    fp2, fp1, fm1, fm2 = values
    out = (-fp2 + 8.0 * fp1 - 8.0 * fm1 + fm2) / (12.0 * step)
    return out[()] if out.ndim == 0 else out


def rk4_solve(
    rhs: Callable[[float, float], float],
    t0: float,
    y0: float,
    t1: float,
    step: float,
) -> Trajectory:
    """Classical fixed-step RK4 from ``t0`` towards ``t1``.

    Nodes are ``t0 + k*step`` (computed, not accumulated); the last node is
    within one step of ``t1``.
    """
    if not t1 > t0:
        raise ValueError("t1 must exceed t0")
    if not step > 0:
        raise ValueError("step must be positive")
    n = int(math.floor((t1 - t0) / step + 1e-9))
    times = [t0]
    values = [float(y0)]
    y = float(y0)
    h = step
    for k in range(n):
        t = t0 + k * h
        k1 = rhs(t, y)
        k2 = rhs(t + h / 2, y + h / 2 * k1)
        k3 = rhs(t + h / 2, y + h / 2 * k2)
        k4 = rhs(t + h, y + h * k3)
        y_next = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not math.isfinite(y_next):
            raise IntegrationDivergedError(f"integration diverged after t={t}", t)
        y = y_next
        times.append(t0 + (k + 1) * h)
        values.append(y)
    return Trajectory(tuple(times), tuple(values))


def loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> float:
    """Least-squares slope of log(ys) against log(xs)."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    if lx.size < 2:
        raise ValueError("need at least two points for a slope")
    return float(np.polyfit(lx, ly, 1)[0])
