import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlab import nctorus, weylrn
from qlab.errors import DimensionMismatchError, UnsupportedSymbolError
from qlab.liepoisson import BasePolynomial, FiberPolynomial
from qlab.numkit import PeriodicGrid, TrigPoly
from qlab.weylrn import (
    SymbolSyntaxError,
    apply,
    commutator_check,
    commutator_sweep,
    default_test_function,
    parse_symbol,
    quantise,
)

G1 = PeriodicGrid(1, 64)
X = FiberPolynomial.coordinate(0, 1, 1)


def plane_wave(grid, m):
    return grid.sample(lambda *p: np.exp(1j * sum(mi * pi for mi, pi in zip(m, p))))


def trig_symbol(c, n=1):
    return FiberPolynomial.base_function(c, n, n)


class TestQuantise:
    def test_X_on_plane_wave(self):
        H = plane_wave(G1, (3,))
        assert np.max(np.abs(apply(quantise(X, 0.5, G1), H) - 1.5 * H)) < 1e-12

    def test_multiplication(self):
        a = TrigPoly(1, {(1,): 0.5, (-2,): 1j})
        H = default_test_function(G1)
        for hbar in (0.0, 0.3, 2.0):
            out = apply(quantise(trig_symbol(a), hbar, G1), H)
            assert np.max(np.abs(out - a.sample(G1) * H)) < 1e-13

    def test_X2_on_constant(self):
        assert np.max(np.abs(apply(quantise(X**2, 0.7, G1), np.ones(64)))) < 1e-12

    def test_identity(self):
        H = default_test_function(G1)
        assert np.max(np.abs(apply(quantise(trig_symbol(1.0), 0.4, G1), H) - H)) < 1e-14

    def test_X_squared_composes(self):
        H = plane_wave(G1, (5,))
        Q = quantise(X, 0.2, G1)
        assert np.max(np.abs(apply(Q, apply(Q, H)) - (0.2 * 5) ** 2 * H)) < 1e-12

    def test_parity(self):
        H = G1.sample(lambda p: np.cos(p) + 0.3 * np.cos(2 * p))
        out = apply(quantise(X, 1.0, G1), H)
        assert np.max(np.abs(out.real)) < 1e-13
        idx = (-np.arange(64)) % 64
        assert np.max(np.abs(out + out[idx])) < 1e-13

    def test_coefficient_left_of_derivative(self):
        a = TrigPoly(1, {(1,): 1.0})
        H = plane_wave(G1, (2,))
        out = apply(quantise(trig_symbol(a) * X, 1.0, G1), H)
        assert np.max(np.abs(out - a.sample(G1) * 2 * H)) < 1e-12

    def test_rejects_nonpolynomial_coefficient(self):
        f = FiberPolynomial.base_function(BasePolynomial.coordinate(0, 1), 1, 1)
        with pytest.raises(UnsupportedSymbolError):
            quantise(f, 0.1, G1)

    def test_rejects_callable(self):
        with pytest.raises(UnsupportedSymbolError):
            quantise(lambda p, X: np.exp(X**2), 0.1, G1)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            quantise(FiberPolynomial.coordinate(0, 2, 2), 0.1, G1)
        with pytest.raises(DimensionMismatchError):
            apply(quantise(X, 0.1, G1), np.ones(32))


def eigen_errors(n, N, hbar):
    """Worst plane-wave error per (alpha, m), scaled by the grid operator norm (hbar N/2)^|alpha|."""
    grid = PeriodicGrid(n, N)
    alphas = [a for a in itertools.product(range(5), repeat=n) if sum(a) <= 4]
    worst = 0.0
    for m in itertools.product(range(-N // 4, N // 4 + 1), repeat=n):
        H = plane_wave(grid, m)
        for alpha in alphas:
            f = FiberPolynomial.monomial(alpha, 1.0, base_dim=n)
            expect = np.prod([(hbar * mi) ** ai for mi, ai in zip(m, alpha)])
            err = np.max(np.abs(apply(quantise(f, hbar, grid), H) - expect * H))
            worst = max(worst, err / max(1.0, (hbar * N / 2) ** sum(alpha)))
    return worst


@pytest.mark.parametrize("n,N,hbar", [(1, 32, 0.7), (1, 64, 1.0), (2, 16, 0.3), (1, 64, 2 / 64)])
def test_plane_wave_eigenrelation(n, N, hbar):
    assert eigen_errors(n, N, hbar) <= 1e-12


def test_hbar_zero_limit():
    f = X**2 * trig_symbol(TrigPoly(1, {(1,): 1.0})) + trig_symbol(TrigPoly(1, {(0,): 2.0, (3,): 0.5}))
    H = default_test_function(G1)
    out = apply(quantise(f, 0.0, G1), H)
    assert np.max(np.abs(out - TrigPoly(1, {(0,): 2.0, (3,): 0.5}).sample(G1) * H)) < 1e-13


def test_hbar_zero_multiplicative():
    f = trig_symbol(TrigPoly(1, {(1,): 1.0, (-1,): 0.5})) + X * trig_symbol(TrigPoly(1, {(2,): 1.0}))
    g = trig_symbol(TrigPoly(1, {(0,): 1.0, (2,): -0.5j})) + X**2
    H = default_test_function(G1)
    lhs = apply(quantise(f, 0.0, G1), apply(quantise(g, 0.0, G1), H))
    rhs = apply(quantise(f * g, 0.0, G1), H)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


def test_linearity():
    f = X * trig_symbol(TrigPoly(1, {(1,): 1.0}))
    g = X**2
    H = default_test_function(G1)
    lhs = apply(quantise(f * 2.0 + g, 0.3, G1), H)
    rhs = 2 * apply(quantise(f, 0.3, G1), H) + apply(quantise(g, 0.3, G1), H)
    assert np.max(np.abs(lhs - rhs)) < 1e-12


class TestCommutator:
    H = default_test_function(G1)

    @pytest.mark.parametrize("hbar", [1.0, 0.1, 0.01])
    def test_canonical_pair_exact(self, hbar):
        a = trig_symbol(TrigPoly(1, {(1,): 1.0}))
        assert commutator_check(X, a, hbar, self.H, G1).deviation <= 1e-10

    def test_self_commutator(self):
        f = X**2 * trig_symbol(TrigPoly(1, {(1,): 1.0}))
        assert commutator_check(f, f, 0.1, self.H, G1).deviation == 0.0

    def test_degree_two_slope(self):
        sinp = parse_symbol("sin(p)", 1)
        reports, slope = commutator_sweep(X**2, sinp, [0.1, 0.05, 0.025], self.H, G1)
        assert 0.9 <= slope <= 1.1
        assert reports[0].deviation > 1e-3

    def test_orientation_agrees_across_modules(self):
        assert weylrn.orientation_oracle() == weylrn.COMMUTATOR_ORIENTATION
        assert nctorus.orientation_oracle() == (nctorus.BRACKET_ORIENTATION, nctorus.COMMUTATOR_ORIENTATION)
        assert weylrn.COMMUTATOR_ORIENTATION == nctorus.COMMUTATOR_ORIENTATION

    def test_two_dimensional_canonical_pairs(self):
        grid = PeriodicGrid(2, 16)
        H = default_test_function(grid)
        for k in range(2):
            f = FiberPolynomial.coordinate(k, 2, 2)
            g = parse_symbol("expi(p1 + 2*p2)", 2)
            assert commutator_check(f, g, 0.1, H, grid).deviation <= 1e-10


class TestParse:
    def test_polynomial(self):
        f = parse_symbol("X1^2*cos(p1) + 2*X2 - 0.5*sin(2*p1 - p2) + expi(p1)", 2)
        assert f.degree == 2
        u = np.array([0.3, 1.1])
        Z = np.array([0.7, -2.0])
        expect = 0.49 * np.cos(0.3) + 2 * -2.0 - 0.5 * np.sin(0.6 - 1.1) + np.exp(0.3j)
        assert abs(f(u, Z) - expect) < 1e-13

    def test_signed_integer_coefficients(self):
        f = parse_symbol("expi(-2*p) + cos(p*-1)", 1)
        assert abs(f(np.array([0.4]), np.array([0.0])) - (np.exp(-0.8j) + np.cos(0.4))) < 1e-14

    @pytest.mark.parametrize("bad", ["exp(p)", "X^-1", "sin(p*p)", "q + X", "X^", "X**1.5", "sin(0.5*p)"])
    def test_errors(self, bad):
        with pytest.raises(SymbolSyntaxError):
            parse_symbol(bad, 1)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_trig_commutator_matches_bracket_at_order_hbar(seed):
    # (1/i hbar)[Q(f), Q(g)] - Q({f,g}) shrinks at least linearly in hbar
    rng = np.random.default_rng(seed)
    a = nctorus.random_trigpoly(rng, 1, 2, 2)
    b = nctorus.random_trigpoly(rng, 1, 2, 2)
    f = X * trig_symbol(a)
    g = X * trig_symbol(b) + trig_symbol(b)
    H = default_test_function(G1)
    d1 = commutator_check(f, g, 0.02, H, G1).deviation
    d2 = commutator_check(f, g, 0.01, H, G1).deviation
    assert d2 <= 0.5 * d1 + 1e-10
