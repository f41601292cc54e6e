import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qlab.errors import DimensionMismatchError, DomainError, OutOfChartError
from qlab.nctorus import SkewForm
from qlab.numkit import central_diff
from qlab.poismap import (
    FlatTorus,
    RoundSphere,
    TangentVec,
    arcsin_profile,
    base_bracket,
    compare_closed_form,
    d1_exp,
    d2_exp,
    exp_differential_matrix,
    exp_sphere,
    half_profile,
    jacobi_dexp,
    lemma_variation,
    load_profile,
    parallel_transport_sphere,
    pi_sphere,
    pi_torus,
    poisson_map_residual,
    profile_from_alpha,
    sinc,
    sinc_prime,
    solve_profile_ode,
    tabulated_profile,
    tp_bracket,
    vertical_derivative_eta,
)

N = np.array([0.0, 0.0, 1.0])
SPHERE = RoundSphere()
TORUS = FlatTorus(SkewForm.standard())
seeds = st.integers(0, 2**32 - 1)


def fd(curve, step=1e-3):
    return central_diff(curve, 0.0, 1.0, step)


def sample(seed, umax=1.5):
    rng = np.random.default_rng(seed)
    v = SPHERE.random_tangent(rng, umax)
    basis = SPHERE.tangent_basis(v.base)
    return v, rng.normal(size=2) @ basis, rng.normal(size=2) @ basis


class TestTangentVec:
    def test_rejects_off_sphere(self):
        with pytest.raises(DomainError):
            TangentVec.on_sphere([0, 0, 1.1], [1, 0, 0])

    def test_rejects_non_tangent(self):
        with pytest.raises(DomainError):
            TangentVec.on_sphere(N, [0, 0.1, 0.1])

    def test_shapes(self):
        with pytest.raises(DimensionMismatchError):
            TangentVec([0, 0, 1], [1, 0])

    def test_immutable(self):
        v = TangentVec.on_sphere(N, [1.0, 0, 0])
        with pytest.raises(ValueError):
            v.u[0] = 3


class TestExp:
    def test_zero(self):
        assert np.array_equal(exp_sphere(TangentVec.on_sphere(N, [0, 0, 0])), N)

    def test_antipode(self):
        assert np.allclose(exp_sphere(TangentVec.on_sphere(N, [math.pi, 0, 0])), [0, 0, -1], atol=1e-15)

    def test_quarter(self):
        assert np.allclose(exp_sphere(TangentVec.on_sphere(N, [math.pi / 2, 0, 0])), [1, 0, 0], atol=1e-15)

    @settings(max_examples=100, deadline=None)
    @given(seeds)
    def test_unit_norm_and_geodesic(self, seed):
        v, _, _ = sample(seed, 3.0)
        assert abs(np.linalg.norm(exp_sphere(v)) - 1) <= 1e-12
        if v.norm == 0:
            return
        e = v.u / v.norm
        s1, s2 = 0.4, 0.9
        a = exp_sphere(TangentVec(v.base, s1 * e))
        b = exp_sphere(TangentVec(v.base, (s1 + s2) * e))
        dist = math.acos(max(-1.0, min(1.0, float(a @ b))))
        assert abs(dist - s2) <= 1e-10

    def test_series_branch_continuous(self):
        e = np.array([1.0, 0, 0])
        for f in (sinc, sinc_prime):
            assert abs(f(1e-4 * (1 - 1e-12)) - f(1e-4 * (1 + 1e-12))) <= 1e-14
        t = 1e-4
        lo = d1_exp(TangentVec(N, t * (1 - 1e-12) * e), e)
        hi = d1_exp(TangentVec(N, t * (1 + 1e-12) * e), e)
        assert np.max(np.abs(lo - hi)) <= 1e-14

    def test_sinc_identity(self):
        for t in np.linspace(1e-3, 3, 200):
            assert abs(t * sinc_prime(t) - (math.cos(t) - sinc(t))) <= 1e-12


class TestDifferentials:
    def test_zero_u(self):
        v = TangentVec.on_sphere(N, [0, 0, 0])
        h = np.array([0.3, -0.2, 0])
        assert np.allclose(d1_exp(v, h), h) and np.allclose(d2_exp(v, h), h)

    def test_hand_value(self):
        v = TangentVec.on_sphere(N, [math.pi / 2, 0, 0])
        assert np.max(np.abs(d2_exp(v, [0, 1, 0]))) <= 1e-16

    def test_out_of_chart(self):
        v = TangentVec.on_sphere(N, [math.pi, 0, 0])
        for fn in (d1_exp, d2_exp):
            with pytest.raises(OutOfChartError):
                fn(v, [0, 1, 0])
        with pytest.raises(OutOfChartError):
            jacobi_dexp(v, ([0, 1, 0], [0, 0, 0]))

    def test_non_tangent_input(self):
        with pytest.raises(DomainError):
            d1_exp(TangentVec.on_sphere(N, [0.1, 0, 0]), [0, 0, 1])

    @settings(max_examples=100, deadline=None)
    @given(seeds)
    def test_against_finite_differences(self, seed):
        v, h, e = sample(seed)
        p = v.base
        assert np.max(np.abs(d1_exp(v, h) - fd(lambda s: exp_sphere(TangentVec(p, v.u + s * h))))) <= 1e-7
        assert np.max(np.abs(d2_exp(v, e) - fd(lambda s: lemma_variation(v, (e, 0 * e), s)))) <= 1e-7
        assert np.max(np.abs(jacobi_dexp(v, (e, h)) - fd(lambda s: lemma_variation(v, (e, h), s)))) <= 1e-7

    @settings(max_examples=50, deadline=None)
    @given(seeds)
    def test_jacobi_structure(self, seed):
        v, h, e = sample(seed)
        z = np.zeros(3)
        assert np.allclose(jacobi_dexp(v, (z, h)), d1_exp(v, h), atol=1e-14)
        assert np.allclose(jacobi_dexp(v, (e, z)), d2_exp(v, e), atol=1e-14)
        assert np.allclose(jacobi_dexp(v, (e, h)), jacobi_dexp(v, (e, z)) + jacobi_dexp(v, (z, h)), atol=1e-14)
        assert np.allclose(jacobi_dexp(v, (2.5 * e, -h)), 2.5 * d2_exp(v, e) - d1_exp(v, h), atol=1e-14)
        M = exp_differential_matrix(v)
        assert np.linalg.matrix_rank(M, tol=1e-9) == 2
        assert np.max(np.abs(M @ exp_sphere(v))) <= 1e-12

    def test_jacobi_at_zero_section(self):
        h = np.array([0.0, 0.7, 0.0])
        assert np.allclose(jacobi_dexp(TangentVec.on_sphere(N, [0, 0, 0]), (h, np.zeros(3))), h)


class TestTransport:
    def test_zero_time(self):
        w = np.array([0.2, -0.4, 0])
        assert np.allclose(parallel_transport_sphere(N, [1, 0, 0], 0.0, w), w)

    def test_direction_rotates(self):
        out = parallel_transport_sphere(N, [1, 0, 0], math.pi / 2, [1, 0, 0])
        assert np.allclose(out, -N, atol=1e-15)

    def test_normal_fixed(self):
        eps = np.array([1.0, 0, 0])
        w = np.cross(N, eps)
        for t in (0.3, 1.0, 2.5):
            assert np.allclose(parallel_transport_sphere(N, eps, t, w), w)

    @pytest.mark.parametrize(
        "eps,w", [([2, 0, 0], [0, 1, 0]), ([0, 0.6, 0.8], [1, 0, 0]), ([1, 0, 0], [0, 0, 1])]
    )
    def test_preconditions(self, eps, w):
        with pytest.raises(DomainError):
            parallel_transport_sphere(N, eps, 0.5, w)

    @settings(max_examples=100, deadline=None)
    @given(seeds)
    def test_isometry(self, seed):
        v, h, _ = sample(seed)
        eps = h / np.linalg.norm(h)
        w = v.u
        t = 1.3
        out = parallel_transport_sphere(v.base, eps, t, w)
        sigma = math.cos(t) * v.base + math.sin(t) * eps
        assert abs(np.linalg.norm(out) - np.linalg.norm(w)) <= 1e-12
        assert abs(out @ sigma) <= 1e-12


class TestProfiles:
    def test_arcsin_limits(self):
        mu = arcsin_profile()
        assert mu(0.0) == 0.5
        assert abs(mu(1e-4 * (1 - 1e-12)) - mu(1e-4 * (1 + 1e-12))) <= 1e-14
        assert abs(mu(2.0) * 2 - math.pi / 2) <= 1e-15

    def test_pi_sphere_examples(self):
        assert np.array_equal(pi_sphere(TangentVec.on_sphere(N, [0, 0, 0])), N)
        out = pi_sphere(TangentVec.on_sphere(N, [1.0, 0, 0]))
        assert np.allclose(out, [0.5, 0, math.sqrt(3) / 2], atol=1e-15)
        near = pi_sphere(TangentVec.on_sphere(N, [2 - 1e-12, 0, 0]))
        assert abs(math.acos(near @ N) - math.pi / 2) <= 1e-5

    def test_pi_sphere_domain(self):
        with pytest.raises(DomainError):
            pi_sphere(TangentVec.on_sphere(N, [2.0, 0, 0]))

    def test_pi_torus_examples(self):
        assert np.allclose(pi_torus(TangentVec([1.0, 2.0], [0, 0])), [1.0, 2.0])
        assert np.allclose(pi_torus(TangentVec([0, 0], [math.pi, 0])), [math.pi / 2, 0])
        assert np.allclose(pi_torus(TangentVec([3 * math.pi / 2, 0], [2 * math.pi, 0])), [math.pi / 2, 0])

    def test_tabulated_profile(self, tmp_path):
        ts = np.linspace(0.01, 1.99, 400)
        path = tmp_path / "mu.csv"
        path.write_text("t,mu\n" + "".join(f"{float(t)!r},{arcsin_profile()(float(t))!r}\n" for t in ts))
        prof = load_profile(path)
        assert abs(prof(1.0) - arcsin_profile()(1.0)) <= 1e-8
        with pytest.raises(DomainError):
            prof(0.001)


class TestODE:
    def test_a_zero(self):
        traj = solve_profile_ode(0.0, 0.1, 0.05, 1.9, 1e-3)
        assert compare_closed_form(traj, 0.0) <= 1e-8
        assert abs(traj.times[-1] - 1.9) <= 1e-12
        t, mu = profile_from_alpha(traj)
        assert np.max(np.abs(mu - np.arcsin(t / 2) / t)) <= 1e-8

    def test_other_branch(self):
        traj = solve_profile_ode(0.3, 0.5, 0.3 / 0.5 + 0.25, 1.9, 1e-3)
        assert compare_closed_form(traj, 0.3) <= 1e-8

    @pytest.mark.parametrize("t0,t1", [(0.0, 1.0), (-0.1, 1.0), (0.5, 2.0), (1.0, 0.5)])
    def test_rejects(self, t0, t1):
        with pytest.raises(DomainError):
            solve_profile_ode(0.0, t0, 0.0, t1, 1e-3)


class TestBracket:
    def test_pullbacks_commute(self):
        rng = np.random.default_rng(0)
        for geom, umax in ((TORUS, 2.0), (SPHERE, 1.5)):
            v = geom.random_tangent(rng, umax)
            f = lambda x, u: float(np.sin(np.asarray(x)[0]))
            g = lambda x, u: float(np.cos(np.asarray(x)[1]))
            assert abs(tp_bracket(f, g, v, geom)) <= 1e-9

    def test_self_bracket(self):
        v = SPHERE.random_tangent(np.random.default_rng(1), 1.0)
        f = lambda x, u: float(np.asarray(u) @ np.array([1.0, 2.0, 0.5]) + np.asarray(x)[2] ** 2)
        assert abs(tp_bracket(f, f, v, SPHERE)) <= 1e-12

    def test_constant_form_against_pullback(self):
        # {<a, u>, p*g_r}(v) = <eta a, d g_r> at the base point
        rng = np.random.default_rng(2)
        a = np.array([0.7, -1.3])
        r = np.array([2, 1])
        for _ in range(5):
            v = TORUS.random_tangent(rng, 2.0)
            f = lambda x, u: float(a @ np.asarray(u))
            g = lambda x, u: complex(np.exp(1j * (r @ np.asarray(x))))
            expect = (TORUS.eta.eta.T @ a) @ (1j * r) * np.exp(1j * (r @ v.base))
            assert abs(tp_bracket(f, g, v, TORUS) - expect) <= 1e-7

    def test_linear_forms_on_torus(self):
        # {<a, u>, <b, u>} = <D eta, a ^ b> = 0 for constant eta
        v = TORUS.random_tangent(np.random.default_rng(3), 2.0)
        f = lambda x, u: float(np.array([1.0, 2.0]) @ np.asarray(u))
        g = lambda x, u: float(np.array([-0.5, 0.3]) @ np.asarray(u))
        assert abs(tp_bracket(f, g, v, TORUS)) <= 1e-9

    def test_closed_forms_on_sphere(self):
        # exact 1-forms dF: the fibre function <grad F, u> brackets with p*g as <eta dF, dg>
        rng = np.random.default_rng(4)
        F = lambda y: float(y[0] * y[1] + y[2])
        gfun = lambda y: float(y[2] ** 2 - y[0])
        for _ in range(5):
            v = SPHERE.random_tangent(rng, 1.0)

            def alpha(x, u):
                x = np.asarray(x)
                grad = np.array([x[1], x[0], 1.0])
                return float(grad @ np.asarray(u))

            got = tp_bracket(alpha, lambda x, u: gfun(x), v, SPHERE)
            assert abs(got - base_bracket(F, gfun, v.base, SPHERE)) <= 1e-7

    def test_base_bracket_orientation(self):
        x = lambda y: float(y[0])
        y = lambda p: float(p[1])
        p = np.array([0.3, -0.4, math.sqrt(1 - 0.25)])
        assert abs(base_bracket(x, y, p, SPHERE) - p[2]) <= 1e-10

    def test_eta_from_tangent_agrees(self):
        rng = np.random.default_rng(5)
        for _ in range(10):
            v = SPHERE.random_tangent(rng, 1.0)
            assert np.allclose(SPHERE.eta_from_tangent(v.base, v.u), SPHERE.eta_at(v.base), atol=1e-14)


class TestVerticalDerivative:
    def test_torus_exact_zero(self):
        v = TORUS.random_tangent(np.random.default_rng(0), 3.0)
        assert np.array_equal(vertical_derivative_eta(v, TORUS), np.zeros((2, 2)))

    def test_zero_vector(self):
        assert np.array_equal(vertical_derivative_eta(TangentVec.on_sphere(N, [0, 0, 0]), SPHERE), np.zeros((3, 3)))

    def test_sphere_parallel(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            assert np.max(np.abs(vertical_derivative_eta(SPHERE.random_tangent(rng, 1.5), SPHERE))) <= 1e-7


class TestResidual:
    def test_torus(self):
        rng = np.random.default_rng(0)
        eta = SkewForm([[0, 0.4, -1], [-0.4, 0, 2], [1, -2, 0]])
        geom = FlatTorus(eta)
        for _ in range(10):
            assert poisson_map_residual(geom.poisson_map(), geom.random_tangent(rng, 3.0), geom) <= 1e-8

    def test_sphere(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            assert poisson_map_residual(SPHERE.poisson_map(), SPHERE.random_tangent(rng, 1.5), SPHERE) <= 1e-6

    def test_half_profile_fails(self):
        rng = np.random.default_rng(2)
        v = SPHERE.random_tangent(rng, 1.0)
        v = TangentVec.on_sphere(v.base, v.u / v.norm)
        assert poisson_map_residual(SPHERE.poisson_map(half_profile()), v, SPHERE) >= 1e-2

    def test_half_profile_defect_formula(self):
        # for mu = 1/2 the {x, y} defect at p = N, u = e1 has size 1 - (cos(1/2)/2 + sin(1/2))
        v = TangentVec.on_sphere(N, [1.0, 0, 0])
        res = poisson_map_residual(SPHERE.poisson_map(half_profile()), v, SPHERE)
        assert res >= abs(1 - (0.5 * math.cos(0.5) + math.sin(0.5))) * 0.5

    def test_naive_exponential_fails_on_torus_too(self):
        # pi(v) = x + u is a submersion but not Poisson
        v = TORUS.random_tangent(np.random.default_rng(3), 2.0)
        full = lambda x, u: np.mod(np.asarray(x) + np.asarray(u), 2 * math.pi)
        assert poisson_map_residual(full, v, TORUS) >= 0.5

    def test_tabulated_arcsin_profile(self):
        ts = np.linspace(0.001, 1.999, 2000)
        prof = tabulated_profile(ts, [arcsin_profile()(t) for t in ts])
        rng = np.random.default_rng(4)
        v = SPHERE.random_tangent(rng, 1.5)
        assert poisson_map_residual(SPHERE.poisson_map(prof), v, SPHERE) <= 1e-6
