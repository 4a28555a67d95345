import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from superheat import (ConstantExtension, ExpSquare, Exponential, Grid, Power, PowerSum,
                       SpaceTimeField, cole_hopf_u, cole_hopf_v, convexity_probe,
                       general_transform_residual, invariant_integral, log_transform,
                       log_transform_inv, quasi_scale, quasi_scaled_residual)
from superheat.errors import ConfigError, NonPositive, NotApplicable, RangeError
from superheat.transforms import (Convexity, TransformMode, _interior_mask, _pde_residual,
                                  residual_order, with_order)


def bump(n=128, base=1.5, amp=1.0, lo=-8.0, hi=8.0):
    return Grid.box(lo, hi, n).sample(lambda x: base + amp * np.exp(-x * x))


def constant_movie(values, times, n=8):
    g = Grid.box(0, 1, n)
    return SpaceTimeField([g.field(np.full(n, v)) for v in values], times)


class TestQuasiScale:
    def test_identity(self):
        u = bump()
        assert quasi_scale(u, PowerSum(3, 2), 1.0) is u

    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    @pytest.mark.parametrize("lam", [0.5, 2.0])
    def test_power_closed_form(self, p, lam):
        u = bump()
        x = u.grid.axes()[0]
        out = quasi_scale(u, Power(p), lam)
        ref = lam ** (2 / (p - 1)) * np.interp(lam * x, x, u.values, period=16.0)
        np.testing.assert_allclose(out.values, ref, rtol=1e-10)

    def test_exponential_shift(self):
        u = bump()
        lam = 2.0
        out = quasi_scale(u, Exponential(), lam)
        ref = quasi_scale(u, Power(2), lam).values / lam ** 2 + 2 * math.log(lam)
        np.testing.assert_allclose(out.values, ref, rtol=0, atol=1e-12)

    def test_group_law_power(self):
        u = bump(n=256)
        nl = Power(3)
        a = quasi_scale(quasi_scale(u, nl, 2.0), nl, 2.0).values
        b = quasi_scale(u, nl, 4.0).values
        np.testing.assert_allclose(a, b, rtol=1e-12)

    def test_group_law_with_interpolation(self):
        # scaling by 3/2 and back interpolates twice; the defect is O(h^2)
        nl = Power(2)
        errs = []
        for n in (128, 256, 512):
            u = bump(n=n)
            a = quasi_scale(quasi_scale(u, nl, 1.5), nl, 1 / 1.5).values
            errs.append(np.max(np.abs(a - quasi_scale(u, nl, 1.0).values)))
        assert errs[0] < 0.05 and errs[-1] < errs[0] / 8

    def test_range_error(self):
        # F(0) = sqrt(pi)/2 is the top of the range, so scaling by lam < 1 from zero leaves it
        u = Grid.box(0, 1, 16).field(np.zeros(16))
        with pytest.raises(RangeError):
            quasi_scale(u, ExpSquare(), 0.5)

    def test_bad_lambda(self):
        with pytest.raises(ConfigError):
            quasi_scale(bump(), Power(2), 0.0)

    def test_constant_extension_value(self):
        g = Grid.box(0, 1, 16, 1, ConstantExtension(2.0))
        out = quasi_scale(g.field(np.full(16, 2.0)), Power(2), 3.0)
        assert out.boundary.value == pytest.approx(18.0)
        np.testing.assert_allclose(out.values, 18.0)


class TestInvariantIntegral:
    def test_constant(self):
        g = Grid.box(0, 3, 300)
        s = 2.0
        val = invariant_integral(g.field(np.full(300, s)), Power(2), 1)
        assert abs(val - s ** 0.5 * 3) <= s ** 0.5 * g.spacing

    def test_lambda_one_exact(self):
        u = bump()
        nl = PowerSum(3, 2)
        assert invariant_integral(quasi_scale(u, nl, 1.0), nl) == invariant_integral(u, nl)

    @pytest.mark.parametrize("nl", [Power(2), PowerSum(3, 2), Exponential()], ids=lambda n: n.name)
    def test_invariance_on_a_period(self, nl):
        # u0(2x) on [-8, 8) covers two periods of u0, so compare on half the box
        u = bump(n=512)
        lhs = invariant_integral(quasi_scale(u, nl, 2.0), nl, region=((-4.0,), (4.0,)))
        rhs = invariant_integral(u, nl)
        assert abs(lhs - rhs) / rhs <= 1e-3


class TestColeHopf:
    def test_power2_identity(self):
        u = bump()
        np.testing.assert_allclose(cole_hopf_v(u, Power(2)).values, u.values, rtol=1e-13)
        np.testing.assert_allclose(cole_hopf_u(u, Power(2)).values, u.values, rtol=1e-13)

    @pytest.mark.parametrize("nl", [Power(1.5), Power(3), PowerSum(3, 2), PowerSum(4, 2)],
                             ids=lambda n: n.name)
    def test_round_trip(self, nl):
        u = Grid.box(0, 1, 200).field(np.logspace(-2, 2, 200))
        back = cole_hopf_u(cole_hopf_v(u, nl), nl)
        np.testing.assert_allclose(back.values, u.values, rtol=1e-9)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(1e-2, 50), st.floats(1e-2, 50))
    def test_powersum_monotone(self, a, b):
        lo, hi = sorted((a, b))
        g = Grid.box(0, 1, 2)
        v = cole_hopf_v(g.field([lo, hi]), PowerSum(3, 2)).values
        assert v[0] <= v[1]

    def test_not_applicable_for_A_one(self):
        with pytest.raises(NotApplicable):
            cole_hopf_v(bump(), Exponential())
        with pytest.raises(NotApplicable):
            cole_hopf_u(bump(), ExpSquare())

    def test_inverse_needs_positive(self):
        with pytest.raises(NonPositive):
            cole_hopf_u(Grid.box(0, 1, 4).field([1, 0, 1, 1]), Power(2))


class TestLogTransform:
    def test_exponential_identity(self):
        u = bump()
        np.testing.assert_allclose(log_transform(u, Exponential()).values, u.values, atol=1e-14)

    @pytest.mark.parametrize("nl", [Exponential(), ExpSquare(), PowerSum(3, 2)], ids=lambda n: n.name)
    def test_round_trip(self, nl):
        u = Grid.box(0, 1, 200).field(np.linspace(0.01, 20, 200))
        back = log_transform_inv(log_transform(u, nl), nl)
        np.testing.assert_allclose(back.values, u.values, rtol=1e-9)

    def test_expsq_increasing(self):
        s = np.linspace(0, 25, 500)
        w = log_transform(Grid.box(0, 1, 500).field(s), ExpSquare()).values
        assert np.all(np.diff(w) > 0)


class TestConvexity:
    def test_powersum_below_convex(self):
        s = np.logspace(0.1, 3, 200)
        assert convexity_probe(PowerSum(4, 2), TransformMode.POWER, s) == Convexity.CONVEX
        assert convexity_probe(PowerSum(2.5, 1.2), TransformMode.POWER, s) == Convexity.CONVEX

    def test_powersum_above_concave(self):
        # f'F exceeds A everywhere for p - q < 1
        s = np.logspace(0, 3, 200)
        assert convexity_probe(PowerSum(3, 2.5), TransformMode.POWER, s) == Convexity.CONCAVE

    def test_expsq_log_convex(self):
        s = np.linspace(0.5, 20, 200)
        assert convexity_probe(ExpSquare(), TransformMode.LOG, s) == Convexity.CONVEX

    def test_power_degenerate(self):
        res = convexity_probe(Power(3), TransformMode.POWER, np.linspace(1, 10, 50))
        assert res == Convexity.LINEAR
        assert Convexity.CONVEX in res and Convexity.CONCAVE in res

    def test_exponential_log_linear(self):
        assert convexity_probe(Exponential(), TransformMode.LOG, np.linspace(0, 9, 20)) == \
            Convexity.LINEAR

    def test_grid_checked(self):
        with pytest.raises(ConfigError):
            convexity_probe(Power(2), TransformMode.POWER, [1.0, 3.0, 2.0])


class TestResiduals:
    def test_lambda_one_is_plain_residual(self):
        g = Grid.box(-4, 4, 64)
        times = np.linspace(0, 0.01, 6)
        frames = [g.sample(lambda x, t=t: 1 + t + 0.3 * np.exp(-x * x)) for t in times]
        u = SpaceTimeField(frames, times)
        nl = PowerSum(3, 2)
        rep = quasi_scaled_residual(u, nl, 1.0)
        plain = _pde_residual(u.stack(), times, g.spacing, g.boundary, nl)
        mask = _interior_mask(g.extents, g.boundary, len(times))
        assert rep.max_residual == pytest.approx(np.abs(plain[mask]).max(), rel=1e-12)
        assert rep.extras["bracket_max"] < 1e-12

    @pytest.mark.parametrize("nl", [Power(2), PowerSum(3, 2), ExpSquare()], ids=lambda n: n.name)
    def test_ode_solution(self, nl):
        # F(u_lam)' = -1 whenever F(u)' = -1, so u_lam solves the ODE as well
        lam, u0, T = 1.5, 0.5, 0.1
        errs = []
        for k in (1, 2, 4):
            times = np.linspace(0, T, 20 * k + 1)
            sol = solve_ivp(lambda t, y: nl.f(y), (0, T * lam ** 2), [u0], rtol=1e-12,
                            atol=1e-14, dense_output=True)
            vals = sol.sol(lam ** 2 * times)[0]
            u = constant_movie(vals, lam ** 2 * times)
            errs.append(quasi_scaled_residual(u, nl, lam).max_residual)
        assert errs[0] < 0.05 and errs[-1] < errs[0] / 10

    def test_nonpositive(self):
        u = constant_movie([0.0, 1.0, 2.0], [0, 1, 2])
        with pytest.raises(NonPositive):
            quasi_scaled_residual(u, Power(2), 2.0)

    def test_general_identity_g_equals_f(self):
        nl = PowerSum(3, 2)
        g = Grid.box(-4, 4, 64)
        times = np.linspace(0, 0.01, 6)
        frames = [g.sample(lambda x, t=t: 1 + t + 0.3 * np.exp(-x * x)) for t in times]
        v = SpaceTimeField(frames, times)
        rep = general_transform_residual(v, nl, nl)
        plain = _pde_residual(v.stack(), times, g.spacing, g.boundary, nl)
        mask = _interior_mask(g.extents, g.boundary, len(times))
        assert rep.max_residual == pytest.approx(np.abs(plain[mask]).max(), rel=1e-6)
        assert abs(rep.extras["rhs_min"]) < 1e-8

    def test_general_constant_data(self):
        # with |grad v| = 0 the right-hand side vanishes and the left is an ODE residual
        f, gnl = PowerSum(4, 2), Power(4)
        times = np.linspace(0, 0.1, 41)
        vals = (1 / (1 - 3 * times)) ** (1 / 3)   # v' = v^4 with v(0) = 1
        rep = general_transform_residual(constant_movie(vals, times), gnl, f)
        assert rep.extras["rhs_min"] == 0.0
        assert rep.max_residual < 5.0

    def test_order_needs_three_levels(self):
        with pytest.raises(ConfigError):
            residual_order([0.1, 0.05], [1.0, 0.25])
        assert residual_order([0.1, 0.05, 0.025], [1.0, 0.25, 0.0625]) == pytest.approx(2.0)

    def test_with_order_attaches_to_finest(self):
        reps = [quasi_scaled_residual(constant_movie([1, 2, 3], [0, 1, 2]), Power(2), 1.0)
                for _ in range(3)]
        reps[0].max_residual, reps[1].max_residual, reps[2].max_residual = 4.0, 2.0, 1.0
        out = with_order(reps, [0.4, 0.2, 0.1])
        assert out is reps[-1] and out.order_estimate == pytest.approx(1.0)
        assert set(out.summary()) >= {"max_residual", "order_estimate"}


class TestSpaceTimeField:
    def test_times_increasing(self):
        g = Grid.box(0, 1, 4)
        with pytest.raises(ConfigError):
            SpaceTimeField([g.field(np.ones(4))] * 2, [0.0, 0.0])

    def test_shared_geometry(self):
        a, b = Grid.box(0, 1, 4), Grid.box(0, 2, 4)
        with pytest.raises(ConfigError):
            SpaceTimeField([a.field(np.ones(4)), b.field(np.ones(4))], [0, 1])
