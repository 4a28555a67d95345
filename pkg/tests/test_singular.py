import math

import numpy as np
import pytest

from superheat import (ConvexGrowth, Exponential, Grid, Power, PowerSum, apply_semigroup,
                       exp_singular, power_singular)
from superheat.errors import ConfigError, NotConvex
from superheat.singular import default_kappa, integrability_trend, power_singular_check


class TestConvexGrowth:
    def test_builtins(self):
        assert ConvexGrowth.identity().linear_constant() == pytest.approx(1.0)
        assert ConvexGrowth.square(s0=1.0).linear_constant() == pytest.approx(1.0)

    def test_concave_rejected(self):
        with pytest.raises(NotConvex):
            ConvexGrowth(np.sqrt, lambda s: 0.5 / np.sqrt(s), 0.0)

    def test_decreasing_rejected(self):
        with pytest.raises(NotConvex):
            ConvexGrowth(lambda s: -s, lambda s: -np.ones_like(s), 0.0)

    def test_ratio_must_decay(self):
        # g = -log(2 - s) has g''/(g')^2 = 1 on the sampled range
        s = np.linspace(0.0, 1.9, 200)
        with pytest.raises(NotConvex):
            ConvexGrowth(lambda s: -np.log(2 - s), lambda s: 1 / (2 - s), 0.0, check_grid=s)

    def test_alpha_bound(self):
        with pytest.raises(ConfigError):
            ConvexGrowth.identity(alpha=2.0)

    def test_generic_inverse_matches_closed_form(self):
        sq = ConvexGrowth.square(s0=1.0)
        generic = ConvexGrowth(sq.g, sq.g_prime, 1.0)
        y = np.linspace(1.0, 400.0, 57)
        np.testing.assert_allclose(generic.inverse(y), np.sqrt(y), rtol=1e-12)


class TestExpSingular:
    def test_identity_profile(self):
        g = ConvexGrowth.identity(s0=1.0, alpha=6.0)
        grid = Grid.box(-2, 2, 1024)
        u0, info = exp_singular(g, None, grid, with_info=True)
        assert info["r0"] == pytest.approx(math.exp(-1 / 6))
        x = grid.axes()[0]
        r = np.maximum(np.abs(x), grid.spacing / 2)
        inside = r < info["r0"]
        np.testing.assert_allclose(u0.values[inside], np.maximum(6 * np.log(1 / r[inside]), 1.0),
                                   rtol=1e-14)
        assert np.all(u0.values[~inside] == 1.0)
        assert u0.values.max() == pytest.approx(info["origin_cap"])

    def test_square_profile(self):
        g = ConvexGrowth.square(s0=1.0, alpha=4.0)
        generic = ConvexGrowth(g.g, g.g_prime, 1.0, 4.0)
        grid = Grid.box(-1, 1, 512)
        a, b = exp_singular(g, None, grid), exp_singular(generic, None, grid)
        np.testing.assert_allclose(a.values, b.values, rtol=1e-12)
        x = np.maximum(np.abs(grid.axes()[0]), grid.spacing / 2)
        ref = np.where(x < math.exp(-1 / 4), np.sqrt(np.maximum(4 * np.log(1 / x), 1.0)), 1.0)
        np.testing.assert_allclose(a.values, ref, rtol=1e-14)

    @pytest.mark.parametrize("dim,n", [(1, 512), (2, 96)])
    def test_radial_and_floor(self, dim, n):
        g = ConvexGrowth.square(s0=1.0)
        grid = Grid.box(-1.5, 1.5, n, dim)
        u0 = exp_singular(g, None, grid)
        assert u0.values.min() >= g.s0
        rad = grid.radius().ravel()
        order = np.argsort(rad, kind="stable")
        vals = u0.values.ravel()[order]
        assert np.all(np.diff(vals) <= 1e-12)

    def test_alpha_bound(self):
        with pytest.raises(ConfigError):
            exp_singular(ConvexGrowth.identity(), 1.5, Grid.box(-1, 1, 64))

    def test_membership(self):
        # e^{(1+eps) r g(u0)} ~ |x|^{-(1+eps) alpha r}: integrable iff (1+eps) alpha r < N
        g, alpha, eps = ConvexGrowth.identity(), 6.0, 0.2
        grids = [Grid.box(-1, 1, 512 * 2 ** k) for k in range(4)]
        build = lambda grid: exp_singular(g, alpha, grid)
        ok, _ = integrability_trend(build, grids, lambda v: np.exp((1 + eps) * 0.1 * v), 0.5)
        bad, _ = integrability_trend(build, grids, lambda v: np.exp((1 + eps) * 0.2 * v), 0.5)
        assert ok.converging and bad.diverging

    def test_heat_flow_growth(self):
        # max e^{tΔ}u0 ~ (alpha/2) log(1/t) for g = identity
        alpha = 6.0
        u0 = exp_singular(ConvexGrowth.identity(alpha=alpha), None, Grid.box(-2, 2, 2 ** 16))
        ts = np.logspace(-2, -6, 9)
        peaks = [apply_semigroup(u0, t).values.max() for t in ts]
        slope = np.polyfit(np.log(1 / ts), peaks, 1)[0]
        assert slope >= 0.9 * alpha / 2


class TestPowerSingular:
    def test_power2_identity(self):
        grid = Grid.box(-1, 1, 1024)
        r = 0.3
        u0, info = power_singular(Power(2), r, 1, grid, with_info=True)
        a, kappa = 1 * (2 - 1) / r, info["kappa"]
        x = np.maximum(np.abs(grid.axes()[0]), grid.spacing / 2)
        inside = x < info["r_cut"]
        v0 = x[inside] ** (-a) * np.log(1 / x[inside]) ** (-kappa)
        np.testing.assert_allclose(u0.values[inside], np.maximum(v0, info["s2"]), rtol=1e-10)
        assert np.all(u0.values[~inside] == info["s2"])
        assert kappa == default_kappa(2.0, r)

    def test_floor(self):
        u0 = power_singular(PowerSum(4, 2), 0.5, 1, Grid.box(-1, 1, 256), s2=3.0)
        assert u0.values.min() >= 3.0

    def test_needs_A_above_one(self):
        with pytest.raises(ConfigError):
            power_singular(Exponential(), 0.5, 1, Grid.box(-1, 1, 64))

    @pytest.mark.parametrize("nl,r", [(Power(2), 1.0), (Power(3), 0.5)], ids=["p2", "p3"])
    def test_trends_3d(self, nl, r):
        # N = 3, r = A - 1 < N/2: the stated norm converges, N/2 + 0.1 diverges
        grids = [Grid.box(-1, 1, n, 3) for n in (24, 48, 96)]
        out = power_singular_check(nl, r, grids, r_strong=1.6)
        assert out["trend"].converging
        assert out["strong_trend"].diverging

    def test_trends_1d(self):
        # F(u0)^{-r'} ~ |x|^{-r'/r} log(1/|x|)^{-3r'/r}; the log factor hides the
        # growth at r' = N/2 + 0.1 on any desk grid, so the strong exponent is r' = 1
        grids = [Grid.box(-1, 1, 2 ** 14 * 2 ** k) for k in range(4)]
        out = power_singular_check(PowerSum(4, 2), 0.4, grids, r_strong=1.0)
        assert out["trend"].converging and out["strong_trend"].diverging
