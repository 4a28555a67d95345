import json
import math

import numpy as np
import pytest

from superheat import (ExpSquare, Exponential, Grid, Power, PowerSum, Side, classify,
                       existence_time_lower_bound, threshold_report)
from superheat.classify import (CRITICAL, FORMS, INDETERMINATE, RAPID, SUBCRITICAL, WITNESS,
                                Verdict, audit_verdict, bound_lhs)
from superheat.errors import ConfigError, NoRoot


def bump(dim, n, amp=1.0, L=4.0):
    return Grid.box(-L, L, n, dim).sample(lambda *xs: amp * np.exp(-sum(x * x for x in xs)))


class Wobbly(Power):
    """Power source whose side is forced to Mixed."""

    @property
    def side(self):
        return Side.MIXED


def scan_root(fn, gamma, lo=-40.0, hi=40.0):
    """Root of fn(e^z) = gamma by repeated dense scans in z."""
    for _ in range(6):
        z = np.linspace(lo, hi, 4001)
        v = np.array([fn(math.exp(t)) for t in z]) - gamma
        i = int(np.argmax(v >= 0))
        lo, hi = z[i - 1], z[i]
    return math.exp(0.5 * (lo + hi))


class TestExistenceTime:
    def test_eq113_example(self):
        b = existence_time_lower_bound("Eq113", None, 1, 2.0, 1.0, 1.0, 1.0, A=2.0)
        f = lambda T: T ** 0.25 + T ** 1.75 + T ** 1.5
        assert f(b.T_lower) == pytest.approx(1.0, rel=1e-12)
        assert b.T_lower == pytest.approx(scan_root(f, 1.0), rel=1e-10)
        assert b.T_lower == pytest.approx(0.28783610579181856, rel=1e-12)
        assert not b.no_root

    @pytest.mark.parametrize("N,A,rho,gamma", [(1, 2.0, 1.0, 1.0), (3, 1.5, 0.5, 2.0),
                                               (2, 4.0, 2.0, 0.3)])
    def test_zero_norm_closed_form(self, N, A, rho, gamma):
        b = existence_time_lower_bound("Eq113", None, N, N / 2 + 1, rho, 0.0, gamma, A=A)
        exact = (gamma * rho ** (N * (1 - 1 / A))) ** (2 * A / (N * (A - 1)))
        assert b.T_lower == pytest.approx(exact, rel=1e-12)

    def test_nonincreasing_in_norm(self):
        Ts = [existence_time_lower_bound("Eq113", None, 2, 1.5, 1.0, m, A=2.0).T_lower
              for m in np.logspace(-3, 3, 25)]
        assert all(a >= b for a, b in zip(Ts, Ts[1:]))

    @pytest.mark.parametrize("form,kw", [("Eq113", dict(A=1.5)), ("Eq115", dict(epsilon=0.2)),
                                         ("Eq524", dict(epsilon=0.1)), ("Eq214", dict(epsilon=0.3)),
                                         ("Eq211", dict(p=3.0)), ("Eq53", dict(p=3.0))])
    def test_equality_at_root(self, form, kw):
        N, r, rho, norm, gamma = 1, 2.0, 0.7, 0.4, 1.3
        eps = kw.pop("epsilon", None)
        b = existence_time_lower_bound(form, None, N, r, rho, norm, gamma, eps, **kw)
        lhs = bound_lhs(form, N, r, rho, norm, gamma=gamma, epsilon=eps, **kw)
        assert lhs(b.T_lower) == pytest.approx(gamma, rel=1e-9)
        if eps is not None:
            assert b.gamma_eps == pytest.approx(gamma * eps ** (-2 * r))
            assert b.params["c_eps"] == 2 * r

    def test_no_root_flag_and_strict(self):
        # r = N/2 puts a T^0 term times the norm on the left
        b = existence_time_lower_bound("Eq113", None, 2, 1.0, 1.0, 2.0, 1.0, A=2.0)
        assert b.no_root and b.T_lower == 1e-300
        with pytest.raises(NoRoot):
            existence_time_lower_bound("Eq113", None, 2, 1.0, 1.0, 2.0, 1.0, A=2.0, strict=True)

    def test_decreasing_lhs_rejected(self):
        with pytest.raises(ConfigError):
            existence_time_lower_bound("Eq113", None, 4, 1.0, 1.0, 1.0, A=2.0)

    @pytest.mark.parametrize("form,kw", [("Eq113", dict(A=1.0)), ("Eq115", dict()),
                                         ("Eq53", dict()), ("EqXYZ", dict(A=2.0))])
    def test_bad_parameters(self, form, kw):
        with pytest.raises(ConfigError):
            existence_time_lower_bound(form, None, 1, 2.0, 1.0, 1.0, **kw)

    def test_defaults_from_nonlinearity(self):
        b = existence_time_lower_bound("Eq53", PowerSum(3, 2), 1, 1.0, 1.0, 1.0)
        assert b.params["p"] == 3 and b.params["A"] == pytest.approx(1.5)
        assert set(FORMS) == {"Eq113", "Eq115", "Eq211", "Eq53", "Eq524", "Eq214"}


class TestClassify:
    def test_power_subcritical(self):
        v = classify(Power(2), bump(3, 32), None, 2.0, 1.5)
        assert v.regime == SUBCRITICAL and v.theorem == "Thm 1.1(i)"
        assert v.time_bound.form == "Eq113" and v.time_bound.T_lower > 0
        assert v.convergence_mode == "L^2_ul,rho" and v.audit == []

    def test_expsq_rapid(self):
        v = classify(ExpSquare(), bump(2, 32), None, 0.5, 0.5)
        assert v.regime == RAPID and v.theorem == "Thm 1.4"

    def test_expsq_theorem_bullets(self):
        u0 = bump(2, 64)
        regimes = [classify(ExpSquare(), u0, 2, r, 0.5).regime for r in (0.9, 1.0, 1.1)]
        assert regimes == [RAPID, CRITICAL, SUBCRITICAL]

    def test_expsq_subcritical_uses_eps_form(self):
        v = classify(ExpSquare(), bump(2, 32), 2, 1.5, 0.5, epsilon=0.2)
        assert v.time_bound.form == "Eq115" and v.time_bound.epsilon == 0.2
        assert v.convergence_mode == "L^inf"

    def test_powersum_witness(self):
        # r = 1/(p-1) = 1/2 sits on the floor and below N/2 = 1
        v = classify(PowerSum(3, 2), bump(2, 32), 2, 0.5, 0.5)
        assert v.regime == WITNESS and v.theorem == "Thm 5.1(iii)"
        assert v.inputs["comparison"] == "power(3)"

    def test_powersum_n1_is_a_gap(self):
        # with N = 1, r = 1/2 = N/2 = A-1: the critical case needs N/2 > A-1 strictly
        v = classify(PowerSum(3, 2), bump(1, 64), 1, 0.5, 0.5)
        assert v.regime == INDETERMINATE

    def test_powersum_critical(self):
        v = classify(PowerSum(3, 2), bump(2, 64), 2, 1.0, 0.5)
        assert v.regime == CRITICAL and v.theorem == "Thm 5.1(ii)"

    def test_powersum_subcritical_bound(self):
        v = classify(PowerSum(3, 2), bump(1, 64), 1, 1.0, 0.5)
        assert v.regime == SUBCRITICAL and v.time_bound.form == "Eq53"

    def test_mixed_side(self):
        v = classify(Wobbly(2), bump(1, 64), 1, 2.0, 0.5)
        assert v.regime == INDETERMINATE and any("no stable side" in n for n in v.notes)

    def test_gap_range(self):
        # A - 1 = 2 >= N/2: nothing is stated for r in (N/2, A-1)
        v = classify(Power(1.5), bump(1, 64), 1, 1.0, 0.5)
        assert v.regime == INDETERMINATE

    def test_exponential_below_critical_is_a_witness(self):
        # f'F = A identically counts as "f'F >= A" for the nonexistence statement
        v = classify(Exponential(), bump(2, 32), 2, 0.5, 0.5)
        assert v.regime == WITNESS and v.theorem == "Thm 1.3"
        assert audit_verdict(v) == []

    def test_diverging_data_is_indeterminate(self):
        def level(k):
            g = Grid.box(-1, 1, 256 * 2 ** k)
            return g.sample(lambda x: np.maximum(np.abs(x), g.spacing / 2) ** -1.5)
        v = classify(Power(2), level, 1, 1.0, 0.5)
        assert v.regime == INDETERMINATE and v.inputs["trend"] == "Diverging"

    def test_levels_need_divisible_extents(self):
        with pytest.raises(ConfigError):
            classify(Power(2), Grid.box(0, 1, 30).field(np.ones(30)), 1, 2.0, 0.2)

    def test_rejects_bad_r(self):
        with pytest.raises(ConfigError):
            classify(Power(2), bump(1, 64), 1, 0.0, 0.5)

    def test_json_round_trip(self):
        v = classify(Power(2), bump(1, 64), 1, 2.0, 0.5)
        d = json.loads(json.dumps(v.to_dict()))
        assert d["regime"] == SUBCRITICAL and d["time_bound"]["form"] == "Eq113"

    def test_audit_catches_bad_verdict(self):
        bad = Verdict(SUBCRITICAL, "Thm 1.1(i)",
                      {"N": 1, "r": 0.25, "A": 2.0, "side": "CONSTANT", "trend": "Converging"})
        assert audit_verdict(bad)
        assert audit_verdict(Verdict("Sideways", "", {"N": 1, "r": 1, "A": 2, "side": "BELOW"}))


class TestThresholds:
    def test_power_n3(self):
        rep = threshold_report(Power(2), 3)
        assert rep.r_critical == 1.5 and rep.r_floor == pytest.approx(1.0)
        assert rep.weissler_rc == 1.5 and rep.consistent
        assert rep.nonexistence_applies

    def test_exponential_n2(self):
        rep = threshold_report(Exponential(), 2)
        assert rep.r_critical == 1.0 and rep.r_floor == 0.0 and rep.weissler_rc is None

    def test_gap(self):
        rep = threshold_report(Power(2), 1)
        assert not rep.nonexistence_applies and "do not apply" in rep.gap_note
