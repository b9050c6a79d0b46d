import math

import numpy as np
import pytest

from lvstage.classify import (
    OutcomeKind,
    Region,
    ThresholdCase,
    classify,
    delta_thresholds,
    label_from_signs,
    monotone_on_grid,
    predicted_outcome,
    regime_at,
    threshold_functions,
)
from lvstage.errors import InconsistentSigns, ValidationError
from lvstage.grid import Grid
from lvstage.model import ModelParams
from lvstage.profiles import sample
from lvstage.steady import coupled_residual


@pytest.mark.parametrize(
    "mu_uv,mu_vu,region",
    [
        (-0.1, 0.2, Region.S_u),
        (0.2, -0.1, Region.S_v),
        (0.1, 0.3, Region.S_minus),
        (1e-9, 0.3, Region.S_u0),
        (0.3, -1e-9, Region.S_v0),
        (-1e-8, 5e-8, Region.S_00),
        (-1e-9, -0.2, Region.S_v),
    ],
)
def test_label_from_signs(mu_uv, mu_vu, region):
    assert label_from_signs(mu_uv, mu_vu) is region


def test_both_stable_is_inconsistent():
    with pytest.raises(InconsistentSigns):
        label_from_signs(-0.1, -0.2)


def test_region_swap():
    assert Region.S_u.swapped() is Region.S_v
    assert Region.S_u0.swapped() is Region.S_v0
    assert Region.S_minus.swapped() is Region.S_minus


SWAP_CASES = [
    dict(d1=0.1, d2=1.0, tau1=0.3, tau2=0.1, gamma1=1.0, gamma2=0.5, b=0.8, c=0.5,
         m1="2 + 0.5*cos(x)", m2="1 + 0.3*cos(x)"),
    dict(d1=0.5, d2=0.4, tau1=0.2, tau2=0.9, gamma1=0.1, gamma2=1.0, b=0.3, c=0.3,
         m1="1", m2="1.5 + sin(x)"),
    dict(d1=2.0, d2=0.05, b=0.9, c=0.9, m1="exp(-x/2) + 0.5", m2="1 + 0.3*cos(2*x)"),
]


@pytest.mark.parametrize("case", SWAP_CASES)
def test_swap_invariance(case, grid):
    params = ModelParams(**case)
    a, b = classify(params, grid), classify(params.swapped(), grid)
    assert b.region is a.region.swapped()
    assert b.mu_uv == pytest.approx(a.mu_vu, abs=1e-12)
    assert b.mu_vu == pytest.approx(a.mu_uv, abs=1e-12)


class TestIdenticalSpecies:
    base = ModelParams(d1=0.3, d2=0.3, gamma1=1.0, gamma2=1.0, m1="1 + 0.5*cos(x)", m2="1 + 0.5*cos(x)")

    def test_shorter_delay_wins(self, grid):
        assert classify(self.base.replace(tau1=0.2, tau2=0.5), grid).region is Region.S_u
        assert classify(self.base.replace(tau1=0.5, tau2=0.2), grid).region is Region.S_v

    def test_equal_delays_give_continuum(self, grid):
        params = self.base.replace(tau1=0.4, tau2=0.4)
        label = classify(params, grid)
        assert label.region is Region.S_00 and label.near_neutral
        out = predicted_outcome(label, params, grid)
        assert out.kind is OutcomeKind.ContinuumAttractor
        assert out.residual <= 1e-8
        U, V = out.family_member(0.3)
        dist, rho = out.distance_to_family(U, V)
        assert dist < 1e-12 and rho == pytest.approx(0.3)
        m1, m2 = params.growth(grid)
        assert coupled_residual(U, V, 0.3, 0.3, params.delta1 * m1, params.delta2 * m2, 1, 1, grid) <= 1e-8


def test_coexistence_prediction(grid):
    params = ModelParams(d1=0.5, d2=0.4, tau1=0.2, gamma1=0.1, b=0.3, c=0.3, m1="1", m2="1.5 + sin(x)")
    label = classify(params, grid)
    out = predicted_outcome(label, params, grid)
    assert label.region is Region.S_minus
    assert out.kind is OutcomeKind.UniqueCoexistence and out.residual <= 1e-10
    U, V = out.targets["coexistence"]
    assert np.min(U) > 0 and np.min(V) > 0


def test_strong_competition_is_unknown(grid):
    params = ModelParams(d1=1, d2=1, b=1.5, c=1.5)
    with pytest.warns(UserWarning, match="bc"):
        label = classify(params, grid)
    assert label.region is Region.bistable
    assert predicted_outcome(label, params, grid).kind is OutcomeKind.Unknown


# -- thresholds in the survival factor ------------------------------------------


def _thresholds(grid, b, c, m1="1", m2="1", d1=1.0, d2=1.0):
    return delta_thresholds(d1, d2, b, c, sample(m1, grid), sample(m2, grid), grid)


def test_case_ii_constant_oracle(grid):
    # f2(delta) = delta - 0.5 and f1(1) = 0.5 > 0
    rep = _thresholds(grid, 0.5, 0.5)
    assert rep.case is ThresholdCase.ii
    assert rep.delta_tilde == pytest.approx(0.5, abs=1e-10)
    assert regime_at(rep, 0.5) == "UniqueCoexistence"
    assert regime_at(rep, 1.0) == "V_wins"


def test_case_iii1_constant_oracle(grid):
    # f1(delta) = 1 - 1.5*delta, f2(delta) = delta - 0.5
    rep = _thresholds(grid, 1.5, 0.5)
    assert rep.case is ThresholdCase.iii1
    assert rep.delta1 == pytest.approx(0.5, abs=1e-10)
    assert rep.delta2 == pytest.approx(2 / 3, abs=1e-10)
    s_low, s_high = -math.log(2 / 3), -math.log(0.5)
    assert regime_at(rep, 0.5 * s_low) == "U_wins"
    assert regime_at(rep, 0.5 * (s_low + s_high)) == "UniqueCoexistence"
    assert regime_at(rep, 2 * s_high) == "V_wins"


def test_case_iii2_constant_oracle(grid):
    # b*c = 1: both roots sit at delta = 1/2
    rep = _thresholds(grid, 2.0, 0.5)
    assert rep.case is ThresholdCase.iii2
    assert abs(rep.delta1 - rep.delta2) <= 1e-8
    assert regime_at(rep, math.log(2)) == "ContinuumAttractor"


def test_case_i(grid):
    rep = _thresholds(grid, 0.5, 0.5, m1="1", m2="2.2")
    assert rep.case is ThresholdCase.i
    assert regime_at(rep, 0.01) == "V_wins"


def test_heterogeneous_case_iii1():
    g = Grid(math.pi, 101)
    rep = _thresholds(g, 0.8, 0.5, m1="2 + 0.5*cos(x)", m2="1 + 0.3*cos(x)", d1=0.1, d2=1.0)
    assert rep.case is ThresholdCase.iii1
    assert rep.delta1 <= rep.delta2 + 1e-8
    # frozen from this solver at n = 101; each root also zeroes its function independently
    assert rep.delta1 == pytest.approx(0.247399134, abs=1e-8)
    assert rep.delta2 == pytest.approx(0.625110999, abs=1e-8)
    f1, f2 = threshold_functions(0.1, 1.0, 0.8, 0.5, sample("2 + 0.5*cos(x)", g), sample("1 + 0.3*cos(x)", g), g)
    assert abs(f1(rep.delta2)) < 1e-9 and abs(f2(rep.delta1)) < 1e-9
    assert monotone_on_grid(f1, increasing=False)[0]
    assert monotone_on_grid(f2, increasing=True)[0]


def test_thresholds_need_weak_competition(grid):
    with pytest.raises(ValidationError):
        _thresholds(grid, 2.0, 1.0)
