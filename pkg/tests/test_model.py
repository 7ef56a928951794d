import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vcequilibrium import oracle
from vcequilibrium.errors import PropositionWarning, ValidationError
from vcequilibrium.model import (
    FirmType,
    Mode,
    ModelParams,
    Prices,
    bank_policy,
    discount_bundle,
    effort_ratio,
    evaluate_policies,
    financing_choice,
    labor_profit,
    region_boundaries,
    vc_advantage,
    vc_cost_cutoff,
    vc_effort,
    vc_policy,
)

PRICES = Prices(0.87, 1.18)
pos = st.floats(min_value=0.05, max_value=20.0, allow_nan=False)


# --- parameters --------------------------------------------------------------


def test_params_reject_elasticities_not_summing_to_one():
    with pytest.raises(ValidationError) as e:
        ModelParams(chi=0.3, theta=0.1, beta=0.5)
    assert e.value.key == "chi"


@pytest.mark.parametrize("name,value", [("sigma", 1.0), ("alpha", 1.0), ("epsilon", 0.0), ("r", -0.01),
                                        ("s_e", 1.0), ("s_v", -0.1), ("I", -1.0), ("kappa_v", 0.0),
                                        ("eta_e", 0.0), ("L", 0.0), ("gamma", float("nan"))])
def test_params_range_checks_name_the_key(name, value):
    with pytest.raises(ValidationError) as e:
        ModelParams().replace(**{name: value})
    assert e.value.key == name


def test_params_warn_when_effort_signs_not_guaranteed():
    with pytest.warns(PropositionWarning):
        p = ModelParams(sigma=1.2)
    assert not p.signs_guaranteed
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert ModelParams().signs_guaranteed


def test_params_replace_rejects_unknown_names():
    with pytest.raises(ValidationError) as e:
        ModelParams().replace(kapa_v=1.0)
    assert e.value.key == "kapa_v"


def test_firm_type_and_prices_must_be_positive():
    with pytest.raises(ValidationError):
        FirmType(0.0, 1.0)
    with pytest.raises(ValidationError):
        Prices(1.0, float("inf"))


# --- discounting ---------------------------------------------------------------


def test_discount_identity_case():
    d = discount_bundle(ModelParams(r=0.0, epsilon=1.0, s_e=0.0))
    assert d.delta == 1.0 and d.Delta == 1.0 and d.i == 0.0


def test_discount_two_period_case():
    d = discount_bundle(ModelParams(r=0.05, epsilon=0.57, s_e=0.0))
    assert d.Delta == pytest.approx(0.57 / 1.05, rel=1e-15)
    assert d.Delta == pytest.approx(0.542857, abs=1e-6)


def test_discount_infinite_horizon_case():
    d = discount_bundle(ModelParams(r=0.05, epsilon=0.57, s_e=0.96))
    assert d.Delta == pytest.approx(6.3333, abs=1e-4)
    assert (1 + d.i) * d.delta * 0.57 == pytest.approx(1.0, abs=1e-12)


# --- labor and profit ---------------------------------------------------------


def test_zero_management_shuts_production():
    lp = labor_profit(1.3, 0.0, 0.9, ModelParams())
    assert (lp.l, lp.y, lp.profit) == (0.0, 0.0, 0.0)


@given(z=pos, F=pos, w=st.floats(min_value=0.1, max_value=10.0))
def test_output_per_worker_is_wage_over_beta(z, F, w):
    p = ModelParams()
    lp = labor_profit(z, F, w, p)
    assert lp.y / lp.l == pytest.approx(w / p.beta, rel=1e-10)
    assert lp.profit == pytest.approx(lp.y - w * lp.l, rel=1e-10)


def test_labor_matches_brute_force_hiring():
    p = ModelParams()
    l_star = oracle.search_max(lambda l: l**p.beta - l)
    lp = labor_profit(1.0, 1.0, 1.0, p)
    assert lp.l == pytest.approx(l_star, rel=1e-6)
    assert lp.profit == pytest.approx(l_star**p.beta - l_star, rel=1e-9)


# --- bank finance --------------------------------------------------------------


def test_zero_investment_means_zero_bank_threshold():
    p = ModelParams(I=0.0)
    b = bank_policy(np.array([0.01, 1.0, 50.0]), 0.8, 0.9, p)
    assert np.all(b.z_s == 0.0) and np.all(b.E > 0)


def test_bank_threshold_linear_in_investment():
    p = ModelParams()
    z1 = bank_policy(1.0, 0.7, 0.9, p).z_s
    z2 = bank_policy(1.0, 0.7, 0.9, p.replace(I=2 * p.I)).z_s
    assert z2 == pytest.approx(2 * z1, rel=1e-14)


def test_bank_threshold_increasing_in_cost():
    c = np.geomspace(0.1, 20, 200)
    z_s = bank_policy(np.ones_like(c), c, 0.9, ModelParams()).z_s
    assert np.all(np.diff(z_s) > 0)


def test_bank_value_is_the_maximized_objective():
    p = ModelParams()
    t = FirmType(1.2, 0.6)
    b = bank_policy(t.z, t.c, 0.9, p)
    best = float(oracle.bank_objective(oracle.oracle_bank_effort(t, 0.9, p), t, 0.9, p))
    assert b.E == pytest.approx(best, rel=1e-9)


# --- VC finance ----------------------------------------------------------------


def test_unit_ratio_gives_equal_efforts():
    p = ModelParams(alpha=0.5, gamma=1.0)
    pol = vc_policy(1.1, 1.3, Prices(0.9, 1.3), 0.0, p)
    assert pol.f == pytest.approx(pol.h, rel=1e-14)


@given(z=st.floats(0.5, 1.5), c=st.floats(0.25, 10.0))
def test_nash_split(z, c):
    p = ModelParams()
    E = bank_policy(z, c, PRICES.w, p).E
    pol = vc_policy(z, c, PRICES, E, p)
    if pol.funded:
        assert pol.S_e + pol.S_v == pytest.approx(pol.total_surplus, rel=1e-12)
        assert pol.S_v / (pol.S_e + pol.S_v) == pytest.approx(p.alpha, abs=1e-10)
        assert pol.p == pytest.approx((pol.S_v + p.I) / p.epsilon, rel=1e-14)
    else:
        assert pol.S_e == 0.0 and pol.S_v == 0.0 and math.isnan(pol.p)


def test_effort_ratio_formula():
    p = ModelParams()
    c, v = 0.9, 1.4
    expected = ((v / c) * (1 - p.alpha) / (p.alpha * p.gamma)) ** p.sigma
    assert effort_ratio(c, v, p) == pytest.approx(expected, rel=1e-14)


def test_vc_effort_pairwise_monotonicity():
    p = ModelParams()
    step = 1e-3
    for z in (0.5, 1.0, 1.5):
        for c in (0.3, 1.0, 5.0):
            for v in (0.6, 1.2, 2.4):
                h = vc_effort(z, c, Prices(0.9, v), p)
                assert vc_effort(z * (1 + step), c, Prices(0.9, v), p) > h
                assert vc_effort(z, c * (1 + step), Prices(0.9, v), p) > h
                assert vc_effort(z, c, Prices(0.9, v * (1 + step)), p) < h


def test_extreme_magnitudes_stay_finite():
    p = ModelParams()
    z = np.array([1e-8, 1e8])
    pol = vc_policy(z, np.array([1e-6, 1e6]), Prices(1e-4, 1e4), 0.0, p)
    assert np.all(np.isfinite(pol.h)) and np.all(np.isfinite(pol.f))


# --- financing choice ----------------------------------------------------------


def test_below_both_boundaries_is_no_entry():
    m = financing_choice(FirmType(0.05, 1.0), PRICES, ModelParams())
    assert m.mode == Mode.NO_ENTRY
    assert (m.f, m.h, m.F, m.l, m.y, m.E, m.S_e, m.S_v) == (0,) * 8 and m.p is None


def test_bank_when_vc_participation_fails():
    p = ModelParams()
    c = 0.5 * vc_cost_cutoff(PRICES.v, p)
    m = financing_choice(FirmType(1.4, c), PRICES, p)
    assert m.mode == Mode.BANK
    assert m.h == 0.0 and m.F == m.f and m.E > 0 and m.p is None


@given(z=st.floats(0.01, 3.0), c=st.floats(0.05, 20.0))
@settings(max_examples=200)
def test_micro_policy_invariants(z, c):
    p = ModelParams()
    m = financing_choice(FirmType(z, c), PRICES, p)
    if m.mode == Mode.VC:
        assert m.S_e >= 0 and m.S_v >= 0 and m.p is not None
        if m.S_e + m.S_v > 0:
            assert m.S_v / (m.S_e + m.S_v) == pytest.approx(p.alpha, abs=1e-10)
    elif m.mode == Mode.BANK:
        assert m.h == 0 and m.F == m.f and m.E > 0 and m.S_e == 0 and m.S_v == 0
    else:
        assert m.E == 0 and m.S_e == 0 and m.S_v == 0 and m.l == 0
    if m.l > 0:
        assert m.y / m.l == pytest.approx(PRICES.w / p.beta, rel=1e-10)


def test_funded_set_matches_recomputed_surplus():
    p = ModelParams()
    Z, C = np.meshgrid(np.linspace(0.3, 1.5, 50), np.geomspace(0.25, 10, 50), indexing="ij")
    pol = evaluate_policies(Z, C, PRICES, p)
    funded = np.zeros(Z.shape, dtype=bool)
    for idx in np.ndindex(Z.shape):
        t = FirmType(float(Z[idx]), float(C[idx]))
        f_bank = bank_policy(t.z, t.c, PRICES.w, p).f
        E = max(float(oracle.bank_objective(f_bank, t, PRICES.w, p)), 0.0)
        h = vc_effort(t.z, t.c, PRICES, p)
        f = effort_ratio(t.c, PRICES.v, p) * h
        funded[idx] = oracle.vc_total_surplus(h, f, t, PRICES.w, E, p) >= 0
    assert np.array_equal(pol.mode == Mode.VC, funded)


# --- region geometry -------------------------------------------------------------


def test_cost_cutoff_closed_form_matches_bisection():
    p = ModelParams()
    for v in (0.3, 1.0, 4.0):
        rb = region_boundaries(Prices(0.9, v), p, np.linspace(0.05, 30, 50))
        assert vc_cost_cutoff(v, p) == pytest.approx(rb.c_v, rel=1e-12)
        assert vc_advantage(rb.c_v, v, p) == pytest.approx(1.0, rel=1e-12)


def test_cost_cutoff_zero_when_vc_always_wins():
    p = ModelParams(alpha=0.5)
    assert vc_cost_cutoff(1.0, p) == 0.0
    rb = region_boundaries(Prices(0.9, 1.0), p, np.linspace(0.1, 5, 20))
    assert rb.c_v == 0.0


def test_region_curves():
    p = ModelParams()
    c = np.geomspace(0.25, 10, 80)
    rb = region_boundaries(PRICES, p, c)
    assert np.all(np.diff(rb.z_s) > 0)
    assert np.all(np.diff(vc_advantage(c, PRICES.v, p)) > 0)
    vc = c >= rb.c_v
    assert np.all(rb.z_vc[vc] <= rb.z_s[vc])
    assert all(s == "none" for s, d in zip(rb.z_vc_status, vc) if not d)


def test_region_rejects_unsorted_costs():
    with pytest.raises(ValidationError):
        region_boundaries(PRICES, ModelParams(), [1.0, 0.5])


def test_mode_flips_where_boundaries_cross():
    p = ModelParams()
    z = np.linspace(0.3, 1.5, 100)
    c = np.geomspace(0.25, 10, 100)
    rb = region_boundaries(PRICES, p, c)
    Z, C = np.meshgrid(z, c, indexing="ij")
    mode = evaluate_policies(Z, C, PRICES, p).mode
    predicted = np.where((C >= rb.c_v) & (Z >= rb.z_vc[None, :]), Mode.VC,
                         np.where(Z > rb.z_s[None, :], Mode.BANK, Mode.NO_ENTRY))
    disagree = np.argwhere(mode != predicted)
    # only cells next to a boundary may disagree
    dz = z[1] - z[0]
    for i, j in disagree:
        near_vc = abs(Z[i, j] - rb.z_vc[j]) <= dz
        near_bank = abs(Z[i, j] - rb.z_s[j]) <= dz
        near_cut = j > 0 and (c[j - 1] < rb.c_v <= c[j]) or (j + 1 < len(c) and c[j] < rb.c_v <= c[j + 1])
        assert near_vc or near_bank or near_cut
    assert len(disagree) <= 2 * len(c)
