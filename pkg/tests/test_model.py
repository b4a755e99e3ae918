import pickle

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conhj.errors import NegativeI, ParamOutOfRange, Saturated, UnknownFamily
from conhj.model import (
    ASSUMPTIONS,
    check_assumptions,
    default_assumption_grids,
    eval_b,
    eval_b_prime,
    eval_psi,
    eval_Q,
    eval_R,
    eval_R_x,
    eval_u0,
    eval_u0_prime,
    resolve_model,
    semiconvexity_constant,
    zero_level_x,
)

BUILTIN = ("satexp", "cubicsat")


@pytest.fixture(params=BUILTIN)
def builtin(request):
    return resolve_model(request.param, {})


def test_resolve_defaults():
    m = resolve_model("satexp", {})
    assert m.I_max == 1.0
    assert m.family_id == "satexp"


def test_resolve_rejects_negative_I_max():
    with pytest.raises(ParamOutOfRange):
        resolve_model("satexp", {"I_max": -1.0})


def test_resolve_unknown_family():
    with pytest.raises(UnknownFamily):
        resolve_model("nosuch", {})


def test_resolve_unknown_parameter():
    with pytest.raises(ParamOutOfRange):
        resolve_model("satexp", {"bogus": 1.0})


def test_model_is_immutable_and_picklable(model):
    with pytest.raises(TypeError):
        model.params["I_max"] = 2.0
    assert pickle.loads(pickle.dumps(model)) == model


def test_R_values(model):
    assert eval_R(model, 0.0, 0.0) == 0.0
    expected = float(1 - mp.e ** -1 - mp.mpf("0.5"))
    assert eval_R(model, 1.0, 0.5) == pytest.approx(expected, abs=1e-5)
    assert eval_R(model, 1.0, 0.5) == pytest.approx(0.13212, abs=1e-5)
    assert eval_R(model, -1.0, 0.5) == -0.5


def test_component_values(model):
    assert eval_b_prime(model, 0.0) == 0.0
    assert eval_u0(model, 0.0) == 0.0
    assert eval_u0_prime(model, 0.0) == 0.0
    assert eval_b(model, 1.0) == pytest.approx(float(1 - mp.e ** -1), abs=1e-12)
    assert eval_b(model, 1.0) == pytest.approx(0.63212, abs=1e-5)


def test_Q_rejects_negative(model):
    with pytest.raises(NegativeI):
        eval_Q(model, -0.1)


def test_zero_level(model):
    assert zero_level_x(model, 0.0) == 0.0
    oracle = float((-mp.log(1 - mp.mpf("0.5"))) ** (mp.mpf(1) / 3))
    assert zero_level_x(model, 0.5) == pytest.approx(oracle, abs=1e-9)
    assert zero_level_x(model, 0.5) == pytest.approx(0.88500, abs=1e-4)
    with pytest.raises(Saturated):
        zero_level_x(model, 1.0)


def test_zero_level_cubicsat():
    m = resolve_model("cubicsat", {})
    # x^3/(1+x^3) = 1/2 at x = 1
    assert zero_level_x(m, 0.5) == pytest.approx(1.0, abs=1e-9)


def test_default_assumptions_pass(builtin):
    x, I = default_assumption_grids(builtin)
    rep = check_assumptions(builtin, x, I)
    assert list(rep.entries) == list(ASSUMPTIONS)
    assert rep.passed, rep.failing()
    assert sorted(rep.to_dict()) == [f"A{i}" for i in range(1, 9)]


def test_reduced_I_max_fails_saturation():
    m = resolve_model("satexp", {"I_max": 0.5})
    x, I = default_assumption_grids(m)
    rep = check_assumptions(m, x, I)
    assert rep.failing() == ["A4"]
    wx, wI = rep.entries["A4"].witness
    assert eval_R(m, wx, wI) > 0


def test_shifted_initial_datum_fails_at_origin():
    m = resolve_model("satexp", {"u0_shift": 0.1})
    x, I = default_assumption_grids(m)
    rep = check_assumptions(m, x, I)
    assert rep.failing() == ["A8"]
    assert rep.entries["A8"].witness[0] == 0.0


def test_failing_entries_carry_witness():
    for params in ({"I_max": 0.5}, {"u0_shift": 0.1}, {"u0_shift": -0.1}):
        m = resolve_model("satexp", params)
        rep = check_assumptions(m, *default_assumption_grids(m))
        for name in rep.failing():
            assert rep.entries[name].witness is not None


def test_oracle_fixture_fails_growth_assumptions():
    m = resolve_model("free_quadratic", {})
    rep = check_assumptions(m, *default_assumption_grids(m))
    assert not rep.passed


def test_truncation_condition_holds_with_equality(builtin):
    x, I = default_assumption_grids(builtin)
    rep = check_assumptions(builtin, x, I)
    assert rep.entries["A1"].sampled_bound["max_R_left_plus_Q"] == 0.0


def test_psi_plateau_and_support(model):
    x = np.linspace(-5, 15, 4001)
    p = eval_psi(model, x)
    assert np.all(p[(x >= -2) & (x <= 8)] == 1.0)
    assert np.all(p[(x <= -3) | (x >= 9)] == 0.0)
    assert np.all((p >= 0) & (p <= 1))


def test_semiconvexity_constant_grows_linearly(model):
    c0, c1, c2 = (semiconvexity_constant(model, t) for t in (0.0, 1.0, 2.0))
    assert c1 - c0 == pytest.approx(c2 - c1, rel=1e-12)
    assert c0 == pytest.approx(np.max(np.abs(model.u0_second(np.linspace(-5, 15, 20001)))), rel=1e-9)


# -- sampled invariants -------------------------------------------------------------

family = st.sampled_from(BUILTIN)
I_pos = st.floats(1e-6, 1.0)


@given(family, st.floats(-20.0, -1e-9), I_pos)
def test_left_branch_negative(fid, x, I):
    assert eval_R(resolve_model(fid, {}), x, I) < 0


@given(family, st.floats(-10.0, 20.0), st.floats(0.0, 0.99), st.floats(1e-3, 0.5))
def test_R_strictly_decreasing_in_I(fid, x, I, dI):
    m = resolve_model(fid, {})
    assert eval_R(m, x, I + dI) < eval_R(m, x, I)


@given(family, st.floats(0.0, 1.0), st.floats(1e-6, 1.0))
def test_Q_increasing_from_zero(fid, I, dI):
    m = resolve_model(fid, {})
    assert eval_Q(m, 0.0) == 0.0
    assert eval_Q(m, I + dI) > eval_Q(m, I)


@given(family, st.floats(-20.0, 1e3))
def test_R_at_I_max_nonpositive(fid, x):
    m = resolve_model(fid, {})
    assert eval_R(m, x, m.I_max) <= 0


def test_R_at_I_max_approaches_zero(builtin):
    far = [float(eval_R(builtin, x, builtin.I_max)) for x in (10.0, 100.0, 1000.0)]
    assert far[-1] > -1e-6
    assert far == sorted(far)


@given(family, st.floats(-20.0, 20.0))
def test_R_at_zero_multiplier_minimised_at_origin(fid, x):
    m = resolve_model(fid, {})
    assert eval_R(m, x, 0.0) >= eval_R(m, 0.0, 0.0) == 0.0


@given(family, st.floats(0.0, 3.0), st.floats(1e-4, 1.0))
def test_b_strictly_increasing(fid, x, h):
    m = resolve_model(fid, {})
    assert eval_b(m, x + h) > eval_b(m, x)


@given(family, st.floats(-20.0, 20.0).filter(lambda v: abs(v) > 1e-6))
def test_u0_negative_away_from_origin(fid, x):
    assert eval_u0(resolve_model(fid, {}), x) < 0


@settings(max_examples=60)
@given(family, st.one_of(st.floats(-4.0, -0.05), st.floats(0.05, 6.0)), st.floats(0.0, 1.0))
def test_R_x_matches_centered_difference(fid, x, I):
    m = resolve_model(fid, {})
    h = 1e-3
    fd = (eval_R(m, x + h, I) - eval_R(m, x - h, I)) / (2 * h)
    assert abs(eval_R_x(m, x, I) - fd) <= 20.0 * h * h


@settings(max_examples=60)
@given(family, st.floats(-6.0, 6.0))
def test_u0_derivatives_match_differences(fid, x):
    m = resolve_model(fid, {})
    h = 1e-4
    d1 = (m.u0(x + h) - m.u0(x - h)) / (2 * h)
    d2 = (m.u0(x + h) - 2 * m.u0(x) + m.u0(x - h)) / h**2
    assert m.u0_prime(x) == pytest.approx(d1, abs=1e-6)
    assert m.u0_second(x) == pytest.approx(d2, abs=1e-3)
