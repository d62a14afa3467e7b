import math

import numpy as np
import pytest
from hypothesis import assume, given

from hmab import model
from hmab.errors import DegenerateObservation
from hmab.model import ArmParams, Kind

from conftest import arms, belief

DEMO = dict(mu0=0.1, mu1=0.9, r0=0.4, r1=0.95, eta0=0.1, eta1=0.65)


def demo(kind=Kind.RESTED, **kw):
    return ArmParams(**{**DEMO, **kw}, kind=kind)


class TestValidate:
    def test_demo_arm_is_valid_under_strict_ordering(self):
        assert model.validate(demo(), strict_ordering=True) == []

    def test_out_of_range_reward_is_reported(self):
        v = model.validate(demo(r0=1.2))
        assert [x.field for x in v] == ["r0"]

    def test_ordering_violation_names_both_fields(self):
        v = model.validate(demo(eta0=0.5, r0=0.4), strict_ordering=True)
        assert any(x.field == "eta0,r0" for x in v)

    def test_ordering_not_checked_by_default(self):
        assert model.validate(demo(eta0=0.5, r0=0.4)) == []

    def test_theta_bounds(self):
        v = model.validate(demo(theta=((0.0, 1.5), (1.0, 1.0))))
        assert [x.field for x in v] == ["theta[0][1]"]

    def test_nan_is_a_violation(self):
        assert model.validate(demo(mu0=float("nan")))


class TestBeliefMaps:
    def test_certain_good_state_moves_to_mu1(self):
        assert model.gamma_update(demo(), 0.0, 1, 1) == pytest.approx(0.9)

    def test_posterior_at_half(self):
        # (0.5*0.4*0.1 + 0.5*0.95*0.9) / (0.5*0.4 + 0.5*0.95)
        assert model.gamma_update(demo(), 0.5, 1, 1) == pytest.approx(0.44750 / 0.67500, abs=1e-12)
        assert model.gamma_update(demo(), 0.5, 1, 1) == pytest.approx(0.662963, abs=1e-6)

    def test_rested_unavailable_play_keeps_belief(self):
        assert model.gamma_update(demo(), 0.37, 0, 0) == 0.37

    def test_restless_unavailable_play_uses_available_update(self):
        a = demo(Kind.RESTLESS)
        assert model.gamma_update(a, 0.37, 0, 0) == model.gamma_update(a, 0.37, 0, 1)

    def test_degenerate_observation_raises(self):
        a = demo(r0=0.0, r1=0.0)
        with pytest.raises(DegenerateObservation):
            model.gamma_update(a, 0.5, 1, 1)

    def test_rest_while_unavailable_is_identity(self):
        assert model.big_gamma_update(demo(Kind.RESTLESS), 0.42, 0) == 0.42

    def test_restless_rest_predicts(self):
        assert model.big_gamma_update(demo(Kind.RESTLESS), 0.5, 1) == pytest.approx(0.5)
        assert model.big_gamma_update(demo(Kind.RESTLESS), 0.2, 1) == pytest.approx(0.2 * 0.1 + 0.8 * 0.9)

    def test_rested_rest_keeps_belief(self):
        assert model.big_gamma_update(demo(), 0.7, 1) == 0.7

    def test_vectorised_matches_scalar(self):
        a = demo(Kind.RESTLESS)
        pis = np.linspace(0, 1, 11)
        vec = model.gamma_update(a, pis, 0, 1)
        assert np.array_equal(vec, [model.gamma_update(a, p, 0, 1) for p in pis])


class TestRewards:
    def test_available_reward(self):
        a = ArmParams(0.5, 0.5, 0.2, 0.9, 0.1, 0.6)
        assert model.expected_play_reward(a, 0.2, 1) == pytest.approx(0.76)

    def test_unavailable_reward(self):
        a = ArmParams(0.5, 0.5, 0.2, 0.9, 0.1, 0.6)
        assert model.expected_play_reward(a, 0.5, 0) == pytest.approx(0.35)

    def test_certain_bad_state(self):
        assert model.expected_play_reward(demo(), 1.0, 1) == 0.4

    def test_state_reward(self):
        x = np.array([0, 1, 0, 1])
        y = np.array([1, 1, 0, 0])
        assert model.state_reward(demo(), x, y).tolist() == [0.4, 0.95, 0.1, 0.65]


def test_round_trip_dict():
    a = demo(Kind.RESTLESS, theta=((0.0, 0.7), (0.4, 0.8)))
    assert ArmParams.from_dict(a.to_dict()) == a


def test_with_availability_layout():
    a = ArmParams.with_availability(play_avail=0.8, play_unavail=0.4, rest_avail=0.7, **DEMO)
    assert a.theta == ((0.0, 0.7), (0.4, 0.8))


@given(arms(), belief)
def test_maps_stay_in_unit_interval(arm, pi):
    for y in (0, 1):
        assert 0.0 <= model.big_gamma_update(arm, pi, y) <= 1.0
        for z in (0, 1):
            try:
                out = model.gamma_update(arm, pi, z, y)
            except DegenerateObservation:
                continue
            assert 0.0 <= out <= 1.0


@given(arms(), belief)
def test_posterior_mixture_equals_prediction(arm, pi):
    p1 = model.success_prob(arm, pi)
    assume(0.0 < p1 < 1.0)
    mix = p1 * model.gamma_update(arm, pi, 1, 1) + (1 - p1) * model.gamma_update(arm, pi, 0, 1)
    assert mix == pytest.approx(pi * arm.mu0 + (1 - pi) * arm.mu1, abs=1e-12)


@given(arms(ordered=True), belief, belief)
def test_available_reward_is_affine_and_nonincreasing(arm, a, b):
    lo, hi = min(a, b), max(a, b)
    ra, rb = model.expected_play_reward(arm, lo, 1), model.expected_play_reward(arm, hi, 1)
    assert rb <= ra + 1e-15
    mid = model.expected_play_reward(arm, 0.5 * (lo + hi), 1)
    assert math.isclose(mid, 0.5 * (ra + rb), abs_tol=1e-12)


@given(arms())
def test_degenerate_beliefs_stay_inside(arm):
    for pi in (0.0, 1.0):
        assert model.big_gamma_update(arm, pi, 0) == pi
        for z in (0, 1):
            try:
                assert 0.0 <= model.gamma_update(arm, pi, z, 1) <= 1.0
            except DegenerateObservation:
                pass
