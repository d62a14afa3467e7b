import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hmab import presets, structure
from hmab.model import ArmParams, Kind
from hmab.solver import PolicyTable, SolverConfig, ValueTables, extract_policy, solve
from hmab.structure import Shape

from conftest import arms

DEMO = presets.threshold_demo_arm()

# Satisfies every hypothesis of the mu0 > mu1 monotonicity results, yet the
# play-minus-rest difference rises with the belief: the unavailable-play
# reward gap dwarfs the available one, so the play branch gains more from a
# worse belief than it loses.
ISOTONE_COUNTEREXAMPLE = ArmParams(
    mu0=0.80236416113453, mu1=0.19161625902013524, r0=0.6832869060032571,
    r1=0.819626719119277, eta0=0.14792203578495655, eta1=0.787096941554801,
    theta=((0.08155261736351271, 0.19132392605720028), (0.8552269742870702, 0.8612834961776684)),
    kind=Kind.RESTED)
ISOTONE_BETA, ISOTONE_W = 0.8944416933874613, 0.4649060043892408


class TestConditions:
    def test_monotone_regime(self):
        a = ArmParams(0.9, 0.1, 0.3, 0.9, 0.1, 0.6, theta=((0.0, 0.7), (0.4, 0.8)))
        c = structure.check_structural_conditions(a)
        assert c.monotone_regime and not c.small_gap_regime

    def test_wide_gap_fails_small_gap_regime(self):
        c = structure.check_structural_conditions(DEMO)
        assert c.mu_gap == pytest.approx(0.8)
        assert not c.small_gap_regime and not c.lipschitz_applicable

    def test_small_gap(self):
        a = ArmParams(0.3, 0.5, 0.3, 0.9, 0.1, 0.6)
        c = structure.check_structural_conditions(a)
        assert c.small_gap_regime and c.lipschitz_applicable

    def test_decreasing_availability_breaks_regime(self):
        a = ArmParams(0.9, 0.1, 0.3, 0.9, 0.1, 0.6, theta=((0.0, 0.7), (0.9, 0.8)))
        assert not structure.check_structural_conditions(a).availability_ordered


def test_lipschitz_constant():
    assert structure.lipschitz_constant(0.9, 0.3, 0.5) == pytest.approx(1 / 0.82)


class TestValueChecks:
    def _tables(self, arr):
        arr = np.asarray(arr, dtype=float)
        return ValueTables.from_arrays(np.linspace(0, 1, len(arr)), arr, arr, arr, arr)

    def test_constant_tables_pass(self):
        t = self._tables(np.ones(11))
        assert structure.check_monotone_values(t).passed
        assert all(r.passed for r in structure.check_isotone_difference(t).values())

    def test_increasing_array_fails_with_witness(self):
        a = np.linspace(1, 0, 11)
        a[6] += 0.5
        r = structure.check_monotone_values(self._tables(a))
        assert not r.passed and r.index == 5

    def test_convexity_negative_control(self):
        r = structure.check_convexity(self._tables(np.sin(np.linspace(0, 3, 21))))
        assert not r["v"].passed

    def test_monotone_regime_values(self):
        a = ArmParams(0.9, 0.1, 0.3, 0.9, 0.1, 0.6, theta=((0.0, 0.7), (0.4, 0.8)))
        t = solve(a, SolverConfig(beta=0.9, subsidy_w=0.3))
        assert structure.check_monotone_values(t).passed

    def test_isotone_counterexample_is_detected(self):
        conf = SolverConfig(beta=ISOTONE_BETA, subsidy_w=ISOTONE_W)
        assert structure.check_structural_conditions(ISOTONE_COUNTEREXAMPLE).monotone_regime
        t = solve(ISOTONE_COUNTEREXAMPLE, conf)
        r = structure.check_isotone_difference(t)["available"]
        assert not r.passed
        # the rise is a slope of the exact function, not grid noise
        assert r.worst * (len(t.grid) - 1) > 0.1


class TestLipschitz:
    def test_not_applicable_for_wide_gap(self):
        t = solve(DEMO, SolverConfig(beta=0.7))
        assert not structure.check_lipschitz(t, DEMO, SolverConfig(beta=0.7)).applicable

    def test_bound_holds_small_gap(self):
        a = ArmParams(0.3, 0.5, 0.3, 0.9, 0.3, 0.9, theta=((1, 1), (1, 1)), kind=Kind.RESTLESS)
        conf = SolverConfig(beta=0.9, subsidy_w=0.2)
        r = structure.check_lipschitz(solve(a, conf), a, conf)
        assert r.applicable and r.passed
        assert r.kappa == pytest.approx(1 / 0.82)

    def test_equal_rewards_force_flat_values(self):
        a = ArmParams(0.3, 0.5, 0.6, 0.6, 0.6, 0.6, theta=((1, 1), (1, 1)))
        conf = SolverConfig(beta=0.9)
        t = solve(a, conf)
        r = structure.check_lipschitz(t, a, conf)
        assert r.passed and r.bound_v == 0.0


class TestThreshold:
    def test_all_play(self):
        g = np.linspace(0, 1, 5)
        assert structure.classify(g, np.ones(5)).shape is Shape.ALL_PLAY

    def test_all_rest(self):
        r = structure.classify(np.linspace(0, 1, 5), np.zeros(5))
        assert r.shape is Shape.ALL_NOT_PLAY and r.grid_pi_star == 0.0

    def test_alternating_policy(self):
        r = structure.classify(np.linspace(0, 1, 6), [1, 0, 1, 0, 1, 0])
        assert r.shape is Shape.NOT_THRESHOLD and r.witness == [1, 3]

    def test_single_switch_refined(self):
        g = np.linspace(0, 1, 11)
        diff = 0.35 - g
        r = structure.classify(g, (diff > 0).astype(int), diff)
        assert r.shape is Shape.THRESHOLD
        assert r.grid_pi_star == pytest.approx(0.4)
        assert r.pi_star == pytest.approx(0.35, abs=1e-8)

    def test_demo_arm_is_threshold(self):
        t = solve(DEMO, SolverConfig(beta=0.7, subsidy_w=0.6))
        res = structure.extract_threshold(extract_policy(t))
        assert structure.is_threshold(res)
        assert res[1].shape is Shape.THRESHOLD

    def test_is_threshold_false_on_bad_map(self):
        pol = PolicyTable(np.linspace(0, 1, 4), {0: np.array([1, 0, 1, 0]), 1: np.ones(4)})
        assert not structure.is_threshold(structure.extract_threshold(pol))


@settings(max_examples=20)
@given(arms(), st.floats(0.3, 0.9), st.floats(0, 1), st.floats(-50, 50))
def test_threshold_invariant_under_constant_shift(arm, beta, w, c):
    t = solve(arm, SolverConfig(beta=beta, subsidy_w=w, grid_points=101))
    a = structure.extract_threshold(extract_policy(t))
    # shift chosen so that no difference changes sign under rounding
    b = structure.extract_threshold(extract_policy(t.shifted(float(np.round(c)))))
    assert {y: r.shape for y, r in a.items()} == {y: r.shape for y, r in b.items()}


def test_report_serialises():
    conf = SolverConfig(beta=0.7, subsidy_w=0.5)
    rep = structure.analyze(solve(DEMO, conf), DEMO, conf)
    d = rep.to_dict()
    assert d["threshold"]["available"]["shape"] in {s.value for s in Shape}
    assert set(d["convex_in_pi"]) == {"v_s", "v_ns", "v_tilde_s", "v_tilde_ns", "v", "v_tilde"}
