import json
import math

import numpy as np
import pytest

from hmab import model, presets
from hmab.errors import EmptyExperiment
from hmab.model import ArmParams, Kind
from hmab.simulate import (MyopicRule, Policy, SimConfig, SimState, _Arms, auto_horizon,
                           compare_policies, episode_rewards, run_experiment, simulate_episode,
                           step)

SURE = ArmParams(0.5, 0.5, 1.0, 1.0, 1.0, 1.0, theta=((1, 1), (1, 1)))


def five(beta=0.8, episodes=200, **kw):
    return SimConfig(presets.five_arms(0.8, 0.0, 0.7), beta, (0.5,) * 5, (1,) * 5,
                     episodes=episodes, seed=7, index_points=21, index_w_tolerance=1e-2,
                     grid_points=201, **kw)


def test_deterministic_single_arm():
    cfg = SimConfig((SURE,), 0.5, (0.5,), (1,), episodes=3, policies=(Policy.MYOPIC,))
    t = cfg.resolved_horizon()
    r = episode_rewards(cfg, Policy.MYOPIC)
    assert np.allclose(r, 2 * (1 - 0.5 ** t), rtol=0, atol=1e-12)


@pytest.mark.parametrize("beta", [0.3, 0.6, 0.9, 0.95, 0.99])
@pytest.mark.parametrize("r_max", [0.2, 1.0])
def test_auto_horizon_is_minimal(beta, r_max):
    t = auto_horizon(beta, r_max)
    assert beta ** t * r_max / (1 - beta) < 1e-3
    assert t == 1 or beta ** (t - 1) * r_max / (1 - beta) >= 1e-3


def test_myopic_tie_takes_lowest_id():
    arms = _Arms.of([SURE] * 3)
    pi = np.full((4, 3), 0.5)
    y = np.ones((4, 3), dtype=np.int8)
    assert MyopicRule().choose(arms, pi, y, np.zeros(4)).tolist() == [0, 0, 0, 0]


def test_unplayed_rested_belief_is_frozen():
    cfg = five(episodes=1, policies=(Policy.MYOPIC,))
    tr = simulate_episode(cfg, Policy.MYOPIC, 0)
    for a, b in zip(tr.slots, tr.slots[1:]):
        for k in range(5):
            if k != a.arm:
                assert b.pi[k] == a.pi[k]


def test_empty_experiment():
    with pytest.raises(EmptyExperiment):
        run_experiment(five(episodes=0))


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig((SURE,), 0.5, (0.5, 0.5), (1,))
    with pytest.raises(ValueError):
        SimConfig((), 0.5, (), ())
    with pytest.raises(ValueError):
        SimConfig((SURE,), 1.0, (0.5,), (1,))


def test_identical_policies_match():
    cfg = five(policies=(Policy.MYOPIC,))
    assert np.array_equal(episode_rewards(cfg, "myopic"), episode_rewards(cfg, Policy.MYOPIC))


def test_trace_accounting_and_beliefs():
    cfg = five(beta=0.9, episodes=1)
    for policy in (Policy.INDEX, Policy.MYOPIC, Policy.RANDOM):
        tr = simulate_episode(cfg, policy, 3)
        acc = 0.0
        for i, s in enumerate(tr.slots):
            acc += 0.9 ** i * s.reward
            assert s.acc == pytest.approx(acc, abs=1e-12)
            arm = cfg.arms[s.arm]
            want = model.state_reward(arm, np.array(s.x[s.arm]), np.array(s.y[s.arm]))
            assert s.reward == float(want)
        for a, b in zip(tr.slots, tr.slots[1:]):
            arm = cfg.arms[a.arm]
            want = model.gamma_update(arm, a.pi[a.arm], a.z, a.y[a.arm])
            assert b.pi[a.arm] == pytest.approx(want, abs=1e-12)


def test_restless_beliefs_follow_prediction():
    arms = (presets.threshold_demo_arm(),) * 2
    cfg = SimConfig(arms, 0.7, (0.2, 0.9), (1, 0), episodes=1, horizon=30,
                    policies=(Policy.MYOPIC,))
    tr = simulate_episode(cfg, Policy.MYOPIC, 0)
    for a, b in zip(tr.slots, tr.slots[1:]):
        k = 1 - a.arm
        want = model.big_gamma_update(arms[k], a.pi[k], a.y[k])
        assert b.pi[k] == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("policy", list(Policy))
def test_trace_matches_batch(policy):
    cfg = five(episodes=4)
    batch = episode_rewards(cfg, policy)
    for e in range(4):
        assert simulate_episode(cfg, policy, e).total == pytest.approx(batch[e], abs=1e-12)


def test_workers_bitwise_identical():
    cfg = five(episodes=1200)
    one = run_experiment(cfg, workers=1)
    many = run_experiment(cfg, workers=3)
    assert one.to_dict() == many.to_dict()


def test_step_consumes_one_block():
    cfg = five(episodes=1)
    rng = np.random.default_rng(0)
    s = SimState.initial(cfg, rng.random(5)[None, :])
    before = rng.bit_generator.state
    step(s, MyopicRule(), rng, cfg.arms, cfg.beta)
    ref = np.random.default_rng(0)
    ref.bit_generator.state = before
    ref.random(16)
    assert rng.bit_generator.state == ref.bit_generator.state


def test_value_exceeds_worst_unavailable_bound():
    # rested arm played forever earns at least eta0 per slot
    arm = presets.five_arms(0.8, 0.0, 0.7)[2]
    cfg = SimConfig((arm,), 0.8, (0.5,), (1,), episodes=2000, policies=(Policy.MYOPIC,))
    r = episode_rewards(cfg, Policy.MYOPIC)
    assert r.mean() - 3 * r.std() / math.sqrt(len(r)) > arm.eta0 / 0.2


def test_jsonl_trace():
    tr = simulate_episode(five(episodes=1), Policy.RANDOM, 0)
    lines = tr.to_jsonl().strip().split("\n")
    assert len(lines) == len(tr.slots)
    rec = json.loads(lines[-1])
    assert rec["policy"] == "random" and rec["acc"] == tr.total


def test_compare_reports_each_beta():
    cfg = five(episodes=50)
    reps = compare_policies(cfg, betas=[0.95, 0.8, 0.6])
    r_max = max(a.max_reward for a in cfg.arms)
    assert [r.beta for r in reps] == [0.95, 0.8, 0.6]
    for r in reps:
        assert set(r.stats) == {Policy.INDEX, Policy.MYOPIC}
        assert r.horizon == auto_horizon(r.beta, r_max)
        d = r.to_dict()
        assert d["gain"]["ci95"][0] <= d["gain"]["diff_mean"] <= d["gain"]["ci95"][1]
