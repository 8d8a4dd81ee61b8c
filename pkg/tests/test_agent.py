from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from cabinrl.agent import (
    CabinKernel,
    LearningParams,
    SparseTraces,
    TrainingDivergenceError,
    greedy_policy,
    learn_episode,
    sarsa_update,
    select_action,
    train,
)
from cabinrl.env import ACTION_TABLE, EnvParams, EpisodeConfig, env_step, run_episode, sample_initial_state
from cabinrl.model import CabinState
from cabinrl.tiles import PolicyWeights, TileCoder, cabin_tile_config

CFG = cabin_tile_config()
CODER = TileCoder(CFG)
OFF = CODER.action_offsets(ACTION_TABLE)


class ScriptedRng:
    """Feeds pre-drawn uniforms to ``select_action`` in order."""

    def __init__(self, u):
        self.u = iter(np.asarray(u).reshape(-1))

    def random(self, n):
        return np.array([next(self.u) for _ in range(n)])


def test_defaults():
    lp = LearningParams()
    assert (lp.learning_rate, lp.discount, lp.exploration, lp.trace_decay) == (0.01, 0.99, 0.16, 0.98)
    assert (lp.exploration_cutoff_episode, lp.episodes) == (190_000, 200_000)
    assert lp.epsilon_at(189_999) == 0.16 and lp.epsilon_at(190_000) == 0.0
    for bad in ({"learning_rate": 0}, {"discount": 1.5}, {"exploration": -0.1}, {"trace_decay": 2}):
        with pytest.raises(ValueError):
            LearningParams(**bad)


def test_with_budget_keeps_greedy_tail():
    lp = LearningParams().with_budget(20_000)
    assert (lp.episodes, lp.exploration_cutoff_episode) == (20_000, 10_000)
    lp = LearningParams().with_budget(100)
    assert (lp.episodes, lp.exploration_cutoff_episode) == (100, 50)
    assert LearningParams().with_budget(200_000) == LearningParams()


def test_single_update_normalized():
    lp = LearningParams(normalize_step=True)
    theta = np.zeros(CFG.total_weights)
    s, a = np.array([20.0, 20, 20]), ACTION_TABLE[3]
    s2, a2 = np.array([21.0, 20, 20]), ACTION_TABLE[40]
    delta = sarsa_update(theta, SparseTraces(), CODER, s, a, -1.0, s2, a2, lp)
    assert delta == -1
    idx = CODER.active_tiles(s, a)
    assert np.allclose(theta[idx], -0.01 / 30) and theta[idx][0] == pytest.approx(-3.333e-4, abs=1e-7)
    assert np.count_nonzero(theta) == 30


def test_single_update_default_step():
    theta = np.zeros(CFG.total_weights)
    s, a = np.array([20.0, 20, 20]), ACTION_TABLE[3]
    sarsa_update(theta, SparseTraces(), CODER, s, a, -1.0, s, a, LearningParams())
    assert np.allclose(theta[CODER.active_tiles(s, a)], -0.01)


def test_zero_td_error_leaves_theta():
    lp = LearningParams(discount=1.0)
    rng = np.random.default_rng(0)
    theta = np.zeros(CFG.total_weights)
    s, a = np.array([10.0, 30, 5]), ACTION_TABLE[0]
    theta[CODER.active_tiles(s, a)] = rng.normal(size=30)
    before = theta.copy()
    assert sarsa_update(theta, SparseTraces(), CODER, s, a, 0.0, s, a, lp) == 0
    assert np.array_equal(theta, before)


def test_two_step_trace_propagation():
    lp = LearningParams()
    g = lp.discount * lp.trace_decay
    theta = np.zeros(CFG.total_weights)
    tr = SparseTraces()
    s1, a1 = np.array([5.0, 12, 2]), ACTION_TABLE[0]
    s2, a2 = np.array([45.0, 38, 38]), ACTION_TABLE[59]
    i1, i2 = CODER.active_tiles(s1, a1), CODER.active_tiles(s2, a2)
    assert not set(i1) & set(i2)
    d1 = sarsa_update(theta, tr, CODER, s1, a1, -1.0, s2, a2, lp)
    after1 = theta[i1].copy()
    d2 = sarsa_update(theta, tr, CODER, s2, a2, -0.5, s1, a1, lp)
    assert np.allclose(theta[i1] - after1, g * 0.01 * d2)
    assert np.allclose(theta[i2], 0.01 * d2)
    assert d1 == -1.0


def test_update_uses_supplied_next_action():
    # forced exploratory a' must be the one bootstrapped from (on-policy)
    lp = LearningParams()
    theta = np.zeros(CFG.total_weights)
    s2 = np.array([30.0, 30, 10])
    theta[CODER.active_tiles(s2, ACTION_TABLE[5])] = 1.0
    s, a = np.array([10.0, 11, 1]), ACTION_TABLE[0]
    d_forced = sarsa_update(theta.copy(), SparseTraces(), CODER, s, a, 0.0, s2, ACTION_TABLE[5], lp)
    q_other = theta[CODER.active_tiles(s2, ACTION_TABLE[50])].sum()
    d_other = sarsa_update(theta.copy(), SparseTraces(), CODER, s, a, 0.0, s2, ACTION_TABLE[50], lp)
    assert d_forced == pytest.approx(lp.discount * 30)
    assert d_other == pytest.approx(lp.discount * q_other)


def test_no_bootstrap_from_absorbed():
    theta = np.ones(CFG.total_weights)
    s, a = np.array([10.0, 11, 1]), ACTION_TABLE[0]
    d = sarsa_update(theta, SparseTraces(), CODER, s, a, -1.2, s, a, LearningParams(), absorbed2=True)
    assert d == pytest.approx(-1.2 - 30)


def test_divergence_error():
    theta = np.zeros(CFG.total_weights)
    s, a = np.array([10.0, 11, 1]), ACTION_TABLE[0]
    with pytest.raises(TrainingDivergenceError):
        sarsa_update(theta, SparseTraces(), CODER, s, a, float("nan"), s, a, LearningParams())


@given(st.lists(st.tuples(st.integers(0, 59), st.floats(-1.3, 0)), min_size=1, max_size=40))
def test_traces_bounded(steps):
    lp = LearningParams()
    theta = np.zeros(CFG.total_weights)
    tr = SparseTraces()
    rng = np.random.default_rng(len(steps))
    s = rng.uniform(0, 50, 3)
    for a, r in steps:
        s2 = rng.uniform(0, 50, 3)
        sarsa_update(theta, tr, CODER, s, ACTION_TABLE[a], r, s2, ACTION_TABLE[a], lp)
        assert all(0.0 <= e <= 1.0 for e in tr.values())
        s = s2


def test_trace_floor():
    tr = SparseTraces()
    tr.replace([1, 2])
    for _ in range(2000):
        tr.decay(0.99 * 0.98)
    assert len(tr) == 0


def test_select_action_examples():
    theta = np.zeros(CFG.total_weights)
    s = np.array([20.0, 20, 20])
    rng = np.random.default_rng(0)
    counts = np.bincount([select_action(CODER, theta, s, 1.0, rng, OFF) for _ in range(100_000)], minlength=60)
    sigma = np.sqrt(100_000 / 60 * (1 - 1 / 60))
    assert np.all(np.abs(counts - 100_000 / 60) < 4 * sigma)
    ties = np.bincount([select_action(CODER, theta, s, 0.0, rng, OFF) for _ in range(30_000)], minlength=60)
    assert ties.min() > 0 and np.all(np.abs(ties - 500) < 4 * np.sqrt(500))
    theta[CODER.active_tiles(s, ACTION_TABLE[17])] = 1 / 30
    assert all(select_action(CODER, theta, s, 0.0, rng, OFF) == 17 for _ in range(100))


def test_greedy_policy_examples():
    pw = PolicyWeights.zeros(CFG)
    pol = greedy_policy(CODER, pw)
    assert pol(CabinState(20, 20, 20)) == 0
    s = np.array([33.0, 25, 12])
    pw.theta[CODER.active_tiles(s, ACTION_TABLE[17])] = 1 / 30
    assert pol(s) == 17 == select_action(CODER, pw.theta, s, 0.0, np.random.default_rng(0), OFF)


@given(st.integers(0, 2**31), st.integers(0, 29), st.floats(-100, 100))
def test_greedy_invariant_to_tiling_shift(seed, tiling, c):
    rng = np.random.default_rng(seed)
    pw = PolicyWeights(rng.normal(size=CFG.total_weights), CFG.fingerprint())
    s = rng.uniform(0, 50, 3)
    a0 = greedy_policy(CODER, pw)(s)
    lo = CODER.block_start[tiling]
    hi = CODER.block_start[tiling + 1] if tiling < 29 else CFG.total_weights
    pw.theta[lo:hi] += c
    q = CODER.q_values(pw.theta, s, OFF)
    assert greedy_policy(CODER, pw)(s) == a0 or np.isclose(q[a0], q.max())


# --- compiled loop vs reference -------------------------------------------

SHORT = EnvParams(episode=EpisodeConfig(max_steps=60))


def reference_run(theta, starts, uniforms, lp, eps, params, forced=None):
    """The generic learner on the cabin MDP, fed the same uniforms."""
    for e, start in enumerate(starts):
        def transition(s, a, absorbed, _p=params):
            tr = env_step(CabinState(*s), a, _p, absorbed)
            return tr.next_state.as_array(), tr.reward, tr.absorbed

        if forced is None:
            learn_episode(CODER, theta, start, transition, ACTION_TABLE, params.episode.max_steps, lp, eps,
                          ScriptedRng(uniforms[e]))
        else:
            tr = SparseTraces()
            s, absorbed = start, False
            for k in range(params.episode.max_steps):
                s2, r, absorbed2 = transition(s, forced[e, k], absorbed)
                sarsa_update(theta, tr, CODER, s, ACTION_TABLE[forced[e, k]], r, s2,
                             ACTION_TABLE[forced[e, k + 1]], lp, absorbed2)
                s, absorbed = s2, absorbed2


def test_kernel_matches_reference_forced():
    rng = np.random.default_rng(4)
    n = 3
    starts = np.array([sample_initial_state(rng).as_array() for _ in range(n)])
    forced = rng.integers(0, 60, (n, SHORT.episode.max_steps + 1))
    uniforms = rng.random((n, SHORT.episode.max_steps + 1, 2))
    lp = LearningParams(learning_rate=0.05)
    ref = np.zeros(CFG.total_weights)
    reference_run(ref, starts, uniforms, lp, 0.16, SHORT, forced)
    fast = np.zeros(CFG.total_weights)
    CabinKernel(SHORT, CODER).run(fast, starts, uniforms, lp, 0.16, forced)
    assert np.max(np.abs(fast - ref)) < 1e-9
    assert np.count_nonzero(ref) > 100


def test_kernel_matches_reference_selected():
    rng = np.random.default_rng(5)
    n = 3
    starts = np.array([sample_initial_state(rng).as_array() for _ in range(n)])
    uniforms = rng.random((n, SHORT.episode.max_steps + 1, 2))
    lp = LearningParams(learning_rate=0.05)
    ref = np.zeros(CFG.total_weights)
    reference_run(ref, starts, uniforms, lp, 0.3, SHORT)
    fast = np.zeros(CFG.total_weights)
    CabinKernel(SHORT, CODER).run(fast, starts, uniforms, lp, 0.3)
    assert np.max(np.abs(fast - ref)) < 1e-9


def test_kernel_evaluate_matches_python_greedy():
    rng = np.random.default_rng(6)
    pw = PolicyWeights(rng.normal(scale=0.05, size=CFG.total_weights), CFG.fingerprint())
    starts = [sample_initial_state(rng) for _ in range(4)]
    sums = CabinKernel(SHORT, CODER).evaluate(pw.theta, np.array([s.as_array() for s in starts]))
    pol = greedy_policy(CODER, pw)
    for k, st_ in enumerate(starts):
        trs = run_episode(pol, st_, SHORT)
        expect = (sum(t.reward for t in trs), sum(t.comfortable for t in trs),
                  sum(abs(t.q_h) for t in trs), sum(t.energy for t in trs))
        assert sums[k] == pytest.approx(expect, abs=1e-9)


def test_kernel_divergence_reported():
    lp = LearningParams(learning_rate=1e308, normalize_step=False)
    theta = np.zeros(CFG.total_weights)
    starts = np.array([[20.0, 20, 20]])
    u = np.random.default_rng(0).random((1, SHORT.episode.max_steps + 1, 2))
    with pytest.raises(TrainingDivergenceError):
        CabinKernel(SHORT, CODER).run(theta, starts, u, lp, 0.5)


def test_train_zero_episodes():
    w, curve = train(SHORT, LearningParams(episodes=0), scenarios=[CabinState(20, 20, 20)])
    assert not w.theta.any() and curve == []
    assert w.fingerprint == CFG.fingerprint()


def test_train_deterministic_and_chunk_invariant():
    lp = LearningParams(episodes=40, exploration_cutoff_episode=30, seed=9)
    a, ca = train(SHORT, lp, scenarios=[CabinState(30, 25, 10)], eval_every=20)
    b, cb = train(SHORT, lp, scenarios=[CabinState(30, 25, 10)], eval_every=20)
    c, _ = train(SHORT, lp, chunk=7)
    assert a.theta.tobytes() == b.theta.tobytes() == c.theta.tobytes()
    assert ca == cb and [p.episode for p in ca] == [20, 40]
    d, _ = train(SHORT, replace(lp, seed=10))
    assert d.theta.tobytes() != a.theta.tobytes()


def test_train_hook_called():
    seen = []
    train(SHORT, LearningParams(episodes=25, seed=1), hook=lambda ep, th: seen.append(ep), eval_every=10)
    assert seen == [10, 20, 25]
