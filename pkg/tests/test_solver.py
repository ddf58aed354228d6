import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from clssr import solver
from clssr.channel import Beamformer
from clssr.mdp import Mdp
from clssr.semantics import SemanticConfig
from clssr.solver import BudgetExceeded, Policy
from corpus import corpus, random_mdp


def _mdp(p, r, gamma=0.9):
    return Mdp(np.asarray(p, float), np.asarray(r, float), gamma)


# ---- evaluation ----------------------------------------------------------------------


def test_single_state_geometric_series():
    v = solver.policy_evaluation(_mdp([[[1.0]]], [[1.0]]), Policy([0]))
    assert v.v[0] == pytest.approx(10.0, abs=1e-9)


def test_zero_reward_zero_value():
    m = random_mdp(3).with_reward(np.zeros((random_mdp(3).num_states, random_mdp(3).num_actions)))
    assert np.all(solver.policy_evaluation(m, Policy.constant(m.num_states)).v == 0.0)


def test_two_state_swap():
    m = _mdp([[[0.0, 1.0]], [[1.0, 0.0]]], [[1.0], [0.0]], gamma=0.5)
    v = solver.policy_evaluation(m, Policy([0, 0]), tol=1e-12)
    # v0 = 1 + v1/2 and v1 = v0/2 give v = (4/3, 2/3)
    assert v.v == pytest.approx([4 / 3, 2 / 3], abs=1e-12)
    assert solver.bellman_residual(m, Policy([0, 0]), np.array([1.2, 0.4])) > 0.1


@pytest.mark.parametrize("seed", range(0, 120, 7))
def test_evaluation_residual_bound(seed):
    m = random_mdp(seed)
    pol = Policy(np.random.default_rng(seed).integers(m.num_actions, size=m.num_states))
    v = solver.policy_evaluation(m, pol, tol=1e-9)
    assert solver.bellman_residual(m, pol, v.v) < 1e-9 * max(1.0, np.max(np.abs(v.v)))


def test_evaluation_rejects_bad_policy():
    m = random_mdp(5)
    with pytest.raises(ValueError):
        solver.policy_evaluation(m, Policy([m.num_actions] * m.num_states))


# ---- q and improvement ---------------------------------------------------------------


def test_q_of_zero_value_is_reward():
    m = random_mdp(8)
    assert np.array_equal(solver.q_from_v(m, np.zeros(m.num_states)), m.reward)


def test_q_single_state_self_loop():
    m = _mdp([[[1.0], [1.0]]], [[2.0, 3.0]])
    assert solver.q_from_v(m, [5.0])[0] == pytest.approx([6.5, 7.5])


def test_q_matches_nested_loops():
    rng = np.random.default_rng(11)
    p = rng.dirichlet(np.ones(3), size=(3, 2))
    r = rng.normal(size=(3, 2))
    m = _mdp(p, r)
    v = rng.normal(size=3)
    oracle = np.zeros((3, 2))
    for s in range(3):
        for a in range(2):
            oracle[s, a] = r[s, a] + 0.9 * sum(p[s, a, t] * v[t] for t in range(3))
    assert solver.q_from_v(m, v) == pytest.approx(oracle, abs=1e-12)


def test_improvement_examples():
    assert solver.policy_improvement([[1, 3, 2]]).action_of.tolist() == [1]
    assert solver.policy_improvement([[5, 5]]).action_of.tolist() == [0]


@given(st.lists(st.lists(st.integers(-3, 3), min_size=3, max_size=3), min_size=1, max_size=6))
def test_improvement_is_first_argmax(q):
    got = solver.policy_improvement(q).action_of.tolist()
    assert got == [row.index(max(row)) for row in q]


# ---- policy iteration ----------------------------------------------------------------


def test_single_action_converges_in_one_step():
    m = random_mdp(4, max_actions=1)
    assert m.num_actions == 1
    assert solver.policy_iteration(m).iterations == 1


def _enumerate(m):
    best, best_v = None, None
    for acts in itertools.product(range(m.num_actions), repeat=m.num_states):
        v = solver.policy_evaluation(m, Policy(acts)).v
        if best_v is None or v.sum() > best_v.sum() + 1e-12:
            best, best_v = acts, v
    return best, best_v


def test_two_by_two_crafted():
    p = np.zeros((2, 2, 2))
    p[:, 0, 0] = 1.0  # action 0 goes to state 0
    p[:, 1, 1] = 1.0  # action 1 goes to state 1
    r = np.array([[0.0, -1.0], [2.0, 1.0]])
    m = _mdp(p, r)
    report = solver.policy_iteration(m)
    best, best_v = _enumerate(m)
    # paying 1 once to reach the state that pays 1 per step beats staying at 0
    assert tuple(report.policy.action_of) == best == (1, 1)
    assert report.value.v == pytest.approx(best_v, abs=1e-9)
    assert solver.exhaustive_policy_search(m) == Policy(best)


def test_value_iteration_constant_reward():
    m = random_mdp(9).with_reward(np.full((random_mdp(9).num_states, random_mdp(9).num_actions), 3.0))
    assert solver.value_iteration(m, 1e-9).v == pytest.approx(30.0, abs=1e-7)


def test_value_iteration_contracts():
    m = random_mdp(10)
    v, gaps = np.zeros(m.num_states), []
    for _ in range(30):
        nxt = np.max(solver.q_from_v(m, v), axis=1)
        gaps.append(np.max(np.abs(nxt - v)))
        v = nxt
    for a, b in zip(gaps, gaps[1:]):
        assert b <= m.gamma * a + 1e-9


def test_exhaustive_examples():
    m = _mdp([[[1.0], [1.0], [1.0]]], [[1.0, 4.0, 2.0]])
    assert solver.exhaustive_policy_search(m).action_of.tolist() == [1]
    with pytest.raises(BudgetExceeded):
        solver.exhaustive_policy_search(_mdp(np.full((20, 10, 20), 1 / 20), np.zeros((20, 10))))


@pytest.mark.parametrize("seed", range(0, 120, 5))
def test_policy_iteration_matches_oracles(seed):
    m = random_mdp(seed)
    report = solver.policy_iteration(m)
    bound = 2e-6 / (1 - m.gamma)
    assert np.max(np.abs(report.value.v - solver.value_iteration(m, 1e-6).v)) <= bound
    assert report.iterations <= m.num_states * m.num_actions + 1
    if m.num_actions**m.num_states <= 20_000:
        v = solver.policy_evaluation(m, solver.exhaustive_policy_search(m)).v
        assert np.max(np.abs(v - report.value.v)) <= bound


def test_policy_values_never_decrease_on_corpus():
    for m in corpus():
        hist = solver.policy_iteration(m).value_history
        for a, b in zip(hist, hist[1:]):
            assert np.all(b >= a - 1e-9)


def test_solve_report_json():
    report = solver.policy_iteration(random_mdp(2))
    doc = report.to_json()
    assert set(doc) == {"policy", "value", "iterations", "value_trace"}
    assert len(doc["policy"]) == len(doc["value"]) == random_mdp(2).num_states


# ---- baselines -----------------------------------------------------------------------


def test_plss_prefers_secrecy_then_rate():
    r_sec = np.array([[0.0, 2.0, 2.0], [0.0, 0.0, 0.0]])
    omega = np.array([[9.0, 1.0, 3.0], [0.0, 0.0, 0.0]])
    assert solver.plss_baseline(omega, r_sec).action_of.tolist() == [2, 0]


def test_ao_single_bit_choice_is_one_beam_sweep():
    r = np.array([[1.0, 5.0, 3.0]])
    trace = solver.ao_baseline(r, num_beams=3, num_bits=1)
    assert trace.policy.action_of.tolist() == [1]
    assert trace.rounds.tolist() == [2]  # one sweep, then a round confirming the fixed point


@given(st.integers(0, 10_000), st.integers(1, 5), st.integers(1, 4), st.integers(1, 6))
def test_ao_properties(seed, beams, bits, n):
    rng = np.random.default_rng(seed)
    r = rng.normal(size=(n, beams * bits))
    trace = solver.ao_baseline(r, beams, bits)
    got = r[np.arange(n), trace.policy.action_of]
    assert np.all(got <= r.max(axis=1))
    for a, b in zip(trace.reward_trace, trace.reward_trace[1:]):
        assert np.all(b >= a)
    grid = r.reshape(n, beams, bits)
    for s, a in enumerate(trace.policy.action_of):
        i, j = divmod(int(a), bits)
        assert grid[s, i, j] >= grid[s, :, j].max() and grid[s, i, j] >= grid[s, i, :].max()


def test_ao_rejects_zero_rounds():
    with pytest.raises(ValueError):
        solver.ao_baseline(np.zeros((1, 1)), 1, 1, max_rounds=0)


def test_feasibility_checks():
    cfg = SemanticConfig()
    assert solver.check_feasibility(Beamformer([1, 0], 0.1), 8, cfg, xi=0.1)
    assert not solver.check_feasibility(Beamformer([1, 0], 0.1), cfg.b_max + 1, cfg, xi=0.1)
    assert not solver.check_feasibility(Beamformer([1, 0], 0.2), 8, cfg, xi=0.1)
    assert not solver.check_feasibility(Beamformer([1, 0], 0.1), 8, cfg, xi=0.1, separation=[0.1, -0.01])
