"""Policy iteration with value-iteration and brute-force oracles, plus baselines."""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .channel import Beamformer
from .mdp import Mdp

DIRECT_SOLVE_MAX_STATES = 1000
EXHAUSTIVE_BUDGET = 10**6


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class Policy:
    action_of: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.action_of, dtype=np.int64).reshape(-1)
        a.setflags(write=False)
        object.__setattr__(self, "action_of", a)

    def __len__(self) -> int:
        return len(self.action_of)

    def __getitem__(self, s):
        return self.action_of[s]

    def __eq__(self, other):
        return isinstance(other, Policy) and np.array_equal(self.action_of, other.action_of)

    @classmethod
    def constant(cls, num_states: int, action: int = 0) -> "Policy":
        return cls(np.full(num_states, action))


@dataclass(frozen=True, eq=False)
class ValueFn:
    v: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.v, dtype=float)
        if not np.all(np.isfinite(v)):
            raise ValueError("value function must be finite")
        object.__setattr__(self, "v", v)


@dataclass(frozen=True)
class SolveReport:
    policy: Policy
    value: ValueFn
    iterations: int
    value_trace: list[float]
    value_history: list[np.ndarray] = field(default_factory=list, repr=False)
    policy_history: list[Policy] = field(default_factory=list, repr=False)

    def to_json(self) -> dict:
        return {
            "policy": self.policy.action_of.tolist(),
            "value": self.value.v.tolist(),
            "iterations": self.iterations,
            "value_trace": list(self.value_trace),
        }

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2) + "\n")


def _policy_arrays(mdp: Mdp, policy: Policy) -> tuple[np.ndarray, np.ndarray]:
    s = np.arange(mdp.num_states)
    a = np.asarray(policy.action_of)
    if a.shape != (mdp.num_states,) or np.any(a < 0) or np.any(a >= mdp.num_actions):
        raise ValueError("policy must map every state to a valid action")
    return mdp.transition[s, a], mdp.reward[s, a]


def bellman_residual(mdp: Mdp, policy: Policy, v: np.ndarray) -> float:
    p, r = _policy_arrays(mdp, policy)
    return float(np.max(np.abs(v - (r + mdp.gamma * p @ v))))


def policy_evaluation(mdp: Mdp, policy: Policy, tol: float = 1e-9) -> ValueFn:
    """Solve ``v = r_pi + gamma P_pi v`` to sup-norm residual below ``tol``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    p, r = _policy_arrays(mdp, policy)
    n = mdp.num_states
    if n <= DIRECT_SOLVE_MAX_STATES:
        v = np.linalg.solve(np.eye(n) - mdp.gamma * p, r)
        # polish until the residual bound holds (usually already does)
        for _ in range(100):
            nxt = r + mdp.gamma * p @ v
            if np.max(np.abs(nxt - v)) < tol:
                break
            v = nxt
        return ValueFn(v)
    v = np.zeros(n)
    while True:
        nxt = r + mdp.gamma * p @ v
        if np.max(np.abs(nxt - v)) < tol * (1 - mdp.gamma):
            return ValueFn(nxt)
        v = nxt


def q_from_v(mdp: Mdp, v) -> np.ndarray:
    """``q(s,a) = r(s,a) + gamma * sum_s' p(s'|s,a) v(s')``."""
    v = np.asarray(v, dtype=float)
    return mdp.reward + mdp.gamma * np.einsum("ijk,k->ij", mdp.transition, v)


def policy_improvement(q) -> Policy:
    """Greedy policy; ``argmax`` already breaks ties toward the lowest index."""
    return Policy(np.argmax(np.asarray(q), axis=1))


def policy_iteration(
    mdp: Mdp, tol: float = 1e-9, initial: Policy | None = None, max_iter: int = 10_000
) -> SolveReport:
    policy = Policy.constant(mdp.num_states) if initial is None else initial
    values: list[np.ndarray] = []
    policies: list[Policy] = [policy]
    iterations = 0
    while True:
        v = policy_evaluation(mdp, policy, tol).v
        values.append(v)
        q = q_from_v(mdp, v)
        greedy = policy_improvement(q)
        iterations += 1
        # switching only on a real gain keeps float noise from cycling near-ties
        current = q[np.arange(mdp.num_states), policy.action_of]
        gain = q[np.arange(mdp.num_states), greedy.action_of] - current
        scale = max(1.0, float(np.max(np.abs(q))))
        improved = gain > 1e-12 * scale
        if not np.any(improved) or iterations >= max_iter:
            break
        policy = Policy(np.where(improved, greedy.action_of, policy.action_of))
        policies.append(policy)
    return SolveReport(
        policy=policy,
        value=ValueFn(values[-1]),
        iterations=iterations,
        value_trace=[float(np.mean(x)) for x in values],
        value_history=values,
        policy_history=policies,
    )


def value_iteration(mdp: Mdp, tol: float = 1e-6, max_iter: int = 1_000_000) -> ValueFn:
    """Iterate the Bellman optimality operator until successive iterates differ by < tol."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    v = np.zeros(mdp.num_states)
    for _ in range(max_iter):
        nxt = np.max(q_from_v(mdp, v), axis=1)
        if np.max(np.abs(nxt - v)) < tol:
            return ValueFn(nxt)
        v = nxt
    raise RuntimeError("value iteration did not converge")


def greedy_policy(mdp: Mdp, v) -> Policy:
    return policy_improvement(q_from_v(mdp, v))


def exhaustive_policy_search(mdp: Mdp, budget: int = EXHAUSTIVE_BUDGET, batch: int = 4096) -> Policy:
    """Evaluate every deterministic policy and return the best one.

    The optimal policy dominates all others state-wise, so the total value
    is a sufficient score; earlier enumeration order wins ties.
    """
    n, m = mdp.num_states, mdp.num_actions
    if m**n > budget:
        raise BudgetExceeded(f"|A|^|S| = {m}^{n} exceeds the enumeration budget of {budget}")
    eye = np.eye(n)
    idx = np.arange(n)
    best_score, best = -np.inf, None
    it = itertools.product(range(m), repeat=n)
    while True:
        chunk = np.array(list(itertools.islice(it, batch)), dtype=np.int64)
        if chunk.size == 0:
            break
        p = mdp.transition[idx, chunk]  # (B, S, S)
        r = mdp.reward[idx, chunk]  # (B, S)
        v = np.linalg.solve(eye - mdp.gamma * p, r[..., np.newaxis])[..., 0]
        scores = v.sum(axis=1)
        k = int(np.argmax(scores))
        if scores[k] > best_score + 1e-12 * max(1.0, abs(scores[k])):
            best_score, best = float(scores[k]), chunk[k]
    return Policy(best)


# ---- baselines -----------------------------------------------------------------------


def plss_baseline(omega_pl: np.ndarray, r_sec_min: np.ndarray) -> Policy:
    """Physical-layer-only choice per state.

    Maximizes the worst-case secrecy rate; among equally good actions the
    physical-layer CLSSR decides, then the lowest index. Inputs are (S, A).
    """
    r_sec_min = np.asarray(r_sec_min, dtype=float)
    omega_pl = np.asarray(omega_pl, dtype=float)
    out = []
    for rs, om in zip(r_sec_min, omega_pl):
        top = np.flatnonzero(rs == rs.max())
        out.append(int(top[np.argmax(om[top])]))
    return Policy(out)


@dataclass(frozen=True)
class AoTrace:
    policy: Policy
    rounds: np.ndarray  # rounds used per state
    reward_trace: list[np.ndarray]  # per round, reward of each state's current action
    policies: list[Policy]  # starting point, then the policy after each round


def ao_baseline(reward: np.ndarray, num_beams: int, num_bits: int, max_rounds: int = 20, start: tuple[int, int] = (0, 0)) -> AoTrace:
    """Alternate best beam given bits and best bits given beam, per state.

    ``reward`` is (S, A) with action index ``beam * num_bits + bit``.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be >= 1")
    r = np.asarray(reward, dtype=float).reshape(-1, num_beams, num_bits)
    n = r.shape[0]
    beam = np.full(n, start[0])
    bit = np.full(n, start[1])
    rows = np.arange(n)
    rounds = np.zeros(n, dtype=np.int64)
    active = np.ones(n, dtype=bool)
    trace = [r[rows, beam, bit].copy()]
    policies = [Policy(beam * num_bits + bit)]
    for _ in range(max_rounds):
        new_beam = np.argmax(r[rows, :, bit], axis=1)
        # keep the incumbent on ties so the reward is nondecreasing
        keep = r[rows, new_beam, bit] <= r[rows, beam, bit]
        new_beam = np.where(keep, beam, new_beam)
        new_bit = np.argmax(r[rows, new_beam, :], axis=1)
        keep = r[rows, new_beam, new_bit] <= r[rows, new_beam, bit]
        new_bit = np.where(keep, bit, new_bit)
        changed = (new_beam != beam) | (new_bit != bit)
        rounds += active
        beam = np.where(active, new_beam, beam)
        bit = np.where(active, new_bit, bit)
        active &= changed
        trace.append(r[rows, beam, bit].copy())
        policies.append(Policy(beam * num_bits + bit))
        if not np.any(active):
            break
    return AoTrace(policies[-1], rounds, trace, policies)


def check_feasibility(
    beam: Beamformer,
    bits: int,
    cfg,
    xi: float,
    separation: np.ndarray | None = None,
) -> bool:
    """Power limit, bit range and (when margins are given) mean Eve distortion above the user's."""
    if beam.radiated_power() > xi * (1 + 1e-12):
        return False
    if not cfg.b_min <= bits <= cfg.b_max:
        return False
    if separation is not None and not np.all(np.asarray(separation) > 0):
        return False
    return True
