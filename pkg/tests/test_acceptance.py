"""Acceptance criteria; each test prints one PASS/FAIL line before asserting."""
import math
import os
import subprocess
import sys
import time
from dataclasses import replace

import mpmath
import numpy as np
import pytest

from clssr import channel, harness, metrics, solver
from clssr.channel import LinkBudget
from clssr.scenario import Scenario
from corpus import corpus

TAUS = (1.0, 2.0, 3.0, 4.0, 5.0)


@pytest.fixture
def verdict(capsys):
    def emit(criterion: str, ok: bool, detail: str):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} {criterion}: {detail}")
        assert ok, f"{criterion}: {detail}"

    return emit


@pytest.fixture(scope="module")
def mdp_corpus():
    return corpus()


def _close(got, want, rel=1e-12):
    return math.isclose(got, want, rel_tol=rel, abs_tol=0.0 if want else 1e-300)


def test_metric_golden_suite(verdict):
    start = time.perf_counter()
    checks = [
        _close(metrics.security_rate(2e6, 1e6), 1e6),
        metrics.security_rate(1e6, 2e6) == 0.0,
        metrics.security_rate(4.2e6, 4.2e6) == 0.0,
        _close(metrics.task_security(0.005, 0.0, 1e6, 0.01), 0.995),
        _close(metrics.task_security(0.005, 0.5, 0.0, 0.01), 0.995),
        metrics.task_security(0.02, 0.5, 1e6, 0.01) == 0.0,
        _close(metrics.semantic_bit_efficiency(0.995, 16, 8), 0.995 / 128),
        _close(metrics.semantic_bit_efficiency(0.995, 16, 8), 7.7734e-3, rel=1e-4),
        metrics.semantic_bit_efficiency(0.0, 16, 8) == 0.0,
        metrics.semantic_bit_efficiency(1.0, 1, 1) == 1.0,
        _close(metrics.clssr(7.7734e-3, 1e6, 2e6), 7773.4),
        _close(metrics.clssr(7.7734e-3, 0.0, 2e6), 15546.8),
        metrics.clssr(0.0, 1e6, 2e6) == 0.0,
        metrics.clssr_multi_eve([5.0, 3.0]) == 3.0,
        metrics.clssr_multi_eve([2.5]) == 2.5,
        metrics.clssr_multi_eve([0.0, 1e6]) == 0.0,
        metrics.is_timely(16, 8, 1e6, 1e-3) is True,
        metrics.is_timely(16, 8, 0.0, 1e-3) is False,
        metrics.is_timely(16, 8, 1e5, 1e-3) is False,
    ]
    table = 0
    for user_ok in (True, False):
        for positive in (True, False):
            for eve_confused in (True, False):
                g_u = 0.005 if user_ok else 0.5
                out = metrics.task_security(g_u, 0.3 if eve_confused else 0.001, 1e6 if positive else 0.0, 0.01)
                secure = user_ok and (positive or eve_confused)
                table += out == ((1.0 - g_u) if secure else 0.0)
    rec = lambda ok: metrics.TaskRecord(None, ok, True)
    checks += [
        metrics.task_reliability([rec(True)] * 8 + [rec(False)] * 2) == 80.0,
        metrics.task_reliability([rec(True)] * 4) == 100.0,
        metrics.task_reliability([rec(False)] * 4) == 0.0,
    ]
    elapsed = time.perf_counter() - start
    ok = all(checks) and table == 8 and elapsed < 1.0
    verdict("C1 metric golden suite", ok, f"{sum(checks)}/{len(checks)} examples, {table}/8 branches, {elapsed:.3f}s")


def test_solver_oracle_equivalence(verdict, mdp_corpus):
    start = time.perf_counter()
    bound = 2e-6 / (1 - 0.9)
    vi_bad = ex_bad = enumerated = 0
    for m in mdp_corpus:
        report = solver.policy_iteration(m)
        if np.max(np.abs(report.value.v - solver.value_iteration(m, 1e-6).v)) > bound:
            vi_bad += 1
        if m.num_actions**m.num_states <= solver.EXHAUSTIVE_BUDGET:
            enumerated += 1
            v = solver.policy_evaluation(m, solver.exhaustive_policy_search(m)).v
            ex_bad += np.max(np.abs(v - report.value.v)) > bound
    elapsed = time.perf_counter() - start
    ok = len(mdp_corpus) >= 100 and vi_bad == 0 and ex_bad == 0 and elapsed < 60
    verdict(
        "C2 solver oracle equivalence",
        ok,
        f"{len(mdp_corpus)} MDPs, VI mismatches {vi_bad}, exhaustive mismatches {ex_bad}/{enumerated}, {elapsed:.1f}s",
    )


def test_policy_value_monotonicity(verdict, mdp_corpus):
    violations = 0
    for m in mdp_corpus:
        hist = solver.policy_iteration(m).value_history
        violations += sum(int(np.sum(b < a - 1e-9)) for a, b in zip(hist, hist[1:]))
    verdict("C3 per-state value monotonicity", violations == 0, f"{violations} violations over {len(mdp_corpus)} MDPs")


def test_cross_layer_dominance(verdict):
    start = time.perf_counter()
    res = harness.sweep_tau(Scenario(), TAUS, ("clss", "plss"), episodes=10_000)
    elapsed = time.perf_counter() - start
    cl = [res.row(t, "clss").mean_omega_u for t in TAUS]
    pl = [res.row(t, "plss").mean_omega_u for t in TAUS]
    dominates = all(c >= p for c, p in zip(cl, pl))
    strong = sum(c >= 1.1 * p and c > p for c, p in zip(cl, pl))
    ok = dominates and strong >= 3 and elapsed < 300
    gains = ", ".join(f"{c / p:.1f}x" if p else "inf" for c, p in zip(cl, pl))
    verdict("C4 CL-SS dominates PL-SS", ok, f"ratios per tau {gains}; >=10% at {strong}/5; {elapsed:.1f}s")


def test_reliability_and_plateau(verdict):
    finals, wins = [], 0
    details = []
    for seed in (0, 1, 2):
        sc = replace(Scenario(), seed=seed)
        assert sc.t_max == 0.01
        cl = harness.reliability_curve(sc, "clss", iterations=50, episodes=10_000)
        pl = harness.reliability_curve(sc, "plss", iterations=50, episodes=10_000)
        finals.append(cl.final)
        wins += cl.plateau_iteration() <= pl.plateau_iteration()
        details.append(f"seed {seed}: {cl.final:.2f}% at sweep {cl.plateau_iteration()} vs {pl.plateau_iteration()}")
    ok = finals[0] == 100.0 and wins == 3
    verdict("C5 reliability and plateau", ok, "; ".join(details))


def test_physical_layer_numerics(verdict):
    worst = 0.0
    for g in (0.0, 1.0, 10.0, 100.0):
        q = mpmath.erfc(mpmath.sqrt(g) / mpmath.sqrt(2)) / 2
        worst = max(worst, abs(channel.ser_qpsk(g) - float(2 * q - q * q)))
    cases = [
        (LinkBudget(noise_factor_tau=1.0), 3.981e-15),
        (LinkBudget(noise_factor_tau=2.0), 7.962e-15),
        (LinkBudget(bandwidth_hz=1.0, noise_density_dbm_hz=-30.0, noise_factor_tau=1.0), 1e-6),
    ]
    rel = max(abs(channel.noise_power(b) / want - 1) for b, want in cases)
    ok = worst <= 1e-5 and rel <= 1e-3
    verdict("C6 physical-layer numerics", ok, f"max SER error {worst:.2e}, max noise rel error {rel:.2e}")


def _cli_sweep(out, threads):
    env = {**os.environ, "CLSSR_SIM_THREADS": str(threads)}
    cmd = [sys.executable, "-m", "clssr", "sweep", "--tau", "1,2,3,4,5", "--out", str(out)]
    subprocess.run(cmd, env=env, check=True, capture_output=True)
    return (out / "sweep.csv").read_bytes()


def test_determinism(verdict, tmp_path):
    outputs = {
        (threads, rep): _cli_sweep(tmp_path / f"t{threads}r{rep}", threads) for threads in (1, 8) for rep in (0, 1)
    }
    distinct = len(set(outputs.values()))
    verdict("C7 byte-identical sweeps", distinct == 1, f"{len(outputs)} runs, {distinct} distinct sweep.csv")
