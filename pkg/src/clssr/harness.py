"""Scenario composition, Monte-Carlo task runs, tau sweeps and reliability curves."""
from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import channel, metrics
from .mdp import (
    SCHEMES,
    ActionSpace,
    Mdp,
    action_space,
    build_mdp,
    evaluate_cells,
    link_quantizers,
    representative_channels,
)
from .pipeline import LinkEval, evaluate_links
from .pretrain import InfeasibleSemanticConfig, draw_links, pretrain_semantic
from .scenario import Scenario
from .solver import Policy, SolveReport, ao_baseline, plss_baseline, policy_iteration

SWEEP_COLUMNS = (
    "tau",
    "scheme",
    "mean_omega_u",
    "task_reliability_pct",
    "mean_r_u",
    "mean_r_sec",
    "feasible",
)
RELIABILITY_COLUMNS = ("scheme", "iteration", "task_reliability_pct")
THREADS_ENV = "CLSSR_SIM_THREADS"

log = logging.getLogger(__name__)


def worker_count(threads: int | None = None) -> int:
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


@dataclass(frozen=True)
class Prepared:
    """Everything a scheme needs: pretrained config, actions and per-cell metrics.

    ``scenario`` carries the pretrained semantic config; ``base`` is the
    scenario as given.
    """

    base: Scenario
    scenario: Scenario
    reps: list = field(repr=False)
    actions: ActionSpace = field(repr=False)
    cells_cl: LinkEval = field(repr=False)
    cells_pl: LinkEval = field(repr=False)

    def tile(self, x: np.ndarray) -> np.ndarray:
        """Per-channel-state array (C, A, ...) -> per-state (S, A, ...)."""
        k = self.scenario.states.codeword_classes
        return np.concatenate([x] * k, axis=0)

    def mdp(self, scheme: str) -> Mdp:
        return build_mdp(self.scenario, scheme=scheme, reps=self.reps, actions=self.actions)

    def app_layer(self, scheme: str) -> bool:
        return scheme != "plss"


def prepare(scenario: Scenario, pretrain: bool = True) -> Prepared:
    """Pretrain the semantic noise and tabulate every (channel state, action) cell.

    Raises InfeasibleSemanticConfig when no noise level on the grid works.
    """
    tuned = scenario
    if pretrain:
        tuned = replace(scenario, semantic=pretrain_semantic(scenario.pretrain_grid, scenario))
        log.info("tau=%g: semantic noise %g, b=%d", scenario.tau, tuned.semantic.delta_z, tuned.semantic.b)
    reps = representative_channels(tuned)
    actions = action_space(tuned, reps)
    return Prepared(
        base=scenario,
        scenario=tuned,
        reps=reps,
        actions=actions,
        cells_cl=evaluate_cells(tuned, actions, reps, app_layer=True),
        cells_pl=evaluate_cells(tuned, actions, reps, app_layer=False),
    )


def plss_policy(prep: Prepared) -> Policy:
    r_sec_min = prep.tile(np.min(prep.cells_pl.r_sec, axis=-1))
    return plss_baseline(prep.tile(prep.cells_pl.omega_u), r_sec_min)


def ao_policy(prep: Prepared, max_rounds: int = 20):
    mdp = prep.mdp("ao")
    return ao_baseline(mdp.reward, prep.actions.num_beams, prep.actions.num_bits, max_rounds)


def solve(prep: Prepared, scheme: str) -> tuple[Policy, SolveReport | None]:
    if scheme == "clss":
        report = policy_iteration(prep.mdp("clss"))
        return report.policy, report
    if scheme == "plss":
        return plss_policy(prep), None
    if scheme == "ao":
        return ao_policy(prep).policy, None
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


# ---- Monte-Carlo runs ----------------------------------------------------------------


@dataclass(frozen=True)
class EpisodeRun:
    states: np.ndarray
    actions: np.ndarray
    codewords: np.ndarray
    links: LinkEval

    @property
    def secure(self) -> np.ndarray:
        return self.links.secure

    @property
    def timely(self) -> np.ndarray:
        return self.links.timely

    def reliability(self) -> float:
        return 100.0 * float(np.mean(self.secure & self.timely))

    def records(self) -> list[metrics.TaskRecord]:
        return [metrics.task_record(self.links.snapshot(i)) for i in range(len(self.states))]


def walk_source(scenario: Scenario, steps: int, rng: np.random.Generator) -> np.ndarray:
    """Codeword classes visited by the source chain, started from stationarity."""
    p = scenario.source.transition
    cum = np.cumsum(p, axis=1)
    u = rng.random(steps)
    c = np.empty(steps, dtype=np.int64)
    c[0] = min(int(np.searchsorted(np.cumsum(scenario.source.stationary()), u[0], side="right")), p.shape[0] - 1)
    for t in range(1, steps):
        c[t] = min(int(np.searchsorted(cum[c[t - 1]], u[t], side="right")), p.shape[0] - 1)
    return c


def simulate(
    scenario: Scenario,
    policy: Policy,
    steps: int,
    seed: int | None = None,
    app_layer: bool = True,
    actions: ActionSpace | None = None,
) -> EpisodeRun:
    """Run ``steps`` tasks under ``policy`` on fresh continuous fading draws."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    seed = scenario.seed if seed is None else seed
    actions = action_space(scenario) if actions is None else actions
    sc = replace(scenario, seed=seed)
    codewords = walk_source(sc, steps, sc.rng("source"))
    h_u, h_e = draw_links(sc, steps, purpose="episode")
    q = link_quantizers(sc)
    bin_u = q[0].index(h_u)
    bins_e = np.stack([q[i + 1].index(h_e[:, i]) for i in range(sc.num_eves)], axis=-1)
    states = np.asarray(sc.states.index(sc.num_eves, codewords, bin_u, bins_e)).reshape(steps)
    a = np.asarray(policy.action_of)[states]
    w, p, bits = actions.arrays()
    links = evaluate_links(
        h_u,
        h_e,
        w[a],
        p[a],
        bits[a],
        sc.semantic,
        sc.budget.bandwidth_hz,
        channel.noise_power(sc.budget),
        sc.t_max,
        app_layer=app_layer,
        strict=sc.strict,
    )
    return EpisodeRun(states, a, codewords, links)


def run_episode(
    scenario: Scenario,
    policy: Policy,
    steps: int,
    seed: int | None = None,
    app_layer: bool = True,
) -> list[metrics.TaskRecord]:
    return simulate(scenario, policy, steps, seed, app_layer).records()


# ---- sweeps --------------------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    tau: float
    scheme: str
    mean_omega_u: float
    task_reliability_pct: float
    mean_r_u: float
    mean_r_sec: float
    feasible: bool = True

    def as_list(self) -> list:
        return [self.tau, self.scheme, self.mean_omega_u, self.task_reliability_pct,
                self.mean_r_u, self.mean_r_sec, int(self.feasible)]


@dataclass(frozen=True)
class SweepResult:
    rows: list[SweepRow]
    episodes: int
    seed: int

    def row(self, tau: float, scheme: str) -> SweepRow:
        for r in self.rows:
            if r.tau == tau and r.scheme == scheme:
                return r
        raise KeyError((tau, scheme))

    def to_csv(self) -> str:
        return csv_text(SWEEP_COLUMNS, [r.as_list() for r in self.rows])

    def to_json(self) -> dict:
        return {
            "episodes": self.episodes,
            "seed": self.seed,
            "rows": [dict(zip(SWEEP_COLUMNS, r.as_list())) for r in self.rows],
        }


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def run_cell(scenario: Scenario, tau: float, scheme: str, episodes: int, seed: int) -> SweepRow:
    sc = scenario.with_tau(tau)
    try:
        prep = prepare(sc, pretrain=scheme != "plss")
    except InfeasibleSemanticConfig as exc:
        log.warning("tau=%g %s: %s", tau, scheme, exc)
        return SweepRow(float(tau), scheme, 0.0, 0.0, 0.0, 0.0, feasible=False)
    policy, _ = solve(prep, scheme)
    run = simulate(prep.scenario, policy, episodes, seed, prep.app_layer(scheme), prep.actions)
    return SweepRow(
        tau=float(tau),
        scheme=scheme,
        mean_omega_u=float(np.mean(run.links.omega_u)),
        task_reliability_pct=run.reliability(),
        mean_r_u=float(np.mean(run.links.r_u)),
        mean_r_sec=float(np.mean(np.min(run.links.r_sec, axis=-1))),
    )


def sweep_tau(
    scenario: Scenario,
    taus,
    schemes=SCHEMES,
    episodes: int | None = None,
    seed: int | None = None,
    threads: int | None = None,
) -> SweepResult:
    taus = [float(t) for t in taus]
    schemes = list(schemes)
    if not taus or not schemes:
        raise ValueError("need at least one tau and one scheme")
    for s in schemes:
        if s not in SCHEMES:
            raise ValueError(f"unknown scheme {s!r}")
    episodes = scenario.episodes if episodes is None else episodes
    seed = scenario.seed if seed is None else seed
    cells = [(t, s) for t in taus for s in schemes]
    with ThreadPoolExecutor(max_workers=worker_count(threads)) as pool:
        rows = list(pool.map(lambda c: run_cell(scenario, c[0], c[1], episodes, seed), cells))
    return SweepResult(rows, episodes, seed)


# ---- reliability curves --------------------------------------------------------------


@dataclass(frozen=True)
class ReliabilityCurve:
    scheme: str
    points: list[tuple[int, float]]

    @property
    def final(self) -> float:
        return self.points[-1][1]

    def plateau_iteration(self) -> int:
        """First iteration from which the reliability stays at its final value."""
        it = self.points[-1][0]
        for i, r in reversed(self.points):
            if r != self.final:
                break
            it = i
        return it


def scheme_policies(prep: Prepared, scheme: str, iterations: int) -> list[Policy]:
    """Greedy policy after each improvement sweep (or AO round)."""
    if scheme == "ao":
        trace = ao_baseline(
            prep.mdp("ao").reward, prep.actions.num_beams, prep.actions.num_bits, max_rounds=iterations
        )
        return trace.policies[1:] or trace.policies
    report = policy_iteration(prep.mdp(scheme), max_iter=iterations)
    hist = report.policy_history
    # sweep i yields policy_history[i]; the last sweep keeps the policy unchanged
    return [hist[min(i, len(hist) - 1)] for i in range(1, report.iterations + 1)]


def reliability_curve(
    scenario: Scenario,
    scheme: str,
    iterations: int = 50,
    episodes: int | None = None,
    seed: int | None = None,
    prep: Prepared | None = None,
) -> ReliabilityCurve:
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    prep = prepare(scenario, pretrain=scheme != "plss") if prep is None else prep
    episodes = scenario.episodes if episodes is None else episodes
    points = []
    for i, pol in enumerate(scheme_policies(prep, scheme, iterations), start=1):
        run = simulate(prep.scenario, pol, episodes, seed, prep.app_layer(scheme), prep.actions)
        points.append((i, run.reliability()))
    return ReliabilityCurve(scheme, points)


def curves_csv(curves: list[ReliabilityCurve]) -> str:
    return csv_text(RELIABILITY_COLUMNS, [[c.scheme, i, r] for c in curves for i, r in c.points])


def write_sweep(result: SweepResult, out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text(result.to_csv())
    (out / "sweep.json").write_text(json.dumps(result.to_json(), indent=2) + "\n")


def write_curves(curves: list[ReliabilityCurve], out_dir: str | Path) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "reliability.csv").write_text(curves_csv(curves))
    doc = {c.scheme: [{"iteration": i, "task_reliability_pct": r} for i, r in c.points] for c in curves}
    (out / "reliability.json").write_text(json.dumps(doc, indent=2) + "\n")
