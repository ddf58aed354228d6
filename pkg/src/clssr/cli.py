"""Command-line front end.

Exit codes: 0 success, 1 oracle property failure, 2 config error,
3 infeasible semantic pretraining, 4 enumeration budget exceeded.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness, metrics, solver
from .mdp import SCHEMES, reward
from .pretrain import InfeasibleSemanticConfig
from .scenario import ConfigError, Scenario, default_config, load_scenario

EXIT_OK, EXIT_PROPERTY, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_BUDGET = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


def _scenario(args, tau_override: bool = True) -> Scenario:
    sc = load_scenario(args.config) if args.config else Scenario()
    changes = {}
    if getattr(args, "episodes", None) is not None:
        if args.episodes < 1:
            raise UsageError("--episodes must be >= 1")
        changes["episodes"] = args.episodes
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    sc = replace(sc, **changes) if changes else sc
    tau = getattr(args, "tau", None)
    if tau_override and tau is not None:
        if tau < 1:
            raise UsageError("--tau must be >= 1")
        sc = sc.with_tau(tau)
    return sc


def _tau_list(text: str) -> list[float]:
    items = [t.strip() for t in text.split(",") if t.strip()]
    if not items:
        raise UsageError("--tau needs at least one value")
    try:
        taus = [float(t) for t in items]
    except ValueError:
        raise UsageError(f"--tau: cannot parse {text!r}") from None
    if any(t < 1 for t in taus):
        raise UsageError("--tau values must be >= 1")
    return taus


# ---- run -----------------------------------------------------------------------------


def cmd_run(args) -> int:
    sc = _scenario(args)
    scheme = args.scheme
    prep = harness.prepare(sc, pretrain=scheme != "plss")
    policy, report = harness.solve(prep, scheme)
    mdp = prep.mdp(scheme)
    if report is None:
        v = solver.policy_evaluation(mdp, policy)
        report = solver.SolveReport(policy, v, 1, [float(np.mean(v.v))])
    run = harness.simulate(prep.scenario, policy, prep.scenario.episodes, None, prep.app_layer(scheme), prep.actions)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = [run.links.snapshot(i).csv_row(prep.scenario.tau, scheme) for i in range(len(run.states))]
    (out / "snapshots.csv").write_text(harness.csv_text(metrics.SNAPSHOT_COLUMNS, rows))
    doc = report.to_json()
    doc.update(
        scheme=scheme,
        scenario_id=prep.scenario.scenario_id,
        delta_z=prep.scenario.semantic.delta_z,
        task_reliability_pct=run.reliability(),
        mean_omega_u=float(np.mean(run.links.omega_u)),
    )
    (out / "solve_report.json").write_text(json.dumps(doc, indent=2) + "\n")
    if args.dump_mdp:
        mdp.dump(out / "mdp.json")
    print(f"{scheme}: reliability {run.reliability():.2f}%  mean omega_u {doc['mean_omega_u']:.6g} sut/s")
    return EXIT_OK


# ---- sweep / curves ------------------------------------------------------------------


def cmd_sweep(args) -> int:
    taus = _tau_list(args.tau)
    sc = _scenario(args, tau_override=False)
    result = harness.sweep_tau(sc, taus, SCHEMES, sc.episodes, sc.seed)
    harness.write_sweep(result, args.out)
    sys.stdout.write(result.to_csv())
    return EXIT_OK


def cmd_curves(args) -> int:
    sc = _scenario(args)
    curves = [harness.reliability_curve(sc, s, args.iterations) for s in SCHEMES]
    harness.write_curves(curves, args.out)
    sys.stdout.write(harness.curves_csv(curves))
    return EXIT_OK


# ---- oracle --------------------------------------------------------------------------


def oracle_checks(sc: Scenario, skip_exhaustive: bool, tamper_reward: bool = False, budget: int = solver.EXHAUSTIVE_BUDGET):
    """Yield (name, passed, detail) for each oracle property of the CL-SS solve."""
    prep = harness.prepare(sc)
    mdp = prep.mdp("clss")
    if mdp.num_actions ** mdp.num_states > budget and not skip_exhaustive:
        raise solver.BudgetExceeded(
            f"|A|^|S| = {mdp.num_actions}^{mdp.num_states} exceeds {budget}; pass --skip-exhaustive"
        )
    if tamper_reward:
        r = mdp.reward.copy()
        r[0, 0] += 1.0 + abs(r[0, 0])
        mdp = mdp.with_reward(r)

    rng = np.random.default_rng(0)
    cells = [(0, 0)] + [
        (int(rng.integers(mdp.num_states)), int(rng.integers(mdp.num_actions))) for _ in range(7)
    ]
    worst = max(
        abs(mdp.reward[s, a] - reward(s, a, prep.scenario, reps=prep.reps, actions=prep.actions))
        / max(1.0, abs(mdp.reward[s, a]))
        for s, a in cells
    )
    yield "reward_tensor_matches_pipeline", worst < 1e-9, f"max rel diff {worst:.3g}"

    report = solver.policy_iteration(mdp)
    vi = solver.value_iteration(mdp, 1e-6)
    gap = float(np.max(np.abs(report.value.v - vi.v)))
    bound = 2e-6 / (1 - mdp.gamma)
    yield "policy_iteration_matches_value_iteration", gap <= bound, f"gap {gap:.3g} <= {bound:.3g}"

    drops = [float(np.min(b - a)) for a, b in zip(report.value_history, report.value_history[1:])]
    smallest = min(drops, default=0.0)
    yield "policy_values_monotone", smallest >= -1e-9, f"smallest per-state step {smallest:.3g}"

    if not skip_exhaustive:
        best = solver.exhaustive_policy_search(mdp, budget)
        v_best = solver.policy_evaluation(mdp, best).v
        gap = float(np.max(np.abs(v_best - report.value.v)))
        yield "policy_iteration_matches_exhaustive", gap <= bound, f"gap {gap:.3g}"

    cl = prep.tile(np.max(prep.cells_cl.omega_u, axis=1))
    pl = prep.tile(np.max(prep.cells_pl.omega_u, axis=1))
    short = float(np.min(cl - pl))
    yield "clss_dominates_plss_per_state", short >= 0, f"min (CL-SS - PL-SS) {short:.6g}"

    ao = harness.ao_policy(prep)
    ao_r = mdp.reward[np.arange(mdp.num_states), ao.policy.action_of]
    slack = float(np.min(np.max(mdp.reward, axis=1) - ao_r))
    yield "ao_below_per_state_maximum", slack >= -1e-9, f"min slack {slack:.3g}"


def cmd_oracle(args) -> int:
    sc = _scenario(args)
    failed = []
    for name, ok, detail in oracle_checks(sc, args.skip_exhaustive, args.tamper_reward):
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        if not ok:
            failed.append(name)
    if failed:
        print(f"failing properties: {', '.join(failed)}")
        return EXIT_PROPERTY
    return EXIT_OK


def cmd_default_config(args) -> int:
    print(json.dumps(default_config(), indent=2))
    return EXIT_OK


# ---- entry point ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clssr-sim", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, tau_list=False):
        sp.add_argument("--config", help="scenario JSON (defaults fill missing fields)")
        sp.add_argument("--episodes", type=int, help="tasks simulated per cell")
        sp.add_argument("--seed", type=int)
        if tau_list:
            sp.add_argument("--tau", default="1,2,3,4,5", help="comma-separated noise factors")
        else:
            sp.add_argument("--tau", type=float, help="noise factor override")

    sp = sub.add_parser("run", help="solve one scheme and simulate it")
    common(sp)
    sp.add_argument("--scheme", choices=("clss", "plss", "ao"), default="clss")
    sp.add_argument("--out", default="out")
    sp.add_argument("--dump-mdp", action="store_true", help="also write mdp.json")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("sweep", help="all schemes across noise factors; writes sweep.csv")
    common(sp, tau_list=True)
    sp.add_argument("--out", default="out")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("curves", help="reliability per improvement sweep; writes reliability.csv")
    common(sp)
    sp.add_argument("--iterations", type=int, default=50)
    sp.add_argument("--out", default="out")
    sp.set_defaults(func=cmd_curves)

    sp = sub.add_parser("oracle", help="cross-check the solver against its oracles")
    common(sp)
    sp.add_argument("--skip-exhaustive", action="store_true")
    sp.add_argument("--tamper-reward", action="store_true", help=argparse.SUPPRESS)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("default-config", help="print the default scenario config")
    sp.set_defaults(func=cmd_default_config)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleSemanticConfig as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except solver.BudgetExceeded as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
