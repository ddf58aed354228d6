"""Offline choice of the semantic noise level.

Stands in for pretraining the semantic coding networks: the noise level is
picked once per scenario, before any resource allocation, by maximizing the
Monte-Carlo mean CLSSR under maximum-ratio transmission at full power while
keeping the eavesdroppers' mean distortion above the user's.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channel import noise_power, sample_channel
from .pipeline import evaluate_links
from .scenario import Scenario
from .semantics import SemanticConfig


class InfeasibleSemanticConfig(RuntimeError):
    """No grid point keeps the eavesdroppers worse off than the user."""


@dataclass(frozen=True)
class GridPoint:
    delta_z: float
    b: int
    mean_omega_u: float
    mean_g_user: float
    mean_g_eve: tuple[float, ...]

    @property
    def feasible(self) -> bool:
        return all(g > self.mean_g_user for g in self.mean_g_eve)


def draw_links(scenario: Scenario, count: int, purpose: str = "pretrain"):
    """Independent user and Eve channel draws, shapes (N, rx, tx) and (N, E, rx, tx)."""
    rng = scenario.rng(purpose)
    g, m, b = scenario.geometry, scenario.mode, scenario.budget
    h_u = sample_channel(rng, g, 0, m, b, size=count)
    h_e = np.stack(
        [sample_channel(rng, g, i, m, b, size=count) for i in range(1, g.num_nodes)], axis=1
    )
    return h_u, h_e


def batched_mrt(h: np.ndarray) -> np.ndarray:
    _, _, vh = np.linalg.svd(h)
    return vh[..., 0, :].conj()


def evaluate_grid(
    grid, scenario: Scenario, draws: int | None = None
) -> list[GridPoint]:
    """Every (noise level, bit width) pair on the grid, in grid order."""
    draws = scenario.pretrain_draws if draws is None else draws
    h_u, h_e = draw_links(scenario, draws)
    w = batched_mrt(h_u)
    xi = scenario.budget.max_power_w
    sigma2 = noise_power(scenario.budget)
    power = np.full(draws, xi)
    base = scenario.semantic
    points = []
    for dz in grid:
        cfg = base.with_noise(dz)
        for b in base.bit_choices:
            ev = evaluate_links(
                h_u, h_e, w, power, np.full(draws, b), cfg,
                scenario.budget.bandwidth_hz, sigma2, scenario.t_max, strict=scenario.strict,
            )
            points.append(
                GridPoint(
                    delta_z=float(dz),
                    b=b,
                    mean_omega_u=float(np.mean(ev.omega_u)),
                    mean_g_user=float(np.mean(ev.g_u)),
                    mean_g_eve=tuple(float(x) for x in np.mean(ev.g_e, axis=0)),
                )
            )
    return points


def pretrain_semantic(grid, scenario: Scenario, draws: int | None = None) -> SemanticConfig:
    """Pick the noise level (and reference bit width) with the best mean CLSSR.

    Ties go to the smaller noise level, then the smaller bit width.
    """
    grid = sorted(float(x) for x in grid)
    if not grid:
        raise ValueError("empty noise grid")
    best = None
    for p in evaluate_grid(grid, scenario, draws):
        if p.feasible and (best is None or p.mean_omega_u > best.mean_omega_u):
            best = p
    if best is None:
        raise InfeasibleSemanticConfig(
            f"no feasible semantic config on grid {grid}: eavesdropper distortion never exceeds the user's"
        )
    return replace(scenario.semantic, delta_z=best.delta_z, b=best.b)


def separation_margins(scenario: Scenario, draws: int | None = None) -> np.ndarray:
    """Mean Eve distortion minus mean user distortion, per Eve, at the config's b."""
    cfg = scenario.semantic
    (p,) = evaluate_grid([cfg.delta_z], scenario.with_semantic(b_min=cfg.b, b_max=cfg.b), draws)
    return np.array(p.mean_g_eve) - p.mean_g_user
