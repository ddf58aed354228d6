"""Finite MDP over (codeword class, user fading bin, Eve fading bins).

Actions pair a beamformer from a finite codebook with an index bit width.
Channel dynamics are exogenous: every fading bin is redrawn i.i.d. with
equal probability each step, so transitions factor as the source chain
times a uniform bin chain and do not depend on the action.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.stats import gamma as gamma_dist

from . import channel
from .channel import Beamformer
from .pipeline import LinkEval, evaluate_links
from .scenario import Scenario, SourceChain, StateSpace
from .semantics import SemanticConfig

__all__ = [
    "ActionSpace",
    "FadingQuantizer",
    "Mdp",
    "SCHEMES",
    "SourceChain",
    "StateSpace",
    "build_beam_codebook",
    "build_mdp",
    "quantize_channel",
    "representative_channels",
    "reward",
]

SCHEMES = ("clss", "plss", "ao")
ANGLE_TOL = 1e-6


# ---- channel quantization ------------------------------------------------------------


@dataclass(frozen=True)
class FadingQuantizer:
    """Equal-probability bins of ``||H||_F^2`` under Rayleigh fading.

    The small-scale Frobenius power of an ``rx x tx`` Rayleigh matrix is
    Gamma(rx*tx, 1); ``scale`` is the link's large-scale path gain.
    """

    bins: int
    entries: int
    scale: float = 1.0

    def __post_init__(self):
        if self.bins < 1:
            raise ValueError("bins must be >= 1")

    @property
    def thresholds(self) -> np.ndarray:
        q = np.arange(1, self.bins) / self.bins
        return self.scale * gamma_dist.ppf(q, self.entries)

    def representative_power(self, i: int) -> float:
        """Median of ``||H||_F^2`` conditioned on landing in bin ``i``."""
        return float(self.scale * gamma_dist.ppf((i + 0.5) / self.bins, self.entries))

    def index(self, h) -> np.ndarray | int:
        h = np.asarray(h)
        if h.ndim == 1:
            h = h[np.newaxis, :]
        power = np.sum(np.abs(h) ** 2, axis=(-2, -1))
        idx = np.searchsorted(self.thresholds, power, side="right")
        return int(idx) if np.ndim(idx) == 0 else idx


def quantize_channel(h, bins: int, scale: float = 1.0):
    """Bin index of channel(s) ``h`` among ``bins`` equal-probability bins."""
    h = np.asarray(h)
    entries = h.shape[-1] * (h.shape[-2] if h.ndim >= 2 else 1)
    return FadingQuantizer(bins, entries, scale).index(h)


def link_quantizers(scenario: Scenario) -> list[FadingQuantizer]:
    """Quantizer per node: index 0 is the user, 1.. the Eves."""
    entries = scenario.mode.rx_antennas * scenario.mode.tx_antennas
    out = []
    for node in range(scenario.geometry.num_nodes):
        bins = scenario.states.fading_bins_user if node == 0 else scenario.states.fading_bins_eve
        out.append(
            FadingQuantizer(bins, entries, channel.path_gain(scenario.geometry, node, scenario.budget))
        )
    return out


def representative_channels(scenario: Scenario) -> list[np.ndarray]:
    """Per node, an array (bins, rx, tx) of bin-representative channels.

    Each representative keeps the direction of a fixed reference draw and
    is rescaled to the bin-median Frobenius power.
    """
    reps = []
    for node, q in enumerate(link_quantizers(scenario)):
        mats = []
        for i in range(q.bins):
            g = channel.rayleigh(scenario.rng("representative", node, i), scenario.mode.shape)
            g *= np.sqrt(q.representative_power(i) / np.sum(np.abs(g) ** 2))
            mats.append(g)
        reps.append(np.stack(mats))
    return reps


# ---- actions -------------------------------------------------------------------------


@dataclass(frozen=True)
class ActionSpace:
    beam_codebook: tuple[Beamformer, ...]
    bit_choices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "beam_codebook", tuple(self.beam_codebook))
        object.__setattr__(self, "bit_choices", tuple(int(b) for b in self.bit_choices))
        if not self.beam_codebook or not self.bit_choices:
            raise ValueError("action space must be nonempty")

    def __len__(self) -> int:
        return len(self.beam_codebook) * len(self.bit_choices)

    @property
    def num_beams(self) -> int:
        return len(self.beam_codebook)

    @property
    def num_bits(self) -> int:
        return len(self.bit_choices)

    def index(self, beam: int, bit: int) -> int:
        return beam * self.num_bits + bit

    def split(self, a: int) -> tuple[int, int]:
        return divmod(int(a), self.num_bits)

    def action(self, a: int) -> tuple[Beamformer, int]:
        beam, bit = self.split(a)
        return self.beam_codebook[beam], self.bit_choices[bit]

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Weights (A, tx), power (A,), bits (A,) in action-index order."""
        w = np.stack([f.weights for f in self.beam_codebook])
        p = np.array([f.power for f in self.beam_codebook])
        bits = np.array(self.bit_choices)
        return (
            np.repeat(w, self.num_bits, axis=0),
            np.repeat(p, self.num_bits),
            np.tile(bits, self.num_beams),
        )

    def labels(self) -> list[str]:
        return [f"{f.label}@{f.power:.4g}W/b={b}" for f in self.beam_codebook for b in self.bit_choices]


def null_steer(weights, eve_stack) -> np.ndarray | None:
    """Unit weights in the null space of the stacked Eve channels closest to ``weights``.

    Returns None when the null space is empty. If ``weights`` is orthogonal
    to the null space any null-space direction is returned.
    """
    basis = channel.null_space(eve_stack)
    if basis.shape[1] == 0:
        return None
    proj = basis @ (basis.conj().T @ np.asarray(weights, dtype=complex))
    norm = np.linalg.norm(proj)
    if norm < 1e-12:
        return basis[:, 0]
    return proj / norm


def _same_direction(w1, w2) -> bool:
    return abs(np.vdot(w1, w2)) >= 1.0 - ANGLE_TOL


def build_beam_codebook(
    scenario: Scenario,
    levels: int | None = None,
    power_fracs=None,
    reps: list[np.ndarray] | None = None,
) -> list[Beamformer]:
    """MRT / null-steering mixtures for every representative channel state.

    For each user representative the MRT direction is mixed with its
    null-steering projection (w.r.t. each combination of Eve representatives)
    at ``levels`` evenly spaced weights; every direction appears at each power
    fraction of the transmit power limit. Near-parallel duplicates are dropped.
    """
    levels = scenario.codebook.levels if levels is None else levels
    power_fracs = scenario.codebook.power_fracs if power_fracs is None else tuple(power_fracs)
    if levels < 2:
        raise ValueError("levels must be >= 2")
    if not power_fracs or any(not 0 < p <= 1 for p in power_fracs):
        raise ValueError("power fractions must lie in (0, 1]")
    reps = representative_channels(scenario) if reps is None else reps
    user_reps, eve_reps = reps[0], reps[1:]
    xi = scenario.budget.max_power_w

    directions: list[tuple[np.ndarray, str]] = []

    def add(w, label):
        w = np.asarray(w, dtype=complex)
        w = w / np.linalg.norm(w)
        if not any(_same_direction(w, d) for d, _ in directions):
            directions.append((w, label))

    for iu, hu in enumerate(user_reps):
        m = channel.mrt(hu)
        add(m, f"mrt{iu}")
        for combo in itertools.product(*(range(len(r)) for r in eve_reps)):
            stack = np.concatenate([eve_reps[e][ie] for e, ie in enumerate(combo)], axis=0)
            ns = null_steer(m, stack)
            if ns is None:
                continue
            tag = "".join(str(i) for i in combo)
            for k, alpha in enumerate(np.linspace(0.0, 1.0, levels)[1:], start=1):
                mix = (1.0 - alpha) * m + alpha * ns
                if np.linalg.norm(mix) < 1e-12:
                    continue
                add(mix, f"mix{iu}/{tag}/{k}")

    return [Beamformer(w, frac * xi, label) for frac in sorted(power_fracs, reverse=True) for w, label in directions]


# ---- the MDP -------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Mdp:
    transition: np.ndarray  # (S, A, S)
    reward: np.ndarray  # (S, A)
    gamma: float
    actions: ActionSpace | None = field(default=None, repr=False)
    state_space: StateSpace | None = field(default=None, repr=False)
    num_eves: int = 0

    def __post_init__(self):
        p = np.asarray(self.transition, dtype=float)
        r = np.asarray(self.reward, dtype=float)
        if p.ndim != 3 or p.shape[0] != p.shape[2] or r.shape != p.shape[:2]:
            raise ValueError("transition must be (S, A, S) and reward (S, A)")
        if p.shape[0] == 0 or p.shape[1] == 0:
            raise ValueError("MDP needs at least one state and one action")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=2) - 1.0) > 1e-9):
            raise ValueError("transition rows must be probability vectors")
        if not np.all(np.isfinite(r)):
            raise ValueError("rewards must be finite")
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        object.__setattr__(self, "transition", p)
        object.__setattr__(self, "reward", r)

    @property
    def num_states(self) -> int:
        return self.transition.shape[0]

    @property
    def num_actions(self) -> int:
        return self.transition.shape[1]

    def with_reward(self, reward: np.ndarray) -> "Mdp":
        return Mdp(self.transition, reward, self.gamma, self.actions, self.state_space, self.num_eves)

    def to_json(self) -> dict:
        states = None
        if self.state_space is not None:
            states = [
                dict(zip(("codeword", "user_bin", "eve_bins"), self.state_space.unravel(self.num_eves, s)))
                for s in range(self.num_states)
            ]
        return {
            "num_states": self.num_states,
            "num_actions": self.num_actions,
            "gamma": self.gamma,
            "states": states,
            "actions": self.actions.labels() if self.actions is not None else None,
            "transition": self.transition.tolist(),
            "reward": self.reward.tolist(),
        }

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()))


def action_space(scenario: Scenario, reps=None) -> ActionSpace:
    return ActionSpace(tuple(build_beam_codebook(scenario, reps=reps)), scenario.semantic.bit_choices)


def channel_states(scenario: Scenario) -> list[tuple[int, tuple[int, ...]]]:
    """All (user bin, Eve bins) combinations in state-index order."""
    st = scenario.states
    return [
        (bu, be)
        for bu in range(st.fading_bins_user)
        for be in itertools.product(range(st.fading_bins_eve), repeat=scenario.num_eves)
    ]


def evaluate_cells(
    scenario: Scenario,
    actions: ActionSpace,
    reps: list[np.ndarray],
    semantic: SemanticConfig | None = None,
    app_layer: bool = True,
) -> LinkEval:
    """Pipeline at bin representatives, arrays shaped (channel states, A, ...)."""
    cfg = scenario.semantic if semantic is None else semantic
    cs = channel_states(scenario)
    h_u = np.stack([reps[0][bu] for bu, _ in cs])[:, np.newaxis]
    h_e = np.stack(
        [np.stack([reps[e + 1][ie] for e, ie in enumerate(be)]) for _, be in cs]
    )[:, np.newaxis]
    w, p, bits = actions.arrays()
    return evaluate_links(
        h_u,
        h_e,
        w[np.newaxis],
        p[np.newaxis],
        bits[np.newaxis],
        cfg,
        scenario.budget.bandwidth_hz,
        channel.noise_power(scenario.budget),
        scenario.t_max,
        app_layer=app_layer,
        strict=scenario.strict,
    )


def shaping(ev: LinkEval) -> np.ndarray:
    """Sum over Eves of user minus Eve received power."""
    return np.sum(ev.gain_u[..., np.newaxis] - ev.gain_e, axis=-1)


def scheme_reward(ev_cl: LinkEval, ev_pl: LinkEval, scheme: str) -> np.ndarray:
    if scheme in ("clss", "ao"):
        return ev_cl.omega_u + shaping(ev_cl)
    if scheme == "plss":
        return ev_pl.omega_u
    raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def reward(
    s: int,
    a: int,
    scenario: Scenario,
    semantic: SemanticConfig | None = None,
    scheme: str = "clss",
    reps: list[np.ndarray] | None = None,
    actions: ActionSpace | None = None,
) -> float:
    """Reward of one (state, action) cell.

    CL-SS (and AO) use the CLSSR plus the gain-shaping term; PL-SS uses its
    physical-layer-only CLSSR.
    """
    reps = representative_channels(scenario) if reps is None else reps
    actions = action_space(scenario, reps) if actions is None else actions
    cfg = scenario.semantic if semantic is None else semantic
    _, bu, be = scenario.states.unravel(scenario.num_eves, s)
    beam, b = actions.action(a)
    h_e = np.stack([reps[e + 1][ie] for e, ie in enumerate(be)])
    args = (
        reps[0][bu], h_e, beam.weights, np.float64(beam.power), np.int64(b),
    )
    common = (scenario.budget.bandwidth_hz, channel.noise_power(scenario.budget), scenario.t_max)
    ev_cl = evaluate_links(*args, cfg, *common, app_layer=True, strict=scenario.strict)
    ev_pl = evaluate_links(*args, cfg, *common, app_layer=False, strict=scenario.strict)
    return float(scheme_reward(ev_cl, ev_pl, scheme))


def transition_tensor(scenario: Scenario, num_actions: int) -> np.ndarray:
    st = scenario.states
    n_ch = st.fading_bins_user * st.fading_bins_eve**scenario.num_eves
    p_state = np.kron(scenario.source.transition, np.full((n_ch, n_ch), 1.0 / n_ch))
    return np.repeat(p_state[:, np.newaxis, :], num_actions, axis=1)


def build_mdp(
    scenario: Scenario,
    semantic: SemanticConfig | None = None,
    scheme: str = "clss",
    reps: list[np.ndarray] | None = None,
    actions: ActionSpace | None = None,
) -> Mdp:
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    reps = representative_channels(scenario) if reps is None else reps
    actions = action_space(scenario, reps) if actions is None else actions
    ev_cl = evaluate_cells(scenario, actions, reps, semantic, app_layer=True)
    ev_pl = evaluate_cells(scenario, actions, reps, semantic, app_layer=False)
    r_ch = scheme_reward(ev_cl, ev_pl, scheme)
    r = np.tile(r_ch, (scenario.states.codeword_classes, 1))
    return Mdp(
        transition_tensor(scenario, len(actions)),
        r,
        scenario.gamma,
        actions=actions,
        state_space=scenario.states,
        num_eves=scenario.num_eves,
    )
