"""Experiment configuration, seeded random streams and the JSON config file."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import jsonschema
import numpy as np

from .channel import AntennaMode, LinkBudget, NodeGeometry
from .semantics import SemanticConfig

DEFAULT_PRETRAIN_GRID = (0.0, 0.005, 0.01, 0.02, 0.05, 0.1, 0.25, 0.5)


class ConfigError(ValueError):
    """Invalid scenario configuration; ``where`` names the offending field."""

    def __init__(self, message: str, where: str = ""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


@dataclass(frozen=True)
class StateSpace:
    codeword_classes: int = 4
    fading_bins_user: int = 3
    fading_bins_eve: int = 2

    def __post_init__(self):
        if self.codeword_classes < 1:
            raise ValueError("need at least one codeword class")
        if self.fading_bins_user < 1 or self.fading_bins_eve < 1:
            raise ValueError("need at least one fading bin per link")

    def size(self, num_eves: int) -> int:
        return self.codeword_classes * self.fading_bins_user * self.fading_bins_eve**num_eves

    def shape(self, num_eves: int) -> tuple[int, ...]:
        return (self.codeword_classes, self.fading_bins_user) + (self.fading_bins_eve,) * num_eves

    def index(self, num_eves: int, c, bin_user, bins_eve) -> np.ndarray | int:
        """Flat state index; ``bins_eve`` has one trailing entry per Eve."""
        bins_eve = np.asarray(bins_eve)
        parts = (c, bin_user) + tuple(bins_eve[..., i] for i in range(num_eves))
        idx = np.ravel_multi_index(parts, self.shape(num_eves))
        return int(idx) if np.ndim(idx) == 0 else idx

    def unravel(self, num_eves: int, s: int) -> tuple[int, int, tuple[int, ...]]:
        parts = np.unravel_index(s, self.shape(num_eves))
        return int(parts[0]), int(parts[1]), tuple(int(p) for p in parts[2:])


@dataclass(frozen=True, eq=False)
class SourceChain:
    transition: np.ndarray

    def __post_init__(self):
        p = np.array(self.transition, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] < 1:
            raise ValueError("source transition must be a nonempty square matrix")
        if np.any(p < 0) or np.any(np.abs(p.sum(axis=1) - 1.0) > 1e-9):
            raise ValueError("source transition rows must be probability vectors")
        p.setflags(write=False)
        object.__setattr__(self, "transition", p)

    @classmethod
    def persistent(cls, k: int, stay: float = 0.6) -> "SourceChain":
        """Stay with probability ``stay``, otherwise jump uniformly."""
        if k == 1:
            return cls(np.ones((1, 1)))
        p = np.full((k, k), (1.0 - stay) / (k - 1))
        np.fill_diagonal(p, stay)
        return cls(p)

    @property
    def size(self) -> int:
        return self.transition.shape[0]

    def stationary(self) -> np.ndarray:
        k = self.size
        a = np.vstack([self.transition.T - np.eye(k), np.ones(k)])
        rhs = np.zeros(k + 1)
        rhs[-1] = 1.0
        pi, *_ = np.linalg.lstsq(a, rhs, rcond=None)
        pi = np.clip(pi, 0.0, None)
        return pi / pi.sum()

    def __eq__(self, other):
        return isinstance(other, SourceChain) and np.array_equal(self.transition, other.transition)


@dataclass(frozen=True)
class CodebookParams:
    levels: int = 5
    power_fracs: tuple[float, ...] = (0.25, 0.5, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "power_fracs", tuple(float(p) for p in self.power_fracs))
        if self.levels < 2:
            raise ValueError("levels must be >= 2")
        if not self.power_fracs or any(not 0 < p <= 1 for p in self.power_fracs):
            raise ValueError("power fractions must lie in (0, 1]")


@dataclass(frozen=True)
class Scenario:
    geometry: NodeGeometry = field(default_factory=NodeGeometry)
    budget: LinkBudget = field(default_factory=lambda: LinkBudget(noise_factor_tau=2.0))
    mode: AntennaMode = field(default_factory=AntennaMode)
    semantic: SemanticConfig = field(default_factory=SemanticConfig)
    states: StateSpace = field(default_factory=StateSpace)
    source: SourceChain | None = None
    codebook: CodebookParams = field(default_factory=CodebookParams)
    pretrain_grid: tuple[float, ...] = DEFAULT_PRETRAIN_GRID
    pretrain_draws: int = 2000
    gamma: float = 0.9
    seed: int = 0
    t_max: float = 0.01
    episodes: int = 10_000
    strict: bool = True

    def __post_init__(self):
        if self.source is None:
            object.__setattr__(self, "source", SourceChain.persistent(self.states.codeword_classes))
        if self.source.size != self.states.codeword_classes:
            raise ValueError("source chain size must equal the number of codeword classes")
        object.__setattr__(self, "pretrain_grid", tuple(float(x) for x in self.pretrain_grid))
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must lie in (0, 1)")
        if self.t_max <= 0:
            raise ValueError("t_max must be positive")
        if self.episodes < 1 or self.pretrain_draws < 1:
            raise ValueError("episodes and pretrain_draws must be >= 1")

    @property
    def num_eves(self) -> int:
        return self.geometry.num_eves

    @property
    def tau(self) -> float:
        return self.budget.noise_factor_tau

    def with_tau(self, tau: float) -> "Scenario":
        return replace(self, budget=replace(self.budget, noise_factor_tau=float(tau)))

    def with_semantic(self, **changes) -> "Scenario":
        return replace(self, semantic=replace(self.semantic, **changes))

    # ---- identity and random streams -------------------------------------------------

    def to_dict(self) -> dict:
        d = {
            "geometry": {
                "tx_pos": list(self.geometry.tx_pos),
                "user_pos": list(self.geometry.user_pos),
                "eve_pos": [list(p) for p in self.geometry.eve_pos],
            },
            "budget": asdict(self.budget),
            "mode": asdict(self.mode),
            "semantic": asdict(self.semantic),
            "states": asdict(self.states),
            "source_transition": self.source.transition.tolist(),
            "codebook": {"levels": self.codebook.levels, "power_fracs": list(self.codebook.power_fracs)},
            "pretrain_grid": list(self.pretrain_grid),
            "pretrain_draws": self.pretrain_draws,
            "gamma": self.gamma,
            "seed": self.seed,
            "t_max": self.t_max,
            "episodes": self.episodes,
            "strict": self.strict,
        }
        return d

    @property
    def scenario_id(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @property
    def fading_id(self) -> int:
        """Hash of what shapes the small-scale fading draws.

        Noise level and link budget are excluded on purpose so that sweeps
        over tau reuse the same fading realizations.
        """
        d = self.to_dict()
        blob = json.dumps([d["geometry"], d["mode"], d["states"]], sort_keys=True)
        return int(hashlib.sha256(blob.encode()).hexdigest()[:8], 16)

    def rng(self, purpose: str, *index: int, seed: int | None = None) -> np.random.Generator:
        """Counter-based Philox stream keyed on (seed, fading id, purpose, index)."""
        tag = int(hashlib.sha256(purpose.encode()).hexdigest()[:8], 16)
        ss = np.random.SeedSequence(
            entropy=self.seed if seed is None else seed,
            spawn_key=(self.fading_id, tag) + tuple(int(i) for i in index),
        )
        return np.random.Generator(np.random.Philox(ss))


# ---- config file ---------------------------------------------------------------------

_point = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}


def _obj(props: dict) -> dict:
    return {"type": "object", "properties": props, "additionalProperties": False}


CONFIG_SCHEMA = _obj(
    {
        "geometry": _obj(
            {
                "tx_pos": _point,
                "user_pos": _point,
                "eve_pos": {"type": "array", "items": _point, "minItems": 1},
            }
        ),
        "budget": _obj(
            {
                k: {"type": "number"}
                for k in (
                    "transmit_power_dbm",
                    "bandwidth_hz",
                    "noise_density_dbm_hz",
                    "noise_factor_tau",
                    "pathloss_exponent",
                    "pathloss_ref_db",
                )
            }
        ),
        "mode": _obj({"tx_antennas": {"type": "integer"}, "rx_antennas": {"type": "integer"}}),
        "semantic": _obj(
            {
                **{k: {"type": "integer"} for k in ("n", "b", "b_min", "b_max")},
                **{k: {"type": "number"} for k in ("delta_z", "rho", "kappa", "epsilon")},
            }
        ),
        "states": _obj({k: {"type": "integer"} for k in ("codeword_classes", "fading_bins_user", "fading_bins_eve")}),
        "source_transition": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
        "source_persistence": {"type": "number", "minimum": 0, "maximum": 1},
        "codebook": _obj(
            {
                "levels": {"type": "integer"},
                "power_fracs": {"type": "array", "items": {"type": "number"}, "minItems": 1},
            }
        ),
        "pretrain_grid": {"type": "array", "items": {"type": "number"}, "minItems": 1},
        "pretrain_draws": {"type": "integer", "minimum": 1},
        "gamma": {"type": "number"},
        "seed": {"type": "integer", "minimum": 0},
        "t_max": {"type": "number"},
        "episodes": {"type": "integer", "minimum": 1},
        "strict": {"type": "boolean"},
    }
)


def default_config() -> dict:
    """The full default document, as written by ``clssr-sim default-config``."""
    return Scenario().to_dict()


def scenario_from_dict(doc: dict) -> Scenario:
    """Validate a (possibly partial) config document and build a Scenario.

    Missing fields take the defaults; unknown keys are rejected.
    """
    try:
        jsonschema.validate(doc, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(exc.message, where) from None
    base = Scenario()

    def section(name, current):
        if name not in doc:
            return current
        try:
            return replace(current, **doc[name])
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), name) from None

    geometry = section("geometry", base.geometry)
    budget = section("budget", base.budget)
    mode = section("mode", base.mode)
    semantic = section("semantic", base.semantic)
    states = section("states", base.states)
    codebook = section("codebook", base.codebook)
    source = None
    try:
        if "source_transition" in doc:
            source = SourceChain(np.array(doc["source_transition"], dtype=float))
        elif "source_persistence" in doc:
            source = SourceChain.persistent(states.codeword_classes, doc["source_persistence"])
    except ValueError as exc:
        raise ConfigError(str(exc), "source_transition") from None
    top = {
        k: doc[k]
        for k in ("pretrain_grid", "pretrain_draws", "gamma", "seed", "t_max", "episodes", "strict")
        if k in doc
    }
    try:
        return Scenario(
            geometry=geometry,
            budget=budget,
            mode=mode,
            semantic=semantic,
            states=states,
            source=source,
            codebook=codebook,
            **top,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_scenario(path: str | Path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc.strerror}", str(path)) from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{exc.msg} (line {exc.lineno}, column {exc.colno})", str(path)) from None
    return scenario_from_dict(doc)


def dump_scenario(scenario: Scenario, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scenario.to_dict(), indent=2) + "\n")
