"""Physical layer of the wiretap link.

Log-distance path loss, Rayleigh block fading, transmit beamforming gains,
Alamouti post-combining SNR and QPSK error probabilities. Every function
accepts leading batch dimensions on channel arrays so that Monte-Carlo
evaluation can run vectorized; a channel matrix has shape ``(rx, tx)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erfc


@dataclass(frozen=True)
class LinkBudget:
    transmit_power_dbm: float = 20.0
    bandwidth_hz: float = 1e6
    noise_density_dbm_hz: float = -174.0
    noise_factor_tau: float = 1.0
    pathloss_exponent: float = 2.0
    pathloss_ref_db: float = 40.0

    def __post_init__(self):
        if not self.bandwidth_hz > 0:
            raise ValueError("bandwidth_hz must be positive")
        if not self.noise_factor_tau >= 1:
            raise ValueError("noise_factor_tau must be >= 1")
        if not self.pathloss_exponent >= 2:
            raise ValueError("pathloss_exponent must be >= 2")

    @property
    def max_power_w(self) -> float:
        """Transmit power limit (the beamformer power budget) in watts."""
        return dbm_to_watt(self.transmit_power_dbm)


@dataclass(frozen=True)
class NodeGeometry:
    tx_pos: tuple[float, float] = (0.0, 0.0)
    user_pos: tuple[float, float] = (500.0, 500.0)
    eve_pos: tuple[tuple[float, float], ...] = ((400.0, 450.0), (800.0, 300.0))

    def __post_init__(self):
        object.__setattr__(self, "tx_pos", tuple(float(v) for v in self.tx_pos))
        object.__setattr__(self, "user_pos", tuple(float(v) for v in self.user_pos))
        object.__setattr__(
            self, "eve_pos", tuple(tuple(float(v) for v in p) for p in self.eve_pos)
        )
        if len(self.eve_pos) < 1:
            raise ValueError("at least one eavesdropper is required")
        for i in range(self.num_nodes):
            if self.distance(i) <= 0:
                raise ValueError(f"node {i} coincides with the transmitter")

    @property
    def num_eves(self) -> int:
        return len(self.eve_pos)

    @property
    def num_nodes(self) -> int:
        return 1 + len(self.eve_pos)

    def position(self, node_index: int) -> tuple[float, float]:
        """Node 0 is the legitimate user, nodes 1.. are the eavesdroppers."""
        if node_index == 0:
            return self.user_pos
        return self.eve_pos[node_index - 1]

    def distance(self, node_index: int) -> float:
        x, y = self.position(node_index)
        return math.hypot(x - self.tx_pos[0], y - self.tx_pos[1])


@dataclass(frozen=True)
class AntennaMode:
    tx_antennas: int = 2
    rx_antennas: int = 2

    def __post_init__(self):
        if self.tx_antennas != 2:
            raise ValueError("Alamouti signalling needs exactly 2 transmit antennas")
        if self.rx_antennas not in (1, 2):
            raise ValueError("rx_antennas must be 1 (MISO) or 2 (MIMO)")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rx_antennas, self.tx_antennas)


MISO = AntennaMode(2, 1)
MIMO = AntennaMode(2, 2)


@dataclass(frozen=True, eq=False)
class Beamformer:
    """Unit-norm transmit weights with the radiated power carried separately."""

    weights: np.ndarray
    power: float
    label: str = field(default="", compare=False)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=complex).reshape(-1)
        norm = np.linalg.norm(w)
        if norm == 0:
            raise ValueError("beamformer weights must be nonzero")
        w = w / norm
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        if self.power < 0:
            raise ValueError("beamformer power must be nonnegative")

    def radiated_power(self) -> float:
        return float(np.linalg.norm(self.weights) ** 2 * self.power)


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


def noise_power(budget: LinkBudget) -> float:
    """Receiver noise power ``tau * N0 * B`` in watts (same at user and Eves)."""
    n0_b_dbm = budget.noise_density_dbm_hz + 10.0 * math.log10(budget.bandwidth_hz)
    return budget.noise_factor_tau * float(dbm_to_watt(n0_b_dbm))


def path_loss_at(distance_m: float, ref_db: float, exponent: float) -> float:
    if distance_m <= 0:
        raise ValueError("distance must be positive")
    return ref_db + 10.0 * exponent * math.log10(distance_m)


def path_loss_db(geometry: NodeGeometry, node_index: int, budget: LinkBudget) -> float:
    return path_loss_at(
        geometry.distance(node_index), budget.pathloss_ref_db, budget.pathloss_exponent
    )


def path_gain(geometry: NodeGeometry, node_index: int, budget: LinkBudget) -> float:
    """Large-scale power gain ``10^(-PL/10)`` of one link."""
    return 10.0 ** (-path_loss_db(geometry, node_index, budget) / 10.0)


def rayleigh(rng: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. CN(0, 1) entries."""
    shape = tuple(shape)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / math.sqrt(2.0)


def sample_channel(
    rng: np.random.Generator,
    geometry: NodeGeometry,
    node_index: int,
    mode: AntennaMode,
    budget: LinkBudget,
    size: int | tuple[int, ...] | None = None,
) -> np.ndarray:
    """Draw Rayleigh channel matrices including path loss.

    Returns shape ``(rx, tx)`` when ``size`` is None, else ``(*size, rx, tx)``.
    """
    lead = () if size is None else ((size,) if isinstance(size, int) else tuple(size))
    small = rayleigh(rng, lead + mode.shape)
    return small * math.sqrt(path_gain(geometry, node_index, budget))


def _as_matrix(h) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.ndim == 1:
        h = h[np.newaxis, :]
    return h


def beam_gain(h, f: Beamformer | np.ndarray, power: float | np.ndarray | None = None):
    """Received signal power ``||H f||^2 * power`` (``|h f|^2`` for a row channel).

    ``f`` is a Beamformer, or raw unit-norm weights with ``power`` given
    explicitly; batched weights of shape ``(..., tx)`` pair with batched H.
    """
    if isinstance(f, Beamformer):
        w, p = f.weights, f.power
    else:
        w = np.asarray(f, dtype=complex)
        p = 1.0 if power is None else power
    h = _as_matrix(h)
    if h.shape[-1] != w.shape[-1]:
        raise ValueError(
            f"channel has {h.shape[-1]} transmit columns but beamformer has {w.shape[-1]} weights"
        )
    hf = np.einsum("...ij,...j->...i", h, w)
    g = np.sum(np.abs(hf) ** 2, axis=-1) * p
    return float(g) if np.ndim(g) == 0 else g


def shannon_rate(budget: LinkBudget | float, gain, sigma2):
    """``B log2(1 + gain / sigma2)`` in bit/s; ``budget`` may be a bandwidth."""
    bandwidth = budget.bandwidth_hz if isinstance(budget, LinkBudget) else float(budget)
    r = bandwidth * np.log2(1.0 + np.asarray(gain, dtype=float) / sigma2)
    return float(r) if np.ndim(r) == 0 else r


def alamouti_snr(h, sigma2: float, power):
    """Post-combining symbol SNR ``||H||_F^2 / tx * power / sigma2``."""
    h = _as_matrix(h)
    fro = np.sum(np.abs(h) ** 2, axis=(-2, -1))
    g = fro / h.shape[-1] * np.asarray(power, dtype=float) / sigma2
    return float(g) if np.ndim(g) == 0 else g


def q_function(x):
    """Gaussian tail probability."""
    return 0.5 * erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def ser_qpsk(gamma):
    """Exact Gray-coded QPSK symbol error rate at symbol SNR ``gamma``."""
    gamma = np.asarray(gamma, dtype=float)
    if np.any(gamma < 0):
        raise ValueError("SNR must be nonnegative")
    q = q_function(np.sqrt(gamma))
    ser = 2.0 * q - q * q
    return float(ser) if ser.ndim == 0 else ser


def symbols_per_index(bits) -> np.ndarray | int:
    """QPSK symbols occupied by one ``bits``-bit codeword index."""
    return (np.asarray(bits) + 1) // 2 if np.ndim(bits) else (int(bits) + 1) // 2


def codeword_error(p_sym, bits):
    """Probability that at least one of the index's QPSK symbols is wrong."""
    if np.any(np.asarray(bits) < 1):
        raise ValueError("an index carries at least one bit")
    p_sym = np.clip(np.asarray(p_sym, dtype=float), 0.0, 1.0)
    # 1 - (1-p)^m computed via expm1/log1p to keep tiny error rates exact
    m = symbols_per_index(bits)
    with np.errstate(divide="ignore"):
        p = -np.expm1(m * np.log1p(-p_sym))
    p = np.clip(p, 0.0, 1.0)
    return float(p) if np.ndim(p) == 0 else p


def mrt(h) -> np.ndarray:
    """Maximum-ratio transmit weights: principal right singular vector of H."""
    h = _as_matrix(h)
    _, _, vh = np.linalg.svd(h)
    w = vh[0].conj()
    # fix the global phase so equal channels give bit-identical weights
    k = int(np.argmax(np.abs(w)))
    return w * np.exp(-1j * np.angle(w[k]))


def null_space(a: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (columns) of the right null space of ``a``."""
    a = _as_matrix(a)
    _, s, vh = np.linalg.svd(a)
    tol = rtol * (s[0] if s.size else 1.0)
    rank = int(np.sum(s > tol))
    return vh[rank:].conj().T
