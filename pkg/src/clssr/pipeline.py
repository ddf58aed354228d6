"""Channel -> semantics -> metrics composition, vectorized over draws."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import channel, metrics
from .semantics import SemanticConfig, distortion_eve, distortion_user


@dataclass(frozen=True)
class LinkEval:
    """Metric arrays for a batch of evaluations; Eve axis is last."""

    r_u: np.ndarray
    r_e: np.ndarray
    r_sec: np.ndarray
    g_u: np.ndarray
    g_e: np.ndarray
    task_sec: np.ndarray
    phi: np.ndarray
    omega: np.ndarray
    omega_u: np.ndarray
    timely: np.ndarray
    gain_u: np.ndarray
    gain_e: np.ndarray

    @property
    def secure(self) -> np.ndarray:
        return np.min(self.task_sec, axis=-1) > 0

    def snapshot(self, i=()) -> metrics.SecuritySnapshot:
        def vec(a):
            return tuple(float(x) for x in np.asarray(a[i]).reshape(-1))

        return metrics.SecuritySnapshot(
            r_u=float(self.r_u[i]),
            r_e=vec(self.r_e),
            r_sec=vec(self.r_sec),
            g_u=float(self.g_u[i]),
            g_e=vec(self.g_e),
            task_sec=vec(self.task_sec),
            phi=vec(self.phi),
            omega=vec(self.omega),
            omega_u=float(self.omega_u[i]),
            timely=bool(self.timely[i]),
        )


def evaluate_links(
    h_u,
    h_e,
    weights,
    power,
    bits,
    cfg: SemanticConfig,
    bandwidth: float,
    sigma2: float,
    t_max: float,
    app_layer: bool = True,
    strict: bool = True,
) -> LinkEval:
    """Evaluate the full metric stack.

    Shapes: ``h_u`` (..., rx, tx); ``h_e`` (..., E, rx, tx); ``weights``
    (..., tx) unit norm; ``power`` and ``bits`` broadcast against (...).
    ``app_layer=False`` evaluates the physical-layer-only scheme: semantic
    noise is off and leaking links earn no task security.
    """
    h_u = np.asarray(h_u, dtype=complex)
    h_e = np.asarray(h_e, dtype=complex)
    w = np.asarray(weights, dtype=complex)
    power = np.asarray(power, dtype=float)
    bits = np.asarray(bits)
    delta_z = cfg.delta_z if app_layer else 0.0

    gain_u = channel.beam_gain(h_u, w, power)
    gain_e = channel.beam_gain(h_e, w[..., np.newaxis, :], power[..., np.newaxis])
    r_u = np.asarray(channel.shannon_rate(bandwidth, gain_u, sigma2))
    r_e = np.asarray(channel.shannon_rate(bandwidth, gain_e, sigma2))
    r_sec = np.maximum(r_u[..., np.newaxis] - r_e, 0.0)

    p_u = channel.codeword_error(channel.ser_qpsk(channel.alamouti_snr(h_u, sigma2, power)), bits)
    p_e = channel.codeword_error(
        channel.ser_qpsk(channel.alamouti_snr(h_e, sigma2, power[..., np.newaxis])),
        bits[..., np.newaxis],
    )
    g_u = np.asarray(distortion_user(p_u, cfg, b=bits, delta_z=delta_z))
    g_e = np.asarray(distortion_eve(p_e, cfg, b=bits[..., np.newaxis], delta_z=delta_z))

    task_sec = np.asarray(
        metrics.task_security(
            g_u[..., np.newaxis], g_e, r_sec, cfg.epsilon, strict=strict, app_layer=app_layer
        )
    )
    phi = np.asarray(metrics.semantic_bit_efficiency(task_sec, cfg.n, bits[..., np.newaxis]))
    omega = np.asarray(metrics.clssr(phi, r_sec, r_u[..., np.newaxis]))
    omega_u = np.asarray(metrics.clssr_multi_eve(omega, axis=-1))
    timely = np.asarray(metrics.is_timely(cfg.n, bits, r_u, t_max))
    return LinkEval(
        r_u=np.asarray(r_u),
        r_e=np.asarray(r_e),
        r_sec=r_sec,
        g_u=g_u,
        g_e=g_e,
        task_sec=task_sec,
        phi=phi,
        omega=omega,
        omega_u=omega_u,
        timely=timely,
        gain_u=np.asarray(gain_u),
        gain_e=np.asarray(gain_e),
    )
