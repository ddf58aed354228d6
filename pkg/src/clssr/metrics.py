"""Cross-layer security metrics.

All operations accept scalars or numpy arrays (elementwise); scalar inputs
give Python floats/bools back.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

SNAPSHOT_COLUMNS = (
    "tau",
    "scheme",
    "r_u",
    "r_e_min",
    "r_sec_min",
    "g_u",
    "g_e_min",
    "task_sec_min",
    "phi_min",
    "omega_u",
    "timely",
)


def _ret(x):
    return x.item() if isinstance(x, (np.ndarray, np.generic)) and np.ndim(x) == 0 else x


def security_rate(r_u, r_e):
    """Secrecy rate ``(R_u - R_e)^+``."""
    return _ret(np.maximum(np.asarray(r_u, dtype=float) - r_e, 0.0))


def task_security(g_u, g_e, r_sec, eps, strict: bool = True, app_layer: bool = True):
    """Task security ``1 - g_u`` inside the secure case, 0 outside.

    The secure case needs the user to complete the task (``g_u < eps``, or
    ``<=`` with ``strict=False``) and either a positive secrecy rate or, with
    zero secrecy rate, an eavesdropper distortion of at least ``eps``.
    ``app_layer=False`` drops the second alternative (physical-layer only).
    """
    g_u = np.asarray(g_u, dtype=float)
    g_e = np.asarray(g_e, dtype=float)
    r_sec = np.asarray(r_sec, dtype=float)
    completes = g_u < eps if strict else g_u <= eps
    protected = r_sec > 0
    if app_layer:
        protected = protected | ((r_sec == 0) & (g_e >= eps))
    return _ret(np.where(completes & protected, 1.0 - g_u, 0.0))


def semantic_bit_efficiency(g_s, n, b):
    """Task security carried per transmitted bit (sut/bit)."""
    if np.any(np.asarray(n) < 1) or np.any(np.asarray(b) < 1):
        raise ValueError("n and b must be >= 1")
    return _ret(np.asarray(g_s, dtype=float) / (np.asarray(n) * np.asarray(b)))


def clssr(phi, r_sec, r_u):
    """Cross-layer semantic secure rate in sut/s.

    Uses the secrecy rate when it is positive and the full user rate when the
    link leaks (security then rests on the application layer).
    """
    r_sec = np.asarray(r_sec, dtype=float)
    return _ret(np.asarray(phi, dtype=float) * np.where(r_sec > 0, r_sec, r_u))


def clssr_multi_eve(omegas, axis: int = -1):
    """Worst case over cooperating eavesdroppers."""
    omegas = np.asarray(omegas, dtype=float)
    if omegas.size == 0 or omegas.shape[axis] == 0:
        raise ValueError("need at least one eavesdropper")
    return _ret(np.min(omegas, axis=axis))


def is_timely(n, b, r_u, t_max):
    """Whether ``n*b`` bits go through at rate ``r_u`` within ``t_max`` seconds."""
    r_u = np.asarray(r_u, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        latency = np.where(r_u > 0, np.asarray(n) * np.asarray(b) / np.where(r_u > 0, r_u, 1.0), np.inf)
    return _ret((r_u > 0) & (latency <= t_max))


@dataclass(frozen=True)
class SecuritySnapshot:
    r_u: float
    r_e: tuple[float, ...]
    r_sec: tuple[float, ...]
    g_u: float
    g_e: tuple[float, ...]
    task_sec: tuple[float, ...]
    phi: tuple[float, ...]
    omega: tuple[float, ...]
    omega_u: float
    timely: bool

    def __post_init__(self):
        k = len(self.r_e)
        if not all(len(x) == k for x in (self.r_sec, self.g_e, self.task_sec, self.phi, self.omega)):
            raise ValueError("per-eavesdropper fields must share one length")

    def csv_row(self, tau: float, scheme: str) -> list:
        return [
            tau,
            scheme,
            self.r_u,
            min(self.r_e),
            min(self.r_sec),
            self.g_u,
            min(self.g_e),
            min(self.task_sec),
            min(self.phi),
            self.omega_u,
            int(self.timely),
        ]

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class TaskRecord:
    snapshot: SecuritySnapshot
    secure: bool
    timely: bool


def task_record(snapshot: SecuritySnapshot) -> TaskRecord:
    return TaskRecord(snapshot, bool(min(snapshot.task_sec) > 0), bool(snapshot.timely))


def task_reliability(records) -> float:
    """Percentage of tasks that were both secure and timely."""
    records = list(records)
    if not records:
        raise ValueError("no task records")
    ok = sum(1 for r in records if r.secure and r.timely)
    return 100.0 * ok / len(records)
