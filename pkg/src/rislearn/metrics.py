"""Evaluation of composite channels, SINR, rates, and the learning objective.

The composite uplink channel of user ``i`` is

    h_i(theta) = h_direct_i + beta * G^H diag(theta)^H h_ris_i,

with ``theta`` the unit-modulus phase coefficients of the reflecting surface.
The objective minimized throughout the package is the worst per-task
classification error ``max_k c_k * v_k**(-d_k)`` at the continuous sample
count ``v_k = B*T*R_k / D_k``; the floored integer count is used only for
reporting. Allocations for which some task receives no data (rate 0) map to
an infinite objective so outer solvers treat them as degenerate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .scenario import ChannelSet, SystemConfig, TaskModel

__all__ = [
    "AllocationState",
    "validate_phase_vector",
    "composite_channel",
    "composite_channels",
    "channel_gains",
    "sinr",
    "sinr_all",
    "spectral_efficiency",
    "sample_count",
    "task_error",
    "objective",
    "per_task_errors",
    "evaluate_allocation",
    "clamp_error",
]

UNIT_TOL = 1e-9


def validate_phase_vector(theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=complex)
    if theta.ndim != 1 or theta.size == 0:
        raise ValueError("phase vector must be a non-empty 1-D array")
    if np.max(np.abs(np.abs(theta) - 1.0)) > UNIT_TOL:
        raise ValueError("phase vector entries must have unit modulus")
    return theta


@dataclass(frozen=True)
class AllocationState:
    """Joint solution (powers, beamformers, phases) plus its evaluation."""

    p: np.ndarray          # (K,) transmit powers, W
    w: np.ndarray          # (K, N) unit-norm receive beamformers
    theta: np.ndarray      # (M,) unit-modulus phase coefficients
    objective: float       # max per-task learning error
    per_task_error: np.ndarray
    per_task_rate: np.ndarray  # bps/Hz


def composite_channel(ch: ChannelSet, theta, k: int, beta: float = 1.0) -> np.ndarray:
    """Effective channel of user ``k`` for phase vector ``theta``."""
    if not 0 <= k < ch.K:
        raise IndexError(f"user index {k} out of range for K={ch.K}")
    theta = np.asarray(theta, dtype=complex)
    return ch.h_direct[k] + beta * (ch.G.conj().T @ (np.conj(theta) * ch.h_ris[k]))


def composite_channels(ch: ChannelSet, theta, beta: float = 1.0) -> np.ndarray:
    """All K effective channels stacked as a (K, N) array."""
    theta = np.asarray(theta, dtype=complex)
    return ch.h_direct + beta * ((np.conj(theta) * ch.h_ris) @ np.conj(ch.G))


def channel_gains(w, h) -> np.ndarray:
    """Beamformed power gains ``gains[k, i] = |w_k^H h_i|^2``."""
    w = np.asarray(w, dtype=complex)
    h = np.asarray(h, dtype=complex)
    return np.abs(w.conj() @ h.T) ** 2


def sinr_from_gains(gains, p, sigma2: float) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    signal = np.diag(gains) * p
    interference = gains @ p - signal
    return signal / (interference + sigma2)


def sinr(p, w, h, sigma2: float, k: int) -> float:
    """SINR of user ``k`` after receive beamforming."""
    w = np.asarray(w, dtype=complex)
    h = np.asarray(h, dtype=complex)
    p = np.asarray(p, dtype=float)
    amps = np.abs(w[k].conj() @ h.T) ** 2
    signal = p[k] * amps[k]
    interference = float(p @ amps - p[k] * amps[k])
    return float(signal / (interference + sigma2))


def sinr_all(p, w, h, sigma2: float) -> np.ndarray:
    return sinr_from_gains(channel_gains(w, h), p, sigma2)


def spectral_efficiency(sinr_value: float) -> float:
    """Achievable rate log2(1 + SINR) in bps/Hz."""
    return float(np.log2(1.0 + sinr_value))


def sample_count(cfg: SystemConfig, task: TaskModel, rate: float) -> tuple[float, int]:
    """Continuous and floored sample counts deliverable at ``rate`` bps/Hz."""
    if rate < 0:
        raise ValueError("rate must be nonnegative")
    v = cfg.B * cfg.T * rate / task.bits_per_sample
    return v, int(math.floor(v))


def task_error(task: TaskModel, v: float) -> float:
    """Model error ``c * v**(-d)`` at sample count ``v > 0`` (no clamping)."""
    if not (v > 0):
        raise ValueError(f"sample count must be positive, got {v}")
    return task.c * float(v) ** (-task.d)


def per_task_errors(cfg: SystemConfig, tasks, rates) -> np.ndarray:
    """Per-task model errors at continuous sample counts; inf where v <= 0."""
    errors = np.empty(len(tasks))
    for k, task in enumerate(tasks):
        v = cfg.B * cfg.T * rates[k] / task.bits_per_sample
        errors[k] = task.c * v ** (-task.d) if v > 0 else math.inf
    return errors


def objective(cfg: SystemConfig, tasks, p, w, theta, ch: ChannelSet) -> float:
    """Worst-case learning error of the allocation (inf if any task starves)."""
    h = composite_channels(ch, theta, cfg.beta)
    rates = np.log2(1.0 + sinr_all(p, w, h, cfg.sigma2))
    return float(np.max(per_task_errors(cfg, tasks, rates)))


def evaluate_allocation(cfg: SystemConfig, tasks, p, w, theta, ch: ChannelSet) -> AllocationState:
    """Validate an allocation and package its evaluation.

    Checks the power budget, beamformer norms, and phase moduli at 1e-9
    tolerances before evaluating.
    """
    p = np.asarray(p, dtype=float)
    w = np.asarray(w, dtype=complex)
    theta = np.asarray(theta, dtype=complex)
    if np.any(p < -UNIT_TOL) or p.sum() > cfg.P + UNIT_TOL:
        raise ValueError("power vector violates the budget constraints")
    if np.max(np.abs(np.linalg.norm(w, axis=1) - 1.0)) > UNIT_TOL:
        raise ValueError("beamformers must have unit norm")
    validate_phase_vector(theta)

    h = composite_channels(ch, theta, cfg.beta)
    rates = np.log2(1.0 + sinr_all(p, w, h, cfg.sigma2))
    errors = per_task_errors(cfg, tasks, rates)
    return AllocationState(
        p=p,
        w=w,
        theta=theta,
        objective=float(np.max(errors)),
        per_task_error=errors,
        per_task_rate=rates,
    )


def clamp_error(err: float) -> float:
    """Clamp a model error into (0, 1] for reporting as a classification rate."""
    return min(1.0, float(err))
