"""Closed-form optimal receive beamformers.

For fixed powers and phases the per-user SINR is a generalized Rayleigh
quotient in the beamformer, maximized by the MMSE-style direction

    w_k  propto  (I_N + sum_i (p_i / s2) h_i h_i^H)^{-1} h_k,

normalized to unit norm. The sum deliberately includes i = k: the resulting
vector differs from the interference-only variant by a positive scaling
along h_k, which leaves the SINR untouched (covered by a regression test).
The inverse is applied through a linear solve rather than explicit
inversion; the matrix is identity-plus-PSD and well conditioned.
"""

from __future__ import annotations

import numpy as np

from .linalg import solve_linear
from .metrics import composite_channels
from .scenario import ChannelSet

__all__ = ["optimal_beamformer", "optimal_beamformers_all"]


class DegenerateChannelError(ValueError):
    """Raised when a user's composite channel is identically zero."""


def _mmse_direction(h: np.ndarray, p: np.ndarray, sigma2: float, k: int) -> np.ndarray:
    n = h.shape[1]
    gram = np.eye(n, dtype=complex)
    for i in range(h.shape[0]):
        gram += (p[i] / sigma2) * np.outer(h[i], h[i].conj())
    hk = h[k]
    norm_hk = np.linalg.norm(hk)
    if norm_hk == 0.0:
        raise DegenerateChannelError(f"composite channel of user {k} is zero")
    w = solve_linear(gram, hk)
    return w / np.linalg.norm(w)


def optimal_beamformer(ch: ChannelSet, theta, p, k: int, sigma2: float,
                       beta: float = 1.0) -> np.ndarray:
    """Unit-norm SINR-optimal receive beamformer for user ``k``."""
    p = np.asarray(p, dtype=float)
    h = composite_channels(ch, theta, beta)
    return _mmse_direction(h, p, sigma2, k)


def optimal_beamformers_all(ch: ChannelSet, theta, p, sigma2: float,
                            beta: float = 1.0) -> np.ndarray:
    """All K optimal beamformers as a (K, N) array (per-user solves)."""
    p = np.asarray(p, dtype=float)
    h = composite_channels(ch, theta, beta)
    return np.stack([_mmse_direction(h, p, sigma2, k) for k in range(h.shape[0])])
