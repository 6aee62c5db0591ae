"""Phase-shift optimization by error-level search over an ADMM feasibility core.

For fixed powers and beamformers, the worst-task error depends on the phase
vector only through the scalars ``theta^H a_ki + b_ki`` with

    a_ki = beta * diag(conj(h_ris_i)) G w_k,      b_ki = h_direct_i^H w_k.

Convention: these quadratic forms live in the conjugate of the physical
phase variable, with ``|theta^H a_ki + b_ki| = |w_k^H h_i(conj(theta))|``, so
every routine in this module works with the conjugate-space vector and
:func:`optimize_theta` conjugates once at each boundary. The unit-modulus
feasible set is invariant under conjugation, so nothing is lost.

The outer loop bisects the achievable worst error ``delta``; each level maps
to per-user SINR thresholds ``gamma_k(delta)`` and a feasibility problem that
ADMM splits into K independent single-constraint projections (solved exactly
through strong duality: eigenbasis + a safeguarded Newton root-find on the
secular equation), a unit-modulus consensus projection, and scaled dual
updates. Variable order within an iteration is q, theta, u, matching the
ADMM derivation. Hitting the iteration cap (or a stalled residual) is
treated as level infeasibility; this is a heuristic, not a certificate, and
only costs search granularity since every accepted phase vector is verified
against the SINR thresholds directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .linalg import hermitian_eig
from .scenario import ChannelSet, SystemConfig, TaskModel

__all__ = [
    "QuadraticForms",
    "build_quadratics",
    "sinr_from_forms",
    "objective_from_forms",
    "gamma_from_delta",
    "QcqpSubproblem",
    "build_qcqp",
    "newton_mu",
    "q_update",
    "theta_update",
    "u_update",
    "AdmmOutcome",
    "admm_feasibility",
    "ThetaResult",
    "optimize_theta",
]

_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class QuadraticForms:
    """Reflected/direct channel scalars seen by beamformer k from user i."""

    a: np.ndarray  # (K, K, M) complex: a[k, i]
    b: np.ndarray  # (K, K) complex: b[k, i]

    @property
    def K(self) -> int:
        return self.a.shape[0]

    @property
    def M(self) -> int:
        return self.a.shape[2]


def build_quadratics(ch: ChannelSet, w, beta: float) -> QuadraticForms:
    """Assemble the per-pair quadratic-form data from channels and beamformers."""
    w = np.asarray(w, dtype=complex)
    gw = w @ ch.G.T                                     # (K, M): row k is G w_k
    a = beta * np.conj(ch.h_ris)[None, :, :] * gw[:, None, :]
    b = w @ ch.h_direct.conj().T                        # b[k, i] = h_d_i^H w_k
    return QuadraticForms(a=a, b=b)


def sinr_from_forms(forms: QuadraticForms, p, sigma2: float, vartheta) -> np.ndarray:
    """Per-user SINRs at the conjugate-space phase vector ``vartheta``."""
    p = np.asarray(p, dtype=float)
    z = forms.a @ np.conj(vartheta) + forms.b
    power = np.abs(z) ** 2
    signal = np.diag(power) * p
    interference = power @ p - signal
    return signal / (interference + sigma2)


def objective_from_forms(forms: QuadraticForms, p, sigma2: float, tasks,
                         B: float, T: float, vartheta) -> float:
    """Worst-task learning error at ``vartheta`` (inf if a task starves)."""
    rates = np.log2(1.0 + sinr_from_forms(forms, p, sigma2, vartheta))
    worst = 0.0
    for k, task in enumerate(tasks):
        v = B * T * rates[k] / task.bits_per_sample
        err = task.c * v ** (-task.d) if v > 0 else math.inf
        worst = max(worst, err)
    return worst


def gamma_from_delta(task: TaskModel, delta: float, B: float, T: float) -> float:
    """SINR threshold guaranteeing task error at most ``delta``.

    Returns +inf when the required exponent overflows (level unreachable).
    """
    if not (delta > 0):
        raise ValueError("error level must be positive")
    exponent = task.bits_per_sample * (task.c / delta) ** (1.0 / task.d) / (B * T)
    if exponent > 1000.0:
        return math.inf
    return math.expm1(exponent * math.log(2.0))


@dataclass(frozen=True)
class QcqpSubproblem:
    """Eigen-factored single-constraint projection problem of one user.

    The constraint is ``q^H A q - 2 Re(b^H q) <= tau`` with A Hermitian of
    rank at most K; ``lam``/``basis`` hold its ascending eigendecomposition.
    """

    lam: np.ndarray        # (M,) ascending eigenvalues of A
    basis: np.ndarray      # (M, M) unitary eigenvectors
    b_tilde: np.ndarray    # (M,) basis^H b
    tau: float
    gamma: float
    scale: float = field(init=False)  # magnitude scale for tolerance tests

    def __post_init__(self):
        s = max(float(np.max(np.abs(self.lam), initial=0.0)),
                float(np.linalg.norm(self.b_tilde)), abs(self.tau), 1.0)
        object.__setattr__(self, "scale", s)

    def constraint_value(self, zeta_tilde: np.ndarray) -> float:
        """q^H A q - 2 Re(b^H q) - tau evaluated in the eigenbasis."""
        quad = float(self.lam @ (np.abs(zeta_tilde) ** 2))
        lin = 2.0 * float(np.real(np.conj(self.b_tilde) @ zeta_tilde))
        return quad - lin - self.tau


def build_qcqp(forms: QuadraticForms, p, sigma2: float, gammas) -> list[QcqpSubproblem]:
    """Per-user QCQP data at SINR thresholds ``gammas`` (eigs computed once)."""
    p = np.asarray(p, dtype=float)
    subs = []
    for k in range(forms.K):
        gamma = float(gammas[k])
        a_kk = forms.a[k, k]
        b_kk = forms.b[k, k]
        a_mat = -p[k] * np.outer(a_kk, a_kk.conj())
        b_vec = p[k] * a_kk * np.conj(b_kk)
        tau = p[k] * abs(b_kk) ** 2 - gamma * sigma2
        for i in range(forms.K):
            if i == k:
                continue
            a_ki = forms.a[k, i]
            b_ki = forms.b[k, i]
            a_mat += gamma * p[i] * np.outer(a_ki, a_ki.conj())
            b_vec -= gamma * p[i] * a_ki * np.conj(b_ki)
            tau -= gamma * p[i] * abs(b_ki) ** 2
        eig = hermitian_eig(a_mat, tol=math.inf)  # construction is Hermitian up to roundoff
        subs.append(QcqpSubproblem(
            lam=eig.eigenvalues,
            basis=eig.eigenvectors,
            b_tilde=eig.eigenvectors.conj().T @ b_vec,
            tau=tau,
            gamma=gamma,
        ))
    return subs


def _chi(lam: np.ndarray, b_t: np.ndarray, zeta_t: np.ndarray, tau: float, mu: float):
    """Secular function chi(mu) and its derivative.

    Callers keep ``mu`` strictly inside the PSD interval, so every
    denominator is positive.
    """
    den = 1.0 + mu * lam
    x = (zeta_t + mu * b_t) / den
    value = float(lam @ (np.abs(x) ** 2) - 2.0 * np.real(np.conj(b_t) @ x) - tau)
    deriv = float(-2.0 * np.sum(np.abs(b_t - lam * zeta_t) ** 2 / den ** 3))
    if math.isnan(value):
        value = -math.inf
    return value, deriv


def _chi_many(lam: np.ndarray, b_t: np.ndarray, zeta_t: np.ndarray, tau: float,
              mus: np.ndarray) -> np.ndarray:
    """chi evaluated at a batch of multipliers (poles map to -inf)."""
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        den = 1.0 + mus[:, None] * lam[None, :]
        x = (zeta_t[None, :] + mus[:, None] * b_t[None, :]) / den
        vals = (np.abs(x) ** 2) @ lam - 2.0 * np.real(x @ np.conj(b_t)) - tau
    return np.where(np.isnan(vals), -math.inf, vals)


def newton_mu(lam: np.ndarray, b_t: np.ndarray, zeta_t: np.ndarray, tau: float,
              tol_scale: float = 1.0, max_iter: int = 200) -> float | None:
    """Root of chi on the multiplier interval keeping I + mu*Lam PSD.

    chi is strictly decreasing there, so a bracketed Newton iteration (with
    bisection fallback whenever a step leaves the bracket) finds the unique
    root. The initial guess is the interval midpoint computed from the
    extreme nonzero eigenvalues of each sign, which for a mixed-signature
    spectrum is -(lmin + lmax) / (2 lmin lmax). Returns None when chi has no
    root (the equality constraint is unreachable).
    """
    chi0, _ = _chi(lam, b_t, zeta_t, tau, 0.0)
    if chi0 == 0.0:
        return 0.0

    lmin = float(lam[0])
    lmax = float(lam[-1])
    zero_tol = 1e-14 * max(abs(lmin), abs(lmax), 1.0)
    left = (-1.0 / lmax) if lmax > zero_tol else -math.inf
    right = (-1.0 / lmin) if lmin < -zero_tol else math.inf

    neg = lam[lam < -zero_tol]
    pos = lam[lam > zero_tol]
    if neg.size and pos.size:
        ln, lp = float(neg.min()), float(pos.max())
        mu0 = -(ln + lp) / (2.0 * ln * lp)
    elif neg.size:
        mu0 = 0.5 * right
    elif pos.size:
        mu0 = max(0.0, 0.5 * left) + 1.0
    else:
        mu0 = 1.0

    # Bracket the root, chi(lo) > 0 > chi(hi); chi decreasing means the root
    # lies right of 0 when chi(0) > 0 and left of 0 otherwise.
    def probe(start: float, end: float):
        if math.isfinite(end):
            cands = start + (end - start) * (1.0 - 0.5 ** np.arange(1.0, 54.0))
        else:
            base = math.copysign(max(1.0, abs(mu0)), end)
            cands = base * 2.0 ** np.arange(0.0, 101.0)
            cands = cands[np.abs(cands) <= 1e30]
        vals = _chi_many(lam, b_t, zeta_t, tau, cands)
        crossed = (vals < 0.0) if end > start else (vals >= 0.0)
        idx = np.nonzero(crossed)[0]
        if idx.size == 0:
            return None, None
        i = int(idx[0])
        anchor = start if i == 0 else float(cands[i - 1])
        return anchor, float(cands[i])

    if chi0 > 0.0:
        lo, hi = probe(0.0, right)
    else:
        hi, lo = probe(0.0, left)
    if hi is None or lo is None:
        return None

    mu = mu0 if lo < mu0 < hi else 0.5 * (lo + hi)
    tol = 1e-12 * max(1.0, abs(tau), abs(chi0), tol_scale)
    for _ in range(max_iter):
        val, der = _chi(lam, b_t, zeta_t, tau, mu)
        if abs(val) <= tol:
            return mu
        if val > 0.0:
            lo = mu
        else:
            hi = mu
        if der < 0.0 and math.isfinite(val):
            step = mu - val / der
        else:
            step = 0.5 * (lo + hi)
        if not (lo < step < hi):
            step = 0.5 * (lo + hi)
        if hi - lo <= 1e-16 * max(1.0, abs(lo), abs(hi)):
            return 0.5 * (lo + hi)
        mu = step
    return mu


def q_update(sub: QcqpSubproblem, zeta: np.ndarray) -> tuple[np.ndarray | None, float]:
    """Projection of ``zeta`` onto the SINR constraint set of one user.

    Feasible anchors are returned unchanged (mu = 0); otherwise the optimal
    point sits on the constraint surface and is recovered from the
    Lagrangian stationarity in the eigenbasis. Returns (None, nan) when the
    subproblem is infeasible.
    """
    zeta_t = sub.basis.conj().T @ zeta
    if sub.constraint_value(zeta_t) <= 0.0:
        return zeta, 0.0
    mu = newton_mu(sub.lam, sub.b_tilde, zeta_t, sub.tau, tol_scale=sub.scale)
    if mu is None:
        return None, math.nan
    x = (zeta_t + mu * sub.b_tilde) / (1.0 + mu * sub.lam)
    return sub.basis @ x, mu


def theta_update(q: np.ndarray, u: np.ndarray, theta_prev: np.ndarray) -> np.ndarray:
    """Consensus projection onto the unit circle, entrywise.

    Entries whose consensus mean is exactly zero keep their previous phase
    (the circle projection of zero is undefined).
    """
    s = np.mean(q + u, axis=0)
    theta = np.where(s != 0.0, np.exp(1j * np.angle(s)), theta_prev)
    return theta


def u_update(u: np.ndarray, q: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Scaled dual ascent step."""
    return u + q - theta


@dataclass(frozen=True)
class AdmmOutcome:
    feasible: bool
    theta: np.ndarray           # conjugate-space phase vector
    q: np.ndarray | None
    u: np.ndarray | None
    residuals: list[float]
    iterations: int


def admm_feasibility(forms: QuadraticForms, p, sigma2: float, gammas, theta_init,
                     q_init=None, u_init=None, rho: float = 1.0,
                     max_iter: int = 1000, eps: float = 1e-6,
                     sinr_slack: float = 1e-6,
                     stall_window: int = 250,
                     sinr_exit: bool = False) -> AdmmOutcome:
    """Search a unit-modulus phase vector meeting all SINR thresholds.

    The primal residual is ``sum_k ||q_k - theta||``; convergence additionally
    requires the consensus vector itself to satisfy every threshold within
    ``gamma_k * (1 - sinr_slack)``. With ``sinr_exit`` the run stops as soon
    as the consensus vector meets the thresholds even before the residual
    settles (used inside the alternating loop, where only the feasibility
    verdict matters). ``rho`` is kept for interface parity: with pure
    indicator objectives both primal blocks are projections, so the
    iteration is independent of the penalty value.
    """
    del rho
    p = np.asarray(p, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    theta = np.asarray(theta_init, dtype=complex).copy()
    k_users, m = forms.K, forms.M
    if not np.all(np.isfinite(gammas)):
        return AdmmOutcome(False, theta, None, None, [], 0)

    if sinr_exit:
        sinrs = sinr_from_forms(forms, p, sigma2, theta)
        if np.all(sinrs >= gammas * (1.0 - sinr_slack)):
            return AdmmOutcome(True, theta, q_init, u_init, [], 0)

    subs = build_qcqp(forms, p, sigma2, gammas)
    u = np.zeros((k_users, m), dtype=complex) if u_init is None else np.asarray(u_init, dtype=complex).copy()
    q = theta[None, :].repeat(k_users, axis=0) if q_init is None else np.asarray(q_init, dtype=complex).copy()

    residuals: list[float] = []
    best_resid = math.inf
    best_resid_iter = 0
    for it in range(1, max_iter + 1):
        for k in range(k_users):
            qk, _ = q_update(subs[k], theta - u[k])
            if qk is None:
                return AdmmOutcome(False, theta, q, u, residuals, it)
            q[k] = qk
        theta = theta_update(q, u, theta)
        u = u_update(u, q, theta)
        resid = float(np.sum(np.linalg.norm(q - theta[None, :], axis=1)))
        residuals.append(resid)
        if resid < best_resid * 0.99:
            best_resid, best_resid_iter = resid, it
        if resid < eps or sinr_exit:
            sinrs = sinr_from_forms(forms, p, sigma2, theta)
            if np.all(sinrs >= gammas * (1.0 - sinr_slack)):
                return AdmmOutcome(True, theta, q, u, residuals, it)
        if it - best_resid_iter > stall_window:
            break
    return AdmmOutcome(False, theta, q, u, residuals, len(residuals))


@dataclass(frozen=True)
class ThetaResult:
    theta: np.ndarray            # physical phase vector
    objective: float             # worst error achieved at theta
    improved: bool               # False when theta_init is returned unchanged
    levels: list[tuple[float, bool]]   # (delta, feasible) per bisection level
    residual_traces: list[list[float]]


def _sinr_upper_bounds(forms: QuadraticForms, p, sigma2: float) -> np.ndarray:
    """Interference-free SINR bounds that no phase vector can exceed."""
    p = np.asarray(p, dtype=float)
    amp = np.abs(forms.a[np.arange(forms.K), np.arange(forms.K)]).sum(axis=1)
    amp += np.abs(forms.b[np.arange(forms.K), np.arange(forms.K)])
    return p * amp ** 2 / sigma2


def optimize_theta(forms: QuadraticForms, p, tasks, cfg: SystemConfig, theta_init,
                   els_tol: float = 1e-4, max_iter: int = 1000,
                   eps: float = 1e-6, max_levels: int = 60,
                   stall_window: int = 250, sinr_exit: bool = False) -> ThetaResult:
    """Bisection on the achievable worst error wrapping the ADMM core.

    The upper bracket is the worst error of ``theta_init`` (always feasible,
    achieved by the initializer itself) capped at 1; the lower bracket is the
    worst of the interference-free per-task error bounds. Each ADMM run warm
    starts from the last feasible state, every feasible level tightens the
    bracket to the error actually achieved, and the best feasible vector is
    returned (``theta_init`` unchanged when nothing better is certified).
    """
    p = np.asarray(p, dtype=float)
    vartheta = np.conj(np.asarray(theta_init, dtype=complex))
    B, T, sigma2 = cfg.B, cfg.T, cfg.sigma2

    obj0 = objective_from_forms(forms, p, sigma2, tasks, B, T, vartheta)
    delta_hi = min(1.0, obj0)

    sinr_ub = _sinr_upper_bounds(forms, p, sigma2)
    delta_lo = 0.0
    for k, task in enumerate(tasks):
        v = B * T * math.log2(1.0 + sinr_ub[k]) / task.bits_per_sample
        delta_lo = max(delta_lo, task.c * v ** (-task.d) if v > 0 else math.inf)
    delta_lo = min(delta_lo, delta_hi)

    best = vartheta
    best_q = None
    best_u = None
    improved = False
    levels: list[tuple[float, bool]] = []
    traces: list[list[float]] = []

    while delta_hi - delta_lo > els_tol and len(levels) < max_levels:
        delta = 0.5 * (delta_lo + delta_hi)
        gammas = [gamma_from_delta(task, delta, B, T) for task in tasks]
        out = admm_feasibility(forms, p, sigma2, gammas, best,
                               q_init=best_q, u_init=best_u,
                               max_iter=max_iter, eps=eps, stall_window=stall_window,
                               sinr_exit=sinr_exit)
        levels.append((delta, out.feasible))
        traces.append(out.residuals)
        if out.feasible:
            best, best_q, best_u = out.theta, out.q, out.u
            improved = True
            achieved = objective_from_forms(forms, p, sigma2, tasks, B, T, best)
            delta_hi = min(delta, max(achieved, delta_lo))
        else:
            delta_lo = delta

    final_obj = objective_from_forms(forms, p, sigma2, tasks, B, T, best)
    if not improved or final_obj > obj0:
        return ThetaResult(theta=np.conj(vartheta), objective=obj0, improved=False,
                           levels=levels, residual_traces=traces)
    return ThetaResult(theta=np.conj(best), objective=final_obj, improved=True,
                       levels=levels, residual_traces=traces)
