"""Min-max power control by successive convex approximation.

With beamformers and phases fixed, the worst-task learning error is a
nonconvex function of the transmit powers. Each SCA round replaces every
per-task error by a convex majorizer that linearizes the interference log
around the current iterate (the anchor): writing ``g_k`` for the beamformed
power gains and ``S*_k`` for the anchor interference-plus-noise of task k,

    bracket_k(p) = ln(sum_i g_ki p_i + s2) - (sum_{i!=k} g_ki p_i + s2)/S*_k
                   - ln(S*_k) + 1,
    surrogate_k(p) = c_k * [B*T/(D_k ln 2) * bracket_k(p)] ** (-d_k).

The majorizer upper-bounds the true error, is convex, and is tangent (value
and gradient) at the anchor, so iterating exact minimizers of the surrogate
min-max drives the true objective monotonically to a stationary point.

Each convex min-max subproblem is solved in-house, cheapest method first:

1. a damped Newton solve of the balanced system (every task at a common
   error level, tight budget), accepted only when its dual weights certify
   optimality; this covers the generic instance in a handful of O(K^3) steps;
2. a log-barrier interior-point solve of the epigraph form (analytic
   constraint gradients and Hessians), which handles every boundary pattern
   the balance assumption misses (slack budget, strictly inactive tasks);
3. bisection on the achievable error level with projected supergradient
   ascent of the worst log margin over the capped simplex (step
   ``P/sqrt(it)``, sorted-threshold projection) as a derivative-light
   fallback bracket, followed by one more barrier polish.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .scenario import TaskModel

__all__ = [
    "SurrogateContext",
    "surrogate_value",
    "surrogate_values",
    "surrogate_gradient",
    "surrogate_gradients",
    "true_error_values",
    "true_objective",
    "project_capped_simplex",
    "solve_subproblem",
    "SubproblemResult",
    "optimize_power",
    "PowerResult",
    "stationarity_residual",
]

_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class SurrogateContext:
    """Frozen data of one convex subproblem: gains, anchor, and constants."""

    gains: np.ndarray            # (K, K) real, gains[k, i] = |w_k^H h_i|^2
    p_star: np.ndarray           # (K,) anchor powers
    sigma2: float
    B: float
    T: float
    P: float
    tasks: Sequence[TaskModel]
    pref: np.ndarray = field(init=False)     # B*T / (D_k ln 2)
    s_star: np.ndarray = field(init=False)   # anchor interference + noise

    def __post_init__(self):
        gains = np.asarray(self.gains, dtype=float)
        p_star = np.asarray(self.p_star, dtype=float)
        k = gains.shape[0]
        if gains.shape != (k, k):
            raise ValueError("gains must be a square matrix")
        if np.any(gains < 0):
            raise ValueError("gains must be nonnegative")
        if p_star.shape != (k,) or np.any(p_star < -1e-12) or p_star.sum() > self.P + 1e-9:
            raise ValueError("anchor powers must be feasible")
        if len(self.tasks) != k:
            raise ValueError("need one task model per user")
        object.__setattr__(self, "gains", gains)
        object.__setattr__(self, "p_star", np.maximum(p_star, 0.0))
        pref = self.B * self.T / (np.array([t.bits_per_sample for t in self.tasks]) * math.log(2.0))
        s_star = gains @ self.p_star - np.diag(gains) * self.p_star + self.sigma2
        object.__setattr__(self, "pref", pref)
        object.__setattr__(self, "s_star", s_star)

    @property
    def K(self) -> int:
        return self.gains.shape[0]

    @property
    def c(self) -> np.ndarray:
        return np.array([t.c for t in self.tasks])

    @property
    def d(self) -> np.ndarray:
        return np.array([t.d for t in self.tasks])


def _brackets(ctx: SurrogateContext, p: np.ndarray) -> np.ndarray:
    """Concave bracket of the surrogate, scaled by ``pref`` (one per task)."""
    s_all = ctx.gains @ p + ctx.sigma2
    s_int = s_all - np.diag(ctx.gains) * p
    return ctx.pref * (np.log(s_all) - s_int / ctx.s_star - np.log(ctx.s_star) + 1.0)


def surrogate_values(ctx: SurrogateContext, p) -> np.ndarray:
    """All K surrogate errors at ``p`` (+inf where the bracket is <= 0)."""
    p = np.asarray(p, dtype=float)
    br = _brackets(ctx, p)
    vals = np.full(ctx.K, np.inf)
    ok = br > 0
    vals[ok] = ctx.c[ok] * br[ok] ** (-ctx.d[ok])
    return vals


def surrogate_value(ctx: SurrogateContext, p, k: int) -> float:
    return float(surrogate_values(ctx, p)[k])


def surrogate_gradients(ctx: SurrogateContext, p) -> np.ndarray:
    """Gradient matrix (K, K): row k is the gradient of surrogate_k."""
    p = np.asarray(p, dtype=float)
    br = _brackets(ctx, p)
    if np.any(br <= 0):
        raise ValueError("surrogate undefined (non-positive bracket) at this point")
    s_all = ctx.gains @ p + ctx.sigma2
    # d bracket_k / d p_j = pref_k * g_kj * (1/s_all_k - [j != k]/s_star_k)
    inner = ctx.gains / s_all[:, None]
    off = ctx.gains / ctx.s_star[:, None]
    np.fill_diagonal(off, 0.0)
    dbr = ctx.pref[:, None] * (inner - off)
    outer = -ctx.c * ctx.d * br ** (-ctx.d - 1.0)
    return outer[:, None] * dbr


def surrogate_gradient(ctx: SurrogateContext, p, k: int) -> np.ndarray:
    return surrogate_gradients(ctx, p)[k]


def true_error_values(gains, tasks, B: float, T: float, sigma2: float, p) -> np.ndarray:
    """Exact per-task errors at ``p`` (+inf for tasks with zero SINR)."""
    gains = np.asarray(gains, dtype=float)
    p = np.asarray(p, dtype=float)
    signal = np.diag(gains) * p
    interference = gains @ p - signal
    rate_nats = np.log1p(signal / (interference + sigma2))
    pref = B * T / (np.array([t.bits_per_sample for t in tasks]) * math.log(2.0))
    arg = pref * rate_nats
    c = np.array([t.c for t in tasks])
    d = np.array([t.d for t in tasks])
    vals = np.full(len(tasks), np.inf)
    ok = arg > 0
    vals[ok] = c[ok] * arg[ok] ** (-d[ok])
    return vals


def true_objective(gains, tasks, B: float, T: float, sigma2: float, p) -> float:
    return float(np.max(true_error_values(gains, tasks, B, T, sigma2, p)))


def project_capped_simplex(p, budget: float) -> np.ndarray:
    """Euclidean projection onto {p >= 0, sum(p) <= budget}.

    Clipping suffices when the clipped point fits the budget; otherwise the
    point is projected onto the simplex face by the sorted-threshold rule.
    """
    p = np.asarray(p, dtype=float)
    clipped = np.maximum(p, 0.0)
    if clipped.sum() <= budget:
        return clipped
    u = np.sort(p)[::-1]
    css = np.cumsum(u) - budget
    idx = np.arange(1, p.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    tau = css[rho] / (rho + 1.0)
    return np.maximum(p - tau, 0.0)


def _thresholds(ctx: SurrogateContext, delta: float) -> np.ndarray:
    """Required brackets t_k = (c_k/delta)^(1/d_k) for error level delta."""
    log_t = (np.log(ctx.c) - math.log(delta)) / ctx.d
    with np.errstate(over="ignore"):
        return np.exp(log_t)


def _feasibility_ascent(ctx: SurrogateContext, t: np.ndarray, p0: np.ndarray,
                        max_iter: int) -> tuple[bool, np.ndarray, float]:
    """Maximize the worst log margin min_k d_k (ln bracket_k - ln t_k).

    The log scaling makes margins comparable across tasks (a margin of -x
    means the task error is e^x times above the level). Declares the level
    feasible as soon as the worst margin reaches 0; a level is abandoned
    early when the best margin stalls (heuristic: ascent failure is evidence,
    not proof, of infeasibility, and the closing Newton stage recovers any
    level mislabeled here).
    """
    if not np.all(np.isfinite(t)):
        return False, p0, -1.0
    log_t = np.log(t)
    p = project_capped_simplex(p0, ctx.P)
    diag = np.diag(ctx.gains)
    best = -np.inf
    p_best = p
    last_gain_iter = 0
    for it in range(1, max_iter + 1):
        s_all = ctx.gains @ p + ctx.sigma2
        s_int = s_all - diag * p
        br = ctx.pref * (np.log(s_all) - s_int / ctx.s_star - np.log(ctx.s_star) + 1.0)
        with np.errstate(invalid="ignore"):
            margins = np.where(br > 0, ctx.d * (np.log(np.maximum(br, _TINY)) - log_t), -np.inf)
        k = int(np.argmin(margins))
        if margins[k] > best or not math.isfinite(best):
            if not math.isfinite(best) or margins[k] > best + max(1e-12, 1e-9 * abs(best)):
                last_gain_iter = it
            best = float(margins[k])
            p_best = p
        if best >= 0.0:
            return True, p_best, best
        if it >= 400 and best < -0.5:
            break
        if it - last_gain_iter > 250:
            break
        # Supergradient of the worst margin (scale factors cancel once
        # normalized; br <= 0 falls back to the raw bracket gradient).
        grad = ctx.pref[k] * ctx.gains[k] * (1.0 / s_all[k] - 1.0 / ctx.s_star[k])
        grad[k] = ctx.pref[k] * ctx.gains[k, k] / s_all[k]
        norm = np.linalg.norm(grad)
        if norm == 0.0:
            break
        p = project_capped_simplex(p + (ctx.P / math.sqrt(it)) * grad / norm, ctx.P)
    return best >= 0.0, p_best, best


def _bracket_gradients(ctx: SurrogateContext, p: np.ndarray, s_all: np.ndarray) -> np.ndarray:
    inner = ctx.gains / s_all[:, None]
    off = ctx.gains / ctx.s_star[:, None]
    np.fill_diagonal(off, 0.0)
    return ctx.pref[:, None] * (inner - off)


def _surrogate_hessians(ctx: SurrogateContext, p: np.ndarray) -> np.ndarray:
    """Analytic Hessians of the K surrogates, stacked as (K, K, K).

    Each surrogate is c * bracket^(-d) with a bracket whose curvature comes
    only from the total-power log term, so the Hessian is a sum of two
    rank-one PSD pieces.
    """
    br = _brackets(ctx, p)
    s_all = ctx.gains @ p + ctx.sigma2
    dbr = _bracket_gradients(ctx, p, s_all)
    hess = np.empty((ctx.K, ctx.K, ctx.K))
    for k in range(ctx.K):
        coef1 = ctx.c[k] * ctx.d[k] * (ctx.d[k] + 1.0) * br[k] ** (-ctx.d[k] - 2.0)
        coef2 = ctx.c[k] * ctx.d[k] * br[k] ** (-ctx.d[k] - 1.0) * ctx.pref[k] / s_all[k] ** 2
        hess[k] = coef1 * np.outer(dbr[k], dbr[k]) + coef2 * np.outer(ctx.gains[k], ctx.gains[k])
    return hess


def _dual_weights(ctx: SurrogateContext, p: np.ndarray, active: np.ndarray):
    """Convex task weights and budget multiplier solving the stationarity system."""
    grads = surrogate_gradients(ctx, p)[active]
    n = len(active)
    sys_mat = np.zeros((ctx.K + 1, n + 1))
    sys_mat[:ctx.K, :n] = grads.T
    sys_mat[:ctx.K, n] = 1.0
    sys_mat[ctx.K, :n] = 1.0
    rhs = np.zeros(ctx.K + 1)
    rhs[ctx.K] = 1.0
    sol, *_ = np.linalg.lstsq(sys_mat, rhs, rcond=None)
    return sol[:n], float(sol[n]), grads


def _newton_balance(ctx: SurrogateContext, p0: np.ndarray, delta0: float) -> np.ndarray | None:
    """Damped Newton solve of the fully-balanced optimality system.

    Solves ``ln surrogate_k(p) = ln delta`` for every task plus a tight
    budget, in the unknowns (p, ln delta), with fraction-to-boundary damping
    and residual backtracking. This is the generic optimum shape: errors
    blow up as any single power vanishes, so every task meets the common
    level with positive power. Returns None when the iteration fails;
    dual feasibility is checked by the caller.
    """
    k = ctx.K
    p = np.maximum(np.asarray(p0, dtype=float), 1e-9 * ctx.P)
    p *= min(1.0, ctx.P / p.sum())
    log_delta = math.log(delta0)
    log_c = np.log(ctx.c)

    def system(pv: np.ndarray, ld: float):
        br = _brackets(ctx, pv)
        if np.any(br <= 0):
            return None, None
        resid = np.empty(k + 1)
        resid[:k] = (log_c - ctx.d * np.log(br)) - ld
        resid[k] = (pv.sum() - ctx.P) / ctx.P
        return resid, br

    resid, br = system(p, log_delta)
    if resid is None:
        return None
    norm = float(np.linalg.norm(resid))
    for _ in range(80):
        if norm < 1e-13:
            break
        s_all = ctx.gains @ p + ctx.sigma2
        dbr = _bracket_gradients(ctx, p, s_all)
        jac = np.zeros((k + 1, k + 1))
        jac[:k, :k] = -(ctx.d / br)[:, None] * dbr
        jac[:k, k] = -1.0
        jac[k, :k] = 1.0 / ctx.P
        try:
            step = np.linalg.solve(jac, -resid)
        except np.linalg.LinAlgError:
            return None
        dp, dld = step[:k], step[k]
        alpha = 1.0
        shrink = dp < 0
        if np.any(shrink):
            alpha = min(1.0, float(np.min(0.99 * p[shrink] / -dp[shrink])))
        accepted = False
        for _ in range(40):
            cand_p = p + alpha * dp
            cand_ld = log_delta + alpha * dld
            cand_resid, cand_br = system(cand_p, cand_ld)
            if cand_resid is not None:
                cand_norm = float(np.linalg.norm(cand_resid))
                if cand_norm < (1.0 - 1e-4 * alpha) * norm:
                    p, log_delta, resid, br, norm = cand_p, cand_ld, cand_resid, cand_br, cand_norm
                    accepted = True
                    break
            alpha *= 0.5
        if not accepted:
            break  # stagnated at floating-point resolution; check the residual
    if norm >= 1e-10:
        return None
    return p


def _barrier_solve(ctx: SurrogateContext, p0: np.ndarray) -> np.ndarray | None:
    """Interior-point solve of the epigraph form of the surrogate min-max.

    Minimizes ``t`` subject to every surrogate below ``t``, the power budget,
    and nonnegativity, by damped Newton on the log-barrier with a geometric
    barrier schedule. The problem is convex with analytic constraint
    Hessians, and the barrier handles all boundary structure (inactive
    tasks, slack budget) without case analysis. The final barrier weight
    leaves a suboptimality orders below the 1e-5-relative contract.
    """
    k = ctx.K
    p = np.maximum(np.asarray(p0, dtype=float), 1e-8 * ctx.P / k)
    p *= min(1.0, 0.98 * ctx.P / p.sum())
    vals = surrogate_values(ctx, p)
    if not np.all(np.isfinite(vals)):
        p = np.full(k, 0.98 * ctx.P / k)
        vals = surrogate_values(ctx, p)
        if not np.all(np.isfinite(vals)):
            return None
    t = 1.05 * float(vals.max()) + _TINY
    scale = max(t, _TINY)
    mu = 0.1 * scale

    def barrier_value(pv, tv, muv):
        v = surrogate_values(ctx, pv)
        s = tv - v
        slack = ctx.P - pv.sum()
        if np.any(s <= 0) or slack <= 0 or np.any(pv <= 0) or not np.all(np.isfinite(v)):
            return math.inf
        return tv - muv * (float(np.sum(np.log(s))) + math.log(slack) + float(np.sum(np.log(pv))))

    while mu > 1e-13 * scale:
        value = barrier_value(p, t, mu)
        for _ in range(60):
            vals = surrogate_values(ctx, p)
            grads = surrogate_gradients(ctx, p)
            hess = _surrogate_hessians(ctx, p)
            s = t - vals
            slack = ctx.P - p.sum()
            inv_s = 1.0 / s
            grad_p = mu * (inv_s @ grads + 1.0 / slack - 1.0 / p)
            grad_t = 1.0 - mu * inv_s.sum()
            h_pp = mu * (np.tensordot(inv_s, hess, axes=1)
                         + grads.T @ (grads * inv_s[:, None] ** 2)
                         + 1.0 / slack ** 2
                         + np.diag(1.0 / p ** 2))
            h_pt = -mu * (inv_s ** 2 @ grads)
            h_tt = mu * float(inv_s ** 2 @ np.ones(k))
            full_h = np.empty((k + 1, k + 1))
            full_h[:k, :k] = h_pp
            full_h[:k, k] = h_pt
            full_h[k, :k] = h_pt
            full_h[k, k] = h_tt
            rhs = -np.concatenate([grad_p, [grad_t]])
            try:
                step = np.linalg.solve(full_h, rhs)
            except np.linalg.LinAlgError:
                return None
            dp, dt = step[:k], step[k]
            newton_dec = float(rhs @ step)

            # fraction-to-boundary on p > 0 and the budget slack
            alpha = 1.0
            shrink = dp < 0
            if np.any(shrink):
                alpha = min(alpha, float(np.min(0.995 * p[shrink] / -dp[shrink])))
            dsum = dp.sum()
            if dsum > 0:
                alpha = min(alpha, 0.995 * slack / dsum)
            accepted = False
            for _ in range(50):
                cand_value = barrier_value(p + alpha * dp, t + alpha * dt, mu)
                if cand_value < value:
                    p, t = p + alpha * dp, t + alpha * dt
                    value = cand_value
                    accepted = True
                    break
                alpha *= 0.5
            if not accepted or newton_dec < 1e-18 * scale:
                break
        mu *= 0.1
    return p


@dataclass(frozen=True)
class SubproblemResult:
    p: np.ndarray
    value: float          # surrogate min-max at p
    converged: bool
    levels: int


def _try_balance(ctx: SurrogateContext, p0: np.ndarray, delta0: float) -> np.ndarray | None:
    """Balanced Newton fast path, accepted only with dual-feasible weights."""
    p = _newton_balance(ctx, p0, delta0)
    if p is None:
        return None
    lam, nu, grads = _dual_weights(ctx, p, np.arange(ctx.K))
    gscale = float(np.max(np.abs(grads))) + _TINY
    if np.linalg.norm(lam @ grads + nu) > 1e-9 * gscale:
        return None
    if np.any(lam < -1e-9) or nu < -1e-9 * gscale:
        return None
    return p


def solve_subproblem(ctx: SurrogateContext, ascent_iters: int = 2000,
                     rel_tol: float = 1e-6, max_levels: int = 80) -> SubproblemResult:
    """Minimize the worst surrogate error over the power budget.

    Three stages, cheapest first: the balanced Newton fast path (the generic
    every-task-active optimum, certified by its dual weights), the
    interior-point epigraph solve (covers every boundary pattern), and the
    level-bisection/supergradient search as a last resort with a closing
    barrier polish from its incumbent. The returned point never exceeds the
    anchor's objective.
    """
    anchor_vals = surrogate_values(ctx, ctx.p_star)
    p_best = ctx.p_star.copy()
    best_val = float(np.max(anchor_vals))
    if not math.isfinite(best_val):
        # Degenerate anchor (some task at zero SINR): restart from uniform.
        uniform = np.full(ctx.K, ctx.P / ctx.K)
        p = _barrier_solve(ctx, uniform)
        if p is None:
            p = uniform
        val = float(np.max(surrogate_values(ctx, p)))
        return SubproblemResult(p=p, value=val, converged=math.isfinite(val), levels=0)

    p_cand = _try_balance(ctx, p_best, best_val)
    if p_cand is None:
        p_cand = _barrier_solve(ctx, p_best)
    if p_cand is not None:
        val = float(np.max(surrogate_values(ctx, p_cand)))
        if val <= best_val * (1.0 + 1e-12):
            return SubproblemResult(p=p_cand, value=val, converged=True, levels=0)

    lo = 0.0
    levels = 0
    while best_val - lo > rel_tol * max(best_val, _TINY) and levels < max_levels:
        delta = 0.5 * (lo + best_val)
        feasible, p_f, _ = _feasibility_ascent(ctx, _thresholds(ctx, delta), p_best, ascent_iters)
        if feasible:
            achieved = float(np.max(surrogate_values(ctx, p_f)))
            if achieved < best_val:
                p_best, best_val = p_f, achieved
            else:
                best_val = min(best_val, delta)
        else:
            lo = delta
        levels += 1

    p_cand = _barrier_solve(ctx, p_best)
    if p_cand is not None:
        val = float(np.max(surrogate_values(ctx, p_cand)))
        if val < best_val:
            p_best, best_val = p_cand, val
    return SubproblemResult(p=p_best, value=best_val, converged=levels < max_levels, levels=levels)


@dataclass(frozen=True)
class PowerResult:
    p: np.ndarray
    trace: list[float]    # true min-max error, starting from the initial point
    converged: bool
    iterations: int


def optimize_power(gains, tasks, B: float, T: float, P: float, sigma2: float,
                   p_init=None, tol: float = 1e-6, max_iter: int = 50,
                   ascent_iters: int = 2000) -> PowerResult:
    """Full SCA loop: re-anchor, solve the convex subproblem, repeat.

    Starts from the uniform split P/K by default and stops when the true
    objective changes by less than ``tol * max(1, obj)`` or after
    ``max_iter`` rounds. The returned trace is nonincreasing.
    """
    gains = np.asarray(gains, dtype=float)
    k = gains.shape[0]
    p = np.full(k, P / k) if p_init is None else np.asarray(p_init, dtype=float)
    if np.any(p < 0) or p.sum() > P + 1e-9:
        raise ValueError("initial powers must be feasible")

    trace = [true_objective(gains, tasks, B, T, sigma2, p)]
    converged = False
    iterations = 0
    for _ in range(max_iter):
        ctx = SurrogateContext(gains=gains, p_star=p, sigma2=sigma2, B=B, T=T, P=P, tasks=tasks)
        sub = solve_subproblem(ctx, ascent_iters=ascent_iters)
        obj_new = true_objective(gains, tasks, B, T, sigma2, sub.p)
        iterations += 1
        if obj_new > trace[-1] + 1e-12 * max(1.0, trace[-1]):
            # Numerical noise: keep the previous iterate.
            converged = True
            break
        p = sub.p
        trace.append(obj_new)
        if abs(trace[-1] - trace[-2]) < tol * max(1.0, trace[-2]):
            converged = True
            break
    return PowerResult(p=p, trace=trace, converged=converged, iterations=iterations)


def stationarity_residual(ctx: SurrogateContext, p, active_tol: float = 1e-6) -> float:
    """Relative KKT residual of the surrogate min-max at ``p``.

    Over every support of convex weights on the active tasks, solves the
    constrained least-squares picking the weights (and budget multiplier,
    when the budget binds) whose aggregated gradient is closest to the
    normal cone at ``p``, then reports the smallest such distance normalized
    by the largest active gradient norm.
    """
    from itertools import combinations

    p = np.asarray(p, dtype=float)
    vals = surrogate_values(ctx, p)
    top = float(vals.max())
    active = np.nonzero(vals >= top - active_tol * max(1.0, abs(top)))[0]
    grads = surrogate_gradients(ctx, p)[active]
    n = len(active)
    gscale = float(np.max(np.linalg.norm(grads, axis=1)))

    free = p > 1e-12 * ctx.P
    budget_active = p.sum() >= ctx.P * (1.0 - 1e-9)

    def residual_for(lam: np.ndarray) -> float:
        y = lam @ grads
        nu = max(0.0, -float(y[free].mean())) if budget_active else 0.0
        z = y + nu
        z[~free] = np.minimum(0.0, z[~free])
        return float(np.linalg.norm(z))

    candidates = [np.full(n, 1.0 / n)]
    for size in range(1, n + 1):
        for support in combinations(range(n), size):
            s = list(support)
            cols = [grads[i, free] for i in s]
            use_nu = budget_active
            if use_nu:
                cols.append(np.ones(int(free.sum())))
            a = np.stack(cols, axis=1)
            m = a.shape[1]
            kkt = np.zeros((m + 1, m + 1))
            kkt[:m, :m] = 2.0 * a.T @ a
            kkt[:m, m] = [1.0] * size + ([0.0] if use_nu else [])
            kkt[m, :m] = kkt[:m, m]
            rhs = np.zeros(m + 1)
            rhs[m] = 1.0
            try:
                sol = np.linalg.solve(kkt, rhs)
            except np.linalg.LinAlgError:
                sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
            lam = np.zeros(n)
            lam[s] = sol[:size]
            if np.any(lam < -1e-9) or abs(lam.sum() - 1.0) > 1e-6:
                continue
            candidates.append(np.maximum(lam, 0.0) / max(np.maximum(lam, 0.0).sum(), _TINY))
    best = min(residual_for(lam) for lam in candidates)
    return best / max(gscale, _TINY)
