"""Projections and projected-ascent solvers for the convex block subproblems.

Every convex subproblem in the block-coordinate solver maximizes a concave
aggregate of affine pieces over a product of probability simplices or
complex unit disks.  Smooth aggregates (sums of logs) are handled by
monotone projected gradient ascent with Armijo backtracking; max-min
aggregates are smoothed by a softmin with geometrically decreasing
temperature, each stage warm-starting the next, so the iterates converge to
the nonsmooth optimum without step-size tuning.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LN2 = np.log(2.0)


def project_simplex(y: np.ndarray, axis: int = -1) -> np.ndarray:
    """Euclidean projection of every slice along ``axis`` onto the simplex.

    Sort-based: find the largest k with sorted[k] > (cumsum[k] - 1) / k and
    clip at that threshold.
    """
    y = np.moveaxis(np.asarray(y, dtype=float), axis, -1)
    n = y.shape[-1]
    srt = -np.sort(-y, axis=-1)
    csum = np.cumsum(srt, axis=-1) - 1.0
    thresh = csum / np.arange(1, n + 1)
    active = srt > thresh
    k = n - 1 - np.argmax(active[..., ::-1], axis=-1)
    tau = np.take_along_axis(thresh, k[..., None], axis=-1)
    out = np.maximum(y - tau, 0.0)
    return np.moveaxis(out, -1, axis)


def project_disks(w: np.ndarray) -> np.ndarray:
    """Clip each complex entry to the closed unit disk."""
    mag = np.abs(w)
    return np.where(mag > 1.0, w / np.maximum(mag, 1e-300), w)


@dataclass
class SubsolverResult:
    x: np.ndarray
    value: float        # true (nonsmoothed) objective at the returned point
    iterations: int
    improved: bool      # value rose above the starting point
    converged: bool     # finished its schedule rather than hitting the cap


def armijo_ascent(f_and_grad, project, x0: np.ndarray, max_iter: int,
                  scale: float, patience_tol: float,
                  alpha0: float = 1.0) -> tuple[np.ndarray, float, int, bool]:
    """Monotone projected gradient ascent with backtracking line search.

    Stops when the line search fails outright or three consecutive accepted
    steps each improve by less than ``patience_tol``.  Returns
    (x, value, evaluations, finished).
    """
    x = project(np.array(x0, copy=True))
    f, g = f_and_grad(x)
    it = 0
    alpha = alpha0
    small = 0
    finished = False
    while it < max_iter:
        a = alpha
        accepted = False
        f_new = f
        for _ in range(50):
            it += 1
            if it > max_iter:
                break
            xt = project(x + a * g)
            lin = float(np.sum(np.real(np.conj(g) * (xt - x))))
            if lin <= 1e-18 * scale:
                a *= 0.5
                continue
            f_try, g_try = f_and_grad(xt)
            if f_try >= f + 1e-4 * lin:
                x, f_new, g = xt, f_try, g_try
                alpha = min(a * 2.0, 1e6)
                accepted = True
                break
            a *= 0.5
        if not accepted:
            finished = True
            break
        gain = f_new - f
        f = f_new
        small = small + 1 if gain <= patience_tol else 0
        if small >= 3:
            finished = True
            break
    return x, f, it, finished


def _softmin(vals: np.ndarray, tau: float) -> float:
    vmin = float(vals.min())
    return vmin - tau * float(np.log(np.sum(np.exp(-(vals - vmin) / tau))))


def smoothed_min_ascent(vals_and_jac, project, x0: np.ndarray, max_iter: int,
                        tol: float, scale: float) -> SubsolverResult:
    """Maximize min_k v_k(x) by softmin smoothing with temperature annealing.

    ``vals_and_jac(x) -> (vals, jac)`` where ``jac(weights)`` returns the
    weighted combination of the pieces' gradients.  The temperature drops by
    10x per stage until the smoothing bias tau*ln(K) is below ``tol``.
    """
    x = project(np.array(x0, copy=True))
    vals0, _ = vals_and_jac(x)
    k = len(vals0)
    ln_k = max(np.log(k), 1.0)
    tau_final = max(tol / ln_k * 0.5, 1e-13 * scale)
    tau = max(0.5 * float(vals0.max() - vals0.min()), tau_final)
    start_val = float(vals0.min())
    best_x, best_val = x.copy(), start_val
    n_stages = 1 + max(int(np.ceil(np.log10(max(tau / tau_final, 1.0)))), 0)
    total = 0
    converged = True
    for stage in range(n_stages):
        budget = (max_iter - total) // max(n_stages - stage, 1)
        if budget <= 0:
            converged = False
            break

        def f_and_grad(z, _tau=tau):
            vals, jac = vals_and_jac(z)
            w = np.exp(-(vals - vals.min()) / _tau)
            w /= w.sum()
            return _softmin(vals, _tau), jac(w)

        x, _, evals, finished = armijo_ascent(
            f_and_grad, project, x, budget, scale, patience_tol=1e-4 * tau)
        total += evals
        converged = converged and (finished or stage < n_stages - 1)
        vals, _ = vals_and_jac(x)
        if float(vals.min()) > best_val:
            best_val, best_x = float(vals.min()), x.copy()
        tau = max(tau * 0.1, tau_final)
    return SubsolverResult(x=best_x, value=best_val, iterations=total,
                           improved=best_val > start_val, converged=converged)


def smooth_concave_ascent(f_and_grad, project, x0: np.ndarray, max_iter: int,
                          tol: float, scale: float) -> SubsolverResult:
    """Maximize an already smooth concave objective (sum-of-logs aggregates)."""
    x0 = project(np.array(x0, copy=True))
    f0, _ = f_and_grad(x0)
    x, f, evals, finished = armijo_ascent(f_and_grad, project, x0, max_iter,
                                          scale, patience_tol=tol)
    return SubsolverResult(x=x, value=f, iterations=evals,
                           improved=f > f0, converged=finished)


# ---------------------------------------------------------------------------
# subproblem adapters


def max_affine_disks(coeff: np.ndarray, offset: np.ndarray, w0: np.ndarray,
                     mode: str, max_iter: int, tol: float) -> SubsolverResult:
    """Maximize agg_k(2 Re{w^H c_k} + d_k) subject to |w_m| <= 1.

    ``coeff`` is (K, M) complex with rows c_k, ``offset`` is (K,).  ``mode``
    is 'min' for the max-min aggregate or 'logsum' for sum_k log2(1 + v_k).
    """
    scale = max(1.0, float(np.max(np.abs(offset))) if offset.size else 1.0,
                2.0 * float(np.max(np.sum(np.abs(coeff), axis=1))))

    if mode == "min":
        def vals_and_jac(w):
            vals = 2.0 * np.real(coeff @ w.conj()) + offset
            return vals, lambda lam: 2.0 * (lam @ coeff)

        return smoothed_min_ascent(vals_and_jac, project_disks, w0,
                                   max_iter, tol * scale, scale)
    if mode == "logsum":
        def f_and_grad(w):
            vals = 2.0 * np.real(coeff @ w.conj()) + offset
            clamped = np.maximum(vals, -1.0 + 1e-12)
            weights = 1.0 / ((1.0 + clamped) * LN2)
            return float(np.sum(np.log2(1.0 + clamped))), 2.0 * (weights @ coeff)

        return smooth_concave_ascent(f_and_grad, project_disks, w0,
                                     max_iter, tol * scale, scale)
    raise ValueError(f"unknown aggregate mode {mode!r}")


def max_affine_simplex_rows(gains: np.ndarray, linear: np.ndarray, const: float,
                            x0: np.ndarray, mode: str, max_iter: int,
                            tol: float) -> SubsolverResult:
    """Maximize agg_k(<gains_k, x_k>) + <linear, X> + const over row simplices.

    The shared affine term (the penalty surrogate) is folded into every
    aggregate piece so both modes see one concave objective.
    """
    scale = max(1.0, float(np.max(np.abs(gains))) if gains.size else 1.0)

    def proj(x):
        return project_simplex(x, axis=1)

    if mode == "min":
        def vals_and_jac(x):
            shared = float(np.sum(linear * x)) + const
            vals = np.einsum("ku,ku->k", gains, x) + shared
            return vals, lambda lam: lam[:, None] * gains + linear

        return smoothed_min_ascent(vals_and_jac, proj, x0, max_iter, tol * scale, scale)
    if mode == "logsum":
        def f_and_grad(x):
            vals = np.einsum("ku,ku->k", gains, x)
            clamped = np.maximum(vals, 0.0)
            weights = 1.0 / ((1.0 + clamped) * LN2)
            f = float(np.sum(np.log2(1.0 + clamped)) + np.sum(linear * x)) + const
            return f, weights[:, None] * gains + linear

        return smooth_concave_ascent(f_and_grad, proj, x0, max_iter, tol * scale, scale)
    raise ValueError(f"unknown aggregate mode {mode!r}")
