"""Riemannian conjugate-gradient solvers on circle/simplex product manifolds.

Two solvers share one ascent engine: total-throughput design over
(phi, theta, schedule) with the schedule rows relaxed onto probability
simplices, and the element-wise placement design over (phi, theta, {S_k})
with per-user column-stochastic placement matrices.  Directions use the
Polak-Ribiere rule with nonnegativity clamping; steps use per-block Armijo
backtracking, so the objective never decreases on an accepted step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelStats
from .convex import project_simplex
from .rate import PhaseProfile, Schedule, objectives, rate_matrix

LN2 = np.log(2.0)


@dataclass
class RcgConfig:
    """Stopping rule, line-search constants and penalty weights."""

    grad_tol: float = 1e-4
    max_iters: int = 2000
    armijo_c1: float = 1e-4
    armijo_shrink: float = 0.5
    max_backtracks: int = 30
    alpha_init: float = 1.0
    simplex_floor: float = 1e-12
    warmup_iters: int = 0         # optional phase-only iterations before the schedule moves
    binary_reward: float = 1.0    # weight of the away-from-half reward (placement solver)
    overlap_penalty: float = 1.0  # weight of the row-overshoot penalty (placement solver)


@dataclass(frozen=True)
class ManifoldPoint:
    """Point on the product manifold: unit-circle phases plus simplex weights.

    ``weights`` is the (K, U) row-stochastic schedule for the throughput
    solver or the (K, M, N) stack of column-stochastic placements for the
    element-wise solver.
    """

    phi: np.ndarray
    theta: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True)
class TangentVector:
    """Tangent components matching a ManifoldPoint's shapes."""

    phi: np.ndarray
    theta: np.ndarray
    weights: np.ndarray


def circle_project(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Tangent projection on the unit-modulus circle: kill the radial part."""
    return g - np.real(g * x.conj()) * x


def circle_retract(x: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Entrywise renormalization; zero-magnitude entries fall back to x."""
    y = x + d
    mag = np.abs(y)
    return np.where(mag > 1e-300, y / np.maximum(mag, 1e-300), x)


def simplex_project_tangent(g: np.ndarray, axis: int) -> np.ndarray:
    """Subtract the mean along ``axis`` so the components sum to zero."""
    return g - g.mean(axis=axis, keepdims=True)


def simplex_retract(x: np.ndarray, d: np.ndarray, axis: int,
                    floor: float = 1e-12) -> np.ndarray:
    """Euclidean projection onto the simplex, floored to stay strictly positive."""
    y = project_simplex(x + d, axis=axis)
    y = np.maximum(y, floor)
    return y / y.sum(axis=axis, keepdims=True)


def riemannian_grad(point: ManifoldPoint, egrad: TangentVector,
                    weights_axis: int = 1) -> TangentVector:
    """Project Euclidean gradients onto the product tangent space."""
    return TangentVector(
        phi=circle_project(point.phi, egrad.phi),
        theta=circle_project(point.theta, egrad.theta) if point.theta.size else egrad.theta,
        weights=simplex_project_tangent(egrad.weights, weights_axis),
    )


@dataclass
class RcgState:
    """Carries one ascent step's memory between conjugate-direction updates."""

    point: ManifoldPoint
    grad: TangentVector
    prev_grad: TangentVector | None = None
    prev_direction: TangentVector | None = None
    step_sizes: tuple = (1.0, 1.0, 1.0)
    iteration: int = 0
    objective_trace: list = field(default_factory=list)
    grad_norm_trace: list = field(default_factory=list)
    weights_axis: int = 1


def _pr_coefficient(inner, g, g_prev_transported, g_prev) -> float:
    denom = inner(g_prev, g_prev)
    if denom <= 0.0:
        return 0.0
    return max(inner(g, g) - inner(g, g_prev_transported), 0.0) / denom


def conjugate_direction(state: RcgState) -> TangentVector:
    """Ascent direction from the nonnegative Polak-Ribiere rule.

    The previous gradient and direction are transported to the current
    tangent space (tangent projection on the circles, identity on the flat
    simplex part); the first call and any non-ascent combination fall back
    to the plain Riemannian gradient.
    """
    g = state.grad
    if state.prev_grad is None or state.prev_direction is None:
        return g
    pt = state.point

    def c_inner(a, b):
        return float(np.sum(np.real(np.conj(a) * b)))

    comps = {}
    for name, proj in (("phi", lambda t: circle_project(pt.phi, t)),
                       ("theta", lambda t: circle_project(pt.theta, t) if pt.theta.size else t),
                       ("weights", lambda t: t)):
        g_b = getattr(g, name)
        gp_b = proj(getattr(state.prev_grad, name))
        dp_b = proj(getattr(state.prev_direction, name))
        beta = _pr_coefficient(c_inner, g_b, gp_b, getattr(state.prev_grad, name))
        d_b = g_b + beta * dp_b
        if c_inner(g_b, d_b) <= 0.0:
            d_b = g_b  # restart: keep an ascent direction
        comps[name] = d_b
    return TangentVector(**comps)


def retract(point: ManifoldPoint, direction: TangentVector, step: float,
            weights_axis: int = 1, floor: float = 1e-12) -> ManifoldPoint:
    """Map a scaled tangent step back onto the product manifold."""
    return ManifoldPoint(
        phi=circle_retract(point.phi, step * direction.phi),
        theta=(circle_retract(point.theta, step * direction.theta)
               if point.theta.size else point.theta),
        weights=simplex_retract(point.weights, step * direction.weights,
                                weights_axis, floor),
    )


# ---------------------------------------------------------------------------
# generic block RCG engine


class _CircleBlock:
    def tangent(self, x, g):
        return circle_project(x, g)

    def retract(self, x, d, cfg):
        return circle_retract(x, d)

    def inner(self, a, b):
        return float(np.sum(np.real(np.conj(a) * b)))

    def transport(self, x, t):
        return circle_project(x, t)

    def effective_norm_sq(self, x, g, cfg):
        return self.inner(g, g)


class _SimplexBlock:
    """Simplex-constrained block; transport is the identity (flat geometry)."""

    def __init__(self, axis: int):
        self.axis = axis

    def tangent(self, x, g):
        return simplex_project_tangent(g, self.axis)

    def retract(self, x, d, cfg):
        return simplex_retract(x, d, self.axis, cfg.simplex_floor)

    def inner(self, a, b):
        return float(np.sum(a * b))

    def transport(self, x, t):
        return t

    def effective_norm_sq(self, x, g, cfg):
        # Movability measure: norm of the retraction displacement for a unit
        # step.  Coincides with the gradient norm in the simplex interior and
        # vanishes when the boundary blocks every remaining ascent direction.
        moved = self.retract(x, g, cfg) - x
        return float(np.sum(moved ** 2))


@dataclass
class RcgRun:
    values: list
    value: float
    iterations: int
    converged: bool
    grad_norm: float
    notes: str = ""


def _rcg_maximize(f, egrad, blocks, x0: list, cfg: RcgConfig) -> tuple[list, RcgRun]:
    """Shared ascent loop over an ordered list of manifold blocks.

    ``f`` and ``egrad`` take the list of block values.  Blocks are updated
    sequentially within an iteration, each with its own Armijo search, so
    every accepted step increases the objective.
    """
    x = [np.array(v, copy=True) for v in x0]
    active = [i for i, v in enumerate(x) if v.size]
    val = f(x)
    values = [val]
    prev_g = [None] * len(blocks)
    prev_d = [None] * len(blocks)
    alpha = [cfg.alpha_init] * len(blocks)
    converged = False
    grad_norm = np.inf
    fails = 0
    it = 0
    skip_tol = cfg.grad_tol / (2.0 * max(np.sqrt(len(active)), 1.0))
    for it in range(1, cfg.max_iters + 1):
        eg = egrad(x)
        rg = [blocks[i].tangent(x[i], eg[i]) if i in active else eg[i]
              for i in range(len(blocks))]
        block_norms = {i: np.sqrt(blocks[i].effective_norm_sq(x[i], rg[i], cfg))
                       for i in active}
        grad_norm = np.sqrt(sum(v ** 2 for v in block_norms.values()))
        if grad_norm < cfg.grad_tol:
            converged = True
            break
        accepted_any = False
        for i in active:
            if block_norms[i] < skip_tol:
                continue  # block is first-order stationary; nothing to gain
            g = rg[i]
            d = g
            if prev_g[i] is not None:
                g_prev = blocks[i].transport(x[i], prev_g[i])
                denom = blocks[i].inner(prev_g[i], prev_g[i])
                beta = 0.0
                if denom > 0:
                    beta = max(blocks[i].inner(g, g - g_prev) / denom, 0.0)
                d = g + beta * blocks[i].transport(x[i], prev_d[i])
            slope = blocks[i].inner(g, d)
            if slope <= 0.0:
                d = g
                slope = blocks[i].inner(g, g)
            if slope <= 0.0:
                prev_g[i] = None
                prev_d[i] = None
                continue
            a = alpha[i]
            accepted = False
            x_try = None
            val_try = val
            for bt in range(cfg.max_backtracks):
                x_try = list(x)
                x_try[i] = blocks[i].retract(x[i], a * d, cfg)
                val_try = f(x_try)
                if val_try >= val + cfg.armijo_c1 * a * slope:
                    accepted = True
                    if bt == 0:
                        # expansion: the persistent step may be far too timid
                        while a < 1e3:
                            x_grow = list(x)
                            x_grow[i] = blocks[i].retract(x[i], 2.0 * a * d, cfg)
                            val_grow = f(x_grow)
                            if val_grow < max(val + cfg.armijo_c1 * 2.0 * a * slope, val_try):
                                break
                            a *= 2.0
                            x_try, val_try = x_grow, val_grow
                    break
                a *= cfg.armijo_shrink
            if accepted:
                x = x_try
                val = val_try
                alpha[i] = min(a / cfg.armijo_shrink, 1e3)
                prev_g[i] = g
                prev_d[i] = d
                accepted_any = True
            else:
                alpha[i] = cfg.alpha_init
                prev_g[i] = None
                prev_d[i] = None
        values.append(val)
        if accepted_any:
            fails = 0
        else:
            fails += 1
            if fails >= 3:
                break
    notes = "" if converged else ("stalled line search" if fails >= 3 else "iteration cap")
    return x, RcgRun(values=values, value=val, iterations=it,
                     converged=converged, grad_norm=float(grad_norm), notes=notes)


# ---------------------------------------------------------------------------
# throughput solver on (phi, theta, schedule)


def _pattern_scatter(patterns, theta: np.ndarray) -> np.ndarray:
    return np.stack([p.scatter(theta) for p in patterns])


def _gamma_table(xi: np.ndarray, patterns, phi: np.ndarray, theta: np.ndarray):
    tbar = _pattern_scatter(patterns, theta)        # (U, M)
    v = tbar * phi[None, :]
    y = np.einsum("kmp,up->kum", xi, v)
    gamma = np.real(np.einsum("um,kum->ku", v.conj(), y))
    return gamma, tbar, y


class ScheduleEvaluator:
    """Rates and gradients for the schedule-weighted objective.

    Exploits the pattern structure v_u = phi + scatter_u((theta - 1) * phi):
    one covariance matvec per user is shared by all patterns, and each
    pattern only adds an M x N column block, so an evaluation costs
    O(K M^2 + K U M N) instead of O(K U M^2), in a handful of batched calls.
    """

    def __init__(self, xi: np.ndarray, patterns):
        self.xi = xi
        self.idx = np.stack([p.ms1_index for p in patterns])          # (U, N)
        self.cols = np.ascontiguousarray(
            np.transpose(xi[:, :, self.idx], (2, 0, 1, 3)))           # (U, K, M, N)
        self._phi_key = None
        self._xi_phi = None
        self._memo = (None, None, None)

    def _pieces(self, phi: np.ndarray, theta: np.ndarray):
        memo_phi, memo_theta, packed = self._memo
        if memo_phi is phi and memo_theta is theta:
            return packed
        if self._phi_key is not phi:
            self._xi_phi = np.einsum("kmp,p->km", self.xi, phi)
            self._phi_key = phi
        d = (theta - 1.0)[None, :] * phi[self.idx]                    # (U, N)
        y = self._xi_phi[None] + np.einsum("ukmn,un->ukm", self.cols, d)
        self._memo = (phi, theta, (d, y))
        return d, y                                                   # y: (U, K, M)

    def _gather(self, y: np.ndarray) -> np.ndarray:
        u, k, _ = y.shape
        return y[np.arange(u)[:, None, None], np.arange(k)[None, :, None],
                 self.idx[:, None, :]]                                # (U, K, N)

    def gamma(self, phi: np.ndarray, theta: np.ndarray) -> np.ndarray:
        d, y = self._pieces(phi, theta)
        dot = np.einsum("m,ukm->uk", phi.conj(), y)
        if self.idx.shape[1]:
            dot = dot + np.einsum("un,ukn->uk", d.conj(), self._gather(y))
        return np.real(dot).T

    def rates(self, phi: np.ndarray, theta: np.ndarray) -> np.ndarray:
        return np.log2(1.0 + self.gamma(phi, theta))

    def grads(self, phi: np.ndarray, theta: np.ndarray, weights: np.ndarray):
        """(gamma, grad_phi, grad_theta, grad_weights) at one point."""
        d, y = self._pieces(phi, theta)
        yg = self._gather(y) if self.idx.shape[1] else np.zeros(y.shape[:2] + (0,))
        dot = np.einsum("m,ukm->uk", phi.conj(), y)
        if self.idx.shape[1]:
            dot = dot + np.einsum("un,ukn->uk", d.conj(), yg)
        gamma = np.real(dot).T
        w = (2.0 / LN2) * weights / (1.0 + gamma)                     # (K, U)
        wy = np.einsum("ku,ukm->um", w, y)                            # (U, M)
        g_phi = wy.sum(axis=0).astype(complex)
        g_theta = np.zeros(theta.shape, dtype=complex)
        if self.idx.shape[1]:
            wyg = np.take_along_axis(wy, self.idx, axis=1)            # (U, N)
            np.add.at(g_phi, self.idx.ravel(),
                      ((theta.conj() - 1.0)[None, :] * wyg).ravel())
            g_theta = np.einsum("ku,ukn->n", w, yg * phi.conj()[self.idx][:, None, :])
        return gamma, g_phi, g_theta, np.log2(1.0 + gamma)


def objective_f(point: ManifoldPoint, patterns, xi: np.ndarray) -> float:
    """Schedule-weighted sum of surrogate rates sum_ku x_ku log2(1 + snr_ku)."""
    gamma, _, _ = _gamma_table(xi, patterns, point.phi, point.theta)
    return float(np.sum(point.weights * np.log2(1.0 + gamma)))


def euclidean_grads(point: ManifoldPoint, patterns, xi: np.ndarray) -> TangentVector:
    """Ambient gradients of the schedule-weighted rate objective.

    The schedule gradient is the rate table itself; the phase gradients
    weight each pattern's covariance form by x_ku / (1 + snr_ku).
    """
    _, g_phi, g_theta, g_x = ScheduleEvaluator(xi, patterns).grads(
        point.phi, point.theta, point.weights)
    return TangentVector(phi=g_phi, theta=g_theta, weights=g_x)


@dataclass
class RcgResult:
    """Final thresholded design plus diagnostics of a manifold solve."""

    objective_value: float
    min_rate: float
    throughput: float
    profile: PhaseProfile
    schedule: Schedule
    relaxed_objective: float       # schedule-weighted rate sum before thresholding
    threshold_change: float        # relative rate-sum change due to thresholding
    tightness: float               # max_k (1 - max_u x_ku) at convergence
    iterations: int
    converged: bool
    grad_norm: float
    trace: list = field(default_factory=list)
    notes: str = ""
    placements: np.ndarray | None = None   # (K, M, N) binary, element-wise solver only


def solve_throughput(stats: ChannelStats, patterns, config: RcgConfig | None = None,
                     seed=0, total_time: float = 100.0) -> RcgResult:
    """Total-throughput design by RCG over the phase/schedule product manifold.

    The relaxed schedule is driven toward a vertex by the linear objective;
    per-user argmax thresholding recovers the binary assignment at the end.
    """
    cfg = config or RcgConfig()
    rng = np.random.default_rng(seed)
    m = stats.num_elements
    n = patterns[0].num_ms2
    k, u = stats.num_users, len(patterns)
    xi = stats.xi

    phi0 = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, m))
    theta0 = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, n))
    x0 = np.full((k, u), 1.0 / u)

    ev = ScheduleEvaluator(xi, patterns)
    cache = {"phi": None, "theta": None, "rates": None}

    def _rates(phi, theta):
        # identity-keyed cache: schedule-only steps reuse the rate table
        if cache["phi"] is not phi or cache["theta"] is not theta:
            cache["phi"], cache["theta"] = phi, theta
            cache["rates"] = ev.rates(phi, theta)
        return cache["rates"]

    def f(vals):
        return float(np.sum(vals[2] * _rates(vals[0], vals[1])))

    def eg(vals):
        _, g_phi, g_theta, g_x = ev.grads(vals[0], vals[1], vals[2])
        return [g_phi, g_theta, g_x]

    blocks = [_CircleBlock(), _CircleBlock(), _SimplexBlock(axis=1)]
    if cfg.warmup_iters > 0 and u > 1:
        # optional phase-only warmup at the uniform schedule, so the schedule
        # cannot lock onto patterns chosen under the random initial phases
        warm_cfg = RcgConfig(**{**cfg.__dict__, "max_iters": cfg.warmup_iters})

        def f_warm(vals):
            return f([vals[0], vals[1], x0])

        def eg_warm(vals):
            _, g_phi, g_theta, _ = ev.grads(vals[0], vals[1], x0)
            return [g_phi, g_theta]

        (phi0, theta0), _ = _rcg_maximize(f_warm, eg_warm, blocks[:2],
                                          [phi0, theta0], warm_cfg)
    (phi, theta, x), run = _rcg_maximize(f, eg, blocks, [phi0, theta0, x0], cfg)

    relaxed = f([phi, theta, x])
    assignment = np.argmax(x, axis=1)
    schedule = Schedule.binary(assignment, u)
    profile = PhaseProfile(phi=phi, theta=theta)
    rates = rate_matrix(stats, patterns, profile)
    eta, throughput = objectives(schedule, rates, total_time)
    binary_sum = float(np.sum(schedule.x * rates))
    change = abs(binary_sum - relaxed) / max(abs(relaxed), 1e-12)
    tightness = float(np.max(1.0 - x.max(axis=1)))
    return RcgResult(
        objective_value=throughput, min_rate=eta, throughput=throughput,
        profile=profile, schedule=schedule, relaxed_objective=relaxed,
        threshold_change=change, tightness=tightness,
        iterations=run.iterations, converged=run.converged,
        grad_norm=run.grad_norm, trace=run.values, notes=run.notes,
    )


# ---------------------------------------------------------------------------
# element-wise placement solver on (phi, theta, {S_k})


def placement_penalties(s_stack: np.ndarray) -> tuple[float, float]:
    """Binary-reward and row-overshoot totals for a placement stack.

    The reward term sums (1/N)(s - 1/2)^2 over all entries (largest at
    binary values); the overshoot term sums (max(row_sum, 1) - 1)^2 over all
    rows, penalizing MS1 elements claimed by more than one MS2 element.
    """
    s = np.asarray(s_stack, dtype=float)
    n = s.shape[-1]
    reward = float(np.sum((s - 0.5) ** 2) / n)
    overshoot = float(np.sum(np.maximum(s.sum(axis=-1) - 1.0, 0.0) ** 2))
    return reward, overshoot


def _placement_terms(xi: np.ndarray, phi: np.ndarray, theta: np.ndarray,
                     s_stack: np.ndarray):
    tbar = np.einsum("kmn,n->km", s_stack, theta) + 1.0 - s_stack.sum(axis=2)
    v = tbar * phi[None, :]
    y = np.einsum("kmp,kp->km", xi, v)
    gamma = np.real(np.einsum("km,km->k", v.conj(), y))
    return gamma, tbar, y


def placement_objective(point: ManifoldPoint, xi: np.ndarray, cfg: RcgConfig) -> float:
    """Sum rate plus binary reward minus overlap penalty (the relaxed objective)."""
    gamma, _, _ = _placement_terms(xi, point.phi, point.theta, point.weights)
    reward, overshoot = placement_penalties(point.weights)
    return float(np.sum(np.log2(1.0 + gamma))
                 + cfg.binary_reward * reward - cfg.overlap_penalty * overshoot)


def placement_grads(point: ManifoldPoint, xi: np.ndarray, cfg: RcgConfig) -> TangentVector:
    """Ambient gradients of the element-wise objective.

    The data term follows the chain rule through v = phi * (S (theta - 1) + 1);
    the reward gradient is +(2/N)(S - 1/2) and the overshoot gradient is
    -2 max(row_sum - 1, 0) broadcast along each row, both matching central
    finite differences of the relaxed objective.
    """
    phi, theta, s = point.phi, point.theta, point.weights
    n = s.shape[-1]
    gamma, tbar, y = _placement_terms(xi, phi, theta, s)
    w = (2.0 / LN2) / (1.0 + gamma)
    g_phi = np.einsum("k,km,km->m", w, tbar.conj(), y)
    fy = phi.conj()[None, :] * y
    g_theta = np.einsum("k,kmn,km->n", w, s, fy)
    g_s = w[:, None, None] * np.real(fy[:, :, None] * (theta - 1.0).conj()[None, None, :])
    g_s += cfg.binary_reward * (2.0 / n) * (s - 0.5)
    g_s -= cfg.overlap_penalty * 2.0 * np.maximum(s.sum(axis=2) - 1.0, 0.0)[:, :, None]
    return TangentVector(phi=g_phi, theta=g_theta, weights=g_s)


def repair_placement(s_relaxed: np.ndarray) -> np.ndarray:
    """Threshold one relaxed placement to a feasible binary assignment.

    Each column takes its argmax row; contested rows keep the column with
    the largest relaxed value and displaced columns move to their best still
    free row.  Feasible whenever N <= M.
    """
    m, n = s_relaxed.shape
    if n > m:
        raise ValueError("more movable elements than host elements")
    taken: dict[int, int] = {}
    pending = list(range(n))
    blocked: dict[int, set] = {c: set() for c in range(n)}
    while pending:
        col = pending.pop(0)
        scores = s_relaxed[:, col].copy()
        scores[list(blocked[col])] = -np.inf
        row = int(np.argmax(scores))
        if row not in taken:
            taken[row] = col
            continue
        rival = taken[row]
        if s_relaxed[row, col] > s_relaxed[row, rival]:
            taken[row] = col
            blocked[rival].add(row)
            pending.append(rival)
        else:
            blocked[col].add(row)
            pending.append(col)
    out = np.zeros((m, n))
    for row, col in taken.items():
        out[row, col] = 1.0
    return out


def solve_elementwise(stats: ChannelStats, num_ms2: int,
                      config: RcgConfig | None = None, seed=0,
                      total_time: float = 100.0) -> RcgResult:
    """Per-user element-wise placement design (the mobility performance ceiling).

    Each user gets an independent placement of the movable elements on the
    host surface, relaxed to column-stochastic matrices and optimized
    jointly with both phase layers; thresholding plus conflict repair
    restores feasibility at the end.
    """
    cfg = config or RcgConfig()
    rng = np.random.default_rng(seed)
    m, k = stats.num_elements, stats.num_users
    xi = stats.xi

    phi0 = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, m))
    theta0 = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, num_ms2))
    s0 = np.full((k, m, num_ms2), 1.0 / m) + 0.2 / m * rng.random((k, m, num_ms2))
    s0 /= s0.sum(axis=1, keepdims=True)

    def f(vals):
        return placement_objective(ManifoldPoint(vals[0], vals[1], vals[2]), xi, cfg)

    def eg(vals):
        g = placement_grads(ManifoldPoint(vals[0], vals[1], vals[2]), xi, cfg)
        return [g.phi, g.theta, g.weights]

    blocks = [_CircleBlock(), _CircleBlock(), _SimplexBlock(axis=1)]
    (phi, theta, s), run = _rcg_maximize(f, eg, blocks, [phi0, theta0, s0], cfg)

    relaxed_gamma, _, _ = _placement_terms(xi, phi, theta, s)
    relaxed_sum = float(np.sum(np.log2(1.0 + relaxed_gamma)))
    s_bin = np.stack([repair_placement(s[i]) for i in range(k)])
    gamma, _, _ = _placement_terms(xi, phi, theta, s_bin)
    rates = np.log2(1.0 + gamma)
    sum_rate = float(rates.sum())
    throughput = total_time / k * sum_rate
    change = abs(sum_rate - relaxed_sum) / max(abs(relaxed_sum), 1e-12)
    tightness = float(np.max(1.0 - s.max(axis=1)))
    return RcgResult(
        objective_value=throughput, min_rate=float(rates.min()),
        throughput=throughput, profile=PhaseProfile(phi=phi, theta=theta),
        schedule=Schedule(np.ones((k, 1))), relaxed_objective=relaxed_sum,
        threshold_change=change, tightness=tightness,
        iterations=run.iterations, converged=run.converged,
        grad_norm=run.grad_norm, trace=run.values, notes=run.notes,
        placements=s_bin,
    )


def maximize_circle_quadratic(xi_k: np.ndarray, config: RcgConfig | None = None,
                              seed=0, starts: int = 1) -> tuple[np.ndarray, float]:
    """Maximize log2(1 + v^H Xi v) over unit-modulus v; best of ``starts`` inits.

    Used by the fully dynamic per-user baseline and the single-layer design.
    """
    cfg = config or RcgConfig()
    rng = np.random.default_rng(seed)
    m = xi_k.shape[0]
    best_v, best_val = None, -np.inf

    def f(vals):
        v = vals[0]
        return float(np.log2(1.0 + max(np.real(np.vdot(v, xi_k @ v)), 0.0)))

    def eg(vals):
        v = vals[0]
        snr = max(np.real(np.vdot(v, xi_k @ v)), 0.0)
        return [(2.0 / LN2) / (1.0 + snr) * (xi_k @ v)]

    for _ in range(starts):
        v0 = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, m))
        (v,), run = _rcg_maximize(f, eg, [_CircleBlock()], [v0], cfg)
        if run.value > best_val:
            best_val, best_v = run.value, v
    return best_v, best_val
