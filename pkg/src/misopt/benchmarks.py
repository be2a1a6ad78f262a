"""Comparison schemes: quantized search, PSO, single-layer and dynamic-RIS.

All baselines share the surrogate rate metric and the greedy per-user
pattern choice: each user takes the pattern with its highest rate, then the
selected objective (minimum rate or total throughput) is evaluated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bcd import BcdConfig, solve_max_min
from .channel import ChannelStats
from .geometry import bare_pattern
from .manifold import RcgConfig, maximize_circle_quadratic
from .rate import PhaseProfile, Schedule, rate_matrix


@dataclass
class QuantizedSearchConfig:
    """Bit depths, element groupings and the sampling cap of the search."""

    bits_ms1: int = 2
    bits_ms2: int = 2
    group_ms1: int = 1          # contiguous row-major elements sharing one level
    group_ms2: int = 1
    max_candidates: int = 100_000
    objective: str = "min_rate"

    def __post_init__(self):
        if self.bits_ms1 < 1 or self.bits_ms2 < 1:
            raise ValueError("bit depths must be >= 1")
        if self.group_ms1 < 1 or self.group_ms2 < 1:
            raise ValueError("group sizes must be >= 1")
        if self.max_candidates < 1:
            raise ValueError("max_candidates must be >= 1")


@dataclass
class PsoConfig:
    """Swarm size, iteration budget and the velocity-update coefficients."""

    swarm: int = 50
    iterations: int = 300
    inertia: float = 0.7
    cognitive: float = 1.5
    social: float = 1.5
    objective: str = "min_rate"
    seed: int = 0

    def __post_init__(self):
        if self.swarm < 2:
            raise ValueError("swarm size must be >= 2")
        if min(self.inertia, self.cognitive, self.social) <= 0:
            raise ValueError("PSO coefficients must be positive")


@dataclass
class BaselineResult:
    """Design and objective of a benchmark scheme."""

    objective_value: float         # in rate units (bits/s/Hz); no time scaling
    min_rate: float
    sum_rate: float
    profile: PhaseProfile
    schedule: Schedule
    evaluations: int = 0
    trace: list = field(default_factory=list)
    notes: str = ""
    per_user_rates: np.ndarray | None = None


def _greedy_objective(rates: np.ndarray, objective: str):
    """Per-user best pattern, then aggregate: (value, assignment)."""
    assignment = np.argmax(rates, axis=1)
    per_user = rates[np.arange(rates.shape[0]), assignment]
    if objective == "min_rate":
        return float(per_user.min()), assignment
    if objective == "throughput":
        return float(per_user.sum()), assignment
    raise ValueError(f"unknown objective {objective!r}")


def _group_expand(levels: np.ndarray, size: int, group: int) -> np.ndarray:
    """Broadcast per-group levels to per-element values (row-major blocks)."""
    return np.repeat(levels, group)[:size]


def _phases_from_digits(digits: np.ndarray, bits: int, size: int, group: int) -> np.ndarray:
    angles = 2.0 * np.pi * (digits + 1) / (2 ** bits)
    return np.exp(1j * _group_expand(angles, size, group))


def quantized_search(stats: ChannelStats, patterns, config: QuantizedSearchConfig,
                     seed=0) -> BaselineResult:
    """Exhaustive (or uniformly sampled) search over grouped quantized phases.

    The grouped space has 2^(B_phi * ceil(M/G_phi)) * 2^(B_theta * ceil(N/G_theta))
    combinations; beyond ``max_candidates`` it is sampled uniformly.  Ties
    break toward the lowest candidate index, so results are reproducible.
    """
    m = stats.num_elements
    n = patterns[0].num_ms2
    g_phi = int(np.ceil(m / config.group_ms1))
    g_theta = int(np.ceil(n / config.group_ms2)) if n else 0
    total = (2 ** (config.bits_ms1 * g_phi)) * (2 ** (config.bits_ms2 * g_theta))

    rng = np.random.default_rng(seed)
    exhaustive = total <= config.max_candidates
    count = total if exhaustive else config.max_candidates

    best = (-np.inf, None, None)
    radix_phi = 2 ** config.bits_ms1
    radix_theta = 2 ** config.bits_ms2
    for c in range(count):
        if exhaustive:
            rem = c
            d_phi = np.zeros(g_phi, dtype=int)
            for j in range(g_phi - 1, -1, -1):
                d_phi[j] = rem % radix_phi
                rem //= radix_phi
            d_theta = np.zeros(g_theta, dtype=int)
            for j in range(g_theta - 1, -1, -1):
                d_theta[j] = rem % radix_theta
                rem //= radix_theta
        else:
            d_phi = rng.integers(0, radix_phi, g_phi)
            d_theta = rng.integers(0, radix_theta, g_theta)
        phi = _phases_from_digits(d_phi, config.bits_ms1, m, config.group_ms1)
        theta = (_phases_from_digits(d_theta, config.bits_ms2, n, config.group_ms2)
                 if n else np.zeros(0, dtype=complex))
        profile = PhaseProfile(phi=phi, theta=theta)
        rates = rate_matrix(stats, patterns, profile)
        value, assignment = _greedy_objective(rates, config.objective)
        if value > best[0]:
            best = (value, profile, assignment)

    value, profile, assignment = best
    rates = rate_matrix(stats, patterns, profile)
    schedule = Schedule.binary(assignment, len(patterns))
    per_user = rates[np.arange(rates.shape[0]), assignment]
    return BaselineResult(
        objective_value=value, min_rate=float(per_user.min()),
        sum_rate=float(per_user.sum()), profile=profile, schedule=schedule,
        evaluations=count,
        notes="exhaustive" if exhaustive else f"sampled {count} of {total}",
    )


def pso_solve(stats: ChannelStats, patterns, config: PsoConfig) -> BaselineResult:
    """Particle swarm over the concatenated phase angles of both layers.

    Positions live in [-pi, pi)^(M+N) with wrap-around updates; fitness is
    the greedy-scheduled objective.  The global best never decreases.
    """
    m = stats.num_elements
    n = patterns[0].num_ms2
    dim = m + n
    rng = np.random.default_rng(config.seed)

    def fitness(x):
        profile = PhaseProfile(phi=np.exp(1j * x[:m]),
                               theta=np.exp(1j * x[m:]))
        rates = rate_matrix(stats, patterns, profile)
        return _greedy_objective(rates, config.objective)[0]

    pos = rng.uniform(-np.pi, np.pi, (config.swarm, dim))
    vel = np.zeros((config.swarm, dim))
    p_best = pos.copy()
    p_val = np.array([fitness(pos[i]) for i in range(config.swarm)])
    g_idx = int(np.argmax(p_val))
    g_best, g_val = p_best[g_idx].copy(), float(p_val[g_idx])

    trace = [g_val]
    for _ in range(config.iterations):
        r1 = rng.random((config.swarm, dim))
        r2 = rng.random((config.swarm, dim))
        vel = (config.inertia * vel
               + config.cognitive * r1 * (p_best - pos)
               + config.social * r2 * (g_best[None, :] - pos))
        pos = np.mod(pos + vel + np.pi, 2.0 * np.pi) - np.pi
        for i in range(config.swarm):
            value = fitness(pos[i])
            if value > p_val[i]:
                p_val[i] = value
                p_best[i] = pos[i].copy()
                if value > g_val:
                    g_val = value
                    g_best = pos[i].copy()
        trace.append(g_val)

    profile = PhaseProfile(phi=np.exp(1j * g_best[:m]), theta=np.exp(1j * g_best[m:]))
    rates = rate_matrix(stats, patterns, profile)
    _, assignment = _greedy_objective(rates, config.objective)
    per_user = rates[np.arange(rates.shape[0]), assignment]
    return BaselineResult(
        objective_value=g_val, min_rate=float(per_user.min()),
        sum_rate=float(per_user.sum()), profile=profile,
        schedule=Schedule.binary(assignment, len(patterns)),
        evaluations=config.swarm * (config.iterations + 1), trace=trace,
    )


def single_layer_baseline(stats: ChannelStats, solver: str = "bcd", seed=0,
                          objective: str = "min_rate",
                          bcd_config: BcdConfig | None = None,
                          rcg_config: RcgConfig | None = None) -> BaselineResult:
    """Static single-layer surface: no movable layer, a single trivial pattern.

    ``solver='bcd'`` runs the penalty BCD machinery restricted to the host
    phases (either objective); ``solver='rcg'`` runs circle-manifold ascent
    on the rate sum (throughput objective only).
    """
    pattern = bare_pattern(stats.num_elements)
    if solver == "bcd":
        res = solve_max_min(stats, [pattern], bcd_config, seed=seed, objective=objective)
        rates = rate_matrix(stats, [pattern], res.profile)[:, 0]
        return BaselineResult(
            objective_value=float(rates.min()) if objective == "min_rate" else float(rates.sum()),
            min_rate=float(rates.min()), sum_rate=float(rates.sum()),
            profile=res.profile, schedule=res.schedule,
            notes="" if res.converged else "bcd not converged",
        )
    if solver == "rcg":
        if objective != "throughput":
            raise ValueError("rcg single-layer baseline maximizes the rate sum only")
        cfg = rcg_config or RcgConfig()
        # sum of log2(1 + v^H Xi_k v) needs the per-user forms, not the sum;
        # run the generic engine over the joint objective instead.
        from .manifold import _CircleBlock, _rcg_maximize

        ln2 = np.log(2.0)

        def f(vals):
            v = vals[0]
            snr = np.real(np.einsum("m,kmp,p->k", v.conj(), stats.xi, v))
            return float(np.sum(np.log2(1.0 + np.maximum(snr, 0.0))))

        def eg(vals):
            v = vals[0]
            y = np.einsum("kmp,p->km", stats.xi, v)
            snr = np.maximum(np.real(np.einsum("m,km->k", v.conj(), y)), 0.0)
            w = (2.0 / ln2) / (1.0 + snr)
            return [np.einsum("k,km->m", w, y)]

        rng = np.random.default_rng(seed)
        v0 = np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, stats.num_elements))
        (v,), run = _rcg_maximize(f, eg, [_CircleBlock()], [v0], cfg)
        profile = PhaseProfile(phi=v, theta=np.zeros(0, dtype=complex))
        rates = rate_matrix(stats, [pattern], profile)[:, 0]
        return BaselineResult(
            objective_value=float(rates.sum()), min_rate=float(rates.min()),
            sum_rate=float(rates.sum()), profile=profile,
            schedule=Schedule(np.ones((stats.num_users, 1))),
            notes=run.notes,
        )
    raise ValueError(f"unknown solver {solver!r}")


def dynamic_ris_baseline(stats: ChannelStats, seed=0, objective: str = "throughput",
                         starts: int = 5,
                         rcg_config: RcgConfig | None = None) -> BaselineResult:
    """Fully dynamic per-user phase control: the ceiling for every static scheme.

    Each user's expected SNR is maximized independently over unit-modulus
    vectors (multi-start circle ascent); rates are aggregated by the chosen
    objective.
    """
    rng = np.random.default_rng(seed)
    rates = np.zeros(stats.num_users)
    profiles = []
    for i in range(stats.num_users):
        v, val = maximize_circle_quadratic(stats.xi[i], rcg_config,
                                           seed=rng.integers(2 ** 31), starts=starts)
        rates[i] = val
        profiles.append(v)
    value = float(rates.min()) if objective == "min_rate" else float(rates.sum())
    return BaselineResult(
        objective_value=value, min_rate=float(rates.min()),
        sum_rate=float(rates.sum()),
        profile=PhaseProfile(phi=profiles[0], theta=np.zeros(0, dtype=complex)),
        schedule=Schedule(np.ones((stats.num_users, 1))),
        notes="per-user optimal phases", per_user_rates=rates,
    )
