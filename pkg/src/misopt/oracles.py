"""Independent brute-force and Monte Carlo oracles used by the test suite.

Each oracle computes its answer by enumeration or direct sampling, never
through the solver or closed-form code paths it is used to check.
"""

from __future__ import annotations

import itertools

import numpy as np

from .channel import ChannelStats, draw_channels


def mc_snr_mean(stats: ChannelStats, v: np.ndarray, trials: int = 100_000,
                seed=0, chunk: int = 10_000) -> np.ndarray:
    """Sample mean of the MRT SNR iota ||G^H diag(h) v||^2 per user.

    Direct estimate of the expected cascade SNR from channel draws; checks
    the closed-form covariance quadratic form.
    """
    rng = np.random.default_rng(seed)
    total = np.zeros(stats.num_users)
    done = 0
    while done < trials:
        t = min(chunk, trials - done)
        g, h = draw_channels(stats, t, rng)
        c = np.einsum("tml,tkm->tkl", g.conj(), h * v[None, None, :])
        total += (stats.iota[None, :] * np.real(np.einsum("tkl,tkl->tk", c.conj(), c))).sum(axis=0)
        done += t
    return total / trials


def _pattern_rates(stats: ChannelStats, patterns, phi: np.ndarray,
                   theta: np.ndarray) -> np.ndarray:
    """Plain-loop surrogate rate table, kept free of the vectorized path."""
    k, u = stats.num_users, len(patterns)
    rates = np.zeros((k, u))
    for j, p in enumerate(patterns):
        tbar = np.ones(stats.num_elements, dtype=complex)
        tbar[p.ms1_index] = theta
        v = tbar * phi
        for i in range(k):
            rates[i, j] = np.log2(1.0 + np.real(np.vdot(v, stats.xi[i] @ v)))
    return rates


def exhaustive_quantized(stats: ChannelStats, patterns, bits_ms1: int, bits_ms2: int,
                         objective: str = "min_rate"):
    """Full enumeration over per-element quantized phases with greedy scheduling.

    Only feasible on toy sizes; nested loops on purpose so the enumeration is
    independent of the sampling-based search.
    """
    m = stats.num_elements
    n = patterns[0].num_ms2
    lv1 = np.exp(1j * 2.0 * np.pi * np.arange(1, 2 ** bits_ms1 + 1) / 2 ** bits_ms1)
    lv2 = np.exp(1j * 2.0 * np.pi * np.arange(1, 2 ** bits_ms2 + 1) / 2 ** bits_ms2)
    best = -np.inf
    best_design = None
    for combo1 in itertools.product(range(len(lv1)), repeat=m):
        phi = lv1[list(combo1)]
        for combo2 in itertools.product(range(len(lv2)), repeat=n):
            theta = lv2[list(combo2)] if n else np.zeros(0, dtype=complex)
            rates = _pattern_rates(stats, patterns, phi, theta)
            per_user = rates.max(axis=1)
            value = per_user.min() if objective == "min_rate" else per_user.sum()
            if value > best:
                best = value
                best_design = (phi, theta)
    return float(best), best_design


def grid_phase_search(stats: ChannelStats, patterns, step_deg: float = 1.0):
    """Fine-grid max-min search over all phases with the global phase fixed.

    The first host phase is pinned to 1 (the SNR is invariant to a common
    rotation), so the grid has M + N - 1 free angles; only tiny instances
    are tractable.
    """
    m = stats.num_elements
    n = patterns[0].num_ms2
    free = m + n - 1
    if free > 2:
        raise ValueError("grid search only supports M + N <= 3")
    angles = np.deg2rad(np.arange(0.0, 360.0, step_deg))
    grid = np.exp(1j * angles)
    best = -np.inf
    axes = [grid] * free
    for combo in itertools.product(*axes):
        full = np.concatenate(([1.0 + 0.0j], np.asarray(combo)))
        phi, theta = full[:m], full[m:]
        rates = _pattern_rates(stats, patterns, phi, theta)
        best = max(best, rates.max(axis=1).min())
    return float(best)


def binary_schedule_bruteforce(q: np.ndarray) -> float:
    """Max-min expected SNR over all binary one-pattern-per-user assignments."""
    k, u = q.shape
    best = -np.inf
    for combo in itertools.product(range(u), repeat=k):
        best = max(best, min(q[i, combo[i]] for i in range(k)))
    return float(best)


def pattern_count_bruteforce(m_rows: int, m_cols: int, n_rows: int, n_cols: int) -> int:
    """Count contiguous placements of an n-block inside an m-grid by scanning."""
    count = 0
    for r in range(m_rows):
        for c in range(m_cols):
            if r + n_rows <= m_rows and c + n_cols <= m_cols:
                count += 1
    return count
