"""SNRs, transmit beamforming, surrogate and Monte Carlo rates, objectives.

The tractable design metric is the expected-SNR surrogate
log2(1 + v^H Xi v); the true ergodic rate E{log2(1 + snr)} is estimated by
Monte Carlo over channel draws and is always dominated by the surrogate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelStats, draw_channels
from .geometry import BeamPattern, effective_phase

LN2 = np.log(2.0)


class DegenerateChannelError(ValueError):
    """The cascade channel vanished; the MRT direction is undefined."""


@dataclass(frozen=True)
class PhaseProfile:
    """Static phase vectors of both layers, unit-modulus entrywise."""

    phi: np.ndarray
    theta: np.ndarray

    def validate(self, tol: float = 1e-9) -> None:
        for name, vec in [("phi", self.phi), ("theta", self.theta)]:
            if vec.size and np.max(np.abs(np.abs(vec) - 1.0)) > tol:
                raise ValueError(f"{name} is not unit-modulus within {tol}")

    @staticmethod
    def random(num_ms1: int, num_ms2: int, rng) -> "PhaseProfile":
        rng = np.random.default_rng(rng)
        return PhaseProfile(
            phi=np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, num_ms1)),
            theta=np.exp(1j * rng.uniform(0.0, 2.0 * np.pi, num_ms2)),
        )


@dataclass(frozen=True)
class Schedule:
    """K x U beam-pattern assignment, row-stochastic; binary when final."""

    x: np.ndarray

    def validate(self, tol: float = 1e-9) -> None:
        if np.any(self.x < -tol) or np.any(self.x > 1.0 + tol):
            raise ValueError("schedule entries must lie in [0, 1]")
        if np.max(np.abs(self.x.sum(axis=1) - 1.0)) > tol:
            raise ValueError("schedule rows must sum to 1")

    def is_binary(self, tol: float = 1e-9) -> bool:
        return bool(np.all(np.minimum(np.abs(self.x), np.abs(self.x - 1.0)) <= tol))

    @staticmethod
    def uniform(num_users: int, num_patterns: int) -> "Schedule":
        return Schedule(np.full((num_users, num_patterns), 1.0 / num_patterns))

    @staticmethod
    def binary(assignment: np.ndarray, num_patterns: int) -> "Schedule":
        x = np.zeros((assignment.shape[0], num_patterns))
        x[np.arange(assignment.shape[0]), assignment] = 1.0
        return Schedule(x)


@dataclass(frozen=True)
class RateReport:
    """Per-user rates plus the two system objectives (bits/s/Hz)."""

    per_user_rates: np.ndarray
    min_rate: float
    throughput: float
    jensen_gap_bound: np.ndarray | None = None


def cascade(g: np.ndarray, h: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Effective BS-side channel G^H diag(h) v, an L-vector."""
    return g.conj().T @ (h * v)


def mrt_beamformer(g: np.ndarray, h: np.ndarray, v: np.ndarray, power: float) -> np.ndarray:
    """Maximum-ratio transmit vector, norm sqrt(power)."""
    c = cascade(g, h, v)
    norm = np.linalg.norm(c)
    if norm == 0.0:
        raise DegenerateChannelError("cascade channel is zero; MRT undefined")
    return np.sqrt(power) * c / norm


def instantaneous_snr(g: np.ndarray, h: np.ndarray, v: np.ndarray, iota: float) -> float:
    """SNR under MRT: iota * ||G^H diag(h) v||^2."""
    c = cascade(g, h, v)
    return float(iota * np.real(np.vdot(c, c)))


def statistical_snr(v: np.ndarray, xi: np.ndarray) -> float:
    """Expected SNR v^H Xi v (real part; Xi is Hermitian)."""
    return float(np.real(np.vdot(v, xi @ v)))


def jensen_rate(v: np.ndarray, xi: np.ndarray) -> float:
    """Surrogate rate log2(1 + v^H Xi v), an upper bound on the ergodic rate."""
    return float(np.log2(1.0 + statistical_snr(v, xi)))


def jensen_gap_bound(snr_variance, snr_floor: float = 0.0):
    """Upper bound on the surrogate-vs-ergodic gap: Var / (2 ln2 (1 + a)^2).

    The essential infimum a of the SNR is taken as 0 (conservative).
    """
    return np.asarray(snr_variance) / (2.0 * LN2 * (1.0 + snr_floor) ** 2)


def snr_matrix(stats: ChannelStats, patterns, profile: PhaseProfile) -> np.ndarray:
    """Expected SNR for every (user, pattern) pair, shape (K, U)."""
    v = np.stack([effective_phase(p, profile.theta, profile.phi) for p in patterns])
    y = np.einsum("kmp,up->kum", stats.xi, v)
    return np.real(np.einsum("um,kum->ku", v.conj(), y))


def rate_matrix(stats: ChannelStats, patterns, profile: PhaseProfile) -> np.ndarray:
    """Surrogate rates log2(1 + snr) for every (user, pattern) pair."""
    return np.log2(1.0 + snr_matrix(stats, patterns, profile))


@dataclass(frozen=True)
class ErgodicRates:
    """Monte Carlo rate estimate per user for a fixed pattern and profile."""

    rates: np.ndarray      # (K,) mean of log2(1 + snr)
    std_errs: np.ndarray   # (K,) standard error of the mean
    snr_mean: np.ndarray   # (K,)
    snr_var: np.ndarray    # (K,)


def ergodic_rate_mc(stats: ChannelStats, pattern: BeamPattern, profile: PhaseProfile,
                    trials: int = 10_000, seed=0, chunk: int = 2_000) -> ErgodicRates:
    """Sample-mean ergodic rates over correlated Rician draws.

    Chunked so large trial counts stay within memory; the estimate is the
    plain mean, so any chunking gives the identical result for a fixed seed.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    v = effective_phase(pattern, profile.theta, profile.phi)
    rng = np.random.default_rng(seed)
    k = stats.num_users
    sum_r = np.zeros(k)
    sum_r2 = np.zeros(k)
    sum_s = np.zeros(k)
    sum_s2 = np.zeros(k)
    done = 0
    while done < trials:
        t = min(chunk, trials - done)
        g, h = draw_channels(stats, t, rng)
        c = np.einsum("tml,tkm->tkl", g.conj(), h * v[None, None, :])
        snr = stats.iota[None, :] * np.real(np.einsum("tkl,tkl->tk", c.conj(), c))
        r = np.log2(1.0 + snr)
        sum_r += r.sum(axis=0)
        sum_r2 += (r ** 2).sum(axis=0)
        sum_s += snr.sum(axis=0)
        sum_s2 += (snr ** 2).sum(axis=0)
        done += t
    mean = sum_r / trials
    var = np.maximum(sum_r2 / trials - mean ** 2, 0.0)
    snr_mean = sum_s / trials
    snr_var = np.maximum(sum_s2 / trials - snr_mean ** 2, 0.0)
    se = np.sqrt(var / trials)
    return ErgodicRates(rates=mean, std_errs=se, snr_mean=snr_mean, snr_var=snr_var)


def objectives(schedule: Schedule, rates: np.ndarray,
               total_time: float = 100.0) -> tuple[float, float]:
    """(min-rate, throughput) for a schedule and a (K, U) rate table.

    min-rate is min_k sum_u x_ku r_ku; throughput is (T/K) times the total
    scheduled rate.
    """
    if schedule.x.shape != rates.shape:
        raise ValueError(f"schedule {schedule.x.shape} and rates {rates.shape} differ")
    schedule.validate()
    per_user = np.einsum("ku,ku->k", schedule.x, rates)
    k = rates.shape[0]
    return float(per_user.min()), float(total_time / k * per_user.sum())


def report(stats: ChannelStats, patterns, profile: PhaseProfile, schedule: Schedule,
           total_time: float = 100.0,
           mc: ErgodicRates | None = None) -> RateReport:
    """Full rate report for a design under the surrogate metric.

    Passing a Monte Carlo estimate fills the per-user surrogate-gap bound
    from the sampled SNR variance.
    """
    rates = rate_matrix(stats, patterns, profile)
    per_user = np.einsum("ku,ku->k", schedule.x, rates)
    eta, throughput = objectives(schedule, rates, total_time)
    gap = jensen_gap_bound(mc.snr_var) if mc is not None else None
    return RateReport(per_user_rates=per_user, min_rate=eta, throughput=throughput,
                      jensen_gap_bound=gap)
