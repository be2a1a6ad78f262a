"""Spatially correlated Rician channel statistics, draws and the SNR covariance.

Both hops (base station to MS1, MIS to user) are correlated Rician.  All
long-term statistics are collected in :class:`ChannelStats`; the key derived
object is the per-user SNR covariance ``Xi`` for which the expected cascade
SNR equals ``v^H Xi v`` for any composite phase vector v.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import MisLayout


class InvalidStatsError(ValueError):
    """Channel statistics violate a nonnegativity or shape constraint."""


@dataclass(frozen=True)
class UserGeometry:
    """Azimuth/elevation angles of every link end, radians.

    ``user_azimuths``/``user_elevations`` point from the MIS toward each
    user; the MIS->BS and BS->MIS directions are shared by all users.
    Distances only matter if a path-loss model is applied.
    """

    user_azimuths: np.ndarray
    user_elevations: np.ndarray
    mis_azimuth: float = np.pi / 4    # MIS -> BS
    mis_elevation: float = 0.0
    bs_azimuth: float = 0.0           # BS -> MIS
    bs_elevation: float = 0.0
    distances: np.ndarray | None = None

    def __post_init__(self):
        az = np.atleast_1d(np.asarray(self.user_azimuths, dtype=float))
        el = np.atleast_1d(np.asarray(self.user_elevations, dtype=float))
        if az.shape != el.shape:
            raise InvalidStatsError("user azimuth/elevation lists differ in length")
        if not (np.all(np.isfinite(az)) and np.all(np.isfinite(el))):
            raise InvalidStatsError("user angles must be finite")
        if np.any(np.abs(el) > np.pi / 2):
            raise InvalidStatsError("elevations must lie in [-pi/2, pi/2]")
        object.__setattr__(self, "user_azimuths", az)
        object.__setattr__(self, "user_elevations", el)

    @property
    def num_users(self) -> int:
        return self.user_azimuths.shape[0]


def even_user_angles(num_users: int, elevation: float = -np.pi / 4,
                     azimuth_lo: float = 0.0, azimuth_hi: float = np.pi / 3) -> UserGeometry:
    """Deterministic user placement: equal elevation, equally spaced azimuths."""
    if num_users == 1:
        az = np.array([(azimuth_lo + azimuth_hi) / 2.0])
    else:
        az = np.linspace(azimuth_lo, azimuth_hi, num_users)
    return UserGeometry(user_azimuths=az, user_elevations=np.full(num_users, elevation))


def random_user_angles(num_users: int, rng, elevation: float = -np.pi / 4,
                       azimuth_lo: float = 0.0, azimuth_hi: float = np.pi / 3) -> UserGeometry:
    """Uniform-random azimuths inside the sector, seed-controlled."""
    rng = np.random.default_rng(rng)
    az = rng.uniform(azimuth_lo, azimuth_hi, size=num_users)
    return UserGeometry(user_azimuths=az, user_elevations=np.full(num_users, elevation))


def steering_vector(positions: np.ndarray, azimuth: float, elevation: float,
                    wavelength: float) -> np.ndarray:
    """Far-field array response exp(j 2pi/lambda <p, k(az, el)>).

    Direction vector k = (cos el cos az, cos el sin az, sin el).
    """
    positions = np.asarray(positions, dtype=float)
    if positions.ndim != 2 or positions.shape[0] == 0 or positions.shape[1] != 3:
        raise ValueError(f"positions must be (P, 3) with P >= 1, got {positions.shape}")
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    k = np.array([np.cos(elevation) * np.cos(azimuth),
                  np.cos(elevation) * np.sin(azimuth),
                  np.sin(elevation)])
    return np.exp(1j * (2.0 * np.pi / wavelength) * (positions @ k))


def correlation_matrix(positions: np.ndarray, wavelength: float) -> np.ndarray:
    """Sinc spatial correlation: entry (i, j) = sinc(2 |p_i - p_j| / lambda)."""
    positions = np.asarray(positions, dtype=float)
    if wavelength <= 0:
        raise ValueError("wavelength must be positive")
    diff = positions[:, None, :] - positions[None, :, :]
    dist = np.linalg.norm(diff, axis=-1)
    return np.sinc(2.0 * dist / wavelength)


def psd_sqrt(matrix: np.ndarray, clip: float = 0.0) -> np.ndarray:
    """Symmetric PSD square root with negative eigenvalues clipped to zero.

    Sinc sampling can make correlation matrices slightly indefinite; the
    clip guarantees a valid Gaussian factor without perturbing the model
    beyond numerical noise.
    """
    sym = 0.5 * (matrix + matrix.conj().T)
    vals, vecs = np.linalg.eigh(sym)
    vals = np.clip(vals, clip, None)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def rician_weights(beta: float) -> tuple[float, float]:
    """(LoS weight, NLoS weight) = (beta/(beta+1), 1/(beta+1)); inf-safe."""
    if beta < 0:
        raise InvalidStatsError(f"Rician factor must be nonnegative, got {beta}")
    if np.isinf(beta):
        return 1.0, 0.0
    return beta / (beta + 1.0), 1.0 / (beta + 1.0)


def los_components(layout: MisLayout, geo: UserGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic LoS parts: rank-one BS->MIS matrix and per-user MIS vectors.

    Returns (G_bar, h_bar) with G_bar = a_mis a_bs^T of shape (M, L) and
    h_bar of shape (K, M), row k the MIS response toward user k.
    """
    a_mis = steering_vector(layout.ms1_positions, geo.mis_azimuth, geo.mis_elevation,
                            layout.wavelength)
    a_bs = steering_vector(layout.bs_positions, geo.bs_azimuth, geo.bs_elevation,
                           layout.wavelength)
    g_bar = np.outer(a_mis, a_bs)
    h_bar = np.stack([
        steering_vector(layout.ms1_positions, az, el, layout.wavelength)
        for az, el in zip(geo.user_azimuths, geo.user_elevations)
    ])
    return g_bar, h_bar


def snr_covariance(iota: float, alpha1: float, alpha2: float,
                   beta1: float, beta2: float,
                   g_bar: np.ndarray, h_bar: np.ndarray,
                   s_mr: np.ndarray, s_mt: np.ndarray, s_b: np.ndarray) -> np.ndarray:
    """Closed-form M x M covariance of the cascade SNR quadratic form.

    Four terms: LoS/LoS, NLoS-user/LoS-BS, LoS-user/NLoS-BS and NLoS/NLoS,
    each weighted by the Rician mixing coefficients.  The reference SNR and
    both path-loss coefficients multiply every term.
    """
    if alpha1 < 0 or alpha2 < 0:
        raise InvalidStatsError("path-loss coefficients must be nonnegative")
    if iota <= 0:
        raise InvalidStatsError("reference SNR must be positive")
    w1_los, w1_nlos = rician_weights(beta1)
    w2_los, w2_nlos = rician_weights(beta2)

    gg = g_bar @ g_bar.conj().T
    dh = h_bar.conj()[:, None] * h_bar[None, :]     # diag(h*) A diag(h) = A * outer(h*, h)
    tr_sb = np.trace(s_b)
    scale = iota * alpha1 * alpha2
    xi = scale * (
        w2_los * w1_los * (gg * dh)
        + w2_nlos * w1_los * (s_mt.T * gg)
        + w2_los * w1_nlos * tr_sb * (s_mr * dh)
        + w2_nlos * w1_nlos * tr_sb * (s_mt.T * s_mr)
    )
    return xi


@dataclass(frozen=True)
class ChannelStats:
    """Long-term statistics of all links plus the derived SNR covariances.

    Immutable after construction; the PSD square roots of the correlation
    matrices are cached so channel draws are cheap and parallel workers can
    share one instance.
    """

    alpha1: float
    alpha2: np.ndarray        # (K,)
    beta1: float
    beta2: np.ndarray         # (K,)
    iota: np.ndarray          # (K,) reference SNRs P / sigma_k^2
    g_bar: np.ndarray         # (M, L)
    h_bar: np.ndarray         # (K, M)
    s_mr: np.ndarray          # (M, M) MIS-side receive correlation
    s_mt: np.ndarray          # (M, M) MIS-side transmit correlation
    s_b: np.ndarray           # (L, L) BS-side correlation
    xi: np.ndarray            # (K, M, M) Hermitian PSD
    sqrt_mr: np.ndarray = field(repr=False)
    sqrt_mt: np.ndarray = field(repr=False)
    sqrt_b: np.ndarray = field(repr=False)

    @property
    def num_users(self) -> int:
        return self.h_bar.shape[0]

    @property
    def num_elements(self) -> int:
        return self.h_bar.shape[1]

    @property
    def num_antennas(self) -> int:
        return self.g_bar.shape[1]


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of the instantaneous channels: G (M, L) and h (K, M)."""

    g: np.ndarray
    h: np.ndarray


def build_stats(layout: MisLayout, geo: UserGeometry, *,
                beta1: float, beta2, iota,
                alpha1: float = 1.0, alpha2=1.0) -> ChannelStats:
    """Assemble all statistics for a layout/placement.

    ``beta2``, ``iota`` and ``alpha2`` may be scalars (shared by all users)
    or per-user arrays.  MIS-side correlations are evaluated on the MS1
    grid; for a rigid equal-pitch MS2 the transmit-side matrix is identical
    for every displacement, so no placement needs to be singled out.
    """
    k = geo.num_users
    beta2 = np.broadcast_to(np.asarray(beta2, dtype=float), (k,)).copy()
    iota = np.broadcast_to(np.asarray(iota, dtype=float), (k,)).copy()
    alpha2 = np.broadcast_to(np.asarray(alpha2, dtype=float), (k,)).copy()
    if beta1 < 0 or np.any(beta2 < 0):
        raise InvalidStatsError("Rician factors must be nonnegative")
    if alpha1 < 0 or np.any(alpha2 < 0):
        raise InvalidStatsError("path-loss coefficients must be nonnegative")
    if np.any(iota <= 0):
        raise InvalidStatsError("reference SNRs must be positive")

    g_bar, h_bar = los_components(layout, geo)
    s_mr = correlation_matrix(layout.ms1_positions, layout.wavelength)
    s_mt = correlation_matrix(layout.ms1_positions, layout.wavelength)
    s_b = correlation_matrix(layout.bs_positions, layout.wavelength)

    xi = np.stack([
        snr_covariance(iota[i], alpha1, alpha2[i], beta1, beta2[i],
                       g_bar, h_bar[i], s_mr, s_mt, s_b)
        for i in range(k)
    ])
    xi = 0.5 * (xi + np.conj(np.transpose(xi, (0, 2, 1))))
    return ChannelStats(
        alpha1=float(alpha1), alpha2=alpha2, beta1=float(beta1), beta2=beta2,
        iota=iota, g_bar=g_bar, h_bar=h_bar,
        s_mr=s_mr, s_mt=s_mt, s_b=s_b, xi=xi,
        sqrt_mr=psd_sqrt(s_mr), sqrt_mt=psd_sqrt(s_mt), sqrt_b=psd_sqrt(s_b),
    )


def _complex_normal(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def draw_channel(stats: ChannelStats, rng) -> ChannelRealization:
    """One correlated Rician draw of (G, h) from an explicit seed or Generator."""
    g, h = draw_channels(stats, 1, rng)
    return ChannelRealization(g=g[0], h=h[0])


def draw_channels(stats: ChannelStats, trials: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Batched draws: G of shape (T, M, L) and h of shape (T, K, M)."""
    rng = np.random.default_rng(rng)
    m, ell, k = stats.num_elements, stats.num_antennas, stats.num_users
    w1_los, w1_nlos = rician_weights(stats.beta1)

    sigma = _complex_normal(rng, (trials, m, ell))
    g_nlos = np.einsum("mp,tpl,lq->tmq", stats.sqrt_mr, sigma, stats.sqrt_b)
    g = np.sqrt(stats.alpha1) * (np.sqrt(w1_los) * stats.g_bar[None]
                                 + np.sqrt(w1_nlos) * g_nlos)

    z = _complex_normal(rng, (trials, k, m))
    h_nlos = np.einsum("mp,tkp->tkm", stats.sqrt_mt, z)
    w2 = np.array([rician_weights(b) for b in stats.beta2])  # (K, 2)
    h = np.sqrt(stats.alpha2)[None, :, None] * (
        np.sqrt(w2[:, 0])[None, :, None] * stats.h_bar[None]
        + np.sqrt(w2[:, 1])[None, :, None] * h_nlos
    )
    return g, h
