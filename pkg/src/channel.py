"""
Near-field channel, codebooks and measurement model.
----------------------------------------------------

Classes:
    - UePosition: User position as physical angle, spatial angle and range.
    - PolarCodebook: Angle × range codebook of near-field steering vectors.

Functions:
    - sample_ue: Draw a UE uniformly in angle and range.
    - steering_vector: Unit-norm near-field steering vector a(θ, r).
    - channel: Line-of-sight channel h for a UE.
    - grid_angle: Spatial angle θₘ of DFT column m.
    - dft_column: DFT column f(θₘ).
    - dft_matrix: All DFT columns as an N × N matrix.
    - nearest_grid_index: DFT column closest to a spatial angle.
    - complex_noise: Circular complex Gaussian noise.
    - measure: Noisy DFT-codebook measurements y = √Pₜ Fᴴh + z.
    - ring_ranges: Default range rule of the polar codebook.
    - polar_codebook: Build (and cache) a polar-domain codebook.
"""

import math
from collections.abc import Callable, Iterator
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Union

import numpy as np

from config import ArrayConfig
from numerics import DomainError

RingRule = Callable[[np.ndarray, int, float, ArrayConfig], np.ndarray]


@dataclass(frozen=True)
class UePosition:
    phi: float
    theta: float
    r: float

    @classmethod
    def from_phi(cls, phi: float, r: float) -> "UePosition":
        return cls(phi=phi, theta=math.sin(phi), r=r)

    @classmethod
    def from_theta(cls, theta: float, r: float) -> "UePosition":
        if not abs(theta) <= 1:
            raise DomainError(f"Spatial angle must lie in [-1, 1], got {theta}")
        return cls(phi=math.asin(theta), theta=theta, r=r)


def sample_ue(cfg: ArrayConfig, phi_max: float, rng: np.random.Generator) -> UePosition:
    """Draw φ uniformly in [−φ_max, φ_max] and r uniformly in [r_min, r_max]."""
    phi = rng.uniform(-phi_max, phi_max)
    r = rng.uniform(cfg.r_min, cfg.r_max)
    return UePosition.from_phi(float(phi), float(r))


def _steering_columns(thetas: np.ndarray, ranges: np.ndarray, cfg: ArrayConfig) -> np.ndarray:
    """Steering vectors for paired (θ, r) arrays, one column per pair."""
    x = cfg.element_offsets[:, None] * cfg.spacing
    numerator = x * x - 2.0 * ranges[None, :] * x * thetas[None, :]
    diff = numerator / (np.sqrt(ranges[None, :] ** 2 + numerator) + ranges[None, :])
    return np.exp(1j * (2.0 * math.pi / cfg.wavelength) * diff) / math.sqrt(cfg.n_antennas)


def steering_vector(theta: float, r: float, cfg: ArrayConfig) -> np.ndarray:
    """Near-field steering vector a(θ, r).

    Entry n is e^{j(2π/λ)(r⁽ⁿ⁾ − r)}/√N with r⁽ⁿ⁾ the exact distance from antenna n.

    Args:
        theta (float): Spatial angle in [−1, 1].
        r (float): Range in meters, positive.
        cfg (ArrayConfig): Array geometry.

    Returns:
        np.ndarray: Unit-norm complex vector of length N.

    Raises:
        DomainError: If r ≤ 0 or |θ| > 1.
    """
    if not (r > 0 and math.isfinite(r)):
        raise DomainError(f"Range must be positive, got {r}")
    if not abs(theta) <= 1:
        raise DomainError(f"Spatial angle must lie in [-1, 1], got {theta}")
    return _steering_columns(np.array([theta]), np.array([float(r)]), cfg)[:, 0]


def channel(ue: UePosition, cfg: ArrayConfig) -> np.ndarray:
    """Line-of-sight channel h = √N·h₀·e^{−j2πr₀/λ}·a(θ₀, r₀) with h₀ = λ/(4πr₀)."""
    gain = cfg.wavelength / (4.0 * math.pi * ue.r)
    phase = np.exp(-2j * math.pi * ue.r / cfg.wavelength)
    return math.sqrt(cfg.n_antennas) * gain * phase * steering_vector(ue.theta, ue.r, cfg)


def grid_angle(m: Union[int, np.ndarray], n_antennas: int) -> Union[float, np.ndarray]:
    """Spatial angle θₘ = (2m − N − 1)/N of DFT column m (1-based)."""
    if isinstance(m, np.ndarray):
        return (2 * m - n_antennas - 1) / n_antennas
    return (2 * int(m) - n_antennas - 1) / n_antennas


@lru_cache(maxsize=8)
def dft_matrix(cfg: ArrayConfig) -> np.ndarray:
    """DFT codebook F with column m − 1 equal to f(θₘ). Read-only."""
    n = cfg.n_antennas
    thetas = grid_angle(np.arange(1, n + 1), n)
    matrix = np.exp(-1j * math.pi * np.outer(cfg.element_offsets, thetas)) / math.sqrt(n)
    matrix.setflags(write=False)
    return matrix


def dft_column(m: int, cfg: ArrayConfig) -> np.ndarray:
    """DFT column f(θₘ) for 1 ≤ m ≤ N.

    Raises:
        DomainError: If m is out of range.
    """
    if not 1 <= m <= cfg.n_antennas:
        raise DomainError(f"DFT index must lie in 1..{cfg.n_antennas}, got {m}")
    return dft_matrix(cfg)[:, m - 1].copy()


def nearest_grid_index(theta: float, n_antennas: int) -> int:
    """DFT column minimizing |θ − θₘ|, ties resolved toward the smaller index."""
    gaps = np.abs(theta - grid_angle(np.arange(1, n_antennas + 1), n_antennas))
    return int(np.argmin(gaps)) + 1


def complex_noise(rng: np.random.Generator, sigma2_mw: float, size: int) -> np.ndarray:
    """CN(0, σ²) samples: real and imaginary parts are independent N(0, σ²/2)."""
    scale = math.sqrt(sigma2_mw / 2.0)
    pair = rng.standard_normal((2, size))
    return scale * (pair[0] + 1j * pair[1])


def measure(h: np.ndarray, p_t_mw: float, sigma2_mw: float, rng: np.random.Generator) -> np.ndarray:
    """Received DFT measurements y = √Pₜ Fᴴh + z.

    Args:
        h (np.ndarray): Channel vector.
        p_t_mw (float): Transmit power in mW.
        sigma2_mw (float): Noise power in mW; zero gives noiseless measurements.
        rng (np.random.Generator): Noise stream.

    Returns:
        np.ndarray: Length-N complex measurements.
    """
    if p_t_mw <= 0 or sigma2_mw < 0:
        raise DomainError(f"Powers must be positive, got Pt={p_t_mw}, σ²={sigma2_mw}")
    n = h.shape[0]
    cfg_matrix = _dft_for_length(n)
    return math.sqrt(p_t_mw) * (cfg_matrix.conj().T @ h) + complex_noise(rng, sigma2_mw, n)


@lru_cache(maxsize=8)
def _dft_for_length(n: int) -> np.ndarray:
    # F depends only on N; the carrier cancels in πδθ.
    return dft_matrix(ArrayConfig(n_antennas=n))


def ring_ranges(thetas: np.ndarray, q: int, beta: float, cfg: ArrayConfig) -> np.ndarray:
    """Default ring rule r_{m,q} = N²d²(1 − θₘ²)/(2β²λq); ring 0 is the far field."""
    if q == 0:
        return np.full(thetas.shape, np.inf)
    scale = (cfg.n_antennas * cfg.spacing) ** 2 / (2.0 * beta * beta * cfg.wavelength * q)
    return scale * (1.0 - thetas**2)


@dataclass(frozen=True, eq=False)
class PolarCodebook:
    """N angles × Q range rings; codeword k is angle ⌊k/Q⌋ + 1, ring k mod Q.

    Attributes:
        columns: N × NQ matrix of unit-norm codewords.
        angle_index: 1-based DFT angle index per codeword.
        ring_index: Ring index per codeword, 0 being the far-field column.
        ranges: Focus range per codeword, +inf on ring 0.
    """

    columns: np.ndarray
    angle_index: np.ndarray
    ring_index: np.ndarray
    ranges: np.ndarray

    def __len__(self) -> int:
        return self.columns.shape[1]

    def __iter__(self) -> Iterator[tuple[int, int, np.ndarray]]:
        for k in range(len(self)):
            yield int(self.angle_index[k]), int(self.ring_index[k]), self.columns[:, k]

    def thetas(self, n_antennas: int) -> np.ndarray:
        return grid_angle(self.angle_index, n_antennas)


def polar_codebook(
    cfg: ArrayConfig, beta: float, q_levels: int, ring_rule: Optional[RingRule] = None
) -> PolarCodebook:
    """Polar-domain codebook of N·Q near-field steering vectors.

    Args:
        cfg (ArrayConfig): Array geometry.
        beta (float): Ring spacing parameter, positive.
        q_levels (int): Number of rings Q ≥ 1.
        ring_rule (Optional[RingRule]): Replaces ring_ranges.

    Returns:
        PolarCodebook: The codebook, angle-major.
    """
    if beta <= 0 or q_levels < 1:
        raise DomainError(f"Polar codebook needs β > 0 and Q ≥ 1, got β={beta}, Q={q_levels}")
    if ring_rule is None:
        return _default_polar_codebook(cfg, beta, q_levels)
    return _build_polar_codebook(cfg, beta, q_levels, ring_rule)


@lru_cache(maxsize=4)
def _default_polar_codebook(cfg: ArrayConfig, beta: float, q_levels: int) -> PolarCodebook:
    return _build_polar_codebook(cfg, beta, q_levels, ring_ranges)


def _build_polar_codebook(cfg: ArrayConfig, beta: float, q_levels: int, ring_rule: RingRule) -> PolarCodebook:
    n = cfg.n_antennas
    angles = np.arange(1, n + 1)
    thetas = grid_angle(angles, n)
    columns = np.empty((n, n * q_levels), dtype=complex)
    ranges = np.empty(n * q_levels)
    far = dft_matrix(cfg)
    for q in range(q_levels):
        ring = np.asarray(ring_rule(thetas, q, beta, cfg), dtype=float)
        ranges[q::q_levels] = ring
        if q == 0:
            columns[:, q::q_levels] = far
        else:
            columns[:, q::q_levels] = _steering_columns(thetas, ring, cfg)
    columns.setflags(write=False)
    return PolarCodebook(
        columns=columns,
        angle_index=np.repeat(angles, q_levels),
        ring_index=np.tile(np.arange(q_levels), n),
        ranges=ranges,
    )
