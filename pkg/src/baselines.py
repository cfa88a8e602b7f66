"""
Reference beam alignment schemes and their cost models.
-------------------------------------------------------

Classes:
    - BeamDecision: A chosen beam with optional angle and range estimates.

Functions:
    - pilot_symbols: Number of pilot symbols a scheme spends.
    - ls_baseline: Least-squares channel estimate used as a matched filter.
    - polar_exhaustive: Exhaustive search over a polar-domain codebook.
    - genie_polar_best: Best noiseless polar codeword gain.
    - aswje: Angle-support-width joint angle and range estimation.
    - flops_coarse, flops_ls, flops_polar_exh, flops_aswje, flops_dft_dnn, flops_dnbt:
      Operation counts of each scheme.
    - aswje_grid_points: Size of the ASW-JE line-search grid.
    - flop_model: Operation count of a scheme under a configuration.
"""

import math
from collections.abc import Callable
from dataclasses import dataclass
from typing import Optional

import numpy as np

from channel import (
    PolarCodebook,
    complex_noise,
    dft_column,
    dft_matrix,
    grid_angle,
    nearest_grid_index,
    steering_vector,
)
from config import ArrayConfig, SimConfig
from numerics import DomainError, fresnel_arrays

BeamSounder = Callable[[np.ndarray], complex]

# Trainable parameter counts of the learned baselines; their networks are not reproduced.
DFT_DNN_RANGE_PARAMS = 3_741_392
DFT_DNN_ANGLE_PARAMS = 3_987_392
DNBT_PARAMS = 134_225_702
ASWJE_FLOPS_PER_GRID_POINT = 694


@dataclass(frozen=True)
class BeamDecision:
    """A chosen unit-norm beam.

    Attributes:
        beam: Unit-norm combining vector.
        theta_est: Spatial angle estimate, None when the scheme makes none.
        r_est: Range estimate in meters, None when the scheme makes none.
        scheme: Scheme identifier.
        pilot_symbols: Pilot symbols spent.
    """

    beam: np.ndarray
    theta_est: Optional[float]
    r_est: Optional[float]
    scheme: str
    pilot_symbols: int


def pilot_symbols(scheme: str, cfg: SimConfig) -> int:
    """Pilot symbols of a scheme with a single RF chain.

    Raises:
        KeyError: For an unknown scheme.
    """
    n = cfg.n_antennas
    counts = {
        "proposed": n,
        "coarse": n,
        "ls": n,
        "polar_exh": n * cfg.polar_rings,
        "aswje": n,
        cfg.aswje_multi_scheme: n + cfg.aswje_ka,
        "dft_dnn": n // 4 + cfg.dnn_kb,
        "dnbt": (n // cfg.dnbt_chi) * cfg.polar_rings + cfg.dnn_kb,
    }
    return counts[scheme]


def ls_baseline(y: np.ndarray, p_t_mw: float, cfg: ArrayConfig) -> BeamDecision:
    """Least-squares estimate ĥ = Fy/√Pₜ, used directly as the beam."""
    if p_t_mw <= 0:
        raise DomainError(f"Transmit power must be positive, got {p_t_mw}")
    h_hat = dft_matrix(cfg) @ y / math.sqrt(p_t_mw)
    norm = np.linalg.norm(h_hat)
    if norm == 0 or not math.isfinite(norm):
        beam = dft_column(nearest_grid_index(0.0, cfg.n_antennas), cfg)
    else:
        beam = h_hat / norm
    return BeamDecision(beam=beam, theta_est=None, r_est=None, scheme="ls", pilot_symbols=cfg.n_antennas)


def polar_exhaustive(
    h: np.ndarray, p_t_mw: float, sigma2_mw: float, codebook: PolarCodebook, rng: np.random.Generator
) -> BeamDecision:
    """Measure every polar codeword once and keep the strongest.

    Ties go to the lowest (angle, ring) pair.
    """
    received = math.sqrt(p_t_mw) * (codebook.columns.conj().T @ h)
    received = received + complex_noise(rng, sigma2_mw, received.shape[0])
    best = int(np.argmax(np.abs(received)))
    return BeamDecision(
        beam=codebook.columns[:, best].copy(),
        theta_est=None,
        r_est=None,
        scheme="polar_exh",
        pilot_symbols=len(codebook),
    )


def genie_polar_best(h: np.ndarray, codebook: PolarCodebook) -> float:
    """Normalized gain max |aᴴh|/‖h‖ of the best polar codeword, noiseless."""
    return float(np.max(np.abs(codebook.columns.conj().T @ h)) / np.linalg.norm(h))


def _circular_offsets(indices: np.ndarray, centre: int, n: int) -> np.ndarray:
    return (indices - centre + n // 2) % n - n // 2


def _ratio_curve(offsets: np.ndarray, varpi: np.ndarray, n: int) -> np.ndarray:
    """Noiseless |yᵢ|/|y_centre| predicted by the Fresnel model, grid × offsets.

    With ϖ = √(r/(d(1 − θ²))) the model parameter is s = 1/(2ϖ²).
    """
    s = 1.0 / (2.0 * varpi[:, None] ** 2)
    root = np.sqrt(np.pi * s)
    delta = n * root
    w = root * (np.abs(offsets)[None, :] / (n * s) - n / 2)
    c_hi, s_hi = fresnel_arrays(w + delta)
    c_lo, s_lo = fresnel_arrays(w)
    c_half, s_half = fresnel_arrays(delta / 2)
    return np.hypot(c_hi - c_lo, s_hi - s_lo) / (2.0 * np.hypot(c_half, s_half))


def _demap_range(magnitudes: np.ndarray, support: np.ndarray, centre: int, step: float, cfg: ArrayConfig) -> float:
    """Line search of ϖ matching measured magnitude ratios to the Fresnel model."""
    n = cfg.n_antennas
    theta = grid_angle(centre, n)
    others = support[support != centre]
    if others.size == 0 or magnitudes[centre - 1] == 0:
        return cfg.r_max
    scale = cfg.spacing * (1.0 - theta * theta)
    lo, hi = math.sqrt(cfg.r_min / scale), math.sqrt(cfg.r_max / scale)
    varpi = lo + step * np.arange(int(math.floor((hi - lo) / step)) + 1)
    observed = magnitudes[others - 1] / magnitudes[centre - 1]
    model = _ratio_curve(_circular_offsets(others, centre, n).astype(float), varpi, n)
    best = int(np.argmin(((model - observed[None, :]) ** 2).sum(axis=1)))
    return min(max(varpi[best] ** 2 * scale, cfg.r_min), cfg.r_max)


def aswje(
    y: np.ndarray,
    cfg: ArrayConfig,
    kappa2: float = 0.5,
    k_a: int = 1,
    step: float = 0.1,
    sound_beam: Optional[BeamSounder] = None,
) -> BeamDecision:
    """Angle-support-width joint angle and range estimation.

    The support B holds the DFT indices with |yᵢ| > κ²·max|yᵢ|; the angle is
    the grid angle of its lower median and the range comes from a line search
    over ϖ. With k_a > 1 the median's neighbours in B yield further candidate
    pairs, each measured once through sound_beam, and the strongest is kept.

    Args:
        y (np.ndarray): DFT measurements.
        cfg (ArrayConfig): Array geometry.
        kappa2 (float): Support threshold κ².
        k_a (int): Number of candidate pairs.
        step (float): Line-search step Δϖ.
        sound_beam (Optional[BeamSounder]): Returns one noisy measurement with a given beam;
            required when k_a > 1.

    Returns:
        BeamDecision: Steering vector at the chosen (θ̂, r̂).
    """
    if k_a < 1:
        raise DomainError(f"Candidate count must be at least 1, got {k_a}")
    if k_a > 1 and sound_beam is None:
        raise DomainError("Candidate sounding needs a beam sounder")
    n = cfg.n_antennas
    magnitudes = np.abs(y)
    support = np.flatnonzero(magnitudes > kappa2 * magnitudes.max()) + 1
    if support.size == 0:
        support = np.array([int(np.argmax(magnitudes)) + 1])
    median_pos = (support.size - 1) // 2

    positions = [median_pos]
    for k in range(1, support.size):
        for pos in (median_pos + k, median_pos - k):
            if 0 <= pos < support.size and len(positions) < k_a:
                positions.append(pos)
    candidates = []
    for pos in positions:
        centre = int(support[pos])
        r_hat = _demap_range(magnitudes, support, centre, step, cfg)
        candidates.append((grid_angle(centre, n), r_hat))

    if len(candidates) > 1 and sound_beam is not None:
        strengths = [abs(sound_beam(steering_vector(theta, r, cfg))) for theta, r in candidates]
        theta_hat, r_hat = candidates[int(np.argmax(strengths))]
    else:
        theta_hat, r_hat = candidates[0]
    return BeamDecision(
        beam=steering_vector(theta_hat, r_hat, cfg),
        theta_est=float(theta_hat),
        r_est=float(r_hat),
        scheme="aswje" if k_a == 1 else f"aswje_ka{k_a}",
        pilot_symbols=n + (k_a if k_a > 1 else 0),
    )


def flops_coarse(n: int) -> int:
    return 17 * n + 7


def flops_ls(n: int) -> int:
    return 8 * n * n - 2 * n


def flops_polar_exh(n: int, q: int) -> int:
    return 4 * n * q - 1


def aswje_grid_points(cfg: ArrayConfig, step: float) -> int:
    """⌊(ϖ_max − ϖ_min)/Δϖ⌋ + 1 at broadside."""
    lo, hi = math.sqrt(cfg.r_min / cfg.spacing), math.sqrt(cfg.r_max / cfg.spacing)
    return int(math.floor((hi - lo) / step)) + 1


def flops_aswje(n: int, k_a: int, grid_points: int) -> int:
    return 6 * n - 1 + k_a * (5 * n + ASWJE_FLOPS_PER_GRID_POINT * grid_points + 7)


def flops_dft_dnn(n: int, q: int, k_b: int) -> int:
    return 52_576 * n + 13_862_144 + 2047 * (n + q) + (4 * k_b - 1)


def flops_dnbt(n: int, q: int, chi: int, k_b: int) -> int:
    return 16 * n * n * q * q + 6499 * n * q + (4 * ((n // chi) * q + k_b) - 1)


def flop_model(scheme: str, cfg: SimConfig) -> int:
    """Operation count of a baseline scheme under a configuration.

    Raises:
        KeyError: For a scheme without a cost model here.
    """
    n, q = cfg.n_antennas, cfg.polar_rings
    grid = aswje_grid_points(cfg.array, cfg.aswje_step)
    models: dict[str, Callable[[], int]] = {
        "coarse": lambda: flops_coarse(n),
        "ls": lambda: flops_ls(n),
        "polar_exh": lambda: flops_polar_exh(n, q),
        "aswje": lambda: flops_aswje(n, 1, grid),
        cfg.aswje_multi_scheme: lambda: flops_aswje(n, cfg.aswje_ka, grid),
        "dft_dnn": lambda: flops_dft_dnn(n, q, cfg.dnn_kb),
        "dnbt": lambda: flops_dnbt(n, q, cfg.dnbt_chi, cfg.dnn_kb),
    }
    return models[scheme]()
