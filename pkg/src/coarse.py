"""
Coarse beam alignment from DFT-codebook measurements.
-----------------------------------------------------

Stage one of the alignment: a maximum-likelihood estimate of the channel gain
from the total received energy, a range estimate by inverting free-space path
loss, then a penalized sliding-window search for the centre of the
ε-approximated signal subspace.

Classes:
    - CoarseResult: Outcome of the coarse stage.

Functions:
    - default_gamma: Penalty weight γ = Pₜ/10ˣ.
    - estimate_channel_gain: ML estimate of ‖h‖².
    - estimate_range: Range from the gain estimate, clamped to the coverage area.
    - window_half_widths: g(i) for every DFT index at a given range.
    - window_half_width: g(i) for one index.
    - solve_p2: Penalized sliding-window energy detection.
    - coarse_align: The full coarse stage.
    - max_window_length: Input length U of the fine stage.
"""

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from config import ArrayConfig
from numerics import DomainError, half_widths, spread_geometry, wrap_index
from utils import FlopCounter

GAIN_FLOOR = 1e-30
FOUR_PI = 4 * math.pi

# Operations per step, counted as real multiplies, adds, compares and square roots.
GAIN_OPS = 10
RANGE_OPS = 6
HALF_WIDTH_CONSTANT_OPS = 2
HALF_WIDTH_OPS = 5
WINDOW_OPS = 7


@dataclass(frozen=True)
class CoarseResult:
    """Outcome of the coarse stage.

    Attributes:
        center_index: î in 1..N.
        half_width: g(î).
        range_est: r̂ in meters.
        angle_est: θ_î.
        subspace: 2g(î)+1 DFT indices centred on î, in window order.
        objective: P2 objective at î.
        gain_est: Ê_h.
    """

    center_index: int
    half_width: int
    range_est: float
    angle_est: float
    subspace: tuple[int, ...]
    objective: float
    gain_est: float


def default_gamma(p_t_mw: float, exponent: float = 1.5) -> float:
    return p_t_mw / 10**exponent


def estimate_channel_gain(
    y: np.ndarray, p_t_mw: float, sigma2_mw: float, counter: Optional[FlopCounter] = None
) -> float:
    """ML estimate Ê_h = −1/SNR + √(1/SNR² + E_y²) with E_y = (‖y‖² − Nσ²)/Pₜ.

    Args:
        y (np.ndarray): DFT measurements.
        p_t_mw (float): Transmit power in mW.
        sigma2_mw (float): Noise power in mW.
        counter (Optional[FlopCounter]): Receives the operation count.

    Returns:
        float: Ê_h, never below GAIN_FLOOR.
    """
    if p_t_mw <= 0 or sigma2_mw < 0:
        raise DomainError(f"Powers must be positive, got Pt={p_t_mw}, σ²={sigma2_mw}")
    energy = float(np.vdot(y, y).real)
    if counter is not None:
        counter.add("energy", 4 * y.shape[0] - 1)
    return _gain_from_energy(energy, y.shape[0], p_t_mw, sigma2_mw, counter)


def _gain_from_energy(
    energy: float, n: int, p_t_mw: float, sigma2_mw: float, counter: Optional[FlopCounter]
) -> float:
    e_y = (energy - n * sigma2_mw) / p_t_mw
    inv_snr = sigma2_mw / p_t_mw
    gain = -inv_snr + math.sqrt(inv_snr * inv_snr + e_y * e_y)
    if counter is not None:
        counter.add("gain", GAIN_OPS)
    return max(gain, GAIN_FLOOR)


def estimate_range(gain_est: float, cfg: ArrayConfig, counter: Optional[FlopCounter] = None) -> float:
    """Range r̂ = clamp(λ/(4π)·√(N/Ê_h), r_min, r_max).

    Raises:
        DomainError: If the gain estimate is not positive.
    """
    if not gain_est > 0:
        raise DomainError(f"Gain estimate must be positive, got {gain_est}")
    r_hat = cfg.wavelength / FOUR_PI * math.sqrt(cfg.n_antennas / gain_est)
    if counter is not None:
        counter.add("range", RANGE_OPS)
    return min(max(r_hat, cfg.r_min), cfg.r_max)


@lru_cache(maxsize=8)
def _half_grid_geometry(cfg: ArrayConfig) -> np.ndarray:
    """spread_geometry of the first ⌈N/2⌉ grid angles; θ_{N+1−i} = −θᵢ covers the rest."""
    n = cfg.n_antennas
    thetas = (2 * np.arange(1, (n + 1) // 2 + 1) - n - 1) / n
    geometry = spread_geometry(thetas, cfg)
    geometry.setflags(write=False)
    return geometry


def window_half_widths(
    r_hat: float, epsilon: float, cfg: ArrayConfig, counter: Optional[FlopCounter] = None
) -> np.ndarray:
    """g(i) = L(Δ(θᵢ, r̂), ε) for i = 1..N, capped at (N − 1)//2.

    Only the first ⌈N/2⌉ indices are evaluated; the grid is symmetric about broadside.
    """
    n = cfg.n_antennas
    half = np.minimum(half_widths(_half_grid_geometry(cfg), r_hat, epsilon), (n - 1) // 2)
    if counter is not None:
        counter.add("half_width", HALF_WIDTH_CONSTANT_OPS + HALF_WIDTH_OPS * half.size)
    return np.concatenate([half, half[: n // 2][::-1]])


def window_half_width(i: int, r_hat: float, epsilon: float, cfg: ArrayConfig) -> int:
    """g(i) for a single DFT index."""
    if not 1 <= i <= cfg.n_antennas:
        raise DomainError(f"DFT index must lie in 1..{cfg.n_antennas}, got {i}")
    return int(window_half_widths(r_hat, epsilon, cfg)[i - 1])


def _p2_objective(
    energies: np.ndarray, widths: np.ndarray, gamma: float, counter: Optional[FlopCounter] = None
) -> np.ndarray:
    """P2 objective for every centre from one circular prefix-sum pass."""
    n = energies.shape[0]
    pad = int(widths.max()) if widths.size else 0
    extended = np.concatenate([energies[n - pad :], energies, energies[:pad]])
    prefix = np.concatenate([[0.0], np.cumsum(extended)])
    centre = np.arange(n) + pad
    lo = centre - widths
    hi = centre + widths
    total = prefix[hi + 1] - prefix[lo]
    left = prefix[centre] - prefix[lo]
    right = prefix[hi + 1] - prefix[centre + 1]
    objective = total - gamma * np.abs(left - right)
    if counter is not None:
        counter.add("prefix", max(extended.size - 1, 0))
        counter.add("window", WINDOW_OPS * objective.size)
    return objective


def solve_p2(
    y: np.ndarray, r_hat: float, epsilon: float, gamma: float, cfg: ArrayConfig
) -> tuple[int, float]:
    """Maximize ‖y_{i−g:i+g}‖² − γ|‖y_{i−g:i−1}‖² − ‖y_{i+1:i+g}‖²| over the centre i.

    Windows wrap circularly. Ties go to the smallest index.

    Args:
        y (np.ndarray): DFT measurements.
        r_hat (float): Range estimate in meters.
        epsilon (float): Subspace threshold.
        gamma (float): Asymmetry penalty, nonnegative.
        cfg (ArrayConfig): Array geometry.

    Returns:
        tuple[int, float]: (î in 1..N, objective at î).
    """
    if gamma < 0:
        raise DomainError(f"Penalty must be nonnegative, got {gamma}")
    energies = np.abs(y) ** 2
    objective = _p2_objective(energies, window_half_widths(r_hat, epsilon, cfg), gamma)
    best = int(np.argmax(objective))
    return best + 1, float(objective[best])


def coarse_align(
    y: np.ndarray,
    p_t_mw: float,
    cfg: ArrayConfig,
    epsilon: float = 0.1,
    gamma: Optional[float] = None,
    sigma2_mw: Optional[float] = None,
    counter: Optional[FlopCounter] = None,
) -> CoarseResult:
    """Run the coarse stage end to end.

    With a counter, every step adds its operations from the sizes of the arrays
    it processed.

    Args:
        y (np.ndarray): DFT measurements.
        p_t_mw (float): Transmit power in mW.
        cfg (ArrayConfig): Array geometry.
        epsilon (float): Subspace threshold.
        gamma (Optional[float]): Asymmetry penalty; defaults to default_gamma(p_t_mw).
        sigma2_mw (Optional[float]): Noise power; defaults to the array's thermal noise.
        counter (Optional[FlopCounter]): Receives the operation count.

    Returns:
        CoarseResult: Centre, half width, range, angle and subspace.
    """
    n = cfg.n_antennas
    sigma2 = cfg.noise_power_mw if sigma2_mw is None else sigma2_mw
    penalty = default_gamma(p_t_mw) if gamma is None else gamma
    if penalty < 0:
        raise DomainError(f"Penalty must be nonnegative, got {penalty}")
    if counter is not None and gamma is None:
        counter.add("penalty", 1)

    energies = y.real**2 + y.imag**2
    total_energy = float(energies.sum())
    if counter is not None:
        # re² + im² per entry, then the sum
        counter.add("energy", 3 * energies.size + energies.size - 1)

    # The range fixes the window widths, so the gain needs ‖y‖² before the prefix pass.
    gain = _gain_from_energy(total_energy, n, p_t_mw, sigma2, counter)
    r_hat = estimate_range(gain, cfg, counter)

    widths = window_half_widths(r_hat, epsilon, cfg, counter)
    objective = _p2_objective(energies, widths, penalty, counter)
    best = int(np.argmax(objective))
    if counter is not None:
        counter.add("argmax", objective.size - 1)

    centre = best + 1
    half = int(widths[best])
    return CoarseResult(
        center_index=centre,
        half_width=half,
        range_est=r_hat,
        angle_est=(2 * centre - n - 1) / n,
        subspace=tuple(wrap_index(centre + k, n) for k in range(-half, half + 1)),
        objective=float(objective[best]),
        gain_est=gain,
    )


def max_window_length(cfg: ArrayConfig, epsilon: float = 0.1) -> int:
    """Fine-stage input length U = 2L(Δ(0, r_min), ε) + 1, at most N."""
    half = int(half_widths(spread_geometry(0.0, cfg), cfg.r_min, epsilon))
    return 2 * min(half, (cfg.n_antennas - 1) // 2) + 1
