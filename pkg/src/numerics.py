"""
Fresnel integrals, Cornu-spiral geometry and near-field correlation theory.
---------------------------------------------------------------------------

Classes:
    - CornuPoint: A point (C(t), S(t)) on the Cornu spiral.
    - CornuFrame: Tangent, normal, curvature and radius of the spiral at t.
    - SpreadParams: The composite quantities s, Δ and w of the correlation model.
    - DomainError: Raised when a mathematical precondition is violated.
    - ValidityWarning: Warning category for approximations used outside their range.

Functions:
    - fresnel: Unnormalized Fresnel integrals C(x), S(x).
    - cornu_frame: Frenet frame of the Cornu spiral.
    - osculating_center: Centre of the osculating circle at t.
    - element_distances: Exact antenna-to-UE path differences r⁽ⁿ⁾ − r.
    - spread_params: s, Δ and w for an (angle, range, offset) triple.
    - rho_exact: Correlation between a DFT column and a near-field steering vector.
    - rho_fresnel: Fresnel-integral approximation of rho_exact.
    - rho_upper_bound: Closed-form upper bound on rho_fresnel for w > 0.
    - spread_half_width: Half width L(Δ, ε) of the ε-approximated signal subspace.
    - epsilon_subspace: DFT indices of the ε-approximated signal subspace.

Conventions: C(x) = ∫₀ˣ cos(t²) dt and S(x) = ∫₀ˣ sin(t²) dt. Angles are
spatial angles θ = sin φ. DFT indices are 1-based.
"""

import math
import warnings
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy import special

from config import ArrayConfig

ArrayLike = Union[float, int, np.ndarray]

_FRESNEL_SCALE = math.sqrt(math.pi / 2)


class DomainError(ValueError):
    """Raised when an input violates a mathematical precondition."""

    pass


class ValidityWarning(UserWarning):
    """Emitted when an approximation is evaluated outside its validity range."""

    pass


@dataclass(frozen=True)
class CornuPoint:
    c: float
    s: float


@dataclass(frozen=True)
class CornuFrame:
    tangent: tuple[float, float]
    normal: tuple[float, float]
    curvature: float
    radius: float


@dataclass(frozen=True)
class SpreadParams:
    """Composite parameters of the Fresnel correlation model.

    Attributes:
        s_param: s = d(1 − θ²)/(2r).
        delta: Δ = N√(πs), the length of the spiral arc swept by the array.
        w: Lower integration limit √(πs)(l/(Ns) − N/2) for offset l.
    """

    s_param: float
    delta: float
    w: float


def fresnel_arrays(x: ArrayLike) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized C(x), S(x) in the unnormalized convention.

    Evaluated on |x| and mirrored, so C(−x) = −C(x) and S(−x) = −S(x) hold exactly.

    Args:
        x (ArrayLike): Finite argument(s).

    Returns:
        tuple[np.ndarray, np.ndarray]: Arrays (C, S) with the shape of x.

    Raises:
        DomainError: If any argument is not finite.
    """
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("Fresnel integrals need finite arguments")
    sign = np.sign(x)
    s1, c1 = special.fresnel(np.abs(x) / _FRESNEL_SCALE)
    return sign * _FRESNEL_SCALE * c1, sign * _FRESNEL_SCALE * s1


def fresnel(x: float) -> CornuPoint:
    """Evaluate the Fresnel integrals at a single point.

    Args:
        x (float): Finite argument.

    Returns:
        CornuPoint: (C(x), S(x)).

    Raises:
        DomainError: If x is not finite.
    """
    c, s = fresnel_arrays(x)
    return CornuPoint(c=float(c), s=float(s))


def cornu_frame(t: float) -> CornuFrame:
    """Frenet frame of the Cornu spiral F(t) = (C(t), S(t)).

    The tangent is (cos t², sin t²) and the curvature is 2t. At t = 0 the
    radius is reported as +inf.

    Args:
        t (float): Arc parameter.

    Returns:
        CornuFrame: Unit tangent, unit normal, curvature and radius.
    """
    if not math.isfinite(t):
        raise DomainError(f"Arc parameter must be finite, got {t}")
    t2 = t * t
    curvature = 2.0 * t
    radius = math.inf if curvature == 0 else 1.0 / curvature
    return CornuFrame(
        tangent=(math.cos(t2), math.sin(t2)),
        normal=(-math.sin(t2), math.cos(t2)),
        curvature=curvature,
        radius=radius,
    )


def osculating_center(t: float, radius: Optional[float] = None) -> tuple[float, float]:
    """Centre M(t) = F(t) + R(t)·N(t) of the osculating circle.

    Args:
        t (float): Arc parameter, strictly positive.
        radius (Optional[float]): Replaces R(t) = 1/(2t). Only used to reproduce
            figures drawn with a different radius convention.

    Returns:
        tuple[float, float]: Coordinates of the centre.

    Raises:
        DomainError: If t is not strictly positive.
    """
    if not (t > 0 and math.isfinite(t)):
        raise DomainError(f"Osculating centre needs t > 0, got {t}")
    frame = cornu_frame(t)
    point = fresnel(t)
    rad = frame.radius if radius is None else radius
    return point.c + rad * frame.normal[0], point.s + rad * frame.normal[1]


def _check_ue(theta: float, r: float) -> None:
    if not (r > 0 and math.isfinite(r)):
        raise DomainError(f"Range must be positive, got {r}")
    if not abs(theta) <= 1:
        raise DomainError(f"Spatial angle must lie in [-1, 1], got {theta}")


def element_distances(theta: float, r: float, cfg: ArrayConfig) -> np.ndarray:
    """Exact path differences r⁽ⁿ⁾ − r for every antenna.

    Uses r⁽ⁿ⁾ − r = (δ²d² − 2rδdθ)/(r⁽ⁿ⁾ + r) so the difference stays accurate
    when r is far larger than the aperture.

    Args:
        theta (float): Spatial angle of the UE.
        r (float): Distance from the array centre in meters.
        cfg (ArrayConfig): Array geometry.

    Returns:
        np.ndarray: Length-N real vector in meters.
    """
    _check_ue(theta, r)
    x = cfg.element_offsets * cfg.spacing
    numerator = x * x - 2.0 * r * x * theta
    r_n = np.sqrt(r * r + numerator)
    return numerator / (r_n + r)


def spread_params(theta: float, r: float, l: float, cfg: ArrayConfig) -> SpreadParams:
    """Compute s, Δ and w for a UE at (θ, r) seen by the DFT column offset by l.

    Warns with ValidityWarning when N·s ≥ 1, where the Fresnel model breaks down.
    """
    _check_ue(theta, r)
    n = cfg.n_antennas
    s = cfg.spacing * (1.0 - theta * theta) / (2.0 * r)
    root = math.sqrt(math.pi * s)
    if n * s >= 1:
        warnings.warn(f"N·s = {n * s:.3g} ≥ 1; the Fresnel model does not hold", ValidityWarning, stacklevel=2)
    w = root * (l / (n * s) - n / 2) if s > 0 else -math.inf
    return SpreadParams(s_param=s, delta=n * root, w=w)


def rho_exact(theta: float, r: float, l: ArrayLike, cfg: ArrayConfig) -> Union[float, np.ndarray]:
    """Squared correlation |f(θ + 2l/N)ᴴ a(θ, r)|² from exact antenna distances.

    Args:
        theta (float): Spatial angle of the UE.
        r (float): Range in meters.
        l (ArrayLike): DFT offset(s) from θ in grid steps.
        cfg (ArrayConfig): Array geometry.

    Returns:
        Union[float, np.ndarray]: Value(s) in [0, 1], shaped like l.
    """
    k = 2.0 * math.pi / cfg.wavelength
    delta_n = cfg.element_offsets
    offsets = np.asarray(l, dtype=float)
    base = k * element_distances(theta, r, cfg) + math.pi * delta_n * theta
    phase = base[:, None] + (2.0 * math.pi / cfg.n_antennas) * np.outer(delta_n, offsets.ravel())
    corr = np.abs(np.exp(1j * phase).sum(axis=0) / cfg.n_antennas) ** 2
    corr = np.minimum(corr, 1.0).reshape(offsets.shape)
    return float(corr) if corr.ndim == 0 else corr


def rho_fresnel(theta: float, r: float, l: ArrayLike, cfg: ArrayConfig) -> Union[float, np.ndarray]:
    """Fresnel-integral approximation of rho_exact.

    Evaluated at |l|, which makes the value symmetric in l exactly.

    Returns:
        Union[float, np.ndarray]: Value(s) (1/Δ²)|F(w+Δ) − F(w)|², shaped like l.
    """
    _check_ue(theta, r)
    n = cfg.n_antennas
    s = cfg.spacing * (1.0 - theta * theta) / (2.0 * r)
    offsets = np.abs(np.asarray(l, dtype=float))
    if s == 0:
        out = (offsets == 0).astype(float)
        return float(out) if out.ndim == 0 else out
    root = math.sqrt(math.pi * s)
    delta = n * root
    w = root * (offsets / (n * s) - n / 2)
    c_hi, s_hi = fresnel_arrays(w + delta)
    c_lo, s_lo = fresnel_arrays(w)
    out = ((c_hi - c_lo) ** 2 + (s_hi - s_lo) ** 2) / (delta * delta)
    return float(out) if out.ndim == 0 else out


def rho_upper_bound(theta: float, r: float, l: float, cfg: ArrayConfig) -> float:
    """Upper bound 1/(w²(w+Δ)²) on rho_fresnel.

    Raises:
        DomainError: If w ≤ 0, where the bound does not apply.
    """
    params = spread_params(theta, r, l, cfg)
    if not params.w > 0:
        raise DomainError(f"Correlation bound needs w > 0, got w = {params.w:.6g}")
    return bound_from_spread(params.w, params.delta)


def bound_from_spread(w: float, delta: float) -> float:
    if not w > 0:
        raise DomainError(f"Correlation bound needs w > 0, got w = {w:.6g}")
    return 1.0 / (w * w * (w + delta) ** 2)


def spread_half_width(delta: float, epsilon: float, n_antennas: Optional[int] = None) -> int:
    """Half width L(Δ, ε) = ⌊√((Δ²/2π)(Δ²/2π + 2/(πε)))⌋.

    Args:
        delta (float): Spread Δ, positive.
        epsilon (float): Correlation threshold ε in (0, 1).
        n_antennas (Optional[int]): When given, check that the bound is tight enough
            at the far edge of the codebook (l = N/2) and warn otherwise.

    Returns:
        int: L ≥ 0.

    Raises:
        DomainError: On nonpositive inputs.
    """
    if not (delta > 0 and epsilon > 0):
        raise DomainError(f"Spread half width needs Δ > 0 and ε > 0, got Δ={delta}, ε={epsilon}")
    if n_antennas is not None:
        s = delta * delta / (math.pi * n_antennas * n_antennas)
        ns2 = (n_antennas * s) ** 2
        edge = math.inf if ns2 >= 1 else 4 * s / (math.pi * (1 - ns2))
        if edge >= epsilon:
            warnings.warn(
                f"Correlation bound at the codebook edge is {edge:.3g}, not below ε = {epsilon}",
                ValidityWarning,
                stacklevel=2,
            )
    a = delta * delta / (2 * math.pi)
    return int(math.floor(math.sqrt(a * (a + 2 / (math.pi * epsilon)))))


def delta_at(theta: float, r: float, cfg: ArrayConfig) -> float:
    """Spread Δ = N√(πd(1 − θ²)/(2r)) for a beam at (θ, r)."""
    _check_ue(theta, r)
    return cfg.n_antennas * math.sqrt(math.pi * cfg.spacing * (1.0 - theta * theta) / (2.0 * r))


def spread_geometry(thetas: ArrayLike, cfg: ArrayConfig) -> np.ndarray:
    """Range-free factor N²d(1 − θ²)/4 of Δ²/(2π); dividing by r gives Δ²/(2π)."""
    thetas = np.asarray(thetas, dtype=float)
    return cfg.n_antennas**2 * cfg.spacing * (1.0 - thetas * thetas) / 4.0


def half_widths(geometry: ArrayLike, r: float, epsilon: float) -> np.ndarray:
    """Vectorized L from precomputed spread_geometry values at range r."""
    if not (r > 0 and epsilon > 0):
        raise DomainError(f"Half width needs r > 0 and ε > 0, got r={r}, ε={epsilon}")
    a = np.asarray(geometry, dtype=float) / r
    return np.floor(np.sqrt(a * (a + 2 / (math.pi * epsilon)))).astype(int)


def half_width_at(theta: float, r: float, epsilon: float, cfg: ArrayConfig) -> int:
    """L(Δ(θ, r), ε), zero where the spread vanishes."""
    _check_ue(theta, r)
    return int(half_widths(spread_geometry(theta, cfg), r, epsilon))


def wrap_index(m: ArrayLike, n: int) -> ArrayLike:
    """Map any integer index onto 1..N circularly."""
    return (np.asarray(m) - 1) % n + 1 if isinstance(m, np.ndarray) else (int(m) - 1) % n + 1


def epsilon_subspace(center_index: int, r: float, epsilon: float, cfg: ArrayConfig) -> list[int]:
    """DFT indices spanning the ε-approximated signal subspace around a column.

    Args:
        center_index (int): Column index in 1..N.
        r (float): Range used for the spread in meters.
        epsilon (float): Correlation threshold.
        cfg (ArrayConfig): Array geometry.

    Returns:
        list[int]: 2L+1 circularly contiguous indices with center_index in the middle,
            L capped at (N − 1)//2 so no index repeats.
    """
    n = cfg.n_antennas
    if not 1 <= center_index <= n:
        raise DomainError(f"DFT index must lie in 1..{n}, got {center_index}")
    theta = (2 * center_index - n - 1) / n
    half = min(half_width_at(theta, r, epsilon, cfg), (n - 1) // 2)
    return [wrap_index(center_index + k, n) for k in range(-half, half + 1)]
