"""
Unit tests for numerics.py module.
Check closed forms against hand-computed values; nothing is mocked.
"""

import math
import unittest
import warnings

import numpy as np
from parameterized import parameterized
from scipy import integrate

from channel import dft_column, grid_angle, steering_vector
from config import ArrayConfig
from numerics import (
    DomainError,
    ValidityWarning,
    bound_from_spread,
    cornu_frame,
    delta_at,
    element_distances,
    epsilon_subspace,
    fresnel,
    fresnel_arrays,
    half_width_at,
    osculating_center,
    rho_exact,
    rho_fresnel,
    rho_upper_bound,
    spread_half_width,
    spread_params,
    wrap_index,
)

LIMIT = math.sqrt(math.pi / 8)


def series_fresnel(x: float) -> tuple[float, float]:
    """Maclaurin series of C and S, accurate for |x| ≤ 3."""
    c = s = 0.0
    for k in range(40):
        c += (-1) ** k * x ** (4 * k + 1) / (math.factorial(2 * k) * (4 * k + 1))
        s += (-1) ** k * x ** (4 * k + 3) / (math.factorial(2 * k + 1) * (4 * k + 3))
    return c, s


def asymptotic_fresnel(x: float) -> tuple[float, float]:
    """Asymptotic expansion of the tail ∫ₓ^∞ e^{jt²} dt for large x."""
    z = x * x
    tail = 0j
    term = 1j * np.exp(1j * z) * z**-0.5
    for k in range(60):
        previous = abs(term)
        tail += term
        term = term * (-1j) * (0.5 + k) / z
        if abs(term) < 1e-18 or abs(term) > previous:
            break
    value = LIMIT * (1 + 1j) - 0.5 * tail
    return value.real, value.imag


def quad_fresnel(x: float) -> tuple[float, float]:
    """Series up to 3 plus adaptive quadrature beyond."""
    c0, s0 = series_fresnel(3.0)
    dc, _ = integrate.quad(lambda t: math.cos(t * t), 3.0, x, limit=500, epsabs=1e-13, epsrel=1e-13)
    ds, _ = integrate.quad(lambda t: math.sin(t * t), 3.0, x, limit=500, epsabs=1e-13, epsrel=1e-13)
    return c0 + dc, s0 + ds


def oracle_fresnel(x: float) -> tuple[float, float]:
    sign = -1.0 if x < 0 else 1.0
    ax = abs(x)
    if ax <= 3.0:
        c, s = series_fresnel(ax)
    elif ax <= 8.0:
        c, s = quad_fresnel(ax)
    else:
        c, s = asymptotic_fresnel(ax)
    return sign * c, sign * s


class TestFresnel(unittest.TestCase):
    """Unit tests for fresnel and fresnel_arrays."""

    def test_zero(self):
        """Test F(0) = (0, 0)."""
        point = fresnel(0.0)
        self.assertEqual((point.c, point.s), (0.0, 0.0))

    def test_one(self):
        """Test F(1) against the tabulated value."""
        point = fresnel(1.0)
        self.assertAlmostEqual(point.c, 0.904524, delta=1e-5)
        self.assertAlmostEqual(point.s, 0.310268, delta=1e-5)

    def test_matches_oracle(self):
        """Test agreement with the series, quadrature and asymptotic oracles on [−50, 50]."""
        xs = np.concatenate([np.linspace(-50, 50, 401), [-1.8, 1.8, 2.5, 3.0, 3.01, 8.0, 8.01]])
        c, s = fresnel_arrays(xs)
        for x, ci, si in zip(xs, c, s):
            oc, os_ = oracle_fresnel(float(x))
            self.assertAlmostEqual(ci, oc, delta=1e-10, msg=f"C({x})")
            self.assertAlmostEqual(si, os_, delta=1e-10, msg=f"S({x})")

    def test_odd_symmetry_exact(self):
        """Test C(−x) = −C(x) and S(−x) = −S(x) bit for bit."""
        xs = np.linspace(0.01, 20, 97)
        c_pos, s_pos = fresnel_arrays(xs)
        c_neg, s_neg = fresnel_arrays(-xs)
        np.testing.assert_array_equal(c_neg, -c_pos)
        np.testing.assert_array_equal(s_neg, -s_pos)

    def test_limit(self):
        """Test convergence to √(π/8) with oscillations of size 1/(2x)."""
        x = 1e4
        point = fresnel(x)
        self.assertLessEqual(abs(point.c - LIMIT), 1 / (2 * x) + 1e-9)
        self.assertLessEqual(abs(point.s - LIMIT), 1 / (2 * x) + 1e-9)
        # Removing the leading oscillation leaves the limit.
        self.assertAlmostEqual(point.c - math.sin(x * x) / (2 * x), LIMIT, delta=1e-6)
        self.assertAlmostEqual(point.s + math.cos(x * x) / (2 * x), LIMIT, delta=1e-6)

    @parameterized.expand([("nan", math.nan), ("inf", math.inf), ("neg_inf", -math.inf)])
    def test_non_finite(self, _name, x):
        """Test that non-finite arguments raise DomainError."""
        with self.assertRaises(DomainError):
            fresnel(x)

    def test_array_shape_preserved(self):
        """Test that fresnel_arrays keeps the input shape."""
        c, s = fresnel_arrays(np.zeros((3, 4)))
        self.assertEqual(c.shape, (3, 4))
        self.assertEqual(s.shape, (3, 4))


class TestCornuFrame(unittest.TestCase):
    """Unit tests for cornu_frame and osculating_center."""

    def test_frame_at_one(self):
        """Test tangent, curvature and radius at t = 1."""
        frame = cornu_frame(1.0)
        self.assertAlmostEqual(frame.tangent[0], 0.540302, delta=1e-6)
        self.assertAlmostEqual(frame.tangent[1], 0.841471, delta=1e-6)
        self.assertEqual(frame.curvature, 2.0)
        self.assertEqual(frame.radius, 0.5)

    def test_frame_at_root_pi(self):
        """Test that t = √π points the tangent backwards."""
        frame = cornu_frame(math.sqrt(math.pi))
        self.assertAlmostEqual(frame.tangent[0], -1.0, places=12)
        self.assertAlmostEqual(frame.tangent[1], 0.0, places=12)

    def test_radius(self):
        """Test R = 1/(2t) at t = 0.6416."""
        self.assertAlmostEqual(cornu_frame(0.6416).radius, 0.779302, delta=1e-6)

    def test_zero_radius_infinite(self):
        """Test the +inf radius at t = 0."""
        self.assertEqual(cornu_frame(0.0).radius, math.inf)

    def test_unit_orthogonal_frame(self):
        """Test |T| = |N| = 1 and T·N = 0."""
        for t in np.linspace(-5, 5, 41):
            frame = cornu_frame(float(t))
            tangent, normal = np.array(frame.tangent), np.array(frame.normal)
            self.assertAlmostEqual(np.linalg.norm(tangent), 1.0, places=12)
            self.assertAlmostEqual(np.linalg.norm(normal), 1.0, places=12)
            self.assertAlmostEqual(float(tangent @ normal), 0.0, places=12)

    def test_osculating_center(self):
        """Test the centre at t = 0.6416 with the curvature radius."""
        cx, cy = osculating_center(0.6416)
        self.assertAlmostEqual(cx, 0.31896, delta=1e-3)
        self.assertAlmostEqual(cy, 0.80114, delta=1e-3)

    def test_osculating_center_radius_override(self):
        """Test the centre at t = 0.6416 with radius 1/t."""
        cx, cy = osculating_center(0.6416, radius=1 / 0.6416)
        self.assertAlmostEqual(cx, 0.0072, delta=1e-3)
        self.assertAlmostEqual(cy, 1.5154, delta=1e-3)

    def test_center_distance_is_radius(self):
        """Test |M(t) − F(t)| = R(t)."""
        for t in (0.2, 0.6416, 1.0, 3.0):
            centre = np.array(osculating_center(t))
            point = fresnel(t)
            self.assertAlmostEqual(np.hypot(*(centre - [point.c, point.s])), 1 / (2 * t), delta=1e-9)

    def test_center_converges_to_limit(self):
        """Test that the centre approaches the spiral limit for large t."""
        cx, cy = osculating_center(100.0)
        self.assertLess(math.hypot(cx - LIMIT, cy - LIMIT), 0.005)

    def test_nested_circles(self):
        """Test that later osculating circles lie inside earlier ones."""
        rng = np.random.default_rng(1)
        for _ in range(1000):
            a, b = np.sort(rng.uniform(0.1, 5.0, 2))
            if b - a < 1e-6:
                continue
            gap = math.dist(osculating_center(float(b)), osculating_center(float(a)))
            self.assertLessEqual(gap + 1 / (2 * b), 1 / (2 * a) + 1e-9)

    @parameterized.expand([("zero", 0.0), ("negative", -1.0), ("nan", math.nan)])
    def test_center_domain(self, _name, t):
        """Test that t ≤ 0 raises DomainError."""
        with self.assertRaises(DomainError):
            osculating_center(t)


class TestCorrelation(unittest.TestCase):
    """Unit tests for rho_exact, rho_fresnel and the bound."""

    def setUp(self):
        """Default array."""
        self.cfg = ArrayConfig()
        self.n = self.cfg.n_antennas

    def test_element_distances_against_direct(self):
        """Test the stable path-difference form against √(r² + x² − 2rxθ) − r."""
        theta, r = 0.3, 12.0
        x = self.cfg.element_offsets * self.cfg.spacing
        direct = np.sqrt(r * r + x * x - 2 * r * x * theta) - r
        np.testing.assert_allclose(element_distances(theta, r, self.cfg), direct, atol=1e-12)

    def test_far_field_collapse(self):
        """Test ρ = 1 at l = 0 and ρ ≈ 0 elsewhere for a far UE on the grid."""
        theta = float(grid_angle(100, self.n))
        self.assertAlmostEqual(rho_exact(theta, 1e9, 0, self.cfg), 1.0, delta=1e-9)
        self.assertLess(rho_exact(theta, 1e9, 7, self.cfg), 1e-9)

    def test_exact_matches_inner_product(self):
        """Test ρ against |fᴴa|² from independent vectors."""
        theta, r = float(grid_angle(140, self.n)), 9.0
        a = steering_vector(theta, r, self.cfg)
        for l in (0, 2, 5):
            f = dft_column(140 + l, self.cfg)
            expected = abs(np.vdot(f, a)) ** 2
            self.assertAlmostEqual(rho_exact(theta, r, l, self.cfg), expected, places=12)

    def test_exact_vectorized(self):
        """Test that an array of offsets matches scalar calls."""
        values = rho_exact(0.1, 15.0, np.arange(4), self.cfg)
        for l in range(4):
            self.assertAlmostEqual(values[l], rho_exact(0.1, 15.0, l, self.cfg), places=14)

    def test_exact_and_fresnel_agree(self):
        """Test the cross-check at θ = 0, r = 10 m, l = 3."""
        self.assertLessEqual(abs(rho_exact(0.0, 10.0, 3, self.cfg) - rho_fresnel(0.0, 10.0, 3, self.cfg)), 1e-2)

    def test_fresnel_at_centre(self):
        """Test ρ(l = 0) = (4/Δ²)(C(Δ/2)² + S(Δ/2)²)."""
        delta = delta_at(0.0, 10.0, self.cfg)
        point = fresnel(delta / 2)
        expected = 4 / delta**2 * (point.c**2 + point.s**2)
        self.assertAlmostEqual(rho_fresnel(0.0, 10.0, 0, self.cfg), expected, places=12)

    def test_fresnel_symmetric(self):
        """Test ρ(l) = ρ(−l) exactly."""
        self.assertEqual(rho_fresnel(0.2, 10.0, 5, self.cfg), rho_fresnel(0.2, 10.0, -5, self.cfg))

    def test_fresnel_far_offset_below_bound(self):
        """Test ρ(θ = 0, r = 10 m, l = 40) < 1.35e-5."""
        self.assertLess(rho_fresnel(0.0, 10.0, 40, self.cfg), 1.35e-5)

    def test_spread_params_example(self):
        """Test w and Δ at θ = 0, r = 10 m, l = 40."""
        params = spread_params(0.0, 10.0, 40, self.cfg)
        self.assertAlmostEqual(params.w, 13.209, delta=1e-2)
        self.assertAlmostEqual(params.delta, 7.426, delta=1e-2)

    def test_upper_bound_example(self):
        """Test the bound at θ = 0, r = 10 m, l = 40."""
        self.assertAlmostEqual(rho_upper_bound(0.0, 10.0, 40, self.cfg), 1.346e-5, delta=1.346e-5 * 0.05)

    def test_bound_from_spread(self):
        """Test 1/(w²(w+Δ)²) at w = Δ = 1."""
        self.assertEqual(bound_from_spread(1.0, 1.0), 0.25)

    def test_bound_requires_positive_w(self):
        """Test that w ≤ 0 raises DomainError."""
        with self.assertRaises(DomainError):
            rho_upper_bound(0.0, 10.0, 0, self.cfg)
        with self.assertRaises(DomainError):
            bound_from_spread(0.0, 1.0)

    def test_validity_warning(self):
        """Test the warning when N·s ≥ 1."""
        with self.assertWarns(ValidityWarning):
            spread_params(0.0, 0.001, 1, self.cfg)

    @parameterized.expand([("zero_range", 0.0, 0.0), ("angle_above_one", 1.5, 10.0)])
    def test_ue_domain(self, _name, theta, r):
        """Test that an invalid UE raises DomainError."""
        with self.assertRaises(DomainError):
            rho_fresnel(theta, r, 0, self.cfg)


class TestSpreadHalfWidth(unittest.TestCase):
    """Unit tests for spread_half_width, half_width_at and epsilon_subspace."""

    def setUp(self):
        """Default array."""
        self.cfg = ArrayConfig()

    def test_minimum_range_width(self):
        """Test L = 24 at θ = 0, r = 4 m, hence U = 49."""
        self.assertEqual(half_width_at(0.0, 4.0, 0.1, self.cfg), 24)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ValidityWarning)
            self.assertEqual(spread_half_width(delta_at(0.0, 4.0, self.cfg), 0.1), 24)

    def test_maximum_range_width(self):
        """Test L = 2 at θ = 0, r = 80 m."""
        delta = delta_at(0.0, 80.0, self.cfg)
        self.assertAlmostEqual(delta**2, 6.894, delta=1e-3)
        self.assertEqual(spread_half_width(delta, 0.1), 2)
        self.assertEqual(half_width_at(0.0, 80.0, 0.1, self.cfg), 2)

    def test_vanishing_spread(self):
        """Test L = 0 as Δ → 0."""
        self.assertEqual(spread_half_width(1e-9, 0.1), 0)

    def test_monotone(self):
        """Test that L grows with Δ and shrinks with ε."""
        deltas = np.linspace(0.1, 20, 50)
        widths = [spread_half_width(float(d), 0.1) for d in deltas]
        self.assertEqual(widths, sorted(widths))
        eps = np.linspace(0.01, 0.9, 50)
        widths = [spread_half_width(5.0, float(e)) for e in eps]
        self.assertEqual(widths, sorted(widths, reverse=True))

    def test_scalar_and_vector_agree(self):
        """Test that spread_half_width and half_width_at agree across ranges."""
        for r in np.linspace(4, 80, 39):
            delta = delta_at(0.2, float(r), self.cfg)
            self.assertEqual(spread_half_width(delta, 0.1), half_width_at(0.2, float(r), 0.1, self.cfg))

    def test_edge_warning(self):
        """Test the warning when the bound at the codebook edge exceeds ε."""
        with self.assertWarns(ValidityWarning):
            spread_half_width(200.0, 0.1, n_antennas=256)

    def test_no_warning_in_envelope(self):
        """Test that the default envelope satisfies the edge condition."""
        with warnings.catch_warnings():
            warnings.simplefilter("error", ValidityWarning)
            spread_half_width(delta_at(0.0, 4.0, self.cfg), 0.1, n_antennas=256)

    @parameterized.expand([("zero_delta", 0.0, 0.1), ("zero_epsilon", 1.0, 0.0)])
    def test_domain(self, _name, delta, epsilon):
        """Test that nonpositive inputs raise DomainError."""
        with self.assertRaises(DomainError):
            spread_half_width(delta, epsilon)

    def test_interior_subspace(self):
        """Test an interior window at r = 80 m."""
        self.assertEqual(epsilon_subspace(128, 80.0, 0.1, self.cfg), [126, 127, 128, 129, 130])

    def test_wrapped_subspace(self):
        """Test the circular wrap at the first column, where L = 2 at 0.76 m."""
        self.assertEqual(epsilon_subspace(1, 0.76, 0.1, self.cfg), [255, 256, 1, 2, 3])

    def test_subspace_capped(self):
        """Test that the window never repeats an index."""
        small = ArrayConfig(n_antennas=8)
        indices = epsilon_subspace(4, 0.01, 0.1, small)
        self.assertEqual(len(indices), 7)
        self.assertEqual(len(set(indices)), 7)

    def test_subspace_bad_index(self):
        """Test that an out-of-range centre raises DomainError."""
        with self.assertRaises(DomainError):
            epsilon_subspace(0, 10.0, 0.1, self.cfg)

    @parameterized.expand([("zero", 0, 256), ("wrap_high", 257, 1), ("wrap_low", -1, 255), ("inside", 42, 42)])
    def test_wrap_index(self, _name, m, expected):
        """Test circular index mapping onto 1..N."""
        self.assertEqual(wrap_index(m, 256), expected)


if __name__ == "__main__":
    unittest.main()
