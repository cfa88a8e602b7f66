"""
Unit tests for finenet.py module.
Gradients are checked against central differences on a miniature network.
"""

import dataclasses
import math
import os
import struct
import subprocess
import sys
import tempfile
import unittest
import zlib
from pathlib import Path

import numpy as np
from parameterized import parameterized

from channel import grid_angle
from coarse import CoarseResult
from finenet import (
    NetworkParams,
    NetworkSpec,
    TrainSample,
    WeightFileError,
    argmax_angle,
    build_input,
    feature_lengths,
    forward,
    gradients,
    init_params,
    load_weights,
    loss,
    network_flops,
    param_count,
    predict,
    refine_angle,
    save_weights,
    stack_samples,
    update_running_stats,
)
from numerics import DomainError
from training import AdamState, adam_step

MINI = NetworkSpec(window=9, branch_channels=(2, 4, 8), dropout=0.0)
STEP = 1e-4
SRC_DIR = Path(__file__).resolve().parents[2] / "src"
REPLAY_SCRIPT = """
import sys
import numpy as np
from finenet import NetworkSpec, forward, init_params
rng = np.random.default_rng(31)
params = init_params(NetworkSpec(window=9, branch_channels=(2, 4, 8), dropout=0.0), rng)
x = rng.uniform(0.0, 1.0, (3, 1, 9))
mask = np.ones((3, 9))
mask[1, 6:] = 0.0
sys.stdout.write(forward(params, x, mask)[0].tobytes().hex())
"""


def mini_batch(rng: np.random.Generator, batch: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Random inputs with 5 to 9 valid slots and a valid target per row."""
    x = rng.uniform(0.0, 1.0, (batch, 1, MINI.window))
    mask = np.zeros((batch, MINI.window))
    targets = np.empty(batch, dtype=int)
    for b in range(batch):
        valid = int(rng.integers(5, MINI.window + 1))
        mask[b, :valid] = 1.0
        targets[b] = int(rng.integers(0, valid))
    return x, mask, targets


def activation_signature(cache) -> bytes:
    """Signs of every PReLU input and the attention argmax pattern of a forward pass."""
    parts = []
    for name, saved in sorted(cache.stages.items()):
        if name.startswith("prelu"):
            parts.append(np.packbits(saved[0] > 0).tobytes())
        elif name == "attention":
            parts.append(saved[0].astype(np.int64).tobytes())
    return b"".join(parts)


def numeric_gradient(params, x, mask, targets, name, train):
    """Central differences of the loss for one tensor, with a mask of usable coordinates."""
    tensor = params.weights[name]
    grad = np.zeros_like(tensor)
    usable = np.ones(tensor.shape, dtype=bool)
    for idx in np.ndindex(tensor.shape):
        original = tensor[idx]
        tensor[idx] = original + STEP
        probs_hi, cache_hi = forward(params, x, mask, train=train)
        tensor[idx] = original - STEP
        probs_lo, cache_lo = forward(params, x, mask, train=train)
        tensor[idx] = original
        if activation_signature(cache_hi) != activation_signature(cache_lo):
            usable[idx] = False
            continue
        grad[idx] = (loss(probs_hi, targets) - loss(probs_lo, targets)) / (2 * STEP)
    return grad, usable


class TestArchitecture(unittest.TestCase):
    """Unit tests for parameter counts, feature lengths and FLOPs."""

    def test_default_param_count(self):
        """Test 81,888 trainable scalars for U = 49."""
        params = init_params(NetworkSpec(), np.random.default_rng(0))
        self.assertEqual(param_count(params), 81_888)

    def test_miniature_param_count(self):
        """Test 1,548 trainable scalars for the miniature network."""
        self.assertEqual(param_count(init_params(MINI, np.random.default_rng(0))), 1_548)

    def test_buffers_not_counted(self):
        """Test that batch-norm statistics and block slopes are buffers."""
        params = init_params(NetworkSpec(), np.random.default_rng(0))
        self.assertIn("bn1_mean", params.buffers)
        self.assertIn("prelu3_slope", params.buffers)
        self.assertNotIn("prelu3_slope", params.weights)

    @parameterized.expand([("default", 49, (25, 13, 7)), ("miniature", 9, (5, 3, 2)), ("single", 1, (1, 1, 1))])
    def test_feature_lengths(self, _name, window, expected):
        """Test Lₖ = ⌊(Lₖ₋₁ + 1)/2⌋."""
        self.assertEqual(feature_lengths(window), expected)

    def test_forward_lengths_match(self):
        """Test that the forward pass produces the advertised lengths."""
        params = init_params(NetworkSpec(), np.random.default_rng(1))
        x, mask = np.ones((2, 1, 49)), np.ones((2, 49))
        _, cache = forward(params, x, mask)
        lengths = [cache.stages[f"prelu{b}"][0].shape[2] for b in (1, 2, 3)]
        self.assertEqual(tuple(lengths), feature_lengths(49))

    def test_network_flops(self):
        """Test the layer-by-layer count of 755,372."""
        counts = network_flops(NetworkSpec())
        self.assertEqual(sum(counts.values()), 755_372)
        self.assertEqual(counts["conv1"], 5_600)
        self.assertEqual(counts["output"], 12_495)

    def test_init_replay(self):
        """Test that equal streams give equal parameters."""
        a = init_params(MINI, np.random.default_rng(4))
        b = init_params(MINI, np.random.default_rng(4))
        for name in a.weights:
            np.testing.assert_array_equal(a.weights[name], b.weights[name])


class TestBuildInput(unittest.TestCase):
    """Unit tests for build_input and stack_samples."""

    def setUp(self):
        """A wrapped five-slot coarse window on a random measurement."""
        rng = np.random.default_rng(2)
        self.y = rng.standard_normal(256) + 1j * rng.standard_normal(256)
        self.coarse = CoarseResult(
            center_index=1,
            half_width=2,
            range_est=5.0,
            angle_est=-255 / 256,
            subspace=(255, 256, 1, 2, 3),
            objective=1.0,
            gain_est=1e-6,
        )

    def test_layout(self):
        """Test normalization, padding, mask and slot angles."""
        sample = build_input(self.y, self.coarse, 9)
        energies = np.abs(self.y[[254, 255, 0, 1, 2]]) ** 2
        np.testing.assert_allclose(sample.input[:5], energies / energies.max())
        self.assertEqual(float(sample.input.max()), 1.0)
        np.testing.assert_array_equal(sample.input[5:], 0.0)
        np.testing.assert_array_equal(sample.mask, [1, 1, 1, 1, 1, 0, 0, 0, 0])
        np.testing.assert_array_equal(sample.angles[:5], grid_angle(np.array([255, 256, 1, 2, 3]), 256))
        self.assertIsNone(sample.target_index)

    def test_zero_measurement(self):
        """Test that an all-zero window stays zero."""
        sample = build_input(np.zeros(256, dtype=complex), self.coarse, 9)
        np.testing.assert_array_equal(sample.input, 0.0)

    def test_window_too_long(self):
        """Test that a window longer than U raises DomainError."""
        with self.assertRaises(DomainError):
            build_input(self.y, self.coarse, 3)

    def test_stack(self):
        """Test batch shapes and the unlabelled target marker."""
        sample = build_input(self.y, self.coarse, 9)
        labelled = TrainSample(sample.input, sample.mask, sample.angles, target_index=2)
        x, mask, targets = stack_samples([sample, labelled])
        self.assertEqual(x.shape, (2, 1, 9))
        self.assertEqual(mask.shape, (2, 9))
        np.testing.assert_array_equal(targets, [-1, 2])


class TestForward(unittest.TestCase):
    """Unit tests for forward, predict and the angle read-outs."""

    def setUp(self):
        """Miniature network and a random batch."""
        self.rng = np.random.default_rng(5)
        self.params = init_params(MINI, self.rng)
        self.x, self.mask, self.targets = mini_batch(self.rng, 4)

    def test_probabilities(self):
        """Test that rows sum to one with zero mass on masked slots."""
        probs, _ = forward(self.params, self.x, self.mask)
        np.testing.assert_allclose(probs.sum(axis=1), 1.0, atol=1e-12)
        np.testing.assert_array_equal(probs[self.mask == 0], 0.0)

    def test_masked_values_ignored(self):
        """Test that input values in masked slots do not change the output."""
        probs, _ = forward(self.params, self.x, self.mask)
        noisy = self.x.copy()
        noisy[:, 0, :][self.mask == 0] = 123.0
        probs_noisy, _ = forward(self.params, noisy, self.mask)
        np.testing.assert_array_equal(probs, probs_noisy)

    def test_eval_is_deterministic(self):
        """Test that eval mode is a pure function of its inputs."""
        a, _ = forward(self.params, self.x, self.mask)
        b, _ = forward(self.params, self.x, self.mask)
        np.testing.assert_array_equal(a, b)

    def test_dropout_needs_stream(self):
        """Test that train mode with dropout requires a random stream."""
        params = init_params(NetworkSpec(window=9, branch_channels=(2, 4, 8)), self.rng)
        with self.assertRaises(DomainError):
            forward(params, self.x, self.mask, train=True)

    @parameterized.expand([("rank", (4, 9), (4, 9)), ("length", (4, 1, 8), (4, 8)), ("mask", (4, 1, 9), (3, 9))])
    def test_shape_domain(self, _name, x_shape, mask_shape):
        """Test that malformed batches raise DomainError."""
        with self.assertRaises(DomainError):
            forward(self.params, np.ones(x_shape), np.ones(mask_shape))

    def test_predict_matches_forward(self):
        """Test predict against a one-row forward pass."""
        sample = TrainSample(self.x[0, 0], self.mask[0], np.linspace(-0.1, 0.1, 9))
        probs, _ = forward(self.params, self.x[:1], self.mask[:1])
        np.testing.assert_array_equal(predict(self.params, sample), probs[0])

    def test_angle_readouts(self):
        """Test the weighted and argmax angle estimates."""
        angles = np.array([0.1, 0.2, 0.3, 0.0])
        sample = TrainSample(np.zeros(4), np.array([1.0, 1.0, 1.0, 0.0]), angles)
        probs = np.array([0.2, 0.5, 0.3, 0.0])
        self.assertAlmostEqual(refine_angle(probs, sample), 0.21)
        self.assertEqual(argmax_angle(probs, sample), 0.2)


class TestGoldenForward(unittest.TestCase):
    """Forward outputs with known values."""

    def test_hand_set_head(self):
        """Test exact probabilities when the head ignores the body."""
        rng = np.random.default_rng(30)
        spec = dataclasses.replace(MINI, bn_eps=0.0)
        params = init_params(spec, rng)
        params.weights["fc2_w"] = np.zeros_like(params.weights["fc2_w"])
        params.weights["fc2_b"] = np.ones_like(params.weights["fc2_b"])
        params.weights["fcbn2_gamma"] = np.ones_like(params.weights["fcbn2_gamma"])
        params.weights["fcbn2_beta"] = np.zeros_like(params.weights["fcbn2_beta"])
        params.buffers["fcbn2_mean"] = np.zeros_like(params.buffers["fcbn2_mean"])
        params.buffers["fcbn2_var"] = np.ones_like(params.buffers["fcbn2_var"])
        out_w = np.zeros_like(params.weights["out_w"])
        out_w[:, 0] = [0.0, 0.0, 0.0, 0.0, -1000.0, -1000.0, -1000.0, -1000.0, -1000.0]
        params.weights["out_w"] = out_w
        params.weights["out_b"] = np.zeros_like(params.weights["out_b"])
        x = rng.uniform(0.0, 1.0, (2, 1, 9))
        mask = np.ones((2, 9))
        mask[0, 6:] = 0.0
        mask[1, 2:] = 0.0
        probs, _ = forward(params, x, mask)
        np.testing.assert_array_equal(probs[0], [0.25, 0.25, 0.25, 0.25, 0.0, 0.0, 0.0, 0.0, 0.0])
        np.testing.assert_array_equal(probs[1], [0.5, 0.5, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])

    def test_seeded_forward_replays_across_processes(self):
        """Test that a fresh interpreter reproduces a seeded forward pass bit for bit."""
        env = {**os.environ, "PYTHONPATH": str(SRC_DIR)}
        result = subprocess.run(
            [sys.executable, "-c", REPLAY_SCRIPT], capture_output=True, text=True, env=env, check=True
        )
        rng = np.random.default_rng(31)
        params = init_params(MINI, rng)
        x = rng.uniform(0.0, 1.0, (3, 1, 9))
        mask = np.ones((3, 9))
        mask[1, 6:] = 0.0
        probs, _ = forward(params, x, mask)
        self.assertEqual(result.stdout, probs.tobytes().hex())


class TestLoss(unittest.TestCase):
    """Unit tests for loss."""

    def test_single(self):
        """Test −log₁₀ p̂ for one row."""
        self.assertAlmostEqual(loss(np.array([0.1, 0.9]), 1), -math.log10(0.9))

    def test_batch_mean(self):
        """Test the mean over rows."""
        probs = np.array([[0.5, 0.5], [0.01, 0.99]])
        self.assertAlmostEqual(loss(probs, np.array([0, 0])), (-math.log10(0.5) + 2.0) / 2)

    def test_masked_target(self):
        """Test that a zero-probability target raises DomainError."""
        with self.assertRaises(DomainError):
            loss(np.array([1.0, 0.0]), 1)


class TestGradients(unittest.TestCase):
    """Analytic gradients against central differences on the miniature network."""

    def check_all(self, params, x, mask, targets, train):
        """Compare every trainable tensor group."""
        probs, cache = forward(params, x, mask, train=train)
        analytic = gradients(params, cache, targets)
        self.assertEqual(set(analytic), set(params.weights))
        for name in params.weights:
            numeric, usable = numeric_gradient(params, x, mask, targets, name, train)
            a, n = analytic[name][usable], numeric[usable]
            scale = float(np.linalg.norm(a + n))
            diff = float(np.linalg.norm(a - n))
            if scale < 1e-6:
                self.assertLess(diff, 1e-8, msg=name)
            else:
                self.assertLessEqual(diff / scale, 1e-4, msg=name)

    def test_eval_mode(self):
        """Test gradients with running statistics."""
        rng = np.random.default_rng(21)
        params = init_params(MINI, rng)
        for name in params.buffers:
            if name.endswith("_mean"):
                params.buffers[name] = rng.normal(0.0, 0.1, params.buffers[name].shape)
            elif name.endswith("_var"):
                params.buffers[name] = rng.uniform(0.5, 2.0, params.buffers[name].shape)
        x, mask, targets = mini_batch(rng, 2)
        self.check_all(params, x, mask, targets, train=False)

    def test_train_mode(self):
        """Test gradients with batch statistics on a batch of three."""
        rng = np.random.default_rng(22)
        params = init_params(MINI, rng)
        x, mask, targets = mini_batch(rng, 3)
        self.check_all(params, x, mask, targets, train=True)

    def test_overfit_single_sample(self):
        """Test that Adam drives the loss of one sample below 1e-3 within 500 steps."""
        rng = np.random.default_rng(23)
        params = init_params(MINI, rng)
        x, mask, targets = mini_batch(rng, 1)
        state = AdamState()
        start = None
        for _ in range(500):
            probs, cache = forward(params, x, mask)
            start = loss(probs, targets) if start is None else start
            weights, state = adam_step(params.weights, gradients(params, cache, targets), state, 1e-2)
            params = NetworkParams(spec=MINI, weights=weights, buffers=params.buffers)
        final = loss(forward(params, x, mask)[0], targets)
        self.assertLess(final, 1e-3)
        self.assertLess(final, start)

    def test_running_stats(self):
        """Test that running buffers move toward the batch statistics."""
        rng = np.random.default_rng(24)
        params = init_params(MINI, rng)
        x, mask, _ = mini_batch(rng, 4)
        _, cache = forward(params, x, mask, train=True)
        updated = update_running_stats(params, cache)
        mean, var, count = cache.batch_stats["bn1"]
        np.testing.assert_allclose(updated.buffers["bn1_mean"], 0.1 * mean)
        np.testing.assert_allclose(updated.buffers["bn1_var"], 0.9 + 0.1 * var * count / (count - 1))
        np.testing.assert_array_equal(params.buffers["bn1_mean"], 0.0)


class TestWeightFile(unittest.TestCase):
    """Unit tests for save_weights and load_weights."""

    def setUp(self):
        """Temporary directory and a written weight file."""
        self.tmp = tempfile.TemporaryDirectory()
        self.path = Path(self.tmp.name) / "nested" / "weights.bin"
        self.params = init_params(MINI, np.random.default_rng(6))
        save_weights(self.params, self.path)

    def tearDown(self):
        """Remove the temporary directory."""
        self.tmp.cleanup()

    def test_creates_parent(self):
        """Test that missing parent directories are created."""
        self.assertTrue(self.path.exists())
        self.assertEqual(self.path.read_bytes()[:4], b"NFA1")

    def test_missing_file(self):
        """Test that a missing file raises WeightFileError."""
        with self.assertRaises(WeightFileError):
            load_weights(Path(self.tmp.name) / "absent.bin")

    def test_bad_magic(self):
        """Test that a foreign file raises WeightFileError."""
        self.path.write_bytes(b"GIF89a" + bytes(64))
        with self.assertRaises(WeightFileError):
            load_weights(self.path)

    def test_flipped_byte(self):
        """Test that a corrupted byte fails the checksum."""
        raw = bytearray(self.path.read_bytes())
        raw[40] ^= 0xFF
        self.path.write_bytes(bytes(raw))
        with self.assertRaisesRegex(WeightFileError, "Checksum"):
            load_weights(self.path)

    def test_truncated_body(self):
        """Test that a short body with a valid checksum is rejected."""
        body = self.path.read_bytes()[:-8][:-100]
        self.path.write_bytes(body + struct.pack("<Q", zlib.crc32(body)))
        with self.assertRaisesRegex(WeightFileError, "Truncated"):
            load_weights(self.path)


if __name__ == "__main__":
    unittest.main()
