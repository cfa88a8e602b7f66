"""
Training of the fine-alignment network.
---------------------------------------

Classes:
    - NumericalAbort: Raised when training diverges.
    - AdamState: First and second moment estimates of Adam.
    - Dataset: Generated samples with the discard statistics.
    - EpochLog: Losses and learning rate of one epoch.
    - TrainingResult: Best parameters and the loss history.

Functions:
    - adam_step: One Adam update.
    - cosine_lr: Cosine-annealed learning rate.
    - generate_dataset: Simulate labelled samples through the coarse stage.
    - train: Mini-batch training with early stopping.
"""

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from channel import channel, measure, nearest_grid_index, sample_ue
from coarse import coarse_align, default_gamma, max_window_length
from config import SimConfig
from finenet import (
    NetworkParams,
    NetworkSpec,
    TrainSample,
    build_input,
    forward,
    gradients,
    init_params,
    loss,
    stack_samples,
    update_running_stats,
)
from numerics import DomainError
from utils import dbm_to_mw, trial_rng

BETA1 = 0.9
BETA2 = 0.999
ADAM_EPS = 1e-8
MAX_ATTEMPT_FACTOR = 50


class NumericalAbort(RuntimeError):
    """Raised when a loss or weight becomes non-finite."""

    pass


@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


@dataclass(frozen=True)
class Dataset:
    samples: list[TrainSample]
    attempts: int

    @property
    def discarded(self) -> int:
        return self.attempts - len(self.samples)

    @property
    def discard_rate(self) -> float:
        return self.discarded / self.attempts if self.attempts else 0.0


@dataclass(frozen=True)
class EpochLog:
    epoch: int
    lr: float
    train_loss: float
    val_loss: float


@dataclass
class TrainingResult:
    params: NetworkParams
    history: list[EpochLog]
    best_epoch: int


def adam_step(
    weights: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> tuple[dict[str, np.ndarray], AdamState]:
    """One bias-corrected Adam update.

    Args:
        weights (dict[str, np.ndarray]): Current trainable tensors.
        grads (dict[str, np.ndarray]): Gradient per tensor.
        state (AdamState): Moments from the previous step.
        lr (float): Learning rate.

    Returns:
        tuple[dict[str, np.ndarray], AdamState]: Updated tensors and moments.
    """
    t = state.step + 1
    new_weights: dict[str, np.ndarray] = {}
    m_next: dict[str, np.ndarray] = {}
    v_next: dict[str, np.ndarray] = {}
    for name, value in weights.items():
        g = grads[name]
        m = BETA1 * state.m.get(name, np.zeros_like(value)) + (1 - BETA1) * g
        v = BETA2 * state.v.get(name, np.zeros_like(value)) + (1 - BETA2) * g * g
        m_hat = m / (1 - BETA1**t)
        v_hat = v / (1 - BETA2**t)
        new_weights[name] = value - lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        m_next[name], v_next[name] = m, v
    return new_weights, AdamState(step=t, m=m_next, v=v_next)


def cosine_lr(base_lr: float, epoch: int, epochs: int) -> float:
    """Learning rate at a 0-based epoch, annealed from base_lr toward 0."""
    return 0.5 * base_lr * (1 + math.cos(math.pi * epoch / epochs))


def generate_dataset(
    cfg: SimConfig,
    n_samples: int,
    seed: int,
    power_range_dbm: Optional[tuple[float, float]] = None,
    noiseless: bool = False,
) -> Dataset:
    """Simulate labelled samples through the coarse stage.

    Each attempt draws a UE and a transmit power uniform in dBm, measures with
    the DFT codebook and runs coarse alignment. The label is the slot of the
    DFT index nearest the UE angle; attempts whose window misses it are
    discarded.

    Args:
        cfg (SimConfig): Simulation configuration.
        n_samples (int): Samples to keep.
        seed (int): Seed for the attempt streams.
        power_range_dbm (Optional[tuple[float, float]]): Power range; defaults to the sweep bounds.
        noiseless (bool): Measure without noise.

    Returns:
        Dataset: The samples and the number of attempts made.

    Raises:
        NumericalAbort: If too many attempts are discarded.
    """
    array = cfg.array
    window = max_window_length(array, cfg.epsilon)
    if power_range_dbm is None:
        sweep = cfg.p_t_dbm or [0.0]
        power_range_dbm = (min(sweep), max(sweep))
    sigma2 = 0.0 if noiseless else array.noise_power_mw

    samples: list[TrainSample] = []
    attempts = 0
    while len(samples) < n_samples:
        if attempts >= MAX_ATTEMPT_FACTOR * n_samples:
            raise NumericalAbort(f"Discarded {attempts - len(samples)} of {attempts} attempts; coarse stage is failing")
        rng = trial_rng(seed, attempts, "train")
        attempts += 1
        ue = sample_ue(array, cfg.phi_max, rng)
        p_t = dbm_to_mw(float(rng.uniform(*power_range_dbm)))
        y = measure(channel(ue, array), p_t, sigma2, rng)
        coarse = coarse_align(
            y, p_t, array, cfg.epsilon, default_gamma(p_t, cfg.gamma_exponent), sigma2_mw=sigma2
        )
        zeta = nearest_grid_index(ue.theta, array.n_antennas)
        if zeta not in coarse.subspace:
            continue
        sample = build_input(y, coarse, window)
        samples.append(
            TrainSample(
                input=sample.input,
                mask=sample.mask,
                angles=sample.angles,
                target_index=coarse.subspace.index(zeta),
            )
        )
    return Dataset(samples=samples, attempts=attempts)


def _batch_loss(params: NetworkParams, samples: list[TrainSample]) -> float:
    x, mask, targets = stack_samples(samples)
    probs, _ = forward(params, x, mask, train=False)
    try:
        return loss(probs, targets)
    except DomainError:
        return math.inf


def train(
    samples: list[TrainSample],
    cfg: SimConfig,
    spec: Optional[NetworkSpec] = None,
    seed: Optional[int] = None,
    on_epoch: Optional[Callable[[EpochLog], None]] = None,
) -> TrainingResult:
    """Train the network with Adam, cosine annealing and early stopping.

    A fixed share of the samples is held out for validation. The returned
    parameters are those of the epoch with the lowest validation loss.

    Args:
        samples (list[TrainSample]): Labelled samples, at least two.
        cfg (SimConfig): Supplies learning rate, epochs, patience, batch size and
            validation fraction.
        spec (Optional[NetworkSpec]): Architecture; defaults to the window length of cfg.
        seed (Optional[int]): Seed for initialization, shuffling and dropout; defaults to cfg.seed.
        on_epoch (Optional[Callable[[EpochLog], None]]): Called after every epoch.

    Returns:
        TrainingResult: Best parameters and per-epoch losses.

    Raises:
        NumericalAbort: On a non-finite loss or weight.
    """
    if len(samples) < 2:
        raise DomainError("Training needs at least two samples")
    seed = cfg.seed if seed is None else seed
    spec = spec or NetworkSpec(window=samples[0].input.shape[0])
    rng = trial_rng(seed, 0, "init")
    params = init_params(spec, rng)

    order = trial_rng(seed, 0, "split").permutation(len(samples))
    n_val = min(max(1, int(round(cfg.train_val_fraction * len(samples)))), len(samples) - 1)
    val = [samples[i] for i in order[:n_val]]
    fit = [samples[i] for i in order[n_val:]]

    state = AdamState()
    best = params.copy()
    best_loss = math.inf
    best_epoch = -1
    history: list[EpochLog] = []
    stale = 0

    for epoch in range(cfg.train_epochs):
        lr = cosine_lr(cfg.train_lr, epoch, cfg.train_epochs)
        epoch_rng = trial_rng(seed, epoch + 1, "epoch")
        perm = epoch_rng.permutation(len(fit))
        losses = []
        for start in range(0, len(fit), cfg.train_batch):
            batch = [fit[i] for i in perm[start : start + cfg.train_batch]]
            x, mask, targets = stack_samples(batch)
            probs, cache = forward(params, x, mask, train=True, rng=epoch_rng)
            try:
                batch_loss = loss(probs, targets)
            except DomainError as exc:
                raise NumericalAbort(f"Epoch {epoch}: {exc}") from exc
            if not math.isfinite(batch_loss):
                raise NumericalAbort(f"Epoch {epoch}: loss became {batch_loss}")
            weights, state = adam_step(params.weights, gradients(params, cache, targets), state, lr)
            if not all(np.all(np.isfinite(w)) for w in weights.values()):
                raise NumericalAbort(f"Epoch {epoch}: non-finite weights after update")
            params = update_running_stats(
                NetworkParams(spec=spec, weights=weights, buffers=params.buffers), cache
            )
            losses.append(batch_loss * len(batch))

        log = EpochLog(
            epoch=epoch,
            lr=lr,
            train_loss=float(sum(losses) / len(fit)),
            val_loss=_batch_loss(params, val),
        )
        history.append(log)
        if on_epoch is not None:
            on_epoch(log)

        if log.val_loss < best_loss:
            best, best_loss, best_epoch, stale = params.copy(), log.val_loss, epoch, 0
        else:
            stale += 1
            if stale >= cfg.train_patience:
                break

    if best_epoch < 0:
        raise NumericalAbort("Validation loss never became finite")
    return TrainingResult(params=best, history=history, best_epoch=best_epoch)
