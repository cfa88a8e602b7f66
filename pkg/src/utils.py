"""
Utility functions shared by the simulator modules.
--------------------------------------------------

Classes:
    - FlopCounter: Tally of elementary floating-point operations.

Functions:
    - dbm_to_mw: Convert a power in dBm to linear milliwatts.
    - mw_to_dbm: Convert a power in linear milliwatts to dBm.
    - trial_rng: Build the random stream for one (seed, trial, tag) triple.
    - worker_count: Number of worker threads allowed by the environment.
"""

import os
import zlib
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

THREADS_ENV = "NFA_THREADS"


def dbm_to_mw(dbm: float) -> float:
    """Convert a power in dBm to linear milliwatts.

    Args:
        dbm (float): Power in dBm.

    Returns:
        float: Power in mW.
    """
    return float(10 ** (dbm / 10))


def mw_to_dbm(mw: float) -> float:
    """Convert a power in linear milliwatts to dBm.

    Args:
        mw (float): Power in mW, must be positive.

    Returns:
        float: Power in dBm.
    """
    if mw <= 0:
        raise ValueError(f"Power must be positive, got {mw}")
    return float(10 * np.log10(mw))


@dataclass
class FlopCounter:
    """Tally of elementary floating-point operations.

    Each add, multiply, divide, sqrt, min, max or abs counts as one operation.
    Counts are grouped under a label so reports can break a total down.
    """

    counts: dict[str, int] = field(default_factory=dict)

    def add(self, label: str, n: int = 1) -> None:
        self.counts[label] = self.counts.get(label, 0) + int(n)

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def trial_rng(seed: int, trial: int, tag: str) -> np.random.Generator:
    """Build the random stream for one (seed, trial, tag) triple.

    Streams are counter-based so any trial can be replayed on its own and in
    any order. The tag is hashed with CRC-32 to keep streams stable across
    interpreter runs.

    Args:
        seed (int): Master seed.
        trial (int): Trial index.
        tag (str): Stream name, e.g. "ue" or "dft@10.0".

    Returns:
        np.random.Generator: Independent generator for the triple.
    """
    key = np.random.SeedSequence([int(seed), int(trial), zlib.crc32(tag.encode("utf-8"))])
    return np.random.Generator(np.random.Philox(key))


def worker_count(default: Optional[int] = None) -> int:
    """Number of worker threads allowed by the environment.

    Args:
        default (Optional[int]): Fallback when NFA_THREADS is unset; defaults to the CPU count.

    Returns:
        int: A positive worker count.
    """
    fallback = default if default is not None else (os.cpu_count() or 1)
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return max(1, fallback)
    try:
        return max(1, int(raw))
    except ValueError:
        return max(1, fallback)
