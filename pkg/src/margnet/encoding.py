# encoding.py
"""Two-slot evidence encoding and the random masking of prior samples.

Each node owns a slot pair (negative, positive) at positions (2i, 2i+1):
observed-false -> (1, 0), observed-true -> (0, 1), unobserved or masked ->
(0, 0). Masked training inputs reuse the unobserved code so the network
sees the same representation at train and test time.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .bn import check_evidence
from .kernels import mask_encode_batch


def encode(evidence: Mapping[int, bool], n: int) -> np.ndarray:
    """Encode an evidence mapping into a length-2n float vector."""
    ev = check_evidence(evidence, n)
    enc = np.zeros(2 * n, dtype=np.float64)
    for i, val in ev.items():
        enc[2 * i + (1 if val else 0)] = 1.0
    return enc


def decode(enc: np.ndarray) -> dict[int, bool]:
    """Inverse of :func:`encode` for the observed slots."""
    states: dict[int, bool] = {}
    for i in range(enc.size // 2):
        if enc[2 * i + 1] == 1.0:
            states[i] = True
        elif enc[2 * i] == 1.0:
            states[i] = False
    return states


@dataclass(frozen=True)
class TrainingPair:
    input: np.ndarray    # (2n,) masked encoding
    target: np.ndarray   # (n,) the unmasked sample


def mask_sample(sample: np.ndarray, rng: np.random.Generator) -> TrainingPair:
    """Hide a random portion of one complete sample.

    Draws i, j uniform on {0..N} and hides min(i, #ones) value-1 nodes and
    min(j, #zeros) value-0 nodes, chosen uniformly without replacement, so
    the visible positive/negative ratio differs from call to call. Unmasked
    nodes become observed evidence at their sampled value.
    """
    enc = mask_samples(sample[None, :], rng)[0]
    return TrainingPair(enc, sample.copy())


def mask_samples(samples: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Batch masking: one independent (i, j) draw per row."""
    m, n = samples.shape
    n_pos = rng.integers(0, n + 1, size=m)
    n_neg = rng.integers(0, n + 1, size=m)
    keys = rng.random((m, n))
    return mask_encode_batch(np.ascontiguousarray(samples, dtype=np.uint8),
                             keys, n_pos, n_neg)
