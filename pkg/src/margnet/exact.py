# exact.py
"""Ground-truth posterior marginals by exhaustive enumeration.

This is the oracle the sampling engines are tested against, so it shares no
code with them: joint probabilities are accumulated in linear space with its
own CPT lookups rather than through the log-space kernels.

Cost is 2^(N - |evidence|) completions; a hard guard rejects N > 24.
"""
from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .bn import BayesNet, BNError, check_evidence

ENUM_MAX_NODES = 24
_CHUNK = 1 << 16


class NetworkTooLargeError(BNError):
    pass


class ImpossibleEvidenceError(BNError):
    """The evidence has prior probability zero."""


def enumerate_posterior(net: BayesNet, evidence: Mapping[int, bool]) -> np.ndarray:
    """Exact P(X_i = 1 | evidence) for every node.

    Observed nodes report their observed value as probability 0 or 1.
    """
    net.compiled  # force validation
    n = net.n
    if n > ENUM_MAX_NODES:
        raise NetworkTooLargeError(f"{n} nodes > enumeration limit {ENUM_MAX_NODES}")
    ev = check_evidence(evidence, n)
    free = np.asarray([i for i in range(n) if i not in ev], dtype=np.int64)
    k = free.size

    base = np.zeros(n, dtype=np.uint8)
    for i, val in ev.items():
        base[i] = 1 if val else 0

    total = 0.0
    ones_mass = np.zeros(n, dtype=np.float64)
    for start in range(0, 1 << k, _CHUNK):
        stop = min(start + _CHUNK, 1 << k)
        codes = np.arange(start, stop, dtype=np.int64)
        block = np.broadcast_to(base, (codes.size, n)).copy()
        for b in range(k):
            block[:, free[b]] = (codes >> b) & 1
        prob = _joint_prob_rows(net, block)
        total += float(prob.sum())
        ones_mass += prob @ block
    if total == 0.0:
        raise ImpossibleEvidenceError("evidence has prior probability 0")
    marg = ones_mass / total
    for i, val in ev.items():
        marg[i] = 1.0 if val else 0.0
    return marg


def _joint_prob_rows(net: BayesNet, block: np.ndarray) -> np.ndarray:
    prob = np.ones(block.shape[0], dtype=np.float64)
    for i, node in enumerate(net.nodes):
        pat = np.zeros(block.shape[0], dtype=np.int64)
        for b, p in enumerate(node.parents):
            pat |= block[:, p].astype(np.int64) << b
        p1 = node.cpt[pat]
        prob *= np.where(block[:, i] == 1, p1, 1.0 - p1)
    return prob


class ExactConditionalProposal:
    """Per-node exact conditionals, usable as a sequential-IS proposal.

    Maps a batch of evidence encodings (evidence plus already-drawn values)
    to the exact marginal vector given that partial assignment. Results are
    memoised on the encoded state, which keeps repeated prefixes cheap on
    small graphs.
    """

    def __init__(self, net: BayesNet):
        self.net = net
        self._cache: dict[bytes, np.ndarray] = {}

    def __call__(self, enc: np.ndarray) -> np.ndarray:
        out = np.empty((enc.shape[0], self.net.n), dtype=np.float64)
        for j in range(enc.shape[0]):
            key = enc[j].tobytes()
            hit = self._cache.get(key)
            if hit is None:
                hit = enumerate_posterior(self.net, _decode_states(enc[j]))
                self._cache[key] = hit
            out[j] = hit
        return out


def _decode_states(enc_row: np.ndarray) -> dict[int, bool]:
    states: dict[int, bool] = {}
    for i in range(enc_row.size // 2):
        if enc_row[2 * i + 1] == 1.0:
            states[i] = True
        elif enc_row[2 * i] == 1.0:
            states[i] = False
    return states
