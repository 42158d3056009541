# _numpy.py
"""Pure-numpy reference implementations of the hot kernels.

Loops run over nodes with vector operations over the sample axis, in the
same per-sample accumulation order as the jitted versions, so both backends
produce bit-identical outputs for identical inputs.
"""
from __future__ import annotations

import numpy as np


def node_patterns(parent_flat, parent_off, samples, i):
    """Parent-configuration bitmasks of node i for every sample row."""
    lo, hi = parent_off[i], parent_off[i + 1]
    pat = np.zeros(samples.shape[0], dtype=np.int64)
    for k in range(hi - lo):
        pat |= samples[:, parent_flat[lo + k]].astype(np.int64) << k
    return pat


def ancestral_batch(parent_flat, parent_off, cpt_flat, cpt_off, u):
    m, n = u.shape
    samples = np.zeros((m, n), dtype=np.uint8)
    for i in range(n):
        pat = node_patterns(parent_flat, parent_off, samples, i)
        p = cpt_flat[cpt_off[i] + pat]
        samples[:, i] = u[:, i] < p
    return samples


def likelihood_weighting_batch(parent_flat, parent_off, cpt_flat, cpt_off,
                               logp1, logp0, obs_mask, obs_val, u):
    m, n = u.shape
    samples = np.zeros((m, n), dtype=np.uint8)
    logw = np.zeros(m, dtype=np.float64)
    for i in range(n):
        pat = node_patterns(parent_flat, parent_off, samples, i)
        idx = cpt_off[i] + pat
        if obs_mask[i]:
            v = obs_val[i]
            samples[:, i] = v
            logw += logp1[idx] if v else logp0[idx]
        else:
            samples[:, i] = u[:, i] < cpt_flat[idx]
    return samples, logw


def joint_logp_batch(parent_flat, parent_off, cpt_off, logp1, logp0, samples):
    m, n = samples.shape
    logp = np.zeros(m, dtype=np.float64)
    for i in range(n):
        pat = node_patterns(parent_flat, parent_off, samples, i)
        idx = cpt_off[i] + pat
        logp += np.where(samples[:, i] == 1, logp1[idx], logp0[idx])
    return logp


def mask_encode_batch(samples, keys, n_pos, n_neg):
    """Hide n_pos[j] value-1 nodes and n_neg[j] value-0 nodes per row.

    Victims are the nodes with the smallest keys within each value class
    (keys i.i.d. uniform => uniform choice without replacement). Counts
    truncate automatically when fewer candidates exist. Returns the
    two-slots-per-node encoding of the surviving observations.
    """
    m, n = samples.shape
    ones = samples == 1
    key1 = np.where(ones, keys, np.inf)
    key0 = np.where(ones, np.inf, keys)
    rank1 = np.argsort(np.argsort(key1, axis=1, kind="mergesort"), axis=1, kind="mergesort")
    rank0 = np.argsort(np.argsort(key0, axis=1, kind="mergesort"), axis=1, kind="mergesort")
    hide = (ones & (rank1 < n_pos[:, None])) | (~ones & (rank0 < n_neg[:, None]))
    enc = np.zeros((m, 2 * n), dtype=np.float64)
    enc[:, 1::2] = ones & ~hide
    enc[:, 0::2] = ~ones & ~hide
    return enc
