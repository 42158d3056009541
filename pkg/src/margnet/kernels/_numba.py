# _numba.py
"""Jitted hot kernels: per-sample inner loops compiled with numba.

Signatures and float accumulation order match kernels._numpy exactly, so
outputs are bit-identical between the two backends. All randomness is drawn
by the caller and passed in as arrays; the kernels are pure functions.
"""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def ancestral_batch(parent_flat, parent_off, cpt_flat, cpt_off, u):
    m, n = u.shape
    samples = np.zeros((m, n), dtype=np.uint8)
    for j in range(m):
        for i in range(n):
            lo, hi = parent_off[i], parent_off[i + 1]
            pat = np.int64(0)
            for k in range(hi - lo):
                pat |= np.int64(samples[j, parent_flat[lo + k]]) << k
            samples[j, i] = np.uint8(1) if u[j, i] < cpt_flat[cpt_off[i] + pat] else np.uint8(0)
    return samples


@njit(cache=True)
def likelihood_weighting_batch(parent_flat, parent_off, cpt_flat, cpt_off,
                               logp1, logp0, obs_mask, obs_val, u):
    m, n = u.shape
    samples = np.zeros((m, n), dtype=np.uint8)
    logw = np.zeros(m, dtype=np.float64)
    for j in range(m):
        for i in range(n):
            lo, hi = parent_off[i], parent_off[i + 1]
            pat = np.int64(0)
            for k in range(hi - lo):
                pat |= np.int64(samples[j, parent_flat[lo + k]]) << k
            idx = cpt_off[i] + pat
            if obs_mask[i]:
                v = obs_val[i]
                samples[j, i] = v
                logw[j] += logp1[idx] if v else logp0[idx]
            else:
                samples[j, i] = np.uint8(1) if u[j, i] < cpt_flat[idx] else np.uint8(0)
    return samples, logw


@njit(cache=True)
def joint_logp_batch(parent_flat, parent_off, cpt_off, logp1, logp0, samples):
    m, n = samples.shape
    logp = np.zeros(m, dtype=np.float64)
    for j in range(m):
        for i in range(n):
            lo, hi = parent_off[i], parent_off[i + 1]
            pat = np.int64(0)
            for k in range(hi - lo):
                pat |= np.int64(samples[j, parent_flat[lo + k]]) << k
            idx = cpt_off[i] + pat
            logp[j] += logp1[idx] if samples[j, i] == 1 else logp0[idx]
    return logp


@njit(cache=True)
def mask_encode_batch(samples, keys, n_pos, n_neg):
    m, n = samples.shape
    enc = np.zeros((m, 2 * n), dtype=np.float64)
    idx1 = np.empty(n, dtype=np.int64)
    idx0 = np.empty(n, dtype=np.int64)
    key1 = np.empty(n, dtype=np.float64)
    key0 = np.empty(n, dtype=np.float64)
    for j in range(m):
        c1 = 0
        c0 = 0
        for i in range(n):
            if samples[j, i] == 1:
                idx1[c1] = i
                key1[c1] = keys[j, i]
                c1 += 1
            else:
                idx0[c0] = i
                key0[c0] = keys[j, i]
                c0 += 1
        hidden = np.zeros(n, dtype=np.uint8)
        order1 = np.argsort(key1[:c1], kind="mergesort")
        for t in range(min(n_pos[j], c1)):
            hidden[idx1[order1[t]]] = 1
        order0 = np.argsort(key0[:c0], kind="mergesort")
        for t in range(min(n_neg[j], c0)):
            hidden[idx0[order0[t]]] = 1
        for i in range(n):
            if hidden[i] == 0:
                enc[j, 2 * i + samples[j, i]] = 1.0
    return enc
