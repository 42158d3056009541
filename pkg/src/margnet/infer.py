# infer.py
"""Importance-sampling engines over binary networks.

Four methods share one result shape:

  prior     likelihood weighting (ancestral draws from the prior, weights
            from the evidence likelihood)
  um        single eval-mode network pass, no sampling
  um-naive  every unobserved node drawn independently from the network's
            marginal-given-evidence vector
  um-seq    sequential proposal: nodes visited in topological order, each
            drawn from a beta-mixture of the network's conditional estimate
            and the node's CPT row given already-drawn parents

Weights live in log space end to end; normalizers and effective sample
sizes subtract the max log-weight before exponentiating. Proposal
probabilities are floored away from 0 and 1 so the proposal always covers
the target's support.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bn import BayesNet, check_evidence
from .encoding import encode
from .kernels import joint_logp_batch, likelihood_weighting_batch
from .net import NetParams, predict_marginals

PROB_FLOOR = 1e-6
LW_CHUNK = 8192
SEQ_CHUNK = 1024

METHODS = ("prior", "um", "um-naive", "um-seq")


class ZeroWeightError(RuntimeError):
    """Every sample had zero weight; the evidence has no mass under the
    proposal (or under the network itself)."""


@dataclass
class WeightedSampleSet:
    """Samples, log-weights, and the metadata needed to report them."""
    samples: np.ndarray    # uint8 (m, n)
    logw: np.ndarray       # float64 (m,)
    method: str
    seed: int | None = None
    beta: float | None = None
    floor: float | None = None

    @property
    def m(self) -> int:
        return int(self.logw.shape[0])


@dataclass
class InferenceResult:
    method: str
    marginals: np.ndarray  # float64 (n,)
    m: int
    ess: float | None
    beta: float | None
    seed: int | None
    floor: float | None

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "beta": self.beta,
            "m": self.m,
            "ess": self.ess,
            "marginals": [float(p) for p in self.marginals],
            "seed": self.seed,
            "floor": self.floor,
        }


def ess(weights) -> float:
    """(sum w)^2 / sum w^2 from log-weights, clamped to [1, m].

    Computed through deviations from the max weight: with w = 1 + e,
    e = expm1(logw - max), the ratio rewrites exactly as

        m + (S1^2 - m*S2) / (m + 2*S1 + S2),  S1 = sum(e), S2 = sum(e^2).

    With exact summation this pins both boundary cases to their true
    values: near-uniform weights give exactly m, a single surviving weight
    gives exactly 1.
    """
    logw = weights.logw if isinstance(weights, WeightedSampleSet) else np.asarray(weights)
    if logw.size == 0:
        raise ValueError("empty weight vector")
    top = np.max(logw)
    if not np.isfinite(top):
        raise ValueError("no finite log-weight")
    m = float(logw.size)
    e = np.expm1(logw - top)
    s1 = math.fsum(e)
    s2 = math.fsum(e * e)
    val = m + (s1 * s1 - m * s2) / (m + 2.0 * s1 + s2)
    return float(min(max(val, 1.0), m))


def estimate_marginals(weights: WeightedSampleSet, evidence: dict[int, int]) -> InferenceResult:
    """Self-normalized per-node estimate, observed nodes forced to their
    evidence bits."""
    logw = weights.logw
    top = np.max(logw)
    if not np.isfinite(top):
        raise ZeroWeightError("all sample weights are zero; evidence has no "
                              "mass under the proposal")
    w = np.exp(logw - top)
    total = w.sum()
    marg = (w @ weights.samples.astype(np.float64)) / total
    for i, v in evidence.items():
        marg[i] = float(v)
    return InferenceResult(
        method=weights.method,
        marginals=marg,
        m=weights.m,
        ess=ess(weights),
        beta=weights.beta,
        seed=weights.seed,
        floor=weights.floor,
    )


def _evidence_arrays(net: BayesNet, evidence: dict[int, int]) -> tuple[np.ndarray, np.ndarray]:
    check_evidence(evidence, net.n)
    obs_mask = np.zeros(net.n, dtype=np.bool_)
    obs_val = np.zeros(net.n, dtype=np.uint8)
    for i, v in evidence.items():
        obs_mask[i] = True
        obs_val[i] = int(v)
    return obs_mask, obs_val


def likelihood_weighting(net: BayesNet, evidence: dict[int, int], m: int,
                         rng: np.random.Generator, seed: int | None = None,
                         chunk: int = LW_CHUNK) -> WeightedSampleSet:
    """Prior-proposal importance sampling: unobserved nodes follow their
    CPTs, observed nodes are pinned, and each sample's log-weight is the sum
    of the observed nodes' conditional log-probabilities."""
    c = net.compiled
    obs_mask, obs_val = _evidence_arrays(net, evidence)
    samples = np.empty((m, net.n), dtype=np.uint8)
    logw = np.empty(m, dtype=np.float64)
    done = 0
    while done < m:
        b = min(chunk, m - done)
        u = rng.random((b, net.n))
        s, lw = likelihood_weighting_batch(
            c.parent_flat, c.parent_off, c.cpt_flat, c.cpt_off,
            c.logp1, c.logp0, obs_mask, obs_val, u)
        samples[done:done + b] = s
        logw[done:done + b] = lw
        done += b
    return WeightedSampleSet(samples, logw, "prior", seed=seed)


def um_direct(net: BayesNet, params: NetParams, evidence: dict[int, int]) -> InferenceResult:
    """One eval-mode pass; marginal estimates for unobserved nodes, evidence
    bits for observed ones. No sampling, so ess is not applicable."""
    check_evidence(evidence, net.n)
    enc = encode(evidence, net.n)
    marg = predict_marginals(params, enc)[0].copy()
    for i, v in evidence.items():
        marg[i] = float(v)
    return InferenceResult("um", marg, m=0, ess=None, beta=None, seed=None, floor=None)


def naive_is_from_marginals(net: BayesNet, evidence: dict[int, int],
                            proposal_marginals: np.ndarray, m: int,
                            rng: np.random.Generator, seed: int | None = None,
                            floor: float = PROB_FLOOR,
                            method: str = "um-naive") -> WeightedSampleSet:
    """Independent proposal: every unobserved node i drawn from the fixed
    probability proposal_marginals[i] (floored), observed nodes pinned.
    log w = log P(x) - sum_i log Q_i(x_i) over unobserved i."""
    c = net.compiled
    obs_mask, obs_val = _evidence_arrays(net, evidence)
    q = np.clip(np.asarray(proposal_marginals, dtype=np.float64), floor, 1.0 - floor)
    u = rng.random((m, net.n))
    samples = np.where(obs_mask[None, :], obs_val[None, :],
                       (u < q[None, :]).astype(np.uint8)).astype(np.uint8)
    logp = joint_logp_batch(c.parent_flat, c.parent_off, c.cpt_off,
                            c.logp1, c.logp0, samples)
    logq_node = np.where(samples == 1, np.log(q)[None, :], np.log1p(-q)[None, :])
    logq = np.where(obs_mask[None, :], 0.0, logq_node).sum(axis=1)
    return WeightedSampleSet(samples, logp - logq, method, seed=seed,
                             beta=None, floor=floor)


def naive_um_is(net: BayesNet, params: NetParams, evidence: dict[int, int],
                m: int, rng: np.random.Generator, seed: int | None = None,
                floor: float = PROB_FLOOR) -> WeightedSampleSet:
    """Independent proposal taken from one network evaluation of the
    evidence."""
    check_evidence(evidence, net.n)
    enc = encode(evidence, net.n)
    marg = predict_marginals(params, enc)[0]
    return naive_is_from_marginals(net, evidence, marg, m, rng, seed=seed,
                                   floor=floor)


def sequential_is(net: BayesNet, evidence: dict[int, int], m: int,
                  rng: np.random.Generator, proposal_fn, beta: float,
                  seed: int | None = None, floor: float = PROB_FLOOR,
                  chunk: int = SEQ_CHUNK,
                  method: str = "um-seq") -> WeightedSampleSet:
    """Sequential importance sampling with a re-evaluated proposal.

    Nodes are visited in topological order. At each unobserved node the
    proposal_fn sees the running encoding (evidence plus everything drawn so
    far for that sample) and returns per-node probabilities; node i's entry
    is mixed with the CPT conditional given the already-drawn parents:

        q_i = (1 - beta) * proposal_i + beta * cpt_i,  clamped by the floor.

    Observed nodes contribute their conditional log-probability to the
    weight with proposal mass 1. With beta=1 the proposal_fn is never
    consulted and the sampler reduces to likelihood weighting.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    if beta < 1.0 and proposal_fn is None:
        raise ValueError("beta < 1 needs a proposal function")
    c = net.compiled
    n = net.n
    obs_mask, obs_val = _evidence_arrays(net, evidence)
    obs_enc = encode(evidence, n)

    samples = np.empty((m, n), dtype=np.uint8)
    logw = np.empty(m, dtype=np.float64)
    done = 0
    while done < m:
        b = min(chunk, m - done)
        u = rng.random((b, n))
        enc = np.tile(obs_enc, (b, 1))
        s = np.empty((b, n), dtype=np.uint8)
        lw = np.zeros(b, dtype=np.float64)
        rows = np.arange(b)
        for i in range(n):
            # CPT conditional given this sample's drawn parents
            pat = np.zeros(b, dtype=np.int64)
            for k in range(c.parent_off[i], c.parent_off[i + 1]):
                pat |= s[:, c.parent_flat[k]].astype(np.int64) << (k - c.parent_off[i])
            slot = c.cpt_off[i] + pat
            if obs_mask[i]:
                x = np.full(b, obs_val[i], dtype=np.uint8)
                lw += np.where(x == 1, c.logp1[slot], c.logp0[slot])
            else:
                if beta == 1.0:
                    q = np.clip(c.cpt_flat[slot], floor, 1.0 - floor)
                else:
                    q_net = proposal_fn(enc)[:, i]
                    q = np.clip((1.0 - beta) * q_net + beta * c.cpt_flat[slot],
                                floor, 1.0 - floor)
                x = (u[:, i] < q).astype(np.uint8)
                # single accumulation per node keeps the beta=1 case an
                # exact zero-add, matching likelihood weighting bit for bit
                logp_x = np.where(x == 1, c.logp1[slot], c.logp0[slot])
                logq_x = np.where(x == 1, np.log(q), np.log1p(-q))
                lw += logp_x - logq_x
                enc[rows, 2 * i + x.astype(np.intp)] = 1.0
            s[:, i] = x
        samples[done:done + b] = s
        logw[done:done + b] = lw
        done += b
    return WeightedSampleSet(samples, logw, method, seed=seed, beta=beta,
                             floor=floor)


def sequential_um_is(net: BayesNet, params: NetParams | None,
                     evidence: dict[int, int], m: int,
                     rng: np.random.Generator, beta: float = 0.0,
                     seed: int | None = None, floor: float = PROB_FLOOR,
                     chunk: int = SEQ_CHUNK) -> WeightedSampleSet:
    """Sequential sampler with the trained network as proposal. With beta=1
    the network is never evaluated and params may be None."""
    if beta < 1.0:
        if params is None:
            raise ValueError("beta < 1 needs trained parameters")
        fn = lambda enc: predict_marginals(params, enc)
    else:
        fn = None
    return sequential_is(net, evidence, m, rng, fn, beta, seed=seed,
                         floor=floor, chunk=chunk)


def run_method(net: BayesNet, params: NetParams | None, method: str,
               evidence: dict[int, int], m: int, seed: int,
               beta: float = 0.0, floor: float = PROB_FLOOR) -> InferenceResult:
    """Uniform entry point used by the CLI and the service."""
    from .net import make_rng
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if method == "um":
        if params is None:
            raise ValueError("method 'um' needs trained parameters")
        return um_direct(net, params, evidence)
    if m < 1:
        raise ValueError("m must be >= 1 for sampling methods")
    rng = make_rng(seed)
    if method == "prior":
        ws = likelihood_weighting(net, evidence, m, rng, seed=seed)
    elif method == "um-naive":
        if params is None:
            raise ValueError("method 'um-naive' needs trained parameters")
        ws = naive_um_is(net, params, evidence, m, rng, seed=seed, floor=floor)
    else:
        ws = sequential_um_is(net, params, evidence, m, rng, beta=beta,
                              seed=seed, floor=floor)
    return estimate_marginals(ws, evidence)
