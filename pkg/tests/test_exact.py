import itertools
import math

import numpy as np
import pytest

from margnet.bn import BayesNet, Node, joint_log_prob
from margnet.encoding import encode
from margnet.exact import (ENUM_MAX_NODES, ExactConditionalProposal,
                           ImpossibleEvidenceError, NetworkTooLargeError,
                           enumerate_posterior)
from margnet.graphgen import GenSpec, generate


def brute_posterior(net, evidence):
    """Literal sum over all assignments via per-node log likelihoods."""
    n = net.n
    num = np.zeros(n)
    den = 0.0
    for bits in itertools.product((0, 1), repeat=n):
        x = np.array(bits, dtype=np.uint8)
        if any(x[i] != v for i, v in evidence.items()):
            continue
        p = math.exp(joint_log_prob(net, x))
        den += p
        num += p * x
    return num / den


def test_chain_posterior(chain2):
    post = enumerate_posterior(chain2, {1: 1})
    assert post[0] == pytest.approx(0.27 / 0.34, abs=1e-12)
    assert post[1] == 1.0


def test_prior_marginals(chain2):
    post = enumerate_posterior(chain2, {})
    assert post[0] == pytest.approx(0.3, abs=1e-12)
    assert post[1] == pytest.approx(0.34, abs=1e-12)


def test_matches_brute_force(vee):
    for evidence in ({}, {2: 1}, {0: 0, 2: 1}, {1: 1}):
        got = enumerate_posterior(vee, evidence)
        want = brute_posterior(vee, evidence)
        assert np.allclose(got, want, atol=1e-12)


def test_matches_brute_force_generated():
    net = generate(GenSpec(seed=3, layers=2, nodes_per_layer=4))
    for evidence in ({}, {0: 1}, {6: 1, 7: 0}, {1: 0, 4: 1}):
        got = enumerate_posterior(net, evidence)
        want = brute_posterior(net, evidence)
        assert np.allclose(got, want, atol=1e-10)


def test_observed_nodes_pinned(vee):
    post = enumerate_posterior(vee, {0: 0, 1: 1})
    assert post[0] == 0.0
    assert post[1] == 1.0


def test_size_guard():
    n = ENUM_MAX_NODES + 1
    nodes = [Node(i, f"r{i}", (), np.array([0.5])) for i in range(n)]
    with pytest.raises(NetworkTooLargeError):
        enumerate_posterior(BayesNet(nodes), {})


def test_impossible_evidence(deterministic_pair):
    with pytest.raises(ImpossibleEvidenceError):
        enumerate_posterior(deterministic_pair, {0: 1, 1: 0})


def test_conditional_proposal_matches_enumeration(vee):
    prop = ExactConditionalProposal(vee)
    enc = np.stack([
        encode({}, vee.n),
        encode({0: 1}, vee.n),
        encode({0: 1, 1: 0}, vee.n),
    ])
    out = prop(enc)
    assert np.allclose(out[0], enumerate_posterior(vee, {}), atol=1e-12)
    assert np.allclose(out[1], enumerate_posterior(vee, {0: 1}), atol=1e-12)
    assert np.allclose(out[2], enumerate_posterior(vee, {0: 1, 1: 0}), atol=1e-12)


def test_conditional_proposal_memoises(vee):
    prop = ExactConditionalProposal(vee)
    enc = np.stack([encode({0: 1}, vee.n)] * 5)
    prop(enc)
    assert len(prop._cache) == 1
