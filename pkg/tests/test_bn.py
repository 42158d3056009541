import json
import math

import numpy as np
import pytest

from margnet.bn import (BayesNet, BNError, InvalidNetworkError, Node,
                        assign_depth_types, check_evidence, joint_log_prob,
                        load_network, node_log_likelihood, parent_pattern,
                        save_network, to_json_dict, ancestral_samples)
from margnet.net import make_rng


def kinds(net):
    return sorted({v.kind for v in net.validate().violations})


def test_valid_chain_passes(chain2):
    assert chain2.validate().ok
    assert chain2.n == 2


def test_cycle_detected():
    net = BayesNet([
        Node(0, "a", (1,), np.array([0.5, 0.5])),
        Node(1, "b", (0,), np.array([0.5, 0.5])),
    ])
    assert "cycle" in kinds(net)


def test_node_order_violation():
    net = BayesNet([
        Node(0, "a", (1,), np.array([0.5, 0.5])),
        Node(1, "b", (), np.array([0.5])),
    ])
    assert "node-order" in kinds(net)
    assert "cycle" not in kinds(net)


def test_dangling_parent():
    net = BayesNet([Node(0, "a", (7,), np.array([0.5, 0.5]))])
    assert "dangling-parent" in kinds(net)


def test_duplicate_parent():
    net = BayesNet([
        Node(0, "a", (), np.array([0.5])),
        Node(1, "b", (0, 0), np.array([0.1, 0.2, 0.3, 0.4])),
    ])
    assert "duplicate-parent" in kinds(net)


def test_cpt_length_violation():
    net = BayesNet([Node(0, "a", (), np.array([0.5, 0.5]))])
    assert "cpt-length" in kinds(net)


def test_probability_range_violation():
    net = BayesNet([Node(0, "a", (), np.array([1.5]))])
    assert "probability-range" in kinds(net)


def test_duplicate_id_violation():
    net = BayesNet([
        Node(0, "a", (), np.array([0.5])),
        Node(0, "b", (), np.array([0.5])),
    ])
    assert "duplicate-id" in kinds(net)


def test_parent_cap_violation():
    parents = tuple(range(13))
    roots = [Node(i, f"r{i}", (), np.array([0.5])) for i in range(13)]
    child = Node(13, "c", parents, np.full(2 ** 13, 0.5))
    net = BayesNet(roots + [child])
    assert "parent-cap" in kinds(net)


def test_compiled_requires_valid_net():
    net = BayesNet([Node(0, "a", (), np.array([2.0]))])
    with pytest.raises(InvalidNetworkError) as err:
        _ = net.compiled
    assert err.value.report.violations


def test_compiled_log_tables(vee):
    c = vee.compiled
    assert np.allclose(c.logp1, np.log(c.cpt_flat))
    assert np.allclose(c.logp0, np.log1p(-c.cpt_flat))
    assert not c.cpt_flat.flags.writeable


def test_deterministic_entries_get_minus_inf():
    net = BayesNet([
        Node(0, "a", (), np.array([1.0])),
        Node(1, "b", (0,), np.array([0.0, 1.0])),
    ])
    c = net.compiled
    assert c.logp0[0] == -np.inf
    assert c.logp1[c.cpt_off[1]] == -np.inf


def test_depth_type_assignment(chain4):
    typed = assign_depth_types(chain4, cap=3)
    assert [nd.depth_type for nd in typed.nodes] == [1, 2, 3, 3]
    typed2 = assign_depth_types(chain4, cap=2)
    assert [nd.depth_type for nd in typed2.nodes] == [1, 2, 2, 2]


def test_depth_type_roots_only():
    net = BayesNet([Node(i, f"r{i}", (), np.array([0.5])) for i in range(4)])
    typed = assign_depth_types(net, cap=3)
    assert [nd.depth_type for nd in typed.nodes] == [1, 1, 1, 1]


def test_parent_pattern_bit_order(vee):
    # parent k contributes bit k: (u=1, v=0) -> 1, (u=0, v=1) -> 2
    assert parent_pattern(vee, 2, np.array([1, 0, 0])) == 1
    assert parent_pattern(vee, 2, np.array([0, 1, 0])) == 2
    assert parent_pattern(vee, 2, np.array([1, 1, 0])) == 3


def test_node_log_likelihood_chain(chain2):
    a = np.array([1, 1], dtype=np.uint8)
    assert node_log_likelihood(chain2, 0, a) == pytest.approx(math.log(0.3))
    assert node_log_likelihood(chain2, 1, a) == pytest.approx(math.log(0.9))


def test_node_log_likelihood_contradiction():
    net = BayesNet([Node(0, "a", (), np.array([1.0]))])
    assert node_log_likelihood(net, 0, np.array([0])) == -math.inf
    assert node_log_likelihood(net, 0, np.array([1])) == 0.0


def test_joint_log_prob(chain2):
    assert joint_log_prob(chain2, np.array([1, 1])) == pytest.approx(math.log(0.27))
    assert joint_log_prob(chain2, np.array([0, 0])) == pytest.approx(math.log(0.7 * 0.9))


def test_ancestral_sampling_law(chain2):
    samples = ancestral_samples(chain2, 40000, make_rng(0))
    assert samples.shape == (40000, 2)
    # prior marginals: P(A)=0.3, P(B)=0.3*0.9+0.7*0.1=0.34
    assert samples[:, 0].mean() == pytest.approx(0.3, abs=0.01)
    assert samples[:, 1].mean() == pytest.approx(0.34, abs=0.01)


def test_ancestral_sampling_deterministic(chain4):
    s1 = ancestral_samples(chain4, 64, make_rng(9))
    s2 = ancestral_samples(chain4, 64, make_rng(9))
    assert np.array_equal(s1, s2)


def test_check_evidence():
    assert check_evidence({1: True, 0: 0}, 2) == {1: True, 0: False}
    with pytest.raises(BNError):
        check_evidence({5: True}, 2)
    with pytest.raises(BNError):
        check_evidence({-1: True}, 2)


def test_json_round_trip(tmp_path, vee):
    path = tmp_path / "net.json"
    save_network(vee, path)
    loaded = load_network(path)
    assert loaded.name == vee.name
    assert loaded.n == vee.n
    for a, b in zip(loaded.nodes, vee.nodes):
        assert a.id == b.id and a.name == b.name and a.parents == b.parents
        assert np.array_equal(a.cpt, b.cpt)
    # loading assigns depth types
    assert [nd.depth_type for nd in loaded.nodes] == [1, 1, 2]


def test_load_reports_syntax_position(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text('{"name": "x",\n  "nodes": [}')
    with pytest.raises(BNError) as err:
        load_network(path)
    assert "line 2" in str(err.value)


def test_load_reports_offending_node(tmp_path):
    doc = {"name": "bad", "nodes": [
        {"id": 0, "name": "a", "parents": [], "cpt": [0.5]},
        {"id": 1, "name": "b", "parents": [5], "cpt": [0.5, 0.5]},
    ]}
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(BNError) as err:
        load_network(path)
    assert "nodes[1]" in str(err.value)


def test_save_rejects_invalid(tmp_path):
    net = BayesNet([Node(0, "a", (), np.array([1.5]))])
    with pytest.raises(InvalidNetworkError):
        save_network(net, tmp_path / "x.json")


def test_to_json_dict_shape(chain2):
    doc = to_json_dict(chain2)
    assert set(doc) == {"name", "nodes"}
    assert doc["nodes"][1] == {"id": 1, "name": "b", "parents": [0], "cpt": [0.1, 0.9]}
