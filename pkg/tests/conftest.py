import numpy as np
import pytest

from margnet.bn import BayesNet, Node

# The end-to-end suite maps onto these claims; the summary hook below
# prints one verdict line per claim so a run can be audited at a glance.
ACCEPTANCE_CLAIMS = [
    ("likelihood weighting matches enumeration on 20 random graphs",
     ("test_sampling_matches_enumeration_across_twenty_graphs",)),
    ("exact conditional proposal flattens weights and keeps full ess",
     ("test_exact_conditional_proposal_degenerates_to_constant_weights",)),
    ("analytic gradients match central finite differences everywhere",
     ("test_all_parameter_groups_match_finite_differences",)),
    ("trained proposal: direct error small, guided sampling beats prior",
     ("test_direct_marginal_predictions_stay_close_to_enumeration",
      "test_guided_sampling_beats_prior_weighting_per_case_and_pooled")),
    ("mean ess at low mixing at least twice the prior-mixing value",
     ("test_mean_ess_drops_at_least_twofold_toward_prior_mixing",)),
    ("deterministic link: weight factor exactly 1000, naive ess collapses",
     ("test_deterministic_link_factor_and_ess_collapse",)),
    ("ess diagnostic: bounds, scale invariance, equal weights",
     ("test_ess_bounds_scaling_and_equal_weights",)),
    ("embedding readout beats raw-encoding readout in f1",
     ("test_embedding_readout_beats_raw_encoding",)),
    ("every cli command reruns to byte-identical outputs",
     ("test_cli_reruns_reproduce_identical_bytes",)),
]

_acceptance_outcomes: dict = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1].split("[")[0]
    if report.failed:
        _acceptance_outcomes[name] = False
    elif report.skipped:
        _acceptance_outcomes.setdefault(name, False)
    elif report.when == "call" and report.passed:
        _acceptance_outcomes.setdefault(name, True)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _acceptance_outcomes:
        return
    terminalreporter.section("acceptance")
    for label, names in ACCEPTANCE_CLAIMS:
        hits = [_acceptance_outcomes[n] for n in names
                if n in _acceptance_outcomes]
        if not hits:
            continue
        verdict = "PASS" if all(hits) else "FAIL"
        terminalreporter.write_line(f"{verdict}  {label}")


@pytest.fixture
def chain2() -> BayesNet:
    # P(A=1)=0.3; P(B=1|A=0)=0.1, P(B=1|A=1)=0.9 => P(A=1|B=1)=0.27/0.34
    return BayesNet([
        Node(0, "a", (), np.array([0.3])),
        Node(1, "b", (0,), np.array([0.1, 0.9])),
    ], name="chain2")


@pytest.fixture
def chain4() -> BayesNet:
    return BayesNet([
        Node(0, "a", (), np.array([0.3]), depth_type=1),
        Node(1, "b", (0,), np.array([0.2, 0.9]), depth_type=2),
        Node(2, "c", (1,), np.array([0.5, 0.1]), depth_type=3),
        Node(3, "d", (2,), np.array([0.6, 0.4]), depth_type=3),
    ], name="chain4")


@pytest.fixture
def vee() -> BayesNet:
    # two roots, one collider child; covers multi-parent bit patterns
    return BayesNet([
        Node(0, "u", (), np.array([0.4]), depth_type=1),
        Node(1, "v", (), np.array([0.7]), depth_type=1),
        Node(2, "w", (0, 1), np.array([0.1, 0.8, 0.3, 0.95]), depth_type=2),
    ], name="vee")


@pytest.fixture
def deterministic_pair() -> BayesNet:
    # child copies its parent; parent is rare
    return BayesNet([
        Node(0, "xi", (), np.array([0.001])),
        Node(1, "xj", (0,), np.array([0.0, 1.0])),
    ], name="det-pair")
