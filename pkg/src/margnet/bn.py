# bn.py
"""Binary Bayesian networks with explicit CPTs.

A network is a DAG over binary nodes. Node ``i`` carries a conditional
probability table ``cpt`` of length ``2**k`` for ``k`` parents, where
``cpt[cfg] = P(X_i = 1 | parent configuration cfg)`` and the configuration
is a bitmask over the parents in declaration order (parent ``k`` contributes
bit ``k``).

Networks are immutable after validation and safe to share across threads.
The stored node order is the topological order; it is validated once, not
recomputed per call.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .kernels import ancestral_batch

MAX_PARENTS = 12

Evidence = dict  # NodeId -> bool


class BNError(RuntimeError):
    pass


class InvalidNetworkError(BNError):
    """Raised when an operation requires a valid network and validation failed."""

    def __init__(self, report: "ValidationReport"):
        self.report = report
        super().__init__("invalid network:\n" + "\n".join(v.message for v in report.violations))


@dataclass(frozen=True)
class Violation:
    kind: str      # cycle | node-order | dangling-parent | duplicate-parent |
                   # cpt-length | probability-range | duplicate-id | parent-cap
    message: str
    node: int | None = None


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations


@dataclass(frozen=True)
class Node:
    id: int
    name: str
    parents: tuple[int, ...]
    cpt: np.ndarray            # (2**len(parents),) float64
    depth_type: int = 1        # 1 for roots, else 1 + max parent depth, clamped

    def __post_init__(self):
        cpt = np.asarray(self.cpt, dtype=np.float64)
        cpt.setflags(write=False)
        object.__setattr__(self, "cpt", cpt)
        object.__setattr__(self, "parents", tuple(int(p) for p in self.parents))


@dataclass(frozen=True)
class CompiledNet:
    """Flat array view of a validated network, consumed by the kernels."""

    n: int
    parent_flat: np.ndarray    # int64, concatenated parent lists
    parent_off: np.ndarray     # int64, (n+1,) offsets into parent_flat
    cpt_flat: np.ndarray       # float64, concatenated CPTs
    cpt_off: np.ndarray        # int64, (n+1,) offsets into cpt_flat
    logp1: np.ndarray          # log cpt_flat, -inf where the entry is 0
    logp0: np.ndarray          # log (1 - cpt_flat), -inf where the entry is 1
    depth: np.ndarray          # int64, clamped depth types


class BayesNet:
    """Immutable binary Bayesian network.

    Construction accepts arbitrary (possibly broken) node lists so that
    :func:`validate` can report violations; every other operation compiles
    the network first and raises :class:`InvalidNetworkError` if it is not
    well formed.
    """

    def __init__(self, nodes: Iterable[Node], name: str = "net", type_cap: int = 3):
        if type_cap < 1:
            raise ValueError("type_cap must be >= 1")
        self.nodes: tuple[Node, ...] = tuple(nodes)
        self.name = name
        self.type_cap = int(type_cap)
        self._report: ValidationReport | None = None
        self._compiled: CompiledNet | None = None

    @property
    def n(self) -> int:
        return len(self.nodes)

    def validate(self) -> ValidationReport:
        if self._report is None:
            self._report = _validate(self)
        return self._report

    @property
    def compiled(self) -> CompiledNet:
        if self._compiled is None:
            report = self.validate()
            if not report.ok:
                raise InvalidNetworkError(report)
            self._compiled = _compile(self)
        return self._compiled

    def node_named(self, name: str) -> Node:
        for node in self.nodes:
            if node.name == name:
                return node
        raise KeyError(name)

    def __repr__(self) -> str:
        return f"BayesNet(name={self.name!r}, n={self.n})"


def validate(net: BayesNet) -> ValidationReport:
    """Check every structural invariant; report-style, never raises."""
    return net.validate()


def _validate(net: BayesNet) -> ValidationReport:
    out: list[Violation] = []
    n = net.n
    seen_ids: set[int] = set()
    for pos, node in enumerate(net.nodes):
        where = f"nodes[{pos}] ({node.name!r})"
        if node.id != pos:
            out.append(Violation("duplicate-id", f"{where}: id {node.id} out of place; "
                                 "ids must be dense 0..N-1 in list order", pos))
        if node.id in seen_ids:
            out.append(Violation("duplicate-id", f"{where}: duplicate id {node.id}", pos))
        seen_ids.add(node.id)
        k = len(node.parents)
        if k > MAX_PARENTS:
            out.append(Violation("parent-cap", f"{where}: {k} parents exceeds cap {MAX_PARENTS}", pos))
        if len(set(node.parents)) != k:
            out.append(Violation("duplicate-parent", f"{where}: repeated parent id", pos))
        for p in node.parents:
            if not 0 <= p < n:
                out.append(Violation("dangling-parent", f"{where}: parent {p} does not exist", pos))
            elif p >= pos:
                out.append(Violation("node-order", f"{where}: parent {p} is not earlier "
                                     "in the node list", pos))
        if node.cpt.ndim != 1 or node.cpt.shape[0] != (1 << min(k, MAX_PARENTS)):
            out.append(Violation("cpt-length", f"{where}: CPT length {node.cpt.size} "
                                 f"!= 2^{k}", pos))
        elif not np.all((node.cpt >= 0.0) & (node.cpt <= 1.0)):
            out.append(Violation("probability-range", f"{where}: CPT entry outside [0, 1]", pos))
    if _has_cycle(net):
        out.append(Violation("cycle", "graph contains a directed cycle"))
    return ValidationReport(tuple(out))


def _has_cycle(net: BayesNet) -> bool:
    # Kahn's algorithm on the declared adjacency, ignoring dangling parents.
    n = net.n
    indeg = [0] * n
    children: list[list[int]] = [[] for _ in range(n)]
    for pos, node in enumerate(net.nodes):
        for p in node.parents:
            if 0 <= p < n:
                indeg[pos] += 1
                children[p].append(pos)
    queue = [i for i in range(n) if indeg[i] == 0]
    done = 0
    while queue:
        i = queue.pop()
        done += 1
        for c in children[i]:
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    return done != n


def _compile(net: BayesNet) -> CompiledNet:
    n = net.n
    parent_off = np.zeros(n + 1, dtype=np.int64)
    cpt_off = np.zeros(n + 1, dtype=np.int64)
    for i, node in enumerate(net.nodes):
        parent_off[i + 1] = parent_off[i] + len(node.parents)
        cpt_off[i + 1] = cpt_off[i] + node.cpt.size
    parent_flat = np.concatenate([np.asarray(nd.parents, dtype=np.int64) for nd in net.nodes]) \
        if parent_off[-1] else np.zeros(0, dtype=np.int64)
    cpt_flat = np.concatenate([nd.cpt for nd in net.nodes])
    with np.errstate(divide="ignore"):
        logp1 = np.log(cpt_flat)
        logp0 = np.log1p(-cpt_flat)
    depth = np.asarray([nd.depth_type for nd in net.nodes], dtype=np.int64)
    for arr in (parent_flat, parent_off, cpt_flat, cpt_off, logp1, logp0, depth):
        arr.setflags(write=False)
    return CompiledNet(n, parent_flat, parent_off, cpt_flat, cpt_off, logp1, logp0, depth)


def assign_depth_types(net: BayesNet, cap: int) -> BayesNet:
    """Return a copy with depth types set: 1 for roots, else 1 + max over
    parents, clamped to ``cap``.

    Depends only on the graph structure, so the result is the same for any
    topological order of the same DAG.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    report = net.validate()
    if not report.ok:
        raise InvalidNetworkError(report)
    raw = [0] * net.n
    for i, node in enumerate(net.nodes):
        raw[i] = 1 if not node.parents else 1 + max(raw[p] for p in node.parents)
    nodes = [
        Node(nd.id, nd.name, nd.parents, nd.cpt, depth_type=min(raw[i], cap))
        for i, nd in enumerate(net.nodes)
    ]
    return BayesNet(nodes, name=net.name, type_cap=cap)


def check_evidence(evidence: Mapping[int, bool], n: int) -> dict[int, bool]:
    """Normalise an evidence mapping; raises BNError on unknown ids."""
    out: dict[int, bool] = {}
    for key, val in evidence.items():
        i = int(key)
        if not 0 <= i < n:
            raise BNError(f"evidence refers to unknown node {key}")
        if i in out:
            raise BNError(f"duplicate evidence for node {i}")
        out[i] = bool(val)
    return out


# ---------------------------------------------------------------------------
# Likelihood evaluation and sampling
# ---------------------------------------------------------------------------

def parent_pattern(net: BayesNet, i: int, assignment: np.ndarray) -> int:
    node = net.nodes[i]
    pat = 0
    for k, p in enumerate(node.parents):
        pat |= int(assignment[p]) << k
    return pat


def node_log_likelihood(net: BayesNet, i: int, assignment: np.ndarray) -> float:
    """log P(X_i = assignment[i] | parent values in assignment).

    Exact table lookup; returns -inf when a deterministic CPT entry is
    contradicted, no clipping otherwise.
    """
    c = net.compiled
    pat = parent_pattern(net, i, assignment)
    p = c.cpt_flat[c.cpt_off[i] + pat]
    if assignment[i]:
        return float(c.logp1[c.cpt_off[i] + pat]) if p > 0.0 else -math.inf
    return float(c.logp0[c.cpt_off[i] + pat]) if p < 1.0 else -math.inf


def joint_log_prob(net: BayesNet, assignment: np.ndarray) -> float:
    """log P(X = assignment): sum of per-node log likelihoods."""
    total = 0.0
    for i in range(net.n):
        total += node_log_likelihood(net, i, assignment)
    return total


def ancestral_sample(net: BayesNet, rng: np.random.Generator) -> np.ndarray:
    """Draw one complete assignment in topological order.

    Consumes exactly N uniforms; node i takes value 1 iff u_i < cpt entry.
    """
    u = rng.random((1, net.n))
    c = net.compiled
    return ancestral_batch(c.parent_flat, c.parent_off, c.cpt_flat, c.cpt_off, u)[0]


def ancestral_samples(net: BayesNet, m: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``m`` assignments as a (m, n) uint8 matrix; row j is sample j."""
    u = rng.random((m, net.n))
    c = net.compiled
    return ancestral_batch(c.parent_flat, c.parent_off, c.cpt_flat, c.cpt_off, u)


# ---------------------------------------------------------------------------
# JSON file format
# ---------------------------------------------------------------------------
# {"name": str, "nodes": [{"id": int, "name": str, "parents": [int...],
#   "cpt": [float...]}, ...]}, nodes listed in topological order.

def to_json_dict(net: BayesNet) -> dict:
    return {
        "name": net.name,
        "nodes": [
            {"id": nd.id, "name": nd.name, "parents": list(nd.parents),
             "cpt": [float(x) for x in nd.cpt]}
            for nd in net.nodes
        ],
    }


def save_network(net: BayesNet, path) -> None:
    report = net.validate()
    if not report.ok:
        raise InvalidNetworkError(report)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json_dict(net), fh, indent=1)
        fh.write("\n")


def load_network(path, type_cap: int = 3) -> BayesNet:
    """Load and validate a network file; depth types are assigned on load.

    Violations are rejected with a message referencing the offending entry
    of the "nodes" array (JSON carries no per-token line numbers; syntax
    errors do report line and column).
    """
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise BNError(f"{path}: line {exc.lineno}, col {exc.colno}: {exc.msg}") from exc
    try:
        nodes = [
            Node(int(nd["id"]), str(nd["name"]),
                 tuple(int(p) for p in nd["parents"]),
                 np.asarray(nd["cpt"], dtype=np.float64))
            for nd in raw["nodes"]
        ]
        name = str(raw.get("name", "net"))
    except (KeyError, TypeError, ValueError) as exc:
        raise BNError(f"{path}: malformed network file: {exc}") from exc
    net = BayesNet(nodes, name=name, type_cap=type_cap)
    report = net.validate()
    if not report.ok:
        lines = "\n".join(f"  {v.message}" for v in report.violations)
        raise BNError(f"{path}: invalid network:\n{lines}")
    return assign_depth_types(net, type_cap)
