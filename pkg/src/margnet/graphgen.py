# graphgen.py
"""Seeded synthetic layered network generator.

Layer 1 nodes are parentless; each node in layer k > 1 draws its parent
count uniformly from [1, max_parents] and its parents uniformly without
replacement from layer k-1, so a node's depth type equals its layer index
(clamped). CPT entries are i.i.d. Beta(alpha, alpha): alpha = 1 gives
uniform tables, small alpha pushes entries towards 0/1 for near-
deterministic stress tests.

Everything is a pure function of the spec; the same spec regenerates a
bit-identical network.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bn import MAX_PARENTS, BayesNet, Node, assign_depth_types


@dataclass(frozen=True)
class GenSpec:
    seed: int
    layers: int
    nodes_per_layer: int
    max_parents: int = 3
    cpt_concentration: float = 1.0

    @property
    def n(self) -> int:
        return self.layers * self.nodes_per_layer

    def check(self) -> None:
        if self.layers < 1 or self.nodes_per_layer < 1:
            raise ValueError("layers and nodes_per_layer must be >= 1")
        if not 0 <= self.max_parents <= MAX_PARENTS:
            raise ValueError(f"max_parents must be in [0, {MAX_PARENTS}]")
        if self.layers > 1 and self.max_parents < 1:
            raise ValueError("multi-layer specs need max_parents >= 1")
        if self.nodes_per_layer < self.max_parents:
            raise ValueError("nodes_per_layer < max_parents: cannot draw distinct parents")
        if self.cpt_concentration <= 0:
            raise ValueError("cpt_concentration must be positive")


# Fixed seeds so the presets are stable, citable fixtures.
_PRESETS = {
    "s96": GenSpec(seed=96, layers=3, nodes_per_layer=32),
    "s384": GenSpec(seed=384, layers=3, nodes_per_layer=128),
    "s768": GenSpec(seed=768, layers=3, nodes_per_layer=256),
    "s1536": GenSpec(seed=1536, layers=3, nodes_per_layer=512),
}


def preset(name: str) -> GenSpec:
    try:
        return _PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; known: {sorted(_PRESETS)}") from None


def preset_names() -> list[str]:
    return sorted(_PRESETS)


def generate(spec: GenSpec, type_cap: int = 3) -> BayesNet:
    spec.check()
    rng = np.random.default_rng(spec.seed)
    alpha = spec.cpt_concentration
    nodes: list[Node] = []
    for layer in range(spec.layers):
        lo = (layer - 1) * spec.nodes_per_layer
        for slot in range(spec.nodes_per_layer):
            i = layer * spec.nodes_per_layer + slot
            if layer == 0:
                parents: tuple[int, ...] = ()
            else:
                count = int(rng.integers(1, spec.max_parents + 1))
                parents = tuple(sorted(int(p) for p in
                                       rng.choice(spec.nodes_per_layer, size=count, replace=False) + lo))
            cpt = rng.beta(alpha, alpha, size=1 << len(parents))
            nodes.append(Node(i, f"n{i}", parents, cpt))
    net = BayesNet(nodes, name=f"synth-{spec.n}-seed{spec.seed}", type_cap=type_cap)
    return assign_depth_types(net, type_cap)
