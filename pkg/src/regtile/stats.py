"""Corpus statistics and the synthetic instance generator.

Mirrors the evaluation methodology: how many schedulable units a loop has
(SCC count), how much register pressure its original schedule needs, and
whether rescheduling can help at all (pressure above the limit).  The
generator produces deterministic pseudo-random instances for solver and
oracle stress tests.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import dfg, tiling
from .dfg import DataFlowGraph, ProblemInstance, RawDependenceGraph

__all__ = [
    "InstanceStats",
    "CorpusConfig",
    "scc_count",
    "original_pressure",
    "classify",
    "generate_corpus",
]


@dataclass(frozen=True)
class InstanceStats:
    name: str
    nodes: int
    scc_count: int
    max_pressure: int
    interesting: bool

    def csv_row(self, index: int) -> str:
        return (
            f"{index},{self.name},{self.nodes},{self.scc_count},"
            f"{self.max_pressure},{str(self.interesting).lower()}"
        )


CSV_HEADER = "instance,name,nodes,scc_count,max_pressure,interesting"


def scc_count(g: RawDependenceGraph) -> int:
    """Number of strongly connected components over distance-0 edges."""
    return len(dfg.strongly_connected_components(g))


def original_pressure(g: DataFlowGraph) -> int:
    """Pressure of the declared schedule with everything kept in registers.

    Evaluates the canonical solution: declaration order, one width-1 tile,
    nothing spilled.  This is what the loop needs to avoid memory entirely.
    """
    if not g.nodes:
        return 0
    n = len(g.nodes)
    sol = tiling.TilingSolution(g.node_ids, (n - 1,), (1,), frozenset(), frozenset())
    instance = ProblemInstance("original-pressure", g, 0, 1, 1)
    return tiling.pressure(sol, instance).max_pressure


def classify(instance: ProblemInstance) -> InstanceStats:
    """Bundle SCC count and original-schedule pressure for one instance.

    A loop is interesting when its unspilled pressure exceeds the register
    limit, because only then can rescheduling or tiling improve reuse.
    Ingestion already condensed SCCs, so the normalized node count equals
    the SCC count of the declared graph.
    """
    press = original_pressure(instance.graph)
    return InstanceStats(
        instance.name,
        len(instance.graph.nodes),
        len(instance.graph.nodes),
        press,
        press > instance.limit,
    )


@dataclass(frozen=True)
class CorpusConfig:
    """Ranges for the synthetic instance generator (inclusive bounds)."""

    nodes: tuple[int, int] = (3, 5)
    edges: tuple[int, int] = (1, 6)
    comp: tuple[int, int] = (1, 3)
    state: tuple[int, int] = (0, 2)
    reg: tuple[int, int] = (1, 2)
    limit_slack: tuple[int, int] = (0, 3)
    unroll: tuple[int, int] = (1, 6)
    max_width: int = 4
    ordering_edge_fraction: float = 0.15
    shared_group_fraction: float = 0.25
    diagonal_fraction: float = 0.15


def _random_document(rng: random.Random, index: int, cfg: CorpusConfig) -> dict:
    n = rng.randint(*cfg.nodes)
    ids = [f"S{k}" for k in range(n)]
    comps = [rng.randint(*cfg.comp) for _ in range(n)]
    states = [rng.randint(*cfg.state) for _ in range(n)]

    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    count = min(rng.randint(*cfg.edges), len(pairs))
    chosen = sorted(rng.sample(pairs, count))

    by_src: dict[int, list[int]] = {}
    edges = []
    for k, (i, j) in enumerate(chosen):
        if rng.random() < cfg.ordering_edge_fraction:
            reg = 0
        else:
            reg = rng.randint(*cfg.reg)
        variable = f"v{k}"
        # Occasionally reuse an earlier variable from the same source so the
        # edge joins its group (this needs the same reg to stay valid).
        if reg > 0 and by_src.get(i) and rng.random() < cfg.shared_group_fraction:
            prev = edges[rng.choice(by_src[i])]
            if prev["reg"] > 0:
                variable = prev["variable"]
                reg = prev["reg"]
        distance = 0
        if rng.random() < cfg.diagonal_fraction:
            distance = rng.randint(1, 2)
        edges.append(
            {
                "id": f"e{k}",
                "src": ids[i],
                "dst": ids[j],
                "reg": reg,
                "distance": distance,
                "variable": variable,
            }
        )
        by_src.setdefault(i, []).append(k)

    unroll = rng.randint(*cfg.unroll)
    return {
        "name": f"gen-{index}",
        "registers": max(comps) + rng.randint(*cfg.limit_slack),
        "unroll": unroll,
        "max_width": rng.randint(1, min(cfg.max_width, unroll)),
        "nodes": [
            {"id": ids[k], "comp": comps[k], "state": states[k]} for k in range(n)
        ],
        "edges": edges,
    }


def generate_corpus(
    seed: int, count: int, cfg: CorpusConfig = CorpusConfig()
) -> list[ProblemInstance]:
    """Deterministic pseudo-random instances, all ingest-valid."""
    rng = random.Random(seed)
    out = []
    for i in range(count):
        doc = _random_document(rng, i, cfg)
        out.append(dfg.instance_from_document(doc))
    return out
