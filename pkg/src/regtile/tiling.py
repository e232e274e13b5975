"""Tiling solutions and their exact evaluation.

A tiling of an unrolled loop body picks a linear order of the nodes, cuts
the order into tiles, gives every tile a replication width, and decides
which values go through memory.  This module owns the semantics: tile
membership, which points each value group crosses, the register pressure
at every point, feasibility against the register limit, and the exact
per-iteration spill cost.  Everything here is pure and usable on infeasible
solutions too, so candidates can be scored independently of the pressure
model.
"""

from __future__ import annotations

import json
from bisect import bisect_left
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property

from .dfg import DataFlowGraph, ProblemInstance

__all__ = [
    "TilingSolution",
    "PressureProfile",
    "CostReport",
    "FeasibilityResult",
    "EdgeCrossings",
    "node_tile_assignment",
    "edge_crossings",
    "pressure",
    "feasible",
    "cost",
    "all_spill_solution",
    "canonical_key",
]


@dataclass(frozen=True)
class TilingSolution:
    """Node order, tile borders, tile widths, and spill flags.

    ``tile_points[t]`` is the rank of the last node owned by tile ``t``
    (with an implicit sentinel of -1 before tile 0), so tile ``t`` owns the
    ranks in ``(tile_points[t-1], tile_points[t]]``.  The final entry must
    equal the last rank; empty tiles repeat their predecessor's point and
    have their width normalized to 1 so equality is canonical.
    """

    order: tuple[str, ...]
    tile_points: tuple[int, ...]
    tile_widths: tuple[int, ...]
    edge_spill: frozenset[str]
    state_spill: frozenset[str]

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(self.order))
        object.__setattr__(self, "tile_points", tuple(self.tile_points))
        object.__setattr__(self, "edge_spill", frozenset(self.edge_spill))
        object.__setattr__(self, "state_spill", frozenset(self.state_spill))
        points = self.tile_points
        widths = tuple(self.tile_widths)
        if len(points) != len(widths):
            raise ValueError("tile_points and tile_widths must have equal length")
        if len(set(self.order)) != len(self.order):
            raise ValueError("order contains duplicate node ids")
        last = len(self.order) - 1
        prev = -1
        for t, p in enumerate(points):
            if p < prev:
                raise ValueError("tile_points must be non-decreasing")
            if not -1 <= p <= last:
                raise ValueError(f"tile point {p} out of range [-1, {last}]")
            prev = p
        if self.order and (not points or points[-1] != last):
            raise ValueError(f"final tile point must be {last}")
        norm = []
        prev = -1
        for t, p in enumerate(points):
            w = widths[t]
            if w < 1:
                raise ValueError("tile widths must be >= 1")
            norm.append(1 if p == prev else w)
            prev = p
        object.__setattr__(self, "tile_widths", tuple(norm))

    @cached_property
    def rank(self) -> dict[str, int]:
        return {v: r for r, v in enumerate(self.order)}

    @cached_property
    def tile_of_rank(self) -> tuple[int, ...]:
        points = self.tile_points
        return tuple(bisect_left(points, r) for r in range(len(self.order)))

    def to_json_dict(self) -> dict:
        return {
            "order": list(self.order),
            "tile_points": list(self.tile_points),
            "tile_widths": list(self.tile_widths),
            "spill_edges": sorted(self.edge_spill),
            "spill_states": sorted(self.state_spill),
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TilingSolution":
        for key in ("order", "tile_points", "tile_widths"):
            if key not in doc:
                raise ValueError(f"solution document missing {key!r}")
        return cls(
            tuple(doc["order"]),
            tuple(doc["tile_points"]),
            tuple(doc["tile_widths"]),
            frozenset(doc.get("spill_edges", ())),
            frozenset(doc.get("spill_states", ())),
        )


def canonical_key(sol: TilingSolution) -> str:
    """Canonical serialization used for deterministic tie-breaking."""
    return json.dumps(sol.to_json_dict(), sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class PressureProfile:
    """Register pressure at every point (point j sits after rank j)."""

    points: tuple[int, ...]

    @property
    def max_pressure(self) -> int:
        return max(self.points, default=0)


@dataclass(frozen=True)
class CostReport:
    """Load cost of a tiling: total over the unrolled body and per iteration.

    ``state_charge_alt`` reports, per spilled node, the per-iteration charge
    under the distance-aware accounting min(distance, width) * size / width;
    the normalized formula used in ``uspill`` can overcharge states whose
    original distance exceeds the tile width, and this field makes the gap
    visible.
    """

    uspill: int
    spill: Fraction
    stream_cost: int
    state_cost: int
    state_charge_alt: tuple[tuple[str, Fraction], ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "uspill": self.uspill,
            "spill": str(self.spill),
            "spill_float": float(self.spill),
            "stream_cost": self.stream_cost,
            "state_cost": self.state_cost,
            "state_charge_alt": {v: str(f) for v, f in self.state_charge_alt},
        }


@dataclass(frozen=True)
class FeasibilityResult:
    ok: bool
    violated_point: int | None = None
    reason: str | None = None

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class EdgeCrossings:
    """Points crossed by each edge and by each group.

    An edge crosses point j when its source rank is <= j < its destination
    rank.  A group crosses j only through members that stay inside one tile
    and are not spilled: spilled values live in memory across points, so
    they hold no register there.
    """

    edge_points: dict[str, frozenset[int]]
    group_points: dict[str, frozenset[int]]


def _check_solution(sol: TilingSolution, graph: DataFlowGraph) -> None:
    if set(sol.order) != set(graph.node_ids):
        raise ValueError("solution order is not a permutation of the instance nodes")
    unknown = sol.edge_spill - set(graph.edge_by_id)
    if unknown:
        raise ValueError(f"unknown edge ids in spill set: {sorted(unknown)}")
    unknown = sol.state_spill - set(graph.node_by_id)
    if unknown:
        raise ValueError(f"unknown node ids in spill set: {sorted(unknown)}")


def node_tile_assignment(sol: TilingSolution) -> dict[str, int]:
    """Map each node to the tile owning its rank."""
    tiles = sol.tile_of_rank
    return {v: tiles[r] for r, v in enumerate(sol.order)}


def _group_cross_masks(sol: TilingSolution, graph: DataFlowGraph) -> dict[str, int]:
    rank = sol.rank
    tiles = sol.tile_of_rank
    edge_by_id = graph.edge_by_id
    spill = sol.edge_spill
    masks: dict[str, int] = {}
    for g in graph.groups:
        mask = 0
        for eid in g.members:
            if eid in spill:
                continue
            e = edge_by_id[eid]
            rs, rd = rank[e.src], rank[e.dst]
            if rs < rd and tiles[rs] == tiles[rd]:
                mask |= (1 << rd) - (1 << rs)
        masks[g.id] = mask
    return masks


def _bits(mask: int):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def edge_crossings(sol: TilingSolution, graph: DataFlowGraph) -> EdgeCrossings:
    """Crossed points per edge and per group (see class docstring)."""
    _check_solution(sol, graph)
    rank = sol.rank
    edge_points = {}
    for e in graph.edges:
        rs, rd = rank[e.src], rank[e.dst]
        edge_points[e.id] = frozenset(range(rs, rd)) if rs < rd else frozenset()
    group_points = {
        gid: frozenset(_bits(mask))
        for gid, mask in _group_cross_masks(sol, graph).items()
    }
    return EdgeCrossings(edge_points, group_points)


def _pressure_points(sol: TilingSolution, graph: DataFlowGraph) -> list[int]:
    widths = sol.tile_widths
    node_by_id = graph.node_by_id
    reserve = sum(n.state for n in graph.nodes if n.id not in sol.state_spill)
    press = [node_by_id[v].comp + reserve for v in sol.order]
    tiles = sol.tile_of_rank
    masks = _group_cross_masks(sol, graph)
    for g in graph.groups:
        if g.reg == 0:
            continue
        for j in _bits(masks[g.id]):
            press[j] += g.reg * widths[tiles[j]]
    return press


def pressure(sol: TilingSolution, instance: ProblemInstance) -> PressureProfile:
    """Register pressure profile of a solution.

    Point j charges the comp of the rank-j node, plus the reserve (states
    kept in registers across iterations), plus each crossing group's size
    scaled by the width of the tile the point belongs to.
    """
    _check_solution(sol, instance.graph)
    return PressureProfile(tuple(_pressure_points(sol, instance.graph)))


def feasible(sol: TilingSolution, instance: ProblemInstance) -> FeasibilityResult:
    """Check a solution against the model's validity conditions.

    The order must respect every edge, widths must not exceed the cap,
    every tile-crossing edge must be spilled, and no point may exceed the
    register limit.  Returns the first violated point for pressure failures.
    """
    graph = instance.graph
    _check_solution(sol, graph)
    rank = sol.rank
    tiles = sol.tile_of_rank
    for e in graph.edges:
        rs, rd = rank[e.src], rank[e.dst]
        if rs >= rd:
            return FeasibilityResult(False, None, f"order violates edge {e.id!r}")
        if tiles[rs] != tiles[rd] and e.id not in sol.edge_spill:
            return FeasibilityResult(
                False, None, f"edge {e.id!r} crosses a tile border but is not spilled"
            )
    for t, w in enumerate(sol.tile_widths):
        if w > instance.max_width:
            return FeasibilityResult(
                False, None, f"tile {t} width {w} exceeds max_width {instance.max_width}"
            )
    press = _pressure_points(sol, graph)
    for j, p in enumerate(press):
        if p > instance.limit:
            return FeasibilityResult(
                False, j, f"pressure {p} exceeds limit {instance.limit} at point {j}"
            )
    return FeasibilityResult(True)


def cost(sol: TilingSolution, instance: ProblemInstance) -> CostReport:
    """Exact spill cost of a solution (defined even when infeasible).

    Every spilled edge reloads its value in each unrolled column; every
    spilled state reloads once per repetition of its tile, i.e.
    ceil(unroll / width) times.  ``spill`` is uspill/unroll as an exact
    rational.
    """
    graph = instance.graph
    _check_solution(sol, graph)
    u = instance.unroll
    stream = sum(graph.edge_by_id[eid].reg for eid in sol.edge_spill) * u
    rank = sol.rank
    tiles = sol.tile_of_rank
    state = 0
    alt = []
    for n in graph.nodes:
        if n.id not in sol.state_spill or n.state == 0:
            continue
        w = sol.tile_widths[tiles[rank[n.id]]]
        state += -(-u // w) * n.state
        charge = sum(
            Fraction(min(s.distance, w) * s.reg, w) for s in n.sources
        )
        alt.append((n.id, charge))
    uspill = stream + state
    return CostReport(uspill, Fraction(uspill, u), stream, state, tuple(alt))


def all_spill_solution(instance: ProblemInstance) -> TilingSolution:
    """Width-1 singleton tiles, everything spilled: the universal fallback.

    Feasible whenever the register limit covers the largest comp, with cost
    unroll * (sum of edge regs + sum of states).
    """
    ids = instance.graph.node_ids
    n = len(ids)
    return TilingSolution(
        ids,
        tuple(range(n)),
        (1,) * n,
        frozenset(e.id for e in instance.graph.edges),
        frozenset(nd.id for nd in instance.graph.nodes if nd.state > 0),
    )
