"""Branch-and-bound search for minimum-spill tilings.

A bespoke finite-domain engine specialized to the tiling model: depth-first
search with 2-way branching over the control variables (node ranks, tile
border points, tile widths, edge and state spill flags), constraint
propagation on bitmask domains, empty-tiles-last symmetry breaking, and an
admissible spill lower bound for pruning against the incumbent.  Every leaf
is validated and scored with the tiling evaluators, so the search can only
ever return what the model itself accepts.
"""

from __future__ import annotations

import random
import time
from dataclasses import dataclass
from enum import Enum

from . import tiling
from .dfg import ProblemInstance
from .tiling import CostReport, TilingSolution

__all__ = [
    "SolveStatus",
    "SearchConfig",
    "SearchStats",
    "SolveOutcome",
    "solve",
    "propagate",
    "break_symmetry",
    "Domains",
]


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible-but-unproven"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class SearchConfig:
    """Search knobs; outcomes are deterministic given seed and budgets."""

    seed: int = 0
    time_budget_ms: float | None = None
    node_budget: int = 0
    symmetry_breaking: bool = True


@dataclass(frozen=True)
class SearchStats:
    explored: int
    backtracks: int
    incumbent_updates: int
    wall_ms: float


@dataclass(frozen=True)
class SolveOutcome:
    status: SolveStatus
    best: TilingSolution | None
    cost: CostReport | None
    stats: SearchStats

    def to_json_dict(self) -> dict:
        return {
            "status": self.status.value,
            "solution": self.best.to_json_dict() if self.best else None,
            "cost": self.cost.to_json_dict() if self.cost else None,
            "search": {
                "explored": self.stats.explored,
                "backtracks": self.stats.backtracks,
                "incumbent_updates": self.stats.incumbent_updates,
                "wall_ms": self.stats.wall_ms,
            },
        }


def _min_bit(mask: int) -> int:
    return (mask & -mask).bit_length() - 1


def _max_bit(mask: int) -> int:
    return mask.bit_length() - 1


def _decided(mask: int) -> bool:
    return mask != 0 and mask & (mask - 1) == 0


class _Model:
    """Static shape of one instance: variable layout and incidence lists.

    Variable indices: ranks [0, n), border points [n, 2n), widths [2n, 3n),
    edge spills [3n, 3n+E), state spills [3n+E, 3n+E+n).  Rank and point
    domains are bitmasks over values 0..n-1, width domains over 1..max_width,
    spill domains over {0, 1}.
    """

    def __init__(self, instance: ProblemInstance):
        g = instance.graph
        self.instance = instance
        self.n = n = len(g.nodes)
        self.node_ids = g.node_ids
        self.comp = [nd.comp for nd in g.nodes]
        self.state = [nd.state for nd in g.nodes]
        self.limit = instance.limit
        self.u = instance.unroll
        self.mw = instance.max_width
        index = {v: i for i, v in enumerate(g.node_ids)}
        self.edges = [(index[e.src], index[e.dst], e.reg, e.id) for e in g.edges]
        self.E = len(self.edges)
        self.groups = [
            (grp.reg, [k for k, e in enumerate(g.edges) if e.group == grp.id])
            for grp in g.groups
        ]
        group_index = {grp.id: gi for gi, grp in enumerate(g.groups)}
        self.group_of_edge = [group_index[e.group] for e in g.edges]

        # Isolated nodes with equal comp and state are interchangeable:
        # pinning them to declaration order discards only relabelings of
        # solutions that remain in the search space.
        touched = set()
        for e in g.edges:
            touched.add(e.src)
            touched.add(e.dst)
        clusters: dict[tuple[int, int], list[int]] = {}
        for i, nd in enumerate(g.nodes):
            if nd.id not in touched:
                clusters.setdefault((nd.comp, nd.state), []).append(i)
        self.order_pairs = [(index[e.src], index[e.dst]) for e in g.edges]
        for members in clusters.values():
            for a, b in zip(members, members[1:]):
                self.order_pairs.append((a, b))
        self.rank0 = 0
        self.point0 = n
        self.width0 = 2 * n
        self.espill0 = 3 * n
        self.sspill0 = 3 * n + self.E
        self.nvars = 3 * n + self.E + n

        points = list(range(self.point0, self.point0 + n))
        widths = list(range(self.width0, self.width0 + n))
        cons: list[list[int]] = [list(range(n))]
        for si, di, _reg, _eid in self.edges:
            cons.append([si, di])
        for t in range(1, n):
            cons.append([points[t - 1], points[t]])
        for k, (si, di, _reg, _eid) in enumerate(self.edges):
            cons.append([si, di, *points, self.espill0 + k])
        for i in range(n):
            cons.append([i, *points, *widths])
        for i in range(n):
            cons.append([self.sspill0 + i, i, *points, *widths])
        self.constraints = cons

    def initial_domains(self) -> list[int]:
        n = self.n
        full = (1 << n) - 1
        dom = [full] * n
        dom += [full] * (n - 1) + [1 << (n - 1)]
        dom += [((1 << (self.mw + 1)) - 2)] * n
        dom += [0b11] * self.E
        dom += [0b11 if self.state[i] > 0 else 0b01 for i in range(n)]
        return dom


Domains = list  # bitmask per variable, indexed per _Model layout


def break_symmetry(model: _Model, dom: Domains) -> bool:
    """Force unused tiles to the tail: an empty tile may only sit at the end.

    Tile t is empty when points t-1 and t coincide; every later tile must
    then be empty too, which with the fixed final border means the shared
    point is the last rank.  Returns False when a decided empty tile sits
    before a non-empty one.
    """
    n = model.n
    p0 = model.point0
    for t in range(1, n):
        a, b = dom[p0 + t - 1], dom[p0 + t]
        if a == b and _decided(a) and _min_bit(a) != n - 1:
            return False
    return True


def propagate(
    model: _Model,
    dom: Domains,
    *,
    symmetry: bool = True,
    incumbent_uspill: int | None = None,
) -> bool:
    """Prune domains to a fixpoint; False signals a dead branch.

    Covers: precedence bounds plus forward-checking for the rank
    alldifferent, the non-decreasing border chain, forced spill flags for
    edges whose endpoints must straddle a border, width canonicalization of
    known-empty tiles, and pressure-driven rules built on an admissible
    per-point lower bound: fail when the bound already exceeds the limit,
    prune tile widths a point can no longer afford, and force the spill of
    states and entailed-crossing edges that would otherwise overflow.  When
    an incumbent cost is given, branches whose forced spill alone reaches
    it are abandoned.
    """
    n = model.n
    if n == 0:
        return True
    p0, w0, e0, s0 = model.point0, model.width0, model.espill0, model.sspill0
    edges = model.edges
    groups = model.groups
    comp = model.comp
    state = model.state
    limit = model.limit
    full = (1 << n) - 1

    changed = True
    while changed:
        changed = False

        for si, di in model.order_pairs:
            ds, dd = dom[si], dom[di]
            if not ds or not dd:
                return False
            nd = dd & ~((2 << ((ds & -ds).bit_length() - 1)) - 1)
            if nd != dd:
                if not nd:
                    return False
                dom[di] = nd
                changed = True
                dd = nd
            ns = ds & ((1 << (dd.bit_length() - 1)) - 1)
            if ns != ds:
                if not ns:
                    return False
                dom[si] = ns
                changed = True

        union = 0
        for i in range(n):
            di = dom[i]
            if not di & (di - 1):
                for j in range(n):
                    if j != i and dom[j] & di:
                        dom[j] &= ~di
                        if not dom[j]:
                            return False
                        changed = True
            union |= dom[i]
        if union != full:
            return False

        for t in range(1, n):
            prev = dom[p0 + t - 1]
            nd = dom[p0 + t] & ~((prev & -prev) - 1)
            if nd != dom[p0 + t]:
                if not nd:
                    return False
                dom[p0 + t] = nd
                changed = True
        for t in range(n - 2, -1, -1):
            nd = dom[p0 + t] & ((1 << dom[p0 + t + 1].bit_length()) - 1)
            if nd != dom[p0 + t]:
                if not nd:
                    return False
                dom[p0 + t] = nd
                changed = True

        if symmetry and not break_symmetry(model, dom):
            return False

        for t in range(1, n):
            a = dom[p0 + t - 1]
            if a == dom[p0 + t] and not a & (a - 1) and dom[w0 + t] != 0b10:
                if not dom[w0 + t] & 0b10:
                    return False
                dom[w0 + t] = 0b10
                changed = True

        # Tile interval of each rank from the (monotone) point bounds.
        p_lo = [(dom[p0 + t] & -dom[p0 + t]).bit_length() - 1 for t in range(n)]
        p_hi = [dom[p0 + t].bit_length() - 1 for t in range(n)]
        tile_lo_of_rank = [0] * n
        tile_hi_of_rank = [0] * n
        t = 0
        for r in range(n):
            while p_hi[t] < r:
                t += 1
            tile_lo_of_rank[r] = t
        t = 0
        for r in range(n):
            while p_lo[t] < r:
                t += 1
            tile_hi_of_rank[r] = t

        for k, (si, di, _reg, _eid) in enumerate(edges):
            hi_s = tile_hi_of_rank[dom[si].bit_length() - 1]
            lo_d = tile_lo_of_rank[(dom[di] & -dom[di]).bit_length() - 1]
            if hi_s < lo_d and dom[e0 + k] & 0b01:
                if not dom[e0 + k] & 0b10:
                    return False
                dom[e0 + k] = 0b10
                changed = True

        # Pressure rules on the admissible per-point lower bound.
        reserve_min = 0
        for i in range(n):
            if dom[s0 + i] == 0b01:
                reserve_min += state[i]

        comp_min = [0] * n
        for j in range(n):
            bit = 1 << j
            best = -1
            for i in range(n):
                if dom[i] & bit:
                    c = comp[i]
                    if best < 0 or c < best:
                        best = c
            comp_min[j] = best if best >= 0 else 0

        width_lo = [(dom[w0 + t] & -dom[w0 + t]).bit_length() - 1 for t in range(n)]
        wmin_at = [0] * n
        for j in range(n):
            wmin_at[j] = min(
                width_lo[t] for t in range(tile_lo_of_rank[j], tile_hi_of_rank[j] + 1)
            )

        forced_cross = [0] * len(groups)
        for gi, (_reg, members) in enumerate(groups):
            mask = 0
            for k in members:
                if dom[e0 + k] != 0b01:
                    continue
                si, di, _r, _eid = edges[k]
                lo = dom[si].bit_length() - 1
                hi = (dom[di] & -dom[di]).bit_length() - 1
                if lo < hi:
                    mask |= (1 << hi) - (1 << lo)
            forced_cross[gi] = mask

        press_lb = [0] * n
        for j in range(n):
            press = comp_min[j] + reserve_min
            bit = 1 << j
            for gi, (reg, _members) in enumerate(groups):
                if forced_cross[gi] & bit:
                    press += reg * wmin_at[j]
            if press > limit:
                return False
            press_lb[j] = press

        # Width values a point can no longer afford (tile determined).
        for j in range(n):
            t = tile_lo_of_rank[j]
            if t != tile_hi_of_rank[j]:
                continue
            cj = 0
            bit = 1 << j
            for gi, (reg, _members) in enumerate(groups):
                if forced_cross[gi] & bit:
                    cj += reg
            if cj == 0:
                continue
            room = limit - comp_min[j] - reserve_min
            wmax_ok = room // cj
            if wmax_ok < 0:
                return False
            allowed = (2 << wmax_ok) - 1 if wmax_ok >= 0 else 0
            nd = dom[w0 + t] & allowed
            if nd != dom[w0 + t]:
                if not nd:
                    return False
                dom[w0 + t] = nd
                changed = True

        # A state whose keep would overflow some point must spill.
        for i in range(n):
            if dom[s0 + i] == 0b11:
                si_state = state[i]
                if any(press_lb[j] + si_state > limit for j in range(n)):
                    dom[s0 + i] = 0b10
                    changed = True

        # An edge whose keep entails a new crossing that overflows must spill.
        for k, (si, di, reg, _eid) in enumerate(edges):
            if dom[e0 + k] != 0b11 or reg == 0:
                continue
            lo = dom[si].bit_length() - 1
            hi = (dom[di] & -dom[di]).bit_length() - 1
            if lo >= hi:
                continue
            gi = model.group_of_edge[k]
            extra = ((1 << hi) - (1 << lo)) & ~forced_cross[gi]
            for j in _iter_bits(extra):
                if press_lb[j] + reg * wmin_at[j] > limit:
                    dom[e0 + k] = 0b10
                    changed = True
                    break

    if incumbent_uspill is not None:
        if _cost_lower_bound(model, dom, p_lo, p_hi, press_lb) >= incumbent_uspill:
            return False
    return True


def _cost_lower_bound(model, dom, p_lo, p_hi, press_lb) -> int:
    """Admissible spill lower bound for the current domains.

    Counts decided spill flags at their cheapest possible charge, plus a
    joint term: if keeping every undecided state would overflow some point
    by E register-units, at least E units of state must spill, each costing
    at least one load per tile repetition, i.e. ceil(unroll/max_width).
    """
    n, u = model.n, model.u
    e0, s0, w0 = model.espill0, model.sspill0, model.width0
    lb = 0
    for k, (_si, _di, reg, _eid) in enumerate(model.edges):
        if dom[e0 + k] == 0b10:
            lb += reg * u
    undecided_state = 0
    for i in range(n):
        flag = dom[s0 + i]
        if flag == 0b11:
            undecided_state += model.state[i]
        if flag != 0b10:
            continue
        rlo = (dom[i] & -dom[i]).bit_length() - 1
        rhi = dom[i].bit_length() - 1
        tlo = next(t for t in range(n) if p_hi[t] >= rlo)
        thi = next(t for t in range(n) if p_lo[t] >= rhi)
        wmax = max(dom[w0 + t].bit_length() - 1 for t in range(tlo, thi + 1))
        lb += -(-u // wmax) * model.state[i]
    if undecided_state:
        excess = max(press_lb) + undecided_state - model.limit
        if excess > 0:
            lb += min(excess, undecided_state) * (-(-u // model.mw))
    return lb


def _select_variable(model, dom) -> int | None:
    """Dynamic most-constrained choice, ties by fixed variable index."""
    undecided = [d & (d - 1) != 0 for d in dom]
    if not any(undecided):
        return None
    score = [0] * model.nvars
    for c in model.constraints:
        cnt = 0
        for v in c:
            if undecided[v]:
                cnt += 1
        if cnt >= 2:
            for v in c:
                if undecided[v]:
                    score[v] += 1
    best = None
    best_score = -1
    for v in range(model.nvars):
        if undecided[v] and score[v] > best_score:
            best = v
            best_score = score[v]
    return best


def _choose_value(model, dom, var, rng) -> int:
    mask = dom[var]
    if var < model.point0:
        bits = list(_iter_bits(mask))
        return bits[rng.randrange(len(bits))]
    if var < model.espill0:
        return _max_bit(mask)
    return _min_bit(mask)


def _iter_bits(mask):
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


def _leaf_solution(model, dom) -> TilingSolution:
    n = model.n
    order = [""] * n
    for i in range(n):
        order[_min_bit(dom[i])] = model.node_ids[i]
    points = tuple(_min_bit(dom[model.point0 + t]) for t in range(n))
    widths = tuple(_min_bit(dom[model.width0 + t]) for t in range(n))
    espill = frozenset(
        eid
        for k, (_s, _d, _r, eid) in enumerate(model.edges)
        if dom[model.espill0 + k] == 0b10
    )
    sspill = frozenset(
        model.node_ids[i] for i in range(n) if dom[model.sspill0 + i] == 0b10
    )
    return TilingSolution(tuple(order), points, widths, espill, sspill)


def solve(instance: ProblemInstance, cfg: SearchConfig = SearchConfig()) -> SolveOutcome:
    """Minimize per-iteration spill over all tilings of the instance.

    Returns OPTIMAL when the search space is exhausted, FEASIBLE with the
    best incumbent when a budget runs out first, and INFEASIBLE when the
    register limit cannot even hold the largest macro-instruction.  The
    all-spill singleton tiling seeds the incumbent, so a feasible instance
    always yields a witness.
    """
    start = time.monotonic()
    graph = instance.graph
    n = len(graph.nodes)

    def done(status, best, rep, explored=0, backtracks=0, updates=0):
        wall = (time.monotonic() - start) * 1000.0
        return SolveOutcome(status, best, rep, SearchStats(explored, backtracks, updates, wall))

    if n == 0:
        sol = TilingSolution((), (), (), frozenset(), frozenset())
        return done(SolveStatus.OPTIMAL, sol, tiling.cost(sol, instance))
    if instance.limit < instance.max_comp:
        return done(SolveStatus.INFEASIBLE, None, None)

    fallback = tiling.all_spill_solution(instance)
    assert tiling.feasible(fallback, instance).ok
    incumbent = fallback
    incumbent_rep = tiling.cost(fallback, instance)
    incumbent_uspill = incumbent_rep.uspill

    model = _Model(instance)
    rng = random.Random(cfg.seed)
    deadline = (
        start + cfg.time_budget_ms / 1000.0 if cfg.time_budget_ms is not None else None
    )

    explored = 0
    backtracks = 0
    updates = 0
    budget_hit = False
    stack = [model.initial_domains()]

    while stack:
        if cfg.node_budget and explored >= cfg.node_budget:
            budget_hit = True
            break
        if deadline is not None and time.monotonic() > deadline:
            budget_hit = True
            break
        dom = stack.pop()
        explored += 1
        if not propagate(
            model,
            dom,
            symmetry=cfg.symmetry_breaking,
            incumbent_uspill=incumbent_uspill,
        ):
            backtracks += 1
            continue
        var = _select_variable(model, dom)
        if var is None:
            sol = _leaf_solution(model, dom)
            if tiling.feasible(sol, instance).ok:
                rep = tiling.cost(sol, instance)
                if rep.uspill < incumbent_uspill:
                    incumbent, incumbent_rep, incumbent_uspill = sol, rep, rep.uspill
                    updates += 1
            backtracks += 1
            continue
        val = _choose_value(model, dom, var, rng)
        rest = dom.copy()
        rest[var] &= ~(1 << val)
        if rest[var]:
            stack.append(rest)
        dom[var] = 1 << val
        stack.append(dom)

    status = SolveStatus.FEASIBLE if budget_hit else SolveStatus.OPTIMAL
    final_rep = tiling.cost(incumbent, instance)
    assert tiling.feasible(incumbent, instance).ok
    return done(status, incumbent, final_rep, explored, backtracks, updates)
