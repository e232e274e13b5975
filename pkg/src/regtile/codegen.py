"""Emit a tiling as an unrolled, linearized pseudo-instruction stream.

The program is the operational meaning of the cost model: tiles are written
out in linearization order, each tile as full-width repetitions (plus one
reduced repetition when the unroll factor is not a multiple of the width),
each repetition row by row with columns left to right.  Spilled values get
a LOAD right before their first use in a repetition and a STORE right after
their definition; everything else travels in registers.  A separate pass
assigns physical registers by linear scan and reports overflow points as
diagnostics instead of failing, because the model's pressure equation is an
approximation of simulated liveness.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, replace

from . import tiling
from .dfg import ProblemInstance
from .tiling import TilingSolution, node_tile_assignment

__all__ = [
    "ExecOp",
    "LoadOp",
    "StoreOp",
    "OverflowEvent",
    "ScheduleProgram",
    "InfeasibleScheduleError",
    "generate",
    "assign_registers",
    "verify_def_before_use",
]


class InfeasibleScheduleError(ValueError):
    """Asked to emit code for an infeasible solution without --force."""


@dataclass(frozen=True)
class ExecOp:
    node: str
    col: int
    consumes: tuple[str, ...] = ()
    produces: tuple[str, ...] = ()

    def render(self) -> str:
        return f"EXEC {self.node} col={self.col}"


@dataclass(frozen=True)
class LoadOp:
    value: str
    reg: str | None = None

    def render(self) -> str:
        return f"LOAD {self.value} -> {self.reg}" if self.reg else f"LOAD {self.value}"


@dataclass(frozen=True)
class StoreOp:
    value: str
    reg: str | None = None

    def render(self) -> str:
        return f"STORE {self.reg} -> {self.value}" if self.reg else f"STORE {self.value}"


@dataclass(frozen=True)
class OverflowEvent:
    """A point where simulated liveness needed more registers than allowed."""

    index: int
    needed: int
    available: int
    detail: str


@dataclass(frozen=True)
class ScheduleProgram:
    ops: tuple[ExecOp | LoadOp | StoreOp, ...]
    unroll: int
    live_ins: tuple[str, ...]
    spilled_values: frozenset[str]
    node_comp: tuple[tuple[str, int], ...]
    remainder_note: str
    register_map: dict[str, str] | None = None
    overflow: tuple[OverflowEvent, ...] = ()

    @property
    def load_count(self) -> int:
        return sum(1 for op in self.ops if isinstance(op, LoadOp))

    @property
    def exec_sequence(self) -> tuple[tuple[str, int], ...]:
        return tuple((op.node, op.col) for op in self.ops if isinstance(op, ExecOp))

    def render(self) -> str:
        lines = [f"# step={self.unroll}"]
        if self.live_ins:
            lines.append(f"# live-in: {' '.join(self.live_ins)}")
        lines.append(f"# remainder: {self.remainder_note}")
        if self.overflow:
            for ev in self.overflow:
                lines.append(
                    f"# overflow at op {ev.index}: needed {ev.needed}, "
                    f"available {ev.available} ({ev.detail})"
                )
        lines.extend(op.render() for op in self.ops)
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        ops = []
        for op in self.ops:
            if isinstance(op, ExecOp):
                ops.append({"op": "exec", "node": op.node, "col": op.col})
            elif isinstance(op, LoadOp):
                ops.append({"op": "load", "value": op.value, "reg": op.reg})
            else:
                ops.append({"op": "store", "value": op.value, "reg": op.reg})
        return {
            "unroll": self.unroll,
            "live_in": list(self.live_ins),
            "remainder": self.remainder_note,
            "ops": ops,
            "register_map": dict(self.register_map) if self.register_map else None,
            "overflow": [
                {
                    "index": ev.index,
                    "needed": ev.needed,
                    "available": ev.available,
                    "detail": ev.detail,
                }
                for ev in self.overflow
            ],
        }


def _words(name: str, size: int) -> list[str]:
    return [name] if size == 1 else [f"{name}.{k}" for k in range(size)]


def _fresh(taken: set[str], name: str) -> str:
    """Unique display name; carried values that shadow an in-iteration
    value of the same variable get a ~carry suffix."""
    if name not in taken:
        taken.add(name)
        return name
    candidate = f"{name}~carry"
    k = 2
    while candidate in taken:
        candidate = f"{name}~carry{k}"
        k += 1
    taken.add(candidate)
    return candidate


def generate(
    sol: TilingSolution, instance: ProblemInstance, *, force: bool = False
) -> ScheduleProgram:
    """Unroll, linearize, and insert spill code for one solution.

    The emitted LOAD count equals the solution's uspill exactly: each
    spilled edge reloads once per column at its consumer, each spilled
    state once per repetition of its tile.
    """
    res = tiling.feasible(sol, instance)
    if not res.ok and not force:
        raise InfeasibleScheduleError(f"solution is infeasible: {res.reason}")

    graph = instance.graph
    u = instance.unroll
    assign = node_tile_assignment(sol)
    rank = sol.rank

    tile_nodes: dict[int, list[str]] = {}
    for v in sol.order:
        tile_nodes.setdefault(assign[v], []).append(v)

    taken: set[str] = set()
    group_words = {
        g.id: _words(_fresh(taken, g.value_name), g.reg)
        for g in graph.groups
        if g.reg > 0
    }
    state_words: dict[str, list[str]] = {}
    for n in graph.nodes:
        words: list[str] = []
        if n.state > 0 and n.sources:
            for s in n.sources:
                words.extend(_words(_fresh(taken, s.variable), s.reg * s.distance))
        elif n.state > 0:
            words.extend(_words(_fresh(taken, f"{n.id}.state"), n.state))
        state_words[n.id] = words

    in_edges: dict[str, list] = {v: [] for v in graph.node_ids}
    out_groups: dict[str, list[str]] = {v: [] for v in graph.node_ids}
    group_has_spill: dict[str, bool] = {}
    for e in graph.edges:
        in_edges[e.dst].append(e)
        if e.group not in out_groups[e.src]:
            out_groups[e.src].append(e.group)
        group_has_spill[e.group] = group_has_spill.get(e.group, False) or (
            e.id in sol.edge_spill
        )

    spilled_values: set[str] = set()
    ops: list[ExecOp | LoadOp | StoreOp] = []

    for t in sorted(tile_nodes, key=lambda t: rank[tile_nodes[t][0]]):
        rows = tile_nodes[t]
        w = sol.tile_widths[t]
        for c0 in range(0, u, w):
            cols = range(c0, min(c0 + w, u))
            last_col = cols[-1]
            for v in rows:
                node = graph.node_by_id[v]
                spill_state = v in sol.state_spill and node.state > 0
                for c in cols:
                    consumes: list[str] = []
                    produces: list[str] = []
                    if node.state > 0:
                        if spill_state:
                            if c == c0:
                                for word in state_words[v]:
                                    ops.append(LoadOp(f"{word}@col{c0}"))
                                    spilled_values.add(f"{word}@col{c0}")
                            consumes += [f"{word}@col{c}" for word in state_words[v]]
                            produces += [f"{word}@col{c + 1}" for word in state_words[v]]
                        else:
                            consumes += state_words[v]
                            produces += state_words[v]
                    for e in in_edges[v]:
                        if e.reg == 0:
                            continue
                        words = [f"{word}@col{c}" for word in group_words[e.group]]
                        if e.id in sol.edge_spill:
                            for word in words:
                                ops.append(LoadOp(word))
                        for word in words:
                            if word not in consumes:
                                consumes.append(word)
                    for gid in out_groups[v]:
                        if gid in group_words:
                            produces += [f"{word}@col{c}" for word in group_words[gid]]
                    ops.append(ExecOp(v, c, tuple(consumes), tuple(produces)))
                    for gid in out_groups[v]:
                        if gid not in group_words:
                            continue
                        words = [f"{word}@col{c}" for word in group_words[gid]]
                        if group_has_spill[gid]:
                            spilled_values.update(words)
                            for word in words:
                                ops.append(StoreOp(word))
                    if spill_state and c == last_col:
                        for word in state_words[v]:
                            ops.append(StoreOp(f"{word}@col{c + 1}"))
                            spilled_values.add(f"{word}@col{c + 1}")

    live_ins = []
    for n in graph.nodes:
        if n.state > 0 and n.id not in sol.state_spill:
            live_ins.extend(state_words[n.id])

    note = (
        f"loop step becomes {u}; trip counts not divisible by {u} "
        f"need a peeled epilogue of trip%{u} iterations"
    )
    comps = tuple((n.id, n.comp) for n in graph.nodes)
    return ScheduleProgram(
        tuple(ops), u, tuple(live_ins), frozenset(spilled_values), comps, note
    )


def verify_def_before_use(program: ScheduleProgram) -> list[str]:
    """Every register operand must be defined (LOAD/EXEC) before its use."""
    defined = set(program.live_ins)
    problems = []
    for i, op in enumerate(program.ops):
        if isinstance(op, LoadOp):
            defined.add(op.value)
        elif isinstance(op, StoreOp):
            if op.value not in defined:
                problems.append(f"op {i}: STORE of undefined value {op.value}")
        else:
            for v in op.consumes:
                if v not in defined:
                    problems.append(f"op {i}: EXEC {op.node} uses undefined {v}")
            defined.update(op.produces)
    return problems


def _interval_releases(program: ScheduleProgram) -> set[tuple[int, str]]:
    """(op index, value) pairs where a value's current interval ends.

    A value id can live through several register intervals (e.g. a state
    stored at a repetition border and reloaded by the next repetition), so
    a use ends an interval exactly when no further use precedes the next
    definition of the same id.
    """
    events: dict[str, list[tuple[int, bool]]] = {}
    for i, op in enumerate(program.ops):
        if isinstance(op, LoadOp):
            events.setdefault(op.value, []).append((i, True))
        elif isinstance(op, StoreOp):
            events.setdefault(op.value, []).append((i, False))
        else:
            for v in op.consumes:
                events.setdefault(v, []).append((i, False))
            for v in op.produces:
                events.setdefault(v, []).append((i, True))
    releases = set()
    for value, evs in events.items():
        for k, (i, is_def) in enumerate(evs):
            if is_def:
                continue
            nxt = evs[k + 1] if k + 1 < len(evs) else None
            # A def at the same op is an in-place redefinition (a state
            # chain advancing), which keeps the register occupied.
            if nxt is None or (nxt[1] and nxt[0] > i):
                releases.add((i, value))
    return releases


def assign_registers(program: ScheduleProgram, limit: int) -> ScheduleProgram:
    """Linear-scan physical register assignment over the emitted order.

    Live values hold one register per word; an EXEC additionally reserves
    its comp registers for its duration, with inputs dying at the EXEC
    released first and outputs claimed after.  Overflow never aborts: extra
    registers beyond the limit are handed out and every such point is
    reported, because simulated liveness may legitimately disagree with the
    model's pressure approximation.
    """
    releases = _interval_releases(program)
    comp_of = dict(program.node_comp)
    free: list[int] = list(range(limit))
    heapq.heapify(free)
    next_extra = limit
    live: dict[str, int] = {}
    overflow: list[OverflowEvent] = []
    register_map: dict[str, str] = {v: "SPILLED" for v in program.spilled_values}

    def claim(value: str, index: int, detail: str) -> int:
        nonlocal next_extra
        if free:
            r = heapq.heappop(free)
        else:
            r = next_extra
            next_extra += 1
        live[value] = r
        if len(live) > limit:
            overflow.append(OverflowEvent(index, len(live), limit, detail))
        if value not in program.spilled_values:
            register_map[value] = f"r{r}"
        return r

    def release(index: int, value: str) -> None:
        if (index, value) in releases and value in live:
            heapq.heappush(free, live.pop(value))

    for word in program.live_ins:
        claim(word, 0, f"loop-carried value {word}")

    new_ops: list[ExecOp | LoadOp | StoreOp] = []
    for i, op in enumerate(program.ops):
        if isinstance(op, LoadOp):
            if op.value in live:
                heapq.heappush(free, live.pop(op.value))
            r = claim(op.value, i, f"load of {op.value}")
            new_ops.append(LoadOp(op.value, f"r{r}"))
        elif isinstance(op, StoreOp):
            r = live.get(op.value)
            new_ops.append(StoreOp(op.value, f"r{r}" if r is not None else "r?"))
            release(i, op.value)
        else:
            for v in op.consumes:
                release(i, v)
            comp = comp_of.get(op.node, 0)
            if len(live) + comp > limit:
                overflow.append(
                    OverflowEvent(
                        i,
                        len(live) + comp,
                        limit,
                        f"EXEC {op.node} col={op.col} needs {comp} comp registers",
                    )
                )
            for v in op.produces:
                if v not in live:
                    claim(v, i, f"output {v} of {op.node}")
            new_ops.append(op)
    return replace(
        program,
        ops=tuple(new_ops),
        register_map=register_map,
        overflow=tuple(overflow),
    )
