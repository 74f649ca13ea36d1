"""Chip topology: a grid of routing switches whose links are gated by security blocks.

Node names are strings: ``in:R`` (west entry port of row R), ``n:R:C`` (the
switch at row R, column C) and ``out:R`` (east exit port of row R). Each
switch sends a packet RIGHT (east) on address bit 1 and LEFT (south, wrapping
to row 0) on bit 0. Leaving the east column eastward exits the chip.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from . import block_model as bm
from .types import BlockId

Edge = Tuple[str, str]
States = Mapping[int, bm.SecurityBlockState]


class TopologyError(Exception):
    pass


class DisconnectedTopology(TopologyError):
    pass


class MalformedPacket(ValueError):
    pass


class UnknownBlock(KeyError):
    pass


def node(r: int, c: int) -> str:
    return f"n:{r}:{c}"


def entry(r: int) -> str:
    return f"in:{r}"


def exit_port(r: int) -> str:
    return f"out:{r}"


@dataclass(frozen=True)
class ChipTopology:
    chip_id: int
    rows: int
    cols: int
    edges: Tuple[Edge, ...]
    gate_map: Dict[Edge, Tuple[BlockId, ...]]
    entries: Tuple[str, ...]
    exits: Tuple[str, ...]

    @property
    def block_ids(self) -> List[BlockId]:
        return sorted(b for gates in self.gate_map.values() for b in gates)

    def block_edge(self, block: BlockId) -> Edge:
        for e, gates in self.gate_map.items():
            if block in gates:
                return e
        raise UnknownBlock(block)

    def host_node(self, block: BlockId) -> str:
        """The switch whose essential logic the block sits next to."""
        src, dst = self.block_edge(block)
        return dst if src.startswith("in:") else src

    def successors(self, n: str) -> List[str]:
        return [d for s, d in self.edges if s == n]


def grid_edges(rows: int, cols: int) -> List[Edge]:
    edges: List[Edge] = []
    for r in range(rows):
        edges.append((entry(r), node(r, 0)))
    for r in range(rows):
        for c in range(cols):
            edges.append((node(r, c), node(r, c + 1) if c + 1 < cols else exit_port(r)))
            if rows > 1:
                edges.append((node(r, c), node((r + 1) % rows, c)))
    return edges


def build_topology(rows: int, cols: int, blocks_per_edge: int, rng_seed: int, chip_id: int = 0,
                   ungated: Iterable[Edge] = (), gate_counts: Optional[Mapping[Edge, int]] = None) -> ChipTopology:
    """Grid with ``blocks_per_edge`` distinct blocks on every link.

    ``ungated`` and ``gate_counts`` override the count on chosen edges, which is
    how planted flaws and random gate maps are made. Block indices are assigned
    in a seeded random order so placement is not trivially row-major.
    """
    if rows < 1 or cols < 1:
        raise TopologyError("rows and cols must be >= 1")
    if blocks_per_edge < 0:
        raise TopologyError("blocks_per_edge must be >= 0")
    edges = grid_edges(rows, cols)
    counts = {e: blocks_per_edge for e in edges}
    for e in ungated:
        if e not in counts:
            raise TopologyError(f"no such edge {e}")
        counts[e] = 0
    if gate_counts:
        for e, n in gate_counts.items():
            if e not in counts:
                raise TopologyError(f"no such edge {e}")
            counts[e] = n
    total = sum(counts.values())
    order = np.random.Generator(np.random.PCG64(rng_seed)).permutation(total)
    gate_map: Dict[Edge, Tuple[BlockId, ...]] = {}
    i = 0
    for e in edges:
        gate_map[e] = tuple(BlockId(chip_id, int(order[i + j])) for j in range(counts[e]))
        i += counts[e]
    return ChipTopology(chip_id, rows, cols, tuple(edges), gate_map,
                        tuple(entry(r) for r in range(rows)), tuple(exit_port(r) for r in range(rows)))


# -- audit ----------------------------------------------------------------------


@dataclass(frozen=True)
class AuditReport:
    min_gates_on_any_path: int
    ungated_edges: Tuple[Edge, ...]
    weakest_path: Tuple[str, ...]

    @property
    def clean(self) -> bool:
        return not self.ungated_edges


def _reachable_edges(topology: ChipTopology) -> set:
    """Edges lying on at least one entry-to-exit walk."""
    fwd = set(topology.entries)
    stack = list(fwd)
    while stack:
        n = stack.pop()
        for s in topology.successors(n):
            if s not in fwd:
                fwd.add(s)
                stack.append(s)
    preds: Dict[str, List[str]] = {}
    for s, d in topology.edges:
        preds.setdefault(d, []).append(s)
    back = set(topology.exits)
    stack = list(back)
    while stack:
        n = stack.pop()
        for p in preds.get(n, ()):
            if p not in back:
                back.add(p)
                stack.append(p)
    return {e for e in topology.edges if e[0] in fwd and e[1] in back}


def audit_bypass(topology: ChipTopology) -> AuditReport:
    """Minimum number of gated links over all entry-to-exit paths (Dijkstra)."""
    weight = {e: (1 if topology.gate_map.get(e) else 0) for e in topology.edges}
    adj: Dict[str, List[Tuple[str, int]]] = {}
    for (s, d), w in weight.items():
        adj.setdefault(s, []).append((d, w))
    dist: Dict[str, int] = {}
    prev: Dict[str, Optional[str]] = {}
    heap = [(0, e, None) for e in sorted(topology.entries)]
    while heap:
        d, n, p = heapq.heappop(heap)
        if n in dist:
            continue
        dist[n] = d
        prev[n] = p
        for nxt, w in adj.get(n, ()):
            if nxt not in dist:
                heapq.heappush(heap, (d + w, nxt, n))
    reached = [x for x in topology.exits if x in dist]
    if not reached:
        raise DisconnectedTopology(f"chip {topology.chip_id}: no exit reachable from any entry")
    best = min(reached, key=lambda x: (dist[x], x))
    path = [best]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    on_paths = _reachable_edges(topology)
    ungated = tuple(e for e in topology.edges if e in on_paths and not topology.gate_map.get(e))
    return AuditReport(dist[best], ungated, tuple(reversed(path)))


def enumerate_paths(topology: ChipTopology) -> Iterable[Tuple[str, ...]]:
    """Every simple entry-to-exit path, by depth-first search."""
    succ: Dict[str, List[str]] = {}
    for s, d in topology.edges:
        succ.setdefault(s, []).append(d)
    exits = set(topology.exits)
    for start in topology.entries:
        stack = [(start, (start,))]
        while stack:
            n, path = stack.pop()
            if n in exits:
                yield path
                continue
            for d in succ.get(n, ()):
                if d not in path:
                    stack.append((d, path + (d,)))


def brute_force_min_gates(topology: ChipTopology) -> int:
    best = None
    for path in enumerate_paths(topology):
        g = sum(1 for e in zip(path, path[1:]) if topology.gate_map.get(e))
        if best is None or g < best:
            best = g
    if best is None:
        raise DisconnectedTopology(f"chip {topology.chip_id}")
    return best


def dump_topology(topology: ChipTopology) -> str:
    lines = [f"CHIP {topology.chip_id} ROWS {topology.rows} COLS {topology.cols}"]
    for e in topology.edges:
        ids = ",".join(str(b.index) for b in topology.gate_map.get(e, ()))
        lines.append(f"EDGE {e[0]} {e[1]} GATES {ids}")
    return "\n".join(lines) + "\n"


# -- routing --------------------------------------------------------------------


@dataclass(frozen=True)
class Packet:
    address_bits: Tuple[int, ...]
    payload: bytes = b""
    entry_row: int = 0


@dataclass(frozen=True)
class Delivered:
    exit_port: int
    path: Tuple[str, ...]
    faulty: bool = False


@dataclass(frozen=True)
class Stalled:
    edge: Edge
    block: BlockId


def _next_hop(topology: ChipTopology, n: str, bit: int) -> str:
    _, r, c = n.split(":")
    r, c = int(r), int(c)
    if bit:
        return node(r, c + 1) if c + 1 < topology.cols else exit_port(r)
    if topology.rows == 1:
        raise MalformedPacket("LEFT turn on a single-row chip")
    return node((r + 1) % topology.rows, c)


def _traverse(states: Dict[int, bm.SecurityBlockState], topology: ChipTopology, e: Edge, bit: int):
    for b in topology.gate_map.get(e, ()):
        states[b.index], route = bm.execute_gated(states[b.index], bit)
        if route is bm.HALT:
            return Stalled(e, b)
    return None


def route_packet(topology: ChipTopology, block_states: States, packet: Packet,
                 damaged: FrozenSet[str] = frozenset()):
    """Move a packet hop by hop; every gating block on a traversed link executes once.

    Returns ``(new_states, Delivered | Stalled)``.
    """
    if not 0 <= packet.entry_row < topology.rows:
        raise MalformedPacket("entry row out of range")
    states = dict(block_states)
    here = entry(packet.entry_row)
    first = node(packet.entry_row, 0)
    stall = _traverse(states, topology, (here, first), 1)
    if stall:
        return states, stall
    path = [here, first]
    here = first
    bits = iter(packet.address_bits)
    while not here.startswith("out:"):
        try:
            bit = next(bits) & 1
        except StopIteration:
            raise MalformedPacket(f"address exhausted at {here}") from None
        nxt = _next_hop(topology, here, bit)
        stall = _traverse(states, topology, (here, nxt), bit)
        if stall:
            return states, stall
        path.append(nxt)
        here = nxt
    faulty = any(n in damaged for n in path)
    return states, Delivered(int(here.split(":")[1]), tuple(path), faulty)


def path_to_address(path: Sequence[str]) -> Tuple[int, ...]:
    """Address bits that steer a packet along ``path`` (entry port first)."""
    bits = []
    for a, b in zip(path[1:], path[2:]):
        _, r1, c1 = a.split(":")
        if b.startswith("out:"):
            bits.append(1)
            continue
        _, r2, c2 = b.split(":")
        bits.append(1 if c2 != c1 else 0)
    return tuple(bits)


# -- physical edits ---------------------------------------------------------------


@dataclass(frozen=True)
class EditModel:
    p_success: float = 0.95
    p_damage: float = 0.1

    def __post_init__(self):
        for p in (self.p_success, self.p_damage):
            if not 0.0 <= p <= 1.0:
                raise ValueError("edit probabilities must lie in [0, 1]")


@dataclass(frozen=True)
class EditCampaignState:
    edits_attempted: int = 0
    blocks_bypassed: FrozenSet[BlockId] = frozenset()
    collateral_damage: FrozenSet[str] = frozenset()


def attempt_circuit_edit(topology: ChipTopology, block_states: States, campaign: EditCampaignState,
                         block_id: BlockId, edit_model: EditModel, rng: np.random.Generator):
    """One FIB edit on one block: maybe bypass it, maybe destroy its host switch.

    Returns ``(new_states, new_campaign)``.
    """
    if block_id.index not in block_states or block_id.chip_id != topology.chip_id:
        raise UnknownBlock(block_id)
    success = rng.random() < edit_model.p_success
    damage = rng.random() < edit_model.p_damage
    states = dict(block_states)
    bypassed = campaign.blocks_bypassed
    collateral = campaign.collateral_damage
    if success:
        states[block_id.index] = bm.disable_by_edit(states[block_id.index])
        bypassed = bypassed | {block_id}
    if damage:
        collateral = collateral | {topology.host_node(block_id)}
    return states, replace(campaign, edits_attempted=campaign.edits_attempted + 1,
                           blocks_bypassed=bypassed, collateral_damage=collateral)


# -- chip container -----------------------------------------------------------------


@dataclass
class Chip:
    """Topology plus the current block states; owned by one scenario driver."""

    topology: ChipTopology
    states: Dict[int, bm.SecurityBlockState]
    batch_id: int = 0
    damaged: FrozenSet[str] = frozenset()

    @property
    def chip_id(self) -> int:
        return self.topology.chip_id

    def route(self, packet: Packet):
        self.states, result = route_packet(self.topology, self.states, packet, self.damaged)
        return result

    def sweep(self) -> bool:
        """Exercise every block once (one unit of workload). True if any block halts."""
        halted = False
        for idx in sorted(self.states):
            self.states[idx], route = bm.execute_gated(self.states[idx], 1)
            halted |= route is bm.HALT
        return halted


def workload_completes(chip: Chip, packet: Packet) -> bool:
    """Whether the packet is delivered intact, without mutating ``chip``."""
    _, result = route_packet(chip.topology, chip.states, packet, chip.damaged)
    return isinstance(result, Delivered) and not result.faulty
