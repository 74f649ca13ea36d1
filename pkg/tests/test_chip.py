import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from offswitch import block_model as bm
from offswitch import chip as ch
from offswitch import crypto
from offswitch.types import BlockKind

KEY = crypto.symmetric_key_from_seed(0, 0)


def states_for(topo, allowance=10):
    out = {}
    for b in topo.block_ids:
        s = bm.power_on(bm.BlockConfig(b, BlockKind.SYMMETRIC_MAC, KEY))
        out[b.index] = dataclasses.replace(s, allowance=allowance)
    return out


class TestTopology:
    def test_grid_edge_count(self):
        # entries + east links + south links
        assert len(ch.grid_edges(3, 4)) == 3 + 12 + 12
        assert len(ch.grid_edges(1, 4)) == 1 + 4

    def test_blocks_distinct_and_dense(self):
        topo = ch.build_topology(3, 3, 2, rng_seed=1)
        idx = sorted(b.index for b in topo.block_ids)
        assert idx == list(range(len(topo.edges) * 2))

    def test_placement_is_seeded(self):
        a = ch.build_topology(3, 3, 2, rng_seed=1)
        assert a == ch.build_topology(3, 3, 2, rng_seed=1)
        assert a.gate_map != ch.build_topology(3, 3, 2, rng_seed=2).gate_map

    def test_unknown_edge(self):
        with pytest.raises(ch.TopologyError):
            ch.build_topology(2, 2, 1, 0, ungated=[("n:0:0", "n:5:5")])

    def test_host_node(self):
        topo = ch.build_topology(2, 2, 1, 0)
        for e, gates in topo.gate_map.items():
            host = topo.host_node(gates[0])
            assert host in e and host.startswith("n:")


class TestAudit:
    def test_uniform_gating(self):
        topo = ch.build_topology(3, 3, 2, 0)
        rep = ch.audit_bypass(topo)
        assert rep.clean
        # entry link + three eastward hops, two blocks each
        assert rep.min_gates_on_any_path == 4
        assert rep.weakest_path[0].startswith("in:") and rep.weakest_path[-1].startswith("out:")

    def test_planted_ungated_edge(self):
        bad = ("n:1:1", "n:1:2")
        topo = ch.build_topology(3, 3, 2, 0, ungated=[bad])
        rep = ch.audit_bypass(topo)
        assert bad in rep.ungated_edges
        assert rep.min_gates_on_any_path == 3

    def test_fully_ungated_path(self):
        path_edges = [("in:0", "n:0:0"), ("n:0:0", "n:0:1"), ("n:0:1", "out:0")]
        topo = ch.build_topology(2, 2, 1, 0, ungated=path_edges)
        assert ch.audit_bypass(topo).min_gates_on_any_path == 0
        assert ch.brute_force_min_gates(topo) == 0

    def test_disconnected(self):
        topo = ch.build_topology(1, 2, 1, 0)
        cut = dataclasses.replace(topo, edges=tuple(e for e in topo.edges if e[1] != "out:0"))
        with pytest.raises(ch.DisconnectedTopology):
            ch.audit_bypass(cut)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32))
    def test_matches_path_enumeration(self, rows, cols, seed):
        rng = np.random.Generator(np.random.PCG64(seed))
        edges = ch.grid_edges(rows, cols)
        counts = {e: int(rng.integers(0, 3)) for e in edges}
        topo = ch.build_topology(rows, cols, 1, seed, gate_counts=counts)
        assert ch.audit_bypass(topo).min_gates_on_any_path == ch.brute_force_min_gates(topo)

    def test_dump_format(self):
        text = ch.dump_topology(ch.build_topology(1, 1, 1, 0))
        lines = text.splitlines()
        assert lines[0] == "CHIP 0 ROWS 1 COLS 1"
        assert all(line.startswith("EDGE ") and " GATES " in line for line in lines[1:])


class TestRouting:
    def test_hand_traced_2x2(self):
        topo = ch.build_topology(2, 2, 1, 0)
        states, result = ch.route_packet(topo, states_for(topo), ch.Packet((0, 1, 1), entry_row=0))
        assert result == ch.Delivered(1, ("in:0", "n:0:0", "n:1:0", "n:1:1", "out:1"))
        used = {b.index for e in zip(result.path, result.path[1:]) for b in topo.gate_map[e]}
        for idx, s in states.items():
            assert s.allowance == (9 if idx in used else 10)

    def test_stall_at_unlicensed_block(self):
        topo = ch.build_topology(2, 2, 1, 0)
        states = states_for(topo)
        victim = topo.gate_map[("n:0:0", "n:0:1")][0]
        states[victim.index] = dataclasses.replace(states[victim.index], allowance=0)
        _, result = ch.route_packet(topo, states, ch.Packet((1, 1)))
        assert result == ch.Stalled(("n:0:0", "n:0:1"), victim)

    def test_address_exhausted(self):
        topo = ch.build_topology(2, 2, 1, 0)
        with pytest.raises(ch.MalformedPacket):
            ch.route_packet(topo, states_for(topo), ch.Packet((1,)))

    def test_left_on_single_row(self):
        topo = ch.build_topology(1, 2, 1, 0)
        with pytest.raises(ch.MalformedPacket):
            ch.route_packet(topo, states_for(topo), ch.Packet((0,)))

    def test_path_to_address_roundtrip(self):
        topo = ch.build_topology(3, 3, 1, 0)
        for path in list(ch.enumerate_paths(topo))[:200]:
            pkt = ch.Packet(ch.path_to_address(path), entry_row=int(path[0].split(":")[1]))
            _, result = ch.route_packet(topo, states_for(topo), pkt)
            assert result.path == path

    def test_damage_makes_output_faulty(self):
        topo = ch.build_topology(2, 2, 1, 0)
        chip = ch.Chip(topo, states_for(topo), damaged=frozenset({"n:0:1"}))
        assert not ch.workload_completes(chip, ch.Packet((1, 1)))
        assert ch.workload_completes(chip, ch.Packet((0, 1, 1)))

    def test_sweep_halts_when_any_block_empty(self):
        topo = ch.build_topology(1, 1, 1, 0)
        chip = ch.Chip(topo, states_for(topo, allowance=1))
        assert chip.sweep() is False
        assert chip.sweep() is True


class TestEdits:
    def test_idealized_edit_disables(self):
        topo = ch.build_topology(2, 2, 1, 0)
        b = topo.block_ids[0]
        states, camp = ch.attempt_circuit_edit(topo, states_for(topo, 0), ch.EditCampaignState(), b,
                                               ch.EditModel(1.0, 0.0), np.random.Generator(np.random.PCG64(0)))
        assert states[b.index].disabled_by_edit
        assert camp.blocks_bypassed == {b} and not camp.collateral_damage

    def test_clumsy_edit_damages_host(self):
        topo = ch.build_topology(2, 2, 1, 0)
        b = topo.block_ids[0]
        _, camp = ch.attempt_circuit_edit(topo, states_for(topo, 0), ch.EditCampaignState(), b,
                                          ch.EditModel(0.0, 1.0), np.random.Generator(np.random.PCG64(0)))
        assert not camp.blocks_bypassed
        assert camp.collateral_damage == {topo.host_node(b)}

    def test_unknown_block(self):
        topo = ch.build_topology(2, 2, 1, 0)
        other = ch.build_topology(2, 2, 1, 0, chip_id=9).block_ids[0]
        with pytest.raises(ch.UnknownBlock):
            ch.attempt_circuit_edit(topo, states_for(topo), ch.EditCampaignState(), other, ch.EditModel(),
                                    np.random.Generator(np.random.PCG64(0)))

    def test_edit_model_bounds(self):
        with pytest.raises(ValueError):
            ch.EditModel(1.2, 0.0)
