import math
import random

import pytest

from goffish import oracles
from goffish.errors import GraphParseError, PartitioningError
from goffish.model import Graph, validate_partition
from goffish.partitioning import (PartitionMap, build_meta_graph,
                                  build_partitions, discover_subgraphs,
                                  partition_graph, symmetrize_partitions,
                                  vertex_centric_emulation)
from support import ba_graph, er_graph, make_partitions, paper_figure_partitions


def cycle_graph(n):
    return Graph.from_edges("cycle", [(i, (i + 1) % n) for i in range(n)])


# ---------------------------------------------------------------------------
# partition_graph

def test_k1_keeps_everything_in_partition_zero():
    g = cycle_graph(4)
    for strategy in ("hash", "balanced-greedy"):
        pmap = partition_graph(g, 1, strategy)
        assert set(pmap.assignment.values()) == {0}
        assert pmap.edge_cut == 0


def test_balanced_greedy_four_cycle_split():
    g = cycle_graph(4)
    pmap = partition_graph(g, 2, "balanced-greedy")
    assert sorted(pmap.sizes) == [2, 2]
    # any balanced split of a 4-cycle cuts exactly 2 edges
    assert pmap.edge_cut == 2


def test_balanced_greedy_respects_cap():
    for n, k in [(10, 3), (50, 4), (17, 5)]:
        g = er_graph(n, 3, seed=n, name=f"er{n}")
        pmap = partition_graph(g, k, "balanced-greedy", slack=0.05)
        cap = max(math.ceil(n / k), int(math.ceil(n / k) * 1.05))
        assert max(pmap.sizes) <= cap
        assert sum(pmap.sizes) == n


def test_hash_is_deterministic_per_vertex():
    g = er_graph(40, 3, seed=1)
    a = partition_graph(g, 4, "hash").assignment
    b = partition_graph(g, 4, "hash").assignment
    assert a == b


def test_partition_graph_rejects_bad_k():
    g = cycle_graph(4)
    with pytest.raises(PartitioningError):
        partition_graph(g, 0)
    with pytest.raises(PartitioningError):
        partition_graph(g, 5)  # k > vertex count


def test_imported_map_round_trip(tmp_path):
    g = cycle_graph(6)
    pmap = partition_graph(g, 3, "balanced-greedy")
    path = tmp_path / "map.tsv"
    pmap.save(path)
    again = partition_graph(g, 3, "imported", map_file=path)
    assert again.assignment == pmap.assignment


def test_imported_map_errors_carry_line_numbers(tmp_path):
    g = cycle_graph(4)
    bad = tmp_path / "bad.tsv"
    bad.write_text("0\t0\n1\tnope\n")
    with pytest.raises(GraphParseError) as info:
        partition_graph(g, 2, "imported", map_file=bad)
    assert info.value.line_no == 2

    partial = tmp_path / "partial.tsv"
    partial.write_text("0\t0\n1\t1\n")
    with pytest.raises(PartitioningError):
        partition_graph(g, 2, "imported", map_file=partial)


# ---------------------------------------------------------------------------
# discovery

def test_single_component_single_subgraph():
    parts = make_partitions([(0, 1), (1, 2)], {0: 0, 1: 0, 2: 0})
    assert len(parts[0].subgraphs) == 1


def test_paper_figure_subgraph_sizes():
    parts = paper_figure_partitions()
    sizes = sorted(len(sg.vertices) for p in parts for sg in p.subgraphs)
    assert sizes == [4, 5, 6]
    assert len(parts) == 2


def test_isolated_vertices_become_singletons():
    parts = make_partitions([], {v: 0 for v in range(5)}, vertices=range(5))
    assert len(parts[0].subgraphs) == 5
    assert all(len(sg.vertices) == 1 for sg in parts[0].subgraphs)


def test_discovery_is_idempotent():
    parts = paper_figure_partitions()
    for p in parts:
        again = discover_subgraphs(p)
        assert [sg.id for sg in again] == [sg.id for sg in p.subgraphs]
        assert [sg.vertices for sg in again] == [sg.vertices for sg in p.subgraphs]


def test_pipeline_always_validates():
    rng = random.Random(42)
    for trial in range(25):
        n = rng.randint(2, 120)
        directed = rng.random() < 0.5
        if rng.random() < 0.5:
            g = er_graph(n, rng.uniform(0.5, 4), seed=trial, directed=directed)
        else:
            g = ba_graph(n, rng.randint(1, 3), seed=trial, directed=directed)
        k = min(n, rng.choice([1, 2, 3, 5, 8]))
        strategy = rng.choice(["hash", "balanced-greedy"])
        parts = build_partitions(g, partition_graph(g, k, strategy))
        for p in parts:
            assert validate_partition(p, peers=parts) == [], \
                f"trial {trial} strategy {strategy}"
        total = sum(len(sg.vertices) for p in parts for sg in p.subgraphs)
        assert total == n
        # sub-graph count is bounded below by the true component count
        subgraph_count = sum(len(p.subgraphs) for p in parts)
        assert subgraph_count >= len(oracles.bfs_components(g.adj))


# ---------------------------------------------------------------------------
# meta graph

def test_meta_graph_single_subgraph():
    parts = make_partitions([(0, 1)], {0: 0, 1: 0})
    assert build_meta_graph(parts).diameter == 0


def test_meta_graph_chain_of_subgraphs():
    # four 1-vertex sub-graphs in a row, alternating partitions
    edges = [(0, 1), (1, 2), (2, 3)]
    parts = make_partitions(edges, {0: 0, 1: 1, 2: 0, 3: 1})
    meta = build_meta_graph(parts)
    assert meta.diameter == 3


def test_meta_graph_matches_bfs_oracle():
    rng = random.Random(7)
    for trial in range(15):
        n = rng.randint(4, 80)
        g = er_graph(n, rng.uniform(1, 4), seed=100 + trial)
        k = min(n, 4)
        parts = build_partitions(g, partition_graph(g, k, "hash"))
        meta = build_meta_graph(parts)
        assert meta.diameter == oracles.diameter(meta.adj)


def test_paper_figure_meta_diameter():
    assert build_meta_graph(paper_figure_partitions()).diameter == 2


# ---------------------------------------------------------------------------
# emulation and symmetrization

def test_emulation_every_subgraph_is_one_vertex():
    g = cycle_graph(6)
    pmap = partition_graph(g, 2, "balanced-greedy")
    parts = vertex_centric_emulation(g, pmap)
    for p in parts:
        assert all(len(sg.vertices) == 1 for sg in p.subgraphs)
        assert validate_partition(p) == []  # degenerate mode allows local refs
    # every edge is remote in both directions
    remote_total = sum(sg.num_remote_edges() for p in parts for sg in p.subgraphs)
    assert remote_total == 2 * g.num_edges()


def test_emulation_keeps_self_loops_local():
    g = Graph.from_edges("loop", [(0, 0), (0, 1)])
    pmap = PartitionMap(1, {0: 0, 1: 0})
    parts = vertex_centric_emulation(g, pmap)
    sg0 = next(sg for sg in parts[0].subgraphs if sg.has_vertex(0))
    assert sg0.local_adj[0] == [0]
    assert [ref.vertex for ref in sg0.remote[0]] == [1]


def test_symmetrize_adds_reverse_remote_edges():
    parts = make_partitions([(0, 1), (1, 2)], {0: 0, 1: 0, 2: 1},
                            directed=True)
    sym = symmetrize_partitions(parts)
    # reverse ref 2 -> 1 must now exist in partition 1
    sg2 = sym[1].subgraphs[0]
    assert [ref.vertex for ref in sg2.remote[2]] == [1]
    # sub-graph ids and memberships unchanged
    for before, after in zip(parts, sym):
        assert [sg.id for sg in before.subgraphs] == [sg.id for sg in after.subgraphs]
    for p in sym:
        assert validate_partition(p, peers=sym) == []
