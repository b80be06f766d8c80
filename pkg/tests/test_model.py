import pytest

from goffish.model import (Graph, RemoteRef, Subgraph, make_subgraph_id,
                           neighbors, subgraph_neighbors, subgraph_partition,
                           validate_partition)
from support import make_partitions, paper_figure_partitions


def find_subgraph_of(partitions, vertex):
    for p in partitions:
        for sg in p.subgraphs:
            if sg.has_vertex(vertex):
                return sg
    raise AssertionError(f"vertex {vertex} not found")


def test_subgraph_id_encodes_partition():
    sgid = make_subgraph_id(3, 7)
    assert subgraph_partition(sgid) == 3


def test_neighbors_isolated_vertex():
    parts = make_partitions([], {0: 0}, vertices=[0])
    sg = parts[0].subgraphs[0]
    assert neighbors(sg, 0) == []


def test_neighbors_triangle_order():
    parts = make_partitions([(0, 1), (1, 2), (0, 2)], {0: 0, 1: 0, 2: 0})
    sg = parts[0].subgraphs[0]
    assert neighbors(sg, 0) == [1, 2]
    assert neighbors(sg, 2) == [0, 1]


def test_neighbors_mixes_local_then_remote():
    # 0-1 local, 0-5 crosses into partition 1
    parts = make_partitions([(0, 1), (0, 5)], {0: 0, 1: 0, 5: 1})
    sg = find_subgraph_of(parts, 0)
    result = neighbors(sg, 0)
    assert result[0] == 1
    assert isinstance(result[1], RemoteRef)
    assert result[1].vertex == 5
    assert result[1].partition == 1
    # determinism across calls
    assert neighbors(sg, 0) == result


def test_neighbors_unknown_vertex():
    parts = make_partitions([(0, 1)], {0: 0, 1: 0})
    with pytest.raises(KeyError):
        neighbors(parts[0].subgraphs[0], 99)


def test_subgraph_neighbors_empty_without_remote_edges():
    parts = make_partitions([(0, 1)], {0: 0, 1: 0})
    assert subgraph_neighbors(parts[0].subgraphs[0]) == set()


def test_subgraph_neighbors_paper_figure():
    # the hub sub-graph touches both leaf sub-graphs; leaves only the hub
    parts = paper_figure_partitions()
    hub = find_subgraph_of(parts, 0)
    leaf_b = find_subgraph_of(parts, 6)
    leaf_c = find_subgraph_of(parts, 11)
    assert subgraph_neighbors(hub) == {leaf_b.id, leaf_c.id}
    assert subgraph_neighbors(leaf_b) == {hub.id}
    assert subgraph_neighbors(leaf_c) == {hub.id}
    for p in parts:
        for sg in p.subgraphs:
            assert sg.id not in subgraph_neighbors(sg)


def test_subgraph_neighbors_dedups_parallel_remote_edges():
    # two vertices of partition 0 both connect to vertex 9 in partition 1
    parts = make_partitions([(0, 1), (0, 9), (1, 9)], {0: 0, 1: 0, 9: 1})
    sg = find_subgraph_of(parts, 0)
    assert sg.num_remote_edges() == 2
    assert len(subgraph_neighbors(sg)) == 1


def test_validate_clean_partitions():
    for p in paper_figure_partitions():
        assert validate_partition(p) == []


def test_validate_flags_mergeable_subgraphs():
    parts = make_partitions([(0, 1), (2, 3)], {v: 0 for v in range(4)})
    p = parts[0]
    # hand-break discovery: split one component into two "sub-graphs"
    a = Subgraph(make_subgraph_id(0, 0), 0, [0], {0: [1]}, {})
    b = Subgraph(make_subgraph_id(0, 1), 0, [1], {1: [0]}, {})
    p.subgraphs = [a, b, p.subgraphs[1]]
    kinds = {v.kind for v in validate_partition(p)}
    assert "mergeable-subgraphs" in kinds


def test_validate_flags_remote_target_is_local():
    parts = make_partitions([(0, 1), (2, 3)], {0: 0, 1: 0, 2: 0, 3: 0})
    p = parts[0]
    sg = p.subgraphs[0]
    sg.remote = {0: [RemoteRef(1, make_subgraph_id(1, 0), 2)]}
    kinds = {v.kind for v in validate_partition(p)}
    assert "remote-target-is-local" in kinds


def test_validate_flags_disconnected_subgraph():
    parts = make_partitions([(0, 1)], {0: 0, 1: 0, 5: 0}, vertices=[5])
    p = parts[0]
    merged = Subgraph(make_subgraph_id(0, 0), 0, [0, 1, 5],
                      {0: [1], 1: [0], 5: []}, {})
    p.subgraphs = [merged]
    kinds = {v.kind for v in validate_partition(p)}
    assert "disconnected-subgraph" in kinds


def test_validate_cross_partition_refs():
    parts = paper_figure_partitions()
    for p in parts:
        assert validate_partition(p, peers=parts) == []
    # now point a ref at a vertex the target sub-graph does not hold
    sg = find_subgraph_of(parts, 0)
    target = sg.remote[0][0]
    sg.remote[0] = [RemoteRef(target.partition, target.subgraph, 9999)]
    kinds = {v.kind for v in validate_partition(parts[0], peers=parts)}
    assert "remote-ref-dangling" in kinds


def test_vertex_partition_coverage_counts():
    parts = paper_figure_partitions()
    total = sum(len(sg.vertices) for p in parts for sg in p.subgraphs)
    assert total == 15
    for p in parts:
        per_partition = sum(len(sg.vertices) for sg in p.subgraphs)
        assert per_partition == len(p.vertices)


def test_graph_edge_count_undirected_vs_directed():
    g = Graph.from_edges("g", [(0, 1), (1, 2), (2, 2)])
    assert g.num_edges() == 3  # self-loop counted once
    d = Graph.from_edges("d", [(0, 1), (1, 0)], directed=True)
    assert d.num_edges() == 2
    assert d.as_undirected().num_edges() == 1


def test_in_adj_index():
    parts = make_partitions([(0, 1), (0, 2)], {0: 0, 1: 0, 2: 0},
                            directed=True)
    sg = parts[0].subgraphs[0]
    assert sg.in_adj() == {0: [], 1: [0], 2: [0]}
    assert sg.out_degree(0) == 2
    assert sg.out_degree(1) == 0
