"""Shared fixture builders and independent oracles for the test suite."""

import random

from goffish.model import Graph
from goffish.partitioning import (PartitionMap, build_meta_graph,
                                  build_partitions, partition_graph)
from goffish.runner import inject_attributes


def make_partitions(edges, assignment, directed=False, weights=None,
                    values=None, vertices=()):
    """Build validated partitions straight from an edge list and an explicit
    vertex -> partition assignment."""
    graph = Graph.from_edges("fixture", edges, directed=directed,
                             vertices=vertices)
    k = max(assignment.values()) + 1
    pmap = PartitionMap(k, dict(assignment))
    partitions = build_partitions(graph, pmap)
    edge_attrs = {}
    if weights is not None:
        edge_attrs["weight"] = symmetric_weights(weights, directed)
    vertex_attrs = {"value": values} if values is not None else {}
    inject_attributes(partitions, vertex_attrs, edge_attrs)
    return partitions


def symmetric_weights(weights, directed):
    if directed:
        return dict(weights)
    out = {}
    for (u, v), w in weights.items():
        out[(u, v)] = w
        out[(v, u)] = w
    return out


def paper_figure_partitions():
    """15 vertices, 2 partitions, three sub-graphs of 6/5/4 vertices forming
    a meta-star of diameter 2, with the max vertex in a leaf sub-graph whose
    vertex-level eccentricity is 5. Max-value flooding takes 4 supersteps in
    sub-graph mode and 7 in vertex emulation."""
    edges = [(0, 1), (0, 2), (0, 3), (0, 4), (0, 5),          # sub-graph A
             (6, 7), (7, 8), (7, 9), (7, 10),                 # sub-graph B
             (11, 12), (11, 13), (11, 14),                    # sub-graph C
             (0, 6), (0, 11)]                                 # remote edges
    assignment = {v: (0 if v < 6 else 1) for v in range(15)}
    return make_partitions(edges, assignment)


def er_graph(n, avg_degree, seed, directed=False, name="er"):
    """Erdos-Renyi style G(n, M) with M ~ n*avg_degree edges."""
    rng = random.Random(seed)
    target = max(1, int(n * avg_degree / (1 if directed else 2)))
    edges = set()
    attempts = 0
    while len(edges) < target and attempts < target * 20:
        u, v = rng.randrange(n), rng.randrange(n)
        attempts += 1
        if u == v:
            continue
        edges.add((u, v))
    return Graph.from_edges(name, sorted(edges), directed=directed,
                            vertices=range(n))


def ba_graph(n, attach, seed, directed=False, name="ba"):
    """Preferential attachment: each new vertex links to `attach` existing
    vertices chosen with probability proportional to degree."""
    rng = random.Random(seed)
    attach = min(attach, max(1, n - 1))
    edges = []
    repeated = list(range(min(attach, n)))
    for v in range(attach, n):
        targets = set()
        while len(targets) < min(attach, v):
            targets.add(rng.choice(repeated))
        for t in sorted(targets):
            edges.append((v, t))
            repeated.extend((v, t))
    return Graph.from_edges(name, edges, directed=directed, vertices=range(n))


def ensure_out_edges(graph):
    """Give every zero-out-degree vertex one edge; keeps PageRank fixtures
    free of dangling mass so no broadcast traffic is needed."""
    n = graph.num_vertices()
    adj = {v: list(ns) for v, ns in graph.adj.items()}
    for v in sorted(adj):
        if not adj[v]:
            adj[v].append((v + 1) % n)
    return Graph(graph.name, graph.directed, adj)


def random_weights(graph, seed, low=1, high=9):
    """Integer-valued float weights for every adjacency entry; symmetric for
    undirected graphs."""
    rng = random.Random(seed)
    weights = {}
    for u in sorted(graph.adj):
        for v in graph.adj[u]:
            key = (min(u, v), max(u, v)) if not graph.directed else (u, v)
            if key not in weights:
                weights[key] = float(rng.randint(low, high))
    return symmetric_weights(weights, graph.directed)


def partitions_for(graph, k, strategy="balanced-greedy", weights=None,
                   values=None):
    pmap = partition_graph(graph, k, strategy)
    partitions = build_partitions(graph, pmap)
    vertex_attrs = {"value": values} if values else {}
    edge_attrs = {"weight": weights} if weights else {}
    if vertex_attrs or edge_attrs:
        inject_attributes(partitions, vertex_attrs, edge_attrs)
    return partitions


def protocol_behaviors(k):
    """Behavior alphabet for protocol tests. Each behavior maps
    (worker, superstep, inbox_size) -> (list of target workers, halt)."""

    def quiet(w, s, n):
        return [], True

    def ping_next_once(w, s, n):
        return ([(w + 1) % k], True) if s == 1 else ([], True)

    def active_two_rounds(w, s, n):
        return ([(w + 1) % k], False) if s <= 2 else ([], True)

    def echo_forward(w, s, n):
        return ([(w + 1) % k], True) if n else ([], True)

    def self_send_once(w, s, n):
        return ([w], True) if s == 1 else ([], True)

    return [quiet, ping_next_once, active_two_rounds, echo_forward,
            self_send_once]


def simulate_bsp(k, behaviors):
    """Reference implementation of the halting semantics: one single-vertex
    sub-graph per worker, invoke when active or messaged, terminate when
    nothing is invocable. Returns (supersteps, invoked per step, sent per
    step)."""
    active = {w: True for w in range(k)}
    mail = {w: 0 for w in range(k)}
    superstep = 1
    invoked_counts, sent_counts = [], []
    while True:
        invoke = [w for w in range(k) if active[w] or mail[w]]
        if not invoke:
            return superstep - 1, invoked_counts, sent_counts
        incoming = {w: 0 for w in range(k)}
        sent = 0
        for w in invoke:
            targets, halt = behaviors[w](w, superstep, mail[w])
            for t in targets:
                incoming[t] += 1
                sent += 1
            active[w] = not halt
        mail = incoming
        invoked_counts.append(len(invoke))
        sent_counts.append(sent)
        superstep += 1
        if superstep > 500:
            raise RuntimeError("reference simulation did not terminate")


def expected_flood_supersteps(partitions, label_of=None):
    """Independent superstep oracle for the max-value/components floods.

    The winning label reaches a sub-graph after its hop distance to the
    nearest sub-graph already holding that label (multi-source BFS covers
    ties), the last change happens one superstep later, and one more
    superstep quiesces: 2 + max distance, maxed over meta-components.
    """
    from collections import deque

    meta = build_meta_graph(partitions)
    sg_index = {sg.id: sg for p in partitions for sg in p.subgraphs}
    label_of = label_of or (lambda v: v)
    worst = 0
    for comp in meta.components:
        labels = {sgid: max(label_of(v) for v in sg_index[sgid].vertices)
                  for sgid in comp}
        best = max(labels.values())
        dist = {sgid: 0 for sgid in comp if labels[sgid] == best}
        queue = deque(sorted(dist))
        while queue:
            u = queue.popleft()
            for w in meta.adj[u]:
                if w not in dist:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        worst = max(worst, max(dist[sgid] for sgid in comp))
    return 2 + worst
