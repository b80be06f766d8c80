"""k-way vertex partitioning, sub-graph discovery, and meta-graph diagnostics.

Strategies:
  hash            deterministic multiplicative hash of the vertex id.
  balanced-greedy BFS-grown regions seeded round-robin from the
                  highest-degree unassigned vertices, capped near v/k.
  imported        read an external map file (one "vertex<TAB>partition" per
                  line, '#' comments), e.g. produced by an offline tool.

Sub-graphs are discovered with union-find over a partition's local edges and
numbered by their smallest contained vertex id, so discovery is deterministic
and idempotent.
"""

import math
from collections import deque
from dataclasses import dataclass, field

from .errors import GraphParseError, PartitioningError
from .model import Graph, Partition, RemoteRef, Subgraph, make_subgraph_id

STRATEGIES = ("hash", "balanced-greedy", "imported")

_KNUTH = 2654435761  # multiplicative hash constant


@dataclass
class PartitionMap:
    """Assignment of every vertex to a partition id in [0, k)."""

    k: int
    assignment: dict
    edge_cut: int = 0
    sizes: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"# partitions: {self.k}\n")
            for v in sorted(self.assignment):
                fh.write(f"{v}\t{self.assignment[v]}\n")

    @classmethod
    def parse_file(cls, path, k):
        assignment = {}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, 1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                parts = line.split()
                if len(parts) != 2:
                    raise GraphParseError(path, line_no,
                                          f"expected 'vertex partition', got {line!r}")
                try:
                    v, pid = int(parts[0]), int(parts[1])
                except ValueError:
                    raise GraphParseError(path, line_no,
                                          f"non-integer field in {line!r}") from None
                if not 0 <= pid < k:
                    raise GraphParseError(path, line_no,
                                          f"partition {pid} outside [0, {k})")
                if v in assignment:
                    raise GraphParseError(path, line_no, f"vertex {v} assigned twice")
                assignment[v] = pid
        return cls(k, assignment)


class UnionFind:
    """Union-find with path compression; roots are minimal members."""

    def __init__(self, items):
        self.parent = {x: x for x in items}

    def find(self, x):
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if rb < ra:
            ra, rb = rb, ra
        self.parent[rb] = ra

    def groups(self):
        out = {}
        for x in self.parent:
            out.setdefault(self.find(x), []).append(x)
        return list(out.values())


def partition_graph(graph: Graph, k: int, strategy="hash", slack=0.05,
                    map_file=None) -> PartitionMap:
    """Assign every vertex to one of k partitions using the named strategy."""
    v = graph.num_vertices()
    if k < 1:
        raise PartitioningError(f"k must be >= 1, got {k}")
    if v == 0:
        raise PartitioningError("graph is empty")
    if k > v:
        raise PartitioningError(f"k={k} exceeds vertex count {v}")

    if strategy == "hash":
        assignment = {vid: ((vid * _KNUTH) & 0xFFFFFFFF) % k for vid in graph.adj}
    elif strategy == "balanced-greedy":
        assignment = _balanced_greedy(graph, k, slack)
    elif strategy == "imported":
        if map_file is None:
            raise PartitioningError("imported strategy requires a map file")
        pmap = PartitionMap.parse_file(map_file, k)
        missing = graph.adj.keys() - pmap.assignment.keys()
        if missing:
            raise PartitioningError(
                f"map file covers {len(pmap.assignment)} vertices; "
                f"{len(missing)} graph vertices missing (e.g. {sorted(missing)[:5]})")
        unknown = pmap.assignment.keys() - graph.adj.keys()
        if unknown:
            raise PartitioningError(
                f"map file names vertices not in the graph (e.g. {sorted(unknown)[:5]})")
        assignment = pmap.assignment
    else:
        raise PartitioningError(f"unknown strategy {strategy!r}")

    return finish_map(graph, k, assignment)


def finish_map(graph, k, assignment) -> PartitionMap:
    """Wrap a complete assignment with edge-cut and balance statistics."""
    sizes = [0] * k
    for pid in assignment.values():
        sizes[pid] += 1

    cut = 0
    for u, ns in graph.adj.items():
        for w in ns:
            if assignment[u] != assignment[w]:
                cut += 1
    if not graph.directed:
        cut //= 2

    warnings = []
    empties = [pid for pid, size in enumerate(sizes) if size == 0]
    if empties:
        wcc = len(_components(list(graph.adj), graph.adj))
        warnings.append(f"empty partitions {empties} (graph has {wcc} weakly-"
                        f"connected components, k={k})")
    return PartitionMap(k, assignment, cut, sizes, warnings)


def _balanced_greedy(graph, k, slack):
    v = graph.num_vertices()
    base = math.ceil(v / k)
    cap = max(base, int(base * (1 + slack)))

    undirected = {u: set() for u in graph.adj}
    for u, ns in graph.adj.items():
        for w in ns:
            if w != u:
                undirected[u].add(w)
                undirected[w].add(u)

    seeds = deque(sorted(graph.adj, key=lambda x: (-len(undirected[x]), x)))
    assignment = {}
    sizes = [0] * k
    frontiers = [deque() for _ in range(k)]
    remaining = v

    pid = 0
    while remaining:
        if sizes[pid] < cap:
            vertex = None
            frontier = frontiers[pid]
            while frontier:
                candidate = frontier.popleft()
                if candidate not in assignment:
                    vertex = candidate
                    break
            if vertex is None:
                while seeds:
                    candidate = seeds.popleft()
                    if candidate not in assignment:
                        vertex = candidate
                        break
            if vertex is not None:
                assignment[vertex] = pid
                sizes[pid] += 1
                remaining -= 1
                for w in sorted(undirected[vertex]):
                    if w not in assignment:
                        frontier.append(w)
        pid = (pid + 1) % k
    return assignment


def build_partitions(graph: Graph, pmap: PartitionMap) -> list:
    """Split the graph per the map and discover sub-graphs in every partition.

    Runs discovery in two passes so that every remote edge carries a fully
    resolved (partition, sub-graph, vertex) target.
    """
    k = pmap.k
    assignment = pmap.assignment
    part_vertices = [[] for _ in range(k)]
    for vid in graph.adj:
        part_vertices[assignment[vid]].append(vid)

    local_adj = [{} for _ in range(k)]
    remote_targets = [{} for _ in range(k)]
    for u, ns in graph.adj.items():
        pu = assignment[u]
        local, remote = [], []
        for w in ns:
            if assignment[w] == pu:
                local.append(w)
            else:
                remote.append(w)
        local_adj[pu][u] = local
        if remote:
            remote_targets[pu][u] = remote

    # pass 1: component discovery fixes every vertex's sub-graph id
    vertex_sg = {}
    for pid in range(k):
        for idx, comp in enumerate(_components(part_vertices[pid], local_adj[pid])):
            sgid = make_subgraph_id(pid, idx)
            for vid in comp:
                vertex_sg[vid] = sgid

    # pass 2: materialize partitions with resolved remote refs
    partitions = []
    for pid in range(k):
        remote = {}
        for u, targets in remote_targets[pid].items():
            remote[u] = [RemoteRef(assignment[w], vertex_sg[w], w) for w in targets]
        partition = Partition(pid, part_vertices[pid], local_adj[pid], remote,
                              directed=graph.directed)
        partition.subgraphs = discover_subgraphs(partition)
        partitions.append(partition)
    return partitions


def discover_subgraphs(partition: Partition) -> list:
    """Maximal weakly-connected components over local edges, as Subgraphs.

    Deterministic: components are ordered by their smallest vertex id and
    numbered 0, 1, ... within the partition.
    """
    subgraphs = []
    for idx, comp in enumerate(_components(partition.vertices, partition.adj)):
        sgid = make_subgraph_id(partition.id, idx)
        local = {vid: partition.adj[vid] for vid in comp}
        remote = {vid: partition.remote[vid] for vid in comp if vid in partition.remote}
        subgraphs.append(Subgraph(sgid, partition.id, comp, local, remote))
    return subgraphs


def _components(vertices, adj):
    """Weakly-connected components, sorted by smallest member."""
    uf = UnionFind(vertices)
    for u, ns in adj.items():
        for w in ns:
            uf.union(u, w)
    return sorted(uf.groups(), key=min)


def symmetrize_partitions(partitions) -> list:
    """Undirected view of directed partitions, preserving sub-graph structure.

    Adds the reverse of every local and remote edge. Weak components are
    unchanged, so sub-graph ids and memberships carry over; algorithms that
    need undirected propagation (connected components, max value) run on
    this view.
    """
    if all(not p.directed for p in partitions):
        return partitions

    local = {p.id: {v: set(ns) for v, ns in p.adj.items()} for p in partitions}
    remote = {p.id: {} for p in partitions}
    vertex_sg = {}
    for p in partitions:
        for sg in p.subgraphs:
            for vid in sg.vertices:
                vertex_sg[vid] = sg.id
    for p in partitions:
        for v, refs in p.remote.items():
            remote[p.id].setdefault(v, set()).update(refs)
    for p in partitions:
        for u, ns in p.adj.items():
            for w in ns:
                if w != u:
                    local[p.id][w].add(u)
        for u, refs in p.remote.items():
            for ref in refs:
                back = RemoteRef(p.id, vertex_sg[u], u)
                remote[ref.partition].setdefault(ref.vertex, set()).add(back)

    out = []
    for p in partitions:
        q = Partition(p.id, p.vertices,
                      {v: sorted(ns) for v, ns in local[p.id].items()},
                      {v: sorted(refs) for v, refs in remote[p.id].items()},
                      directed=False, degenerate=p.degenerate)
        q.subgraphs = discover_subgraphs(q)
        out.append(q)
    return out


def vertex_centric_emulation(graph: Graph, pmap: PartitionMap) -> list:
    """Degenerate partitions where every vertex is its own sub-graph.

    All edges become remote (self-loops stay local), which reproduces
    vertex-centric behavior under the unchanged sub-graph API. Remote refs
    may point inside the owning partition here, so the partitions are
    flagged degenerate.
    """
    k = pmap.k
    assignment = pmap.assignment
    part_vertices = [[] for _ in range(k)]
    for vid in graph.adj:
        part_vertices[assignment[vid]].append(vid)

    vertex_sg = {}
    for pid in range(k):
        for idx, vid in enumerate(sorted(part_vertices[pid])):
            vertex_sg[vid] = make_subgraph_id(pid, idx)

    partitions = []
    for pid in range(k):
        adj, remote = {}, {}
        for vid in part_vertices[pid]:
            adj[vid] = [w for w in graph.adj[vid] if w == vid]
            refs = [RemoteRef(assignment[w], vertex_sg[w], w)
                    for w in graph.adj[vid] if w != vid]
            if refs:
                remote[vid] = refs
        partition = Partition(pid, part_vertices[pid], adj, remote,
                              directed=graph.directed, degenerate=True)
        partition.subgraphs = [
            Subgraph(vertex_sg[vid], pid, [vid], {vid: adj[vid]},
                     {vid: remote[vid]} if vid in remote else {})
            for vid in sorted(part_vertices[pid])
        ]
        partitions.append(partition)
    return partitions


@dataclass
class MetaGraph:
    """Sub-graphs as meta-vertices; an edge wherever a remote edge connects two."""

    adj: dict
    components: list
    diameter: int

    def eccentricity(self, sgid) -> int:
        """Longest shortest-path hop count from one meta-vertex."""
        dist = _bfs(self.adj, sgid)
        return max(dist.values())

    def component_of(self, sgid):
        for comp in self.components:
            if sgid in comp:
                return comp
        raise KeyError(f"sub-graph {sgid} not in meta-graph")


def build_meta_graph(partitions) -> MetaGraph:
    """Connect sub-graphs that share remote edges; diameter by all-pairs BFS
    over the largest weakly-connected meta-component."""
    adj = {}
    for p in partitions:
        for sg in p.subgraphs:
            adj.setdefault(sg.id, set())
            for _, ref in sg.remote_edges():
                if ref.subgraph != sg.id:
                    adj[sg.id].add(ref.subgraph)
                    adj.setdefault(ref.subgraph, set()).add(sg.id)

    components = sorted(_components(list(adj), adj), key=lambda c: (-len(c), min(c)))
    diameter = 0
    if components:
        largest = components[0]
        for sgid in largest:
            dist = _bfs(adj, sgid)
            diameter = max(diameter, max(dist.values()))
    return MetaGraph({k: sorted(v) for k, v in adj.items()},
                     [sorted(c) for c in components], diameter)


def _bfs(adj, start):
    dist = {start: 0}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist
