"""In-memory graph, partition, and sub-graph data model.

A graph is k-way partitioned over its vertices. Within a partition, every
maximal component that is (weakly) connected through local edges forms one
sub-graph: the unit of computation. Edges leaving the partition are kept on
the source sub-graph as remote references naming the target partition,
sub-graph and vertex.

Identifiers are dense non-negative integers assigned at ingest. A sub-graph
id encodes its owning partition in the high 32 bits, so any sub-graph id can
be routed without a global lookup table. Topology is immutable after load;
attribute values are mutable.

Self-loops are permitted; traversal algorithms ignore them naturally.
"""

from dataclasses import dataclass, field

SUBGRAPH_PARTITION_SHIFT = 32


def make_subgraph_id(partition_id: int, index: int) -> int:
    return (partition_id << SUBGRAPH_PARTITION_SHIFT) | index


def subgraph_partition(subgraph_id: int) -> int:
    """Partition that owns a sub-graph, recovered from the id encoding."""
    return subgraph_id >> SUBGRAPH_PARTITION_SHIFT


def subgraph_index(subgraph_id: int) -> int:
    return subgraph_id & ((1 << SUBGRAPH_PARTITION_SHIFT) - 1)


VALID_ATTR_TYPES = ("int64", "float64", "string", "bool")
VALID_ATTR_SCOPES = ("vertex", "edge")

_PY_TYPES = {
    "int64": int,
    "float64": (int, float),
    "string": str,
    "bool": bool,
}


@dataclass(frozen=True)
class AttributeSpec:
    """One named, typed attribute; scope says whether values key on vertices or edges."""

    name: str
    type: str
    scope: str = "vertex"

    def __post_init__(self):
        if self.type not in VALID_ATTR_TYPES:
            raise ValueError(f"unknown attribute type {self.type!r}")
        if self.scope not in VALID_ATTR_SCOPES:
            raise ValueError(f"unknown attribute scope {self.scope!r}")

    def accepts(self, value) -> bool:
        if value is None:
            return True
        if self.type == "bool":
            return isinstance(value, bool)
        if self.type == "int64":
            return isinstance(value, int) and not isinstance(value, bool)
        return isinstance(value, _PY_TYPES[self.type])


@dataclass(frozen=True, order=True)
class RemoteRef:
    """Target of an edge that leaves the partition: remote partition, sub-graph, vertex."""

    partition: int
    subgraph: int
    vertex: int


class Graph:
    """Whole-graph adjacency as ingested, before partitioning.

    For undirected graphs the adjacency is symmetric (each edge stored in
    both directions). Neighbor lists are sorted ascending.
    """

    def __init__(self, name: str, directed: bool, adj: dict):
        self.name = name
        self.directed = directed
        # parallel edges collapse here; multiplicity is an ingest concern
        self.adj = {v: sorted(set(ns)) for v, ns in adj.items()}

    @classmethod
    def from_edges(cls, name, edges, directed=False, vertices=()):
        adj = {v: [] for v in vertices}
        for u, v in edges:
            adj.setdefault(u, []).append(v)
            adj.setdefault(v, [])
            if not directed and u != v:
                adj[v].append(u)
        return cls(name, directed, adj)

    @property
    def vertices(self):
        return self.adj.keys()

    def num_vertices(self) -> int:
        return len(self.adj)

    def num_edges(self) -> int:
        """Unique edge count: directed edges, or undirected pairs counted once."""
        entries = sum(len(ns) for ns in self.adj.values())
        if self.directed:
            return entries
        loops = sum(1 for v, ns in self.adj.items() for n in ns if n == v)
        return (entries - loops) // 2 + loops

    def as_undirected(self):
        """Symmetrized copy; no-op copy for already-undirected graphs."""
        if not self.directed:
            return self
        adj = {v: set(ns) for v, ns in self.adj.items()}
        for u, ns in self.adj.items():
            for v in ns:
                if v != u:
                    adj[v].add(u)
        return Graph(self.name, False, {v: sorted(ns) for v, ns in adj.items()})


class Subgraph:
    """One weakly-connected component of a partition's local edges.

    local_adj maps each local vertex to its sorted local out-neighbors.
    remote maps a local vertex to the sorted RemoteRefs of its out-edges
    that leave the partition. Attribute values live in three mutable maps;
    everything else is fixed topology.
    """

    def __init__(self, subgraph_id, partition_id, vertices, local_adj, remote):
        self.id = subgraph_id
        self.partition = partition_id
        self.vertices = sorted(vertices)
        self.local_adj = {v: sorted(local_adj.get(v, ())) for v in self.vertices}
        self.remote = {v: sorted(remote[v]) for v in vertices if remote.get(v)}
        self.vertex_values = {}    # attr name -> {vid: value}
        self.edge_values = {}      # attr name -> {(u, v): value}
        self.subgraph_values = {}  # attr name -> value
        self._vertex_set = set(vertices)
        self._in_adj = None

    def __repr__(self):
        return (f"Subgraph(id={self.id}, partition={self.partition}, "
                f"vertices={len(self.vertices)}, local_edges={self.num_local_edges()}, "
                f"remote_edges={self.num_remote_edges()})")

    def has_vertex(self, v) -> bool:
        return v in self._vertex_set

    def num_local_edges(self) -> int:
        return sum(len(ns) for ns in self.local_adj.values())

    def num_remote_edges(self) -> int:
        return sum(len(refs) for refs in self.remote.values())

    def remote_edges(self):
        """All (source vertex, RemoteRef) pairs in canonical order."""
        for v in self.vertices:
            for ref in self.remote.get(v, ()):
                yield v, ref

    def in_adj(self):
        """Reverse index over local edges, built on first request."""
        if self._in_adj is None:
            rev = {v: [] for v in self.vertices}
            for u, ns in self.local_adj.items():
                for v in ns:
                    rev[v].append(u)
            self._in_adj = {v: sorted(us) for v, us in rev.items()}
        return self._in_adj

    def out_degree(self, v) -> int:
        """Full out-degree: local plus remote out-edges."""
        return len(self.local_adj[v]) + len(self.remote.get(v, ()))


class Partition:
    """All vertices assigned to one worker, with its sub-graphs.

    degenerate=True marks vertex-emulation structures where every sub-graph
    is a single vertex and remote refs may point inside the same partition.
    """

    def __init__(self, partition_id, vertices, adj, remote, directed=False,
                 degenerate=False):
        self.id = partition_id
        self.vertices = set(vertices)
        self.adj = {v: sorted(adj.get(v, ())) for v in self.vertices}
        self.remote = {v: sorted(refs) for v, refs in remote.items() if refs}
        self.directed = directed
        self.degenerate = degenerate
        self.subgraphs = []

    def __repr__(self):
        return (f"Partition(id={self.id}, vertices={len(self.vertices)}, "
                f"subgraphs={len(self.subgraphs)})")

    def subgraph_by_id(self, subgraph_id):
        for sg in self.subgraphs:
            if sg.id == subgraph_id:
                return sg
        raise KeyError(f"sub-graph {subgraph_id} not in partition {self.id}")


def neighbors(sg: Subgraph, v: int):
    """All out-neighbors of v: local vertex ids first, then RemoteRefs.

    Both groups ascend by vertex id, so repeated calls enumerate targets in
    the same order on every run.
    """
    if not sg.has_vertex(v):
        raise KeyError(f"vertex {v} is not local to sub-graph {sg.id}")
    return list(sg.local_adj[v]) + list(sg.remote.get(v, ()))


def subgraph_neighbors(sg: Subgraph) -> set:
    """Distinct sub-graph ids reachable over this sub-graph's remote edges."""
    return {ref.subgraph for refs in sg.remote.values() for ref in refs}


@dataclass
class Violation:
    """One broken invariant found by validate_partition."""

    kind: str
    detail: str
    subgraph: int | None = None

    def __str__(self):
        where = f" (sub-graph {self.subgraph})" if self.subgraph is not None else ""
        return f"{self.kind}{where}: {self.detail}"


def validate_partition(partition: Partition, peers=None) -> list:
    """Check every partition and sub-graph invariant; return violations found.

    With peers (iterable of the other partitions) remote refs are also
    cross-checked: the referenced sub-graph must exist and hold the
    referenced vertex.
    """
    violations = []
    out = violations.append

    seen = set()
    for sg in partition.subgraphs:
        overlap = seen & set(sg.vertices)
        if overlap:
            out(Violation("overlapping-subgraphs",
                          f"vertices {sorted(overlap)} appear in multiple sub-graphs",
                          sg.id))
        seen.update(sg.vertices)

        if subgraph_partition(sg.id) != partition.id or sg.partition != partition.id:
            out(Violation("subgraph-id-partition",
                          f"id encodes partition {subgraph_partition(sg.id)}, "
                          f"owner is {partition.id}", sg.id))

        stray = set(sg.vertices) - partition.vertices
        if stray:
            out(Violation("foreign-vertices",
                          f"vertices {sorted(stray)} not in partition", sg.id))

        foreign_targets = {v for ns in sg.local_adj.values() for v in ns
                           if v not in sg._vertex_set}
        if foreign_targets:
            out(Violation("local-edge-target-foreign",
                          f"local edges point at {sorted(foreign_targets)} "
                          "outside the sub-graph", sg.id))

        if not _weakly_connected(sg):
            out(Violation("disconnected-subgraph",
                          "local vertices are not weakly connected via local edges",
                          sg.id))

        pairs = set()
        for u, ref in sg.remote_edges():
            if u not in sg._vertex_set:
                out(Violation("remote-source-foreign",
                              f"remote edge source {u} is not local", sg.id))
            if ref.vertex in partition.vertices and not partition.degenerate:
                out(Violation("remote-target-is-local",
                              f"remote target {ref.vertex} belongs to this partition",
                              sg.id))
            if ref.partition == partition.id and not partition.degenerate:
                out(Violation("remote-ref-own-partition",
                              f"remote ref {ref} names the owning partition", sg.id))
            if ref.subgraph == sg.id:
                out(Violation("remote-ref-own-subgraph",
                              f"remote ref {ref} names the owning sub-graph", sg.id))
            if subgraph_partition(ref.subgraph) != ref.partition:
                out(Violation("remote-ref-inconsistent",
                              f"{ref}: sub-graph id encodes partition "
                              f"{subgraph_partition(ref.subgraph)}", sg.id))
            key = (u, ref.partition, ref.vertex)
            if key in pairs:
                out(Violation("duplicate-remote-edge",
                              f"more than one entry for ({u} -> {ref.vertex})", sg.id))
            pairs.add(key)

    if seen != partition.vertices:
        missing = partition.vertices - seen
        out(Violation("uncovered-vertices",
                      f"vertices {sorted(missing)} belong to no sub-graph"))

    # A local edge joining two sub-graphs means they should have been one.
    owner = {v: sg.id for sg in partition.subgraphs for v in sg.vertices}
    for u, ns in partition.adj.items():
        for v in ns:
            if u in owner and v in owner and owner[u] != owner[v]:
                out(Violation("mergeable-subgraphs",
                              f"local edge ({u}, {v}) spans sub-graphs "
                              f"{owner[u]} and {owner[v]}"))

    if peers is not None:
        index = {}
        for p in peers:
            for sg in p.subgraphs:
                index[sg.id] = sg
        for sg in partition.subgraphs:
            index[sg.id] = sg
        for sg in partition.subgraphs:
            for u, ref in sg.remote_edges():
                target = index.get(ref.subgraph)
                if target is None:
                    out(Violation("remote-ref-dangling",
                                  f"{ref}: no such sub-graph", sg.id))
                elif not target.has_vertex(ref.vertex):
                    out(Violation("remote-ref-dangling",
                                  f"{ref}: vertex not in target sub-graph", sg.id))

    return violations


def _weakly_connected(sg: Subgraph) -> bool:
    if not sg.vertices:
        return True
    undirected = {v: set() for v in sg.vertices}
    for u, ns in sg.local_adj.items():
        for v in ns:
            if v in undirected:  # foreign targets reported separately
                undirected[u].add(v)
                undirected[v].add(u)
    stack = [sg.vertices[0]]
    seen = {sg.vertices[0]}
    while stack:
        u = stack.pop()
        for v in undirected[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == len(sg.vertices)
