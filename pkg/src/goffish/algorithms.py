"""Compute apps: max vertex value, connected components, SSSP, PageRank,
and BlockRank, all written against the sub-graph compute contract.

Floating-point discipline: PageRank keeps one contribution per in-edge
(never pre-summed per destination) and reduces with math.fsum, which is
correctly rounded regardless of order. Sub-graph mode and vertex emulation
therefore produce bit-identical ranks, and result digests can be compared
across modes.
"""

import heapq
import math

from .engine import ComputeApp
from .errors import ConfigError

DAMPING = 0.85


class MaxVertexCompute(ComputeApp):
    """Flood the largest vertex value.

    Superstep 1 takes the local max over the sub-graph; afterwards the value
    is exchanged with neighboring sub-graphs until nothing improves. Initial
    per-vertex values come from the "value" attribute, defaulting to the
    vertex id. Result: every vertex carries the max value of its (weakly)
    connected component.
    """

    requires_undirected = True
    result_attr = "value"

    def setup(self, meta, subgraph):
        self.current = None

    def compute(self, ctx, sg, messages):
        changed = False
        if ctx.superstep == 1:
            preset = sg.vertex_values.get("value", {})
            self.current = max(preset[v] if preset.get(v) is not None else v
                               for v in sg.vertices)
            changed = True
        for m in messages:
            if m.payload > self.current:
                self.current = m.payload
                changed = True
        if changed:
            sg.subgraph_values["value"] = self.current
            out = sg.vertex_values.setdefault("value", {})
            for v in sg.vertices:
                out[v] = self.current
            ctx.send_to_all_subgraph_neighbors(self.current)
        else:
            ctx.vote_to_halt()


class ConnectedComponentsCompute(ComputeApp):
    """Label every vertex with the largest vertex id in its component.

    Same flood as MaxVertexCompute but over vertex ids; the number of
    distinct labels afterwards is the component count. Needs undirected
    propagation, so directed graphs run on a symmetrized view.
    """

    requires_undirected = True
    result_attr = "component"

    def setup(self, meta, subgraph):
        self.label = None

    def compute(self, ctx, sg, messages):
        changed = False
        if ctx.superstep == 1:
            self.label = max(sg.vertices)
            changed = True
        for m in messages:
            if m.payload > self.label:
                self.label = m.payload
                changed = True
        if changed:
            sg.subgraph_values["component"] = self.label
            out = sg.vertex_values.setdefault("component", {})
            for v in sg.vertices:
                out[v] = self.label
            ctx.send_to_all_subgraph_neighbors(self.label)
        else:
            ctx.vote_to_halt()


class SSSPCompute(ComputeApp):
    """Single-source shortest paths with a per-superstep local Dijkstra.

    Each superstep seeds Dijkstra with the vertices whose distance improved
    (source init or incoming messages), settles the sub-graph locally, then
    sends the best new candidate distance to each affected remote vertex.
    Always votes to halt; messages reactivate. Unreachable vertices keep
    +inf. Unit mode counts hops; weighted mode reads the "weight" edge
    attribute (missing entries count as 1).
    """

    requires_undirected = False
    result_attr = "distance"

    def __init__(self, source, weighted=False):
        self.source = source
        self.weighted = weighted

    def setup(self, meta, subgraph):
        if self.weighted:
            for key, w in subgraph.edge_values.get("weight", {}).items():
                if w is not None and w < 0:
                    raise ConfigError(f"negative weight {w} on edge {key}")

    def compute(self, ctx, sg, messages):
        dist = sg.vertex_values.setdefault("distance", {})
        improved = set()
        if ctx.superstep == 1:
            for v in sg.vertices:
                dist[v] = math.inf
            if sg.has_vertex(self.source):
                dist[self.source] = 0.0
                improved.add(self.source)
        for m in messages:
            v = m.target_vertex
            if dist[v] > m.payload:
                dist[v] = m.payload
                improved.add(v)

        remote_best = self._dijkstra(sg, dist, improved)
        for (target_sg, vid), d in sorted(remote_best.items()):
            ctx.send_to_subgraph_vertex(target_sg, vid, d)
        ctx.vote_to_halt()

    def _weight(self, weights, u, v):
        if weights is None:
            return 1.0
        w = weights.get((u, v))
        return 1.0 if w is None else float(w)

    def _dijkstra(self, sg, dist, seeds):
        weights = sg.edge_values.get("weight") if self.weighted else None
        heap = [(dist[v], v) for v in sorted(seeds)]
        heapq.heapify(heap)
        remote_best = {}
        while heap:
            d, u = heapq.heappop(heap)
            if d > dist[u]:
                continue  # stale entry, vertex improved after push
            for ref in sg.remote.get(u, ()):
                cand = d + self._weight(weights, u, ref.vertex)
                key = (ref.subgraph, ref.vertex)
                if cand < remote_best.get(key, math.inf):
                    remote_best[key] = cand
            for v in sg.local_adj[u]:
                if v == u:
                    continue
                cand = d + self._weight(weights, u, v)
                if dist[v] > cand:
                    dist[v] = cand
                    heapq.heappush(heap, (cand, v))
        return remote_best


class PageRankCompute(ComputeApp):
    """Classic PageRank, one vertex-update round per superstep.

    Superstep 1 seeds every rank with 1/v and scatters contributions to
    remote neighbors; each later superstep applies one round:
        rank(u) = (1-damping)/v + damping * (sum_in + D/v)
    where sum_in collects rank(w)/out_degree(w) over in-edges (in-memory for
    local w, via messages for remote w) and D is the global rank mass of
    zero-out-degree vertices, exchanged as per-vertex (id, mass) broadcasts.
    dangling="strict" drops the D term, matching the bare formula.

    mode="fixed" runs exactly `iterations` rounds (iterations+1 supersteps);
    mode="converge" stops once the global max rank change of the previous
    round is below epsilon, or at the `iterations` cap.
    """

    requires_undirected = False
    result_attr = "rank"

    def __init__(self, iterations=30, damping=DAMPING, teleport=None,
                 dangling="redistribute", mode="fixed", epsilon=1e-6):
        if iterations < 1:
            raise ConfigError(f"iterations must be >= 1, got {iterations}")
        if not 0.0 < damping < 1.0:
            raise ConfigError(f"damping must be in (0, 1), got {damping}")
        if dangling not in ("redistribute", "strict"):
            raise ConfigError(f"unknown dangling mode {dangling!r}")
        if mode not in ("fixed", "converge"):
            raise ConfigError(f"unknown stop mode {mode!r}")
        teleport = resolve_teleport(damping, teleport)
        self.iterations = iterations
        self.damping = damping
        self.teleport = teleport
        self.dangling = dangling
        self.mode = mode
        self.epsilon = epsilon

    def setup(self, meta, subgraph):
        self.num_vertices = meta.num_vertices
        self.redistribute = (self.dangling == "redistribute" and meta.has_dangling)
        self.deg = {v: subgraph.out_degree(v) for v in subgraph.vertices}
        self.dangling_local = [v for v in subgraph.vertices if self.deg[v] == 0]
        self.ranks = {}
        self.rounds = 0

    def compute(self, ctx, sg, messages):
        if ctx.superstep == 1:
            seed = 1.0 / self.num_vertices
            self.ranks = {v: seed for v in sg.vertices}
            self._publish(sg)
            self._scatter(ctx, sg)
            return
        remote_in, dangling_pairs, deltas = self._gather(messages)
        if self._should_stop(deltas):
            ctx.vote_to_halt()
            return
        delta_local = self._apply_round(sg, remote_in, dangling_pairs)
        self._publish(sg)
        if self.mode == "fixed" and self.rounds >= self.iterations:
            ctx.vote_to_halt()
            return
        if self.mode == "converge" and self.rounds >= self.iterations:
            ctx.vote_to_halt()  # cap reached; epsilon never met
            return
        self._scatter(ctx, sg)
        if self.mode == "converge":
            ctx.send_to_all_subgraphs(["delta", delta_local])

    # -- round pieces, shared with BlockRankCompute -------------------------

    def _gather(self, messages):
        remote_in = {}
        dangling_pairs = []
        deltas = []
        for m in messages:
            kind = m.payload[0]
            if kind == "c":
                for tvid, _svid, val in m.payload[1]:
                    remote_in.setdefault(tvid, []).append(val)
            elif kind == "d":
                dangling_pairs.extend(pair[1] for pair in m.payload[1])
            elif kind == "delta":
                deltas.append(m.payload[1])
        return remote_in, dangling_pairs, deltas

    def _should_stop(self, deltas):
        return (self.mode == "converge" and deltas
                and max(deltas) < self.epsilon)

    def _apply_round(self, sg, remote_in, dangling_pairs):
        v_total = self.num_vertices
        base = self.teleport / v_total
        dangling_share = (math.fsum(dangling_pairs) / v_total
                          if self.redistribute else 0.0)
        in_adj = sg.in_adj()
        new = {}
        for u in sg.vertices:
            contribs = [self.ranks[w] / self.deg[w] for w in in_adj[u]]
            contribs.extend(remote_in.get(u, ()))
            new[u] = base + self.damping * (math.fsum(contribs) + dangling_share)
        delta_local = max((abs(new[u] - self.ranks[u]) for u in sg.vertices),
                          default=0.0)
        self.ranks = new
        self.rounds += 1
        return delta_local

    def _scatter(self, ctx, sg):
        remote_out = {}
        for u in sg.vertices:
            refs = sg.remote.get(u)
            if refs:
                val = self.ranks[u] / self.deg[u]
                for ref in refs:
                    remote_out.setdefault(ref.subgraph, []).append(
                        [ref.vertex, u, val])
        for sgid in sorted(remote_out):
            ctx.send_to_subgraph(sgid, ["c", remote_out[sgid]])
        if self.redistribute and self.dangling_local:
            pairs = [[v, self.ranks[v]] for v in self.dangling_local]
            ctx.send_to_all_subgraphs(["d", pairs])

    def _publish(self, sg):
        out = sg.vertex_values.setdefault("rank", {})
        out.update(self.ranks)
        sg.subgraph_values["rounds"] = self.rounds
        sums = sg.subgraph_values.setdefault("round_rank_sums", [])
        sums.append(math.fsum(self.ranks[v] for v in sg.vertices))


class BlockRankCompute(PageRankCompute):
    """PageRank seeded from per-block local ranks weighted by block importance.

    Superstep 1: power iteration over each sub-graph's local edges alone
    (dangling mass redistributed within the block) down to epsilon, then a
    broadcast of the block's importance weights: rank-weighted outflow per
    neighboring block, plus a self term for rank retained on internal edges
    (without the self term a block leaking 1% of its mass per round would
    look identical to one leaking everything, and the block ranks would not
    track real block masses).
    Superstep 2: every sub-graph redundantly computes the same block-level
    PageRank over the broadcast weights, seeds each vertex with
    local_rank * block_rank, and scatters.
    Supersteps 3+: classic rounds until the global rank change drops below
    epsilon (or the iteration cap), exactly as PageRankCompute in converge
    mode.
    """

    result_attr = "rank"

    def __init__(self, iterations=30, damping=DAMPING, teleport=None,
                 dangling="redistribute", epsilon=1e-6, local_epsilon=None,
                 local_cap=1000):
        super().__init__(iterations=iterations, damping=damping,
                         teleport=teleport, dangling=dangling,
                         mode="converge", epsilon=epsilon)
        self.local_epsilon = local_epsilon if local_epsilon is not None else epsilon
        self.local_cap = local_cap

    def setup(self, meta, subgraph):
        super().setup(meta, subgraph)
        self.local_ranks = None

    def compute(self, ctx, sg, messages):
        if ctx.superstep == 1:
            self.local_ranks = local_pagerank(
                sg.vertices, sg.local_adj, self.damping,
                self.local_epsilon, self.local_cap, teleport=self.teleport)
            weights = self._block_weights(sg)
            ctx.send_to_all_subgraphs(
                ["summary", sg.id, sorted(weights.items())])
            return
        if ctx.superstep == 2:
            block_weights = {}
            for m in messages:
                kind, block, entries = m.payload
                if kind != "summary":
                    raise ConfigError(f"unexpected payload {kind!r} in superstep 2")
                block_weights[block] = [(b, w) for b, w in entries]
            block_ranks = weighted_pagerank(sorted(block_weights),
                                            block_weights, self.damping,
                                            teleport=self.teleport)
            own = block_ranks[sg.id]
            self.ranks = {v: self.local_ranks[v] * own for v in sg.vertices}
            sg.subgraph_values["block_rank"] = own
            self._publish(sg)
            self._scatter(ctx, sg)
            return
        remote_in, dangling_pairs, deltas = self._gather(messages)
        if self._should_stop(deltas):
            ctx.vote_to_halt()
            return
        delta_local = self._apply_round(sg, remote_in, dangling_pairs)
        self._publish(sg)
        if self.rounds >= self.iterations:
            ctx.vote_to_halt()
            return
        self._scatter(ctx, sg)
        ctx.send_to_all_subgraphs(["delta", delta_local])

    def _block_weights(self, sg):
        """Block importance edges: sum of local_rank(u)/out_degree(u) over
        remote edges into each neighboring block, plus the same sum over
        internal edges as the block's self weight."""
        parts = {}
        for u, ref in sg.remote_edges():
            parts.setdefault(ref.subgraph, []).append(
                self.local_ranks[u] / self.deg[u])
        for u in sg.vertices:
            for _ in sg.local_adj[u]:
                parts.setdefault(sg.id, []).append(
                    self.local_ranks[u] / self.deg[u])
        return {block: math.fsum(vals) for block, vals in parts.items()}


def resolve_teleport(damping, teleport):
    """The update uses the literal 0.15 for the default damping; otherwise
    the complement. Explicit values must complement damping."""
    if teleport is None:
        return 0.15 if damping == DAMPING else 1.0 - damping
    if abs(damping + teleport - 1.0) > 1e-9:
        raise ConfigError(
            f"damping {damping} and teleport {teleport} must sum to 1")
    return teleport


def local_pagerank(vertices, adj, damping, epsilon, max_rounds, teleport=None):
    """Power iteration over one block in isolation; local zero-out-degree
    mass is redistributed within the block so ranks sum to 1."""
    n = len(vertices)
    order = sorted(vertices)
    deg = {v: len(adj.get(v, ())) for v in order}
    in_adj = {v: [] for v in order}
    for u in order:
        for w in adj.get(u, ()):
            in_adj[w].append(u)
    ranks = {v: 1.0 / n for v in order}
    base = resolve_teleport(damping, teleport) / n
    for _ in range(max_rounds):
        dangling = math.fsum(ranks[v] for v in order if deg[v] == 0)
        new = {}
        for u in order:
            total = math.fsum(ranks[w] / deg[w] for w in in_adj[u])
            new[u] = base + damping * (total + dangling / n)
        change = max(abs(new[v] - ranks[v]) for v in order)
        ranks = new
        if change < epsilon:
            break
    return ranks


def weighted_pagerank(nodes, out_weights, damping, epsilon=1e-13,
                      max_rounds=500, teleport=None):
    """Deterministic PageRank over a weighted digraph given as
    {node: [(target, weight), ...]}; per-source weights are normalized and
    zero-outflow nodes are treated as dangling."""
    nodes = sorted(nodes)
    n = len(nodes)
    in_edges = {v: [] for v in nodes}
    outflow = {}
    for a in nodes:
        entries = sorted(out_weights.get(a, ()))
        total = math.fsum(w for _, w in entries)
        outflow[a] = total
        if total > 0.0:
            for b, w in entries:
                in_edges[b].append((a, w / total))
    ranks = {v: 1.0 / n for v in nodes}
    base = resolve_teleport(damping, teleport) / n
    for _ in range(max_rounds):
        dangling = math.fsum(ranks[v] for v in nodes if outflow[v] == 0.0)
        new = {}
        for b in nodes:
            total = math.fsum(ranks[a] * share for a, share in in_edges[b])
            new[b] = base + damping * (total + dangling / n)
        change = max(abs(new[v] - ranks[v]) for v in nodes)
        ranks = new
        if change < epsilon:
            break
    return ranks


ALGORITHMS = {
    "max-vertex": MaxVertexCompute,
    "connected-components": ConnectedComponentsCompute,
    "sssp": SSSPCompute,
    "pagerank": PageRankCompute,
    "blockrank": BlockRankCompute,
}
