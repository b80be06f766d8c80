"""Single-machine reference implementations for result verification.

These deliberately avoid the partition/sub-graph machinery: components come
from plain BFS, shortest paths from one whole-graph Dijkstra, ranks from a
sequential power iteration over the full adjacency. The engine is checked
against these, never the other way around.
"""

import heapq
import math
from collections import deque


def bfs_components(adj):
    """Weakly-connected components of {vertex: out-neighbors}, as lists."""
    undirected = {v: set() for v in adj}
    for u, ns in adj.items():
        for w in ns:
            undirected[u].add(w)
            undirected[w].add(u)
    seen = set()
    components = []
    for start in sorted(adj):
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for w in undirected[u]:
                if w not in seen:
                    seen.add(w)
                    comp.append(w)
                    queue.append(w)
        components.append(sorted(comp))
    return components


def connected_components(adj):
    """{vertex: label}, labeling each vertex with its component's max id."""
    labels = {}
    for comp in bfs_components(adj):
        label = max(comp)
        for v in comp:
            labels[v] = label
    return labels


def max_value_per_component(adj, values=None):
    """{vertex: max initial value within its component}; values default to ids."""
    out = {}
    for comp in bfs_components(adj):
        if values:
            best = max(values[v] if values.get(v) is not None else v for v in comp)
        else:
            best = max(comp)
        for v in comp:
            out[v] = best
    return out


def dijkstra(adj, source, weights=None):
    """{vertex: float distance}; +inf where unreachable. weights maps
    (u, v) -> w, defaulting to 1 per edge."""
    if source not in adj:
        raise KeyError(f"source vertex {source} not in graph")
    dist = {v: math.inf for v in adj}
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v in adj[u]:
            if v == u:
                continue
            w = 1.0 if weights is None else float(weights.get((u, v), 1.0))
            cand = d + w
            if cand < dist[v]:
                dist[v] = cand
                heapq.heappush(heap, (cand, v))
    return dist


def pagerank(adj, iterations=30, damping=0.85, teleport=None,
             dangling="redistribute", mode="fixed", epsilon=1e-6):
    """Sequential power iteration; returns ({vertex: rank}, rounds).

    Mirrors the distributed update exactly: one contribution per in-edge,
    math.fsum reduction, the literal teleport constant (0.15 by default),
    and optional uniform redistribution of the rank mass sitting on
    zero-out-degree vertices.
    """
    if teleport is None:
        teleport = 0.15 if damping == 0.85 else 1.0 - damping
    n = len(adj)
    order = sorted(adj)
    deg = {v: len(adj[v]) for v in order}
    in_adj = {v: [] for v in order}
    for u in order:
        for w in adj[u]:
            in_adj[w].append(u)
    ranks = {v: 1.0 / n for v in order}
    base = teleport / n
    rounds = 0
    while rounds < iterations:
        if dangling == "redistribute":
            share = math.fsum(ranks[v] for v in order if deg[v] == 0) / n
        else:
            share = 0.0
        new = {}
        for u in order:
            contribs = [ranks[w] / deg[w] for w in in_adj[u]]
            new[u] = base + damping * (math.fsum(contribs) + share)
        change = max(abs(new[v] - ranks[v]) for v in order)
        ranks = new
        rounds += 1
        if mode == "converge" and change < epsilon:
            break
    return ranks, rounds


def eccentricity(adj, start):
    """Longest BFS hop count from start, within its component."""
    undirected = {v: set() for v in adj}
    for u, ns in adj.items():
        for w in ns:
            undirected[u].add(w)
            undirected[w].add(u)
    dist = {start: 0}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for w in undirected[u]:
            if w not in dist:
                dist[w] = dist[u] + 1
                queue.append(w)
    return max(dist.values())


def diameter(adj):
    """Max eccentricity over the largest weakly-connected component."""
    comps = bfs_components(adj)
    if not comps:
        return 0
    largest = max(comps, key=len)
    return max(eccentricity(adj, v) for v in largest)
