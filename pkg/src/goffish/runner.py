"""Orchestration over the engine: algorithm lookup, execution modes, and
result digests.

Modes:
  subgraph          run on the partitions as discovered.
  vertex-emulation  rebuild degenerate partitions (one vertex per sub-graph)
                    over the identical vertex assignment, for head-to-head
                    superstep and message comparisons.

Algorithms that need undirected propagation (max-vertex, connected
components) run on a symmetrized view when the input is directed. Runs
never mutate the caller's partitions; attribute state is cloned first.
"""

import hashlib
from pathlib import Path

from . import engine, store
from .algorithms import ALGORITHMS
from .errors import ConfigError
from .model import Graph, Partition, Subgraph
from .partitioning import (PartitionMap, symmetrize_partitions,
                           vertex_centric_emulation)

MODES = ("subgraph", "vertex-emulation")


def clone_partitions(partitions):
    """Fresh Partition/Subgraph objects with copied value maps; topology is
    rebuilt from the same data, so runs cannot leak state into each other."""
    out = []
    for p in partitions:
        q = Partition(p.id, p.vertices, p.adj, p.remote, directed=p.directed,
                      degenerate=p.degenerate)
        q.subgraphs = [_clone_subgraph(sg) for sg in p.subgraphs]
        out.append(q)
    return out


def _clone_subgraph(sg):
    new = Subgraph(sg.id, sg.partition, sg.vertices, sg.local_adj, sg.remote)
    new.vertex_values = {attr: dict(vals) for attr, vals in sg.vertex_values.items()}
    new.edge_values = {attr: dict(vals) for attr, vals in sg.edge_values.items()}
    new.subgraph_values = dict(sg.subgraph_values)
    return new


def graph_from_partitions(partitions):
    """Rebuild (graph, partition map, vertex attrs, edge attrs) from
    partitions; the inverse of the partition/discover pipeline."""
    directed = any(p.directed for p in partitions)
    adj = {}
    assignment = {}
    vertex_attrs, edge_attrs = {}, {}
    for p in partitions:
        for sg in p.subgraphs:
            for v in sg.vertices:
                assignment[v] = p.id
                targets = list(sg.local_adj[v])
                targets.extend(ref.vertex for ref in sg.remote.get(v, ()))
                adj[v] = sorted(targets)
            for attr, vals in sg.vertex_values.items():
                vertex_attrs.setdefault(attr, {}).update(vals)
            for attr, vals in sg.edge_values.items():
                edge_attrs.setdefault(attr, {}).update(vals)
    graph = Graph("run", directed, adj)
    pmap = PartitionMap(len(partitions), assignment)
    return graph, pmap, vertex_attrs, edge_attrs


def inject_attributes(partitions, vertex_attrs, edge_attrs):
    for p in partitions:
        for sg in p.subgraphs:
            for attr, vals in vertex_attrs.items():
                local = {v: vals[v] for v in sg.vertices if v in vals}
                if local:
                    sg.vertex_values[attr] = local
            for attr, vals in edge_attrs.items():
                local = {}
                for v in sg.vertices:
                    for w in sg.local_adj[v]:
                        if (v, w) in vals:
                            local[(v, w)] = vals[(v, w)]
                    for ref in sg.remote.get(v, ()):
                        if (v, ref.vertex) in vals:
                            local[(v, ref.vertex)] = vals[(v, ref.vertex)]
                if local:
                    sg.edge_values[attr] = local


def prepare_partitions(algorithm, partitions, mode="subgraph"):
    """Partitions an algorithm actually runs on, per mode and directedness."""
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r} (expected one of {MODES})")
    cls = algorithm_class(algorithm)
    if mode == "vertex-emulation":
        graph, pmap, vertex_attrs, edge_attrs = graph_from_partitions(partitions)
        if cls.requires_undirected and graph.directed:
            graph = graph.as_undirected()
        run_parts = vertex_centric_emulation(graph, pmap)
        inject_attributes(run_parts, vertex_attrs, edge_attrs)
        return run_parts

    run_parts = clone_partitions(partitions)
    if cls.requires_undirected and any(p.directed for p in run_parts):
        _, _, vertex_attrs, edge_attrs = graph_from_partitions(run_parts)
        run_parts = symmetrize_partitions(run_parts)
        inject_attributes(run_parts, vertex_attrs, edge_attrs)
    return run_parts


def algorithm_class(name):
    if name not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {name!r} "
                          f"(available: {sorted(ALGORITHMS)})")
    return ALGORITHMS[name]


def run_algorithm(name, partitions, params=None, config=None, mode="subgraph"):
    """Run a named algorithm; returns the engine's RunResult."""
    params = dict(params or {})
    cls = algorithm_class(name)
    if name == "sssp":
        source = params.get("source")
        if source is None:
            raise ConfigError("sssp requires a source vertex")
        if not any(source in p.vertices for p in partitions):
            raise ConfigError(f"source vertex {source} not in graph")
    run_parts = prepare_partitions(name, partitions, mode)
    return engine.run(lambda: cls(**params), run_parts, config)


def result_digest(values) -> str:
    """Order-independent hash of final values: sha256 over sorted
    "vertex repr(value)" lines. repr round-trips floats exactly, so equal
    digests mean bit-identical results."""
    lines = [f"{vid} {values[vid]!r}" for vid in sorted(values)]
    return hashlib.sha256("\n".join(lines).encode("utf-8")).hexdigest()


def load_store(root, attributes=()):
    """Load every partition directory under a store root; returns
    (partitions sorted by id, list of metadata dicts)."""
    root = Path(root)
    dirs = sorted(p for p in root.iterdir() if p.is_dir()
                  and (p / "metadata.json").exists())
    if not dirs:
        raise ConfigError(f"no partition directories under {root}")
    partitions, metas = [], []
    for d in dirs:
        partition, meta = store.load_partition(d, attributes)
        partitions.append(partition)
        metas.append(meta)
    partitions.sort(key=lambda p: p.id)
    metas.sort(key=lambda m: m["partition"])
    return partitions, metas
