"""Command-line front end.

Subcommands:
  ingest   edge list -> partitioned slice stores (+ id map, partition map)
  run      execute an algorithm over a store; RunReport JSON on stdout
  oracle   single-machine reference results for diffing against `run`
  inspect  dump store metadata

Edge lists are whitespace-separated `src dst [weight]` lines with '#'
comments (SNAP-style). Vertex labels are remapped to dense integer ids;
the mapping is persisted next to the store. Set GOFFISH_LOG=debug for
verbose logging.
"""

import argparse
import json
import logging
import math
import socket as socketlib
import subprocess
import sys
import tempfile
import time
from pathlib import Path

from . import net, oracles, store
from .engine import EngineConfig
from .errors import GoffishError, GraphParseError, PartitioningError
from .model import AttributeSpec, Graph, validate_partition
from .partitioning import (build_partitions, finish_map, partition_graph)
from .runner import (algorithm_class, load_store, graph_from_partitions,
                     result_digest, run_algorithm)

log = logging.getLogger(__name__)

ORACLE_NAMES = {"cc": "connected-components", "max": "max-vertex",
                "sssp": "sssp", "pagerank": "pagerank"}


# ---------------------------------------------------------------------------
# ingest

def parse_edge_list(path):
    """Returns (rows, any_weights). rows: [(src_label, dst_label, weight)],
    weight None when the line has two fields."""
    rows = []
    any_weights = False
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = text.split()
            if len(fields) not in (2, 3):
                raise GraphParseError(path, line_no,
                                      f"expected 'src dst [weight]', got {text!r}")
            weight = None
            if len(fields) == 3:
                try:
                    weight = float(fields[2])
                except ValueError:
                    raise GraphParseError(path, line_no,
                                          f"bad weight {fields[2]!r}") from None
                any_weights = True
            rows.append((fields[0], fields[1], weight))
    if not rows:
        raise GraphParseError(path, 0, "no edges found")
    return rows, any_weights


def remap_labels(rows):
    """Dense ids for vertex labels; numeric labels sort numerically."""
    labels = set()
    for u, v, _ in rows:
        labels.add(u)
        labels.add(v)
    numeric = all(label.lstrip("-").isdigit() for label in labels)
    ordered = sorted(labels, key=(lambda s: int(s)) if numeric else None)
    return {label: vid for vid, label in enumerate(ordered)}


def dedup_edges(rows, idmap, directed):
    """Collapse parallel edges: weight = min over duplicates, count kept.
    Returns (edges, weights, multiplicity, duplicate_count)."""
    weights, counts = {}, {}
    for u_label, v_label, w in rows:
        u, v = idmap[u_label], idmap[v_label]
        key = (u, v) if directed or u <= v else (v, u)
        counts[key] = counts.get(key, 0) + 1
        if w is not None:
            old = weights.get(key)
            weights[key] = w if old is None else min(old, w)
    duplicates = sum(c - 1 for c in counts.values())
    edges = sorted(counts)
    return edges, weights, counts, duplicates


def _both_directions(values, directed):
    if directed:
        return dict(values)
    out = {}
    for (u, v), val in values.items():
        out[(u, v)] = val
        out[(v, u)] = val
    return out


def cmd_ingest(args):
    rows, any_weights = parse_edge_list(args.edge_list)
    idmap = remap_labels(rows)
    edges, weights, counts, duplicates = dedup_edges(rows, idmap, args.directed)
    if duplicates:
        log.warning("collapsed %d duplicate edges", duplicates)

    name = args.graph_name or _sanitize(Path(args.edge_list).stem)
    graph = Graph.from_edges(name, edges, directed=args.directed,
                             vertices=idmap.values())
    if args.strategy == "imported":
        if not args.map_file:
            raise PartitioningError("--strategy imported requires --map-file")
        assignment = _read_label_map(args.map_file, idmap, args.partitions)
        pmap = finish_map(graph, args.partitions, assignment)
    else:
        pmap = partition_graph(graph, args.partitions, args.strategy,
                               slack=args.slack)
    for warning in pmap.warnings:
        log.warning("%s", warning)

    partitions = build_partitions(graph, pmap)
    for p in partitions:
        violations = validate_partition(p, peers=partitions)
        if violations:  # indicates an ingest bug, never expected
            raise PartitioningError(
                f"partition {p.id} failed validation: {violations[0]}")

    schema = [AttributeSpec("label", "string", "vertex")]
    values = {"label": {vid: label for label, vid in idmap.items()}}
    if any_weights:
        schema.append(AttributeSpec("weight", "float64", "edge"))
        values["weight"] = _both_directions(weights, args.directed)
    if duplicates:
        schema.append(AttributeSpec("multiplicity", "int64", "edge"))
        values["multiplicity"] = _both_directions(
            {k: c for k, c in counts.items() if c > 1}, args.directed)
    if args.schema_file:
        with open(args.schema_file, encoding="utf-8") as fh:
            for entry in json.load(fh):
                schema.append(AttributeSpec(entry["name"], entry["type"],
                                            entry.get("scope", "vertex")))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pmap.save(out / "partition-map.tsv")
    with open(out / "idmap.tsv", "w", encoding="utf-8") as fh:
        for label, vid in sorted(idmap.items(), key=lambda kv: kv[1]):
            fh.write(f"{label}\t{vid}\n")
    for p in partitions:
        store.write_slices(p, schema, values, out / f"partition-{p.id}",
                           graph=name, directed=args.directed, k=pmap.k)

    print(f"graph {name}: {graph.num_vertices()} vertices, "
          f"{graph.num_edges()} edges, edge cut {pmap.edge_cut}"
          + (f", {duplicates} duplicate edges collapsed" if duplicates else ""))
    for p in partitions:
        sizes = sorted((len(sg.vertices) for sg in p.subgraphs), reverse=True)
        print(f"  partition {p.id}: {len(p.vertices)} vertices, "
              f"{len(p.subgraphs)} sub-graphs, sizes {sizes[:8]}"
              + ("..." if len(sizes) > 8 else ""))
    return 0


def _sanitize(name):
    cleaned = "".join(c if c.isalnum() or c in "_-" else "-" for c in name)
    return cleaned or "graph"


def _read_label_map(path, idmap, k):
    assignment = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = text.split()
            if len(fields) != 2:
                raise GraphParseError(path, line_no,
                                      f"expected 'vertex partition', got {text!r}")
            label, pid_text = fields
            if label not in idmap:
                raise GraphParseError(path, line_no,
                                      f"unknown vertex {label!r}")
            try:
                pid = int(pid_text)
            except ValueError:
                raise GraphParseError(path, line_no,
                                      f"bad partition id {pid_text!r}") from None
            if not 0 <= pid < k:
                raise GraphParseError(path, line_no,
                                      f"partition {pid} outside [0, {k})")
            assignment[idmap[label]] = pid
    missing = set(idmap.values()) - set(assignment)
    if missing:
        raise PartitioningError(
            f"map file leaves {len(missing)} vertices unassigned")
    return assignment


# ---------------------------------------------------------------------------
# run

def algorithm_params(args):
    name = args.algorithm
    params = {}
    if name == "sssp":
        if args.source is None:
            raise PartitioningError("sssp requires --source")
        params = {"source": args.source, "weighted": args.weighted}
    elif name == "pagerank":
        params = {"iterations": args.iterations, "damping": args.damping,
                  "dangling": args.dangling}
        if args.epsilon is not None:
            params.update(mode="converge", epsilon=args.epsilon)
    elif name == "blockrank":
        params = {"iterations": args.iterations, "damping": args.damping,
                  "dangling": args.dangling,
                  "epsilon": args.epsilon if args.epsilon is not None else 1e-6}
    return params


def engine_config_from(args):
    return EngineConfig(
        pool_width=args.pool_width,
        message_order=args.message_order,
        max_supersteps=args.max_supersteps,
        meta_diameter=not args.no_meta_diameter,
    )


def cmd_run(args):
    cls = algorithm_class(args.algorithm)
    params = algorithm_params(args)
    attrs = []
    root = Path(args.store)
    first_meta = store.read_metadata(_partition_dirs(root)[0])
    declared = {entry["name"] for entry in first_meta["schema"]}
    if args.weighted and "weight" in declared:
        attrs.append("weight")
    if args.algorithm == "max-vertex" and "value" in declared:
        attrs.append("value")

    if args.transport == "socket":
        report, values = _run_socket(args, root, params, first_meta, attrs)
    else:
        report, values = _run_memory(args, root, params, attrs, first_meta)

    _emit_report(args, report, values)
    return 0


def _partition_dirs(root):
    root = Path(root)
    if not root.is_dir():
        raise GoffishError(f"store directory {root} does not exist")
    dirs = sorted(p for p in root.iterdir()
                  if p.is_dir() and (p / "metadata.json").exists())
    if not dirs:
        raise GoffishError(f"no partition directories under {root}")
    return dirs


def _run_memory(args, root, params, attrs, meta):
    t0 = time.perf_counter()
    partitions, _ = load_store(root, attrs)
    load_s = time.perf_counter() - t0
    config = engine_config_from(args)

    digests, superstep_counts, compute_times = [], [], []
    result = None
    for _ in range(args.repeat):
        t0 = time.perf_counter()
        result = run_algorithm(args.algorithm, partitions, params, config,
                               mode=args.mode)
        compute_times.append(time.perf_counter() - t0)
        attr = algorithm_class(args.algorithm).result_attr
        digests.append(result_digest(result.vertex_values[attr]))
        superstep_counts.append(result.stats.supersteps)
    if len(set(digests)) != 1 or len(set(superstep_counts)) != 1:
        raise GoffishError(
            f"nondeterministic repeats: digests {digests}, "
            f"supersteps {superstep_counts}")

    report = _build_report(args, meta, result, digests[0], load_s, compute_times)
    attr = algorithm_class(args.algorithm).result_attr
    return report, result.vertex_values[attr]


def _run_socket(args, root, params, meta, attrs):
    if args.mode != "subgraph":
        raise GoffishError("socket transport supports --mode subgraph only")
    cls = algorithm_class(args.algorithm)
    if cls.requires_undirected and meta["directed"]:
        raise GoffishError(
            f"{args.algorithm} needs undirected propagation; ingest the "
            "graph without --directed to run it over sockets")
    part_dirs = _partition_dirs(root)
    k = len(part_dirs)

    compute_times, digests, superstep_counts = [], [], []
    result = None
    load_s = 0.0
    for _ in range(args.repeat):
        if args.config:
            with open(args.config, encoding="utf-8") as fh:
                config_data = json.load(fh)
            config_path = args.config
        else:
            ports = _free_ports(k + 1)
            config_data = {
                "transport": "socket",
                "manager": {"host": "127.0.0.1", "port": ports[0]},
                "workers": [{"partition": pid, "host": "127.0.0.1",
                             "port": ports[pid + 1]} for pid in range(k)],
                "pool_width": args.pool_width,
                "message_order": args.message_order,
                "max_supersteps": args.max_supersteps,
            }
            with tempfile.NamedTemporaryFile("w", suffix=".json",
                                             delete=False) as fh:
                json.dump(config_data, fh)
                config_path = fh.name

        manager_endpoint = (config_data["manager"]["host"],
                            config_data["manager"]["port"])
        procs = [subprocess.Popen(
            [sys.executable, "-m", "goffish.worker",
             "--config", config_path,
             "--partition", str(pid),
             "--store", str(part_dirs[pid]),
             "--algorithm", args.algorithm,
             "--params", json.dumps(params)])
            for pid in range(k)]
        t0 = time.perf_counter()
        try:
            result = net.run_manager(k, manager_endpoint,
                                     EngineConfig(transport="socket",
                                                  pool_width=args.pool_width,
                                                  message_order=args.message_order,
                                                  max_supersteps=args.max_supersteps))
        finally:
            for proc in procs:
                if proc.wait(timeout=60) != 0:
                    log.warning("worker exited with %s", proc.returncode)
        compute_times.append(time.perf_counter() - t0)
        attr = cls.result_attr
        digests.append(result_digest(result.vertex_values[attr]))
        superstep_counts.append(result.stats.supersteps)
    if len(set(digests)) != 1 or len(set(superstep_counts)) != 1:
        raise GoffishError(f"nondeterministic repeats: {digests}")
    report = _build_report(args, meta, result, digests[0], load_s, compute_times)
    return report, result.vertex_values[cls.result_attr]


def _free_ports(n):
    socks = []
    for _ in range(n):
        s = socketlib.socket()
        s.bind(("127.0.0.1", 0))
        socks.append(s)
    ports = [s.getsockname()[1] for s in socks]
    for s in socks:
        s.close()
    return ports


def _build_report(args, meta, result, digest, load_s, compute_times):
    stats = result.stats
    supersteps = stats.supersteps
    pids = sorted({pid for step in stats.steps
                   for pid in step.partition_wall_s})
    wall = {str(pid): [step.partition_wall_s.get(pid, 0.0)
                       for step in stats.steps] for pid in pids}
    report = {
        "algorithm": args.algorithm,
        "graph": meta["graph"],
        "k": meta["k"],
        "transport": args.transport,
        "mode": args.mode,
        "seed": args.seed,
        "supersteps": supersteps,
        "messages": [{"superstep": s.superstep, "total": s.sent_total,
                      "remote": s.sent_remote, "local": s.sent_local}
                     for s in stats.steps],
        "wall_times_s": wall,
        "load_time_s": load_s,
        "compute_time_s": sum(compute_times) / len(compute_times),
        "result_digest": digest,
        "summary": _summary(args.algorithm, result),
        "diagnostics": stats.diagnostics,
    }
    if args.repeat > 1:
        report["repeat"] = {"runs": args.repeat,
                            "compute_time_s": {
                                "mean": sum(compute_times) / len(compute_times),
                                "min": min(compute_times),
                                "max": max(compute_times)}}
    return report


def _summary(algorithm, result):
    attr = algorithm_class(algorithm).result_attr
    values = result.vertex_values[attr]
    if algorithm == "connected-components":
        return {"components": len(set(values.values()))}
    if algorithm == "max-vertex":
        return {"max_value": max(values.values())}
    if algorithm == "sssp":
        unreachable = sum(1 for v in values.values() if math.isinf(v))
        return {"reached": len(values) - unreachable, "unreachable": unreachable}
    rounds = result.subgraph_values.get("rounds", {})
    return {"rank_sum": math.fsum(values.values()),
            "rounds": max(rounds.values()) if rounds else 0}


def _emit_report(args, report, values):
    text = json.dumps(report, indent=2, sort_keys=True)
    print(text)
    if args.report_out:
        Path(args.report_out).write_text(text + "\n", encoding="utf-8")
    if args.values_out:
        _write_values(args.values_out, values)
    if args.summary:
        print(_summary_table(report), file=sys.stderr)


def _summary_table(report):
    lines = [f"algorithm      {report['algorithm']} ({report['mode']}, "
             f"{report['transport']})",
             f"graph          {report['graph']} (k={report['k']})",
             f"supersteps     {report['supersteps']}",
             f"messages       total={sum(m['total'] for m in report['messages'])} "
             f"remote={sum(m['remote'] for m in report['messages'])}",
             f"load/compute   {report['load_time_s']:.3f}s / "
             f"{report['compute_time_s']:.3f}s",
             f"digest         {report['result_digest'][:16]}..."]
    for key, value in sorted(report["summary"].items()):
        lines.append(f"{key:<14} {value}")
    return "\n".join(lines)


def _write_values(path, values):
    with open(path, "w", encoding="utf-8") as fh:
        for vid in sorted(values):
            fh.write(f"{vid}\t{values[vid]!r}\n")


# ---------------------------------------------------------------------------
# oracle

def cmd_oracle(args):
    name = ORACLE_NAMES[args.algorithm]
    path = Path(args.input)
    if path.is_dir():
        attrs = ["weight"] if args.weighted else []
        partitions, metas = load_store(path, attrs)
        graph, _, vertex_attrs, edge_attrs = graph_from_partitions(partitions)
        graph.directed = metas[0]["directed"]
        weights = edge_attrs.get("weight", {})
        values_attr = vertex_attrs.get("value", {})
    else:
        rows, _ = parse_edge_list(path)
        idmap = remap_labels(rows)
        edges, weights, _, _ = dedup_edges(rows, idmap, args.directed)
        graph = Graph.from_edges("oracle", edges, directed=args.directed,
                                 vertices=idmap.values())
        weights = _both_directions(weights, args.directed)
        values_attr = {}

    if name == "connected-components":
        values = oracles.connected_components(graph.adj)
        summary = {"components": len(set(values.values()))}
    elif name == "max-vertex":
        values = oracles.max_value_per_component(graph.adj, values_attr)
        summary = {"max_value": max(values.values())}
    elif name == "sssp":
        if args.source is None:
            raise GoffishError("sssp oracle requires --source")
        values = oracles.dijkstra(graph.adj, args.source,
                                  weights if args.weighted else None)
        unreachable = sum(1 for v in values.values() if math.isinf(v))
        summary = {"reached": len(values) - unreachable,
                   "unreachable": unreachable}
    else:
        values, rounds = oracles.pagerank(graph.adj, args.iterations,
                                          damping=args.damping,
                                          dangling=args.dangling)
        summary = {"rank_sum": math.fsum(values.values()), "rounds": rounds}

    print(json.dumps({"algorithm": name, "digest": result_digest(values),
                      "summary": summary}, indent=2, sort_keys=True))
    if args.values_out:
        _write_values(args.values_out, values)
    return 0


# ---------------------------------------------------------------------------
# inspect

def cmd_inspect(args):
    root = Path(args.store)
    out = []
    for d in _partition_dirs(root):
        meta = store.read_metadata(d)
        manifest = store.read_manifest(d)
        meta["files"] = len(manifest["files"])
        meta["bytes"] = sum(f["bytes"] for f in manifest["files"])
        out.append(meta)
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


# ---------------------------------------------------------------------------

def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="goffish", description="sub-graph centric graph analytics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="edge list -> partitioned slice store")
    p.add_argument("edge_list")
    p.add_argument("--out", required=True)
    p.add_argument("--partitions", "-k", type=int, default=1)
    p.add_argument("--strategy", default="balanced-greedy",
                   choices=["hash", "balanced-greedy", "imported"])
    p.add_argument("--map-file", help="partition map for --strategy imported")
    p.add_argument("--slack", type=float, default=0.05)
    p.add_argument("--directed", action="store_true")
    p.add_argument("--graph-name")
    p.add_argument("--schema-file", help="extra attribute specs, JSON")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("run", help="execute an algorithm over a store")
    p.add_argument("store")
    p.add_argument("--algorithm", required=True,
                   choices=["max-vertex", "connected-components", "sssp",
                            "pagerank", "blockrank"])
    p.add_argument("--source", type=int)
    p.add_argument("--iterations", type=int, default=30)
    p.add_argument("--damping", type=float, default=0.85)
    p.add_argument("--dangling", default="redistribute",
                   choices=["redistribute", "strict"])
    p.add_argument("--epsilon", type=float, default=None,
                   help="convergence threshold (pagerank/blockrank)")
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--mode", default="subgraph",
                   choices=["subgraph", "vertex-emulation"])
    p.add_argument("--transport", default="memory",
                   choices=["memory", "socket"])
    p.add_argument("--config", help="socket transport config JSON")
    p.add_argument("--repeat", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--pool-width", type=int, default=None)
    p.add_argument("--message-order", default="deterministic",
                   choices=["deterministic", "arrival"])
    p.add_argument("--max-supersteps", type=int, default=10000)
    p.add_argument("--no-meta-diameter", action="store_true",
                   help="skip the all-pairs BFS diameter diagnostic")
    p.add_argument("--summary", action="store_true",
                   help="also print a human-readable table on stderr")
    p.add_argument("--values-out", help="write final values, one per line")
    p.add_argument("--report-out", help="also write the report JSON here")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("oracle", help="single-machine reference results")
    p.add_argument("input", help="store directory or edge-list file")
    p.add_argument("--algorithm", required=True,
                   choices=sorted(ORACLE_NAMES))
    p.add_argument("--source", type=int)
    p.add_argument("--weighted", action="store_true")
    p.add_argument("--directed", action="store_true",
                   help="edge-list input is directed")
    p.add_argument("--iterations", type=int, default=30)
    p.add_argument("--damping", type=float, default=0.85)
    p.add_argument("--dangling", default="redistribute",
                   choices=["redistribute", "strict"])
    p.add_argument("--values-out")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("inspect", help="dump store metadata")
    p.add_argument("store")
    p.set_defaults(func=cmd_inspect)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except GoffishError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
