"""Socket transport tests: thread-hosted workers for speed, plus a true
multi-process smoke test through the CLI."""

import json
import random
import socket as socketlib
import subprocess
import sys
import threading

import pytest

from goffish import net
from goffish.algorithms import SSSPCompute
from goffish.engine import ComputeApp, EngineConfig
from goffish.errors import GoffishError
from goffish.model import make_subgraph_id
from goffish.runner import run_algorithm
from support import (make_partitions, protocol_behaviors, random_weights,
                     simulate_bsp, er_graph, partitions_for)


def free_ports(n):
    socks = []
    for _ in range(n):
        s = socketlib.socket()
        s.bind(("127.0.0.1", 0))
        socks.append(s)
    ports = [s.getsockname()[1] for s in socks]
    for s in socks:
        s.close()
    return ports


def run_over_sockets(partitions, app_factory, config=None):
    """Host k workers and the manager in threads of this process."""
    k = len(partitions)
    ports = free_ports(k + 1)
    manager_endpoint = ("127.0.0.1", ports[0])
    endpoints = {pid: ("127.0.0.1", ports[pid + 1]) for pid in range(k)}
    config = config or EngineConfig(transport="socket", pool_width=1,
                                    control_timeout=30.0)

    result_holder = {}
    errors = []

    def manage():
        try:
            result_holder["result"] = net.run_manager(k, manager_endpoint, config)
        except Exception as exc:  # surfaced by the test
            errors.append(exc)

    def work(partition):
        try:
            net.run_worker(partition, app_factory, config,
                           endpoints, manager_endpoint)
        except Exception as exc:
            errors.append(exc)

    manager_thread = threading.Thread(target=manage, daemon=True)
    manager_thread.start()
    worker_threads = [threading.Thread(target=work, args=(p,), daemon=True)
                      for p in partitions]
    for t in worker_threads:
        t.start()
    manager_thread.join(timeout=60)
    for t in worker_threads:
        t.join(timeout=60)
    if errors:
        raise errors[0]
    assert "result" in result_holder, "manager never returned"
    return result_holder["result"]


class ScriptedApp(ComputeApp):
    def __init__(self, behavior):
        self.behavior = behavior

    def setup(self, meta, subgraph):
        self.vertex = subgraph.vertices[0]

    def compute(self, ctx, sg, messages):
        targets, halt = self.behavior(self.vertex, ctx.superstep, len(messages))
        for t in targets:
            ctx.send_to_subgraph(make_subgraph_id(t, 0), ctx.superstep)
        if halt:
            ctx.vote_to_halt()


def isolated_workers(k):
    from goffish.model import Graph
    from goffish.partitioning import PartitionMap, build_partitions
    graph = Graph.from_edges("iso", [], vertices=range(k))
    return build_partitions(graph, PartitionMap(k, {v: v for v in range(k)}))


def test_socket_sssp_matches_memory_run():
    g = er_graph(60, 3, seed=44)
    weights = random_weights(g, seed=45)
    parts = partitions_for(g, 3, weights=weights)
    mem = run_algorithm("sssp", parts, {"source": 0, "weighted": True},
                        EngineConfig(pool_width=1, meta_diameter=False))
    sock = run_over_sockets(parts, lambda: SSSPCompute(source=0, weighted=True))
    assert sock.vertex_values["distance"] == mem.vertex_values["distance"]
    assert sock.stats.supersteps == mem.stats.supersteps
    mem_msgs = [(s.sent_total, s.sent_remote) for s in mem.stats.steps]
    sock_msgs = [(s.sent_total, s.sent_remote) for s in sock.stats.steps]
    assert sock_msgs == mem_msgs


def test_socket_protocol_sample_matches_reference():
    rng = random.Random(99)
    for k in (2, 3):
        alphabet = protocol_behaviors(k)
        combos = [tuple(rng.randrange(len(alphabet)) for _ in range(k))
                  for _ in range(6)]
        for combo in combos:
            behaviors = [alphabet[i] for i in combo]
            expected, _, sent = simulate_bsp(k, behaviors)
            parts = isolated_workers(k)
            result = run_over_sockets(
                parts, _combo_factory(alphabet, combo))
            assert result.stats.supersteps == expected, combo
            assert [s.sent_total for s in result.stats.steps] == sent, combo


def _combo_factory(alphabet, combo):
    def factory():
        return _DispatchApp(alphabet, combo)
    return factory


class _DispatchApp(ComputeApp):
    """Per-worker behavior chosen by the sub-graph's partition."""

    def __init__(self, alphabet, combo):
        self.alphabet = alphabet
        self.combo = combo

    def setup(self, meta, subgraph):
        self.inner = ScriptedApp(self.alphabet[self.combo[subgraph.partition]])
        self.inner.setup(meta, subgraph)

    def compute(self, ctx, sg, messages):
        self.inner.compute(ctx, sg, messages)


def test_socket_worker_abort_propagates():
    class Exploding(ComputeApp):
        def setup(self, meta, subgraph):
            self.vertex = subgraph.vertices[0]

        def compute(self, ctx, sg, messages):
            if self.vertex == 1:
                raise RuntimeError("kaboom")
            ctx.vote_to_halt()

    with pytest.raises(GoffishError):
        run_over_sockets(isolated_workers(2), lambda: Exploding())


def test_multiprocess_smoke_through_cli(tmp_path):
    edge_file = tmp_path / "g.txt"
    rng = random.Random(3)
    lines = set()
    while len(lines) < 60:
        u, v = rng.randrange(30), rng.randrange(30)
        if u != v:
            lines.add((min(u, v), max(u, v)))
    edge_file.write_text("\n".join(f"{u} {v}" for u, v in sorted(lines)) + "\n")
    store_dir = tmp_path / "store"
    ingest = subprocess.run(
        [sys.executable, "-m", "goffish.cli", "ingest", str(edge_file),
         "--out", str(store_dir), "-k", "3"],
        capture_output=True, text=True)
    assert ingest.returncode == 0, ingest.stderr

    def run_transport(transport):
        proc = subprocess.run(
            [sys.executable, "-m", "goffish.cli", "run", str(store_dir),
             "--algorithm", "connected-components", "--transport", transport],
            capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        return json.loads(proc.stdout)

    mem = run_transport("memory")
    sock = run_transport("socket")
    assert sock["result_digest"] == mem["result_digest"]
    assert sock["supersteps"] == mem["supersteps"]
    assert sock["messages"] == mem["messages"]
