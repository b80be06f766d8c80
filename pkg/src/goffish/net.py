"""Socket transport: the same worker/manager protocol over TCP.

Frames are length-prefixed (u32 length, u8 kind, payload). Control frames
carry [kind, sender, superstep, extra] in the typed-value encoding; data
frames carry ["batch", superstep, [envelope...]] or ["eos", superstep].
Every worker listens on its own endpoint for peer data and keeps one
control connection to the manager. A worker flushes its data, sends an
end-of-superstep marker to every peer, and only then reports SYNC, so a
peer that has the markers from everyone has all its input messages.

Lifecycle extras on the control connection: HELLO (registration, carries
local graph facts for the shared GraphMeta), SETUP (manager's aggregate
reply), RESULTS (final values and per-superstep rows, JSON, sent after
TERMINATE).
"""

import json
import queue
import socket
import threading
import time

from .engine import (ABORT, MANAGER_ID, RESUME, SYNC, READY_TO_HALT, TERMINATE,
                     ControlMessage, EngineConfig, ExecutionStats, GraphMeta,
                     Manager, MessageEnvelope, RunResult, SuperstepStats,
                     Worker, merge_step_rows)
from .errors import ComputeError, ConfigError, GoffishError, ProtocolError
from .wire import FRAME_CONTROL, FRAME_DATA, decode_value, encode_value, \
    pack_frame, read_frame

HELLO = "HELLO"
SETUP = "SETUP"
RESULTS = "RESULTS"


def _send_frame(sock, kind, value):
    sock.sendall(pack_frame(kind, encode_value(value)))


def _recv_frame(sock):
    frame = read_frame(sock)
    if frame is None:
        return None, None
    kind, payload = frame
    value, _ = decode_value(payload)
    return kind, value


def _env_to_wire(env):
    return [env.target_subgraph, env.target_vertex, env.source_subgraph,
            env.superstep, env.sequence, env.payload]


def _env_from_wire(item):
    target_sg, target_vertex, source_sg, superstep, sequence, payload = item
    return MessageEnvelope(payload, target_sg, target_vertex, source_sg,
                           superstep, sequence)


def _connect_with_retry(endpoint, timeout, interval=0.1):
    """Workers may start before the manager listens; retry briefly."""
    deadline = time.monotonic() + timeout
    while True:
        try:
            return socket.create_connection(endpoint, timeout=timeout)
        except OSError:
            if time.monotonic() >= deadline:
                raise
            time.sleep(interval)


class SocketWorkerFabric:
    """Worker-side endpoints: data listener for peers, control link to the
    manager, lazy outgoing connections."""

    def __init__(self, pid, endpoints, manager_endpoint, timeout=120.0):
        self.pid = pid
        self.endpoints = endpoints  # {pid: (host, port)}
        self.timeout = timeout
        self.worker = None  # bound after Worker construction
        self._out = {}
        self._eos = {}
        self._cond = threading.Condition()
        self._closed = False

        host, port = endpoints[pid]
        self._listener = socket.create_server((host, port))
        self._listener.settimeout(1.0)
        self._accept_thread = threading.Thread(target=self._accept_loop,
                                               daemon=True)
        self._control = _connect_with_retry(manager_endpoint, timeout)

    def start(self, worker):
        self.worker = worker
        self._accept_thread.start()

    # -- data plane ---------------------------------------------------------

    def _accept_loop(self):
        while not self._closed:
            try:
                conn, _ = self._listener.accept()
            except socket.timeout:
                continue
            except OSError:
                return
            conn.settimeout(self.timeout)
            threading.Thread(target=self._read_loop, args=(conn,),
                             daemon=True).start()

    def _read_loop(self, conn):
        try:
            while True:
                kind, value = _recv_frame(conn)
                if kind is None:
                    return
                if kind != FRAME_DATA:
                    raise ProtocolError(f"unexpected frame kind {kind} on data link")
                if value[0] == "batch":
                    _, superstep, items = value
                    self.worker.enqueue(superstep, [_env_from_wire(i) for i in items])
                elif value[0] == "eos":
                    with self._cond:
                        self._eos[value[1]] = self._eos.get(value[1], 0) + 1
                        self._cond.notify_all()
                else:
                    raise ProtocolError(f"unknown data frame tag {value[0]!r}")
        except (ConnectionError, OSError):
            return
        except GoffishError as exc:
            # bad addressing or framing from a peer: abort the whole run
            self.send_control(ControlMessage(ABORT, self.pid, 0, exc))

    def _peer_socket(self, dest):
        sock = self._out.get(dest)
        if sock is None:
            sock = socket.create_connection(self.endpoints[dest],
                                            timeout=self.timeout)
            self._out[dest] = sock
        return sock

    def deliver(self, dest_pid, superstep, envelopes):
        _send_frame(self._peer_socket(dest_pid), FRAME_DATA,
                    ["batch", superstep, [_env_to_wire(e) for e in envelopes]])

    def end_superstep_data(self, superstep):
        for dest in self.endpoints:
            if dest != self.pid:
                _send_frame(self._peer_socket(dest), FRAME_DATA,
                            ["eos", superstep])

    def wait_inbound_complete(self, superstep):
        expected = len(self.endpoints) - 1
        deadline = self.timeout
        with self._cond:
            while self._eos.get(superstep, 0) < expected:
                if not self._cond.wait(timeout=deadline):
                    raise ProtocolError(
                        f"worker {self.pid}: missing end-of-superstep markers "
                        f"for superstep {superstep} "
                        f"({self._eos.get(superstep, 0)}/{expected})")
            self._eos.pop(superstep, None)

    # -- control plane ------------------------------------------------------

    def send_control(self, msg):
        error = None if msg.error is None else repr(msg.error)
        _send_frame(self._control, FRAME_CONTROL,
                    [msg.kind, msg.sender, msg.superstep, error])

    def recv_control(self):
        self._control.settimeout(self.timeout)
        kind, value = _recv_frame(self._control)
        if kind is None:
            raise ProtocolError(f"worker {self.pid}: manager closed the "
                                f"control connection")
        return ControlMessage(value[0], value[1], value[2], value[3])

    def hello(self, local_facts):
        _send_frame(self._control, FRAME_CONTROL,
                    [HELLO, self.pid, 0, json.dumps(local_facts)])
        self._control.settimeout(self.timeout)
        kind, value = _recv_frame(self._control)
        if kind is None or value[0] != SETUP:
            raise ProtocolError(f"expected SETUP, got {value!r}")
        return json.loads(value[3])

    def send_results(self, payload):
        _send_frame(self._control, FRAME_CONTROL,
                    [RESULTS, self.pid, 0, json.dumps(payload)])

    def close(self):
        self._closed = True
        for sock in [self._listener, self._control, *self._out.values()]:
            try:
                sock.close()
            except OSError:
                pass


class SocketManagerFabric:
    """Manager side: accepts one control connection per worker; reader
    threads feed a single queue so Manager stays single-threaded."""

    def __init__(self, k, endpoint, timeout=120.0):
        self.k = k
        self.timeout = timeout
        self._queue = queue.Queue()
        self._conns = {}
        self.results = {}
        self.local_facts = {}
        self._results_events = {pid: threading.Event() for pid in range(k)}
        host, port = endpoint
        self._listener = socket.create_server((host, port))
        self._listener.settimeout(timeout)
        self.endpoint = self._listener.getsockname()

    def wait_for_workers(self):
        while len(self._conns) < self.k:
            conn, _ = self._listener.accept()
            conn.settimeout(self.timeout)
            kind, value = _recv_frame(conn)
            if kind != FRAME_CONTROL or value[0] != HELLO:
                raise ProtocolError(f"expected HELLO, got {value!r}")
            pid = value[1]
            if pid in self._conns:
                raise ProtocolError(f"worker {pid} registered twice")
            self.local_facts[pid] = json.loads(value[3])
            self._conns[pid] = conn
        for pid in self._conns:
            threading.Thread(target=self._read_loop, args=(pid,),
                             daemon=True).start()

    def _read_loop(self, pid):
        conn = self._conns[pid]
        try:
            while True:
                kind, value = _recv_frame(conn)
                if kind is None:
                    return
                tag = value[0]
                if tag == RESULTS:
                    self.results[value[1]] = json.loads(value[3])
                    self._results_events[value[1]].set()
                else:
                    error = value[3]
                    self._queue.put(ControlMessage(
                        tag, value[1], value[2],
                        None if error is None else RuntimeError(error)))
        except (ConnectionError, OSError):
            return

    def broadcast_setup(self, meta_payload):
        for conn in self._conns.values():
            _send_frame(conn, FRAME_CONTROL,
                        [SETUP, MANAGER_ID, 0, json.dumps(meta_payload)])

    def recv_worker_control(self, timeout):
        try:
            return self._queue.get(timeout=timeout)
        except queue.Empty:
            return None

    def broadcast_control(self, msg):
        for conn in self._conns.values():
            try:
                _send_frame(conn, FRAME_CONTROL,
                            [msg.kind, msg.sender, msg.superstep, None])
            except OSError:
                pass

    def collect_results(self):
        for pid, event in self._results_events.items():
            if not event.wait(timeout=self.timeout):
                raise ProtocolError(f"no results from worker {pid}")
        return self.results

    def close(self):
        for sock in [self._listener, *self._conns.values()]:
            try:
                sock.close()
            except OSError:
                pass


# ---------------------------------------------------------------------------
# serialization of results and meta over the control link

def meta_to_payload(meta: GraphMeta):
    return {
        "num_vertices": meta.num_vertices,
        "num_edges": meta.num_edges,
        "num_subgraphs": meta.num_subgraphs,
        "all_subgraphs": meta.all_subgraphs,
        "subgraphs_per_partition": {str(k): v for k, v
                                    in meta.subgraphs_per_partition.items()},
        "has_dangling": meta.has_dangling,
        "directed": meta.directed,
        "k": meta.k,
        "avg_out_degree": meta.avg_out_degree,
    }


def meta_from_payload(data) -> GraphMeta:
    return GraphMeta(
        data["num_vertices"], data["num_edges"], data["num_subgraphs"],
        data["all_subgraphs"],
        {int(k): v for k, v in data["subgraphs_per_partition"].items()},
        data["has_dangling"], data["directed"], data["k"],
        data["avg_out_degree"])


def aggregate_meta(local_facts) -> GraphMeta:
    v = sum(f["num_vertices"] for f in local_facts.values())
    entries = sum(f["adjacency_entries"] for f in local_facts.values())
    sgids = sorted(sgid for f in local_facts.values() for sgid in f["subgraphs"])
    directed = any(f["directed"] for f in local_facts.values())
    return GraphMeta(
        num_vertices=v,
        num_edges=entries if directed else entries // 2,
        num_subgraphs=len(sgids),
        all_subgraphs=sgids,
        subgraphs_per_partition={f["partition"]: len(f["subgraphs"])
                                 for f in local_facts.values()},
        has_dangling=any(f["has_dangling"] for f in local_facts.values()),
        directed=directed,
        k=len(local_facts),
        avg_out_degree=entries / v if v else 0.0,
    )


def local_facts_for(partition):
    entries = 0
    dangling = False
    for sg in partition.subgraphs:
        for vid in sg.vertices:
            deg = sg.out_degree(vid)
            entries += deg
            dangling = dangling or deg == 0
    return {
        "partition": partition.id,
        "num_vertices": len(partition.vertices),
        "adjacency_entries": entries,
        "subgraphs": sorted(sg.id for sg in partition.subgraphs),
        "has_dangling": dangling,
        "directed": partition.directed,
    }


def rows_to_payload(rows):
    return [{
        "superstep": r.superstep,
        "sent_total": r.sent_total,
        "sent_remote": r.sent_remote,
        "sent_local": r.sent_local,
        "delivered": r.delivered,
        "invoked": r.invoked,
        "partition_wall_s": {str(k): v for k, v in r.partition_wall_s.items()},
        "subgraph_compute_s": {str(k): v for k, v in r.subgraph_compute_s.items()},
    } for r in rows]


def rows_from_payload(items):
    rows = []
    for d in items:
        rows.append(SuperstepStats(
            d["superstep"], d["sent_total"], d["sent_remote"], d["sent_local"],
            d["delivered"], d["invoked"],
            {int(k): v for k, v in d["partition_wall_s"].items()},
            {int(k): v for k, v in d["subgraph_compute_s"].items()}))
    return rows


def values_to_payload(vertex_values, subgraph_values):
    return {
        "vertex": {attr: {str(k): v for k, v in vals.items()}
                   for attr, vals in vertex_values.items()},
        "subgraph": {attr: {str(k): _jsonable(v) for k, v in vals.items()}
                     for attr, vals in subgraph_values.items()},
    }


def _jsonable(value):
    return value if isinstance(value, (int, float, str, bool, list,
                                       type(None))) else repr(value)


# ---------------------------------------------------------------------------
# entry points

def run_worker(partition, app_factory, config, endpoints, manager_endpoint):
    """Run one worker process against a socket manager; blocks until the run
    terminates, then uploads results."""
    fabric = SocketWorkerFabric(partition.id, endpoints, manager_endpoint,
                                timeout=config.control_timeout)
    try:
        meta = meta_from_payload(fabric.hello(local_facts_for(partition)))
        worker = Worker(partition, app_factory, meta, config, fabric)
        fabric.start(worker)
        worker.run()
        vertex_values, subgraph_values = worker.collect_values()
        fabric.send_results({
            "rows": rows_to_payload(worker.rows),
            "values": values_to_payload(vertex_values, subgraph_values),
        })
        worker.shutdown()
    finally:
        fabric.close()


def run_manager(k, endpoint, config=None):
    """Coordinate k socket workers; returns (RunResult, raw worker results).

    Vertex values come back with JSON string keys; they are converted to
    ints here. The meta-graph diameter diagnostic is unavailable in socket
    mode (no worker sees the whole graph) and reports None.
    """
    config = config or EngineConfig(transport="socket")
    fabric = SocketManagerFabric(k, endpoint, timeout=config.control_timeout)
    try:
        fabric.wait_for_workers()
        meta = aggregate_meta(fabric.local_facts)
        fabric.broadcast_setup(meta_to_payload(meta))
        manager = Manager(k, config, fabric)
        manager.run()
        if manager.error is not None:
            raise manager.error if isinstance(manager.error, GoffishError) \
                else ComputeError(-1, -1, -1, manager.error)
        results = fabric.collect_results()
    finally:
        fabric.close()

    all_rows = [rows_from_payload(r["rows"]) for r in results.values()]
    steps = merge_step_rows(manager.supersteps, all_rows)
    diagnostics = {
        "d": None,
        "v": meta.num_vertices,
        "e": meta.num_edges,
        "p": meta.k,
        "s": meta.subgraphs_per_partition,
        "c": config.resolved_pool_width(),
        "g": meta.avg_out_degree,
    }
    stats = ExecutionStats(manager.supersteps, steps, diagnostics,
                           manager.control_log)
    vertex_values, subgraph_values = {}, {}
    for result in results.values():
        for attr, vals in result["values"]["vertex"].items():
            vertex_values.setdefault(attr, {}).update(
                {int(k): v for k, v in vals.items()})
        for attr, vals in result["values"]["subgraph"].items():
            subgraph_values.setdefault(attr, {}).update(
                {int(k): v for k, v in vals.items()})
    return RunResult(vertex_values, subgraph_values, stats)
