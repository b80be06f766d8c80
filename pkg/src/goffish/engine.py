"""Bulk-synchronous executor for sub-graph compute apps.

One worker owns each partition; a manager coordinates superstep barriers.
Per superstep a worker invokes the user Compute on every sub-graph that is
active or has input messages, flushes all emitted data messages, and then
reports SYNC (it computed something) or READY_TO_HALT (nothing to invoke)
to the manager. The manager answers RESUME to everyone, or TERMINATE once
all workers are ready to halt in the same superstep — by then no sub-graph
is active and no message can be in flight, so that round is a probe and is
not counted as an executed superstep.

Messages created in superstep t are visible to Compute only in t+1. A
sub-graph that voted to halt is re-invoked (and reactivated) by any
incoming message. In deterministic order mode each sub-graph's input
iterator is sorted by (source sub-graph, send sequence), which makes final
values and superstep counts reproducible run to run regardless of pool
width.
"""

import logging
import os
import queue
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .errors import (AddressingError, ComputeError, ConfigError, ProtocolError,
                     SuperstepLimitError)
from .model import subgraph_partition, subgraph_neighbors
from .partitioning import build_meta_graph

log = logging.getLogger(__name__)

SYNC = "SYNC"
RESUME = "RESUME"
READY_TO_HALT = "READY_TO_HALT"
TERMINATE = "TERMINATE"
ABORT = "ABORT"

MANAGER_ID = -1


@dataclass
class ControlMessage:
    kind: str
    sender: int
    superstep: int
    error: object = None


@dataclass
class MessageEnvelope:
    """One addressed payload; sequence is a running per-source counter."""

    payload: object
    target_subgraph: int
    target_vertex: int | None
    source_subgraph: int
    superstep: int
    sequence: int


@dataclass
class EngineConfig:
    transport: str = "memory"
    pool_width: int | None = None      # None: hardware parallelism
    message_order: str = "deterministic"   # or "arrival"
    max_supersteps: int = 10000
    meta_diameter: bool = True
    debug_traces: bool = False
    control_timeout: float = 120.0
    workers: list = field(default_factory=list)   # socket mode endpoints
    manager: object = None                        # socket mode endpoint

    def resolved_pool_width(self):
        return self.pool_width if self.pool_width else (os.cpu_count() or 1)


@dataclass
class GraphMeta:
    """Static whole-graph facts shared with every Compute via its context."""

    num_vertices: int
    num_edges: int
    num_subgraphs: int
    all_subgraphs: list
    subgraphs_per_partition: dict
    has_dangling: bool
    directed: bool
    k: int
    avg_out_degree: float


def graph_meta_from_partitions(partitions) -> GraphMeta:
    v = sum(len(p.vertices) for p in partitions)
    entries = 0
    dangling = False
    sgids = []
    per_part = {}
    for p in partitions:
        per_part[p.id] = len(p.subgraphs)
        for sg in p.subgraphs:
            sgids.append(sg.id)
            for vid in sg.vertices:
                deg = sg.out_degree(vid)
                entries += deg
                if deg == 0:
                    dangling = True
    directed = any(p.directed for p in partitions)
    edges = entries if directed else entries // 2
    return GraphMeta(v, edges, len(sgids), sorted(sgids), per_part, dangling,
                     directed, len(partitions), entries / v if v else 0.0)


@dataclass
class SuperstepStats:
    superstep: int
    sent_total: int = 0
    sent_remote: int = 0
    sent_local: int = 0
    delivered: int = 0
    invoked: int = 0
    partition_wall_s: dict = field(default_factory=dict)
    subgraph_compute_s: dict = field(default_factory=dict)


@dataclass
class ExecutionStats:
    supersteps: int
    steps: list
    diagnostics: dict
    control_log: list
    message_log: list | None = None
    worker_trace: list | None = None

    def total_sent(self):
        return sum(s.sent_total for s in self.steps)

    def total_remote(self):
        return sum(s.sent_remote for s in self.steps)


@dataclass
class RunResult:
    vertex_values: dict
    subgraph_values: dict
    stats: ExecutionStats


class ComputeApp:
    """User contract: stateful per sub-graph; topology must not be mutated.

    setup() runs once before superstep 1; compute() once per superstep the
    sub-graph is active or messaged. All sends and halting go through ctx.
    """

    def setup(self, meta: GraphMeta, subgraph):
        pass

    def compute(self, ctx, subgraph, messages):
        raise NotImplementedError


class SubgraphContext:
    """Messaging and halt surface handed to one Compute invocation."""

    def __init__(self, worker, subgraph, superstep):
        self._worker = worker
        self._subgraph = subgraph
        self.superstep = superstep
        self.meta = worker.meta
        self._out = []
        self._halted = False

    @property
    def num_vertices(self):
        return self.meta.num_vertices

    def _emit(self, target_sg, target_vertex, payload):
        seq = self._worker.next_sequence(self._subgraph.id)
        self._out.append(MessageEnvelope(payload, target_sg, target_vertex,
                                         self._subgraph.id, self.superstep, seq))

    def send_to_subgraph(self, subgraph_id, payload):
        self._emit(subgraph_id, None, payload)

    def send_to_subgraph_vertex(self, subgraph_id, vertex_id, payload):
        self._emit(subgraph_id, vertex_id, payload)

    def send_to_all_subgraph_neighbors(self, payload):
        for sgid in sorted(subgraph_neighbors(self._subgraph)):
            self._emit(sgid, None, payload)

    def send_to_all_subgraphs(self, payload):
        for sgid in self.meta.all_subgraphs:
            self._emit(sgid, None, payload)

    def vote_to_halt(self):
        self._halted = True


class Worker:
    """Executes one partition's sub-graphs; drives the superstep loop."""

    def __init__(self, partition, app_factory, meta, config, fabric):
        self.partition = partition
        self.pid = partition.id
        self.meta = meta
        self.config = config
        self.fabric = fabric
        self.subgraphs = {sg.id: sg for sg in partition.subgraphs}
        self.subgraph_ids = sorted(self.subgraphs)
        self.apps = {}
        for sgid in self.subgraph_ids:
            app = app_factory()
            app.setup(meta, self.subgraphs[sgid])
            self.apps[sgid] = app
        self.active = {sgid: True for sgid in self.subgraph_ids}
        self._sequences = {sgid: 0 for sgid in self.subgraph_ids}
        self._pending = {}
        self._pending_lock = threading.Lock()
        self._emissions = {}
        self.rows = []
        self.trace = []
        self.message_log = [] if config.debug_traces else None
        width = config.resolved_pool_width()
        self._pool = (ThreadPoolExecutor(max_workers=width,
                                         thread_name_prefix=f"compute-p{self.pid}")
                      if width > 1 and len(self.subgraph_ids) > 1 else None)

    # -- inbound -----------------------------------------------------------

    def enqueue(self, superstep, envelopes):
        """Accept envelopes for delivery at `superstep`; validates targets."""
        with self._pending_lock:
            bucket = self._pending.setdefault(superstep, {})
            for env in envelopes:
                sg = self.subgraphs.get(env.target_subgraph)
                if sg is None:
                    raise AddressingError(
                        f"message from sub-graph {env.source_subgraph} addresses "
                        f"unknown sub-graph {env.target_subgraph} "
                        f"(partition {self.pid}, superstep {env.superstep})")
                if env.target_vertex is not None and not sg.has_vertex(env.target_vertex):
                    raise AddressingError(
                        f"message from sub-graph {env.source_subgraph} addresses "
                        f"vertex {env.target_vertex} absent from sub-graph "
                        f"{env.target_subgraph} (superstep {env.superstep})")
                bucket.setdefault(env.target_subgraph, []).append(env)

    def _take_inbox(self, superstep):
        with self._pending_lock:
            return self._pending.pop(superstep, {})

    def next_sequence(self, sgid):
        self._sequences[sgid] += 1
        return self._sequences[sgid]

    # -- superstep loop ----------------------------------------------------

    def run(self):
        try:
            self._loop()
        except Exception as exc:  # surfaces via the manager
            log.debug("worker %d aborting: %r", self.pid, exc)
            self.fabric.send_control(ControlMessage(ABORT, self.pid, 0, exc))
            self._drain_until_terminate()

    def _loop(self):
        superstep = 1
        while True:
            started = time.perf_counter()
            inbox = self._take_inbox(superstep)
            if self.config.message_order == "deterministic":
                for msgs in inbox.values():
                    msgs.sort(key=lambda e: (e.source_subgraph, e.sequence))
            invoke = [sgid for sgid in self.subgraph_ids
                      if self.active[sgid] or sgid in inbox]
            row = SuperstepStats(superstep)
            row.delivered = sum(len(v) for v in inbox.values())
            row.invoked = len(invoke)
            if invoke:
                self._invoke_all(invoke, inbox, superstep, row)
                self._flush(superstep, row)
            self.fabric.end_superstep_data(superstep)
            row.partition_wall_s[self.pid] = time.perf_counter() - started
            self.rows.append(row)
            if self.config.debug_traces:
                self.trace.append((self.pid, superstep, started, time.perf_counter()))
            kind = SYNC if invoke else READY_TO_HALT
            self.fabric.send_control(ControlMessage(kind, self.pid, superstep))

            reply = self.fabric.recv_control()
            if reply.kind == TERMINATE:
                return
            if reply.kind != RESUME or reply.superstep != superstep + 1:
                raise ProtocolError(
                    f"worker {self.pid} expected RESUME for superstep "
                    f"{superstep + 1}, got {reply.kind} for {reply.superstep}")
            self.fabric.wait_inbound_complete(superstep)
            superstep += 1

    def _drain_until_terminate(self):
        try:
            while True:
                reply = self.fabric.recv_control()
                if reply.kind == TERMINATE:
                    return
        except Exception:
            return

    def _invoke_one(self, sgid, inbox, superstep, row):
        sg = self.subgraphs[sgid]
        ctx = SubgraphContext(self, sg, superstep)
        started = time.perf_counter()
        try:
            self.apps[sgid].compute(ctx, sg, inbox.get(sgid, []))
        except AddressingError:
            raise
        except Exception as exc:
            raise ComputeError(self.pid, sgid, superstep, exc) from exc
        self.active[sgid] = not ctx._halted
        self._emissions[sgid] = ctx._out
        row.subgraph_compute_s[sgid] = time.perf_counter() - started

    def _invoke_all(self, invoke, inbox, superstep, row):
        if self._pool is None or len(invoke) == 1:
            for sgid in invoke:
                self._invoke_one(sgid, inbox, superstep, row)
        else:
            futures = [self._pool.submit(self._invoke_one, sgid, inbox,
                                         superstep, row)
                       for sgid in invoke]
            for future in futures:
                future.result()

    def _flush(self, superstep, row):
        batches = {}
        for sgid in sorted(self._emissions):
            for env in self._emissions[sgid]:
                dest = subgraph_partition(env.target_subgraph)
                if not 0 <= dest < self.meta.k:
                    raise AddressingError(
                        f"sub-graph {env.target_subgraph} maps to partition {dest}, "
                        f"outside [0, {self.meta.k}) (superstep {superstep})")
                batches.setdefault(dest, []).append(env)
                row.sent_total += 1
                if dest == self.pid:
                    row.sent_local += 1
                else:
                    row.sent_remote += 1
                if self.message_log is not None:
                    self.message_log.append(
                        (superstep, env.source_subgraph, env.target_subgraph))
        self._emissions = {}
        for dest in sorted(batches):
            if dest == self.pid:
                self.enqueue(superstep + 1, batches[dest])
            else:
                self.fabric.deliver(dest, superstep + 1, batches[dest])

    # -- results -----------------------------------------------------------

    def collect_values(self):
        vertex_values, subgraph_values = {}, {}
        for sgid in self.subgraph_ids:
            sg = self.subgraphs[sgid]
            for attr, values in sg.vertex_values.items():
                vertex_values.setdefault(attr, {}).update(values)
            for attr, value in sg.subgraph_values.items():
                subgraph_values.setdefault(attr, {})[sgid] = value
        return vertex_values, subgraph_values

    def shutdown(self):
        if self._pool is not None:
            self._pool.shutdown(wait=False)


class Manager:
    """Collects one control message per worker per superstep and answers
    RESUME or TERMINATE; single-threaded over control messages."""

    def __init__(self, k, config, fabric):
        self.k = k
        self.config = config
        self.fabric = fabric
        self.control_log = []
        self.supersteps = 0
        self.error = None

    def run(self):
        superstep = 1
        while True:
            batch = self._collect(superstep)
            abort = next((m for m in batch if m.kind == ABORT), None)
            if abort is not None:
                self._broadcast(ControlMessage(TERMINATE, MANAGER_ID, superstep))
                self.error = abort.error
                self.supersteps = superstep - 1
                return
            if all(m.kind == READY_TO_HALT for m in batch):
                self._broadcast(ControlMessage(TERMINATE, MANAGER_ID, superstep))
                self.supersteps = superstep - 1
                return
            if superstep + 1 > self.config.max_supersteps:
                self._broadcast(ControlMessage(TERMINATE, MANAGER_ID, superstep))
                self.error = SuperstepLimitError(
                    f"no termination after {self.config.max_supersteps} supersteps")
                self.supersteps = superstep
                return
            self._broadcast(ControlMessage(RESUME, MANAGER_ID, superstep + 1))
            superstep += 1

    def _collect(self, superstep):
        batch = []
        seen = set()
        while len(batch) < self.k:
            msg = self.fabric.recv_worker_control(self.config.control_timeout)
            if msg is None:
                raise ProtocolError(
                    f"manager timed out waiting for worker control messages "
                    f"in superstep {superstep} (have {sorted(seen)})")
            if msg.kind == ABORT:
                batch.append(msg)
                self.control_log.append((msg.kind, msg.sender, superstep))
                return batch
            if msg.kind not in (SYNC, READY_TO_HALT):
                raise ProtocolError(
                    f"manager got {msg.kind} from worker {msg.sender} "
                    f"in superstep {superstep}")
            if msg.superstep != superstep:
                raise ProtocolError(
                    f"worker {msg.sender} reported superstep {msg.superstep} "
                    f"during superstep {superstep}")
            if msg.sender in seen:
                raise ProtocolError(
                    f"duplicate control message from worker {msg.sender} "
                    f"in superstep {superstep}")
            seen.add(msg.sender)
            batch.append(msg)
            self.control_log.append((msg.kind, msg.sender, superstep))
        return batch

    def _broadcast(self, msg):
        self.control_log.append((msg.kind, MANAGER_ID, msg.superstep))
        self.fabric.broadcast_control(msg)


# ---------------------------------------------------------------------------
# in-memory transport

class MemoryFabric:
    """Single-process fabric: direct mailbox delivery, queue-based control."""

    def __init__(self, k):
        self.k = k
        self.workers = {}
        self.manager_queue = queue.Queue()
        self.worker_queues = {pid: queue.Queue() for pid in range(k)}

    def for_worker(self, pid):
        return _MemoryWorkerFabric(self, pid)

    def for_manager(self):
        return _MemoryManagerFabric(self)


class _MemoryWorkerFabric:
    def __init__(self, hub, pid):
        self.hub = hub
        self.pid = pid

    def deliver(self, dest_pid, superstep, envelopes):
        self.hub.workers[dest_pid].enqueue(superstep, envelopes)

    def end_superstep_data(self, superstep):
        pass  # delivery is synchronous in-process

    def wait_inbound_complete(self, superstep):
        pass

    def send_control(self, msg):
        self.hub.manager_queue.put(msg)

    def recv_control(self):
        return self.hub.worker_queues[self.pid].get()


class _MemoryManagerFabric:
    def __init__(self, hub):
        self.hub = hub

    def recv_worker_control(self, timeout):
        try:
            return self.hub.manager_queue.get(timeout=timeout)
        except queue.Empty:
            return None

    def broadcast_control(self, msg):
        for q in self.hub.worker_queues.values():
            q.put(msg)


def run(app_factory, partitions, config=None) -> RunResult:
    """Execute a compute app over in-memory partitions; returns final values
    and execution statistics."""
    config = config or EngineConfig()
    if config.transport != "memory":
        raise ConfigError("run() drives the in-memory transport; use "
                          "net.run_distributed for sockets")
    partitions = sorted(partitions, key=lambda p: p.id)
    if [p.id for p in partitions] != list(range(len(partitions))):
        raise ConfigError(f"partition ids must be dense 0..k-1, got "
                          f"{[p.id for p in partitions]}")

    meta = graph_meta_from_partitions(partitions)
    hub = MemoryFabric(meta.k)
    workers = [Worker(p, app_factory, meta, config, hub.for_worker(p.id))
               for p in partitions]
    for worker in workers:
        hub.workers[worker.pid] = worker
    manager = Manager(meta.k, config, hub.for_manager())

    threads = [threading.Thread(target=w.run, name=f"worker-{w.pid}", daemon=True)
               for w in workers]
    for t in threads:
        t.start()
    try:
        manager.run()
    except Exception:
        hub.for_manager().broadcast_control(ControlMessage(TERMINATE, MANAGER_ID, 0))
        raise
    finally:
        for t in threads:
            t.join(timeout=10.0)
        for w in workers:
            w.shutdown()

    if manager.error is not None:
        raise manager.error

    steps = merge_step_rows(manager.supersteps, [w.rows for w in workers])
    diagnostics = diagnostics_for(partitions, meta, config)
    message_log = None
    trace = None
    if config.debug_traces:
        message_log = sorted(entry for w in workers if w.message_log
                             for entry in w.message_log)
        trace = sorted(entry for w in workers for entry in w.trace)
    stats = ExecutionStats(manager.supersteps, steps, diagnostics,
                           manager.control_log, message_log, trace)

    vertex_values, subgraph_values = {}, {}
    for w in workers:
        vv, sv = w.collect_values()
        for attr, values in vv.items():
            vertex_values.setdefault(attr, {}).update(values)
        for attr, values in sv.items():
            subgraph_values.setdefault(attr, {}).update(values)
    return RunResult(vertex_values, subgraph_values, stats)


def merge_step_rows(supersteps, per_worker_rows):
    """Combine per-worker superstep rows; drops the uncounted probe round."""
    merged = {}
    for rows in per_worker_rows:
        for row in rows:
            if row.superstep > supersteps:
                continue
            agg = merged.setdefault(row.superstep, SuperstepStats(row.superstep))
            agg.sent_total += row.sent_total
            agg.sent_remote += row.sent_remote
            agg.sent_local += row.sent_local
            agg.delivered += row.delivered
            agg.invoked += row.invoked
            agg.partition_wall_s.update(row.partition_wall_s)
            agg.subgraph_compute_s.update(row.subgraph_compute_s)
    return [merged[s] for s in sorted(merged)]


def diagnostics_for(partitions, meta, config) -> dict:
    """Analysis symbols: d, v, e, p, s, c, g. The meta-graph diameter d is
    all-pairs BFS over sub-graphs, so it can be switched off for bulk runs."""
    return {
        "d": build_meta_graph(partitions).diameter if config.meta_diameter else None,
        "v": meta.num_vertices,
        "e": meta.num_edges,
        "p": meta.k,
        "s": meta.subgraphs_per_partition,
        "c": config.resolved_pool_width(),
        "g": meta.avg_out_degree,
    }
