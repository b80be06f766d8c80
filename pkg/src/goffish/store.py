"""Write-once/read-many partitioned slice store.

Each partition directory holds:
  metadata.json                human-readable partition metadata
  g<graph>.p<pid>.sg<id>.top   one topology slice per sub-graph
  g<graph>.p<pid>.sg<id>.attr.<name>   one slice per sub-graph per attribute
  manifest.json                file list with sizes and checksums

Slice format (little-endian):
  header   magic "GOFS" | version u16 | kind u8 (0 topology, 1 attribute) |
           flags u8 (reserved, 0) | graph id u64 | partition u64 | subgraph u64
  payload  see encode_topology_slice / encode_attribute_slice
  trailer  CRC32C of the payload, u32

Counts and sorted id lists are unsigned varints with ascending ids
delta-encoded (first id raw, then gaps). The graph id is the first eight
bytes of SHA-256 of the graph name. Attribute slices are self-contained:
vertex-scoped slices enumerate every local vertex with a presence byte, so
missing values read back as explicit None without touching the topology
slice. Edge attributes for remote edges live with the source sub-graph.

A store is immutable once its manifest is written; a second write to the
same location fails.
"""

import hashlib
import json
import os
import struct
import threading
from pathlib import Path

from .errors import (ConfigError, SchemaError, SliceCorruptionError,
                     SliceNotFoundError, StoreExistsError)
from .model import AttributeSpec, Partition, RemoteRef, Subgraph
from .wire import crc32c, decode_varint, encode_varint, zigzag_decode, zigzag_encode

MAGIC = b"GOFS"
FORMAT_VERSION = 1
KIND_TOPOLOGY = 0
KIND_ATTRIBUTE = 1

_HEADER = struct.Struct("<4sHBBQQQ")

_ATTR_TYPE_CODES = {"int64": 0, "float64": 1, "string": 2, "bool": 3}
_ATTR_TYPE_NAMES = {v: k for k, v in _ATTR_TYPE_CODES.items()}
_SCOPE_CODES = {"vertex": 0, "edge": 1}
_SCOPE_NAMES = {v: k for k, v in _SCOPE_CODES.items()}


class IoCounter:
    """Per-file byte counters for every slice read; lets tests prove that
    selective loads never touch unrequested files."""

    def __init__(self):
        self._lock = threading.Lock()
        self.bytes_by_file = {}

    def reset(self):
        with self._lock:
            self.bytes_by_file = {}

    def record(self, path, n):
        with self._lock:
            key = os.path.basename(str(path))
            self.bytes_by_file[key] = self.bytes_by_file.get(key, 0) + n

    def total(self):
        with self._lock:
            return sum(self.bytes_by_file.values())


io_counter = IoCounter()


def _read_file(path):
    with open(path, "rb") as fh:
        data = fh.read()
    io_counter.record(path, len(data))
    return data


def graph_name_id(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "little")


def topology_filename(graph, pid, sgid):
    return f"g{graph}.p{pid}.sg{sgid}.top"


def attribute_filename(graph, pid, sgid, attr):
    return f"g{graph}.p{pid}.sg{sgid}.attr.{attr}"


def _check_name(name, what):
    if not name or not all(c.isalnum() or c in "_-" for c in name):
        raise SchemaError(f"{what} {name!r} must match [A-Za-z0-9_-]+ "
                          "(it becomes part of a file name)")


# ---------------------------------------------------------------------------
# encoding

def _encode_sorted_ids(out, ids):
    prev = None
    for i in ids:
        out += encode_varint(i if prev is None else i - prev)
        prev = i


def _decode_sorted_ids(buf, offset, count):
    ids = []
    prev = 0
    for idx in range(count):
        delta, offset = decode_varint(buf, offset)
        prev = delta if idx == 0 else prev + delta
        ids.append(prev)
    return ids, offset


def encode_topology_slice(sg: Subgraph, graph_id: int) -> bytes:
    payload = bytearray()
    payload += encode_varint(len(sg.vertices))
    _encode_sorted_ids(payload, sg.vertices)
    for v in sg.vertices:
        ns = sg.local_adj[v]
        payload += encode_varint(len(ns))
        _encode_sorted_ids(payload, ns)
    remotes = sorted((u, ref.partition, ref.subgraph, ref.vertex)
                     for u, ref in sg.remote_edges())
    payload += encode_varint(len(remotes))
    for entry in remotes:
        for field in entry:
            payload += encode_varint(field)
    return _frame_slice(KIND_TOPOLOGY, graph_id, sg.partition, sg.id, payload)


def decode_topology_slice(data: bytes, path="<buffer>") -> Subgraph:
    graph_id, pid, sgid, payload = _unframe_slice(data, KIND_TOPOLOGY, path)
    try:
        offset = 0
        count, offset = decode_varint(payload, offset)
        vertices, offset = _decode_sorted_ids(payload, offset, count)
        local_adj = {}
        for v in vertices:
            deg, offset = decode_varint(payload, offset)
            local_adj[v], offset = _decode_sorted_ids(payload, offset, deg)
        remote = {}
        n_remote, offset = decode_varint(payload, offset)
        for _ in range(n_remote):
            u, offset = decode_varint(payload, offset)
            p, offset = decode_varint(payload, offset)
            s, offset = decode_varint(payload, offset)
            w, offset = decode_varint(payload, offset)
            remote.setdefault(u, []).append(RemoteRef(p, s, w))
        if offset != len(payload):
            raise ValueError(f"{len(payload) - offset} trailing payload bytes")
        return Subgraph(sgid, pid, vertices, local_adj, remote)
    except ValueError as exc:
        raise SliceCorruptionError(path, f"malformed topology payload: {exc}") from exc


def _encode_attr_value(out, type_name, value):
    if type_name == "int64":
        out += encode_varint(zigzag_encode(value))
    elif type_name == "float64":
        out += struct.pack("<d", float(value))
    elif type_name == "string":
        raw = value.encode("utf-8")
        out += encode_varint(len(raw))
        out += raw
    else:  # bool
        out.append(1 if value else 0)


def _decode_attr_value(buf, offset, type_name):
    if type_name == "int64":
        raw, offset = decode_varint(buf, offset)
        return zigzag_decode(raw), offset
    if type_name == "float64":
        if offset + 8 > len(buf):
            raise ValueError("truncated float64 value")
        return struct.unpack_from("<d", buf, offset)[0], offset + 8
    if type_name == "string":
        length, offset = decode_varint(buf, offset)
        if offset + length > len(buf):
            raise ValueError("truncated string value")
        return buf[offset:offset + length].decode("utf-8"), offset + length
    if offset >= len(buf):
        raise ValueError("truncated bool value")
    return bool(buf[offset]), offset + 1


def encode_attribute_slice(sg: Subgraph, spec: AttributeSpec, values,
                           graph_id: int) -> bytes:
    """values: {vid: value} for vertex scope, {(u, v): value} for edge scope.
    Only keys local to the sub-graph are written; vertex slices record every
    local vertex with a presence byte."""
    payload = bytearray()
    name_raw = spec.name.encode("utf-8")
    payload += encode_varint(len(name_raw))
    payload += name_raw
    payload.append(_ATTR_TYPE_CODES[spec.type])
    payload.append(_SCOPE_CODES[spec.scope])

    if spec.scope == "vertex":
        payload += encode_varint(len(sg.vertices))
        prev = None
        for v in sg.vertices:
            payload += encode_varint(v if prev is None else v - prev)
            prev = v
            value = values.get(v)
            if value is None:
                payload.append(0)
            else:
                if not spec.accepts(value):
                    raise SchemaError(
                        f"attribute {spec.name!r}: value {value!r} for vertex {v} "
                        f"is not {spec.type}")
                payload.append(1)
                _encode_attr_value(payload, spec.type, value)
    else:
        edges = set()
        for u in sg.vertices:
            for w in sg.local_adj[u]:
                edges.add((u, w))
            for ref in sg.remote.get(u, ()):
                edges.add((u, ref.vertex))
        present = sorted(key for key in values if key in edges and values[key] is not None)
        payload += encode_varint(len(present))
        prev_u = None
        for u, w in present:
            value = values[(u, w)]
            if not spec.accepts(value):
                raise SchemaError(
                    f"attribute {spec.name!r}: value {value!r} for edge ({u}, {w}) "
                    f"is not {spec.type}")
            payload += encode_varint(u if prev_u is None else u - prev_u)
            prev_u = u
            payload += encode_varint(w)
            _encode_attr_value(payload, spec.type, value)
    return _frame_slice(KIND_ATTRIBUTE, graph_id, sg.partition, sg.id, payload)


def decode_attribute_slice(data: bytes, path="<buffer>"):
    """Returns (AttributeSpec, values dict)."""
    graph_id, pid, sgid, payload = _unframe_slice(data, KIND_ATTRIBUTE, path)
    try:
        offset = 0
        length, offset = decode_varint(payload, offset)
        name = payload[offset:offset + length].decode("utf-8")
        offset += length
        if offset + 2 > len(payload):
            raise ValueError("truncated attribute header")
        type_name = _ATTR_TYPE_NAMES.get(payload[offset])
        scope = _SCOPE_NAMES.get(payload[offset + 1])
        if type_name is None or scope is None:
            raise ValueError("unknown attribute type or scope code")
        offset += 2
        count, offset = decode_varint(payload, offset)
        values = {}
        if scope == "vertex":
            prev = 0
            for idx in range(count):
                delta, offset = decode_varint(payload, offset)
                prev = delta if idx == 0 else prev + delta
                if offset >= len(payload):
                    raise ValueError("truncated presence byte")
                present = payload[offset]
                offset += 1
                if present:
                    values[prev], offset = _decode_attr_value(payload, offset, type_name)
                else:
                    values[prev] = None
        else:
            prev_u = 0
            for idx in range(count):
                delta, offset = decode_varint(payload, offset)
                prev_u = delta if idx == 0 else prev_u + delta
                w, offset = decode_varint(payload, offset)
                values[(prev_u, w)], offset = _decode_attr_value(payload, offset, type_name)
        if offset != len(payload):
            raise ValueError(f"{len(payload) - offset} trailing payload bytes")
        return AttributeSpec(name, type_name, scope), values
    except ValueError as exc:
        raise SliceCorruptionError(path, f"malformed attribute payload: {exc}") from exc


def _frame_slice(kind, graph_id, pid, sgid, payload):
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, kind, 0, graph_id, pid, sgid)
    return header + bytes(payload) + struct.pack("<I", crc32c(bytes(payload)))


def _unframe_slice(data, expected_kind, path):
    if len(data) < _HEADER.size + 4:
        raise SliceCorruptionError(path, "file shorter than header + trailer")
    magic, version, kind, flags, graph_id, pid, sgid = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise SliceCorruptionError(path, f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise SliceCorruptionError(path, f"unsupported format version {version}")
    if kind != expected_kind:
        raise SliceCorruptionError(path, f"slice kind {kind}, expected {expected_kind}")
    if flags != 0:
        raise SliceCorruptionError(path, f"reserved flags byte set to {flags}")
    payload = data[_HEADER.size:-4]
    (stored_crc,) = struct.unpack_from("<I", data, len(data) - 4)
    actual = crc32c(payload)
    if stored_crc != actual:
        raise SliceCorruptionError(
            path, f"checksum mismatch (stored {stored_crc:#010x}, "
                  f"computed {actual:#010x})")
    return graph_id, pid, sgid, payload


# ---------------------------------------------------------------------------
# store directories

def write_slices(partition: Partition, schema, attribute_values, store_dir,
                 graph="graph", directed=None, k=1):
    """Write one partition's slices into store_dir; returns the manifest dict.

    schema: iterable of AttributeSpec. attribute_values: {name: values dict}
    keyed graph-wide; each sub-graph takes its local subset. Fails if a store
    already exists here; removes partial output on failure.
    """
    _check_name(graph, "graph name")
    schema = list(schema)
    names = [s.name for s in schema]
    if len(set(names)) != len(names):
        raise SchemaError(f"duplicate attribute names in schema: {names}")
    for name in attribute_values:
        if name not in names:
            raise SchemaError(f"attribute {name!r} has values but no schema entry")
    for spec in schema:
        _check_name(spec.name, "attribute name")
    if directed is None:
        directed = partition.directed

    path = Path(store_dir)
    path.mkdir(parents=True, exist_ok=True)
    if (path / "manifest.json").exists() or (path / "metadata.json").exists():
        raise StoreExistsError(f"store exists at {path}")

    graph_id = graph_name_id(graph)
    written = []
    try:
        metadata = {
            "graph": graph,
            "directed": directed,
            "k": k,
            "partition": partition.id,
            "schema": [{"name": s.name, "type": s.type, "scope": s.scope}
                       for s in schema],
            "subgraphs": [{"id": sg.id,
                           "vertices": len(sg.vertices),
                           "local_edges": sg.num_local_edges(),
                           "remote_edges": sg.num_remote_edges()}
                          for sg in partition.subgraphs],
        }
        files = []

        def emit(name, data):
            target = path / name
            written.append(target)
            target.write_bytes(data)
            files.append({"name": name, "bytes": len(data),
                          "crc32c": f"{crc32c(data):08x}"})

        meta_bytes = (json.dumps(metadata, indent=2, sort_keys=True) + "\n").encode()
        emit("metadata.json", meta_bytes)

        for sg in partition.subgraphs:
            emit(topology_filename(graph, partition.id, sg.id),
                 encode_topology_slice(sg, graph_id))
            for spec in schema:
                values = attribute_values.get(spec.name, {})
                emit(attribute_filename(graph, partition.id, sg.id, spec.name),
                     encode_attribute_slice(sg, spec, values, graph_id))

        manifest = {"graph": graph, "partition": partition.id, "files": files}
        manifest_bytes = (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode()
        written.append(path / "manifest.json")
        (path / "manifest.json").write_bytes(manifest_bytes)
        return manifest
    except BaseException:
        for target in written:
            try:
                target.unlink()
            except OSError:
                pass
        raise


def read_metadata(store_dir) -> dict:
    path = Path(store_dir) / "metadata.json"
    if not path.exists():
        raise SliceNotFoundError(f"no store metadata at {path}")
    return json.loads(_read_file(path))


def read_manifest(store_dir) -> dict:
    path = Path(store_dir) / "manifest.json"
    if not path.exists():
        raise SliceNotFoundError(f"no store manifest at {path}")
    return json.loads(_read_file(path))


def _slice_path(store_dir, meta, sgid, attr=None):
    known = {entry["id"] for entry in meta["subgraphs"]}
    if sgid not in known:
        raise SliceNotFoundError(
            f"sub-graph {sgid} not in partition {meta['partition']} "
            f"(store lists {sorted(known)})")
    if attr is None:
        name = topology_filename(meta["graph"], meta["partition"], sgid)
    else:
        name = attribute_filename(meta["graph"], meta["partition"], sgid, attr)
    return Path(store_dir) / name


def read_topology_slice(store_dir, subgraph_id, meta=None) -> Subgraph:
    """Load one sub-graph's topology; verifies checksum and identity fields."""
    meta = meta or read_metadata(store_dir)
    path = _slice_path(store_dir, meta, subgraph_id)
    if not path.exists():
        raise SliceNotFoundError(f"missing slice file {path}")
    data = _read_file(path)
    sg = decode_topology_slice(data, str(path))
    _check_identity(data, path, meta, subgraph_id)
    return sg


def read_attribute_slice(store_dir, subgraph_id, attr_name, meta=None):
    """Load one attribute for one sub-graph. Vertex scope yields a value (or
    None) for every local vertex; edge scope yields present entries only."""
    meta = meta or read_metadata(store_dir)
    declared = {entry["name"] for entry in meta["schema"]}
    if attr_name not in declared:
        raise SchemaError(f"attribute {attr_name!r} not in schema "
                          f"(store declares {sorted(declared)})")
    path = _slice_path(store_dir, meta, subgraph_id, attr_name)
    if not path.exists():
        raise SliceNotFoundError(f"missing slice file {path}")
    data = _read_file(path)
    spec, values = decode_attribute_slice(data, str(path))
    _check_identity(data, path, meta, subgraph_id)
    if spec.name != attr_name:
        raise SliceCorruptionError(str(path), f"slice holds attribute {spec.name!r}")
    return values


def _check_identity(data, path, meta, sgid):
    _, _, _, _, graph_id, pid, stored_sgid = _HEADER.unpack_from(data, 0)
    if graph_id != graph_name_id(meta["graph"]):
        raise SliceCorruptionError(str(path), "graph id does not match metadata")
    if pid != meta["partition"] or stored_sgid != sgid:
        raise SliceCorruptionError(
            str(path), f"slice identifies as partition {pid} sub-graph {stored_sgid}")


def load_partition(store_dir, attributes=()):
    """Reassemble a Partition from its slices; returns (partition, metadata).

    attributes: names of attribute slices to load into each sub-graph's value
    maps. Unrequested attribute files are never opened.
    """
    meta = read_metadata(store_dir)
    scope_by_name = {entry["name"]: entry["scope"] for entry in meta["schema"]}
    for attr in attributes:
        if attr not in scope_by_name:
            raise SchemaError(f"attribute {attr!r} not in schema")

    subgraphs = []
    for entry in meta["subgraphs"]:
        sg = read_topology_slice(store_dir, entry["id"], meta)
        for attr in attributes:
            values = read_attribute_slice(store_dir, entry["id"], attr, meta)
            if scope_by_name[attr] == "vertex":
                sg.vertex_values[attr] = values
            else:
                sg.edge_values[attr] = values
        subgraphs.append(sg)
    subgraphs.sort(key=lambda sg: sg.id)

    vertices, adj, remote = [], {}, {}
    for sg in subgraphs:
        vertices.extend(sg.vertices)
        adj.update(sg.local_adj)
        remote.update(sg.remote)
    partition = Partition(meta["partition"], vertices, adj, remote,
                          directed=meta["directed"])
    partition.subgraphs = subgraphs
    return partition, meta


def resolve_remote(ref: RemoteRef, cluster_view):
    """Map a remote ref to (worker endpoint, subgraph id, vertex id)."""
    if ref.partition not in cluster_view:
        raise ConfigError(f"cluster view has no endpoint for partition "
                          f"{ref.partition} (knows {sorted(cluster_view)})")
    return cluster_view[ref.partition], ref.subgraph, ref.vertex
