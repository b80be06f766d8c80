"""Binary primitives shared by the slice store and the socket transport.

Everything here is little-endian. Integers use LEB128 unsigned varints;
signed integers are zigzag-mapped first. Slice files and socket frames both
build on these primitives so a second implementation can interoperate from
this file alone.
"""

import struct

MAX_VARINT_BYTES = 10  # enough for arbitrary u64


def encode_varint(value: int) -> bytes:
    if value < 0:
        raise ValueError(f"varint requires a non-negative value, got {value}")
    out = bytearray()
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            out.append(byte | 0x80)
        else:
            out.append(byte)
            return bytes(out)


def decode_varint(buf, offset=0):
    """Return (value, next_offset). Raises ValueError on truncation/overrun."""
    shift = 0
    value = 0
    for i in range(MAX_VARINT_BYTES):
        if offset + i >= len(buf):
            raise ValueError("truncated varint")
        byte = buf[offset + i]
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value, offset + i + 1
        shift += 7
    raise ValueError("varint too long")


def zigzag_encode(value: int) -> int:
    return value << 1 if value >= 0 else ((-value) << 1) - 1


def zigzag_decode(value: int) -> int:
    return (value >> 1) ^ -(value & 1)


# ---------------------------------------------------------------------------
# CRC32C (Castagnoli), reflected polynomial 0x82F63B78. Table-driven,
# byte at a time; plenty fast for slice files at the sizes this store sees.

def _make_crc32c_table():
    table = []
    for i in range(256):
        crc = i
        for _ in range(8):
            crc = (crc >> 1) ^ 0x82F63B78 if crc & 1 else crc >> 1
        table.append(crc)
    return table


_CRC32C_TABLE = _make_crc32c_table()


def crc32c(data: bytes, crc: int = 0) -> int:
    crc ^= 0xFFFFFFFF
    table = _CRC32C_TABLE
    for byte in data:
        crc = table[(crc ^ byte) & 0xFF] ^ (crc >> 8)
    return crc ^ 0xFFFFFFFF


# ---------------------------------------------------------------------------
# Typed value codec for message payloads. Tags:
#   0 none, 1 false, 2 true, 3 int (zigzag varint), 4 float64, 5 str, 6 list.
# Tuples encode as lists; decoding always yields lists.

_TAG_NONE = 0
_TAG_FALSE = 1
_TAG_TRUE = 2
_TAG_INT = 3
_TAG_FLOAT = 4
_TAG_STR = 5
_TAG_LIST = 6


def encode_value(value) -> bytes:
    out = bytearray()
    _encode_value_into(out, value)
    return bytes(out)


def _encode_value_into(out, value):
    if value is None:
        out.append(_TAG_NONE)
    elif value is True:
        out.append(_TAG_TRUE)
    elif value is False:
        out.append(_TAG_FALSE)
    elif isinstance(value, int):
        out.append(_TAG_INT)
        out += encode_varint(zigzag_encode(value))
    elif isinstance(value, float):
        out.append(_TAG_FLOAT)
        out += struct.pack("<d", value)
    elif isinstance(value, str):
        raw = value.encode("utf-8")
        out.append(_TAG_STR)
        out += encode_varint(len(raw))
        out += raw
    elif isinstance(value, (list, tuple)):
        out.append(_TAG_LIST)
        out += encode_varint(len(value))
        for item in value:
            _encode_value_into(out, item)
    else:
        raise TypeError(f"payload type {type(value).__name__} is not encodable")


def decode_value(buf, offset=0):
    """Return (value, next_offset)."""
    if offset >= len(buf):
        raise ValueError("truncated value")
    tag = buf[offset]
    offset += 1
    if tag == _TAG_NONE:
        return None, offset
    if tag == _TAG_FALSE:
        return False, offset
    if tag == _TAG_TRUE:
        return True, offset
    if tag == _TAG_INT:
        raw, offset = decode_varint(buf, offset)
        return zigzag_decode(raw), offset
    if tag == _TAG_FLOAT:
        if offset + 8 > len(buf):
            raise ValueError("truncated float")
        return struct.unpack_from("<d", buf, offset)[0], offset + 8
    if tag == _TAG_STR:
        length, offset = decode_varint(buf, offset)
        if offset + length > len(buf):
            raise ValueError("truncated string")
        return buf[offset:offset + length].decode("utf-8"), offset + length
    if tag == _TAG_LIST:
        count, offset = decode_varint(buf, offset)
        items = []
        for _ in range(count):
            item, offset = decode_value(buf, offset)
            items.append(item)
        return items, offset
    raise ValueError(f"unknown value tag {tag}")


# ---------------------------------------------------------------------------
# Socket framing: u32 length (of everything after the length field), u8 kind,
# payload bytes. Kind 0 = data, 1 = control.

FRAME_DATA = 0
FRAME_CONTROL = 1


def pack_frame(kind: int, payload: bytes) -> bytes:
    return struct.pack("<IB", len(payload) + 1, kind) + payload


def read_frame(sock):
    """Read one frame from a socket; returns (kind, payload) or None on EOF."""
    header = _read_exact(sock, 4)
    if header is None:
        return None
    (length,) = struct.unpack("<I", header)
    body = _read_exact(sock, length)
    if body is None:
        raise ConnectionError("connection closed mid-frame")
    return body[0], body[1:]


def _read_exact(sock, n):
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            if chunks:
                raise ConnectionError("connection closed mid-frame")
            return None
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)
