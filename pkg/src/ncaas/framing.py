"""Wire format for coded packets and the ``.ncap`` capture container.

Frame layout (big-endian)::

    0  magic        2B  0x4E43 ("NC")
    2  version      1B  0x01
    3  flags        1B  0
    4  generation   4B
    8  symbols      2B
   10  symbol_size  2B
   12  gf bits      1B  1, 4 or 8
   13  reserved     1B  0
   14  coding vector, packed MSB-first, zero-padded to a byte
    .  symbol bytes
"""

from __future__ import annotations

import struct
from typing import BinaryIO, Iterator

import numpy as np

from .codec import CodedPacket
from .galois import FIELDS, FieldSpec, elements_to_bytes, field_from_bits

MAGIC = 0x4E43
VERSION = 1
HEADER = struct.Struct(">HBBIHHBB")
HEADER_SIZE = HEADER.size

NCAP_MAGIC = b"NCAPv01\0"
_LEN = struct.Struct(">I")
_ORIG_LEN = struct.Struct(">Q")

# out-of-band end-of-stream marker used by chain nodes; never a valid frame
EOS_PREFIX = b"NCEOS\x01"
_EOS = struct.Struct(">QI")


class FramingError(ValueError):
    pass


class BadMagic(FramingError):
    pass


class BadVersion(FramingError):
    pass


class Truncated(FramingError):
    pass


class LengthMismatch(FramingError):
    pass


class MalformedFrame(FramingError):
    pass


def vector_bytes(symbols: int, field: FieldSpec) -> int:
    return -(-symbols * field.bits_per_element // 8)


def frame_length(symbols: int, symbol_size: int, field: FieldSpec) -> int:
    return HEADER_SIZE + vector_bytes(symbols, field) + symbol_size


def serialize(pkt: CodedPacket) -> bytes:
    header = HEADER.pack(MAGIC, VERSION, 0, pkt.generation_id, pkt.symbols,
                         pkt.symbol_size, pkt.field.bits_per_element, 0)
    vector = elements_to_bytes(np.array(pkt.vector, dtype=np.uint8), pkt.field)
    return header + vector + pkt.symbol


def deserialize(data: bytes) -> CodedPacket:
    if len(data) < 2:
        raise Truncated(f"{len(data)} bytes is shorter than the magic")
    (magic,) = struct.unpack_from(">H", data)
    if magic != MAGIC:
        raise BadMagic(f"magic {magic:#06x}, expected {MAGIC:#06x}")
    if len(data) < 3:
        raise Truncated("frame ends before the version byte")
    if data[2] != VERSION:
        raise BadVersion(f"version {data[2]}, expected {VERSION}")
    if len(data) < HEADER_SIZE:
        raise Truncated(f"{len(data)} bytes is shorter than the {HEADER_SIZE}-byte header")
    _, _, flags, gen_id, g, size, bits, reserved = HEADER.unpack_from(data)
    if flags or reserved:
        raise MalformedFrame(f"nonzero flags/reserved ({flags}, {reserved})")
    if bits not in (1, 4, 8) or (1 << bits) not in FIELDS:
        raise MalformedFrame(f"unsupported gf bits {bits}")
    if g == 0 or size == 0:
        raise MalformedFrame("symbols and symbol_size must be positive")
    field = field_from_bits(bits)
    expected = frame_length(g, size, field)
    if len(data) < expected:
        raise Truncated(f"{len(data)} bytes, frame needs {expected}")
    if len(data) > expected:
        raise LengthMismatch(f"{len(data)} bytes, frame is exactly {expected}")

    nvec = vector_bytes(g, field)
    raw = np.frombuffer(data, dtype=np.uint8, count=nvec, offset=HEADER_SIZE)
    if bits == 8:
        vector = raw
    elif bits == 4:
        vector = np.empty(2 * nvec, dtype=np.uint8)
        vector[0::2] = raw >> 4
        vector[1::2] = raw & 0x0F
    else:
        vector = np.unpackbits(raw)
    if vector[g:].any():
        raise MalformedFrame("nonzero padding after the coding vector")
    return CodedPacket(gen_id, g, size, field, tuple(vector[:g].tolist()),
                       bytes(data[HEADER_SIZE + nvec:]))


def encode_eos(original_length: int, generations: int) -> bytes:
    return EOS_PREFIX + _EOS.pack(original_length, generations)


def decode_eos(data: bytes) -> tuple[int, int] | None:
    """Return ``(original_length, generations)`` if ``data`` is an EOS marker."""
    if data.startswith(EOS_PREFIX) and len(data) == len(EOS_PREFIX) + _EOS.size:
        return _EOS.unpack_from(data, len(EOS_PREFIX))
    return None


# -- .ncap files -------------------------------------------------------------

def write_ncap(fh: BinaryIO, frames, original_length: int):
    fh.write(NCAP_MAGIC)
    for frame in frames:
        if isinstance(frame, CodedPacket):
            frame = serialize(frame)
        fh.write(_LEN.pack(len(frame)))
        fh.write(frame)
    fh.write(_LEN.pack(0))
    fh.write(_ORIG_LEN.pack(original_length))


class NcapReader:
    """Iterate the frames of an ``.ncap`` stream; ``original_length`` is set
    once the trailer has been read."""

    def __init__(self, fh: BinaryIO):
        self._fh = fh
        self.original_length: int | None = None
        magic = fh.read(len(NCAP_MAGIC))
        if magic != NCAP_MAGIC:
            raise BadMagic("not an .ncap stream")

    def _read(self, n: int) -> bytes:
        buf = self._fh.read(n)
        if len(buf) != n:
            raise Truncated(f"capture ended mid-record ({len(buf)} of {n} bytes)")
        return buf

    def __iter__(self) -> Iterator[bytes]:
        while True:
            (n,) = _LEN.unpack(self._read(_LEN.size))
            if n == 0:
                (self.original_length,) = _ORIG_LEN.unpack(self._read(_ORIG_LEN.size))
                return
            yield self._read(n)
