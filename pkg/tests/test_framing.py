import io
import struct

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ncaas import framing
from ncaas.codec import CodedPacket
from ncaas.framing import (
    BadMagic, BadVersion, LengthMismatch, MalformedFrame, NcapReader, Truncated, deserialize,
    frame_length, serialize, write_ncap,
)
from ncaas.galois import FIELDS, GF2, GF16, GF256
from ncaas.simulator import TABLE1_GENERATION, TABLE1_PACKET_SIZE


def packet(g=16, size=250, field=GF256, gid=1, seed=0):
    rng = np.random.default_rng(seed)
    vec = tuple(rng.integers(0, field.order, g).tolist())
    return CodedPacket(gid, g, size, field, vec, rng.integers(0, 256, size, dtype=np.uint8).tobytes())


def test_lengths():
    assert len(serialize(packet(16, 250, GF256))) == 14 + 16 + 250 == 280
    assert framing.vector_bytes(16, GF2) == 2
    assert framing.vector_bytes(5, GF16) == 3
    assert framing.HEADER_SIZE == 14


def test_header_layout():
    pkt = CodedPacket(0x01020304, 3, 2, GF16, (0xA, 0xB, 0xC), b"xy")
    frame = serialize(pkt)
    assert frame[:2] == b"NC"
    assert frame[2:4] == b"\x01\x00"
    assert frame[4:8] == b"\x01\x02\x03\x04"
    assert frame[8:10] == b"\x00\x03" and frame[10:12] == b"\x00\x02"
    assert frame[12:14] == b"\x04\x00"
    assert frame[14:16] == b"\xab\xc0"
    assert frame[16:] == b"xy"
    bits = serialize(CodedPacket(0, 10, 1, GF2, (1, 0, 1, 1, 0, 0, 0, 0, 1, 1), b"z"))
    assert bits[14:16] == bytes([0b10110000, 0b11000000])


@pytest.mark.parametrize("g", TABLE1_GENERATION)
@pytest.mark.parametrize("size", TABLE1_PACKET_SIZE)
@pytest.mark.parametrize("order", sorted(FIELDS))
def test_length_formula_table1(g, size, order):
    field = FIELDS[order]
    frame = serialize(packet(g, size, field))
    assert len(frame) == frame_length(g, size, field) == 14 + -(-g * field.bits_per_element // 8) + size


@settings(max_examples=300)
@given(st.integers(1, 130), st.integers(1, 300), st.sampled_from(sorted(FIELDS)),
       st.integers(0, 2**32 - 1), st.integers(0, 2**32 - 1))
def test_roundtrip_property(g, size, order, gid, seed):
    pkt = packet(g, size, FIELDS[order], gid, seed)
    frame = serialize(pkt)
    assert deserialize(frame) == pkt
    assert serialize(deserialize(frame)) == frame


def test_errors_name_first_failed_check():
    frame = serialize(packet())
    with pytest.raises(BadMagic):
        deserialize(b"XX" + frame[2:])
    with pytest.raises(BadVersion):
        deserialize(frame[:2] + b"\x02" + frame[3:])
    with pytest.raises(Truncated):
        deserialize(frame[:-1])
    with pytest.raises(Truncated):
        deserialize(frame[:10])
    with pytest.raises(LengthMismatch):
        deserialize(frame + b"\0")
    with pytest.raises(MalformedFrame):
        deserialize(frame[:12] + b"\x03" + frame[13:])
    with pytest.raises(MalformedFrame):
        deserialize(frame[:3] + b"\x01" + frame[4:])
    # magic is checked before anything else
    with pytest.raises(BadMagic):
        deserialize(b"XX\x09")


def test_nonzero_vector_padding_rejected():
    frame = bytearray(serialize(CodedPacket(0, 3, 1, GF16, (1, 2, 3), b"a")))
    frame[15] |= 0x0F
    with pytest.raises(MalformedFrame):
        deserialize(bytes(frame))


def test_ncap_roundtrip():
    pkts = [packet(seed=i, gid=i // 3) for i in range(7)]
    buf = io.BytesIO()
    write_ncap(buf, pkts, 12345)
    raw = buf.getvalue()
    assert raw.startswith(b"NCAPv01\0")
    assert raw.endswith(struct.pack(">I", 0) + struct.pack(">Q", 12345))
    reader = NcapReader(io.BytesIO(raw))
    assert [deserialize(f) for f in reader] == pkts
    assert reader.original_length == 12345


def test_ncap_errors():
    with pytest.raises(BadMagic):
        NcapReader(io.BytesIO(b"nope----"))
    buf = io.BytesIO()
    write_ncap(buf, [packet()], 1)
    with pytest.raises(Truncated):
        list(NcapReader(io.BytesIO(buf.getvalue()[:-3])))


def test_eos_marker_is_not_a_frame():
    eos = framing.encode_eos(1 << 20, 46)
    assert framing.decode_eos(eos) == (1 << 20, 46)
    assert framing.decode_eos(serialize(packet())) is None
    with pytest.raises(framing.FramingError):
        deserialize(eos)
