import itertools
import os

import numpy as np
import pytest

from ncaas.codec import (
    CodedPacket, CodingParams, Decoder, EmptyState, Encoder, Generation, GenerationMismatch,
    Incomplete, ParamMismatch, Recoder,
)
from ncaas.galois import GF2, GF16, GF256, gf_inv, gf_mul


def dense_rank(vectors, field):
    """Plain row reduction with scalar field ops (independent of the decoder)."""
    rows = [list(v) for v in vectors]
    rank, ncols = 0, len(rows[0]) if rows else 0
    for col in range(ncols):
        pivot = next((i for i in range(rank, len(rows)) if rows[i][col]), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        inv = gf_inv(rows[rank][col], field)
        rows[rank] = [gf_mul(inv, x, field) for x in rows[rank]]
        for i in range(len(rows)):
            if i != rank and rows[i][col]:
                c = rows[i][col]
                rows[i] = [x ^ gf_mul(c, y, field) for x, y in zip(rows[i], rows[rank])]
        rank += 1
    return rank


class FixedVectors:
    """RandomSource stub that hands out prepared coefficient vectors."""

    def __init__(self, *vectors):
        self.vectors = list(vectors)

    def integers(self, low, high=None, size=None, dtype=None):
        return np.array(self.vectors.pop(0), dtype=np.uint8)


def make(g=4, size=8, field=GF256, seed=0, gid=0):
    params = CodingParams(g, size, field)
    data = np.random.default_rng(seed).integers(0, 256, g * size, dtype=np.uint8).tobytes()
    gen = Generation.from_bytes(gid, data, params)
    return params, gen, Encoder(gen, params)


def test_params_validation():
    with pytest.raises(ValueError):
        CodingParams(0, 10)
    with pytest.raises(ValueError):
        CodingParams(4, 0)
    with pytest.raises(ValueError):
        CodingParams(4, 10, extra=-0.1)
    assert CodingParams(16, 250, extra=0.5).packets_per_generation == 24
    assert CodingParams(16, 250, extra=0.1).packets_per_generation == 18
    assert CodingParams(10, 250, extra=0.1).packets_per_generation == 11


def test_encoder_new():
    _, _, enc = make(g=2)
    assert enc.rank == 2
    params, gen, enc = make(g=16, size=250)
    assert len(gen.to_bytes()) == 4000
    assert enc._data.nbytes == 4000
    with pytest.raises(ParamMismatch):
        Encoder(Generation(0, gen.symbols[:-1]), params)


def test_unit_vector_reproduces_symbol():
    params, gen, enc = make(g=4)
    for i in range(4):
        e = [0] * 4
        e[i] = 1
        pkt = enc.encode(FixedVectors(e))
        assert pkt.vector == tuple(e)
        assert pkt.symbol == gen.symbols[i]


def test_gf2_xor_of_two_symbols():
    params, gen, enc = make(g=2, size=16, field=GF2)
    pkt = enc.encode(FixedVectors([1, 1]))
    assert pkt.symbol == bytes(a ^ b for a, b in zip(*gen.symbols))


def test_all_zero_vector_is_redrawn():
    _, gen, enc = make(g=3)
    pkt = enc.encode(FixedVectors([0, 0, 0], [0, 2, 0]))
    assert pkt.vector == (0, 2, 0)


def test_encode_deterministic():
    _, _, enc = make(g=8)
    a = [enc.encode(np.random.default_rng(42)) for _ in range(3)]
    b = [enc.encode(np.random.default_rng(42)) for _ in range(3)]
    assert a == b
    rng1, rng2 = np.random.default_rng(9), np.random.default_rng(9)
    assert [enc.encode(rng1) for _ in range(20)] == [enc.encode(rng2) for _ in range(20)]


def test_consume_duplicates_and_multiples():
    params, gen, enc = make(g=4)
    dec = Decoder(params)
    pkt = enc.encode(FixedVectors([3, 1, 0, 7]))
    assert dec.consume(pkt) is True
    assert dec.consume(pkt) is False
    scaled = enc.encode(FixedVectors([gf_mul(5, x, GF256) for x in (3, 1, 0, 7)]))
    assert dense_rank([pkt.vector, scaled.vector], GF256) == 1
    assert dec.consume(scaled) is False
    assert dec.rank == 1


def test_consume_rejects_foreign_packets():
    params, gen, enc = make(g=4, gid=5)
    dec = Decoder(params, generation_id=5)
    pkt = enc.encode(np.random.default_rng(0))
    with pytest.raises(GenerationMismatch):
        Decoder(params, generation_id=6).consume(pkt)
    with pytest.raises(ParamMismatch):
        Decoder(CodingParams(4, 8, GF16), generation_id=5).consume(pkt)
    assert dec.consume(pkt)


@pytest.mark.parametrize("field", [GF2, GF16, GF256], ids=repr)
def test_rank_tracks_dense_oracle(field):
    rng = np.random.default_rng(11)
    params, gen, enc = make(g=6, size=4, field=field)
    dec = Decoder(params)
    seen = []
    while not dec.is_complete():
        pkt = enc.encode(rng)
        before = dec.rank
        gained = dec.consume(pkt)
        seen.append(pkt.vector)
        assert dec.rank == dense_rank(seen, field)
        assert gained == (dec.rank == before + 1)


def test_decoder_complete_and_extract():
    params, gen, enc = make(g=5)
    dec = Decoder(params)
    assert not dec.is_complete()
    for i in range(4):
        e = [0] * 5
        e[4 - i] = 1
        dec.consume(enc.encode(FixedVectors(e)))
    assert not dec.is_complete()
    with pytest.raises(Incomplete):
        dec.extract()
    dec.consume(enc.encode(FixedVectors([1, 0, 0, 0, 0])))
    assert dec.is_complete()
    assert dec.extract() == gen


def test_identity_packets_only_reorder():
    params, gen, enc = make(g=6)
    dec = Decoder(params)
    for i in (3, 0, 5, 1, 4, 2):
        e = [0] * 6
        e[i] = 1
        dec.consume(enc.encode(FixedVectors(e)))
    assert dec.extract() == gen


def test_recode_empty_state():
    params, _, _ = make(g=4)
    with pytest.raises(EmptyState):
        Recoder(params).recode(np.random.default_rng(0))


def test_recode_from_single_packet_is_scalar_multiple():
    params, gen, enc = make(g=4)
    rec = Recoder(params)
    pkt = enc.encode(np.random.default_rng(1))
    rec.consume(pkt)
    rng = np.random.default_rng(2)
    for _ in range(10):
        out = rec.recode(rng)
        assert any(out.vector)
        assert dense_rank([pkt.vector, out.vector], GF256) == 1
        # the symbol follows the same scalar
        ratio = next(gf_mul(o, gf_inv(p, GF256), GF256) for o, p in zip(out.vector, pkt.vector) if p)
        assert out.symbol == bytes(gf_mul(ratio, b, GF256) for b in pkt.symbol)


def test_recode_packet_format_matches_encoder():
    params, gen, enc = make(g=4)
    rec = Recoder(params)
    rec.consume(enc.encode(np.random.default_rng(1)))
    a, b = enc.encode(np.random.default_rng(1)), rec.recode(np.random.default_rng(1))
    assert (type(a), a.symbols, a.symbol_size, a.field, a.generation_id) == \
           (type(b), b.symbols, b.symbol_size, b.field, b.generation_id)


ROUNDTRIP = [(g, f, s) for g, f, s in itertools.product((2, 16, 32, 64, 128), (GF2, GF16, GF256), (4, 250, 1450))]


@pytest.mark.parametrize("g,field,size", ROUNDTRIP, ids=lambda x: repr(x))
def test_roundtrip_encode_decode(g, field, size):
    params = CodingParams(g, size, field)
    gen = Generation.from_bytes(7, os.urandom(g * size), params)
    enc, dec = Encoder(gen, params), Decoder(params, 7)
    rng = np.random.default_rng(g * size + field.order)
    while not dec.is_complete():
        dec.consume(enc.encode(rng))
    assert dec.extract() == gen


@pytest.mark.parametrize("stages", [1, 2, 3, 4, 5])
@pytest.mark.parametrize("field", [GF2, GF16, GF256], ids=repr)
def test_recode_chain_transparency(stages, field):
    params = CodingParams(16, 32, field)
    gen = Generation.from_bytes(0, os.urandom(16 * 32), params)
    rng = np.random.default_rng(stages * 1000 + field.order)
    enc = Encoder(gen, params)
    recoders = [Recoder(params) for _ in range(stages)]
    dec = Decoder(params)
    while not dec.is_complete():
        pkt = enc.encode(rng)
        for rec in recoders:
            rec.consume(pkt)
            pkt = rec.recode(rng)
        dec.consume(pkt)
    assert dec.extract() == gen


def test_recoded_only_decoder_recovers():
    params, gen, enc = make(g=16, size=250)
    rng = np.random.default_rng(0)
    rec = Recoder(params)
    while not rec.is_complete():
        rec.consume(enc.encode(rng))
    dec = Decoder(params)
    while not dec.is_complete():
        dec.consume(rec.recode(rng))
    assert dec.extract() == gen


def test_rank_monotone_and_capped():
    params, gen, enc = make(g=8, field=GF2)
    dec = Decoder(params)
    rng = np.random.default_rng(5)
    last = 0
    for _ in range(60):
        gained = dec.consume(enc.encode(rng))
        assert dec.rank == last + gained
        last = dec.rank
    assert dec.rank == 8


def test_sent_span_guard_keeps_first_g_independent():
    params, gen, enc = make(g=16, size=4, field=GF2)
    rng = np.random.default_rng(0)
    sent = Decoder(params)
    vectors = [enc.encode(rng, sent).vector for _ in range(16)]
    assert dense_rank(vectors, GF2) == 16


def test_packet_shape_validation():
    with pytest.raises(ParamMismatch):
        CodedPacket(0, 3, 2, GF256, (1, 2), b"ab")
    with pytest.raises(ParamMismatch):
        CodedPacket(0, 2, 2, GF256, (1, 2), b"abc")
