"""Multi-generation coding of byte streams, shared by the file and UDP modes."""

from __future__ import annotations

import math
from typing import Iterator

from .codec import CodedPacket, CodingParams, Decoder, EmptyState, Encoder, Generation, Incomplete, ParamMismatch


def generation_count(length: int, params: CodingParams) -> int:
    return -(-length // params.generation_bytes)


def split_generations(data: bytes, params: CodingParams) -> list[Generation]:
    size = params.generation_bytes
    return [Generation.from_bytes(i, data[i * size:(i + 1) * size], params)
            for i in range(generation_count(len(data), params))]


def encode_stream(data: bytes, params: CodingParams, rng) -> Iterator[CodedPacket]:
    """``params.packets_per_generation`` packets per generation, in generation order.

    The first ``g`` packets of a generation are kept linearly independent, so
    a lossless path with ``extra=0`` always decodes.
    """
    for gen in split_generations(data, params):
        enc = Encoder(gen, params)
        sent = Decoder(params, gen.id)
        for _ in range(params.packets_per_generation):
            yield enc.encode(rng, sent)


def _check_params(pkt: CodedPacket, params: CodingParams):
    if (pkt.symbols, pkt.symbol_size, pkt.field) != (params.symbols, params.symbol_size, params.field):
        raise ParamMismatch(f"packet (g={pkt.symbols}, size={pkt.symbol_size}, {pkt.field!r}) "
                            f"does not match configured (g={params.symbols}, size={params.symbol_size}, "
                            f"{params.field!r})")


class RecodeRelay:
    """Per-generation recoders that emit ``1 + extra`` packets per packet in."""

    def __init__(self, params: CodingParams, rng):
        self.params = params
        self.rng = rng
        self._state: dict[int, tuple[Decoder, Decoder]] = {}
        self._credit: dict[int, float] = {}
        self.innovative = 0

    def push(self, pkt: CodedPacket) -> list[CodedPacket]:
        _check_params(pkt, self.params)
        gid = pkt.generation_id
        if gid not in self._state:
            self._state[gid] = (Decoder(self.params, gid), Decoder(self.params, gid))
            self._credit[gid] = 0.0
        rec, sent = self._state[gid]
        self.innovative += rec.consume(pkt)
        self._credit[gid] += 1 + self.params.extra
        out = []
        while self._credit[gid] >= 1 - 1e-9:
            self._credit[gid] -= 1
            try:
                out.append(rec.recode(self.rng, sent))
            except EmptyState:
                break
        return out


class GenerationSink:
    """Collects packets of many generations and reassembles the byte stream."""

    def __init__(self, params: CodingParams):
        self.params = params
        self.decoders: dict[int, Decoder] = {}
        self.innovative = 0

    def push(self, pkt: CodedPacket) -> bool:
        _check_params(pkt, self.params)
        dec = self.decoders.get(pkt.generation_id)
        if dec is None:
            dec = self.decoders[pkt.generation_id] = Decoder(self.params, pkt.generation_id)
        gained = dec.consume(pkt)
        self.innovative += gained
        return gained

    def decoded(self) -> int:
        return sum(d.is_complete() for d in self.decoders.values())

    def assemble(self, original_length: int) -> bytes:
        n = generation_count(original_length, self.params)
        missing = [i for i in range(n) if i not in self.decoders or not self.decoders[i].is_complete()]
        if missing:
            shown = ", ".join(map(str, missing[:10])) + (" ..." if len(missing) > 10 else "")
            raise Incomplete(f"{len(missing)} of {n} generations not decodable: {shown}")
        data = b"".join(self.decoders[i].extract().to_bytes() for i in range(n))
        return data[:original_length]


def extra_for_loss(loss: float, symbols: int, confidence: float = 0.99) -> float:
    """Redundancy ratio so that a hop with loss ``loss`` delivers at least
    ``symbols`` of ``symbols * (1 + extra)`` packets with probability
    ``confidence``.  Starts from the mean requirement ``1/(1-loss)`` and adds
    packets until the binomial tail is covered."""
    if not 0 <= loss < 1:
        raise ValueError("loss must be in [0, 1)")
    p = 1 - loss
    n = max(symbols, math.ceil(symbols / p))
    while True:
        ok = sum(math.comb(n, k) * p ** k * loss ** (n - k) for k in range(symbols, n + 1))
        if ok >= confidence:
            return n / symbols - 1
        n += 1
