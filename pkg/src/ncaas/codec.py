"""Full random linear network coding: encoder, recoder and decoder.

A node that is not the source keeps its received coding vectors in reduced
row-echelon form, with row ``p`` holding the vector whose pivot is column
``p``.  Every row operation is mirrored on the coded symbols, so once all
``g`` pivots are present the coefficient block is the identity and the symbol
block *is* the original generation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .galois import GF256, FieldSpec, bytes_to_elements, combine, elements_to_bytes


class CodecError(Exception):
    pass


class ParamMismatch(CodecError):
    pass


class GenerationMismatch(CodecError):
    pass


class EmptyState(CodecError):
    pass


class Incomplete(CodecError):
    pass


class RandomSource(Protocol):
    """The slice of ``numpy.random.Generator`` the coders use."""

    def integers(self, low, high=None, size=None, dtype=np.int64): ...


@dataclass(frozen=True)
class CodingParams:
    symbols: int
    symbol_size: int
    field: FieldSpec = GF256
    extra: float = 0.0

    def __post_init__(self):
        if self.symbols < 1:
            raise ValueError("symbols must be >= 1")
        if self.symbols > 0xFFFF or self.symbol_size > 0xFFFF:
            raise ValueError("symbols and symbol_size must fit in 16 bits")
        if self.symbol_size < 1:
            raise ValueError("symbol_size must be >= 1")
        if (self.symbol_size * 8) % self.field.bits_per_element:
            raise ValueError("symbol_size is not a whole number of field elements")
        if not self.extra >= 0:
            raise ValueError("extra must be >= 0")

    @property
    def elements_per_symbol(self) -> int:
        return self.symbol_size * 8 // self.field.bits_per_element

    @property
    def generation_bytes(self) -> int:
        return self.symbols * self.symbol_size

    @property
    def packets_per_generation(self) -> int:
        """How many packets a source emits per generation given ``extra``."""
        # round first so that e.g. 16 * 1.1 does not become 18
        return math.ceil(round(self.symbols * (1 + self.extra), 9))


@dataclass(frozen=True)
class Generation:
    id: int
    symbols: tuple[bytes, ...]

    @classmethod
    def from_bytes(cls, id: int, data: bytes, params: CodingParams) -> "Generation":
        """Split ``data`` into symbols, zero-padding a short final generation."""
        if len(data) > params.generation_bytes:
            raise ParamMismatch(f"{len(data)} bytes exceed one generation ({params.generation_bytes})")
        data = data.ljust(params.generation_bytes, b"\0")
        size = params.symbol_size
        return cls(id, tuple(data[i * size:(i + 1) * size] for i in range(params.symbols)))

    def to_bytes(self) -> bytes:
        return b"".join(self.symbols)


@dataclass(frozen=True)
class CodedPacket:
    generation_id: int
    symbols: int
    symbol_size: int
    field: FieldSpec
    vector: tuple[int, ...]
    symbol: bytes

    def __post_init__(self):
        if len(self.vector) != self.symbols:
            raise ParamMismatch(f"coding vector has {len(self.vector)} entries, expected {self.symbols}")
        if len(self.symbol) != self.symbol_size:
            raise ParamMismatch(f"symbol has {len(self.symbol)} bytes, expected {self.symbol_size}")


def draw_coefficients(rng: RandomSource, n: int, field: FieldSpec) -> np.ndarray:
    """Uniform vector over ``field**n``, redrawn while it is all zero."""
    while True:
        v = np.asarray(rng.integers(0, field.order, size=n, dtype=np.uint8), dtype=np.uint8)
        if v.any():
            return v


class _Coder:
    def __init__(self, params: CodingParams, generation_id: int):
        self.params = params
        self.generation_id = generation_id

    def _check(self, pkt: CodedPacket):
        p = self.params
        if (pkt.symbols, pkt.symbol_size, pkt.field) != (p.symbols, p.symbol_size, p.field):
            raise ParamMismatch(
                f"packet params (g={pkt.symbols}, size={pkt.symbol_size}, {pkt.field!r}) "
                f"do not match coder (g={p.symbols}, size={p.symbol_size}, {p.field!r})")
        if pkt.generation_id != self.generation_id:
            raise GenerationMismatch(f"packet is for generation {pkt.generation_id}, coder holds {self.generation_id}")

    def _packet(self, vector: np.ndarray, elements: np.ndarray) -> CodedPacket:
        p = self.params
        return CodedPacket(self.generation_id, p.symbols, p.symbol_size, p.field,
                           tuple(vector.tolist()), elements_to_bytes(elements, p.field))

    def _emit(self, sent: "Decoder | None", draw) -> CodedPacket:
        # with a sent-span tracker, keep redrawing until the packet adds to what
        # this node has already put on the wire (bounded; gives up when saturated)
        if sent is None or sent.rank >= self.rank:
            return draw()
        for _ in range(64):
            pkt = draw()
            if sent.consume(pkt):
                return pkt
        return pkt


class Encoder(_Coder):
    """Source side: holds the whole generation, so its rank is always ``g``."""

    def __init__(self, generation: Generation, params: CodingParams):
        super().__init__(params, generation.id)
        if len(generation.symbols) != params.symbols:
            raise ParamMismatch(f"generation has {len(generation.symbols)} symbols, expected {params.symbols}")
        if any(len(s) != params.symbol_size for s in generation.symbols):
            raise ParamMismatch(f"every symbol must be {params.symbol_size} bytes")
        self.generation = generation
        self._data = np.stack([bytes_to_elements(s, params.field) for s in generation.symbols])

    @property
    def rank(self) -> int:
        return self.params.symbols

    def encode(self, rng: RandomSource, sent: "Decoder | None" = None) -> CodedPacket:
        field = self.params.field

        def draw():
            v = draw_coefficients(rng, self.params.symbols, field)
            return self._packet(v, combine(v, self._data, field))

        return self._emit(sent, draw)


class Decoder(_Coder):
    """Receiving side.  Also able to recode whatever it has collected so far."""

    def __init__(self, params: CodingParams, generation_id: int = 0):
        super().__init__(params, generation_id)
        g = params.symbols
        self._coeffs = np.zeros((g, g), dtype=np.uint8)
        self._data = np.zeros((g, params.elements_per_symbol), dtype=np.uint8)
        self._present = np.zeros(g, dtype=bool)
        self.rank = 0

    def consume(self, pkt: CodedPacket) -> bool:
        """Fold a packet into the state; True iff it raised the rank."""
        self._check(pkt)
        field = self.params.field
        mul = field.mul_table
        v = np.array(pkt.vector, dtype=np.uint8)
        s = bytes_to_elements(pkt.symbol, field)

        rows = np.flatnonzero(self._present)
        c = v[rows]
        hit = c != 0
        if hit.any():
            rows, c = rows[hit], c[hit]
            v ^= combine(c, self._coeffs[rows], field)
            s ^= combine(c, self._data[rows], field)

        nz = np.flatnonzero(v)
        if len(nz) == 0:
            return False
        pivot = nz[0]
        inv = field.inv_table[v[pivot]]
        v = mul[inv][v]
        s = mul[inv][s]

        # clear the new pivot column out of the existing rows
        rows = np.flatnonzero(self._present)
        c = self._coeffs[rows, pivot]
        hit = c != 0
        if hit.any():
            rows, c = rows[hit], c[hit]
            self._coeffs[rows] ^= mul[c[:, None], v[None, :]]
            self._data[rows] ^= mul[c[:, None], s[None, :]]

        self._coeffs[pivot] = v
        self._data[pivot] = s
        self._present[pivot] = True
        self.rank += 1
        return True

    def is_complete(self) -> bool:
        return self.rank == self.params.symbols

    def recode(self, rng: RandomSource, sent: "Decoder | None" = None) -> CodedPacket:
        if self.rank == 0:
            raise EmptyState("nothing to recode from")
        field = self.params.field
        rows = np.flatnonzero(self._present)

        def draw():
            w = draw_coefficients(rng, len(rows), field)
            return self._packet(combine(w, self._coeffs[rows], field), combine(w, self._data[rows], field))

        return self._emit(sent, draw)

    def extract(self) -> Generation:
        if not self.is_complete():
            raise Incomplete(f"rank {self.rank} of {self.params.symbols}")
        f = self.params.field
        return Generation(self.generation_id, tuple(elements_to_bytes(row, f) for row in self._data))


class Recoder(Decoder):
    """Intermediate node: a decoder that is used for its ``recode`` side."""

