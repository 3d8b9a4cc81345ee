"""Arithmetic over the binary extension fields GF(2), GF(2^4) and GF(2^8).

Elements are plain ints (scalars) or ``uint8`` numpy arrays (vectors).
Multiplication goes through a full product table built once per field from a
schoolbook carry-less multiply, so vector operations are single fancy-index
lookups.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

# x^4+x+1 and x^8+x^4+x^3+x+1 (the AES polynomial)
REDUCTION_POLYNOMIALS = {2: 0b11, 16: 0x13, 256: 0x11B}


class ZeroInverse(ZeroDivisionError):
    pass


class LengthMismatch(ValueError):
    pass


def _clmul_reduce(a, b, poly: int, bits: int):
    """Shift-and-add multiply with reduction; works on ints or int arrays."""
    result = a * 0
    top = 1 << bits
    for _ in range(bits):
        result = result ^ (a * (b & 1))
        b = b >> 1
        a = a << 1
        a = a ^ (poly * ((a & top) != 0))
    return result


@dataclass(frozen=True)
class FieldSpec:
    order: int

    def __post_init__(self):
        if self.order not in REDUCTION_POLYNOMIALS:
            raise ValueError(f"unsupported field order {self.order}; expected one of 2, 16, 256")

    @property
    def bits_per_element(self) -> int:
        return self.order.bit_length() - 1

    @property
    def polynomial(self) -> int:
        return REDUCTION_POLYNOMIALS[self.order]

    @cached_property
    def mul_table(self) -> np.ndarray:
        a = np.arange(self.order, dtype=np.int64)[:, None]
        b = np.arange(self.order, dtype=np.int64)[None, :]
        table = _clmul_reduce(a, b, self.polynomial, self.bits_per_element)
        table = table.astype(np.uint8)
        table.flags.writeable = False
        return table

    @cached_property
    def inv_table(self) -> np.ndarray:
        rows, cols = np.nonzero(self.mul_table == 1)
        inv = np.zeros(self.order, dtype=np.uint8)
        inv[rows] = cols
        inv.flags.writeable = False
        return inv

    def __repr__(self):
        return f"GF({self.order})"


GF2 = FieldSpec(2)
GF16 = FieldSpec(16)
GF256 = FieldSpec(256)

FIELDS = {2: GF2, 16: GF16, 256: GF256}


def field_from_order(order: int) -> FieldSpec:
    try:
        return FIELDS[order]
    except KeyError:
        raise ValueError(f"unsupported field order {order}; expected one of 2, 16, 256") from None


def field_from_bits(bits: int) -> FieldSpec:
    return field_from_order(1 << bits)


def _check(value: int, field: FieldSpec) -> int:
    if not 0 <= value < field.order:
        raise ValueError(f"{value} is not an element of {field!r}")
    return value


def gf_add(a: int, b: int, field: FieldSpec) -> int:
    return _check(a, field) ^ _check(b, field)


def gf_mul(a: int, b: int, field: FieldSpec) -> int:
    return int(field.mul_table[_check(a, field), _check(b, field)])


def gf_inv(a: int, field: FieldSpec) -> int:
    if _check(a, field) == 0:
        raise ZeroInverse(f"zero has no inverse in {field!r}")
    return int(field.inv_table[a])


def gf_vector_axpy(dest: np.ndarray, src: np.ndarray, c: int, field: FieldSpec) -> np.ndarray:
    """Return ``dest + c * src`` element-wise; inputs are left untouched."""
    if dest.shape != src.shape:
        raise LengthMismatch(f"vector lengths differ: {dest.shape} vs {src.shape}")
    return dest ^ field.mul_table[_check(c, field)][src]


def scale(vec: np.ndarray, c: int, field: FieldSpec) -> np.ndarray:
    return field.mul_table[c][vec]


def combine(coeffs: np.ndarray, rows: np.ndarray, field: FieldSpec) -> np.ndarray:
    """Linear combination ``sum_j coeffs[j] * rows[j]`` of the rows of a 2-D array."""
    if len(coeffs) != len(rows):
        raise LengthMismatch(f"{len(coeffs)} coefficients for {len(rows)} rows")
    if len(rows) == 0:
        return np.zeros(rows.shape[1:], dtype=np.uint8)
    products = field.mul_table[np.asarray(coeffs)[:, None], rows]
    return np.bitwise_xor.reduce(products, axis=0)


def bytes_to_elements(data: bytes, field: FieldSpec) -> np.ndarray:
    """Expand bytes into field elements, most significant bits first."""
    raw = np.frombuffer(data, dtype=np.uint8)
    if field.order == 256:
        return raw.copy()
    if field.order == 16:
        out = np.empty(2 * len(raw), dtype=np.uint8)
        out[0::2] = raw >> 4
        out[1::2] = raw & 0x0F
        return out
    return np.unpackbits(raw)


def elements_to_bytes(elements: np.ndarray, field: FieldSpec) -> bytes:
    """Pack field elements into bytes, zero-padding the final byte."""
    elements = np.asarray(elements, dtype=np.uint8)
    if field.order == 256:
        return elements.tobytes()
    if field.order == 16:
        if len(elements) % 2:
            elements = np.append(elements, np.uint8(0))
        return ((elements[0::2] << 4) | elements[1::2]).astype(np.uint8).tobytes()
    return np.packbits(elements).tobytes()
