"""Expected packet counts and latencies for a single-path multihop channel.

``G`` is the generation size, each link ``i`` drops packets independently
with probability ``loss[i]``, one packet takes ``inter_packet_time`` seconds
to send and every hop adds ``link_delay`` seconds.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class DomainError(ValueError):
    pass


class SchemeId(str, enum.Enum):
    E2E = "E2E"
    HBH = "HbH"
    RLNC = "RLNC"

    def __str__(self):
        return self.value

    @classmethod
    def parse(cls, text: str) -> "SchemeId":
        for s in cls:
            if s.value.lower() == text.lower():
                return s
        raise ValueError(f"unknown scheme {text!r}; expected one of E2E, HbH, RLNC")


def inter_packet_time(packet_size: int, rate_bps: float, overhead_bytes: int = 0) -> float:
    """Seconds to clock one packet onto a link of ``rate_bps``."""
    if rate_bps <= 0:
        raise DomainError("rate must be positive")
    return (packet_size + overhead_bytes) * 8 / rate_bps


def _check_eps(eps: float):
    if not 0 <= eps < 1:
        raise DomainError(f"loss probability {eps} outside [0, 1)")


@dataclass(frozen=True)
class ChannelModel:
    loss: tuple[float, ...]
    inter_packet_time: float
    link_delay: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "loss", tuple(float(e) for e in self.loss))
        if not self.loss:
            raise DomainError("need at least one hop")
        for e in self.loss:
            _check_eps(e)
        if not self.inter_packet_time > 0:
            raise DomainError("inter-packet time must be positive")
        if not self.link_delay >= 0:
            raise DomainError("link delay must be non-negative")

    @classmethod
    def from_rate(cls, loss, packet_size: int, rate_bps: float, link_delay: float = 0.0,
                  overhead_bytes: int = 0) -> "ChannelModel":
        return cls(tuple(loss), inter_packet_time(packet_size, rate_bps, overhead_bytes), link_delay)

    @property
    def hops(self) -> int:
        return len(self.loss)


def _expansion(eps: float) -> float:
    return 1.0 / (1.0 - eps)


def packets_e2e(G: float, ch: ChannelModel) -> float:
    # hop h carries every packet that must still survive hops h..H
    total = 0.0
    tail = 1.0
    for eps in reversed(ch.loss):
        tail *= _expansion(eps)
        total += G * tail
    return total


def packets_hbh(G: float, ch: ChannelModel) -> float:
    return G * sum(_expansion(e) for e in ch.loss)


packets_rlnc = packets_hbh


def latency_e2e(G: float, ch: ChannelModel) -> float:
    return G * math.prod(_expansion(e) for e in ch.loss) * ch.inter_packet_time + ch.hops * ch.link_delay


def latency_hbh(G: float, ch: ChannelModel) -> float:
    return G * ch.inter_packet_time * sum(_expansion(e) for e in ch.loss) + ch.hops * ch.link_delay


def latency_rlnc(G: float, ch: ChannelModel) -> float:
    return G * ch.inter_packet_time * _expansion(max(ch.loss)) + ch.hops * ch.link_delay


PACKETS = {SchemeId.E2E: packets_e2e, SchemeId.HBH: packets_hbh, SchemeId.RLNC: packets_rlnc}
LATENCY = {SchemeId.E2E: latency_e2e, SchemeId.HBH: latency_hbh, SchemeId.RLNC: latency_rlnc}


def two_hop_table(g: int, eps1: float, eps2: float) -> list[list[float]]:
    """Expected slots ``E[n][r]`` for every state with ``0 <= r <= n <= g``.

    ``n`` is how many packets the decoder still misses and ``r`` how many of
    those the recoder could already supply.  Each slot the encoder sends over
    link 1 and the recoder, if it holds anything new for the decoder
    (including what arrived this very slot), sends over link 2.
    """
    _check_eps(eps1)
    _check_eps(eps2)
    if g < 0:
        raise DomainError("g must be non-negative")
    p1, p2 = 1 - eps1, 1 - eps2
    both_lost = 1 - eps1 * eps2
    E = [[0.0] * (n + 1) for n in range(g + 1)]
    for n in range(1, g + 1):
        row, prev = E[n], E[n - 1]
        row[n] = n / p2
        for r in range(n - 1, 0, -1):
            row[r] = (1 + p1 * p2 * prev[r] + p1 * eps2 * row[r + 1] + eps1 * p2 * prev[r - 1]) / both_lost
        # recoder dry: a slot only counts once the encoder's packet gets through
        row[0] = 1 / p1 + p2 * prev[0] + eps2 * row[1]
    return E


def expected_slots_two_hop(g: int, r: int, eps1: float, eps2: float) -> float:
    if not 0 <= r <= g:
        raise DomainError(f"need 0 <= r <= g, got r={r}, g={g}")
    return two_hop_table(g, eps1, eps2)[g][r]


def gain(scheme_latency: float, rlnc_latency: float) -> float:
    if rlnc_latency == 0:
        raise ZeroDivisionError("RLNC latency is zero")
    if rlnc_latency < 0:
        raise DomainError("latency must be positive")
    return scheme_latency / rlnc_latency
