"""Slot-based Monte-Carlo simulation of E2E, HbH and RLNC forwarding.

Time is divided into slots of one inter-packet time.  Per slot a transmitting
node sends one packet per outgoing link, and every link loses it
independently with its own probability.  All schemes stop the moment the sink
can decode.

Two fidelities:

* ``DOF`` tracks only ranks and assumes every packet a node sends to a
  lower-rank neighbour is innovative.  It samples each scheme from exact
  distributions (negative binomial / geometric waiting times) instead of
  stepping slot by slot.
* ``EXACT`` steps slot by slot and pushes real coded packets through
  :mod:`ncaas.codec`.
"""

from __future__ import annotations

import csv
import enum
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field as dc_field, replace
from typing import Iterable, Sequence, TextIO

import numpy as np

from .analytic import LATENCY, PACKETS, ChannelModel, SchemeId
from .codec import CodingParams, Decoder, Encoder, Generation
from .framing import frame_length
from .galois import GF256, FieldSpec

MASK64 = (1 << 64) - 1


class EmptyGrid(ValueError):
    pass


class Fidelity(str, enum.Enum):
    DOF = "dof"
    EXACT = "exact"


def mix_seed(master_seed: int, index: int) -> int:
    """SplitMix64 step: seed of run ``index`` under ``master_seed``."""
    z = (master_seed + (index + 1) * 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def make_rng(seed: int) -> np.random.Generator:
    """The simulator's RandomSource: PCG64 seeded through SeedSequence."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True)
class ScenarioConfig:
    scheme: SchemeId
    generation_size: int
    packet_size: int
    loss: tuple[float, ...]
    rate_bps: float = 1e6
    link_delay: float = 0.0
    fidelity: Fidelity = Fidelity.DOF
    field: FieldSpec = GF256
    seed: int = 0
    # relays hold a packet for one slot before forwarding it
    store_and_forward: bool = False
    # count header and coding-vector bytes in the inter-packet time
    include_overhead: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scheme", SchemeId(self.scheme))
        object.__setattr__(self, "fidelity", Fidelity(self.fidelity))
        object.__setattr__(self, "loss", tuple(float(e) for e in self.loss))
        if self.generation_size < 1 or self.packet_size < 1:
            raise ValueError("generation size and packet size must be positive")
        self.channel  # validates loss, rate and delay

    @property
    def hops(self) -> int:
        return len(self.loss)

    @property
    def channel(self) -> ChannelModel:
        overhead = 0
        if self.include_overhead:
            overhead = frame_length(self.generation_size, self.packet_size, self.field) - self.packet_size
        return ChannelModel.from_rate(self.loss, self.packet_size, self.rate_bps, self.link_delay, overhead)


@dataclass(frozen=True)
class SimResult:
    packets_sent_per_link: tuple[int, ...]
    slots_to_decode: int
    latency: float
    decode_success: bool = True

    @property
    def total_packets(self) -> int:
        return sum(self.packets_sent_per_link)


def _result(cfg: ScenarioConfig, per_link, slots: int, success: bool = True) -> SimResult:
    ch = cfg.channel
    return SimResult(tuple(int(n) for n in per_link), int(slots),
                     slots * ch.inter_packet_time + ch.hops * ch.link_delay, success)


# -- DOF samplers --------------------------------------------------------------

def _e2e_dof(cfg: ScenarioConfig, rng: np.random.Generator) -> SimResult:
    G = cfg.generation_size
    through = math.prod(1 - e for e in cfg.loss)
    failures = int(rng.negative_binomial(G, through)) if through < 1 else 0
    slots = G + failures
    # every failed slot dies on exactly one link; link h still sees it if it died at h or later
    per_link = [slots] * cfg.hops
    if failures:
        reach, first_loss = 1.0, []
        for e in cfg.loss:
            first_loss.append(reach * e)
            reach *= 1 - e
        probs = np.array(first_loss) / (1 - through)
        died = rng.multinomial(failures, probs / probs.sum())
        lost_before = np.concatenate(([0], np.cumsum(died)[:-1]))
        per_link = [slots - int(n) for n in lost_before]
    return _result(cfg, per_link, slots)


def _hbh_dof(cfg: ScenarioConfig, rng: np.random.Generator) -> SimResult:
    G = cfg.generation_size
    stages = [G + (int(rng.negative_binomial(G, 1 - e)) if e > 0 else 0) for e in cfg.loss]
    return _result(cfg, stages, sum(stages))


def _rlnc_waits(cfg: ScenarioConfig, rng: np.random.Generator) -> np.ndarray:
    """Slots each link needs to get its k-th innovative packet across, shape (H, G)."""
    return np.stack([rng.geometric(1 - e, size=cfg.generation_size) for e in cfg.loss])


def _rlnc_finish_times(waits: np.ndarray, store_and_forward: bool) -> np.ndarray:
    """Slot in which node h receives its k-th degree of freedom, shape (..., H, G).

    Link h can start on packet k once node h-1 holds it and link h has
    finished packet k-1; from then on it needs ``waits[h, k]`` attempts.
    Writing S for the running sum of waits this is a running maximum:
    ``A[k] = S[k] + max(0, max_{j<=k} (A_up[j] + delay - 1 - S[j-1]))``.
    """
    out = np.empty(waits.shape, dtype=np.int64)
    upstream = None
    for h in range(waits.shape[-2]):
        w = waits[..., h, :].astype(np.int64)
        S = np.cumsum(w, axis=-1)
        if upstream is None:
            out[..., h, :] = S
        else:
            slack = upstream + int(store_and_forward) - 1 - (S - w)
            out[..., h, :] = S + np.maximum.accumulate(np.maximum(slack, 0), axis=-1)
        upstream = out[..., h, :]
    return out


def _rlnc_dof(cfg: ScenarioConfig, rng: np.random.Generator) -> SimResult:
    waits = _rlnc_waits(cfg, rng)
    finish = _rlnc_finish_times(waits, cfg.store_and_forward)
    return _result(cfg, waits.sum(axis=-1), finish[-1, -1])


def _rlnc_dof_slot_loop(cfg: ScenarioConfig, rng: np.random.Generator) -> SimResult:
    """Literal slot-by-slot rank pipeline; reference for the vectorised sampler."""
    G, H = cfg.generation_size, cfg.hops
    rank = [G] + [0] * H
    sent = [0] * H
    order = range(H, 0, -1) if cfg.store_and_forward else range(1, H + 1)
    slot = 0
    while rank[H] < G:
        slot += 1
        for h in order:
            if rank[h - 1] > rank[h]:
                sent[h - 1] += 1
                if rng.random() >= cfg.loss[h - 1]:
                    rank[h] += 1
    return _result(cfg, sent, slot)


# -- EXACT (codec-backed) ------------------------------------------------------

def _random_generation(cfg: ScenarioConfig, rng: np.random.Generator) -> tuple[CodingParams, Generation]:
    params = CodingParams(cfg.generation_size, cfg.packet_size, cfg.field)
    data = rng.integers(0, 256, size=params.generation_bytes, dtype=np.uint8).tobytes()
    return params, Generation.from_bytes(0, data, params)


def _e2e_exact(cfg: ScenarioConfig, rng: np.random.Generator) -> SimResult:
    params, gen = _random_generation(cfg, rng)
    enc, sink = Encoder(gen, params), Decoder(params)
    sent = [0] * cfg.hops
    slot = 0
    while not sink.is_complete():
        slot += 1
        pkt = enc.encode(rng)
        for h, eps in enumerate(cfg.loss):
            sent[h] += 1
            if rng.random() < eps:
                break
        else:
            sink.consume(pkt)
    return _result(cfg, sent, slot, sink.extract() == gen)


def _hbh_exact(cfg: ScenarioConfig, rng: np.random.Generator) -> SimResult:
    params, original = _random_generation(cfg, rng)
    gen = original
    sent = []
    for eps in cfg.loss:
        enc, dec = Encoder(gen, params), Decoder(params)
        n = 0
        while not dec.is_complete():
            n += 1
            pkt = enc.encode(rng)
            if rng.random() >= eps:
                dec.consume(pkt)
        sent.append(n)
        gen = dec.extract()
    return _result(cfg, sent, sum(sent), gen == original)


def _rlnc_exact(cfg: ScenarioConfig, rng: np.random.Generator) -> SimResult:
    params, gen = _random_generation(cfg, rng)
    H = cfg.hops
    nodes = [Encoder(gen, params)] + [Decoder(params) for _ in range(H)]
    sent = [0] * H
    order = range(H, 0, -1) if cfg.store_and_forward else range(1, H + 1)
    slot = 0
    while not nodes[H].is_complete():
        slot += 1
        for h in order:
            up, down = nodes[h - 1], nodes[h]
            # downstream only ever hears from upstream, so equal rank means equal span
            if up.rank > down.rank:
                pkt = up.encode(rng) if h == 1 else up.recode(rng)
                sent[h - 1] += 1
                if rng.random() >= cfg.loss[h - 1]:
                    down.consume(pkt)
    return _result(cfg, sent, slot, nodes[H].extract() == gen)


_SIMULATORS = {
    (SchemeId.E2E, Fidelity.DOF): _e2e_dof,
    (SchemeId.HBH, Fidelity.DOF): _hbh_dof,
    (SchemeId.RLNC, Fidelity.DOF): _rlnc_dof,
    (SchemeId.E2E, Fidelity.EXACT): _e2e_exact,
    (SchemeId.HBH, Fidelity.EXACT): _hbh_exact,
    (SchemeId.RLNC, Fidelity.EXACT): _rlnc_exact,
}


def _dispatch(cfg: ScenarioConfig, rng, scheme: SchemeId) -> SimResult:
    if cfg.scheme != scheme:
        raise ValueError(f"config is for {cfg.scheme}, not {scheme}")
    return _SIMULATORS[scheme, cfg.fidelity](cfg, rng)


def simulate_e2e(cfg: ScenarioConfig, rng: np.random.Generator) -> SimResult:
    return _dispatch(cfg, rng, SchemeId.E2E)


def simulate_hbh(cfg: ScenarioConfig, rng: np.random.Generator) -> SimResult:
    return _dispatch(cfg, rng, SchemeId.HBH)


def simulate_rlnc(cfg: ScenarioConfig, rng: np.random.Generator) -> SimResult:
    return _dispatch(cfg, rng, SchemeId.RLNC)


def simulate(cfg: ScenarioConfig, rng: np.random.Generator | None = None) -> SimResult:
    if rng is None:
        rng = make_rng(cfg.seed)
    return _SIMULATORS[cfg.scheme, cfg.fidelity](cfg, rng)


# -- repeated runs -------------------------------------------------------------

@dataclass(frozen=True)
class RunStatistics:
    n_runs: int
    mean_total_packets: float
    sd_total_packets: float
    ci95_total_packets: float
    mean_latency: float
    sd_latency: float
    ci95_latency: float
    mean_slots: float
    mean_packets_per_link: tuple[float, ...]
    success_rate: float

    @classmethod
    def from_arrays(cls, per_link: np.ndarray, slots: np.ndarray, latency: np.ndarray,
                    success: np.ndarray) -> "RunStatistics":
        n = len(slots)
        if n < 1:
            raise ValueError("need at least one run")
        total = per_link.sum(axis=1).astype(float)

        def sd(x):
            return float(np.std(x, ddof=1)) if n > 1 else 0.0

        half = 1.959963984540054 / math.sqrt(n)
        return cls(n, float(total.mean()), sd(total), half * sd(total),
                   float(latency.mean()), sd(latency), half * sd(latency),
                   float(slots.mean()), tuple(float(x) for x in per_link.mean(axis=0)),
                   float(np.mean(success)))


_BATCH = 2048


def _run_span(cfg: ScenarioConfig, seeds: Sequence[int]):
    """Run one scenario for each seed; returns (per_link, slots, success)."""
    if cfg.scheme == SchemeId.RLNC and cfg.fidelity == Fidelity.DOF:
        waits = np.stack([_rlnc_waits(cfg, make_rng(s)) for s in seeds])
        finish = _rlnc_finish_times(waits, cfg.store_and_forward)
        return waits.sum(axis=-1), finish[:, -1, -1], np.ones(len(seeds), dtype=bool)
    results = [simulate(cfg, make_rng(s)) for s in seeds]
    return (np.array([r.packets_sent_per_link for r in results], dtype=np.int64),
            np.array([r.slots_to_decode for r in results], dtype=np.int64),
            np.array([r.decode_success for r in results]))


def _run_chunk(args):
    cfg, seeds = args
    return _run_span(cfg, seeds)


def run_many(cfg: ScenarioConfig, n_runs: int, master_seed: int, workers: int | None = None) -> RunStatistics:
    """Run ``n_runs`` independent replications; run ``i`` is seeded with
    ``mix_seed(master_seed, i)`` so the result does not depend on scheduling."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    seeds = [mix_seed(master_seed, i) for i in range(n_runs)]
    chunks = [(cfg, seeds[i:i + _BATCH]) for i in range(0, n_runs, _BATCH)]
    if workers and workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_run_chunk, chunks))
    else:
        parts = [_run_chunk(c) for c in chunks]
    per_link = np.concatenate([p[0] for p in parts])
    slots = np.concatenate([p[1] for p in parts])
    success = np.concatenate([p[2] for p in parts])
    ch = cfg.channel
    latency = slots * ch.inter_packet_time + ch.hops * ch.link_delay
    return RunStatistics.from_arrays(per_link, slots, latency, success)


# -- parameter sweeps ----------------------------------------------------------

TABLE1_LOSS = (0.1, 0.2, 0.3, 0.4, 0.5)
TABLE1_PACKET_SIZE = (250, 500, 750, 1000, 1450)
TABLE1_GENERATION = (16, 32, 64, 128)
TABLE1_HOPS = (2, 3, 4, 5, 6, 7)
TABLE1_RATE = (0.25e6, 0.5e6, 1e6, 2e6, 4e6, 8e6)


@dataclass(frozen=True)
class SweepGrid:
    """Cartesian parameter grid.  A loss entry is either one probability used
    on every hop or a per-hop tuple (only combined with matching hop counts)."""

    generation_sizes: tuple[int, ...]
    packet_sizes: tuple[int, ...]
    hops: tuple[int, ...]
    losses: tuple
    rates: tuple[float, ...]
    link_delay: float = 0.0

    def points(self) -> list[tuple[int, int, int, float, tuple[float, ...]]]:
        pts = []
        for G, L, H, rate, eps in itertools.product(
                self.generation_sizes, self.packet_sizes, self.hops, self.rates, self.losses):
            if isinstance(eps, (tuple, list)):
                if len(eps) != H:
                    continue
                loss = tuple(float(e) for e in eps)
            else:
                loss = (float(eps),) * H
            pts.append((G, L, H, float(rate), loss))
        return pts


PRESETS: dict[str, SweepGrid] = {
    "fig3": SweepGrid((64,), (250,), (3,), TABLE1_LOSS, (1e6,)),
    "fig4": SweepGrid((64,), (1450,), (3,), (0.0,), TABLE1_RATE),
    "fig5": SweepGrid((64,), (1450,), (3,), (0.5,), TABLE1_RATE),
    "fig6": SweepGrid((64,), (250,), TABLE1_HOPS, TABLE1_LOSS, (0.25e6,)),
    "fig7": SweepGrid((64,), (250,), TABLE1_HOPS, TABLE1_LOSS, (0.25e6,)),
    "fig8": SweepGrid((64,), TABLE1_PACKET_SIZE, TABLE1_HOPS, (0.1,), (0.25e6,)),
    "fig11": SweepGrid((64,), (250,), (2,), tuple(itertools.product(TABLE1_LOSS, TABLE1_LOSS)), (0.25e6,)),
    "table1": SweepGrid(TABLE1_GENERATION, TABLE1_PACKET_SIZE, TABLE1_HOPS, TABLE1_LOSS, TABLE1_RATE),
}


@dataclass(frozen=True)
class SweepRow:
    scheme: SchemeId
    generation_size: int
    packet_size: int
    hops: int
    rate_bps: float
    loss: tuple[float, ...]
    stats: RunStatistics
    theory_packets: float
    theory_latency: float
    gain_vs_rlnc: float = dc_field(default=float("nan"))


def _sweep_point(args) -> list[SweepRow]:
    (G, L, H, rate, loss), schemes, n_runs, seed, base, workers = args
    rows = []
    for scheme in schemes:
        cfg = replace(base, scheme=scheme, generation_size=G, packet_size=L, loss=loss, rate_bps=rate)
        stats = run_many(cfg, n_runs, seed, workers)
        ch = cfg.channel
        rows.append(SweepRow(scheme, G, L, H, rate, loss, stats, PACKETS[scheme](G, ch), LATENCY[scheme](G, ch)))
    rlnc = next((r for r in rows if r.scheme == SchemeId.RLNC), None)
    if rlnc is not None:
        rows = [replace(r, gain_vs_rlnc=r.stats.mean_latency / rlnc.stats.mean_latency) for r in rows]
    return rows


def sweep(grid: SweepGrid, n_runs: int, master_seed: int, *,
          schemes: Iterable[SchemeId] = tuple(SchemeId), fidelity: Fidelity = Fidelity.DOF,
          field: FieldSpec = GF256, store_and_forward: bool = False,
          workers: int | None = None) -> list[SweepRow]:
    """Evaluate every grid point for every scheme, in canonical grid order.

    Point ``i`` uses ``mix_seed(master_seed, i)`` as the master seed of all its
    schemes, so rows are reproducible and independent of ``workers``.
    """
    points = grid.points()
    if not points:
        raise EmptyGrid("the parameter grid has no points")
    schemes = tuple(SchemeId(s) for s in schemes)
    base = ScenarioConfig(SchemeId.RLNC, 1, 1, (0.0,), link_delay=grid.link_delay, fidelity=fidelity,
                          field=field, store_and_forward=store_and_forward)
    jobs = [(p, schemes, n_runs, mix_seed(master_seed, i), base, None) for i, p in enumerate(points)]
    if workers and workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_sweep_point, jobs))
    else:
        parts = [_sweep_point(j) for j in jobs]
    return [row for part in parts for row in part]


CSV_COLUMNS = ("scheme", "G", "L_bytes", "H", "rate_bps", "eps", "n_runs",
               "mean_total_packets", "sd_total_packets", "mean_latency_s", "sd_latency_s",
               "theory_packets", "theory_latency_s", "gain_vs_rlnc")


def _num(x: float) -> str:
    return format(x, ".10g")


def write_csv(rows: Iterable[SweepRow], fh: TextIO):
    out = csv.writer(fh, lineterminator="\n")
    out.writerow(CSV_COLUMNS)
    for r in rows:
        s = r.stats
        out.writerow([r.scheme.value, r.generation_size, r.packet_size, r.hops, _num(r.rate_bps),
                      ";".join(_num(e) for e in r.loss), s.n_runs,
                      _num(s.mean_total_packets), _num(s.sd_total_packets),
                      _num(s.mean_latency), _num(s.sd_latency),
                      _num(r.theory_packets), _num(r.theory_latency), _num(r.gain_vs_rlnc)])
