"""UDP service-chain nodes: encoder -> recoder(s) -> decoder.

Each node is a single-threaded receive/transform/send loop.  Coded packets
travel as one frame per datagram.  The encoder closes the stream with an
end-of-stream datagram carrying the original length; relays forward it and
the decoder writes its output when it arrives.  End-of-stream datagrams are
never subject to injected loss.
"""

from __future__ import annotations

import json
import logging
import signal
import socket
import sys
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import framing
from .codec import CodecError, CodingParams, Incomplete
from .pipeline import GenerationSink, RecodeRelay, encode_stream, generation_count

log = logging.getLogger(__name__)

ROLES = ("encode", "recode", "decode")
MAX_DATAGRAM = 65535
EOS_REPEAT = 3


class _Stop(Exception):
    pass


@dataclass
class NodeStats:
    role: str
    packets_in: int = 0
    packets_out: int = 0
    innovative: int = 0
    malformed: int = 0
    dropped: int = 0
    generations_decoded: int = 0
    generations_total: int = 0


def parse_addr(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep:
        raise ValueError(f"address {text!r} is not host:port")
    return host or "127.0.0.1", int(port)


def _emit(event: str, **fields):
    print(json.dumps({"event": event, **fields}), file=sys.stderr, flush=True)


class Node:
    def __init__(self, role: str, params: CodingParams, *, listen=None, forward=None,
                 loss: float = 0.0, seed: int = 0, pace: float = 0.0005,
                 idle_timeout: float | None = None):
        if role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}")
        if role != "decode" and forward is None:
            raise ValueError(f"{role} node needs a forward address")
        if role != "encode" and listen is None:
            raise ValueError(f"{role} node needs a listen address")
        if not 0 <= loss < 1:
            raise ValueError("loss must be in [0, 1)")
        self.role = role
        self.params = params
        self.forward = forward
        self.loss = loss
        self.pace = pace
        self.idle_timeout = idle_timeout
        code_seq, loss_seq = np.random.SeedSequence(seed).spawn(2)
        self.rng = np.random.default_rng(code_seq)
        self.loss_rng = np.random.default_rng(loss_seq)
        self.stats = NodeStats(role)

        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        try:
            self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 8 << 20)
        except OSError:
            pass
        self.sock.bind(listen or ("127.0.0.1", 0))
        self.address = self.sock.getsockname()

    def close(self):
        self.sock.close()

    def _send(self, datagram: bytes, lossy: bool = True):
        if lossy and self.loss and self.loss_rng.random() < self.loss:
            self.stats.dropped += 1
        else:
            self.sock.sendto(datagram, self.forward)
            if lossy:
                self.stats.packets_out += 1
        if self.pace:
            time.sleep(self.pace)

    def _send_eos(self, length: int, generations: int):
        for _ in range(EOS_REPEAT):
            self._send(framing.encode_eos(length, generations), lossy=False)

    def run_encoder(self, data: bytes) -> int:
        for pkt in encode_stream(data, self.params, self.rng):
            self._send(framing.serialize(pkt))
        self.stats.generations_total = generation_count(len(data), self.params)
        self._send_eos(len(data), self.stats.generations_total)
        return 0

    def _receive(self):
        """Yield coded packets until end-of-stream; returns the EOS payload."""
        self.sock.settimeout(self.idle_timeout)
        while True:
            try:
                data, _ = self.sock.recvfrom(MAX_DATAGRAM)
            except socket.timeout:
                if self.stats.packets_in or self.stats.malformed:
                    log.warning("idle for %ss, assuming the stream ended", self.idle_timeout)
                    return None
                continue
            eos = framing.decode_eos(data)
            if eos is not None:
                return eos
            self.stats.packets_in += 1
            try:
                yield framing.deserialize(data)
            except framing.FramingError as exc:
                self.stats.malformed += 1
                log.warning("skipping malformed datagram: %s", exc)

    def run_recoder(self) -> int:
        relay = RecodeRelay(self.params, self.rng)
        stream = self._receive()
        eos = None
        while True:
            try:
                pkt = next(stream)
            except StopIteration as stop:
                eos = stop.value
                break
            try:
                out = relay.push(pkt)
            except CodecError as exc:
                self.stats.malformed += 1
                log.warning("skipping packet: %s", exc)
                continue
            for q in out:
                self._send(framing.serialize(q))
        self.stats.innovative = relay.innovative
        if eos is not None:
            self._send_eos(*eos)
        return 0

    def run_decoder(self, out) -> int:
        sink = GenerationSink(self.params)
        stream = self._receive()
        eos = None
        while True:
            try:
                pkt = next(stream)
            except StopIteration as stop:
                eos = stop.value
                break
            try:
                sink.push(pkt)
            except CodecError as exc:
                self.stats.malformed += 1
                log.warning("skipping packet: %s", exc)
        self.stats.innovative = sink.innovative
        self.stats.generations_decoded = sink.decoded()
        if eos is None:
            log.error("stream ended without an end-of-stream marker; length unknown")
            self.stats.generations_total = len(sink.decoders)
            return 1
        length, self.stats.generations_total = eos
        try:
            data = sink.assemble(length)
        except Incomplete as exc:
            log.error("decoding failed: %s", exc)
            return 1
        out.write(data)
        out.flush()
        return 0


def run_node(role: str, params: CodingParams, *, listen=None, forward=None, input_path=None,
             output_path=None, loss: float = 0.0, seed: int = 0, pace: float = 0.0005,
             idle_timeout: float | None = None) -> int:
    """Run one chain node to completion and print its statistics to stderr."""
    if role == "encode" and input_path is None:
        raise ValueError("encode node needs an input file ('-' for stdin)")
    if role == "decode" and output_path is None:
        raise ValueError("decode node needs an output file ('-' for stdout)")
    node = Node(role, params, listen=listen, forward=forward, loss=loss, seed=seed,
                pace=pace, idle_timeout=idle_timeout)

    def stop(signum, frame):
        raise _Stop()

    previous = signal.signal(signal.SIGTERM, stop)
    _emit("ready", role=role, listen="%s:%d" % node.address[:2])
    code = 1
    try:
        if role == "encode":
            if input_path == "-":
                data = sys.stdin.buffer.read()
            else:
                with open(input_path, "rb") as fh:
                    data = fh.read()
            code = node.run_encoder(data)
        elif role == "recode":
            code = node.run_recoder()
        elif output_path == "-":
            code = node.run_decoder(sys.stdout.buffer)
        else:
            with open(output_path, "wb") as fh:
                code = node.run_decoder(fh)
    except (_Stop, KeyboardInterrupt):
        code = 1
    finally:
        signal.signal(signal.SIGTERM, previous)
        node.close()
        _emit("stats", **asdict(node.stats))
    return code
