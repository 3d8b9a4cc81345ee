"""Command-line entry point: ``ncaas {analytic,sweep,code,node}``."""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys

import numpy as np

from . import analytic, framing
from .analytic import ChannelModel, DomainError, SchemeId
from .codec import CodecError, CodingParams
from .galois import field_from_order
from .node import ROLES, parse_addr, run_node
from .pipeline import GenerationSink, RecodeRelay, encode_stream, generation_count
from .simulator import PRESETS, EmptyGrid, Fidelity, SweepGrid, sweep, write_csv

log = logging.getLogger("ncaas")


def _gf_size(text: str) -> int:
    value = int(text)
    if value == 8:
        raise argparse.ArgumentTypeError(
            "GF(8) is not supported; use 16 for GF(2^4) or 256 for GF(2^8)")
    if value not in (2, 16, 256):
        raise argparse.ArgumentTypeError("gf size must be 2, 16 or 256")
    return value


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _loss_list(text: str) -> list:
    # "0.1,0.2" = uniform losses; "0.1/0.5" = one per-hop vector
    out = []
    for item in text.split(","):
        item = item.strip()
        if "/" in item:
            out.append(tuple(float(x) for x in item.split("/")))
        elif item:
            out.append(float(item))
    return out


def _default_seed() -> int:
    return int(os.environ.get("NCAAS_SEED", "0"))


def _add_coding_args(p: argparse.ArgumentParser, required_defaults: bool):
    p.add_argument("--symbols", type=int, default=16 if required_defaults else None,
                   help="generation size g")
    p.add_argument("--symbol-size", type=int, default=1450 if required_defaults else None,
                   help="bytes per symbol")
    p.add_argument("--gf-size", type=_gf_size, default=256 if required_defaults else None,
                   help="field size: 2, 16 or 256")
    p.add_argument("--extra", type=float, default=0.0, help="redundancy ratio")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default $NCAAS_SEED or 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ncaas", description="Random linear network coding toolkit")
    parser.add_argument("--config", help="flat key=value file; command-line flags take precedence")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", help="expected packet counts and latencies")
    p.add_argument("--g", type=int, default=64, help="generation size")
    p.add_argument("--hops", type=int, default=3)
    p.add_argument("--eps", type=_float_list, default=None, help="comma-separated loss per hop")
    p.add_argument("--size", type=int, default=1450, help="packet size in bytes")
    p.add_argument("--rate", type=float, default=1e6, help="channel rate in bit/s")
    p.add_argument("--tau-l", type=float, default=0.0, help="per-hop link delay in seconds")
    p.add_argument("--scheme", type=SchemeId.parse, default=None)
    p.add_argument("--csv", action="store_true", help="machine-readable output")

    p = sub.add_parser("sweep", help="Monte-Carlo parameter sweep to CSV")
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--g", type=_int_list, default=None)
    p.add_argument("--hops", type=_int_list, default=None)
    p.add_argument("--eps", type=_loss_list, default=None)
    p.add_argument("--size", type=_int_list, default=None)
    p.add_argument("--rate", type=_float_list, default=None)
    p.add_argument("--tau-l", type=float, default=None)
    p.add_argument("--runs", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--fidelity", choices=[f.value for f in Fidelity], default="dof")
    p.add_argument("--gf-size", type=_gf_size, default=256)
    p.add_argument("--store-and-forward", action="store_true",
                   help="relays wait one slot before forwarding")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out", default="-", help="output CSV path ('-' for stdout)")

    p = sub.add_parser("code", help="encode/recode/decode .ncap capture files")
    p.add_argument("mode", choices=ROLES)
    p.add_argument("--in", dest="in_path", default=None)
    p.add_argument("--out", dest="out_path", default=None)
    _add_coding_args(p, required_defaults=False)

    p = sub.add_parser("node", help="run one UDP chain node")
    p.add_argument("role", choices=ROLES)
    p.add_argument("--listen", type=parse_addr, default=None, help="host:port to receive on")
    p.add_argument("--forward", type=parse_addr, default=None, help="host:port to send to")
    p.add_argument("--input", default=None, help="payload file for the encoder ('-' = stdin)")
    p.add_argument("--output", default=None, help="decoder output file ('-' = stdout)")
    p.add_argument("--loss", type=float, default=0.0, help="drop outgoing datagrams with this probability")
    p.add_argument("--pace", type=float, default=0.0005, help="seconds to sleep after each datagram")
    p.add_argument("--idle-timeout", type=float, default=None)
    _add_coding_args(p, required_defaults=True)
    return parser


def _read_config(path: str) -> dict[str, str]:
    values = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ValueError(f"{path}:{n}: expected key=value")
            values[key.strip().replace("-", "_")] = value.strip()
    return values


def _apply_config(parser: argparse.ArgumentParser, argv, args) -> argparse.Namespace:
    subparser = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in subparser._actions if a.dest != "help"}
    defaults = {}
    for key, raw in _read_config(args.config).items():
        action = actions.get(key)
        if action is None or not action.option_strings:
            parser.error(f"unknown config key {key!r} for {args.command}")
        if isinstance(action, argparse._StoreTrueAction):
            defaults[key] = raw.lower() in ("1", "true", "yes", "on")
            continue
        try:
            defaults[key] = action.type(raw) if action.type else raw
        except (ValueError, argparse.ArgumentTypeError) as exc:
            parser.error(f"config key {key}: {exc}")
        if action.choices is not None and defaults[key] not in action.choices:
            parser.error(f"config key {key}: {raw!r} is not one of {sorted(action.choices)}")
    subparser.set_defaults(**defaults)
    return parser.parse_args(argv)


# -- subcommands ---------------------------------------------------------------

def cmd_analytic(args, parser) -> int:
    eps = args.eps if args.eps is not None else [0.0] * args.hops
    if len(eps) != args.hops:
        parser.error(f"--eps has {len(eps)} values but --hops is {args.hops}")
    if args.g < 1:
        parser.error("--g must be positive")
    try:
        ch = ChannelModel.from_rate(eps, args.size, args.rate, args.tau_l)
    except DomainError as exc:
        parser.error(str(exc))

    schemes = [args.scheme] if args.scheme else list(SchemeId)
    rlnc_latency = analytic.latency_rlnc(args.g, ch)
    rows = [(s.value, analytic.PACKETS[s](args.g, ch), analytic.LATENCY[s](args.g, ch)) for s in schemes]
    if args.hops == 2 and (args.scheme in (None, SchemeId.RLNC)):
        slots = analytic.expected_slots_two_hop(args.g, 0, *eps)
        rows.append(("RLNC-2hop", analytic.packets_rlnc(args.g, ch),
                     slots * ch.inter_packet_time + 2 * ch.link_delay))

    if args.csv:
        out = csv.writer(sys.stdout, lineterminator="\n")
        out.writerow(["scheme", "packets", "latency_s", "gain_vs_rlnc"])
        for name, packets, latency in rows:
            out.writerow([name, format(packets, ".10g"), format(latency, ".10g"),
                          format(analytic.gain(latency, rlnc_latency), ".10g")])
    else:
        print(f"G={args.g} H={args.hops} eps={','.join(map(str, eps))} L={args.size}B "
              f"rate={args.rate:g}b/s tau_P={ch.inter_packet_time:.6g}s tau_L={ch.link_delay:g}s")
        print(f"{'scheme':<10} {'packets':>12} {'latency_s':>12} {'gain':>8}")
        for name, packets, latency in rows:
            print(f"{name:<10} {packets:>12.2f} {latency:>12.6f} {analytic.gain(latency, rlnc_latency):>8.3f}")
    return 0


def cmd_sweep(args, parser) -> int:
    base = PRESETS[args.preset] if args.preset else None
    if base is None and not all([args.g, args.hops, args.eps, args.size, args.rate]):
        parser.error("give --preset or all of --g, --hops, --eps, --size, --rate")
    grid = SweepGrid(
        tuple(args.g or base.generation_sizes),
        tuple(args.size or base.packet_sizes),
        tuple(args.hops or base.hops),
        tuple(args.eps or base.losses),
        tuple(args.rate or base.rates),
        args.tau_l if args.tau_l is not None else (base.link_delay if base else 0.0),
    )
    if args.runs < 1:
        parser.error("--runs must be >= 1")
    seed = args.seed if args.seed is not None else _default_seed()
    try:
        rows = sweep(grid, args.runs, seed, fidelity=Fidelity(args.fidelity),
                     field=field_from_order(args.gf_size), store_and_forward=args.store_and_forward,
                     workers=args.workers)
    except (EmptyGrid, DomainError, ValueError) as exc:
        print(f"ncaas sweep: {exc}", file=sys.stderr)
        return 2
    if args.out == "-":
        write_csv(rows, sys.stdout)
    else:
        with open(args.out, "w", newline="") as fh:
            write_csv(rows, fh)
    return 0


def _params_from(args, first: framing.CodedPacket | None) -> CodingParams:
    symbols, size, gf = args.symbols, args.symbol_size, args.gf_size
    if first is not None:
        symbols = symbols or first.symbols
        size = size or first.symbol_size
        gf = gf or first.field.order
    return CodingParams(symbols or 16, size or 1450, field_from_order(gf or 256), args.extra)


def cmd_code(args, parser) -> int:
    if not args.in_path or not args.out_path:
        parser.error("code needs --in and --out")
    seed = args.seed if args.seed is not None else _default_seed()
    rng = np.random.default_rng(seed)

    if args.mode == "encode":
        params = _params_from(args, None)
        with open(args.in_path, "rb") as fh:
            data = fh.read()
        with open(args.out_path, "wb") as out:
            framing.write_ncap(out, encode_stream(data, params, rng), len(data))
        log.info("encoded %d bytes into %d generations", len(data), generation_count(len(data), params))
        return 0

    with open(args.in_path, "rb") as fh:
        reader = framing.NcapReader(fh)
        packets = [framing.deserialize(f) for f in reader]
        length = reader.original_length
    params = _params_from(args, packets[0] if packets else None)

    if args.mode == "recode":
        relay = RecodeRelay(params, rng)
        out_packets = [q for p in packets for q in relay.push(p)]
        with open(args.out_path, "wb") as out:
            framing.write_ncap(out, out_packets, length)
        return 0

    sink = GenerationSink(params)
    for p in packets:
        sink.push(p)
    data = sink.assemble(length)
    with open(args.out_path, "wb") as out:
        out.write(data)
    return 0


def cmd_node(args, parser) -> int:
    params = CodingParams(args.symbols, args.symbol_size, field_from_order(args.gf_size), args.extra)
    seed = args.seed if args.seed is not None else _default_seed()
    try:
        return run_node(args.role, params, listen=args.listen, forward=args.forward,
                        input_path=args.input, output_path=args.output, loss=args.loss, seed=seed,
                        pace=args.pace, idle_timeout=args.idle_timeout)
    except ValueError as exc:
        parser.error(str(exc))


COMMANDS = {"analytic": cmd_analytic, "sweep": cmd_sweep, "code": cmd_code, "node": cmd_node}


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    args = parser.parse_args(argv)
    if args.config:
        try:
            args = _apply_config(parser, argv, args)
        except OSError as exc:
            parser.error(f"cannot read config: {exc}")
        except ValueError as exc:
            parser.error(str(exc))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(levelname)s: %(message)s")
    try:
        return COMMANDS[args.command](args, parser)
    except (CodecError, framing.FramingError, ValueError) as exc:
        print(f"ncaas {args.command}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"ncaas {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
