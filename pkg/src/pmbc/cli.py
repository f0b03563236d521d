"""Command-line entry point: ``pmbc {verify,bench,converge,energy,demo}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import Config, load_config
from .energy import LayerSpec
from .errors import ConfigError, PmbcError
from .harness import cmd_bench, cmd_converge, cmd_demo, cmd_energy, cmd_verify
from .report import dumps

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

log = logging.getLogger("pmbc")


def _lengths(text):
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid length list {text!r}") from None
    if not values or min(values) < 1:
        raise argparse.ArgumentTypeError("lengths must be positive integers")
    return values


def _layer(text):
    try:
        ops, rate = text.split(":")
        return LayerSpec(float(ops), float(rate))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected DENSE_OPS:RATE, got {text!r}") from None


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, help="JSON config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--out", type=Path, help="write the report here instead of stdout")
    p.add_argument("--length", type=_lengths, help="comma-separated sequence lengths")
    p.add_argument("--iters", type=int, help="PMBC iteration budget")
    p.add_argument("--fire-mode", choices=("allone", "allzero", "meanrate", "midpoint"))
    p.add_argument("--tau", type=float)
    p.add_argument("--tau-r", type=float)
    p.add_argument("--v-th", type=float)
    p.add_argument("--u-th", type=float)
    p.add_argument("--reset-mode", choices=("soft", "refractory", "none", "hard"))
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pmbc", description="Parallel LIF spike resolution: verification and benchmarks."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    common = _common()
    sub.add_parser("verify", parents=[common], help="run oracle-equivalence and invariant suites")
    sub.add_parser("bench", parents=[common], help="PMBC vs serial speed table")
    sub.add_parser("converge", parents=[common], help="explicit fraction per iteration budget")
    energy = sub.add_parser("energy", parents=[common], help="MAC/AC energy estimate")
    energy.add_argument("--layer", type=_layer, action="append",
                        help="DENSE_OPS:SPIKING_RATE, repeatable; defaults to a demo run")
    energy.add_argument("--e-mac", type=float)
    energy.add_argument("--e-ac", type=float)
    demo = sub.add_parser("demo", parents=[common], help="multi-block forward with per-layer rates")
    demo.add_argument("--zero-input", action="store_true")
    demo.add_argument("--export-trace", action="store_true",
                      help="include per-iteration bound traces for one neuron")
    return parser


def apply_overrides(cfg: Config, args) -> Config:
    if args.seed is not None:
        cfg.seed = args.seed
    if args.length:
        cfg.bench.lengths = list(args.length)
        cfg.ssm.length = args.length[0]
    if args.iters is not None:
        cfg.bench.iters = args.iters
    if args.fire_mode:
        cfg.bench.fire_mode = args.fire_mode
    for flag, name in (("tau", "tau"), ("tau_r", "tau_r"), ("v_th", "v_th"), ("u_th", "u_th"),
                       ("reset_mode", "reset_mode")):
        value = getattr(args, flag)
        if value is not None:
            setattr(cfg.neuron, name, value)
    if getattr(args, "e_mac", None) is not None:
        cfg.energy.e_mac = args.e_mac
    if getattr(args, "e_ac", None) is not None:
        cfg.energy.e_ac = args.e_ac
    return cfg.validate()


def run(args) -> tuple[int, dict]:
    cfg = load_config(args.config) if args.config else Config()
    cfg = apply_overrides(cfg, args)
    if args.command == "verify":
        return cmd_verify(cfg)
    if args.command == "bench":
        return cmd_bench(cfg)
    if args.command == "converge":
        return cmd_converge(cfg)
    if args.command == "demo":
        return cmd_demo(cfg, zero_input=args.zero_input, export_trace=args.export_trace)
    layers = args.layer or cfg.energy.layer_specs()
    if not layers:
        _, demo = cmd_demo(cfg)
        length, channels = cfg.ssm.length, cfg.ssm.channels
        layers = [LayerSpec(length * channels * 2 * channels, row["spiking_rate"])
                  for row in demo["rows"]]
    return cmd_energy(layers, cfg.energy.model())


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        code, report = run(args)
    except ConfigError as exc:
        print(f"pmbc: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PmbcError as exc:
        print(f"pmbc: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = dumps(report, args.format)
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    if code != EXIT_OK and report.get("command") == "verify":
        for suite in report["suites"]:
            for failure in suite["failures"][:5]:
                print(f"pmbc: {suite['name']} failed: {failure}", file=sys.stderr)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
