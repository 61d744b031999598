"""Command-line entry point: ``pawclock run|verify|presets|sweep``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import yaml

from . import __version__
from .config import ExperimentConfig, load_config
from .errors import ConfigError, PawClockError
from .presets import emit, preset, preset_names
from .runner import dumps_json, output_dir, run, verify

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("pawclock")


def _load(source: str) -> ExperimentConfig:
    """A config file path, or ``preset:<name>``."""
    if source.startswith("preset:"):
        return preset(source.split(":", 1)[1])
    return load_config(source)


def _summary(report) -> None:
    for t in report.tasks:
        failed = [c.invariant for c in t.checks if not c.passed]
        extra = f" ({t.error})" if t.error else (f" failed: {', '.join(failed)}" if failed else "")
        print(f"{t.status:>7}  {t.id}{extra}")
    print(f"exit code {report.exit_code}  ({report.wall_clock:.2f} s)")


def _parse_values(text: str) -> list:
    values = yaml.safe_load(text if text.strip().startswith("[") else f"[{text}]")
    if not isinstance(values, list) or not values:
        raise ValueError("--values needs a comma-separated list")
    return values


def cmd_run(args) -> int:
    cfg = _load(args.config)
    for w in cfg.warnings:
        log.warning(w)
    report = run(cfg, args.out, args.tol_scale, args.seed)
    _summary(report)
    return report.exit_code


def cmd_verify(args) -> int:
    cfg = _load(args.config)
    for w in cfg.warnings:
        log.warning(w)
    report = verify(cfg, args.out, args.tol_scale, args.seed)
    _summary(report)
    return report.exit_code


def cmd_presets(args) -> int:
    if args.emit:
        sys.stdout.write(emit(args.emit))
    else:
        print("\n".join(preset_names()))
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args.config)
    base = output_dir(cfg, args.out)
    points = []
    code = EXIT_OK
    for value in _parse_values(args.values):
        sub = cfg.with_value(args.param, value)
        report = run(sub, base / f"{args.param}={value}", args.tol_scale, args.seed)
        print(f"{args.param}={value}")
        _summary(report)
        points.append({"value": value, "exit_code": report.exit_code,
                       "tasks": {t.id: t.status for t in report.tasks}})
        code = max(code, report.exit_code)
    text = dumps_json({"meta": {"tool": "pawclock", "version": __version__,
                                "config_sha256": cfg.digest(), "param": args.param},
                       "points": points})
    base.mkdir(parents=True, exist_ok=True)
    (base / "sweep.json").write_text(text, encoding="utf-8")
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pawclock", description=__doc__)
    p.add_argument("--version", action="version", version=f"pawclock {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("config", help="YAML config path or preset:<name>")
        sp.add_argument("--out", type=Path, default=None,
                        help="output directory (else $PAWCLOCK_OUT, else outputs.dir)")
        sp.add_argument("--tol-scale", type=float, default=1.0,
                        help="multiply every verification tolerance")
        sp.add_argument("--seed", type=int, default=None,
                        help="seed for random universes in verify")

    sp = sub.add_parser("run", help="execute all configured tasks")
    common(sp)
    sp.set_defaults(func=cmd_run)
    sp = sub.add_parser("verify", help="run the invariant suite")
    common(sp)
    sp.set_defaults(func=cmd_verify)
    sp = sub.add_parser("presets", help="list presets or print one as YAML")
    sp.add_argument("--emit", metavar="NAME", choices=preset_names())
    sp.set_defaults(func=cmd_presets)
    sp = sub.add_parser("sweep", help="run once per value of a config key")
    common(sp)
    sp.add_argument("--param", required=True, help="dotted key path, e.g. couplings.A.B")
    sp.add_argument("--values", required=True, help="comma-separated values")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, KeyError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (PawClockError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

if __name__ == "__main__":
    sys.exit(main())
