"""``fieldvision`` command line: render, train-ball, detect, localize, calibrate, evaluate.

Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..detectors.ball import ClassifierFormatError, TrainingFailure
from . import commands
from .config import ConfigError, load_config
from .dataset import DatasetError

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="JSON run configuration (default: packaged config)")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--out", metavar="DIR", help="output directory")


def _report_arg(text: str) -> tuple[str, str]:
    name, sep, path = text.partition("=")
    if not sep or not name or not path:
        raise argparse.ArgumentTypeError("expected NAME=PATH")
    return name, path


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fieldvision", description="Synthetic soccer-vision benchmark harness")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render", help="render a scenario into a dataset directory")
    _common(p)
    p.add_argument("--scenario", required=True)
    p.add_argument("--count", type=int, help="render only the first N frames")

    p = sub.add_parser("train-ball", help="train the ball cascade from rendered datasets")
    _common(p)
    p.add_argument("--dataset", action="append", required=True, metavar="DIR")

    p = sub.add_parser("detect", help="run the detectors over a dataset and score them")
    _common(p)
    p.add_argument("--dataset", required=True, metavar="DIR")
    p.add_argument("--classifier", metavar="FILE", help="NBLC ball classifier (histograms read from FILE.hist.json)")

    p = sub.add_parser("localize", help="run the localizer over a trajectory dataset")
    _common(p)
    p.add_argument("--dataset", required=True, metavar="DIR")

    p = sub.add_parser("calibrate", help="fit the camera correction from a calibration dataset")
    _common(p)
    p.add_argument("--dataset", required=True, metavar="DIR")

    p = sub.add_parser("evaluate", help="check metric reports against the configured thresholds")
    _common(p)
    p.add_argument("--report", action="append", type=_report_arg, required=True, metavar="NAME=PATH")
    return ap


def _dispatch(args, cfg) -> commands.Result:
    out = args.out or str(Path(cfg.output_dir) / (args.scenario if args.command == "render" else args.command))
    if args.command == "render":
        return commands.cmd_render(cfg, args.scenario, out, args.count)
    if args.command == "train-ball":
        return commands.cmd_train_ball(cfg, args.dataset, out)
    if args.command == "detect":
        return commands.cmd_detect(cfg, args.dataset, out, args.classifier)
    if args.command == "localize":
        return commands.cmd_localize(cfg, args.dataset, out)
    if args.command == "calibrate":
        return commands.cmd_calibrate(cfg, args.dataset, out)
    return commands.cmd_evaluate(cfg, dict(args.report), out)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)  # argparse exits with 2 on usage errors
    try:
        cfg = load_config(args.config).with_seed(args.seed)
        result = _dispatch(args, cfg)
    except (ConfigError, DatasetError) as e:
        print(f"fieldvision: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingFailure, ClassifierFormatError, OSError, ValueError, RuntimeError) as e:
        print(f"fieldvision: {args.command} failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    for line in result.lines:
        print(line)
    return EXIT_OK if result.ok else EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
