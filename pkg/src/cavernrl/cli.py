"""Command-line entry point: train / measure-throughput / annotate-offline /
plot subcommands over the library.

Exit codes: 0 success, 1 configuration error (the message names the offending
key or value), 2 runtime failure (backend, I/O, malformed data files).
Unknown flags print usage and exit 1.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .annotate.backends import BackendError
from .annotate.service import ServiceMetrics, annotate_batch
from .annotate.store import AnnotationStore
from .checkpoint import CheckpointError
from .config import ConfigError, load_config
from .metrics import MetricsError
from .orchestrator import make_backend, measure_throughput, run_training
from .plots import plot_groups, summary_table

# (CLI flag, config key) pairs shared by train and measure-throughput.
_OVERRIDE_FLAGS = [
    ("--task", "task", "task name (score, staircase2..6, reward-free)"),
    ("--reward", "reward.mechanism",
     "intrinsic mechanism (none, retrieval, classification, ranking, ellm_bow)"),
    ("--beta", "reward.beta", "intrinsic reward scale (default per mechanism)"),
    ("--eta", "reward.eta", "classifier decision threshold in (0, 1)"),
    ("--z", "reward.z", "episodic normalization exponent"),
    ("--nu", "reward.nu", "ranking z-score threshold"),
    ("--annotator", "annotator", "annotation backend (mock, http, none)"),
    ("--url", "url", "chat-completions endpoint for the http annotator"),
    ("--subsample", "subsample_rate", "annotation keep probability in (0, 1]"),
    ("--seed", "seed", "run seed"),
    ("--steps", "steps", "total environment steps"),
    ("--out", "out_dir", "output directory"),
    ("--goal", "goal", "annotation goal variant (default, combat, gold)"),
    ("--latency", "latency", "injected mock annotation latency, seconds"),
]


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="key=value config file")
    for flag, _key, help_text in _OVERRIDE_FLAGS:
        p.add_argument(flag, help=help_text)
    p.add_argument("--threaded", action="store_true",
                   help="overlapped rollout/learner/annotation threads")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   dest="extra", help="set any config key")


def _overrides(args: argparse.Namespace) -> dict[str, str]:
    out: dict[str, str] = {}
    for flag, key, _help in _OVERRIDE_FLAGS:
        value = getattr(args, flag.lstrip("-").replace("-", "_"))
        if value is not None:
            out[key] = value
    if args.threaded:
        out["threaded"] = "true"
    for item in args.extra:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        out[key.strip()] = value.strip()
    return out


def _cmd_train(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, _overrides(args))
    result = run_training(cfg)
    print(f"run complete: {result.metrics_path}")
    for key in sorted(result.summary):
        print(f"  {key}: {result.summary[key]}")
    return 0


def _cmd_throughput(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, _overrides(args))
    report = measure_throughput(cfg, args.duration)
    for key, value in report.as_dict().items():
        print(f"{key}: {value}")
    return 0


def _cmd_annotate_offline(args: argparse.Namespace) -> int:
    lines = Path(args.captions).read_text().splitlines()
    captions = list(dict.fromkeys(line.strip() for line in lines if line.strip()))
    if not captions:
        raise ConfigError(f"no captions found in {args.captions}")

    class _BackendArgs:
        annotator = args.annotator
        url = args.url or ""
        model_name = args.model_name
        latency = 0.0

    if args.annotator == "http" and not args.url:
        raise ConfigError("annotator 'http' requires --url")
    backend = make_backend(_BackendArgs)
    store = AnnotationStore()
    metrics = ServiceMetrics()
    for start in range(0, len(captions), args.batch_size):
        chunk = captions[start:start + args.batch_size]
        for caption, label in annotate_batch(chunk, backend, "binary",
                                             args.goal, metrics):
            store.insert(caption, label)
    store.save(args.out)
    print(f"annotated {len(store)} captions -> {args.out} "
          f"(requests={metrics.requests_sent}, parse_drops={metrics.parse_drops})")
    return 0


def _cmd_plot(args: argparse.Namespace) -> int:
    groups: dict[str, list[str]] = {}
    for token in args.inputs:
        if "=" in token:
            label, _, paths = token.partition("=")
            groups.setdefault(label, []).extend(paths.split(","))
        else:
            groups.setdefault("runs", []).append(token)
    out = plot_groups(groups, args.field, args.out, title=args.title)
    print(f"wrote {out}")
    print(summary_table(groups, [args.field]), end="")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="cavernrl",
                     description="Caption-annotated RL training harness")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run training", parents=[],
                       description="Run a training job.")
    _add_overrides(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("measure-throughput",
                       description="Paired annotation-off/on throughput runs.")
    _add_overrides(p)
    p.add_argument("--duration", type=float, default=60.0,
                   help="seconds per leg (>= 30)")
    p.set_defaults(func=_cmd_throughput)

    p = sub.add_parser("annotate-offline",
                       description="Annotate a caption dump and write a store "
                                   "file (prompt debugging without training).")
    p.add_argument("captions", help="text file with one caption per line")
    p.add_argument("--out", required=True, help="store file to write")
    p.add_argument("--annotator", default="mock", choices=("mock", "http"))
    p.add_argument("--url", help="chat-completions endpoint")
    p.add_argument("--model-name", default="mock-judge")
    p.add_argument("--goal", default="default",
                   choices=("default", "combat", "gold"))
    p.add_argument("--batch-size", type=int, default=100)
    p.set_defaults(func=_cmd_annotate_offline)

    p = sub.add_parser("plot",
                       description="Learning curves (mean ± stderr across "
                                   "seeds) from metrics CSVs.")
    p.add_argument("inputs", nargs="+",
                   help="metrics CSVs, or LABEL=path,path groups")
    p.add_argument("--field", default="success_rate")
    p.add_argument("--out", default="curves.png")
    p.add_argument("--title")
    p.set_defaults(func=_cmd_plot)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (MetricsError, CheckpointError, BackendError, OSError,
            json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
