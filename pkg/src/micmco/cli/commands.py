"""
Command Line
micmco train | eval | sweep | pareto | audit | serve
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from ..engine.stochastics import RngStream, StreamPurpose
from ..errors import MicmcoError
from ..modeling.checkpoint import read_checkpoint
from ..objectives.evaluation import DEFAULT_EVAL_K, evaluate_model
from ..oracle.audit import CHECK_REGISTRY, format_audit_table, run_audit
from ..settings import settings
from ..training.dataset import Dataset
from .config_file import load_run_config
from .pareto import pareto_file
from .runner import CHECKPOINT_NAME, METRICS_NAME, execute_run
from .sweep import SWEEP_NAME, load_grid, run_sweep

DEFAULT_EVAL_EXAMPLES = 512


def configure_logging(level: str) -> None:
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format="[%(levelname)s] %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


# ============== Commands ==============

def cmd_train(args: argparse.Namespace) -> int:
    config = load_run_config(args.config, {"seed": args.seed, "out_dir": args.out_dir})
    run = execute_run(config, config.out_dir)
    final = run.final_row
    out = Path(config.out_dir)
    print(f"[OK] {config.steps} steps -> {out / METRICS_NAME}, {out / CHECKPOINT_NAME}")
    if final is not None:
        print(f"step={final.step} nll={final.nll:.6f} avg_kl={final.avg_kl:.6f}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = load_run_config(args.config) if args.config else None
    expected = config.latent_spec() if config is not None else None
    params = read_checkpoint(args.checkpoint, expected)
    data_file = config.data_file if config is not None else ""
    dataset = Dataset.for_path(data_file, params.vocab_size)
    xs = dataset.sample(args.examples, RngStream.for_purpose(args.seed, StreamPurpose.EVAL, 0))
    result = evaluate_model(params, xs, args.eval_k, RngStream.for_purpose(args.seed, StreamPurpose.EVAL, 1))
    print(
        f"nll={result.nll:.6f} avg_kl={result.avg_kl:.6f} rep_kl={result.rep_kl:.6f} "
        f"eval_k={result.K} examples={result.n_examples} seed={args.seed}"
    )
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    base = load_run_config(args.config, {"out_dir": args.out_dir})
    grid = load_grid(args.grid)
    frame = run_sweep(base, grid, base.out_dir, args.jobs)
    ok = int((frame["status"] == "ok").sum())
    print(f"[OK] {ok}/{len(frame)} run(s) finished -> {Path(base.out_dir) / SWEEP_NAME}")
    return 0 if ok > 0 else 1


def cmd_pareto(args: argparse.Namespace) -> int:
    frontier = pareto_file(args.input, args.output, args.with_rate)
    print(f"[OK] {len(frontier)} frontier point(s) -> {args.output}")
    return 0


def cmd_audit(args: argparse.Namespace) -> int:
    results = run_audit(args.seed, args.check or None)
    print(format_audit_table(results))
    failed = [r for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("micmco.main:app", host=args.host, port=args.port, log_level=args.log_level.lower())
    return 0


# ============== Parser ==============

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="micmco",
        description="Mutual-information augmented Monte-Carlo objectives",
    )
    parser.add_argument("--log-level", default=settings.log_level, help="DEBUG, INFO, WARNING or ERROR")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train one configuration")
    p.add_argument("--config", required=True, help="key=value config file")
    p.add_argument("--seed", type=int, default=None, help="override the config's seed")
    p.add_argument("--out-dir", default=None, help="override the config's out_dir")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="estimate nll and average KL of a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config", default=None, help="config the checkpoint must match; also names the data file")
    p.add_argument("--eval-k", type=int, default=DEFAULT_EVAL_K)
    p.add_argument("--examples", type=int, default=DEFAULT_EVAL_EXAMPLES)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="train a grid of configurations")
    p.add_argument("--config", required=True, help="base config file")
    p.add_argument("--grid", required=True, help="grid file: key=v1,v2,... over lambda, alpha, lr, seed")
    p.add_argument("--jobs", type=int, default=settings.jobs)
    p.add_argument("--out-dir", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("pareto", help="extract the (avg_kl, nll) Pareto frontier")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--with-rate", action="store_true", help="append distortion = nll - avg_kl")
    p.set_defaults(func=cmd_pareto)

    p = sub.add_parser("audit", help="run the estimator property checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--check", action="append", choices=sorted(CHECK_REGISTRY), help="run only this check (repeatable)")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("serve", help="serve the HTTP API")
    p.add_argument("--host", default=settings.host)
    p.add_argument("--port", type=int, default=settings.port)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)
    try:
        return args.func(args)
    except MicmcoError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
