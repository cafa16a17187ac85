"""Command line: generate | train | discover | eval | bench.

Every command accepts ``--config FILE`` plus flat overrides such as
``--model.tau=100`` or ``--train.max_epochs=50``.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path

from .config import PROFILES, ConfigError, RunConfig
from .datasets import STRUCTURES, DataError, load_csv, load_ground_truth, save_bundle
from .detector import discover
from .evaluation import prf1, report_json, report_table
from .graph import CausalGraph
from .model import load_checkpoint, save_checkpoint
from .pipeline import bench, load_data, windows_for
from .trainer import DivergenceError, InputTooShortError, train

log = logging.getLogger("tempcausal")


class UsageError(Exception):
    pass


def _overrides(extra: list[str]) -> list[str]:
    bad = [x for x in extra if not (x.startswith("--") and "=" in x)]
    if bad:
        raise UsageError(f"unrecognized arguments: {' '.join(bad)}")
    return extra


def _config(args, extra: list[str], preset: list[str] = ()) -> RunConfig:
    return RunConfig.load(args.config, list(preset) + _overrides(extra)).validate()


def _outdir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _read_graph(path, n: int | None = None) -> CausalGraph:
    path = Path(path)
    if path.suffix == ".json":
        return CausalGraph.load_json(path)
    return load_ground_truth(path, n)


# -- commands ----------------------------------------------------------------

def cmd_generate(args, extra) -> int:
    preset = [f"--data.{k}={v}" for k, v in (("structure", args.structure), ("length", args.length),
                                              ("noise", args.noise)) if v is not None]
    if args.structure is not None and args.structure not in STRUCTURES:
        raise ConfigError([f"unknown structure {args.structure!r}; valid options: {', '.join(STRUCTURES)}"])
    rc = _config(args, extra, preset)
    seed = args.seed if args.seed is not None else rc.seeds[0]
    bundle = load_data(rc.data, seed)
    paths = save_bundle(bundle, _outdir(args.output or rc.output))
    for p in paths.values():
        print(p)
    return 0


def cmd_train(args, extra) -> int:
    preset = [f"--data.csv={args.data}"] if args.data else []
    rc = _config(args, extra, preset)
    seed = args.seed if args.seed is not None else rc.seeds[0]
    bundle = load_data(rc.data, seed)
    cfg = rc.model_config(bundle.series.shape[0])
    tcfg = rc.train_config(seed)
    windows = windows_for(bundle.series, cfg, tcfg)

    def progress(epoch, tr, va):
        if args.verbose and epoch % args.verbose == 0:
            print(f"epoch {epoch:5d}  train {tr:.6f}  val {va:.6f}", file=sys.stderr)

    params, report = train(windows, cfg, tcfg, callback=progress)
    log.info("trained %d epochs in %.1fs (best %d)", report.stop_epoch, report.seconds, report.best_epoch)
    out = _outdir(args.output or rc.output)
    save_checkpoint(out / "checkpoint.json", params, cfg,
                    {"train": {"stride": tcfg.stride, "standardize": tcfg.standardize}, "seed": seed,
                     "detector": asdict(rc.detector_config())})
    doc = report.to_dict()
    doc.pop("seconds")
    (out / "train_report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(out / "checkpoint.json")
    return 0


def cmd_discover(args, extra) -> int:
    params, cfg, meta = load_checkpoint(args.checkpoint)
    preset = [f"--detector.{k}={json.dumps(v)}" for k, v in meta.get("detector", {}).items()]
    preset += [f"--train.{k}={json.dumps(v)}" for k, v in meta.get("train", {}).items()]
    if args.data:
        preset.append(f"--data.csv={args.data}")
    rc = _config(args, extra, preset)
    if rc.data.csv is None:
        raise UsageError("discover needs --data CSV (or data.csv in the config)")
    bundle = load_csv(rc.data.csv)
    if bundle.series.shape[0] != cfg.N:
        raise DataError(f"{rc.data.csv}: {bundle.series.shape[0]} series, checkpoint expects {cfg.N}")
    windows = windows_for(bundle.series, cfg, rc.train_config())
    graph = discover(params, cfg, windows, rc.detector_config(), labels=bundle.labels)
    out = _outdir(args.output or rc.output)
    graph.save_json(out / "graph.json")
    (out / "graph.dot").write_text(graph.to_dot())
    print(out / "graph.json")
    print(out / "graph.dot")
    return 0


def cmd_eval(args, extra) -> int:
    _overrides(extra)
    pred = _read_graph(args.pred)
    truth = _read_graph(args.truth, pred.n)
    res = prf1(pred, truth, self_loops=not args.no_self_loops)
    doc = res.to_dict()
    text = "\n".join(f"{k:<10}{'undefined' if v is None else v}" for k, v in doc.items() if k != "seed") + "\n"
    sys.stdout.write(text)
    if args.json:
        Path(args.json).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_bench(args, extra) -> int:
    rc = _config(args, extra)
    t0 = time.perf_counter()
    rows = bench(rc)
    log.info("bench finished in %.1fs", time.perf_counter() - t0)
    out = _outdir(args.output or rc.output)
    table = report_table(rows)
    (out / "report.json").write_text(report_json(rows, {"config": rc.to_dict()}))
    (out / "report.txt").write_text(table)
    sys.stdout.write(table)
    return 0


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tempcausal", description=__doc__.splitlines()[0],
                                 epilog=f"profiles: {', '.join(PROFILES)}")
    ap.add_argument("--log-level", default="WARNING")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, output=True):
        p.add_argument("-c", "--config", help="JSON run configuration")
        if output:
            p.add_argument("-o", "--output", help="output directory (default: config 'output')")
        return p

    p = common(sub.add_parser("generate", help="write a synthetic dataset bundle"))
    p.add_argument("--structure", help=f"one of {', '.join(STRUCTURES)}")
    p.add_argument("--seed", type=int)
    p.add_argument("--length", type=int)
    p.add_argument("--noise", type=float)
    p.set_defaults(func=cmd_generate)

    p = common(sub.add_parser("train", help="fit a model and write a checkpoint"))
    p.add_argument("--data", help="series CSV (otherwise the config's data section)")
    p.add_argument("--seed", type=int)
    p.add_argument("-v", "--verbose", type=int, default=0, metavar="K", help="print losses every K epochs")
    p.set_defaults(func=cmd_train)

    p = common(sub.add_parser("discover", help="extract a causal graph from a checkpoint"))
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", help="series CSV")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("eval", help="score a predicted graph against ground truth")
    p.add_argument("pred", help="predicted graph (.json, or truth-style .csv)")
    p.add_argument("truth", help="ground truth (.json or .csv)")
    p.add_argument("--no-self-loops", action="store_true", help="ignore self-loop edges")
    p.add_argument("--json", help="also write the result as JSON")
    p.set_defaults(func=cmd_eval)

    p = common(sub.add_parser("bench", help="multi-seed generate/train/discover/eval table"))
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args, extra = ap.parse_known_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, extra)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"error: training diverged at epoch {exc.epoch}: {exc}", file=sys.stderr)
        return 1
    except (DataError, InputTooShortError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
