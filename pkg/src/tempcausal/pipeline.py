"""generate -> train -> discover -> score, shared by the CLI and the benchmarks."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .config import DataSection, RunConfig
from .datasets import DatasetBundle, generate, load_csv, load_ground_truth
from .detector import DetectorConfig, discover
from .evaluation import BenchRow, multi_seed_report
from .graph import CausalGraph
from .model import ModelConfig
from .trainer import TrainConfig, TrainReport, make_windows, standardize, train

log = logging.getLogger(__name__)


def load_data(data: DataSection, seed: int | None = None) -> DatasetBundle:
    if data.csv is not None:
        bundle = load_csv(data.csv)
        if data.truth is not None:
            bundle.truth = load_ground_truth(data.truth, bundle.series.shape[0])
        return bundle
    return generate(data.spec(seed))


def windows_for(series: np.ndarray, cfg: ModelConfig, tcfg: TrainConfig) -> np.ndarray:
    s = standardize(series) if tcfg.standardize else np.asarray(series, dtype=np.float64)
    return make_windows(s, cfg.T, tcfg.stride)


@dataclass
class RunResult:
    graph: CausalGraph
    truth: CausalGraph | None
    params: dict[str, np.ndarray]
    model: ModelConfig
    report: TrainReport
    timings: dict[str, float] = field(default_factory=dict)


def run_once(rc: RunConfig, seed: int, data: DataSection | None = None) -> RunResult:
    """Full pipeline for one seed; the seed drives both the generator and training."""
    data = data or rc.data
    timings = {}
    t0 = time.perf_counter()
    bundle = load_data(data, seed)
    timings["generate"] = time.perf_counter() - t0

    cfg = rc.model_config(bundle.series.shape[0], data)
    tcfg = rc.train_config(seed)
    dcfg: DetectorConfig = rc.detector_config(data)
    windows = windows_for(bundle.series, cfg, tcfg)

    t0 = time.perf_counter()
    params, report = train(windows, cfg, tcfg)
    timings["train"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    graph = discover(params, cfg, windows, dcfg, labels=bundle.labels)
    timings["discover"] = time.perf_counter() - t0
    log.info("%s seed %d: train %.1fs (%d epochs), discover %.1fs", data.label(), seed,
             timings["train"], report.stop_epoch, timings["discover"])
    return RunResult(graph, bundle.truth, params, cfg, report, timings)


def bench(rc: RunConfig) -> list[BenchRow]:
    """Multi-seed table over ``rc.datasets`` (or the single ``rc.data``)."""
    jobs = [(d.label(), d) for d in (rc.datasets or [rc.data])]

    def run(data, seed):
        res = run_once(rc, seed, data)
        if res.truth is None:
            raise ValueError(f"{data.label()}: no ground truth to score against")
        return res.graph, res.truth

    return multi_seed_report(jobs, rc.seeds, run)
