"""Ground-truthed series generators and CSV ingestion."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .graph import CausalGraph

BASIC_STRUCTURES = ("diamond", "mediator", "v-structure", "fork")
STRUCTURES = BASIC_STRUCTURES + ("lorenz96",)

# (src, dst, coefficient, lag), 1-based series numbers.
DEFAULT_EDGES = {
    "diamond": [(1, 2, 0.8, 1), (1, 3, 0.8, 2), (2, 4, 0.8, 1), (3, 4, 0.8, 3)],
    "mediator": [(1, 2, 0.8, 1), (2, 3, 0.8, 1), (1, 3, 0.8, 2)],
    "v-structure": [(1, 3, 0.8, 1), (2, 3, 0.8, 2)],
    "fork": [(1, 2, 0.8, 1), (1, 3, 0.8, 2)],
}
SERIES_COUNT = {"diamond": 4, "mediator": 3, "v-structure": 3, "fork": 3}


class DataError(ValueError):
    """Malformed input file or generator settings."""


class IntegrationError(RuntimeError):
    pass


@dataclass
class GeneratorSpec:
    structure: str = "fork"
    length: int = 1000
    seed: int = 0
    noise: float = 1.0
    edges: list[tuple[int, int, float, int]] | None = None
    burn_in: int = 100
    # lorenz96 only
    n_vars: int = 10
    forcing: float = 30.0
    dt: float = 0.01
    sample_every: int = 5
    lorenz_burn_in: int = 1000
    obs_noise: float = 0.0

    def problems(self) -> list[str]:
        out = []
        if self.structure not in STRUCTURES:
            out.append(f"unknown structure {self.structure!r}; valid options: {', '.join(STRUCTURES)}")
        if self.length < 2:
            out.append("dataset.length must be >= 2")
        if self.noise < 0:
            out.append("dataset.noise must be >= 0")
        if not math.isfinite(self.forcing):
            out.append("dataset.forcing must be finite")
        if not self.dt > 0:
            out.append("dataset.dt must be positive")
        if self.sample_every < 1:
            out.append("dataset.sample_every must be >= 1")
        for e in self.edges or []:
            if len(e) != 4 or e[3] < 0:
                out.append(f"bad edge entry {e!r}: expected (src, dst, coef, lag>=0)")
        return out

    def edge_table(self) -> list[tuple[int, int, float, int]]:
        if self.edges is not None:
            return [(int(s), int(d), float(c), int(l)) for s, d, c, l in self.edges]
        return list(DEFAULT_EDGES[self.structure])


@dataclass
class DatasetBundle:
    series: np.ndarray                   # [N, L]
    truth: CausalGraph | None = None
    labels: list[str] | None = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.truth is not None and self.truth.n != self.series.shape[0]:
            raise DataError(f"ground truth has {self.truth.n} vertices but data has {self.series.shape[0]} series")


def _topological(n: int, instantaneous: list[tuple[int, int]]) -> list[int]:
    order, indeg = [], [0] * n
    for _, d in instantaneous:
        indeg[d] += 1
    ready = [v for v in range(n) if indeg[v] == 0]
    while ready:
        v = ready.pop(0)
        order.append(v)
        for s, d in instantaneous:
            if s == v:
                indeg[d] -= 1
                if indeg[d] == 0:
                    ready.append(d)
    if len(order) != n:
        raise DataError("lag-0 edges form a cycle")
    return order


def gen_basic(spec: GeneratorSpec) -> DatasetBundle:
    """Linear lagged system ``x_j(t) = sum_i c_ij x_i(t - lag_ij) + noise * e_j(t)``.

    Series without parents are driven by unit-variance innovations whatever
    ``spec.noise`` is, so a zero-noise spec still produces a non-trivial
    root signal that the children copy exactly.
    """
    if spec.structure not in BASIC_STRUCTURES:
        raise DataError(f"unknown structure {spec.structure!r}; valid options: {', '.join(BASIC_STRUCTURES)}")
    errs = spec.problems()
    if errs:
        raise DataError("; ".join(errs))
    n = SERIES_COUNT[spec.structure]
    table = spec.edge_table()
    for s, d, _, _ in table:
        if not (1 <= s <= n and 1 <= d <= n):
            raise DataError(f"edge {s}->{d} out of range for {spec.structure} with {n} series")
    rng = np.random.default_rng(spec.seed)
    total = spec.length + spec.burn_in
    eps = rng.standard_normal((n, total))
    parents = {v: [] for v in range(n)}
    for s, d, c, lag in table:
        parents[d - 1].append((s - 1, c, lag))
    roots = [v for v in range(n) if not parents[v]]
    order = _topological(n, [(s - 1, d - 1) for s, d, _, lag in table if lag == 0])

    x = np.zeros((n, total))
    for t in range(total):
        for v in order:
            if v in roots:
                x[v, t] = eps[v, t]
                continue
            acc = spec.noise * eps[v, t]
            for src, c, lag in parents[v]:
                if t - lag >= 0:
                    acc += c * x[src, t - lag]
            x[v, t] = acc
    series = x[:, spec.burn_in:]

    truth = CausalGraph(n)
    for s, d, c, lag in table:
        if c != 0.0:
            truth.add_edge(s - 1, d - 1, lag)
    prov = {"generator": "basic", "spec": asdict(spec), "edge_table": [list(e) for e in table], "roots": [r + 1 for r in roots]}
    return DatasetBundle(series, truth, [f"x{i + 1}" for i in range(n)], prov)


def lorenz_deriv(x: np.ndarray, F: float) -> np.ndarray:
    """Cyclic Lorenz-96 tendency ``(x[i+1] - x[i-2]) * x[i-1] - x[i] + F``."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] < 4:
        raise ValueError("Lorenz-96 needs at least 4 variables")
    return (np.roll(x, -1, -1) - np.roll(x, 2, -1)) * np.roll(x, 1, -1) - x + F


def rk4_step(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(x)
    k2 = f(x + 0.5 * dt * k1)
    k3 = f(x + 0.5 * dt * k2)
    k4 = f(x + dt * k3)
    return x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate(f, x0: np.ndarray, dt: float, steps: int, sample_every: int = 1) -> np.ndarray:
    """RK4 integration; returns states after every ``sample_every`` steps, shape [steps // sample_every, dim]."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    x = np.asarray(x0, dtype=np.float64).copy()
    out = []
    for step in range(1, steps + 1):
        x = rk4_step(f, x, dt)
        if not np.all(np.isfinite(x)):
            raise IntegrationError(f"state became non-finite at step {step}")
        if step % sample_every == 0:
            out.append(x.copy())
    return np.array(out).reshape(-1, x.size)


def lorenz_truth(n: int) -> CausalGraph:
    """Variable i is driven by i-2, i-1, i+1 (cyclic) and by itself; all lags 1."""
    g = CausalGraph(n)
    for i in range(n):
        for src in sorted({(i - 2) % n, (i - 1) % n, (i + 1) % n, i}):
            g.add_edge(src, i, 1)
    return g


def gen_lorenz96(spec: GeneratorSpec) -> DatasetBundle:
    errs = spec.problems()
    if errs:
        raise DataError("; ".join(errs))
    n = spec.n_vars
    rng = np.random.default_rng(spec.seed)
    x0 = spec.forcing + rng.normal(0.0, 0.01, size=n)
    f = lambda x: lorenz_deriv(x, spec.forcing)  # noqa: E731
    warm = integrate(f, x0, spec.dt, spec.lorenz_burn_in, spec.lorenz_burn_in)[-1] if spec.lorenz_burn_in else x0
    traj = integrate(f, warm, spec.dt, spec.length * spec.sample_every, spec.sample_every)
    if spec.obs_noise > 0:
        traj = traj + rng.normal(0.0, spec.obs_noise, size=traj.shape)
    prov = {"generator": "lorenz96", "spec": asdict(spec),
            "sample_interval": spec.dt * spec.sample_every}
    return DatasetBundle(traj.T.copy(), lorenz_truth(n), [f"x{i + 1}" for i in range(n)], prov)


def generate(spec: GeneratorSpec) -> DatasetBundle:
    if spec.structure == "lorenz96":
        return gen_lorenz96(spec)
    return gen_basic(spec)


# -- files -------------------------------------------------------------------

def _read_rows(path) -> list[list[str]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"{path}: no such file")
    with path.open(newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    return rows


def _is_number(s: str) -> bool:
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_csv(path) -> DatasetBundle:
    """Columns are series, rows are time slots. A non-numeric first row is a header."""
    rows = _read_rows(path)
    if not rows:
        raise DataError(f"{path}: empty file")
    labels = None
    if not all(_is_number(c) for c in rows[0]):
        labels = [c.strip() for c in rows[0]]
        rows = rows[1:]
        first_line = 2
    else:
        first_line = 1
    if not rows:
        raise DataError(f"{path}: no data rows")
    width = len(labels) if labels else len(rows[0])
    data = np.empty((len(rows), width))
    for r, row in enumerate(rows):
        line = r + first_line
        if len(row) != width:
            raise DataError(f"{path}: row {line} has {len(row)} cells, expected {width}")
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataError(f"{path}: non-numeric cell {cell!r} at row {line}, column {c + 1}") from None
            if not math.isfinite(v):
                raise DataError(f"{path}: missing or non-finite value at row {line}, column {c + 1}")
            data[r, c] = v
    return DatasetBundle(data.T.copy(), None, labels, {"source": str(path)})


def load_ground_truth(path, n: int | None = None) -> CausalGraph:
    """Rows ``src,dst[,delay]`` (1-based); an optional header row is skipped.

    Without ``n`` the vertex count is the largest index mentioned.
    """
    rows = _read_rows(path)
    if rows and not _is_number(rows[0][0]):
        rows = rows[1:]
    parsed = []
    for k, row in enumerate(rows, 1):
        if len(row) < 2 or len(row) > 3:
            raise DataError(f"{path}: edge row {k} must be src,dst[,delay]")
        try:
            src, dst = int(row[0]), int(row[1])
            delay = int(row[2]) if len(row) == 3 and row[2].strip() not in ("", "?") else None
        except ValueError:
            raise DataError(f"{path}: non-integer entry in edge row {k}") from None
        parsed.append((src, dst, delay))
    count = n if n is not None else max([max(s, d) for s, d, _ in parsed], default=0)
    g = CausalGraph(count)
    for src, dst, delay in parsed:
        if not (1 <= src <= count and 1 <= dst <= count):
            raise DataError(f"{path}: edge {src}->{dst} out of range 1..{count}")
        if (src - 1, dst - 1) in g:
            raise DataError(f"{path}: duplicate edge {src}->{dst}")
        g.add_edge(src - 1, dst - 1, delay)
    return g


def _fmt(v: float) -> str:
    return repr(float(v))


def write_series_csv(path, series: np.ndarray, labels: list[str] | None = None) -> None:
    labels = labels or [f"x{i + 1}" for i in range(series.shape[0])]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(labels)
        for row in series.T:
            w.writerow([_fmt(v) for v in row])


def write_truth_csv(path, graph: CausalGraph) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["src", "dst", "delay"])
        for e in graph.sorted_edges():
            w.writerow([e.src + 1, e.dst + 1, "" if e.delay is None else e.delay])


def save_bundle(bundle: DatasetBundle, outdir, stem: str = "data") -> dict[str, Path]:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {"data": out / f"{stem}.csv", "provenance": out / f"{stem}.provenance.json"}
    write_series_csv(paths["data"], bundle.series, bundle.labels)
    if bundle.truth is not None:
        paths["truth"] = out / f"{stem}.truth.csv"
        write_truth_csv(paths["truth"], bundle.truth)
    paths["provenance"].write_text(json.dumps(bundle.provenance, indent=2, sort_keys=True) + "\n")
    return paths
