"""Relevance propagation through a trained model and edge/lag extraction.

For a target series ``i`` the one-hot relevance over series is pushed back
from the prediction through the output layer, the FFN and the head
combination, then split over the attention matrix and the causal
convolution kernels. The relevance is multiplied by the absolute gradient,
rectified and head-averaged to give causal scores. Sources come from
1-D k-means on the attention scores; lags come from the kernel score argmax.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np

from .graph import CausalGraph
from .model import ForwardTrace, ModelConfig, backward, effective_weights, forward
from .numerics import leaky_relu_grad

STABILIZER = 1e-9


@dataclass
class DetectorConfig:
    n: int = 2                  # k-means classes
    m: int = 1                  # top classes kept
    theta: float = 1e-3         # windows with target mean |x| below this are skipped
    samples: int | None = None  # windows averaged per target; None uses every window
    chunk: int = 128            # windows per forward/propagate pass (memory bound only)
    kmeans_seed: int = 0
    kmeans_max_iter: int = 100
    kmeans_restarts: int = 10

    def problems(self) -> list[str]:
        out = []
        if not 1 <= self.m <= self.n:
            out.append(f"detector requires 1 <= m <= n (got m={self.m}, n={self.n})")
        if not self.theta > 0:
            out.append("detector.theta must be positive")
        if self.samples is not None and self.samples < 1:
            out.append("detector.samples must be >= 1 (or null for all windows)")
        if self.chunk < 1:
            out.append("detector.chunk must be >= 1")
        if self.kmeans_max_iter < 1 or self.kmeans_restarts < 1:
            out.append("detector k-means iterations and restarts must be >= 1")
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorConfig":
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ValueError(f"unknown detector config keys: {sorted(unknown)}")
        return cls(**d)


class StabilizerLog:
    """Counts denominators that had to be pushed away from zero."""

    def __init__(self):
        self.events = 0


def stabilize(den: np.ndarray, active: np.ndarray | None = None, log: StabilizerLog | None = None,
              eps: float = STABILIZER) -> np.ndarray:
    """Add ``eps * sign(den)`` where ``|den| < eps`` (sign(0) taken as +1)."""
    small = np.abs(den) < eps
    if not small.any():
        return den
    if log is not None:
        hits = small if active is None else small & (active != 0)
        log.events += int(hits.sum())
    sign = np.where(den >= 0, 1.0, -1.0)
    return np.where(small, den + eps * sign, den)


# -- propagation rules -------------------------------------------------------

def init_relevance(target: int, N: int) -> np.ndarray:
    """One-hot relevance over series (0-based ``target``)."""
    if not 0 <= target < N:
        raise IndexError(f"target {target} out of range for {N} series")
    r = np.zeros(N)
    r[target] = 1.0
    return r


def rrp_layer(x: np.ndarray, jac: np.ndarray, out: np.ndarray, R_upper: np.ndarray,
              bias: np.ndarray | None = None, log: StabilizerLog | None = None):
    """Relevance through one layer ``out = f(x)``.

    ``jac[..., i, j]`` is d out_j / d x_i. Returns ``(R_lower, R_bias)`` with
    ``R_lower_i = sum_j x_i * jac_ij * R_j / out_j`` and
    ``R_bias = sum_j b_j * R_j / out_j`` (zero when ``bias`` is None).
    """
    frac = R_upper / stabilize(out, R_upper, log)
    R_lower = x * (jac @ frac[..., None])[..., 0]
    R_bias = (frac * bias).sum(axis=-1) if bias is not None else np.zeros(frac.shape[:-1])
    return R_lower, R_bias


def rrp_affine(x, W, b, R_upper, log: StabilizerLog | None = None):
    """:func:`rrp_layer` specialised to ``x @ W + b`` without forming the Jacobian per sample."""
    out = x @ W + (b if b is not None else 0.0)
    frac = R_upper / stabilize(out, R_upper, log)
    R_lower = x * (frac @ W.T)
    R_bias = (frac * b).sum(axis=-1) if b is not None else np.zeros(frac.shape[:-1])
    return R_lower, R_bias


def rrp_pointwise(x, y, dydx, R_upper, log: StabilizerLog | None = None):
    """Elementwise activation ``y = g(x)``: ``R_lower = x * g'(x) * R / y``."""
    return x * dydx * R_upper / stabilize(y, R_upper, log)


def rrp_matmul(A: np.ndarray, B: np.ndarray, R_prod: np.ndarray, log: StabilizerLog | None = None):
    """Split relevance of ``A @ B`` over both operands (leading dims broadcast)."""
    frac = R_prod / stabilize(A @ B, R_prod, log)
    R_A = A * (frac @ np.swapaxes(B, -1, -2))
    R_B = B * (np.swapaxes(A, -1, -2) @ frac)
    return R_A, R_B


@dataclass
class RelevanceMap:
    """Relevance for one target over a batch of windows."""

    target: int
    attn: np.ndarray              # [B, h, T, N, N]; only row ``target`` is populated
    kernel: np.ndarray            # [B, h, N, N, T]; only column ``target`` is populated
    bias: dict[str, np.ndarray]   # layer name -> [B]
    stabilized: int = 0


def propagate(trace: ForwardTrace, params: dict[str, np.ndarray], cfg: ModelConfig, target: int) -> RelevanceMap:
    """Relevance from ``X_pred[target]`` down to attention matrices and kernels."""
    N, T, h = cfg.N, cfg.T, cfg.h
    init_relevance(target, N)
    i = target
    tr, p = trace, params
    B = tr.X.shape[0]
    log = StabilizerLog()

    # The output and FFN layers act row-wise, so only the target row carries relevance.
    W1, W2, Wo = effective_weights(p, cfg)
    R = np.full((B, T), 1.0 / T)
    R, bias_out = rrp_affine(tr.F[:, i], Wo, p["b_out"], R, log)
    R, bias_ffn2 = rrp_affine(tr.Z1[:, i], W2, p["b_ffn2"], R, log)
    R = rrp_pointwise(tr.H1[:, i], tr.Z1[:, i], leaky_relu_grad(tr.H1[:, i], cfg.leaky_slope), R, log)
    R, bias_ffn1 = rrp_affine(tr.Att[:, i], W1, p["b_ffn1"], R, log)

    # Head combination: per slot, Att = sum_k A^(k) W_O[k].
    heads = np.moveaxis(tr.A[:, :, i, :], 1, -1)                    # [B, T, h]
    R_heads, _ = rrp_layer(heads, p["W_O"][:, None], tr.Att[:, i, :, None], R[..., None], log=log)
    R_heads = np.moveaxis(R_heads, -1, 1)                            # [B, h, T]

    # Per slot t: A[i, t] = attn_t[i, :] @ V[:, i, t]
    row = tr.attn[:, :, :, i:i + 1, :]                               # [B, h, T, 1, N]
    col = np.moveaxis(tr.V[:, :, :, i, :], -1, 2)[..., None]         # [B, h, T, N, 1]
    R_row, R_V = rrp_matmul(row, col, R_heads[..., None, None], log)
    R_V = np.moveaxis(R_V[..., 0], 2, -1)                            # [B, h, N, T]
    R_raw = R_V.copy()
    R_raw[:, :, i, :-1] = R_V[:, :, i, 1:]
    R_raw[:, :, i, -1] = 0.0

    # Xhat[j, i, :] = kernel[j, i, :] @ P[j]
    K_op = p["kernel"][:, :, i, :][None, :, :, None, :]               # [1, h, N, 1, T]
    R_K, _ = rrp_matmul(K_op, tr.P[:, None], R_raw[:, :, :, None, :], log)

    attn = np.zeros((B, h, T, N, N))
    attn[:, :, :, i, :] = R_row[:, :, :, 0, :]
    kernel = np.zeros((B, h, N, N, T))
    kernel[:, :, :, i, :] = R_K[:, :, :, 0, :]
    bias = {"out": bias_out, "ffn2": bias_ffn2, "ffn1": bias_ffn1}
    return RelevanceMap(i, attn, kernel, bias, log.events)


def target_gradients(trace: ForwardTrace, params, cfg: ModelConfig, target: int):
    """Per-window d(sum_t X_pred[target, t]) w.r.t. attention matrices and kernels."""
    d_pred = np.zeros_like(trace.X_pred)
    d_pred[:, target, :] = 1.0
    res = backward(trace, params, cfg, d_pred, per_window=True, through_qk=False)
    return res.d_attn, res.d_kernel


@dataclass
class CausalScores:
    attn: np.ndarray      # [..., N, N]
    kernel: np.ndarray    # [..., N, N, T]


def gradient_modulate(R: RelevanceMap, grad_attn: np.ndarray, grad_kernel: np.ndarray) -> CausalScores:
    """Head mean of the rectified ``|grad| * relevance``; keeps the window axis.

    Attention scores are summed over the per-slot matrices, giving ``[B, N, N]``.
    """
    s_attn = np.maximum(np.abs(grad_attn) * R.attn, 0.0).mean(axis=1).sum(axis=1)
    s_kernel = np.maximum(np.abs(grad_kernel) * R.kernel, 0.0).mean(axis=1)
    return CausalScores(s_attn, s_kernel)


def aggregate_scores(scores: list[CausalScores]) -> CausalScores:
    if not scores:
        raise ValueError("no scores to aggregate")
    return CausalScores(np.mean([s.attn for s in scores], axis=0),
                        np.mean([s.kernel for s in scores], axis=0))


# -- selection ---------------------------------------------------------------

def kmeans_1d(values: np.ndarray, k: int, seed: int = 0, restarts: int = 10, max_iter: int = 100):
    """Lloyd's algorithm on scalars. Returns ``(labels, centroids)`` of the lowest-inertia restart.

    The first restart starts from evenly spread quantiles; the others from
    seeded random distinct values.
    """
    x = np.asarray(values, dtype=np.float64)
    distinct = np.unique(x)
    k = min(k, len(distinct))
    rng = np.random.default_rng(seed)
    best = None
    for r in range(restarts):
        if r == 0:
            c = np.quantile(x, (np.arange(k) + 0.5) / k)
        else:
            c = np.sort(rng.choice(distinct, size=k, replace=False))
        for _ in range(max_iter):
            labels = np.abs(x[:, None] - c[None, :]).argmin(axis=1)
            new = np.array([x[labels == j].mean() if np.any(labels == j) else c[j] for j in range(k)])
            if np.array_equal(new, c):
                break
            c = new
        labels = np.abs(x[:, None] - c[None, :]).argmin(axis=1)
        inertia = float(((x - c[labels]) ** 2).sum())
        if best is None or inertia < best[0] - 1e-15:
            best = (inertia, labels, c)
    return best[1], best[2]


@dataclass
class Selection:
    sources: set[int]
    classes: int
    kept: int
    degenerate: bool = False
    reduced: bool = False
    centroids: list[float] = field(default_factory=list)


def select_edges(scores: np.ndarray, n: int, m: int, seed: int = 0, restarts: int = 10,
                 max_iter: int = 100) -> Selection:
    """Cluster scores into ``n`` classes and keep members of the ``m`` highest-centroid classes."""
    x = np.asarray(scores, dtype=np.float64)
    if not 1 <= m <= n:
        raise ValueError(f"need 1 <= m <= n, got m={m}, n={n}")
    spread = float(np.ptp(x)) if x.size else 0.0
    if x.size == 0 or spread <= 1e-12 * max(1.0, float(np.abs(x).max())):
        return Selection(set(range(x.size)), 1, 1, degenerate=True, reduced=n > 1)
    n_used = min(n, len(np.unique(x)))
    m_used = m if n_used == n else max(1, int(np.floor(m * n_used / n + 0.5)))
    labels, cent = kmeans_1d(x, n_used, seed, restarts, max_iter)
    order = np.argsort(-cent, kind="stable")
    top = set(order[:m_used].tolist())
    sources = {j for j in range(x.size) if labels[j] in top}
    return Selection(sources, n_used, m_used, reduced=n_used < n,
                     centroids=[float(cent[o]) for o in order])


def delay_of(kernel_scores: np.ndarray, T: int | None = None) -> int:
    """``T - argmax`` with 1-based slots; ties go to the latest slot (smallest delay)."""
    s = np.asarray(kernel_scores, dtype=np.float64)
    if s.size == 0:
        raise ValueError("empty kernel score slice")
    T = s.size if T is None else T
    last = s.size - 1 - int(np.argmax(s[::-1]))
    return T - (last + 1)


# -- end to end --------------------------------------------------------------

def sample_windows(windows: np.ndarray, samples: int | None) -> np.ndarray:
    if samples is None or len(windows) <= samples:
        return windows
    idx = np.unique(np.linspace(0, len(windows) - 1, samples).round().astype(int))
    return windows[idx]


def causal_scores(params, cfg: ModelConfig, windows: np.ndarray, dcfg: DetectorConfig):
    """Aggregated scores for every target.

    Returns ``(CausalScores with attn [N, N, N] and kernel [N, N, N, T], info)``
    where the leading axis is the target series. Windows are processed in
    chunks of ``dcfg.chunk``; the mean is a sum over chunks in window order.
    """
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim == 2:
        windows = windows[None]
    if len(windows) < 1:
        raise ValueError("need at least one window")
    W = sample_windows(windows, dcfg.samples)
    N, T = cfg.N, cfg.T
    keep = np.abs(W).mean(axis=2) >= dcfg.theta          # [B, N]
    below = [i for i in range(N) if not keep[:, i].any()]
    keep[:, below] = True
    S_attn = np.zeros((N, N, N))
    S_kernel = np.zeros((N, N, N, T))
    stabilized = 0
    for lo in range(0, len(W), dcfg.chunk):
        sl = slice(lo, lo + dcfg.chunk)
        trace = forward(W[sl], params, cfg)
        for i in range(N):
            k = keep[sl, i]
            if not k.any():
                continue
            R = propagate(trace, params, cfg, i)
            stabilized += R.stabilized
            g_attn, g_kernel = target_gradients(trace, params, cfg, i)
            per_window = gradient_modulate(R, g_attn, g_kernel)
            S_attn[i] += per_window.attn[k].sum(axis=0)
            S_kernel[i] += per_window.kernel[k].sum(axis=0)
    counts = keep.sum(axis=0)
    S_attn /= counts[:, None, None]
    S_kernel /= counts[:, None, None, None]
    return CausalScores(S_attn, S_kernel), {"stabilized": stabilized, "below_theta": below}


def discover(params, cfg: ModelConfig, windows: np.ndarray, dcfg: DetectorConfig,
             labels: list[str] | None = None) -> CausalGraph:
    errs = dcfg.problems()
    if errs:
        raise ValueError("; ".join(errs))
    scores, info = causal_scores(params, cfg, windows, dcfg)
    graph = CausalGraph(cfg.N, labels=labels)
    degenerate, reduced = [], []
    for i in range(cfg.N):
        row = scores.attn[i][i, :]
        sel = select_edges(row, dcfg.n, dcfg.m, dcfg.kmeans_seed, dcfg.kmeans_restarts, dcfg.kmeans_max_iter)
        if sel.degenerate:
            degenerate.append(i + 1)
        elif sel.reduced:
            reduced.append(i + 1)
        for j in sorted(sel.sources):
            # the self path is shifted one slot after the convolution
            delay = delay_of(scores.kernel[i][j, i, :], cfg.T) + (j == i)
            graph.add_edge(j, i, int(delay), float(row[j]))
    graph.meta = {
        "degenerate_targets": degenerate,
        "reduced_class_targets": reduced,
        "below_theta_targets": [t + 1 for t in info["below_theta"]],
        "stabilized_denominators": info["stabilized"],
    }
    return graph
