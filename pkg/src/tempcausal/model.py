"""Causality-aware transformer over a window of N series by T slots.

Pipeline per window ``X[N, T]``::

    prefix_embed -> Q, K     (query/key only, one set per time slot)
    causal_convolve -> shift_self -> V
    h x attention_head(Q, K, V) -> multi_head -> ffn -> output layer

Prediction ``X_pred[i, t]`` depends on other series up to slot ``t`` and on
series ``i`` itself only up to slot ``t-1``: attention for slot ``t`` is
computed from observations before ``t``, and the FFN and output layers are
triangularly masked along time.

All functions accept a single window ``[N, T]`` or a batch ``[B, N, T]``.
Per-head parameters carry a leading head axis.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from functools import lru_cache
from pathlib import Path

import numpy as np

from .numerics import (
    DimensionError,
    as_tensor,
    he_init,
    leaky_relu,
    leaky_relu_grad,
    linear_backward,
    linear_forward,
    softmax,
    softmax_backward,
)

PARAM_NAMES = (
    "W_emb", "b_emb",
    "W_Q", "b_Q", "W_K", "b_K",
    "kernel", "mask", "W_O",
    "W_ffn1", "b_ffn1", "W_ffn2", "b_ffn2",
    "W_out", "b_out",
)
BIASED_LAYERS = {"out": "b_out", "ffn2": "b_ffn2", "ffn1": "b_ffn1"}
TIME_MASKS = ("diagonal", "causal")


@dataclass
class ModelConfig:
    N: int
    T: int = 16
    d: int = 64
    d_qk: int = 64
    h: int = 4
    d_ffn: int = 64
    tau: float = 1.0
    lambda_k: float = 1e-4
    lambda_m: float = 1e-4
    leaky_slope: float = 0.01
    time_mask: str = "diagonal"     # "diagonal" or "causal"; see time_masks

    def problems(self) -> list[str]:
        out = []
        if self.N < 2:
            out.append(f"model.N must be >= 2 (got {self.N})")
        if self.T < 2:
            out.append(f"model.T must be >= 2 (got {self.T})")
        if self.d <= self.T:
            out.append(f"model.d must exceed T={self.T} (got {self.d})")
        for name in ("d_qk", "h", "d_ffn"):
            if getattr(self, name) < 1:
                out.append(f"model.{name} must be >= 1")
        if not self.tau > 0:
            out.append(f"model.tau must be positive (got {self.tau})")
        if self.lambda_k < 0 or self.lambda_m < 0:
            out.append("model.lambda_k and model.lambda_m must be >= 0")
        if not 0.0 < self.leaky_slope < 1.0:
            out.append("model.leaky_slope must lie in (0, 1)")
        if self.time_mask not in TIME_MASKS:
            out.append(f"model.time_mask must be one of {TIME_MASKS} (got {self.time_mask!r})")
        elif self.time_mask == "diagonal" and self.d_ffn < self.T:
            out.append(f"model.d_ffn must be >= T={self.T} with the diagonal time mask (got {self.d_ffn})")
        return out

    def validate(self) -> "ModelConfig":
        errs = self.problems()
        if errs:
            raise ValueError("; ".join(errs))
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


def param_shapes(cfg: ModelConfig) -> dict[str, tuple[int, ...]]:
    N, T, d, q, h, f = cfg.N, cfg.T, cfg.d, cfg.d_qk, cfg.h, cfg.d_ffn
    return {
        "W_emb": (T, d), "b_emb": (d,),
        "W_Q": (h, d, q), "b_Q": (h, q), "W_K": (h, d, q), "b_K": (h, q),
        "kernel": (h, N, N, T), "mask": (h, N, N), "W_O": (h,),
        "W_ffn1": (T, f), "b_ffn1": (f,), "W_ffn2": (f, T), "b_ffn2": (T,),
        "W_out": (T, T), "b_out": (T,),
    }


def init_params(cfg: ModelConfig, seed=0) -> dict[str, np.ndarray]:
    """He-initialised weights, zero biases, all-ones attention masks.

    Time-masked layers use the count of unmasked inputs of each unit as its fan-in.
    """
    cfg.validate()
    rng = np.random.default_rng(seed)
    shapes = param_shapes(cfg)
    fan_in = {"W_emb": cfg.T, "W_Q": cfg.d, "W_K": cfg.d, "kernel": cfg.T, "W_O": cfg.h,
              "W_ffn1": cfg.T, "W_ffn2": cfg.d_ffn, "W_out": cfg.T}
    params = {}
    for name in PARAM_NAMES:
        if name in fan_in:
            params[name] = he_init(shapes[name], fan_in[name], rng)
        elif name == "mask":
            params[name] = np.ones(shapes[name])
        else:
            params[name] = np.zeros(shapes[name])
    masks = time_masks(cfg.T, cfg.d_ffn, cfg.time_mask)
    for name, m in zip(("W_ffn1", "W_ffn2", "W_out"), masks):
        allowed = np.maximum(m.sum(axis=0), 1.0)
        params[name] *= m * np.sqrt(fan_in[name] / allowed)
    return params


def check_params(params: dict[str, np.ndarray], cfg: ModelConfig) -> None:
    shapes = param_shapes(cfg)
    if set(params) != set(shapes):
        raise DimensionError(f"parameter names {sorted(params)} != expected {sorted(shapes)}")
    for name, shape in shapes.items():
        if params[name].shape != shape:
            raise DimensionError(f"{name} has shape {params[name].shape}, expected {shape}")


def _batched(X: np.ndarray) -> tuple[np.ndarray, bool]:
    X = as_tensor(X)
    if X.ndim == 2:
        return X[None], True
    if X.ndim != 3:
        raise DimensionError(f"expected [N, T] or [B, N, T] input, got {X.shape}")
    return X, False


# -- building blocks ---------------------------------------------------------

def embed(X: np.ndarray, W_emb: np.ndarray, b_emb: np.ndarray) -> np.ndarray:
    """Row-wise projection ``X @ W_emb + b_emb`` of whole windows, ``[..., N, T] -> [..., N, d]``."""
    return linear_forward(X, W_emb, b_emb)


def _prefix_rows(X: np.ndarray) -> np.ndarray:
    """``R[..., n, t, s] = X[..., n, s]`` for ``s < t`` else 0."""
    T = X.shape[-1]
    return X[..., None, :] * np.tri(T, k=-1)


def prefix_embed(X: np.ndarray, W_emb: np.ndarray, b_emb: np.ndarray) -> np.ndarray:
    """Per-slot embeddings of the strictly-earlier observations.

    ``E[..., t, n, :] = embed(X[n] with slots >= t zeroed)``; slot 0 sees only
    the bias. Shape ``[..., N, T] -> [..., T, N, d]``.
    """
    X = as_tensor(X)
    return np.swapaxes(_prefix_rows(X) @ W_emb, -3, -2) + b_emb


@lru_cache(maxsize=None)
def _slide_index(T: int) -> np.ndarray:
    """``G[s, k, t] = 1/(t+1)`` where kernel slot ``k`` meets input slot ``s`` at output ``t``.

    Kernel slot ``T-1`` (0-based) is lag 0; slot ``k`` is lag ``T-1-k``.
    """
    G = np.zeros((T, T, T))
    for t in range(T):
        for k in range(T):
            s = k - (T - 1) + t
            if s >= 0:
                G[s, k, t] = 1.0 / (t + 1)
    G = G.reshape(T, T * T)
    G.setflags(write=False)
    return G


def sliding_input(X: np.ndarray) -> np.ndarray:
    """Padded sliding matrix ``P[..., i, k, t]`` with the 1/t scaling folded in.

    ``causal_convolve`` is then ``Xhat[i, j, t] = sum_k kernel[i, j, k] * P[i, k, t]``.
    """
    X = as_tensor(X)
    T = X.shape[-1]
    return (X @ _slide_index(T)).reshape(X.shape + (T,))


def _conv(kernel: np.ndarray, P: np.ndarray) -> np.ndarray:
    """``kernel[h, i, j, k]``, ``P[B, i, k, t]`` -> ``Xhat[B, h, i, j, t]``."""
    h, N, _, T = kernel.shape
    B = P.shape[0]
    Kr = kernel.transpose(1, 0, 2, 3).reshape(N, h * N, T)
    Pr = P.transpose(1, 2, 0, 3).reshape(N, T, B * T)
    out = (Kr @ Pr).reshape(N, h, N, B, T)
    return out.transpose(3, 1, 0, 2, 4)


def _conv_kernel_grad(dXhat: np.ndarray, P: np.ndarray, per_window: bool) -> np.ndarray:
    """Adjoint of :func:`_conv` w.r.t. the kernel."""
    B, h, N, _, T = dXhat.shape
    if per_window:
        d = dXhat.transpose(0, 2, 1, 3, 4).reshape(B, N, h * N, T)
        g = d @ np.swapaxes(P, -1, -2)                               # [B, i, h*j, k]
        return g.reshape(B, N, h, N, T).transpose(0, 2, 1, 3, 4)
    d = dXhat.transpose(2, 1, 3, 0, 4).reshape(N, h * N, B * T)
    Pr = P.transpose(1, 0, 3, 2).reshape(N, B * T, T)
    return (d @ Pr).reshape(N, h, N, T).transpose(1, 0, 2, 3)


def causal_convolve(X: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Per-(source, target) causal convolution.

    ``X[N, T]`` with ``kernel[N, N, T]`` gives ``Xhat[N, N, T]``; a batch
    ``[B, N, T]`` with per-head kernels ``[h, N, N, T]`` gives ``[B, h, N, N, T]``.
    """
    Xb, single = _batched(X)
    heads = kernel.ndim == 4
    out = _conv(kernel if heads else kernel[None], sliding_input(Xb))
    if not heads:
        out = out[:, 0]
    return out[0] if single else out


def shift_self(Xhat: np.ndarray) -> np.ndarray:
    """Right-shift the diagonal (self) slices by one slot, zero-filling slot 0."""
    out = Xhat.copy()
    N = Xhat.shape[-2]
    idx = np.arange(N)
    out[..., idx, idx, 0] = 0.0
    out[..., idx, idx, 1:] = Xhat[..., idx, idx, :-1]
    return out


def unshift_self_grad(dV: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`shift_self`."""
    out = dV.copy()
    N = dV.shape[-2]
    idx = np.arange(N)
    out[..., idx, idx, :-1] = dV[..., idx, idx, 1:]
    out[..., idx, idx, -1] = 0.0
    return out


def attention_head(X_emb, V, W_Q, b_Q, W_K, b_K, mask, tau):
    """Single head over per-slot embeddings ``X_emb[T, N, d]`` and values ``V[N, N, T]``.

    Returns ``(A[N, T], attn[T, N, N])`` with ``A[i, t] = sum_j attn[t, i, j] * V[j, i, t]``.
    """
    Q = linear_forward(X_emb, W_Q, b_Q)
    K = linear_forward(X_emb, W_K, b_K)
    scores = Q @ np.swapaxes(K, -1, -2) / (tau * np.sqrt(W_Q.shape[1]))
    attn = softmax(scores * mask, axis=-1)
    Vp = np.moveaxis(np.swapaxes(V, -3, -2), -1, -3)               # [..., t, i, j]
    A = np.swapaxes((attn * Vp).sum(axis=-1), -1, -2)
    return A, attn


def multi_head(A_heads: np.ndarray, W_O: np.ndarray) -> np.ndarray:
    """``A_heads[..., h, N, T]`` combined with per-head weights ``W_O[h]``."""
    return np.tensordot(A_heads, W_O, axes=([-3], [0]))


@lru_cache(maxsize=None)
def time_masks(T: int, d_ffn: int, mode: str = "diagonal") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Connectivity masks for the layers that act along the time axis.

    Hidden FFN unit ``u`` is tied to slot ``deg[u]``. With ``"causal"`` it
    reads input slots ``<= deg[u]`` and feeds output slots ``>= deg[u]``, and
    the output layer reads slots ``<= t``. With ``"diagonal"`` every slot is
    processed on its own, so any lag has to be carried by the convolution
    kernel.
    """
    deg = (np.arange(d_ffn) * T) // d_ffn
    slots = np.arange(T)
    if mode == "causal":
        m1 = slots[:, None] <= deg[None, :]                       # [T, d_ffn]
        m2 = deg[:, None] <= slots[None, :]                       # [d_ffn, T]
        mo = slots[:, None] <= slots[None, :]                     # [T, T]
    elif mode == "diagonal":
        m1 = slots[:, None] == deg[None, :]
        m2 = deg[:, None] == slots[None, :]
        mo = slots[:, None] == slots[None, :]
    else:
        raise ValueError(f"unknown time mask {mode!r}")
    out = tuple(m.astype(float) for m in (m1, m2, mo))
    for m in out:
        m.setflags(write=False)
    return out


def effective_weights(params: dict[str, np.ndarray], cfg: ModelConfig):
    """Masked ``(W_ffn1, W_ffn2, W_out)`` as used by the forward pass."""
    m1, m2, mo = time_masks(cfg.T, cfg.d_ffn, cfg.time_mask)
    return params["W_ffn1"] * m1, params["W_ffn2"] * m2, params["W_out"] * mo


def ffn(Att, W1, b1, W2, b2, slope=0.01):
    """``Linear(leakyReLU(Linear(Att)))`` along the time axis; pass already-masked weights."""
    return linear_forward(leaky_relu(linear_forward(Att, W1, b1), slope), W2, b2)


# -- full pass ---------------------------------------------------------------

@dataclass
class ForwardTrace:
    """Intermediates of one (batched) forward pass; leading axis is the window."""

    X: np.ndarray          # [B, N, T]
    P: np.ndarray          # [B, N, T, T] sliding input
    Xhat: np.ndarray       # [B, h, N, N, T] before self-shift
    V: np.ndarray          # [B, h, N, N, T]
    scores: np.ndarray     # [B, h, T, N, N] scaled QK^T before masking
    attn: np.ndarray       # [B, h, T, N, N]
    A: np.ndarray          # [B, h, N, T]
    Att: np.ndarray        # [B, N, T]
    H1: np.ndarray         # [B, N, d_ffn] pre-activation
    Z1: np.ndarray         # [B, N, d_ffn]
    F: np.ndarray          # [B, N, T] FFN output
    X_pred: np.ndarray     # [B, N, T]
    single: bool = False

    @property
    def prediction(self) -> np.ndarray:
        return self.X_pred[0] if self.single else self.X_pred


def _qk_terms(p: dict[str, np.ndarray]):
    """Per-head factors of ``Q K^T`` in prefix-row space.

    With ``Q = rows @ MQ + cQ`` and ``K = rows @ MK + cK`` (``MQ = W_emb @ W_Q``,
    ``cQ = b_emb @ W_Q + b_Q``), ``Q K^T = rows G rows^T + rows u + (rows v)^T + c``.
    ``G`` is ``T x T``, so the ``d_QK``-wide projections are never formed.
    """
    MQ = np.einsum("sd,hdq->hsq", p["W_emb"], p["W_Q"])
    MK = np.einsum("sd,hdq->hsq", p["W_emb"], p["W_K"])
    cQ = np.einsum("d,hdq->hq", p["b_emb"], p["W_Q"]) + p["b_Q"]
    cK = np.einsum("d,hdq->hq", p["b_emb"], p["W_K"]) + p["b_K"]
    G = MQ @ np.swapaxes(MK, -1, -2)
    u = np.einsum("hsq,hq->hs", MQ, cK)
    v = np.einsum("hsq,hq->hs", MK, cQ)
    c = (cQ * cK).sum(axis=-1)
    return MQ, MK, cQ, cK, G, u, v, c


def _qk_scores(rows: np.ndarray, G, u, v, c) -> np.ndarray:
    """``rows[B, N, T, T] -> Q K^T`` of shape ``[B, h, T, N, N]``."""
    rt = rows.transpose(0, 2, 1, 3)[:, None]                         # [B, 1, t, n, s]
    RG = rt @ G[None, :, None]                                       # [B, h, t, i, s]
    out = RG @ np.swapaxes(rt, -1, -2)
    out += (rt @ u[None, :, None, :, None])                          # rows_i . u
    out += np.swapaxes(rt @ v[None, :, None, :, None], -1, -2)       # rows_j . v
    return out + c[None, :, None, None, None]


def _qk_backward(rows: np.ndarray, p, terms, dS: np.ndarray):
    """Gradients of ``sum(dS * Q K^T)`` w.r.t. the embedding and Q/K parameters."""
    MQ, MK, cQ, cK, G, u, v, c = terms
    h, T = dS.shape[1], rows.shape[-1]
    rt = rows.transpose(0, 2, 1, 3)[:, None]                         # [B, 1, t, n, s]
    flat = rt.reshape(-1, T)                                         # (b, t, n) x s
    hfirst = lambda a: np.moveaxis(a, 1, 0).reshape(h, -1, *a.shape[4:])  # noqa: E731
    dG = flat.T @ hfirst(dS @ rt)
    du = hfirst(dS.sum(axis=-1)) @ flat
    dv = hfirst(dS.sum(axis=-2)) @ flat
    dc = dS.sum(axis=(0, 2, 3, 4))
    dMQ = dG @ MK + du[:, :, None] * cK[:, None, :]
    dMK = np.swapaxes(dG, -1, -2) @ MQ + dv[:, :, None] * cQ[:, None, :]
    dcQ = np.einsum("hsq,hs->hq", MK, dv) + dc[:, None] * cK
    dcK = np.einsum("hsq,hs->hq", MQ, du) + dc[:, None] * cQ
    W_emb, b_emb = p["W_emb"], p["b_emb"]
    g = {
        "W_Q": np.einsum("sd,hsq->hdq", W_emb, dMQ) + b_emb[None, :, None] * dcQ[:, None, :],
        "W_K": np.einsum("sd,hsq->hdq", W_emb, dMK) + b_emb[None, :, None] * dcK[:, None, :],
        "b_Q": dcQ,
        "b_K": dcK,
        "W_emb": np.einsum("hsq,hdq->sd", dMQ, p["W_Q"]) + np.einsum("hsq,hdq->sd", dMK, p["W_K"]),
        "b_emb": np.einsum("hdq,hq->d", p["W_Q"], dcQ) + np.einsum("hdq,hq->d", p["W_K"], dcK),
    }
    return g


def forward(X: np.ndarray, params: dict[str, np.ndarray], cfg: ModelConfig) -> ForwardTrace:
    Xb, single = _batched(X)
    if Xb.shape[1:] != (cfg.N, cfg.T):
        raise DimensionError(f"window shape {Xb.shape[1:]} does not match config ({cfg.N}, {cfg.T})")
    p = params
    W1, W2, Wo = effective_weights(p, cfg)
    _, _, _, _, G, u, v, c = _qk_terms(p)
    scores = _qk_scores(_prefix_rows(Xb), G, u, v, c) / (cfg.tau * np.sqrt(cfg.d_qk))
    P = sliding_input(Xb)
    Xhat = _conv(p["kernel"], P)
    V = shift_self(Xhat)
    attn = softmax(scores * p["mask"][None, :, None], axis=-1)
    Vp = V.transpose(0, 1, 4, 3, 2)                                  # [B, h, t, i, j]
    A = (attn * Vp).sum(axis=-1).transpose(0, 1, 3, 2)
    Att = multi_head(A, p["W_O"])
    H1 = linear_forward(Att, W1, p["b_ffn1"])
    Z1 = leaky_relu(H1, cfg.leaky_slope)
    F = linear_forward(Z1, W2, p["b_ffn2"])
    X_pred = linear_forward(F, Wo, p["b_out"])
    return ForwardTrace(Xb, P, Xhat, V, scores, attn, A, Att, H1, Z1, F, X_pred, single)


def mse_term(X_pred: np.ndarray, X: np.ndarray) -> float:
    """Squared error on slots 2..T divided by N*T, averaged over windows."""
    Xp, _ = _batched(X_pred)
    Xb, _ = _batched(X)
    N, T = Xb.shape[1:]
    err = Xp[:, :, 1:] - Xb[:, :, 1:]
    return float((err ** 2).sum() / (N * T) / Xb.shape[0])


def loss(X_pred: np.ndarray, X: np.ndarray, params: dict[str, np.ndarray], cfg: ModelConfig) -> float:
    reg = cfg.lambda_k * np.abs(params["kernel"]).sum() + cfg.lambda_m * np.abs(params["mask"]).sum()
    return mse_term(X_pred, X) + float(reg)


def loss_grad_output(trace: ForwardTrace, cfg: ModelConfig) -> np.ndarray:
    """d(mean-over-windows loss) / d X_pred, shape [B, N, T]."""
    B = trace.X.shape[0]
    g = np.zeros_like(trace.X_pred)
    g[:, :, 1:] = 2.0 * (trace.X_pred[:, :, 1:] - trace.X[:, :, 1:]) / (cfg.N * cfg.T * B)
    return g


@dataclass
class BackwardResult:
    grads: dict[str, np.ndarray]
    d_attn: np.ndarray | None = None         # [B, h, T, N, N], w.r.t. post-softmax attention
    d_kernel: np.ndarray | None = None       # [B, h, N, N, T], per window


def backward(trace: ForwardTrace, params: dict[str, np.ndarray], cfg: ModelConfig,
             d_pred: np.ndarray, per_window: bool = False, through_qk: bool = True) -> BackwardResult:
    """Back-propagate ``d_pred`` (gradient w.r.t. X_pred, [B, N, T]).

    Parameter gradients are summed over windows. With ``per_window`` the
    gradients w.r.t. the attention matrices and kernels are also returned
    per window. ``through_qk=False`` skips the softmax/QK/embedding branch
    (those gradients come back as zeros).
    """
    p = params
    tr = trace
    m1, m2, mo = time_masks(cfg.T, cfg.d_ffn, cfg.time_mask)
    W1, W2, Wo = p["W_ffn1"] * m1, p["W_ffn2"] * m2, p["W_out"] * mo
    g = {}
    dF, dWo, g["b_out"] = linear_backward(tr.F, Wo, d_pred)
    dZ1, dW2, g["b_ffn2"] = linear_backward(tr.Z1, W2, dF)
    dH1 = dZ1 * leaky_relu_grad(tr.H1, cfg.leaky_slope)
    dAtt, dW1, g["b_ffn1"] = linear_backward(tr.Att, W1, dH1)
    g["W_out"], g["W_ffn2"], g["W_ffn1"] = dWo * mo, dW2 * m2, dW1 * m1

    g["W_O"] = (tr.A * dAtt[:, None]).sum(axis=(0, 2, 3))
    dA = dAtt[:, None] * p["W_O"][None, :, None, None]               # [B, h, i, t]
    dAp = dA.transpose(0, 1, 3, 2)[..., None]                        # [B, h, t, i, 1]
    d_attn = dAp * tr.V.transpose(0, 1, 4, 3, 2)
    dV = (dAp * tr.attn).transpose(0, 1, 4, 3, 2)
    dXhat = unshift_self_grad(dV)
    if per_window:
        d_kernel = _conv_kernel_grad(dXhat, tr.P, per_window=True)
        g["kernel"] = d_kernel.sum(axis=0)
    else:
        d_kernel = None
        g["kernel"] = _conv_kernel_grad(dXhat, tr.P, per_window=False)

    if through_qk:
        d_masked = softmax_backward(tr.attn, d_attn, axis=-1)
        g["mask"] = (d_masked * tr.scores).sum(axis=(0, 2))
        d_scores = d_masked * p["mask"][None, :, None] / (cfg.tau * np.sqrt(cfg.d_qk))
        g.update(_qk_backward(_prefix_rows(tr.X), p, _qk_terms(p), d_scores))
    else:
        for name in ("mask", "W_Q", "b_Q", "W_K", "b_K", "W_emb", "b_emb"):
            g[name] = np.zeros_like(p[name])
    return BackwardResult(g, d_attn if per_window else None, d_kernel)


def loss_and_grads(X: np.ndarray, params: dict[str, np.ndarray], cfg: ModelConfig):
    """Regularised loss over a batch of windows and its full parameter gradient."""
    tr = forward(X, params, cfg)
    value = loss(tr.X_pred, tr.X, params, cfg)
    grads = backward(tr, params, cfg, loss_grad_output(tr, cfg)).grads
    grads["kernel"] = grads["kernel"] + cfg.lambda_k * np.sign(params["kernel"])
    grads["mask"] = grads["mask"] + cfg.lambda_m * np.sign(params["mask"])
    return value, grads


# -- checkpoints -------------------------------------------------------------

def _encode(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": a.tobytes().hex()}


def _decode(d: dict) -> np.ndarray:
    return np.frombuffer(bytes.fromhex(d["data"]), dtype="<f8").astype(np.float64).reshape(d["shape"])


def save_checkpoint(path, params: dict[str, np.ndarray], cfg: ModelConfig, extra: dict | None = None) -> None:
    """JSON checkpoint; floats stored as little-endian IEEE-754 hex so reloads are bit-exact."""
    doc = {
        "format": "tempcausal-checkpoint/1",
        "config": asdict(cfg),
        "params": {name: _encode(params[name]) for name in PARAM_NAMES},
        "extra": extra or {},
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True))


def load_checkpoint(path):
    doc = json.loads(Path(path).read_text())
    if doc.get("format") != "tempcausal-checkpoint/1":
        raise ValueError(f"{path}: not a checkpoint file")
    cfg = ModelConfig.from_dict(doc["config"])
    params = {name: _decode(v) for name, v in doc["params"].items()}
    check_params(params, cfg)
    return params, cfg, doc.get("extra", {})
