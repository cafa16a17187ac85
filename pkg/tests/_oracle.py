"""Direct loop implementations used as independent oracles in the tests."""

import math

import numpy as np


def masks(T, d_ffn, mode):
    deg = [u * T // d_ffn for u in range(d_ffn)]
    if mode == "diagonal":
        ok1 = lambda t, u: t == deg[u]
        ok2 = lambda u, t: deg[u] == t
        oko = lambda s, t: s == t
    else:
        ok1 = lambda t, u: t <= deg[u]
        ok2 = lambda u, t: deg[u] <= t
        oko = lambda s, t: s <= t
    return ok1, ok2, oko


def forward(X, p, cfg):
    """One window ``X[N, T]`` through the model, written out index by index."""
    N, T = X.shape
    h, d, q, f = cfg.h, cfg.d, cfg.d_qk, cfg.d_ffn
    ok1, ok2, oko = masks(T, f, cfg.time_mask)

    # prefix embeddings E[t][n][:]
    E = np.zeros((T, N, d))
    for t in range(T):
        for n in range(N):
            for c in range(d):
                E[t, n, c] = p["b_emb"][c] + sum(X[n, s] * p["W_emb"][s, c] for s in range(t))

    Xhat = np.zeros((h, N, N, T))
    for k in range(h):
        for i in range(N):
            for j in range(N):
                for t in range(T):
                    acc = sum(p["kernel"][k, i, j, T - 1 - t + s] * X[i, s] for s in range(t + 1))
                    Xhat[k, i, j, t] = acc / (t + 1)
    V = Xhat.copy()
    for k in range(h):
        for i in range(N):
            V[k, i, i, 0] = 0.0
            for t in range(1, T):
                V[k, i, i, t] = Xhat[k, i, i, t - 1]

    A = np.zeros((h, N, T))
    attn = np.zeros((h, T, N, N))
    for k in range(h):
        for t in range(T):
            Q = [[p["b_Q"][k, c] + sum(E[t, n, e] * p["W_Q"][k, e, c] for e in range(d)) for c in range(q)]
                 for n in range(N)]
            K = [[p["b_K"][k, c] + sum(E[t, n, e] * p["W_K"][k, e, c] for e in range(d)) for c in range(q)]
                 for n in range(N)]
            for i in range(N):
                z = [sum(Q[i][c] * K[j][c] for c in range(q)) / (cfg.tau * math.sqrt(q)) * p["mask"][k, i, j]
                     for j in range(N)]
                top = max(z)
                e = [math.exp(v - top) for v in z]
                for j in range(N):
                    attn[k, t, i, j] = e[j] / sum(e)
                A[k, i, t] = sum(attn[k, t, i, j] * V[k, j, i, t] for j in range(N))

    Att = np.zeros((N, T))
    for i in range(N):
        for t in range(T):
            Att[i, t] = sum(A[k, i, t] * p["W_O"][k] for k in range(h))

    out = np.zeros((N, T))
    slope = cfg.leaky_slope
    for i in range(N):
        z = []
        for u in range(f):
            v = p["b_ffn1"][u] + sum(Att[i, t] * p["W_ffn1"][t, u] for t in range(T) if ok1(t, u))
            z.append(v if v >= 0 else slope * v)
        F = [p["b_ffn2"][t] + sum(z[u] * p["W_ffn2"][u, t] for u in range(f) if ok2(u, t)) for t in range(T)]
        for t in range(T):
            out[i, t] = p["b_out"][t] + sum(F[s] * p["W_out"][s, t] for s in range(T) if oko(s, t))
    return out, attn
