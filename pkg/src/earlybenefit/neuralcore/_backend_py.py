"""Pure-NumPy kernel backend.

Mirrors the compiled backend function-for-function; used when the extension
is not built (or when EARLYBENEFIT_BACKEND=python). The sequence kernels are
written so that streaming one observation at a time reproduces the batch
forward pass bit for bit: `forward_seq` is literally a loop over `step`, and
attention always sees a C-contiguous (t, H) block of hidden states.
"""

from __future__ import annotations

import numpy as np

NAME = "python"


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def step(W, U, b, x, h_prev, c_prev):
    """One LSTM tick. Returns (h, c, gates) with gates = [i, f, o, g] stacked."""
    H = h_prev.shape[0]
    a = W @ x + U @ h_prev + b
    g = np.empty(4 * H)
    g[:3 * H] = _sigmoid(a[:3 * H])          # input, forget, output gates
    g[3 * H:] = np.tanh(a[3 * H:])           # candidate
    c = g[H:2 * H] * c_prev + g[:H] * g[3 * H:]
    h = g[2 * H:3 * H] * np.tanh(c)
    return h, c, g


def forward_seq(W, U, b, X):
    """Run the recurrence over all T rows of X from zero state."""
    T = X.shape[0]
    H = U.shape[1]
    HS = np.zeros((T, H))
    CS = np.zeros((T, H))
    G = np.zeros((T, 4 * H))
    h = np.zeros(H)
    c = np.zeros(H)
    for t in range(T):
        h, c, g = step(W, U, b, X[t], h, c)
        HS[t] = h
        CS[t] = c
        G[t] = g
    return HS, CS, G


def _activate(pre, act):
    if act == 0:
        return np.tanh(pre)
    return _sigmoid(pre)


def attn_head(HS, c_last, Wa, w, w0, act):
    """Attention over hidden states with the current cell state as query,
    then the linear head. Returns (bhat, alpha, ctx, zcat, h_attn)."""
    scores = HS @ c_last
    e = np.exp(scores - scores.max())
    alpha = e / e.sum()
    ctx = alpha @ HS
    zcat = np.concatenate([ctx, c_last])
    h_attn = _activate(Wa @ zcat, act)
    bhat = float(w @ h_attn + w0)
    return bhat, alpha, ctx, zcat, h_attn


def last_state_head(h, c, Wa, w, w0, act):
    """Constant-time head variant: no attention, reads concat(h, c) directly."""
    zcat = np.concatenate([h, c])
    h_attn = _activate(Wa @ zcat, act)
    return float(w @ h_attn + w0)


def sample_backward(W, U, b, Wa, w, w0, act, X, HS, CS, G, alpha, zcat, h_attn,
                    dbhat, gW, gU, gb, gWa, gw, gw0):
    """Accumulate d(loss)/d(params) for one sample given d(loss)/d(bhat).

    gw0 is a length-1 array so the scalar accumulates in place.
    """
    T = X.shape[0]
    H = U.shape[1]
    q = CS[T - 1]

    gw += dbhat * h_attn
    gw0[0] += dbhat
    dh_attn = dbhat * w
    if act == 0:
        dpre = dh_attn * (1.0 - h_attn * h_attn)
    else:
        dpre = dh_attn * h_attn * (1.0 - h_attn)
    gWa += np.outer(dpre, zcat)
    dz = Wa.T @ dpre
    dctx = dz[:H]
    dq = dz[H:].copy()

    dalpha = HS @ dctx
    dHS = alpha[:, None] * dctx[None, :]
    dscores = alpha * (dalpha - float(alpha @ dalpha))
    dHS += dscores[:, None] * q[None, :]
    dq += dscores @ HS

    # backpropagation through time; dq enters as the gradient on c_T
    dh_carry = np.zeros(H)
    dc = dq
    for t in range(T - 1, -1, -1):
        dh = dHS[t] + dh_carry
        gi = G[t, :H]
        gf = G[t, H:2 * H]
        go = G[t, 2 * H:3 * H]
        gg = G[t, 3 * H:]
        tc = np.tanh(CS[t])
        do = dh * tc
        dc = dc + dh * go * (1.0 - tc * tc)
        di = dc * gg
        dg = dc * gi
        c_prev = CS[t - 1] if t > 0 else np.zeros(H)
        df = dc * c_prev
        da = np.empty(4 * H)
        da[:H] = di * gi * (1.0 - gi)
        da[H:2 * H] = df * gf * (1.0 - gf)
        da[2 * H:3 * H] = do * go * (1.0 - go)
        da[3 * H:] = dg * (1.0 - gg * gg)
        gW += np.outer(da, X[t])
        h_prev = HS[t - 1] if t > 0 else np.zeros(H)
        gU += np.outer(da, h_prev)
        gb += da
        dh_carry = U.T @ da
        dc = dc * gf


def sample_forward(W, U, b, Wa, w, w0, act, X):
    HS, CS, G = forward_seq(W, U, b, X)
    bhat, alpha, ctx, zcat, h_attn = attn_head(HS, CS[-1], Wa, w, w0, act)
    return bhat, HS, CS, G, alpha, ctx, zcat, h_attn


def batch_loss_grad(W, U, b, Wa, w, w0, act, Xcat, starts, inst_of, tlen, targets,
                    sel, gW, gU, gb, gWa, gw, gw0):
    """Mean-squared-error loss and gradients over the selected prefix samples.

    Sample k (k in `sel`) is the first tlen[k] rows of instance inst_of[k],
    whose rows start at starts[inst_of[k]] in Xcat. Gradient arrays must be
    zeroed by the caller; returns the loss.
    """
    B = len(sel)
    loss = 0.0
    inv = 1.0 / B
    for k in sel:
        j = inst_of[k]
        T = tlen[k]
        X = Xcat[starts[j]:starts[j] + T]
        bhat, HS, CS, G, alpha, ctx, zcat, h_attn = sample_forward(W, U, b, Wa, w, w0, act, X)
        r = bhat - targets[k]
        loss += r * r * inv
        sample_backward(W, U, b, Wa, w, w0, act, X, HS, CS, G, alpha, zcat, h_attn,
                        2.0 * r * inv, gW, gU, gb, gWa, gw, gw0)
    return loss


def batch_predict(W, U, b, Wa, w, w0, act, Xcat, starts, inst_of, tlen, sel):
    out = np.empty(len(sel))
    for i, k in enumerate(sel):
        j = inst_of[k]
        T = tlen[k]
        X = Xcat[starts[j]:starts[j] + T]
        HS, CS, _ = forward_seq(W, U, b, X)
        out[i] = attn_head(HS, CS[-1], Wa, w, w0, act)[0]
    return out
