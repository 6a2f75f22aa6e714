# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel backend.

Twin of _backend_py with identical semantics; per-tick recurrence, attention,
and backpropagation run as plain C loops. Streaming and batch evaluation share
the same step routine, so a streamed prefix reproduces the batch forward pass
bit for bit.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh

cnp.import_array()

NAME = "cython"


cdef inline double _sig(double z) nogil:
    return 1.0 / (1.0 + exp(-z))


cdef void _step(const double[:, ::1] W, const double[:, ::1] U, const double[::1] b,
                const double[::1] x, const double[::1] h_prev, const double[::1] c_prev,
                double[::1] h_out, double[::1] c_out, double[::1] g_out,
                double[::1] a) nogil:
    cdef Py_ssize_t H = U.shape[1]
    cdef Py_ssize_t d = W.shape[1]
    cdef Py_ssize_t j, k
    cdef double acc, gi, gf, go, gg, c
    for j in range(4 * H):
        acc = b[j]
        for k in range(d):
            acc += W[j, k] * x[k]
        for k in range(H):
            acc += U[j, k] * h_prev[k]
        a[j] = acc
    for j in range(H):
        gi = _sig(a[j])
        gf = _sig(a[H + j])
        go = _sig(a[2 * H + j])
        gg = tanh(a[3 * H + j])
        c = gf * c_prev[j] + gi * gg
        g_out[j] = gi
        g_out[H + j] = gf
        g_out[2 * H + j] = go
        g_out[3 * H + j] = gg
        c_out[j] = c
        h_out[j] = go * tanh(c)


cdef void _forward_seq(const double[:, ::1] W, const double[:, ::1] U, const double[::1] b,
                       const double[:, ::1] X, Py_ssize_t T,
                       double[:, ::1] HS, double[:, ::1] CS, double[:, ::1] G,
                       double[::1] zeros_h, double[::1] a) nogil:
    cdef Py_ssize_t t
    for t in range(T):
        if t == 0:
            _step(W, U, b, X[0], zeros_h, zeros_h, HS[0], CS[0], G[0], a)
        else:
            _step(W, U, b, X[t], HS[t - 1], CS[t - 1], HS[t], CS[t], G[t], a)


cdef double _attn_head(const double[:, ::1] HS, Py_ssize_t T, const double[::1] c_last,
                       const double[:, ::1] Wa, const double[::1] w, double w0, int act,
                       double[::1] alpha, double[::1] ctx, double[::1] zcat,
                       double[::1] h_attn) nogil:
    cdef Py_ssize_t H = c_last.shape[0]
    cdef Py_ssize_t t, j, k
    cdef double m, s, total, pre, bhat
    m = -1e308
    for t in range(T):
        s = 0.0
        for j in range(H):
            s += HS[t, j] * c_last[j]
        alpha[t] = s
        if s > m:
            m = s
    total = 0.0
    for t in range(T):
        alpha[t] = exp(alpha[t] - m)
        total += alpha[t]
    for t in range(T):
        alpha[t] /= total
    for j in range(H):
        s = 0.0
        for t in range(T):
            s += alpha[t] * HS[t, j]
        ctx[j] = s
        zcat[j] = s
        zcat[H + j] = c_last[j]
    bhat = w0
    for j in range(H):
        pre = 0.0
        for k in range(2 * H):
            pre += Wa[j, k] * zcat[k]
        if act == 0:
            pre = tanh(pre)
        else:
            pre = _sig(pre)
        h_attn[j] = pre
        bhat += w[j] * pre
    return bhat


cdef void _sample_bwd(const double[:, ::1] W, const double[:, ::1] U, const double[::1] b,
                      const double[:, ::1] Wa, const double[::1] w, int act,
                      const double[:, ::1] X, Py_ssize_t T,
                      const double[:, ::1] HS, const double[:, ::1] CS,
                      const double[:, ::1] G, const double[::1] alpha,
                      const double[::1] zcat, const double[::1] h_attn, double dbhat,
                      double[:, ::1] gW, double[:, ::1] gU, double[::1] gb,
                      double[:, ::1] gWa, double[::1] gw, double[::1] gw0,
                      double[::1] dz, double[::1] ds, double[::1] dh,
                      double[::1] dc, double[::1] dh_carry, double[::1] da) nogil:
    cdef Py_ssize_t H = U.shape[1]
    cdef Py_ssize_t d = W.shape[1]
    cdef Py_ssize_t t, j, k
    cdef double dpre_j, dot, s, tc, do_j, di_j, dg_j, df_j, cprev

    gw0[0] += dbhat
    for j in range(2 * H):
        dz[j] = 0.0
    for j in range(H):
        gw[j] += dbhat * h_attn[j]
        dpre_j = dbhat * w[j]
        if act == 0:
            dpre_j *= 1.0 - h_attn[j] * h_attn[j]
        else:
            dpre_j *= h_attn[j] * (1.0 - h_attn[j])
        for k in range(2 * H):
            gWa[j, k] += dpre_j * zcat[k]
            dz[k] += Wa[j, k] * dpre_j

    # dz[:H] is d/dcontext, dz[H:] starts as the concat path into c_T
    dot = 0.0
    for t in range(T):
        s = 0.0
        for j in range(H):
            s += HS[t, j] * dz[j]
        ds[t] = s                      # d/dalpha_t for now
        dot += alpha[t] * s
    for t in range(T):
        ds[t] = alpha[t] * (ds[t] - dot)
    for j in range(H):
        s = 0.0
        for t in range(T):
            s += ds[t] * HS[t, j]
        dc[j] = dz[H + j] + s          # full gradient on c_T
        dh_carry[j] = 0.0

    for t in range(T - 1, -1, -1):
        for j in range(H):
            # attention paths into h_t (context sum + score) plus the carry
            dh[j] = alpha[t] * dz[j] + ds[t] * CS[T - 1, j] + dh_carry[j]
        for j in range(H):
            tc = tanh(CS[t, j])
            do_j = dh[j] * tc
            dc[j] += dh[j] * G[t, 2 * H + j] * (1.0 - tc * tc)
            di_j = dc[j] * G[t, 3 * H + j]
            dg_j = dc[j] * G[t, j]
            cprev = CS[t - 1, j] if t > 0 else 0.0
            df_j = dc[j] * cprev
            da[j] = di_j * G[t, j] * (1.0 - G[t, j])
            da[H + j] = df_j * G[t, H + j] * (1.0 - G[t, H + j])
            da[2 * H + j] = do_j * G[t, 2 * H + j] * (1.0 - G[t, 2 * H + j])
            da[3 * H + j] = dg_j * (1.0 - G[t, 3 * H + j] * G[t, 3 * H + j])
        for j in range(4 * H):
            for k in range(d):
                gW[j, k] += da[j] * X[t, k]
            if t > 0:
                for k in range(H):
                    gU[j, k] += da[j] * HS[t - 1, k]
            gb[j] += da[j]
        for k in range(H):
            s = 0.0
            for j in range(4 * H):
                s += U[j, k] * da[j]
            dh_carry[k] = s
        for j in range(H):
            dc[j] *= G[t, H + j]


def step(const double[:, ::1] W, const double[:, ::1] U, const double[::1] b,
         const double[::1] x, const double[::1] h_prev, const double[::1] c_prev):
    cdef Py_ssize_t H = U.shape[1]
    h = np.empty(H)
    c = np.empty(H)
    g = np.empty(4 * H)
    a = np.empty(4 * H)
    _step(W, U, b, x, h_prev, c_prev, h, c, g, a)
    return h, c, g


def forward_seq(const double[:, ::1] W, const double[:, ::1] U, const double[::1] b,
                const double[:, ::1] X):
    cdef Py_ssize_t T = X.shape[0]
    cdef Py_ssize_t H = U.shape[1]
    HS = np.zeros((T, H))
    CS = np.zeros((T, H))
    G = np.zeros((T, 4 * H))
    zeros_h = np.zeros(H)
    a = np.empty(4 * H)
    _forward_seq(W, U, b, X, T, HS, CS, G, zeros_h, a)
    return HS, CS, G


def attn_head(const double[:, ::1] HS, const double[::1] c_last, const double[:, ::1] Wa,
              const double[::1] w, double w0, int act):
    cdef Py_ssize_t T = HS.shape[0]
    cdef Py_ssize_t H = c_last.shape[0]
    alpha = np.empty(T)
    ctx = np.empty(H)
    zcat = np.empty(2 * H)
    h_attn = np.empty(H)
    cdef double bhat = _attn_head(HS, T, c_last, Wa, w, w0, act, alpha, ctx, zcat, h_attn)
    return bhat, alpha, ctx, zcat, h_attn


def last_state_head(const double[::1] h, const double[::1] c, const double[:, ::1] Wa,
                    const double[::1] w, double w0, int act):
    cdef Py_ssize_t H = h.shape[0]
    cdef Py_ssize_t j, k
    cdef double pre, bhat
    bhat = w0
    for j in range(H):
        pre = 0.0
        for k in range(H):
            pre += Wa[j, k] * h[k]
        for k in range(H):
            pre += Wa[j, H + k] * c[k]
        if act == 0:
            pre = tanh(pre)
        else:
            pre = _sig(pre)
        bhat += w[j] * pre
    return bhat


def sample_forward(const double[:, ::1] W, const double[:, ::1] U, const double[::1] b,
                   const double[:, ::1] Wa, const double[::1] w, double w0, int act,
                   const double[:, ::1] X):
    HS, CS, G = forward_seq(W, U, b, X)
    bhat, alpha, ctx, zcat, h_attn = attn_head(HS, CS[X.shape[0] - 1], Wa, w, w0, act)
    return bhat, HS, CS, G, alpha, ctx, zcat, h_attn


def sample_backward(const double[:, ::1] W, const double[:, ::1] U, const double[::1] b,
                    const double[:, ::1] Wa, const double[::1] w, double w0, int act,
                    const double[:, ::1] X, const double[:, ::1] HS,
                    const double[:, ::1] CS, const double[:, ::1] G,
                    const double[::1] alpha, const double[::1] zcat,
                    const double[::1] h_attn, double dbhat,
                    double[:, ::1] gW, double[:, ::1] gU, double[::1] gb,
                    double[:, ::1] gWa, double[::1] gw, double[::1] gw0):
    cdef Py_ssize_t T = X.shape[0]
    cdef Py_ssize_t H = U.shape[1]
    dz = np.empty(2 * H)
    ds = np.empty(T)
    dh = np.empty(H)
    dc = np.empty(H)
    dh_carry = np.empty(H)
    da = np.empty(4 * H)
    _sample_bwd(W, U, b, Wa, w, act, X, T, HS, CS, G, alpha, zcat, h_attn, dbhat,
                gW, gU, gb, gWa, gw, gw0, dz, ds, dh, dc, dh_carry, da)


def batch_loss_grad(const double[:, ::1] W, const double[:, ::1] U, const double[::1] b,
                    const double[:, ::1] Wa, const double[::1] w, double w0, int act,
                    const double[:, ::1] Xcat, const long long[::1] starts,
                    const long long[::1] inst_of, const long long[::1] tlen,
                    const double[::1] targets, const long long[::1] sel,
                    double[:, ::1] gW, double[:, ::1] gU, double[::1] gb,
                    double[:, ::1] gWa, double[::1] gw, double[::1] gw0):
    """MSE loss + gradients over selected prefix samples (mean over the batch)."""
    cdef Py_ssize_t B = sel.shape[0]
    cdef Py_ssize_t H = U.shape[1]
    cdef Py_ssize_t i, k, T, maxT
    cdef Py_ssize_t s0
    cdef double lossv = 0.0, inv, r, bhat

    maxT = 0
    for i in range(B):
        k = sel[i]
        if tlen[k] > maxT:
            maxT = tlen[k]

    HS = np.zeros((maxT, H))
    CS = np.zeros((maxT, H))
    G = np.zeros((maxT, 4 * H))
    alpha = np.empty(maxT)
    ctx = np.empty(H)
    zcat = np.empty(2 * H)
    h_attn = np.empty(H)
    zeros_h = np.zeros(H)
    a = np.empty(4 * H)
    dz = np.empty(2 * H)
    ds = np.empty(maxT)
    dh = np.empty(H)
    dc = np.empty(H)
    dh_carry = np.empty(H)
    da = np.empty(4 * H)

    cdef double[:, ::1] HSv = HS, CSv = CS, Gv = G
    cdef double[::1] alphav = alpha, ctxv = ctx, zcatv = zcat, h_attnv = h_attn
    cdef double[::1] zerosv = zeros_h, av = a, dzv = dz, dsv = ds, dhv = dh
    cdef double[::1] dcv = dc, dh_carryv = dh_carry, dav = da

    inv = 1.0 / B
    with nogil:
        for i in range(B):
            k = sel[i]
            T = tlen[k]
            s0 = starts[inst_of[k]]
            _forward_seq(W, U, b, Xcat[s0:s0 + T], T, HSv, CSv, Gv, zerosv, av)
            bhat = _attn_head(HSv, T, CSv[T - 1], Wa, w, w0, act,
                              alphav, ctxv, zcatv, h_attnv)
            r = bhat - targets[k]
            lossv += r * r * inv
            _sample_bwd(W, U, b, Wa, w, act, Xcat[s0:s0 + T], T, HSv, CSv, Gv,
                        alphav, zcatv, h_attnv, 2.0 * r * inv,
                        gW, gU, gb, gWa, gw, gw0,
                        dzv, dsv, dhv, dcv, dh_carryv, dav)
    return lossv


def batch_predict(const double[:, ::1] W, const double[:, ::1] U, const double[::1] b,
                  const double[:, ::1] Wa, const double[::1] w, double w0, int act,
                  const double[:, ::1] Xcat, const long long[::1] starts,
                  const long long[::1] inst_of, const long long[::1] tlen,
                  const long long[::1] sel):
    cdef Py_ssize_t B = sel.shape[0]
    cdef Py_ssize_t H = U.shape[1]
    cdef Py_ssize_t i, k, T, maxT, s0

    maxT = 0
    for i in range(B):
        k = sel[i]
        if tlen[k] > maxT:
            maxT = tlen[k]

    out = np.empty(B)
    HS = np.zeros((maxT, H))
    CS = np.zeros((maxT, H))
    G = np.zeros((maxT, 4 * H))
    alpha = np.empty(maxT)
    ctx = np.empty(H)
    zcat = np.empty(2 * H)
    h_attn = np.empty(H)
    zeros_h = np.zeros(H)
    a = np.empty(4 * H)

    cdef double[:, ::1] HSv = HS, CSv = CS, Gv = G
    cdef double[::1] alphav = alpha, ctxv = ctx, zcatv = zcat, h_attnv = h_attn
    cdef double[::1] zerosv = zeros_h, av = a, outv = out

    with nogil:
        for i in range(B):
            k = sel[i]
            T = tlen[k]
            s0 = starts[inst_of[k]]
            _forward_seq(W, U, b, Xcat[s0:s0 + T], T, HSv, CSv, Gv, zerosv, av)
            outv[i] = _attn_head(HSv, T, CSv[T - 1], Wa, w, w0, act,
                                 alphav, ctxv, zcatv, h_attnv)
    return out
