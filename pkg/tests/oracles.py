"""Independent brute-force oracles used by the test suite.

Everything here is deliberately written with plain Python loops and no
imports from the package's numeric layers, so the tests compare two
implementations that share nothing.
"""

import math


def naive_matmul(a, b):
    """Triple-loop matrix multiply over lists of lists."""
    rows, inner, cols = len(a), len(b), len(b[0])
    out = [[0.0] * cols for _ in range(rows)]
    for i in range(rows):
        for j in range(cols):
            s = 0.0
            for k in range(inner):
                s += a[i][k] * b[k][j]
            out[i][j] = s
    return out


def _sig(x):
    return 1.0 / (1.0 + math.exp(-x))


def scalar_gru_cell(x_t, h_prev, p):
    """One GRU step for a single example, scalar loops only.

    ``p`` maps the nine parameter names (W_z, ..., b_h) to lists of lists /
    lists, matching the package's gate convention h' = (1-z)h + z*h_tilde.
    """
    H = len(h_prev)
    d = len(x_t)

    def affine(W, U, b):
        out = []
        for j in range(H):
            s = b[j]
            for i in range(d):
                s += x_t[i] * W[i][j]
            for i in range(H):
                s += h_prev[i] * U[i][j]
            out.append(s)
        return out

    z = [_sig(v) for v in affine(p["W_z"], p["U_z"], p["b_z"])]
    r = [_sig(v) for v in affine(p["W_r"], p["U_r"], p["b_r"])]
    rh = [r[i] * h_prev[i] for i in range(H)]
    h_tilde = []
    for j in range(H):
        s = p["b_h"][j]
        for i in range(d):
            s += x_t[i] * p["W_h"][i][j]
        for i in range(H):
            s += rh[i] * p["U_h"][i][j]
        h_tilde.append(math.tanh(s))
    return [(1 - z[j]) * h_prev[j] + z[j] * h_tilde[j] for j in range(H)]


def scalar_bigru(seq, fwd, bwd):
    """seq: list over time of per-example input lists; returns [T][2H]."""
    T = len(seq)
    H = len(fwd["b_z"])
    h = [0.0] * H
    fwd_states = []
    for t in range(T):
        h = scalar_gru_cell(seq[t], h, fwd)
        fwd_states.append(h)
    h = [0.0] * H
    bwd_states = [None] * T
    for t in range(T - 1, -1, -1):
        h = scalar_gru_cell(seq[t], h, bwd)
        bwd_states[t] = h
    return [fwd_states[t] + bwd_states[t] for t in range(T)]


def brute_force_metrics(units):
    """(strict, macro_p, macro_r, macro_f1, micro_p, micro_r, micro_f1)
    over (gold_set, pred_set) pairs, computed longhand."""
    n = len(units)
    strict = sum(1 for gold, pred in units if gold == pred) / n

    p_vals, r_vals = [], []
    for gold, pred in units:
        hit = len(gold & pred)
        if pred:
            p_vals.append(hit / len(pred))
        else:
            p_vals.append(1.0 if not gold else 0.0)
        if gold:
            r_vals.append(hit / len(gold))
        else:
            r_vals.append(1.0 if not pred else 0.0)
    ma_p = sum(p_vals) / n
    ma_r = sum(r_vals) / n
    ma_f1 = 0.0 if ma_p + ma_r == 0 else 2 * ma_p * ma_r / (ma_p + ma_r)

    hits = sum(len(g & p) for g, p in units)
    preds = sum(len(p) for _, p in units)
    golds = sum(len(g) for g, _ in units)
    mi_p = hits / preds if preds else 0.0
    mi_r = hits / golds if golds else 0.0
    mi_f1 = 0.0 if mi_p + mi_r == 0 else 2 * mi_p * mi_r / (mi_p + mi_r)
    return strict, ma_p, ma_r, ma_f1, mi_p, mi_r, mi_f1
