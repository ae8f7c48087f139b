"""Shared test oracles, independent of the library code paths they check."""

import numpy as np

from adalign.autograd import Tape, Tensor


def finite_difference_grads(loss_fn, params, step=1e-5):
    """Central finite differences of a scalar function w.r.t. each parameter.

    loss_fn takes no arguments and must read the current `.data` of each
    parameter; it is evaluated with entries perturbed one at a time.
    """
    grads = []
    for p in params:
        g = np.zeros_like(p.data)
        flat = p.data.reshape(-1)
        gflat = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            f_plus = float(loss_fn())
            flat[i] = orig - step
            f_minus = float(loss_fn())
            flat[i] = orig
            gflat[i] = (f_plus - f_minus) / (2.0 * step)
        grads.append(g)
    return grads


def relative_error(a, b, floor=1e-6):
    """Elementwise |a-b| / max(|a|, |b|, floor); scalar max over elements."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom))


def tape_grads(loss_fn, params):
    """Run loss_fn under a fresh tape and return grads aligned with params."""
    with Tape() as tape:
        loss = loss_fn()
        gmap = tape.backward(loss)
    return [gmap.for_param(p) for p in params]


def mmd_squared_oracle(fs, ft, sigma):
    """Direct triple-loop biased MMD^2 with an RBF kernel; no shared code."""
    fs = np.asarray(fs, dtype=np.float64)
    ft = np.asarray(ft, dtype=np.float64)
    n_s, n_t = fs.shape[0], ft.shape[0]

    def k(a, b):
        d2 = 0.0
        for v, w in zip(a, b):
            d2 += (v - w) ** 2
        return np.exp(-d2 / (2.0 * sigma * sigma))

    t_ss = sum(k(fs[i], fs[j]) for i in range(n_s) for j in range(n_s)) / (n_s * n_s)
    t_tt = sum(k(ft[i], ft[j]) for i in range(n_t) for j in range(n_t)) / (n_t * n_t)
    t_st = sum(k(fs[i], ft[j]) for i in range(n_s) for j in range(n_t)) / (n_s * n_t)
    return t_ss + t_tt - 2.0 * t_st


def rbf_matrix_oracle(a, b, sigma):
    """Pairwise-loop RBF kernel matrix."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    out = np.zeros((a.shape[0], b.shape[0]))
    for i in range(a.shape[0]):
        for j in range(b.shape[0]):
            d2 = float(np.sum((a[i] - b[j]) ** 2))
            out[i, j] = np.exp(-d2 / (2.0 * sigma * sigma))
    return out


def median_oracle(values):
    """Sort-based median; even-length lists average the two middle values."""
    s = sorted(values)
    n = len(s)
    if n % 2 == 1:
        return s[n // 2]
    return (s[n // 2 - 1] + s[n // 2]) / 2.0


def softmax_ce_oracle(logits, labels):
    """Mean cross-entropy from explicitly normalized softmax rows."""
    logits = np.asarray(logits, dtype=np.float64)
    total = 0.0
    for row, y in zip(logits, labels):
        p = np.exp(row - row.max())
        p = p / p.sum()
        total += -np.log(p[int(y)])
    return total / logits.shape[0]


def make_params(rng, *shapes):
    return [Tensor(rng.uniform(-2.0, 2.0, size=s)) for s in shapes]
