"""Finite-difference gradients of an MLP's loss, evaluated in float64 numpy."""

import numpy as np

from lowpsim.train import Linear, ReLU


def loss64(params, kinds, x, y):
    h = np.asarray(x, dtype=np.float64)
    it = iter(params)
    for kind in kinds:
        if kind == "linear":
            w, b = next(it), next(it)
            h = h @ w.T + b
        else:
            h = np.maximum(h, 0.0)
    h = h - h.max(axis=1, keepdims=True)
    logp = h - np.log(np.exp(h).sum(axis=1, keepdims=True))
    return -logp[np.arange(len(y)), y].mean()


def numeric_gradients(model, x, y, step=1e-5):
    kinds = ["linear" if isinstance(l, Linear) else "relu" for l in model.layers if isinstance(l, (Linear, ReLU))]
    params = [p.numpy().astype(np.float64) for p in model.parameters()]
    out = []
    for p in params:
        g = np.zeros_like(p)
        for idx in np.ndindex(p.shape):
            keep = p[idx]
            p[idx] = keep + step
            hi = loss64(params, kinds, x, y)
            p[idx] = keep - step
            lo = loss64(params, kinds, x, y)
            p[idx] = keep
            g[idx] = (hi - lo) / (2 * step)
        out.append(g)
    return out


def relative_error(a, b) -> float:
    a, b = np.asarray(a, np.float64), np.asarray(b, np.float64)
    scale = max(np.linalg.norm(a), np.linalg.norm(b), 1e-12)
    return float(np.linalg.norm(a - b) / scale)
