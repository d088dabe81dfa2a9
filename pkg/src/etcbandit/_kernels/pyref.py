"""Numpy reference implementation of the elliptope ascent kernel."""

import numpy as np


def _objective(band, half_bw, v):
    m = v.shape[0]
    c = half_bw
    out = np.zeros_like(v)
    for d in range(-c, c + 1):
        lo, hi = max(0, -d), m - max(0, d)
        if hi <= lo:
            continue
        out[lo:hi] += band[lo:hi, d + c, None] * v[lo + d:hi + d]
    return float(np.einsum("ij,ij->", v, out))


def ascent(band, half_bw, v, tol, max_sweeps):
    """Cycle v_i <- normalize(sum_{j != i} W_ij v_j) in place.

    Returns (objective, sweeps, converged). The per-sweep gain is tracked
    incrementally (each update adds 2 * (|g| - g . v_i_old)); gains decay
    geometrically, so the stop rule extrapolates the remaining tail
    gain / (1 - ratio) and compares that against the tolerance. The final
    objective is recomputed exactly.
    """
    m = v.shape[0]
    c = half_bw
    obj = _objective(band, half_bw, v)
    converged = False
    sweeps = 0
    prev_gain = np.inf
    for sweeps in range(1, max_sweeps + 1):
        gain = 0.0
        for i in range(m):
            lo, hi = max(0, i - c), min(m, i + c + 1)
            g = band[i, lo - i + c:hi - i + c] @ v[lo:hi]
            g -= band[i, c] * v[i]
            norm = float(np.linalg.norm(g))
            if norm > 0.0:
                gain += 2.0 * (norm - float(g @ v[i]))
                v[i] = g / norm
        obj += gain
        ratio = gain / prev_gain if prev_gain > 0.0 else 0.9999
        ratio = min(max(ratio, 0.0), 0.9999)
        if gain / (1.0 - ratio) <= tol * max(1.0, abs(obj)):
            converged = True
            break
        prev_gain = gain
    return _objective(band, half_bw, v), sweeps, converged
