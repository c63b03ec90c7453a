"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``."""

import numpy as np

# relative slack on squared radii so nodes lying exactly on a sphere stay inside
BALL_SLACK = 1e-10


def ball_max(dev, lower, h, x0, radii):
    """Max of ``dev`` over grid nodes in nested balls ``|x - x0| <= radii[k]``.

    ``radii`` must be sorted in decreasing order. Returns ``(osc, counts)``;
    empty balls give ``osc = 0`` and ``count = 0``.
    """
    dev = np.asarray(dev, dtype=float)
    lower = np.asarray(lower, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    radii = np.asarray(radii, dtype=float)
    d = dev.ndim
    n = dev.shape
    osc = np.zeros(radii.size)
    counts = np.zeros(radii.size, dtype=np.int64)
    if radii.size == 0:
        return osc, counts
    rmax = radii[0]
    sl = []
    axes = []
    for i in range(d):
        lo = max(int(np.floor((x0[i] - rmax - lower[i]) / h)) - 1, 0)
        hi = min(int(np.ceil((x0[i] + rmax - lower[i]) / h)) + 2, n[i])
        if hi <= lo:
            return osc, counts
        sl.append(slice(lo, hi))
        axes.append(lower[i] + h * np.arange(lo, hi) - x0[i])
    block = dev[tuple(sl)]
    grids = np.meshgrid(*axes, indexing="ij")
    dist2 = sum(g * g for g in grids)
    for k, r in enumerate(radii):
        mask = dist2 <= r * r * (1 + BALL_SLACK)
        c = int(mask.sum())
        counts[k] = c
        if c:
            osc[k] = float(block[mask].max())
    return osc, counts


def holder_quotient_max(values, points, alpha):
    """``max_{i<j} max_q |v_iq - v_jq| / |x_i - x_j|^alpha`` over distinct points."""
    v = np.asarray(values, dtype=float)
    x = np.asarray(points, dtype=float)
    m = x.shape[0]
    if v.ndim == 1:
        v = v[:, None]
    best = 0.0
    for i in range(m - 1):
        dx = np.sqrt(np.sum((x[i + 1:] - x[i]) ** 2, axis=1))
        dv = np.max(np.abs(v[i + 1:] - v[i]), axis=1)
        ok = dx > 0
        if np.any(ok):
            best = max(best, float(np.max(dv[ok] / dx[ok] ** alpha)))
    return best
