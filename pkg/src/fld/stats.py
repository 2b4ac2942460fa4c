"""Small statistics helpers shared across modules: an empirical quantile
with the midpoint convention, rank correlations for trend tests, and a
2-component PCA for manifold exports."""

from __future__ import annotations

import numpy as np


def quantile_midpoint(values: np.ndarray, q: float) -> float:
    """Empirical quantile with midpoint interpolation at exact rank boundaries.

    With sorted x_1..x_n and h = q*n: when h lands on an integer below n the
    result is (x_h + x_{h+1}) / 2, otherwise x_ceil(h). q = 1 gives the max;
    q = 0.5 on {1,2,3,4} gives 2.5.
    """
    if not 0.0 < q <= 1.0:
        raise ValueError(f"quantile must be in (0, 1], got {q}")
    x = np.sort(np.asarray(values, dtype=np.float64).reshape(-1))
    n = x.size
    if n == 0:
        raise ValueError("empty sample")
    h = q * n
    lo = int(np.floor(h + 1e-12))
    if abs(h - lo) < 1e-12 and lo < n:
        return float(0.5 * (x[lo - 1] + x[lo]))
    return float(x[min(int(np.ceil(h - 1e-12)), n) - 1])


def kendall_tau(x: np.ndarray, y: np.ndarray) -> float:
    """Kendall's tau-a over all pairs (ties contribute zero)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = x.size
    if n != y.size or n < 2:
        raise ValueError("need two equal-length series with n >= 2")
    sx = np.sign(x[:, None] - x[None, :])
    sy = np.sign(y[:, None] - y[None, :])
    iu = np.triu_indices(n, k=1)
    return float(np.sum(sx[iu] * sy[iu]) / (n * (n - 1) / 2))


def _ranks(x: np.ndarray) -> np.ndarray:
    # average ranks for ties
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.size)
    sorted_x = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sorted_x[j + 1] == sorted_x[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman_rho(x: np.ndarray, y: np.ndarray) -> float:
    """Spearman rank correlation (Pearson correlation of average ranks)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.size != y.size or x.size < 2:
        raise ValueError("need two equal-length series with n >= 2")
    rx = _ranks(x)
    ry = _ranks(y)
    rx -= rx.mean()
    ry -= ry.mean()
    denom = np.sqrt(np.sum(rx * rx) * np.sum(ry * ry))
    if denom == 0.0:
        return 0.0
    return float(np.sum(rx * ry) / denom)


def pca_project_2d(points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project rows of ``points`` onto their top two principal components.

    Returns (projected (n, 2), components (2, d)). Degenerate directions
    (zero singular value, e.g. identical points) map to zeros.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] < 1:
        raise ValueError("expected a non-empty (n, d) point matrix")
    centered = points - points.mean(axis=0)
    _, svals, vt = np.linalg.svd(centered, full_matrices=False)
    comps = np.zeros((2, points.shape[1]))
    take = min(2, vt.shape[0])
    for i in range(take):
        if svals[i] > 1e-12 * max(1.0, svals[0]):
            comps[i] = vt[i]
    return centered @ comps.T, comps
