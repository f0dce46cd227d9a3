"""Numerical integration rules used by every loss functional.

Three backends: cell-based Gauss-Legendre quadrature, equally spaced nodal
grids with trapezoid weights, and uniform Monte Carlo sampling.  All rules
are plain point/weight sets over a box domain; integration is a weighted sum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

CELL_GAUSS = "cell-gauss"
NODAL_GRID = "nodal-grid"
MONTE_CARLO = "monte-carlo"

_TOL = 1e-12


@dataclass
class QuadratureRule:
    kind: str
    points: np.ndarray            # (n, d)
    weights: np.ndarray           # (n,), positive
    sides: np.ndarray | None = None   # per-point slit tag (+1 above / -1 below / 0)
    cells_per_dim: tuple[int, ...] | None = None
    points_per_dim: int | None = None
    det_jacobian: float | None = None
    seed: int | None = None

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]


def _normalize_bounds(domain) -> list[tuple[float, float]]:
    """Accept (a, b) for 1D or ((x0,x1), (y0,y1)) for 2D."""
    if np.isscalar(domain[0]):
        bounds = [(float(domain[0]), float(domain[1]))]
    else:
        bounds = [(float(lo), float(hi)) for lo, hi in domain]
    for lo, hi in bounds:
        if not lo < hi:
            raise ValueError(f"degenerate domain axis [{lo}, {hi}]")
    return bounds


def _tensor_points(axes_pts, axes_wts):
    """Tensor product of per-axis points/weights, x varying fastest."""
    if len(axes_pts) == 1:
        return axes_pts[0][:, None], axes_wts[0]
    xs, ys = axes_pts
    wx, wy = axes_wts
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    WX, WY = np.meshgrid(wx, wy, indexing="xy")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    return pts, (WX * WY).ravel()


def gauss_cells(domain, cells_per_dim, points_per_dim: int) -> QuadratureRule:
    """Tensor-product Gauss-Legendre rule on a uniform cell decomposition.

    `points_per_dim` in 1..5 gives degree-(2p-1) exactness per cell.
    """
    if not 1 <= points_per_dim <= 5:
        raise ValueError(f"unsupported Gauss order {points_per_dim}; expected 1..5")
    bounds = _normalize_bounds(domain)
    d = len(bounds)
    if np.isscalar(cells_per_dim):
        cells = (int(cells_per_dim),) * d
    else:
        cells = tuple(int(c) for c in cells_per_dim)
    if any(c < 1 for c in cells):
        raise ValueError("need at least one cell per axis")

    nodes, wts = np.polynomial.legendre.leggauss(points_per_dim)
    axes_pts, axes_wts = [], []
    det_j = 1.0
    for (lo, hi), nc in zip(bounds, cells):
        h = (hi - lo) / nc
        det_j *= h / 2.0
        starts = lo + h * np.arange(nc)
        # map reference [-1,1] points into every cell
        pts = (starts[:, None] + (nodes[None, :] + 1.0) * (h / 2.0)).ravel()
        ws = np.tile(wts * (h / 2.0), nc)
        axes_pts.append(pts)
        axes_wts.append(ws)
    points, weights = _tensor_points(axes_pts, axes_wts)
    return QuadratureRule(CELL_GAUSS, points, weights,
                          cells_per_dim=cells, points_per_dim=points_per_dim,
                          det_jacobian=det_j)


def nodal_grid(domain, counts_per_dim, slit=None) -> QuadratureRule:
    """Equally spaced grid including endpoints, composite-trapezoid weights.

    `slit = (x_tip, x_end, y)` splits points lying on the open slit segment
    into an above/below pair with half weight each, so no point straddles
    the field discontinuity.
    """
    bounds = _normalize_bounds(domain)
    d = len(bounds)
    if np.isscalar(counts_per_dim):
        counts = (int(counts_per_dim),) * d
    else:
        counts = tuple(int(c) for c in counts_per_dim)
    if any(c < 2 for c in counts):
        raise ValueError("nodal grid needs at least 2 points per axis")

    axes_pts, axes_wts = [], []
    for (lo, hi), n in zip(bounds, counts):
        h = (hi - lo) / (n - 1)
        w = np.full(n, h)
        w[0] = w[-1] = h / 2.0
        axes_pts.append(np.linspace(lo, hi, n))
        axes_wts.append(w)
    points, weights = _tensor_points(axes_pts, axes_wts)

    sides = None
    if slit is not None:
        if d != 2:
            raise ValueError("slit tagging only applies to 2D rules")
        x_tip, x_end, y_s = (float(v) for v in slit)
        scale = max(abs(hi) for _, hi in bounds) + 1.0
        on_slit = (np.abs(points[:, 1] - y_s) < _TOL * scale) \
            & (points[:, 0] > x_tip + _TOL * scale) \
            & (points[:, 0] <= x_end + _TOL * scale)
        if np.any(on_slit):
            keep_p, keep_w = points[~on_slit], weights[~on_slit]
            split_p, split_w = points[on_slit], weights[on_slit]
            points = np.concatenate([keep_p, split_p, split_p])
            weights = np.concatenate([keep_w, split_w / 2.0, split_w / 2.0])
            sides = np.concatenate([
                np.zeros(len(keep_p), dtype=np.int8),
                np.ones(len(split_p), dtype=np.int8),
                -np.ones(len(split_p), dtype=np.int8),
            ])
    return QuadratureRule(NODAL_GRID, points, weights, sides=sides)


def monte_carlo(domain, n: int, seed: int) -> QuadratureRule:
    """Uniform i.i.d. sampling, weights |domain|/n, deterministic per seed."""
    if n < 1:
        raise ValueError("need at least one sample")
    bounds = _normalize_bounds(domain)
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    points = rng.uniform(lo, hi, size=(n, len(bounds)))
    volume = float(np.prod(hi - lo))
    weights = np.full(n, volume / n)
    return QuadratureRule(MONTE_CARLO, points, weights, seed=seed)


def integrate(rule: QuadratureRule, f) -> float:
    """Weighted sum of f over the rule's points.

    f is vectorized: f(x) in 1D, f(x, y) in 2D, with array arguments.
    numpy's pairwise summation keeps the reduction deterministic.
    """
    if rule.dimension == 1:
        vals = f(rule.points[:, 0])
    else:
        vals = f(rule.points[:, 0], rule.points[:, 1])
    vals = np.broadcast_to(np.asarray(vals, dtype=float), rule.weights.shape)
    return float(np.sum(rule.weights * vals))
