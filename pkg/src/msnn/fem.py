"""Coarse-scale finite-element layer.

Uniform meshes of linear segments (1D) or bilinear quads (2D, counterclockwise
corner ordering), shape-function evaluation with Kronecker-delta/partition-of-
unity properties, nodal interpolation, Laplacian assembly with full Gauss
integration, Dirichlet elimination, and a direct dense Cholesky solve.

Slit domains are modeled by duplicating the nodes along the open slit so the
field may jump across it; evaluation on the slit line takes a side tag
(+1 above / -1 below).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

_TOL = 1e-10

LINEAR_SEGMENT = "linear-segment"
BILINEAR_QUAD = "bilinear-quad"


@dataclass
class GridSpec:
    """Uniform-grid metadata a mesh was built from (needed for point location)."""
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    n_cells: tuple[int, ...]
    slit: tuple[float, float, float] | None = None  # (x_tip, x_end, y)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((h - l) / n for l, h, n in zip(self.lo, self.hi, self.n_cells))


@dataclass
class Mesh:
    dimension: int
    nodes: np.ndarray                 # (N, dim)
    elements: np.ndarray              # (E, 2) in 1D, (E, 4) ccw in 2D
    dirichlet_nodes: frozenset[int]
    slit_pairs: tuple[tuple[int, int], ...]
    grid: GridSpec

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]


@dataclass
class ShapeBasis:
    """Reference-element basis on the unit segment/square (local coords in [0,1]^d)."""
    element_kind: str

    @classmethod
    def for_mesh(cls, mesh: Mesh) -> "ShapeBasis":
        return cls(LINEAR_SEGMENT if mesh.dimension == 1 else BILINEAR_QUAD)

    def values(self, xi: np.ndarray) -> np.ndarray:
        """Shape-function values at local coords xi, shape (n, nodes_per_elem)."""
        xi = np.atleast_2d(xi)
        if self.element_kind == LINEAR_SEGMENT:
            t = xi[:, 0]
            return np.column_stack([1.0 - t, t])
        s, t = xi[:, 0], xi[:, 1]
        return np.column_stack([(1 - s) * (1 - t), s * (1 - t), s * t, (1 - s) * t])

    def gradients(self, xi: np.ndarray, spacing) -> np.ndarray:
        """Physical-space gradients, shape (n, nodes_per_elem, d)."""
        xi = np.atleast_2d(xi)
        n = xi.shape[0]
        if self.element_kind == LINEAR_SEGMENT:
            h = spacing[0]
            g = np.empty((n, 2, 1))
            g[:, 0, 0] = -1.0 / h
            g[:, 1, 0] = 1.0 / h
            return g
        hx, hy = spacing
        s, t = xi[:, 0], xi[:, 1]
        g = np.empty((n, 4, 2))
        g[:, 0, 0] = -(1 - t) / hx
        g[:, 1, 0] = (1 - t) / hx
        g[:, 2, 0] = t / hx
        g[:, 3, 0] = -t / hx
        g[:, 0, 1] = -(1 - s) / hy
        g[:, 1, 1] = -s / hy
        g[:, 2, 1] = s / hy
        g[:, 3, 1] = (1 - s) / hy
        return g


@dataclass
class CoarseSolution:
    """Nodal coefficient vector bound to a mesh; evaluable field and gradient."""
    mesh: Mesh
    coefficients: np.ndarray          # (N,)

    def evaluate_many(self, points, sides=None) -> np.ndarray:
        return interpolate_many(self, points, sides)

    def gradient_many(self, points, sides=None) -> np.ndarray:
        return interpolate_gradient_many(self, points, sides)


def build_uniform_mesh_1d(a: float, b: float, n_elems: int) -> Mesh:
    """n_elems equal segments on [a, b]; both end nodes are Dirichlet."""
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    if n_elems < 1:
        raise ValueError("need at least one element")
    nodes = np.linspace(a, b, n_elems + 1)[:, None]
    idx = np.arange(n_elems)
    elements = np.column_stack([idx, idx + 1])
    return Mesh(1, nodes, elements, frozenset({0, n_elems}), (),
                GridSpec((float(a),), (float(b),), (int(n_elems),)))


def build_uniform_mesh_2d(x_range, y_range, nx: int, ny: int, slit=None) -> Mesh:
    """Tensor-product quad mesh, optionally cut by a horizontal slit.

    `slit = ((x_start, x_end), y)` must lie along mesh lines.  Nodes strictly
    inside the open slit (x_start < x <= x_end on the slit row) are duplicated;
    elements above the slit reference the duplicates, elements below keep the
    originals.  The slit tip is shared.  All outer-boundary nodes and all slit
    nodes (both copies) are Dirichlet.
    """
    x0, x1 = float(x_range[0]), float(x_range[1])
    y0, y1 = float(y_range[0]), float(y_range[1])
    if not (x0 < x1 and y0 < y1):
        raise ValueError("degenerate domain")
    if nx < 1 or ny < 1:
        raise ValueError("need at least one element per axis")
    hx, hy = (x1 - x0) / nx, (y1 - y0) / ny

    def node_id(i, j):
        return j * (nx + 1) + i

    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    i, j = I.ravel(), J.ravel()
    elements = np.column_stack([node_id(i, j), node_id(i + 1, j),
                                node_id(i + 1, j + 1), node_id(i, j + 1)])

    dirichlet = set()
    for jj in range(ny + 1):
        for ii in range(nx + 1):
            if ii in (0, nx) or jj in (0, ny):
                dirichlet.add(node_id(ii, jj))

    slit_pairs: list[tuple[int, int]] = []
    grid_slit = None
    if slit is not None:
        (sx0, sx1), sy = slit
        scale = max(abs(x1), abs(y1), 1.0)
        j_f = (sy - y0) / hy
        i0_f = (sx0 - x0) / hx
        i1_f = (sx1 - x0) / hx
        if (abs(j_f - round(j_f)) > _TOL * scale or abs(i0_f - round(i0_f)) > _TOL * scale
                or abs(i1_f - round(i1_f)) > _TOL * scale):
            raise ValueError("slit must lie along mesh lines")
        j_s, i_tip, i_end = round(j_f), round(i0_f), round(i1_f)
        if not (0 < j_s < ny and 0 <= i_tip < i_end <= nx):
            raise ValueError("slit must be an interior mesh line segment")

        nodes_list = [nodes]
        dup_of = {}
        for ii in range(i_tip + 1, i_end + 1):
            orig = node_id(ii, j_s)
            dup = nodes.shape[0] + len(slit_pairs)
            dup_of[orig] = dup
            slit_pairs.append((orig, dup))
            nodes_list.append(nodes[orig][None, :])
        nodes = np.concatenate(nodes_list)
        # elements whose bottom edge lies on the slit switch to the duplicates
        for ix in range(i_tip, i_end):
            e = j_s * nx + ix
            for corner in (0, 1):
                ref = elements[e, corner]
                if ref in dup_of:
                    elements[e, corner] = dup_of[ref]
        for ii in range(i_tip, i_end + 1):
            dirichlet.add(node_id(ii, j_s))
        dirichlet.update(dup for _, dup in slit_pairs)
        grid_slit = (x0 + i_tip * hx, x0 + i_end * hx, y0 + j_s * hy)

    return Mesh(2, nodes, elements, frozenset(dirichlet), tuple(slit_pairs),
                GridSpec((x0, y0), (x1, y1), (int(nx), int(ny)), grid_slit))


def _locate_many(mesh: Mesh, points: np.ndarray, sides=None):
    """Element index and local coords for each point.

    Half-open cell convention: a point on an interior grid line belongs to
    the upper/right cell, so nodal evaluation keeps the Kronecker-delta
    property.  Points on the open slit need a side tag.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    grid = mesh.grid
    d = mesh.dimension
    scale = max(max(abs(v) for v in grid.hi), 1.0)
    tol = _TOL * scale

    cell_idx = np.empty((points.shape[0], d), dtype=np.int64)
    xi = np.empty_like(points)
    for k in range(d):
        lo, hi, n = grid.lo[k], grid.hi[k], grid.n_cells[k]
        h = (hi - lo) / n
        x = points[:, k]
        if np.any(x < lo - tol) or np.any(x > hi + tol):
            bad = x[(x < lo - tol) | (x > hi + tol)][0]
            raise ValueError(f"point outside domain: coordinate {bad} not in [{lo}, {hi}]")
        ix = np.floor((x - lo) / h).astype(np.int64)
        np.clip(ix, 0, n - 1, out=ix)
        cell_idx[:, k] = ix
        xi[:, k] = (x - (lo + ix * h)) / h

    if grid.slit is not None:
        x_tip, x_end, y_s = grid.slit
        on_slit = (np.abs(points[:, 1] - y_s) < tol) \
            & (points[:, 0] > x_tip + tol) & (points[:, 0] <= x_end + tol)
        if np.any(on_slit):
            if sides is None:
                raise ValueError("side tag required for points on the open slit")
            s = np.broadcast_to(np.asarray(sides), points.shape[0])
            if np.any(on_slit & (s == 0)):
                raise ValueError("side tag required for points on the open slit")
            j_s = round((y_s - grid.lo[1]) * grid.n_cells[1] / (grid.hi[1] - grid.lo[1]))
            below = on_slit & (s < 0)
            above = on_slit & (s > 0)
            cell_idx[below, 1] = j_s - 1
            xi[below, 1] = 1.0
            cell_idx[above, 1] = j_s
            xi[above, 1] = 0.0

    if d == 1:
        elem = cell_idx[:, 0]
    else:
        elem = cell_idx[:, 1] * grid.n_cells[0] + cell_idx[:, 0]
    np.clip(xi, 0.0, 1.0, out=xi)
    return elem, xi


def shape_values(mesh: Mesh, basis: ShapeBasis | None, x, side=None):
    """Sparse shape-function vector at x: (node_indices, values).

    Nonzeros only for the containing element's nodes; values sum to 1.
    """
    basis = basis or ShapeBasis.for_mesh(mesh)
    sides = None if side is None else np.array([side])
    elem, xi = _locate_many(mesh, np.atleast_2d(x), sides)
    return mesh.elements[elem[0]], basis.values(xi)[0]


def shape_gradients(mesh: Mesh, basis: ShapeBasis | None, x, side=None):
    """Sparse shape-gradient matrix at x: (node_indices, (nodes_per_elem, d)).

    Gradients are element-wise; rows sum to the zero vector.
    """
    basis = basis or ShapeBasis.for_mesh(mesh)
    sides = None if side is None else np.array([side])
    elem, xi = _locate_many(mesh, np.atleast_2d(x), sides)
    return mesh.elements[elem[0]], basis.gradients(xi, mesh.grid.spacing)[0]


def interpolate_many(sol: CoarseSolution, points, sides=None) -> np.ndarray:
    basis = ShapeBasis.for_mesh(sol.mesh)
    elem, xi = _locate_many(sol.mesh, points, sides)
    psi = basis.values(xi)                                 # (n, npe)
    d = sol.coefficients[sol.mesh.elements[elem]]          # (n, npe)
    return np.einsum("na,na->n", psi, d)


def interpolate_gradient_many(sol: CoarseSolution, points, sides=None) -> np.ndarray:
    basis = ShapeBasis.for_mesh(sol.mesh)
    elem, xi = _locate_many(sol.mesh, points, sides)
    dpsi = basis.gradients(xi, sol.mesh.grid.spacing)      # (n, npe, d)
    d = sol.coefficients[sol.mesh.elements[elem]]          # (n, npe)
    return np.einsum("nak,na->nk", dpsi, d)


def interpolate(sol: CoarseSolution, x, side=None) -> float:
    """Field value sum_J Psi_J(x) d_J."""
    sides = None if side is None else np.array([side])
    return float(interpolate_many(sol, np.atleast_2d(x), sides)[0])


def interpolate_gradient(sol: CoarseSolution, x, side=None) -> np.ndarray:
    """Field gradient sum_J grad(Psi_J)(x) d_J."""
    sides = None if side is None else np.array([side])
    return interpolate_gradient_many(sol, np.atleast_2d(x), sides)[0]


def eval_field(fn, points: np.ndarray) -> np.ndarray:
    """Evaluate a user field callable f(x) / f(x, y) on an (n, d) point array."""
    points = np.atleast_2d(points)
    if points.shape[1] == 1:
        vals = fn(points[:, 0])
    else:
        vals = fn(points[:, 0], points[:, 1])
    return np.broadcast_to(np.asarray(vals, dtype=float), (points.shape[0],))


def interpolate_coefficients(mesh: Mesh, target) -> CoarseSolution:
    """Nodal interpolation: d_J = target(x_J)."""
    return CoarseSolution(mesh, eval_field(target, mesh.nodes).copy())


def _gauss_points_1d():
    nodes, wts = np.polynomial.legendre.leggauss(2)
    return (nodes + 1.0) / 2.0, wts / 2.0   # on [0,1]


def solve_poisson_coarse(mesh: Mesh, f, g) -> CoarseSolution:
    """Galerkin solve of -lap(u) = f with u = g on the Dirichlet nodes.

    Full 2x2 Gauss integration per element, Dirichlet rows eliminated,
    symmetric positive-definite system solved by dense Cholesky.
    """
    if not mesh.dirichlet_nodes:
        raise ValueError("mesh has no Dirichlet nodes; the Laplacian system is singular")
    basis = ShapeBasis.for_mesh(mesh)
    spacing = mesh.grid.spacing
    npe = mesh.elements.shape[1]
    n = mesh.n_nodes

    # reference-cell Gauss points (tensor product in 2D)
    q1, w1 = _gauss_points_1d()
    if mesh.dimension == 1:
        qp = q1[:, None]
        qw = w1 * spacing[0]
    else:
        QX, QY = np.meshgrid(q1, q1, indexing="xy")
        qp = np.column_stack([QX.ravel(), QY.ravel()])
        WX, WY = np.meshgrid(w1, w1, indexing="xy")
        qw = (WX * WY).ravel() * spacing[0] * spacing[1]

    psi = basis.values(qp)                    # (q, npe)
    dpsi = basis.gradients(qp, spacing)       # (q, npe, d)
    ke = np.einsum("q,qak,qbk->ab", qw, dpsi, dpsi)   # identical for all elements

    K = np.zeros((n, n))
    rows = np.repeat(mesh.elements, npe, axis=1).ravel()
    cols = np.tile(mesh.elements, (1, npe)).ravel()
    np.add.at(K, (rows, cols), np.tile(ke.ravel(), mesh.n_elements))

    # element-local Gauss point coords: corner 0 plus xi * spacing
    corner0 = mesh.nodes[mesh.elements[:, 0]]             # (E, d)
    gauss_xy = corner0[:, None, :] + qp[None, :, :] * np.asarray(spacing)  # (E, q, d)
    fvals = eval_field(f, gauss_xy.reshape(-1, mesh.dimension)).reshape(mesh.n_elements, -1)
    fe = np.einsum("q,qa,eq->ea", qw, psi, fvals)         # (E, npe)
    F = np.zeros(n)
    np.add.at(F, mesh.elements.ravel(), fe.ravel())

    dir_idx = np.array(sorted(mesh.dirichlet_nodes), dtype=np.int64)
    free_idx = np.setdiff1d(np.arange(n), dir_idx)
    g_d = eval_field(g, mesh.nodes[dir_idx])

    rhs = F[free_idx] - K[np.ix_(free_idx, dir_idx)] @ g_d
    K_ff = K[np.ix_(free_idx, free_idx)]
    del K
    try:
        c, low = scipy.linalg.cho_factor(K_ff, overwrite_a=True, check_finite=False)
        u_f = scipy.linalg.cho_solve((c, low), rhs, check_finite=False)
    except scipy.linalg.LinAlgError as err:
        raise ValueError(f"Laplacian system is singular or indefinite: {err}") from err

    coeffs = np.empty(n)
    coeffs[free_idx] = u_f
    coeffs[dir_idx] = g_d
    return CoarseSolution(mesh, coeffs)


# --- plain-text tabular serialization ------------------------------------
#
# header line with column names, one row per node "index x [y] value
# is_dirichlet", then one row per element listing node indices.  Node and
# element rows are told apart by their column count.

def save_solution(sol: CoarseSolution, path) -> None:
    mesh = sol.mesh
    cols = "index x value is_dirichlet" if mesh.dimension == 1 else "index x y value is_dirichlet"
    with open(path, "w") as fh:
        fh.write(cols + "\n")
        for i in range(mesh.n_nodes):
            coords = " ".join("%.17g" % c for c in mesh.nodes[i])
            fh.write(f"{i} {coords} {'%.17g' % sol.coefficients[i]} "
                     f"{int(i in mesh.dirichlet_nodes)}\n")
        for elem in mesh.elements:
            fh.write(" ".join(str(int(v)) for v in elem) + "\n")


def save_mesh(mesh: Mesh, path) -> None:
    save_solution(CoarseSolution(mesh, np.zeros(mesh.n_nodes)), path)


def load_solution(path) -> CoarseSolution:
    with open(path) as fh:
        header = fh.readline().split()
        dim = 2 if "y" in header else 1
        node_cols = 3 + dim
        node_rows, elem_rows = [], []
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if len(parts) == node_cols:
                node_rows.append(parts)
            else:
                elem_rows.append([int(v) for v in parts])
    nodes = np.array([[float(v) for v in row[1:1 + dim]] for row in node_rows])
    values = np.array([float(row[1 + dim]) for row in node_rows])
    dirichlet = frozenset(i for i, row in enumerate(node_rows) if row[-1] == "1")
    elements = np.array(elem_rows, dtype=np.int64)
    mesh = _rebuild_mesh(dim, nodes, elements, dirichlet)
    return CoarseSolution(mesh, values)


def load_mesh(path) -> Mesh:
    return load_solution(path).mesh


def _rebuild_mesh(dim, nodes, elements, dirichlet) -> Mesh:
    """Recover uniform-grid metadata and slit pairs from node coordinates."""
    uniq = [np.unique(np.round(nodes[:, k], 12)) for k in range(dim)]
    lo = tuple(float(u[0]) for u in uniq)
    hi = tuple(float(u[-1]) for u in uniq)
    n_cells = tuple(len(u) - 1 for u in uniq)

    slit_pairs: list[tuple[int, int]] = []
    slit = None
    n_grid = int(np.prod([c + 1 for c in n_cells]))
    if nodes.shape[0] > n_grid:
        # duplicated coordinates mark the slit; originals come first
        for dup in range(n_grid, nodes.shape[0]):
            match = np.where((np.abs(nodes[:n_grid] - nodes[dup]) < 1e-12).all(axis=1))[0]
            slit_pairs.append((int(match[0]), dup))
        dup_x = nodes[[o for o, _ in slit_pairs], 0]
        y_s = float(nodes[slit_pairs[0][0], 1])
        hx = (hi[0] - lo[0]) / n_cells[0]
        slit = (float(dup_x.min() - hx), float(dup_x.max()), y_s)
    return Mesh(dim, nodes, elements, frozenset(dirichlet), tuple(slit_pairs),
                GridSpec(lo, hi, n_cells, slit))
