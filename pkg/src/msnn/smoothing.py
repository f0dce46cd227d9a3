"""Gradient recovery by volume-weighted nodal averaging.

The element-wise coarse gradient is discontinuous across element boundaries,
which destabilizes fine-scale training near sharp features.  Averaging the
per-element gradients at each node and re-interpolating with the shape
functions yields a C0 field.  Slit sides average independently because node
adjacency follows element connectivity (duplicated nodes only see same-side
elements).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fem import CoarseSolution, Mesh, ShapeBasis, _locate_many


@dataclass
class SmoothedGradientField:
    mesh: Mesh
    nodal_gradients: np.ndarray      # (N, d)

    def gradient_many(self, points, sides=None) -> np.ndarray:
        basis = ShapeBasis.for_mesh(self.mesh)
        elem, xi = _locate_many(self.mesh, points, sides)
        psi = basis.values(xi)                                   # (n, npe)
        g = self.nodal_gradients[self.mesh.elements[elem]]       # (n, npe, d)
        return np.einsum("na,nak->nk", psi, g)

    def gradient(self, x, side=None) -> np.ndarray:
        sides = None if side is None else np.array([side])
        return self.gradient_many(np.atleast_2d(x), sides)[0]


def recover_gradient(coarse: CoarseSolution) -> SmoothedGradientField:
    """Nodal gradient = volume-weighted average of the adjacent elements'
    gradients evaluated at the node (uniform meshes: equal volumes)."""
    mesh = coarse.mesh
    basis = ShapeBasis.for_mesh(mesh)
    npe = mesh.elements.shape[1]
    # local coords of each element corner
    corners = np.array([[0.0], [1.0]]) if mesh.dimension == 1 else \
        np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    dpsi = basis.gradients(corners, mesh.grid.spacing)           # (npe, npe, d)

    dvals = coarse.coefficients[mesh.elements]                   # (E, npe)
    # gradient of the element field at corner a: sum_b d_b dpsi[a, b, :]
    corner_grads = np.einsum("eb,abk->eak", dvals, dpsi)         # (E, npe, d)

    acc = np.zeros((mesh.n_nodes, mesh.dimension))
    cnt = np.zeros(mesh.n_nodes)
    np.add.at(acc, mesh.elements.ravel(), corner_grads.reshape(-1, mesh.dimension))
    np.add.at(cnt, mesh.elements.ravel(), 1.0)
    acc /= cnt[:, None]
    return SmoothedGradientField(mesh, acc)
