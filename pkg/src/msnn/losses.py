"""Loss functionals for the fine-scale network.

Each builder freezes the coarse-scale data (residual targets, coarse
gradients, sources) at the quadrature points and returns an accumulator of
quadratic terms; gradients then flow only through the network.  Variants:

  approx-l2[-residual-free]     squared-L2 mismatch against a residual target
  energy[-residual-free]        Ritz energy of -lap(u) = f with the frozen
                                coarse gradient in the cross term, plus a
                                boundary penalty
  collocation[-residual-free]   mean squared strong-form residual plus a
                                weighted boundary mismatch

The residual-free flavor adds a penalty on the network values at the coarse
mesh nodes so the enhancement never alters coarse nodal values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import fem
from .quadrature import QuadratureRule, nodal_grid

APPROX_L2 = "approx-l2"
APPROX_L2_RF = "approx-l2-residual-free"
ENERGY = "energy"
ENERGY_RF = "energy-residual-free"
COLLOCATION = "collocation"
COLLOCATION_RF = "collocation-residual-free"

VARIANTS = (APPROX_L2, APPROX_L2_RF, ENERGY, ENERGY_RF, COLLOCATION, COLLOCATION_RF)


def is_residual_free(variant: str) -> bool:
    return variant.endswith("residual-free")


@dataclass
class LossSpec:
    variant: str
    alpha_p: float = 100.0    # essential-boundary penalty (energy variants)
    beta_d: float = 1.0       # nodal residual-free penalty
    beta_c: float = 1.0       # collocation boundary weight
    interior_rule: QuadratureRule | None = None
    boundary_rule: QuadratureRule | None = None
    node_points: np.ndarray | None = None   # coarse mesh nodes, (N_P, d)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown loss variant {self.variant!r}")
        for name in ("alpha_p", "beta_d", "beta_c"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")
        if is_residual_free(self.variant):
            if self.node_points is None or len(self.node_points) == 0:
                raise ValueError("residual-free variants need non-empty node_points")


@dataclass
class LossAccumulator:
    terms: list
    spec: LossSpec


class L2MismatchTerm:
    """sum_q w_q (N(x_q) - target_q)^2."""
    order = 0

    def __init__(self, points, weights, target_vals):
        self.points = points
        self.weights = weights
        self.target = target_vals

    def loss_and_cotangents(self, v, g, h):
        r = v - self.target
        return float(np.sum(self.weights * r * r)), 2.0 * self.weights * r, None, None


class QuadraticPenaltyTerm:
    """sum_q c_q N(x_q)^2 with fixed per-point coefficients."""
    order = 0

    def __init__(self, points, coeffs):
        self.points = points
        self.coeffs = np.broadcast_to(np.asarray(coeffs, dtype=float), (len(points),))

    def loss_and_cotangents(self, v, g, h):
        return float(np.sum(self.coeffs * v * v)), 2.0 * self.coeffs * v, None, None


class EnergyInteriorTerm:
    """sum_q w_q ( |grad N|^2 / 2 + grad(u_coarse).grad N - f N )."""
    order = 1

    def __init__(self, points, weights, coarse_grad_vals, f_vals):
        self.points = points
        self.weights = weights
        self.coarse_grad = coarse_grad_vals     # (n, d), frozen
        self.f_vals = f_vals                    # (n,), frozen

    def loss_and_cotangents(self, v, g, h):
        w = self.weights
        loss = float(np.sum(w * (0.5 * np.einsum("nk,nk->n", g, g)
                                 + np.einsum("nk,nk->n", self.coarse_grad, g)
                                 - self.f_vals * v)))
        vbar = -w * self.f_vals
        gbar = w[:, None] * (g + self.coarse_grad)
        return loss, vbar, gbar, None


class CollocationInteriorTerm:
    """mean over points of ( -lap N - lap(u_coarse) - f )^2."""
    order = 2

    def __init__(self, points, lap_coarse_vals, f_vals):
        self.points = points
        self.lap_coarse = lap_coarse_vals
        self.f_vals = f_vals

    def loss_and_cotangents(self, v, g, h):
        n, d = self.points.shape
        lap = np.trace(h, axis1=1, axis2=2)
        r = -lap - self.lap_coarse - self.f_vals
        hbar = np.zeros((n, d, d))
        idx = np.arange(d)
        hbar[:, idx, idx] = (-2.0 / n) * r[:, None]
        return float(np.mean(r * r)), np.zeros(n), None, hbar


def _node_penalty(spec: LossSpec, coeff: float) -> QuadraticPenaltyTerm:
    pts = np.atleast_2d(np.asarray(spec.node_points, dtype=float))
    return QuadraticPenaltyTerm(pts, coeff)


def _check_dim(net, rule: QuadratureRule):
    if net is not None and rule.dimension != net.input_dim:
        raise ValueError(f"rule dimension {rule.dimension} does not match "
                         f"network input dimension {net.input_dim}")


def approx_l2_loss(net, residual_target, spec: LossSpec) -> LossAccumulator:
    """Squared-L2 fit of the network to residual_target = y - u_coarse."""
    if spec.variant not in (APPROX_L2, APPROX_L2_RF):
        raise ValueError(f"spec variant {spec.variant!r} is not an approx-l2 variant")
    rule = spec.interior_rule
    _check_dim(net, rule)
    target_vals = fem.eval_field(residual_target, rule.points)
    terms = [L2MismatchTerm(rule.points, rule.weights, target_vals)]
    if is_residual_free(spec.variant):
        terms.append(_node_penalty(spec, spec.beta_d))
    return LossAccumulator(terms, spec)


def energy_loss(net, coarse: fem.CoarseSolution, f_hat, spec: LossSpec,
                gradient_field=None) -> LossAccumulator:
    """Ritz energy loss; `gradient_field` (e.g. a smoothed recovery) overrides
    the raw element-wise coarse gradient.  The coarse data is frozen."""
    if spec.variant not in (ENERGY, ENERGY_RF):
        raise ValueError(f"spec variant {spec.variant!r} is not an energy variant")
    rule = spec.interior_rule
    _check_dim(net, rule)
    src = gradient_field if gradient_field is not None else coarse
    cgrad = src.gradient_many(rule.points, rule.sides)
    f_vals = fem.eval_field(f_hat, rule.points)
    terms = [EnergyInteriorTerm(rule.points, rule.weights, cgrad, f_vals)]
    if spec.alpha_p > 0:
        if spec.boundary_rule is None:
            raise ValueError("alpha_p > 0 needs a boundary rule")
        br = spec.boundary_rule
        terms.append(QuadraticPenaltyTerm(br.points, 0.5 * spec.alpha_p * br.weights))
    if is_residual_free(spec.variant):
        terms.append(_node_penalty(spec, spec.beta_d))
    return LossAccumulator(terms, spec)


def collocation_loss(net, coarse: fem.CoarseSolution, f_hat, spec: LossSpec,
                     lap_coarse_vals=None) -> LossAccumulator:
    """Strong-form collocation loss.

    For piecewise-linear/bilinear coarse fields lap(u_coarse) vanishes inside
    elements, so the default coarse contribution is zero; pass explicit
    `lap_coarse_vals` to override (e.g. in oracle tests).
    """
    if spec.variant not in (COLLOCATION, COLLOCATION_RF):
        raise ValueError(f"spec variant {spec.variant!r} is not a collocation variant")
    rule = spec.interior_rule
    _check_dim(net, rule)
    f_vals = fem.eval_field(f_hat, rule.points)
    if lap_coarse_vals is None:
        lap_coarse_vals = np.zeros(len(rule.points))
    terms = [CollocationInteriorTerm(rule.points, lap_coarse_vals, f_vals)]
    if spec.beta_c > 0:
        if spec.boundary_rule is None:
            raise ValueError("beta_c > 0 needs a boundary rule")
        bp = spec.boundary_rule.points
        terms.append(QuadraticPenaltyTerm(bp, spec.beta_c / len(bp)))
    if is_residual_free(spec.variant):
        n_p = len(spec.node_points)
        terms.append(_node_penalty(spec, spec.beta_d / n_p))
    return LossAccumulator(terms, spec)


def dirichlet_boundary_rule(bounds, counts_per_axis, slit=None) -> QuadratureRule:
    """Nodal-grid rule over the Dirichlet boundary.

    1D: the two endpoints with unit weights (a point sum).  2D: a trapezoid
    line rule along each box edge, density matching the interior rule's
    per-axis density; a slit contributes both of its faces.
    """
    if np.isscalar(bounds[0]):
        a, b = float(bounds[0]), float(bounds[1])
        return QuadratureRule(
            "nodal-grid", np.array([[a], [b]]), np.array([1.0, 1.0]))
    (x0, x1), (y0, y1) = bounds
    if np.isscalar(counts_per_axis):
        counts = (int(counts_per_axis),) * 2
    else:
        counts = tuple(int(c) for c in counts_per_axis)

    def line(lo, hi, n, fixed, axis):
        t = np.linspace(lo, hi, n)
        h = (hi - lo) / (n - 1)
        w = np.full(n, h)
        w[0] = w[-1] = h / 2.0
        pts = np.empty((n, 2))
        pts[:, axis] = t
        pts[:, 1 - axis] = fixed
        return pts, w

    segs = [line(x0, x1, counts[0], y0, 0), line(x0, x1, counts[0], y1, 0),
            line(y0, y1, counts[1], x0, 1), line(y0, y1, counts[1], x1, 1)]
    sides = [np.zeros(counts[0], dtype=np.int8), np.zeros(counts[0], dtype=np.int8),
             np.zeros(counts[1], dtype=np.int8), np.zeros(counts[1], dtype=np.int8)]
    if slit is not None:
        x_tip, x_end, y_s = slit
        frac = (x_end - x_tip) / (x1 - x0)
        n_s = max(2, int(round((counts[0] - 1) * frac)) + 1)
        for tag in (1, -1):
            pts, w = line(x_tip, x_end, n_s, y_s, 0)
            segs.append((pts, w))
            sides.append(np.full(n_s, tag, dtype=np.int8))
    points = np.concatenate([p for p, _ in segs])
    weights = np.concatenate([w for _, w in segs])
    return QuadratureRule("nodal-grid", points, weights,
                          sides=np.concatenate(sides) if slit is not None else None)
