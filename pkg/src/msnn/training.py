"""Adam minimization of a loss accumulator, and the three-step multi-scale
driver: coarse solve, fine-scale network training, superposition."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import fem, losses, net as nnet
from .quadrature import nodal_grid
from .smoothing import SmoothedGradientField, recover_gradient


@dataclass
class TrainConfig:
    epochs: int
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    log_every: int = 100

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be nonnegative")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise ValueError("beta1/beta2 must lie in (0, 1)")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.log_every < 1:
            raise ValueError("log_every must be positive")


@dataclass
class TraceRecord:
    epoch: int
    loss: float
    l2_error: float | None = None


@dataclass
class TrainTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def epochs(self) -> np.ndarray:
        return np.array([r.epoch for r in self.records])

    def loss_values(self) -> np.ndarray:
        return np.array([r.loss for r in self.records])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "loss", "l2_error"])
            for r in self.records:
                w.writerow([r.epoch, repr(r.loss),
                            "" if r.l2_error is None else repr(r.l2_error)])


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def for_params(cls, params) -> "AdamState":
        return cls([np.zeros_like(p) for p in params],
                   [np.zeros_like(p) for p in params])


def adam_step(params, grads, state: AdamState, config: TrainConfig):
    """Standard bias-corrected Adam update, in place."""
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= config.learning_rate * (m / c1) / (np.sqrt(v / c2) + config.epsilon)
    return params, state


class TrainingDivergence(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


def train(net: nnet.MlpNet, accumulator, config: TrainConfig, error_probe=None):
    """Full-batch Adam for config.epochs iterations.

    Every quadrature point enters every step.  Returns (trained net copy,
    trace); the input net is untouched.  `error_probe(net) -> float` is
    recorded alongside the loss at logged epochs.
    """
    net = net.copy()
    params = nnet.parameters(net)
    state = AdamState.for_params(params)
    trace = TrainTrace()

    def log(epoch, loss):
        err = None if error_probe is None else float(error_probe(net))
        trace.records.append(TraceRecord(epoch, float(loss), err))

    log(0, nnet.loss_value(net, accumulator))
    for epoch in range(1, config.epochs + 1):
        loss, grads = nnet.loss_gradient(net, accumulator)
        if not np.isfinite(loss):
            raise TrainingDivergence(epoch, loss)
        adam_step(params, grads, state, config)
        if epoch % config.log_every == 0 or epoch == config.epochs:
            log(epoch, loss)
    return net, trace


@dataclass
class MultiScaleSolution:
    """Superposition u = u_coarse + N(x), with the pieces kept accessible."""
    case: "object"
    coarse: fem.CoarseSolution
    net: nnet.MlpNet
    trace: TrainTrace
    smoothing: bool

    def coarse_many(self, points, sides=None) -> np.ndarray:
        return self.coarse.evaluate_many(points, sides)

    def fine_many(self, points) -> np.ndarray:
        v, _, _ = nnet.forward(self.net, points, order=0)
        return v

    def total_many(self, points, sides=None) -> np.ndarray:
        return self.coarse_many(points, sides) + self.fine_many(points)

    def coarse_gradient_many(self, points, sides=None) -> np.ndarray:
        return self.coarse.gradient_many(points, sides)

    def fine_gradient_many(self, points) -> np.ndarray:
        _, g, _ = nnet.forward(self.net, points, order=1)
        return g

    def total_gradient_many(self, points, sides=None) -> np.ndarray:
        return self.coarse_gradient_many(points, sides) + self.fine_gradient_many(points)


def build_loss_spec(case, mesh: fem.Mesh, variant=None, alpha_p=100.0, beta_d=1.0,
                    beta_c=1.0, quad_counts=None) -> losses.LossSpec:
    """Case defaults -> a fully populated LossSpec (rules and node points)."""
    variant = variant or case.default_variant
    counts = quad_counts or case.quad_counts
    slit = mesh.grid.slit
    interior = nodal_grid(case.bounds, counts, slit=slit)
    boundary = losses.dirichlet_boundary_rule(case.bounds, counts, slit=slit)
    return losses.LossSpec(variant, alpha_p=alpha_p, beta_d=beta_d, beta_c=beta_c,
                           interior_rule=interior, boundary_rule=boundary,
                           node_points=mesh.nodes)


def solve_coarse(case, mesh: fem.Mesh) -> fem.CoarseSolution:
    """Step I: nodal interpolation for approximation cases, Galerkin solve
    for PDE cases."""
    if case.kind == "approximation":
        return fem.interpolate_coefficients(mesh, case.target)
    return fem.solve_poisson_coarse(mesh, case.source, case.boundary)


def build_accumulator(case, coarse: fem.CoarseSolution, spec: losses.LossSpec,
                      smoothing: bool, network=None) -> losses.LossAccumulator:
    """Step II loss assembly with the coarse solution frozen in."""
    gradient_field = None
    if smoothing and spec.variant in (losses.ENERGY, losses.ENERGY_RF):
        gradient_field = recover_gradient(coarse)
    if spec.variant in (losses.APPROX_L2, losses.APPROX_L2_RF):
        rule = spec.interior_rule

        def residual_target(*coords):
            pts = np.column_stack(coords)
            return fem.eval_field(case.target, pts) - coarse.evaluate_many(pts, None)

        return losses.approx_l2_loss(network, residual_target, spec)
    if spec.variant in (losses.ENERGY, losses.ENERGY_RF):
        return losses.energy_loss(network, coarse, case.source, spec,
                                  gradient_field=gradient_field)
    return losses.collocation_loss(network, coarse, case.source, spec)


def multiscale_solve(case, train_config: TrainConfig | None = None,
                     loss_spec: losses.LossSpec | None = None,
                     mesh: fem.Mesh | None = None,
                     hidden_sizes=None, seed: int = 0,
                     smoothing: bool | None = None,
                     error_probe=None) -> MultiScaleSolution:
    """Hierarchical solve: coarse scale, then one-way fine-scale training,
    then the superposed total solution."""
    mesh = mesh if mesh is not None else case.build_mesh()
    smoothing = case.default_smoothing if smoothing is None else smoothing
    coarse = solve_coarse(case, mesh)
    spec = loss_spec if loss_spec is not None else build_loss_spec(case, mesh)
    network = nnet.init(case.dimension, hidden_sizes or case.net_hidden, seed)
    acc = build_accumulator(case, coarse, spec, smoothing, network)
    config = train_config if train_config is not None else \
        TrainConfig(epochs=case.epochs, seed=seed)
    trained, trace = train(network, acc, config, error_probe=error_probe)
    return MultiScaleSolution(case, coarse, trained, trace, smoothing)
