"""Benchmark case registry and error metrics.

Six cases: four function-approximation targets (1D/2D, continuous and
discontinuous) and two PDE cases (a 1D Laplacian with a localization
parameter, and the 2D Poisson problem on a slit square).  The PDE sign
convention is -lap(u) = f_hat throughout; the 1D case's source is the exact
second derivative of its analytic solution u = tanh(s(x-3)).
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import fem
from .quadrature import QuadratureRule, nodal_grid

APPROX_1D_CONT = "approx1d-cont"
APPROX_1D_DISC = "approx1d-disc"
APPROX_2D_CONT = "approx2d-cont"
APPROX_2D_DISC = "approx2d-disc"
LAPLACE_1D = "laplace1d"
POISSON_2D_SLIT = "poisson2d-slit"

CASE_IDS = (APPROX_1D_CONT, APPROX_1D_DISC, APPROX_2D_CONT, APPROX_2D_DISC,
            LAPLACE_1D, POISSON_2D_SLIT)

REFERENCE_MESH_2D = 100   # refined mesh for the slit Poisson reference field


def heaviside(x):
    """Unit step with H(0) = 1 (the jump value is attained at 0)."""
    return np.where(np.asarray(x, dtype=float) >= 0.0, 1.0, 0.0)


@dataclass
class ProblemCase:
    id: str
    kind: str                      # "approximation" | "pde"
    dimension: int
    bounds: tuple                  # (a, b) or ((x0,x1), (y0,y1))
    mesh_elems: tuple[int, ...]
    net_hidden: tuple[int, ...]
    quad_counts: tuple[int, ...]
    epochs: int
    default_variant: str
    default_smoothing: bool
    target: "object" = None        # approximation target y(x)
    source: "object" = None        # PDE source f_hat in -lap(u) = f_hat
    boundary: "object" = None      # Dirichlet data g
    analytic: "object" = None      # exact solution (None for the slit case)
    analytic_grad: "object" = None
    slit: tuple | None = None      # ((x0, x1), y) passed to the mesh builder
    params: dict = field(default_factory=dict)

    def build_mesh(self, elems=None) -> fem.Mesh:
        elems = tuple(elems) if elems is not None else self.mesh_elems
        if self.dimension == 1:
            a, b = self.bounds
            return fem.build_uniform_mesh_1d(a, b, elems[0])
        (x0, x1), (y0, y1) = self.bounds
        return fem.build_uniform_mesh_2d((x0, x1), (y0, y1), elems[0], elems[1],
                                         slit=self.slit)

    def interior_rule(self, counts=None) -> QuadratureRule:
        counts = counts or self.quad_counts
        slit = None
        if self.slit is not None:
            (sx0, sx1), sy = self.slit
            slit = (sx0, sx1, sy)
        return nodal_grid(self.bounds, counts, slit=slit)

    def eval_rule(self) -> QuadratureRule:
        """Error-evaluation grid, denser than the training rule."""
        counts = 1201 if self.dimension == 1 else (161, 161)
        return self.interior_rule(counts)


def get_case(case_id: str, s: float = 5.0) -> ProblemCase:
    if case_id == APPROX_1D_CONT:
        return ProblemCase(
            id=case_id, kind="approximation", dimension=1, bounds=(-1.0, 1.0),
            mesh_elems=(4,), net_hidden=(4, 7), quad_counts=(60,), epochs=18000,
            default_variant="approx-l2-residual-free", default_smoothing=False,
            target=lambda x: 0.5 * x + x ** 3 + np.tanh(10.0 * x),
            analytic=lambda x: 0.5 * x + x ** 3 + np.tanh(10.0 * x),
        )
    if case_id == APPROX_1D_DISC:
        def disc_target(x):
            return (x - 1.0) / 2.0 + heaviside(x)
        return ProblemCase(
            id=case_id, kind="approximation", dimension=1, bounds=(-1.0, 1.0),
            mesh_elems=(3,), net_hidden=(4, 8), quad_counts=(60,), epochs=18000,
            default_variant="approx-l2-residual-free", default_smoothing=False,
            target=disc_target, analytic=disc_target,
        )
    if case_id == APPROX_2D_CONT:
        def cont2d(x, y):
            return 2.0 * (1.0 + y) / ((3.0 + x) ** 2 + (1.0 + y) ** 2)
        return ProblemCase(
            id=case_id, kind="approximation", dimension=2,
            bounds=((-1.0, 1.0), (-1.0, 1.0)),
            mesh_elems=(2, 2), net_hidden=(8, 18, 5), quad_counts=(40, 40),
            epochs=50000,
            default_variant="approx-l2-residual-free", default_smoothing=False,
            target=cont2d, analytic=cont2d,
        )
    if case_id == APPROX_2D_DISC:
        def disc2d(x, y):
            return heaviside(np.abs(x) + y) - (x + y) / 2.0
        return ProblemCase(
            id=case_id, kind="approximation", dimension=2,
            bounds=((-1.0, 1.0), (-1.0, 1.0)),
            mesh_elems=(3, 3), net_hidden=(8, 25, 10, 5), quad_counts=(40, 40),
            epochs=100000,
            default_variant="approx-l2-residual-free", default_smoothing=False,
            target=disc2d, analytic=disc2d,
        )
    if case_id == LAPLACE_1D:
        if s <= 0:
            raise ValueError("localization parameter s must be positive")

        def u_exact(x):
            return np.tanh(s * (x - 3.0))

        def du_exact(x):
            return s / np.cosh(s * (x - 3.0)) ** 2

        def f_hat(x):
            # -u'' of the analytic solution
            z = s * (x - 3.0)
            return 2.0 * s * s * np.tanh(z) / np.cosh(z) ** 2

        return ProblemCase(
            id=case_id, kind="pde", dimension=1, bounds=(0.0, 6.0),
            mesh_elems=(10,), net_hidden=(4, 8, 5), quad_counts=(301,),
            epochs=28000,
            default_variant="energy", default_smoothing=True,
            source=f_hat, boundary=u_exact, analytic=u_exact,
            analytic_grad=du_exact, params={"s": float(s)},
        )
    if case_id == POISSON_2D_SLIT:
        # smoothing defaults OFF here: the nodal-averaged coupling's
        # consistency error exceeds the 8x8 coarse error on this domain
        return ProblemCase(
            id=case_id, kind="pde", dimension=2,
            bounds=((-1.0, 1.0), (-1.0, 1.0)),
            mesh_elems=(8, 8), net_hidden=(10, 15, 25, 15, 10),
            quad_counts=(151, 151), epochs=220000,
            default_variant="energy", default_smoothing=False,
            source=lambda x, y: np.ones_like(np.asarray(x, dtype=float)),
            boundary=lambda x, y: np.zeros_like(np.asarray(x, dtype=float)),
            slit=((0.0, 1.0), 0.0),
        )
    raise ValueError(f"unknown case id {case_id!r}; known: {', '.join(CASE_IDS)}")


def l2_error(field_a, field_b, eval_rule: QuadratureRule, relative: bool = True) -> float:
    """sqrt(int (a-b)^2) / sqrt(int b^2); fields take (points, sides) arrays."""
    a = field_a(eval_rule.points, eval_rule.sides)
    b = field_b(eval_rule.points, eval_rule.sides)
    w = eval_rule.weights
    err = float(np.sqrt(np.sum(w * (a - b) ** 2)))
    if not relative:
        return err
    ref = float(np.sqrt(np.sum(w * b * b)))
    if ref == 0.0:
        raise ValueError("relative error undefined against a zero-norm reference")
    return err / ref


def as_field(fn):
    """Wrap a plain f(x)/f(x, y) callable into the (points, sides) signature."""
    def wrapped(points, sides=None):
        return fem.eval_field(fn, points)
    return wrapped


@dataclass
class ErrorReport:
    coarse_relative_l2: float
    fine_vs_residual_relative_l2: float
    total_relative_l2: float
    max_pointwise: float
    eval_grid: str


def error_report(solution, exact_field, eval_rule: QuadratureRule) -> ErrorReport:
    """Errors of the coarse, fine (against the residual) and total fields."""
    pts, sides, w = eval_rule.points, eval_rule.sides, eval_rule.weights
    exact = exact_field(pts, sides)
    coarse = solution.coarse_many(pts, sides)
    fine = solution.fine_many(pts)
    total = coarse + fine

    def rel(err_sq, ref_sq):
        if ref_sq == 0.0:
            raise ValueError("relative error undefined against a zero-norm reference")
        return float(np.sqrt(err_sq / ref_sq))

    norm_exact = float(np.sum(w * exact * exact))
    residual = exact - coarse
    norm_residual = float(np.sum(w * residual * residual))
    grid = "x".join(str(c) for c in (
        (len(pts),) if eval_rule.dimension == 1 else
        (len(np.unique(pts[:, 0])), len(np.unique(pts[:, 1])))))
    return ErrorReport(
        coarse_relative_l2=rel(float(np.sum(w * residual ** 2)), norm_exact),
        fine_vs_residual_relative_l2=rel(float(np.sum(w * (fine - residual) ** 2)),
                                         norm_residual),
        total_relative_l2=rel(float(np.sum(w * (total - exact) ** 2)), norm_exact),
        max_pointwise=float(np.max(np.abs(total - exact))),
        eval_grid=grid,
    )


def default_cache_dir() -> Path:
    env = os.environ.get("MSNN_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "msnn"


def reference_poisson_slit(cache_dir=None, n_elems: int = REFERENCE_MESH_2D) -> fem.CoarseSolution:
    """Refined (100x100 by default) solve of the slit Poisson case, cached to disk."""
    cache_dir = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    cache_file = cache_dir / f"poisson2d_slit_ref_{n_elems}x{n_elems}.txt"
    if cache_file.exists():
        return fem.load_solution(cache_file)
    case = get_case(POISSON_2D_SLIT)
    mesh = case.build_mesh((n_elems, n_elems))
    sol = fem.solve_poisson_coarse(mesh, case.source, case.boundary)
    cache_dir.mkdir(parents=True, exist_ok=True)
    fem.save_solution(sol, cache_file)
    return sol
