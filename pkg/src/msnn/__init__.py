"""Multi-scale solvers: a finite-element coarse scale superposed with a
neural-network fine-scale enhancement trained by variational or collocation
losses."""

from . import fem, losses, net, problems, quadrature, smoothing, training
from .fem import (CoarseSolution, Mesh, ShapeBasis, build_uniform_mesh_1d,
                  build_uniform_mesh_2d, interpolate, interpolate_coefficients,
                  interpolate_gradient, shape_gradients, shape_values,
                  solve_poisson_coarse)
from .losses import LossSpec
from .net import MlpNet, NetEval, count_params, evaluate, loss_gradient
from .problems import ErrorReport, ProblemCase, get_case, l2_error
from .quadrature import QuadratureRule, gauss_cells, integrate, monte_carlo, nodal_grid
from .smoothing import SmoothedGradientField, recover_gradient
from .training import (MultiScaleSolution, TrainConfig, TrainTrace,
                       TrainingDivergence, adam_step, multiscale_solve, train)

__version__ = "0.1.0"
