import numpy as np
import pytest

from msnn import fem, problems
from msnn.problems import (CASE_IDS, as_field, error_report, get_case,
                           heaviside, l2_error, reference_poisson_slit)
from msnn.quadrature import nodal_grid


def test_registry_covers_six_cases():
    assert len(CASE_IDS) == 6
    for cid in CASE_IDS:
        case = get_case(cid)
        assert case.id == cid
        assert case.kind in ("approximation", "pde")


def test_unknown_case_rejected():
    with pytest.raises(ValueError):
        get_case("not-a-case")


def test_case_default_configurations():
    c = get_case("approx1d-cont")
    assert (c.mesh_elems, c.net_hidden, c.quad_counts, c.epochs) == \
        ((4,), (4, 7), (60,), 18000)
    c = get_case("approx1d-disc")
    assert (c.mesh_elems, c.net_hidden, c.epochs) == ((3,), (4, 8), 18000)
    c = get_case("approx2d-cont")
    assert (c.mesh_elems, c.net_hidden, c.quad_counts, c.epochs) == \
        ((2, 2), (8, 18, 5), (40, 40), 50000)
    c = get_case("approx2d-disc")
    assert (c.mesh_elems, c.net_hidden, c.epochs) == ((3, 3), (8, 25, 10, 5), 100000)
    c = get_case("laplace1d")
    assert (c.mesh_elems, c.net_hidden, c.quad_counts, c.epochs) == \
        ((10,), (4, 8, 5), (301,), 28000)
    c = get_case("poisson2d-slit")
    assert (c.mesh_elems, c.net_hidden, c.quad_counts, c.epochs) == \
        ((8, 8), (10, 15, 25, 15, 10), (151, 151), 220000)


def test_heaviside_jump_value_at_zero():
    assert heaviside(0.0) == 1.0
    assert heaviside(-1e-15) == 0.0
    assert list(heaviside(np.array([-1.0, 0.0, 2.0]))) == [0.0, 1.0, 1.0]


def test_laplace1d_analytic_values():
    case = get_case("laplace1d", s=5.0)
    assert case.analytic(np.array([3.0]))[0] == pytest.approx(0.0, abs=1e-15)
    assert case.analytic(np.array([0.0]))[0] == pytest.approx(-np.tanh(15.0), abs=1e-15)
    # boundary data matches the analytic solution at both ends exactly
    assert case.boundary(np.array([0.0]))[0] == pytest.approx(-np.tanh(15.0), abs=1e-12)
    assert case.boundary(np.array([6.0]))[0] == pytest.approx(np.tanh(15.0), abs=1e-12)


def test_laplace1d_rejects_nonpositive_s():
    with pytest.raises(ValueError):
        get_case("laplace1d", s=0.0)


def test_laplace1d_source_is_negative_second_derivative():
    # sympy oracle: f_hat must equal -u'' of the analytic solution
    import sympy as sp
    x, s = sp.symbols("x s")
    u = sp.tanh(s * (x - 3))
    f_sym = sp.lambdify((x, s), -sp.diff(u, x, 2), "numpy")
    for s_val in (5.0, 12.0):
        case = get_case("laplace1d", s=s_val)
        pts = np.random.default_rng(0).uniform(0.0, 6.0, size=1000)
        assert np.allclose(case.source(pts), f_sym(pts, s_val), atol=1e-10)


def test_approx_targets_at_reference_points():
    disc = get_case("approx1d-disc")
    assert disc.target(np.array([-1.0]))[0] == pytest.approx(-1.0)
    assert disc.target(np.array([1.0]))[0] == pytest.approx(1.0)
    cont2 = get_case("approx2d-cont")
    assert cont2.target(np.array([-1.0]), np.array([-1.0]))[0] == pytest.approx(0.0)
    disc2 = get_case("approx2d-disc")
    # H(|x|+y) jumps along y = -|x|; at the origin the jump value is attained
    assert disc2.target(np.array([0.0]), np.array([0.0]))[0] == pytest.approx(1.0)


def test_poisson_slit_boundary_zero_everywhere():
    case = get_case("poisson2d-slit")
    xs = np.linspace(-1, 1, 13)
    assert np.all(case.boundary(xs, np.ones_like(xs)) == 0.0)
    assert np.all(case.boundary(xs, np.zeros_like(xs)) == 0.0)


def test_l2_error_basic():
    rule = nodal_grid((-1.0, 1.0), 101)
    one = as_field(lambda x: np.ones_like(x))
    zero = as_field(lambda x: np.zeros_like(x))
    offset = as_field(lambda x: np.ones_like(x) + 0.1)
    assert l2_error(one, one, rule) == 0.0
    assert l2_error(zero, one, rule) == pytest.approx(1.0, rel=1e-12)
    assert l2_error(offset, one, rule) == pytest.approx(0.1, rel=1e-10)


def test_l2_error_zero_reference_rejected():
    rule = nodal_grid((-1.0, 1.0), 11)
    zero = as_field(lambda x: np.zeros_like(x))
    with pytest.raises(ValueError):
        l2_error(zero, zero, rule)
    assert l2_error(zero, zero, rule, relative=False) == 0.0


def test_reference_solve_cached_and_sane(tmp_path):
    # scaled-down refined solve exercises the cache path and field properties
    sol = reference_poisson_slit(cache_dir=tmp_path, n_elems=20)
    cache_files = list(tmp_path.glob("*.txt"))
    assert len(cache_files) == 1
    stamp = cache_files[0].stat().st_mtime_ns
    again = reference_poisson_slit(cache_dir=tmp_path, n_elems=20)
    assert cache_files[0].stat().st_mtime_ns == stamp   # loaded, not recomputed
    assert np.array_equal(sol.coefficients, again.coefficients)

    mesh = sol.mesh
    d_idx = sorted(mesh.dirichlet_nodes)
    assert np.allclose(sol.coefficients[d_idx], 0.0)
    free = np.setdiff1d(np.arange(mesh.n_nodes), d_idx)
    assert np.all(sol.coefficients[free] > 0.0)   # maximum principle
    # the slit depresses the field on the right half
    left = fem.interpolate(sol, [-0.5, 0.0])
    right = fem.interpolate(sol, [0.5, 0.05])
    assert left > right


def test_error_report_fields():
    case = get_case("approx1d-cont")
    from msnn.training import TrainConfig, multiscale_solve
    sol = multiscale_solve(case, train_config=TrainConfig(epochs=0), seed=0)
    rep = error_report(sol, as_field(case.target), case.eval_rule())
    assert rep.total_relative_l2 == pytest.approx(rep.coarse_relative_l2)
    assert rep.fine_vs_residual_relative_l2 == pytest.approx(1.0)  # zero fine field
    assert rep.max_pointwise > 0
    assert rep.eval_grid == "1201"
