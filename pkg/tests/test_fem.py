import numpy as np
import pytest

from msnn.fem import (CoarseSolution, ShapeBasis, build_uniform_mesh_1d,
                      build_uniform_mesh_2d, interpolate,
                      interpolate_coefficients, interpolate_gradient,
                      interpolate_gradient_many, interpolate_many,
                      load_mesh, load_solution, save_mesh, save_solution,
                      shape_gradients, shape_values, solve_poisson_coarse)
from msnn.quadrature import gauss_cells, integrate


# --- mesh construction ------------------------------------------------------

def test_mesh_1d_ten_elements():
    mesh = build_uniform_mesh_1d(0.0, 6.0, 10)
    assert mesh.n_nodes == 11
    assert np.allclose(np.diff(mesh.nodes[:, 0]), 0.6)
    assert mesh.dirichlet_nodes == frozenset({0, 10})
    assert mesh.slit_pairs == ()


def test_mesh_1d_minimal():
    mesh = build_uniform_mesh_1d(-1.0, 1.0, 1)
    assert mesh.n_nodes == 2
    assert mesh.n_elements == 1
    assert np.allclose(mesh.nodes[:, 0], [-1.0, 1.0])


def test_mesh_1d_four_elements():
    mesh = build_uniform_mesh_1d(-1.0, 1.0, 4)
    assert np.allclose(mesh.nodes[:, 0], [-1.0, -0.5, 0.0, 0.5, 1.0])


def test_mesh_1d_rejects_bad_input():
    with pytest.raises(ValueError):
        build_uniform_mesh_1d(1.0, 1.0, 4)
    with pytest.raises(ValueError):
        build_uniform_mesh_1d(2.0, 1.0, 4)
    with pytest.raises(ValueError):
        build_uniform_mesh_1d(0.0, 1.0, 0)


def test_mesh_2d_2x2():
    mesh = build_uniform_mesh_2d((-1, 1), (-1, 1), 2, 2)
    assert mesh.n_nodes == 9
    assert mesh.n_elements == 4
    assert len(mesh.dirichlet_nodes) == 8  # all but the center node


def test_mesh_2d_3x3():
    mesh = build_uniform_mesh_2d((-1, 1), (-1, 1), 3, 3)
    assert mesh.n_nodes == 16
    assert mesh.n_elements == 9


def test_mesh_2d_elements_counterclockwise():
    mesh = build_uniform_mesh_2d((0, 2), (0, 1), 2, 1)
    quad = mesh.nodes[mesh.elements[0]]
    # shoelace area positive for ccw ordering
    x, y = quad[:, 0], quad[:, 1]
    area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    assert area == pytest.approx(1.0)


def test_mesh_2d_slit_duplication():
    mesh = build_uniform_mesh_2d((-1, 1), (-1, 1), 8, 8, slit=((0.0, 1.0), 0.0))
    assert mesh.n_nodes == 85          # 81 grid nodes + 4 duplicates
    assert mesh.n_elements == 64
    assert len(mesh.slit_pairs) == 4
    dup_coords = mesh.nodes[[dup for _, dup in mesh.slit_pairs]]
    assert np.allclose(np.sort(dup_coords[:, 0]), [0.25, 0.5, 0.75, 1.0])
    assert np.all(dup_coords[:, 1] == 0.0)
    for orig, dup in mesh.slit_pairs:
        assert np.allclose(mesh.nodes[orig], mesh.nodes[dup])
        # no element references both members of a pair
        for elem in mesh.elements:
            assert not (orig in elem and dup in elem)
        assert orig in mesh.dirichlet_nodes and dup in mesh.dirichlet_nodes


def test_mesh_2d_slit_tip_not_duplicated():
    mesh = build_uniform_mesh_2d((-1, 1), (-1, 1), 8, 8, slit=((0.0, 1.0), 0.0))
    tip_hits = np.where((np.abs(mesh.nodes[:, 0]) < 1e-14)
                        & (np.abs(mesh.nodes[:, 1]) < 1e-14))[0]
    assert len(tip_hits) == 1


def test_mesh_2d_rejects_misaligned_slit():
    with pytest.raises(ValueError):
        build_uniform_mesh_2d((-1, 1), (-1, 1), 8, 8, slit=((0.0, 1.0), 0.1))
    with pytest.raises(ValueError):
        build_uniform_mesh_2d((-1, 1), (-1, 1), 8, 7, slit=((0.0, 1.0), 0.0))


# --- shape functions ---------------------------------------------------------

def test_shape_values_1d_midpoint():
    mesh = build_uniform_mesh_1d(0.0, 6.0, 10)
    idx, vals = shape_values(mesh, None, [0.3])
    assert np.array_equal(idx, [0, 1])
    assert np.allclose(vals, [0.5, 0.5])


def test_shape_values_2d_corner_kronecker():
    mesh = build_uniform_mesh_2d((-1, 1), (-1, 1), 2, 2)
    for node in range(mesh.n_nodes):
        idx, vals = shape_values(mesh, None, mesh.nodes[node])
        expected = (idx == node).astype(float)
        assert np.allclose(vals, expected, atol=1e-12)


def test_shape_values_2d_center():
    mesh = build_uniform_mesh_2d((-1, 1), (-1, 1), 2, 2)
    idx, vals = shape_values(mesh, None, [-0.5, -0.5])
    assert np.allclose(vals, 0.25)


def test_partition_of_unity_random_points():
    rng = np.random.default_rng(0)
    mesh = build_uniform_mesh_2d((-1, 1), (-1, 1), 5, 3)
    for _ in range(50):
        x = rng.uniform(-1, 1, size=2)
        _, vals = shape_values(mesh, None, x)
        assert abs(vals.sum() - 1.0) < 1e-12


def test_shape_gradients_1d_slope():
    mesh = build_uniform_mesh_1d(0.0, 6.0, 10)
    _, grads = shape_gradients(mesh, None, [0.2])
    assert np.allclose(grads[:, 0], [-1 / 0.6, 1 / 0.6])


def test_shape_gradient_rows_sum_to_zero():
    rng = np.random.default_rng(1)
    mesh = build_uniform_mesh_2d((-1, 1), (-1, 1), 4, 4)
    for _ in range(30):
        x = rng.uniform(-0.99, 0.99, size=2)
        _, grads = shape_gradients(mesh, None, x)
        assert np.allclose(grads.sum(axis=0), 0.0, atol=1e-12)


def test_shape_gradients_2d_unit_square_center():
    mesh = build_uniform_mesh_2d((0, 2), (0, 2), 2, 2)   # unit-square elements
    _, grads = shape_gradients(mesh, None, [0.5, 0.5])
    assert np.allclose(np.abs(grads[:, 0]), 0.5)
    assert np.allclose(np.abs(grads[:, 1]), 0.5)


def test_shape_gradients_match_finite_differences():
    rng = np.random.default_rng(2)
    mesh = build_uniform_mesh_2d((-1, 1), (-1, 1), 4, 4)
    coeffs = rng.standard_normal(mesh.n_nodes)
    sol = CoarseSolution(mesh, coeffs)
    h = 1e-5
    for _ in range(40):
        # keep the FD stencil inside one element
        x = rng.uniform(-0.97, 0.97, size=2)
        x -= (x + 1.0) % 0.5 - 0.25   # push towards element centers
        g = interpolate_gradient(sol, x)
        for k in range(2):
            xp, xm = x.copy(), x.copy()
            xp[k] += h
            xm[k] -= h
            fd = (interpolate(sol, xp) - interpolate(sol, xm)) / (2 * h)
            assert g[k] == pytest.approx(fd, abs=1e-6)


def test_point_outside_domain_rejected():
    mesh = build_uniform_mesh_1d(0.0, 6.0, 10)
    with pytest.raises(ValueError):
        shape_values(mesh, None, [6.5])


# --- interpolation -----------------------------------------------------------

def test_interpolate_kronecker_at_nodes():
    rng = np.random.default_rng(3)
    mesh = build_uniform_mesh_2d((-1, 1), (-1, 1), 3, 3)
    sol = CoarseSolution(mesh, rng.standard_normal(mesh.n_nodes))
    for i in range(mesh.n_nodes):
        assert interpolate(sol, mesh.nodes[i]) == pytest.approx(sol.coefficients[i], abs=1e-12)


def test_interpolate_constant_field():
    mesh = build_uniform_mesh_1d(-1.0, 1.0, 4)
    sol = CoarseSolution(mesh, np.full(5, 2.5))
    assert interpolate(sol, [0.31]) == pytest.approx(2.5, abs=1e-14)
    assert interpolate_gradient(sol, [0.31])[0] == pytest.approx(0.0, abs=1e-14)


def test_interpolate_linear_coefficients():
    mesh = build_uniform_mesh_1d(0.0, 6.0, 10)
    sol = CoarseSolution(mesh, mesh.nodes[:, 0] / 6.0)
    assert interpolate(sol, [0.15]) == pytest.approx(0.025, abs=1e-14)


def test_interpolate_coefficients_constant():
    mesh = build_uniform_mesh_2d((-1, 1), (-1, 1), 2, 2)
    sol = interpolate_coefficients(mesh, lambda x, y: np.ones_like(x))
    assert np.allclose(sol.coefficients, 1.0)


def test_interpolate_coefficients_odd_function():
    mesh = build_uniform_mesh_1d(-1.0, 1.0, 4)
    sol = interpolate_coefficients(mesh, lambda x: 0.5 * x + x ** 3 + np.tanh(10 * x))
    assert sol.coefficients[2] == pytest.approx(0.0, abs=1e-14)   # node at x=0


def test_interpolate_coefficients_heaviside_target():
    mesh = build_uniform_mesh_1d(-1.0, 1.0, 4)
    sol = interpolate_coefficients(
        mesh, lambda x: (x - 1.0) / 2.0 + (x >= 0).astype(float))
    assert sol.coefficients[0] == pytest.approx(-1.0, abs=1e-14)


# --- Poisson solve -----------------------------------------------------------

def test_solve_1d_linear_exact():
    mesh = build_uniform_mesh_1d(0.0, 6.0, 10)
    sol = solve_poisson_coarse(mesh, lambda x: np.zeros_like(x), lambda x: x / 6.0)
    assert np.allclose(sol.coefficients, mesh.nodes[:, 0] / 6.0, atol=1e-12)


def test_solve_2d_patch_test():
    mesh = build_uniform_mesh_2d((0, 2), (0, 2), 3, 3)
    exact = lambda x, y: 1.0 + 2.0 * x - 3.0 * y
    sol = solve_poisson_coarse(mesh, lambda x, y: np.zeros_like(x), exact)
    assert np.allclose(sol.coefficients,
                       exact(mesh.nodes[:, 0], mesh.nodes[:, 1]), atol=1e-12)


def test_solve_rejects_no_dirichlet():
    mesh = build_uniform_mesh_1d(0.0, 1.0, 4)
    object.__setattr__(mesh, "dirichlet_nodes", frozenset())
    with pytest.raises(ValueError, match="singular"):
        solve_poisson_coarse(mesh, lambda x: np.zeros_like(x), lambda x: x)


def test_solve_1d_laplace_convergence_rate():
    s = 5.0
    u = lambda x: np.tanh(s * (x - 3.0))
    f_hat = lambda x: 2 * s * s * np.tanh(s * (x - 3.0)) / np.cosh(s * (x - 3.0)) ** 2
    errs, hs = [], []
    for n in (10, 20, 40):
        mesh = build_uniform_mesh_1d(0.0, 6.0, n)
        sol = solve_poisson_coarse(mesh, f_hat, u)
        fine = gauss_cells((0.0, 6.0), 4 * n, 5)
        err2 = integrate(fine, lambda x: (interpolate_many(
            sol, x[:, None]) - u(x)) ** 2)
        errs.append(np.sqrt(err2))
        hs.append(6.0 / n)
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.3)


def test_slit_sides_are_independent():
    mesh = build_uniform_mesh_2d((-1, 1), (-1, 1), 8, 8, slit=((0.0, 1.0), 0.0))
    coeffs = np.zeros(mesh.n_nodes)
    for orig, dup in mesh.slit_pairs:
        coeffs[orig] = -1.0
        coeffs[dup] = 1.0
    sol = CoarseSolution(mesh, coeffs)
    x = np.array([[0.5, 0.0]])
    above = interpolate_many(sol, x, sides=np.array([1]))
    below = interpolate_many(sol, x, sides=np.array([-1]))
    assert above[0] == pytest.approx(1.0)
    assert below[0] == pytest.approx(-1.0)


def test_slit_point_requires_side_tag():
    mesh = build_uniform_mesh_2d((-1, 1), (-1, 1), 8, 8, slit=((0.0, 1.0), 0.0))
    sol = CoarseSolution(mesh, np.zeros(mesh.n_nodes))
    with pytest.raises(ValueError, match="side"):
        interpolate(sol, [0.5, 0.0])
    # the tip is shared, no tag needed
    interpolate(sol, [0.0, 0.0])


# --- serialization -----------------------------------------------------------

def test_solution_round_trip_1d(tmp_path):
    mesh = build_uniform_mesh_1d(0.0, 6.0, 10)
    sol = CoarseSolution(mesh, np.sin(mesh.nodes[:, 0]))
    path = tmp_path / "sol.txt"
    save_solution(sol, path)
    back = load_solution(path)
    assert np.array_equal(back.coefficients, sol.coefficients)
    assert np.array_equal(back.mesh.nodes, mesh.nodes)
    assert np.array_equal(back.mesh.elements, mesh.elements)
    assert back.mesh.dirichlet_nodes == mesh.dirichlet_nodes


def test_mesh_round_trip_slit(tmp_path):
    mesh = build_uniform_mesh_2d((-1, 1), (-1, 1), 8, 8, slit=((0.0, 1.0), 0.0))
    path = tmp_path / "mesh.txt"
    save_mesh(mesh, path)
    back = load_mesh(path)
    assert np.array_equal(back.nodes, mesh.nodes)
    assert np.array_equal(back.elements, mesh.elements)
    assert back.slit_pairs == mesh.slit_pairs
    assert back.grid.slit == pytest.approx(mesh.grid.slit)
    # evaluation still works side-aware after the round trip
    coeffs = np.arange(back.n_nodes, dtype=float)
    sol = CoarseSolution(back, coeffs)
    interpolate(sol, [0.5, 0.0], side=1)


def test_file_columns_match_format(tmp_path):
    mesh = build_uniform_mesh_1d(0.0, 1.0, 2)
    sol = CoarseSolution(mesh, np.array([0.0, 0.5, 1.0]))
    path = tmp_path / "fmt.txt"
    save_solution(sol, path)
    lines = path.read_text().splitlines()
    assert lines[0].split() == ["index", "x", "value", "is_dirichlet"]
    assert lines[1].split() == ["0", "0", "0", "1"]
    assert lines[-1].split() == ["1", "2"]
