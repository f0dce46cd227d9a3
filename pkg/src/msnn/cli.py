"""Command-line entry point: run benchmark experiments, list cases, and
build the refined reference field for the slit Poisson case.

Exit codes: 0 success, 1 configuration error, 2 training divergence.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import fem, net as nnet, problems
from .config import ExperimentConfig
from .problems import ProblemCase, as_field, error_report, get_case, reference_poisson_slit
from .training import (MultiScaleSolution, TrainConfig, TrainingDivergence,
                       TrainTrace, TraceRecord, build_loss_spec, multiscale_solve,
                       solve_coarse)


def _sample_points(case: ProblemCase, counts):
    if case.dimension == 1:
        a, b = case.bounds
        pts = np.linspace(a, b, counts[0])[:, None]
        return pts, None
    (x0, x1), (y0, y1) = case.bounds
    X, Y = np.meshgrid(np.linspace(x0, x1, counts[0]),
                       np.linspace(y0, y1, counts[1]), indexing="xy")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    sides = None
    if case.slit is not None:
        # sample points on the open slit are evaluated from above by convention
        (sx0, sx1), sy = case.slit
        on_slit = (np.abs(pts[:, 1] - sy) < 1e-12) & (pts[:, 0] > sx0 + 1e-12) \
            & (pts[:, 0] <= sx1 + 1e-12)
        if np.any(on_slit):
            sides = np.where(on_slit, 1, 0).astype(np.int8)
    return pts, sides


def _exact_fields(case: ProblemCase):
    """(value_field, gradient_field) of the exact/reference solution, or Nones."""
    if case.analytic is not None:
        value = as_field(case.analytic)
        grad = None
        if case.analytic_grad is not None:
            def grad(pts, sides=None):
                return fem.eval_field(case.analytic_grad, pts)[:, None]
        return value, grad
    if case.id == problems.POISSON_2D_SLIT:
        ref = reference_poisson_slit()
        return (lambda pts, sides=None: ref.evaluate_many(pts, sides),
                lambda pts, sides=None: ref.gradient_many(pts, sides))
    return None, None


def _train_one_seed(cfg: ExperimentConfig, seed: int):
    """Worker for (optionally parallel) per-seed training. Returns plain
    arrays so the result pickles cheaply."""
    case = cfg.case()
    mesh = case.build_mesh(cfg.mesh_elems)
    spec = build_loss_spec(case, mesh, variant=cfg.variant, alpha_p=cfg.alpha_p,
                           beta_d=cfg.beta_d, beta_c=cfg.beta_c,
                           quad_counts=cfg.quad_counts)
    tc = TrainConfig(epochs=cfg.epochs, learning_rate=cfg.learning_rate,
                     seed=seed, log_every=cfg.log_every)
    sol = multiscale_solve(case, train_config=tc, loss_spec=spec, mesh=mesh,
                           hidden_sizes=cfg.hidden, seed=seed,
                           smoothing=cfg.smoothing)
    records = [(r.epoch, r.loss, r.l2_error) for r in sol.trace.records]
    return seed, sol.net.weights, sol.net.biases, records


def run_experiment(cfg: ExperimentConfig, progress=print) -> dict:
    """Execute a configured experiment and write fields.csv, per-seed
    trace CSVs, and report.txt into the output directory."""
    case = cfg.case()
    cfg = cfg.resolved(case)
    cfg.validate(case)
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()

    exact_value, exact_grad = _exact_fields(case)
    mesh = case.build_mesh(cfg.mesh_elems)
    coarse = solve_coarse(case, mesh)
    eval_rule = case.eval_rule()

    if cfg.parallel_seeds and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(len(cfg.seeds), 4)) as pool:
            raw = list(pool.map(_train_one_seed, [cfg] * len(cfg.seeds), cfg.seeds))
    else:
        raw = [_train_one_seed(cfg, seed) for seed in cfg.seeds]

    runs = []
    for seed, weights, biases, records in raw:
        network = nnet.MlpNet(case.dimension, tuple(cfg.hidden), weights, biases)
        trace = TrainTrace([TraceRecord(*r) for r in records])
        sol = MultiScaleSolution(case, coarse, network, trace, cfg.smoothing)
        report = None
        if exact_value is not None:
            report = error_report(sol, exact_value, eval_rule)
        runs.append((seed, sol, report))
        trace.to_csv(outdir / f"trace_seed{seed}.csv")
        if report is not None:
            progress(f"seed {seed}: total relative L2 error {report.total_relative_l2:.4e}")

    if runs[0][2] is not None:
        best_seed, best_sol, best_report = min(runs, key=lambda r: r[2].total_relative_l2)
    else:
        best_seed, best_sol, best_report = runs[0]
    best_sol.trace.to_csv(outdir / "trace.csv")
    _write_fields_csv(outdir / "fields.csv", case, cfg, best_sol,
                      exact_value, exact_grad)

    wall = time.perf_counter() - t0
    _write_report(outdir / "report.txt", case, cfg, runs, best_seed, wall)
    return {"case": case.id, "best_seed": best_seed, "best_report": best_report,
            "runs": runs, "wall_time": wall, "output_dir": str(outdir)}


def _write_fields_csv(path, case, cfg, sol, exact_value, exact_grad):
    pts, sides = _sample_points(case, cfg.sample_counts)
    cols: list[tuple[str, np.ndarray]] = []
    for k in range(case.dimension):
        cols.append(("xy"[k], pts[:, k]))
    u_c = sol.coarse_many(pts, sides)
    u_f = sol.fine_many(pts)
    cols += [("u_coarse", u_c), ("u_fine", u_f), ("u_total", u_c + u_f)]
    if exact_value is not None:
        cols.append(("u_exact", exact_value(pts, sides)))
    if case.kind == "pde":
        g_c = sol.coarse_gradient_many(pts, sides)
        g_f = sol.fine_gradient_many(pts)
        g_e = exact_grad(pts, sides) if exact_grad is not None else None
        for k in range(case.dimension):
            tag = "du" if case.dimension == 1 else ("dux", "duy")[k]
            cols += [(f"{tag}_coarse", g_c[:, k]), (f"{tag}_fine", g_f[:, k]),
                     (f"{tag}_total", g_c[:, k] + g_f[:, k])]
            if g_e is not None:
                cols.append((f"{tag}_exact", g_e[:, k]))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([name for name, _ in cols])
        data = [vals for _, vals in cols]
        for i in range(len(pts)):
            w.writerow([repr(float(v[i])) for v in data])


def _write_report(path, case, cfg, runs, best_seed, wall):
    lines = ["msnn run report", "=" * 15, ""]
    lines.append(f"case: {case.id} ({case.kind})"
                 + (f", s={case.params['s']:g}" if "s" in case.params else ""))
    network = nnet.MlpNet(case.dimension, tuple(cfg.hidden),
                          *_dummy_params(case.dimension, cfg.hidden))
    lines.append(f"hidden layers: {' '.join(str(v) for v in cfg.hidden)} "
                 f"({nnet.count_params(network)} parameters)")
    lines.append(f"mesh: {'x'.join(str(v) for v in cfg.mesh_elems)} elements")
    lines.append(f"integration points: {'x'.join(str(v) for v in cfg.quad_counts)}")
    lines.append(f"smoothing: {'on' if cfg.smoothing else 'off'}")
    lines.append(f"epochs: {cfg.epochs}, learning rate: {cfg.learning_rate:g}")
    lines.append("")
    if runs[0][2] is not None:
        lines.append("relative L2 errors (coarse | fine-vs-residual | total | max|err|):")
        for seed, _, rep in runs:
            lines.append(f"  seed {seed}: {rep.coarse_relative_l2:.6e} | "
                         f"{rep.fine_vs_residual_relative_l2:.6e} | "
                         f"{rep.total_relative_l2:.6e} | {rep.max_pointwise:.6e}")
        best = dict((s, r) for s, _, r in runs)[best_seed]
        lines.append(f"best seed: {best_seed} (total {best.total_relative_l2:.6e}, "
                     f"eval grid {best.eval_grid})")
    lines.append(f"wall time: {wall:.1f} s")
    lines += ["", "--- resolved config ---", cfg.to_ini()]
    Path(path).write_text("\n".join(lines))


def _dummy_params(dim, hidden):
    sizes = (dim, *hidden, 1)
    return ([np.zeros((a, b)) for a, b in zip(sizes[:-1], sizes[1:])],
            [np.zeros(b) for b in sizes[1:]])


def list_cases() -> str:
    """Text table of the benchmark cases with their defaults."""
    header = ("id", "kind", "mesh", "net", "points", "epochs")
    rows = [header]
    for cid in problems.CASE_IDS:
        case = get_case(cid)
        rows.append((case.id, case.kind,
                     "x".join(str(v) for v in case.mesh_elems),
                     ",".join(str(v) for v in case.net_hidden),
                     "x".join(str(v) for v in case.quad_counts),
                     str(case.epochs)))
    widths = [max(len(r[k]) for r in rows) for k in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip()
                     for row in rows)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValueError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="msnn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a benchmark experiment")
    run_p.add_argument("--case", help="case id (see list-cases)")
    run_p.add_argument("--config", help="INI config file (CLI flags override it)")
    run_p.add_argument("--s", type=float, help="laplace1d localization parameter")
    run_p.add_argument("--elems", help="mesh elements, e.g. '10' or '8 8'")
    run_p.add_argument("--hidden", help="hidden layer sizes, e.g. '4 8 5'")
    run_p.add_argument("--seeds", help="seed list, e.g. '0 1 2'")
    run_p.add_argument("--variant", help="loss variant")
    run_p.add_argument("--alpha-p", type=float, dest="alpha_p")
    run_p.add_argument("--beta-d", type=float, dest="beta_d")
    run_p.add_argument("--beta-c", type=float, dest="beta_c")
    run_p.add_argument("--points", help="integration points, e.g. '301' or '151 151'")
    run_p.add_argument("--epochs", type=int)
    run_p.add_argument("--lr", type=float, dest="learning_rate")
    run_p.add_argument("--log-every", type=int, dest="log_every")
    smoothing = run_p.add_mutually_exclusive_group()
    smoothing.add_argument("--smoothing", action="store_true", dest="smoothing_on")
    smoothing.add_argument("--no-smoothing", action="store_true", dest="smoothing_off")
    run_p.add_argument("--output", help="output directory")
    run_p.add_argument("--sample-points", dest="sample_points",
                       help="field export grid, e.g. '601' or '101 101'")
    run_p.add_argument("--parallel-seeds", action="store_true")

    sub.add_parser("list-cases", help="print the case table")

    ref_p = sub.add_parser("reference", help="compute and cache a reference field")
    ref_p.add_argument("--case", required=True)
    ref_p.add_argument("--cache-dir", dest="cache_dir")
    return parser


def _ints_arg(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def _config_from_args(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_ini(Path(args.config).read_text())
    elif args.case:
        cfg = ExperimentConfig(case_id=args.case)
    else:
        raise ValueError("run needs --case or --config")
    if args.case:
        cfg.case_id = args.case
    if args.s is not None:
        cfg.s = args.s
    if args.elems:
        cfg.mesh_elems = _ints_arg(args.elems)
    if args.hidden:
        cfg.hidden = _ints_arg(args.hidden)
    if args.seeds:
        cfg.seeds = _ints_arg(args.seeds)
    if args.variant:
        cfg.variant = args.variant
    for name in ("alpha_p", "beta_d", "beta_c", "epochs", "learning_rate", "log_every"):
        val = getattr(args, name)
        if val is not None:
            setattr(cfg, name, val)
    if args.points:
        cfg.quad_counts = _ints_arg(args.points)
    if args.smoothing_on:
        cfg.smoothing = True
    if args.smoothing_off:
        cfg.smoothing = False
    if args.output:
        cfg.output_dir = args.output
    if args.sample_points:
        cfg.sample_counts = _ints_arg(args.sample_points)
    if args.parallel_seeds:
        cfg.parallel_seeds = True
    return cfg


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "list-cases":
            print(list_cases())
            return 0
        if args.command == "reference":
            if args.case != problems.POISSON_2D_SLIT:
                raise ValueError(f"no reference solve registered for case {args.case!r}")
            sol = reference_poisson_slit(cache_dir=args.cache_dir)
            print(f"reference field on {problems.REFERENCE_MESH_2D}x"
                  f"{problems.REFERENCE_MESH_2D} mesh cached "
                  f"({sol.mesh.n_nodes} nodes)")
            return 0
        cfg = _config_from_args(args)
        summary = run_experiment(cfg)
        rep = summary["best_report"]
        if rep is not None:
            print(f"best seed {summary['best_seed']}: total relative L2 error "
                  f"{rep.total_relative_l2:.4e} (coarse {rep.coarse_relative_l2:.4e})")
        print(f"artifacts in {summary['output_dir']}")
        return 0
    except ValueError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except TrainingDivergence as err:
        print(f"training diverged: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
