"""Command-line front end: solve benchmarks, build references, report errors.

Artifacts per solve run:
  <out>/run.jsonl      one record per metric interval
  <out>/solution.csv   evaluation grid with the model field
  <out>/nodes.csv      node positions, widths, weights per snapshot
  <out>/model.json     checkpoint (variant, kernel, arrays, seed)
Marching runs additionally write one solution CSV per snapshot and a
snapshots.jsonl index.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .geometry import GeometryError
from .kernels import kernel_from_name
from .loss import ConfigError, LossConfig, build_samples
from .model import FourierModel
from .optimizer import OptimizerError, train
from .oracles import (SolverError, ensure_reference, load_reference,
                      reference_dir, reference_path)
from .problems import (UnknownProblemError, error_metrics, evaluation_points,
                       make_problem)
from .records import write_jsonl
from .timestepping import MarchConfig, StepFailure, march

USAGE_EXIT = 2


def build_parser():
    ap = argparse.ArgumentParser(
        prog="kernelpde",
        description="Meshless kernel-ansatz PDE solver and benchmark suite")
    sub = ap.add_subparsers(dest="command", required=True)

    sv = sub.add_parser("solve", help="train a model on a benchmark problem")
    sv.add_argument("--problem", required=True)
    sv.add_argument("--kernel", default="gaussian",
                    choices=["gaussian", "softplus-hat", "relu-hat", "mlp"])
    sv.add_argument("--variant", default="plain",
                    choices=["plain", "pou", "fourier"])
    sv.add_argument("--nodes", type=int, default=10,
                    help="free interior nodes (or modes for the fourier variant)")
    sv.add_argument("--samples", default="auto",
                    help="interior sample count or 'auto' (20/node 1-D, 4/node 2-D)")
    sv.add_argument("--fraction", type=float, default=1.0,
                    help="random interior subset drawn each iteration")
    sv.add_argument("--iterations", type=int, default=5000)
    sv.add_argument("--seed", type=int, default=0)
    sv.add_argument("--lr", type=float, default=1e-2)
    sv.add_argument("--wd", type=float, default=100.0, help="boundary-value weight")
    sv.add_argument("--wn", type=float, default=100.0, help="flux-condition weight")
    sv.add_argument("--wi", type=float, default=1.0, help="interior weight")
    sv.add_argument("--mode", default="collocation",
                    choices=["collocation", "variational"])
    sv.add_argument("--march", action="store_true",
                    help="implicit time marching instead of a stationary solve")
    sv.add_argument("--dt", type=float, default=5e-3)
    sv.add_argument("--tmax", type=float, default=None)
    sv.add_argument("--inner-iterations", type=int, default=200)
    sv.add_argument("--metric-every", type=int, default=100)
    sv.add_argument("--threads", type=int, default=1,
                    help="worker cap; evaluation is vectorized, so a single "
                         "deterministic worker is always used")
    sv.add_argument("--polygon-file", default=None,
                    help="vertex file ('x y' per line) for the irregular domain")
    sv.add_argument("--out", required=True)

    rf = sub.add_parser("reference", help="compute and cache an oracle solution")
    rf.add_argument("--problem", required=True)
    rf.add_argument("--resolution", type=int, required=True)
    rf.add_argument("--ref-dir", default=None,
                    help=f"cache directory (default 'references' or $SPINN_REF_DIR)")
    rf.add_argument("--force", action="store_true")

    rp = sub.add_parser("report", help="error table for a finished run")
    rp.add_argument("--run-dir", required=True)
    rp.add_argument("--problem", required=True)
    rp.add_argument("--resolution", type=int, default=None,
                    help="oracle resolution when the problem has no closed form")
    rp.add_argument("--ref-dir", default=None)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "reference":
            return cmd_reference(args)
        return cmd_report(args)
    except UnknownProblemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (ConfigError, GeometryError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    except (OptimizerError, StepFailure, SolverError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1


def _resolve_target(problem, pts):
    if problem.exact is not None:
        return np.asarray(problem.exact(pts), dtype=float)
    return None


def cmd_solve(args):
    problem = make_problem(args.problem, polygon_file=args.polygon_file)
    rng = np.random.default_rng(args.seed)

    if args.variant == "fourier":
        if problem.dim != 1 or not problem.is_stationary:
            raise ConfigError("the fourier variant needs a stationary 1-D problem")
        if args.march:
            raise ConfigError("--march does not apply to the fourier variant")
        model = FourierModel.zeros(args.nodes, problem.geometry.lows[0],
                                   problem.geometry.highs[0])
    else:
        kernel = kernel_from_name(args.kernel, rng=rng)
        model = problem.default_model(args.nodes, kernel=kernel,
                                      variant=args.variant, rng=rng)

    os.makedirs(args.out, exist_ok=True)

    if args.march:
        if problem.march is None:
            raise ConfigError(f"problem '{args.problem}' has no marching form; "
                              "marchable problems: heat, advection, burgers")
        return _solve_march(args, problem, model)
    if not problem.is_stationary:
        raise ConfigError(f"problem '{args.problem}' is an evolution problem; "
                          "pass --march or use its -st space-time form")
    return _solve_stationary(args, problem, model, rng)


def _loss_config(args, problem):
    n_interior = None if args.samples == "auto" else int(args.samples)
    return LossConfig(w_interior=args.wi, w_dirichlet=args.wd, w_neumann=args.wn,
                      fraction=args.fraction, n_interior=n_interior,
                      mode=args.mode)


def _solve_stationary(args, problem, model, rng):
    cfg = _loss_config(args, problem)
    samples = build_samples(problem, cfg, n_nodes=args.nodes)
    pts = evaluation_points(problem)
    target = _resolve_target(problem, pts)

    snapshots = []

    def snap(it, m, rec):
        snapshots.append((it, _node_rows(m)))

    model, records = train(model, problem, cfg, args.iterations, samples,
                           rng=rng, lr=args.lr, metric_every=args.metric_every,
                           error_target=target, eval_pts=pts,
                           callbacks=(snap,))

    write_jsonl(os.path.join(args.out, "run.jsonl"), records)
    u = np.asarray(model.evaluate(pts), dtype=float)
    _write_solution_csv(os.path.join(args.out, "solution.csv"), problem, pts, u)
    _write_nodes_csv(os.path.join(args.out, "nodes.csv"), problem, snapshots)
    model.save(os.path.join(args.out, "model.json"), extra={"seed": args.seed})

    final = records[-1]
    print(f"final loss {final.loss_total:.6e} after {final.iteration} iterations")
    if final.Linf is not None:
        print(f"errors vs exact: L1={final.L1:.3e} L2={final.L2:.3e} "
              f"Linf={final.Linf:.3e}")
    return 0 if np.isfinite(final.loss_total) else 1


def _solve_march(args, problem, model):
    cfg = _loss_config(args, problem)
    t_end = args.tmax if args.tmax is not None else problem.march.t_end
    n_snaps = 4
    snap_times = tuple(np.linspace(0.0, t_end, n_snaps + 1)[1:])
    mcfg = MarchConfig(dt=args.dt, t_max=t_end,
                       inner_iterations=args.inner_iterations, lr=args.lr,
                       snapshot_times=snap_times)
    result = march(problem, mcfg, model, loss_cfg=cfg)

    xs = np.linspace(problem.geometry.lows[0], problem.geometry.highs[0], 201)[:, None]
    index_path = os.path.join(args.out, "snapshots.jsonl")
    node_snaps = []
    with open(index_path, "w") as idx:
        for snap in result.snapshots:
            fname = f"solution_t{snap.t:.4f}.csv"
            u = np.asarray(snap.model.evaluate(xs), dtype=float)
            _write_solution_csv(os.path.join(args.out, fname), problem, xs, u)
            entry = {"t": snap.t, "file": fname}
            if snap.metrics is not None:
                entry.update({"L1": snap.metrics[0], "L2": snap.metrics[1],
                              "Linf": snap.metrics[2]})
            idx.write(json.dumps(entry) + "\n")
            node_snaps.append((f"{snap.t:.4f}", _node_rows(snap.model)))

    final = result.final_model
    u = np.asarray(final.evaluate(xs), dtype=float)
    _write_solution_csv(os.path.join(args.out, "solution.csv"), problem, xs, u)
    _write_nodes_csv(os.path.join(args.out, "nodes.csv"), problem, node_snaps)
    final.save(os.path.join(args.out, "model.json"), extra={"seed": args.seed})
    last_inner = result.inner_losses[-1][-1] if result.inner_losses else 0.0
    print(f"marched {len(result.inner_losses)} steps to t={t_end:g}; "
          f"final inner loss {last_inner:.6e}")
    return 0 if np.isfinite(last_inner) else 1


def _node_rows(model):
    if isinstance(model, FourierModel):
        rows = [(0, k, a, b) for k, (a, b) in enumerate(zip(model.a, model.b), start=1)]
        return rows
    X = np.concatenate([model.fixed_X, model.free_X])
    return [tuple(X[i]) + (model.h[i], model.U[i]) for i in range(model.n_nodes)]


def _write_solution_csv(path, problem, pts, u):
    coords = ["x", "y", "t"]
    if problem.time_axis is not None:
        names = ["x", "t"][: pts.shape[1]]
    else:
        names = coords[: pts.shape[1]]
    header = ",".join(names) + ",u"
    np.savetxt(path, np.column_stack([pts, u]), delimiter=",", header=header,
               comments="")


def _write_nodes_csv(path, problem, snapshots):
    with open(path, "w") as fh:
        if not snapshots:
            fh.write("snapshot,x,h,U\n")
            return
        width = len(snapshots[0][1][0]) - 2
        names = ["x", "y", "t"][:width] if problem.time_axis is None \
            else ["x", "t"][:width]
        fh.write("snapshot," + ",".join(names) + ",h,U\n")
        for tag, rows in snapshots:
            for row in rows:
                fh.write(f"{tag}," + ",".join(repr(float(v)) for v in row) + "\n")


def cmd_reference(args):
    path = reference_path(args.problem, args.resolution, args.ref_dir)
    existed = os.path.exists(path)
    try:
        out = ensure_reference(args.problem, args.resolution, args.ref_dir,
                               force=args.force)
    except SolverError as exc:
        if "no reference solver" in str(exc):
            print(f"error: {exc}; problems with oracles: "
                  "1d-A 1d-B 1d-C 2d-A 2d-B burgers", file=sys.stderr)
            return USAGE_EXIT
        raise
    print(("cached " if existed and not args.force else "wrote ") + out)
    return 0


def cmd_report(args):
    sol_path = os.path.join(args.run_dir, "solution.csv")
    if not os.path.exists(sol_path):
        print(f"error: {sol_path} not found", file=sys.stderr)
        return USAGE_EXIT
    problem = make_problem(args.problem)
    data = np.loadtxt(sol_path, delimiter=",", skiprows=1)
    pts, u = data[:, :-1], data[:, -1]

    if problem.exact is not None:
        ref = np.asarray(problem.exact(pts), dtype=float)
    else:
        if args.resolution is None:
            print("error: problem has no closed form; pass --resolution and run "
                  f"`kernelpde reference --problem {args.problem} "
                  "--resolution <n>` first", file=sys.stderr)
            return USAGE_EXIT
        path = reference_path(args.problem, args.resolution, args.ref_dir)
        if not os.path.exists(path):
            print(f"error: no cached reference at {path}; run "
                  f"`kernelpde reference --problem {args.problem} "
                  f"--resolution {args.resolution}` first", file=sys.stderr)
            return USAGE_EXIT
        cols, ref_data = load_reference(path)
        ref_pts, ref_u = ref_data[:, :len(cols) - 1], ref_data[:, -1]
        if ref_pts.shape != pts.shape or not np.allclose(ref_pts, pts, atol=1e-9):
            print("error: solution grid does not match the reference grid; "
                  "re-evaluate the model on the reference grid (solve with the "
                  "same resolution) or rebuild the reference", file=sys.stderr)
            return USAGE_EXIT
        ref = ref_u

    l1, l2, linf = error_metrics(u, ref)
    table = {"L1": l1, "L2": l2, "Linf": linf}
    with open(os.path.join(args.run_dir, "report.json"), "w") as fh:
        json.dump(table, fh, indent=2)
    print(f"{'norm':>6} {'error':>14}")
    for k, v in table.items():
        print(f"{k:>6} {v:>14.6e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
