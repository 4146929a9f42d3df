"""Command-line front end: ``paretoprox {run,certify,oracle,sweep,replay}``.

Exit codes: 0 success, 1 negative verdict, 2 error.
"""

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .convexset import Box, InfeasiblePointError
from .criticality import fritz_john_residual, is_pareto_critical
from .oracle import GridSpec, grid_weak_pareto, oracle_critical_set
from .ppa import PpaConfig, run
from .problems import ProblemParseError, file_sha256, load_problem, resolve_problem

log = logging.getLogger("paretoprox")

EXIT_OK, EXIT_NEGATIVE, EXIT_ERROR = 0, 1, 2
FJ_PASS_TOL = 1e-5


class CliError(Exception):
    pass


def _dump(path, obj):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _parse_point(text):
    try:
        return np.array([float(t) for t in text.replace(";", ",").split(",") if t.strip()])
    except ValueError as exc:
        raise CliError(f"cannot parse point {text!r}") from exc


def build_config(args):
    d = {}
    if getattr(args, "config", None):
        try:
            d = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise CliError(f"cannot read config: {exc}") from exc
    for key, attr in (("seed", "seed"), ("step_tol", "step_tol"), ("lam", "lam"),
                      ("max_iters", "max_iters"), ("method", "method")):
        val = getattr(args, attr, None)
        if val is not None:
            d[key] = val
    try:
        return PpaConfig.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid config: {exc}") from exc


def _load(ref):
    try:
        return load_problem(ref), resolve_problem(ref)
    except (ProblemParseError, FileNotFoundError) as exc:
        raise CliError(str(exc)) from exc


def _artifact_paths(out_dir, name, seed):
    stem = f"{name}-seed{seed}"
    return {
        "trajectory_json": str(out_dir / f"{stem}.trajectory.json"),
        "trajectory_csv": str(out_dir / f"{stem}.trajectory.csv"),
        "certificate_json": str(out_dir / f"{stem}.certificate.json"),
        "manifest": str(out_dir / f"{stem}.manifest.json"),
    }


def _certificates(traj):
    return {
        "termination": traj.termination,
        "point": traj.final.x.tolist(),
        "criticality": traj.final_criticality.to_dict(),
        "fritz_john": traj.final_fritz_john.to_dict(),
        "hull_stationarity": traj.final_hull_stationarity.to_dict(),
        "proximal_step": (None if traj.final_step_certificate is None
                          else traj.final_step_certificate.to_dict()),
    }


def cmd_run(args):
    problem, path = _load(args.problem)
    cfg = build_config(args)
    try:
        traj = run(problem.F, problem.S, problem.x0, cfg)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = _artifact_paths(out_dir, problem.name, cfg.seed)
    Path(paths["trajectory_json"]).write_text(traj.to_json(indent=2) + "\n")
    Path(paths["trajectory_csv"]).write_text(traj.to_csv())
    _dump(Path(paths["certificate_json"]), _certificates(traj))
    manifest = {
        "problem": {"ref": str(path.resolve()), "name": problem.name,
                    "sha256": file_sha256(path)},
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "artifacts": {k: v for k, v in paths.items() if k != "manifest"},
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    _dump(Path(paths["manifest"]), manifest)
    verdict = "critical" if traj.final_criticality.critical else "not critical"
    print(f"{problem.name}: {traj.termination} after {len(traj.iterates) - 1} iterations; "
          f"final point {np.array2string(traj.final.x, precision=8)} is {verdict} "
          f"(residual {traj.final_criticality.residual:.3g}, "
          f"Fritz-John residual {traj.final_fritz_john.residual:.3g})")
    print(f"manifest: {paths['manifest']}")
    if traj.termination == "subsolver_failure":
        log.error("subproblem solver failed: %s", traj.final.subsolver_meta.get("failure"))
        return EXIT_ERROR
    return EXIT_OK


def cmd_certify(args):
    problem, _ = _load(args.problem)
    x = _parse_point(args.point)
    if x.size != problem.n:
        raise CliError(f"point has dimension {x.size}, problem has {problem.n}")
    try:
        crit = is_pareto_critical(problem.F, problem.S, x, tol=args.tol)
        fj = fritz_john_residual(problem.F, [], problem.S, x)
    except InfeasiblePointError as exc:
        raise CliError(f"infeasible point: {exc}") from exc
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _dump(out_dir / f"{problem.name}.criticality.json", {"point": x.tolist(), **crit.to_dict()})
    _dump(out_dir / f"{problem.name}.fritz_john.json", {"point": x.tolist(), **fj.to_dict()})
    print(f"{problem.name} at {x.tolist()}: {crit.verdict} (residual {crit.residual:.3g}); "
          f"Fritz-John residual {fj.residual:.3g}")
    return EXIT_OK if crit.critical else EXIT_NEGATIVE


def _grid_for(problem, points):
    lo, hi = problem.S.bounding_box()
    if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
        raise CliError("oracle needs a bounded feasible set")
    return GridSpec(Box(lo, hi), points)


def cmd_oracle(args):
    problem, _ = _load(args.problem)
    if problem.n > 3:
        raise CliError(f"oracle supports n <= 3, problem has n = {problem.n}")
    try:
        grid = _grid_for(problem, args.points_per_axis)
        front = grid_weak_pareto(problem.F, grid, feasible_set=problem.S)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{problem.name}.front.csv"
    path.write_text(front.to_csv())
    print(f"{problem.name}: {len(front)} weak Pareto grid points written to {path}")
    return EXIT_OK


def _sweep_one(job):
    ref, x0, cfg_dict = job
    problem = load_problem(ref)
    cfg = PpaConfig.from_dict(cfg_dict)
    try:
        traj = run(problem.F, problem.S, x0, cfg)
    except Exception as exc:  # reported per run, not fatal
        return {"x0": list(x0), "error": str(exc)}
    return {
        "x0": list(x0), "seed": cfg.seed, "termination": traj.termination,
        "iterations": len(traj.iterates) - 1, "terminal_point": traj.final.x.tolist(),
        "critical": traj.final_criticality.critical,
        "criticality_residual": traj.final_criticality.residual,
        "fj_residual": traj.final_fritz_john.residual,
        "hull_stationary": traj.final_hull_stationarity.stationary,
    }


def _nearest(points, targets):
    if len(targets) == 0:
        return [float("inf")] * len(points)
    return [float(np.min(np.linalg.norm(targets - p, axis=1))) for p in points]


def sweep(problem_ref, starts, seeds, base_cfg, points_per_axis=201, jobs=1):
    """Run from ``starts`` feasible points per seed and aggregate the terminal points."""
    problem = load_problem(problem_ref)
    ref = str(resolve_problem(problem_ref).resolve())
    work = []
    for seed in seeds:
        rng = np.random.default_rng(seed)
        X0 = problem.S.sample(starts, rng)
        for i, x0 in enumerate(X0):
            d = base_cfg.to_dict()
            d["seed"] = int(seed) * 10_000 + i
            work.append((ref, [float(t) for t in x0], d))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            runs = list(ex.map(_sweep_one, work))
    else:
        runs = [_sweep_one(w) for w in work]
    done = [r for r in runs if "error" not in r]
    T = np.array([r["terminal_point"] for r in done]).reshape(-1, problem.n)
    report = {"problem": problem.name, "starts": starts, "seeds": list(seeds),
              "runs": runs, "completed": len(done), "failed": len(runs) - len(done)}
    if done:
        report["critical_rate"] = float(np.mean([r["critical"] for r in done]))
        report["fj_pass_rate"] = float(np.mean([r["fj_residual"] <= FJ_PASS_TOL for r in done]))
    if problem.n <= 3 and done:
        grid = _grid_for(problem, points_per_axis)
        front = grid_weak_pareto(problem.F, grid, feasible_set=problem.S).points
        crit = oracle_critical_set(problem.F, problem.S, grid)
        to_front, to_crit = _nearest(T, front), _nearest(T, crit)
        report["distance_to_front"] = to_front
        report["distance_to_critical_set"] = to_crit
        report["max_distance_to_front"] = max(to_front)
        report["max_distance_to_critical_set"] = max(to_crit)
        report["oracle_critical_set"] = crit.tolist()
    return report


def cmd_sweep(args):
    _load(args.problem)
    cfg = build_config(args)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [cfg.seed]
    report = sweep(args.problem, args.starts, seeds, cfg, args.points_per_axis, args.jobs)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{report['problem']}.sweep.json"
    _dump(path, report)
    print(f"{report['problem']}: {report['completed']} runs completed, {report['failed']} failed")
    if report["completed"]:
        print(f"  critical rate {report['critical_rate']:.3f}, "
              f"Fritz-John pass rate {report['fj_pass_rate']:.3f}")
    if "max_distance_to_front" in report:
        print(f"  max distance to grid front {report['max_distance_to_front']:.3g}, "
              f"to oracle critical set {report['max_distance_to_critical_set']:.3g}")
    print(f"report: {path}")
    return EXIT_OK if report["failed"] == 0 else EXIT_NEGATIVE


def replay_manifest(manifest_path):
    """Rerun a manifest; returns ``(identical, recorded_csv, new_csv)``."""
    m = json.loads(Path(manifest_path).read_text())
    ref = m["problem"]["ref"]
    if file_sha256(ref) != m["problem"]["sha256"]:
        raise CliError(f"problem file {ref} changed since the manifest was written")
    problem = load_problem(ref)
    cfg = PpaConfig.from_dict(m["config"])
    traj = run(problem.F, problem.S, problem.x0, cfg)
    new = traj.to_csv()
    old = Path(m["artifacts"]["trajectory_csv"]).read_text()
    return new == old, old, new


def cmd_replay(args):
    try:
        same, _, _ = replay_manifest(args.manifest)
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise CliError(f"cannot replay manifest: {exc}") from exc
    print("trajectory CSV identical" if same else "trajectory CSV differs")
    return EXIT_OK if same else EXIT_NEGATIVE


def _common(p):
    p.add_argument("problem", help="problem file or corpus name (e.g. P2)")
    p.add_argument("--out-dir", default="paretoprox-out")


def _run_flags(p):
    p.add_argument("--config", help="JSON file with PpaConfig fields")
    p.add_argument("--seed", type=int)
    p.add_argument("--step-tol", type=float, dest="step_tol")
    p.add_argument("--lambda", type=float, dest="lam")
    p.add_argument("--max-iters", type=int, dest="max_iters")
    p.add_argument("--method", choices=["smooth", "subgradient"])


def build_parser():
    parser = argparse.ArgumentParser(prog="paretoprox", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the proximal point method")
    _common(p)
    _run_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("certify", help="criticality and Fritz-John certificates at a point")
    _common(p)
    p.add_argument("--point", required=True, help="comma-separated coordinates")
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("oracle", help="grid weak Pareto points as CSV")
    _common(p)
    p.add_argument("--points-per-axis", type=int, default=201)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("sweep", help="runs from many starting points")
    _common(p)
    _run_flags(p)
    p.add_argument("--starts", type=int, default=20)
    p.add_argument("--seeds", help="comma-separated seeds for drawing starts")
    p.add_argument("--points-per-axis", type=int, default=201)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("replay", help="rerun a manifest and compare the trajectory CSV")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
