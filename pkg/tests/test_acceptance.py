"""End-to-end acceptance checks, one test per criterion.

Each test records a one-line pass/fail summary that the conftest hook prints
after the run. Run directly with ``python3 tests/test_acceptance.py``.
"""

import sys

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from paretoprox.cli import main as cli_main
from paretoprox.cli import replay_manifest, sweep
from paretoprox.convexset import Box
from paretoprox.criticality import hull_stationarity, is_pareto_critical, positivity_check
from paretoprox.funcspace import (
    Affine, MinOf, VectorFunction, clarke_subdiff, frechet_subdiff, hull_vertices, limiting_subdiff,
)
from paretoprox.oracle import (
    GridSpec, IntervalSet, frechet_limit_subdiff_1d, grid_weak_pareto, hausdorff_1d, kinks_1d,
    limiting_as_intervals,
)
from paretoprox.ppa import PpaConfig, fejer_diagnostics, run, step_norm_identity_check
from paretoprox.problems import corpus_names, load_problem

PSEUDOCONVEX = ["P1", "P2", "P7"]


def record(number, ok, detail):
    ACCEPTANCE_LINES[number] = f"[{'PASS' if ok else 'FAIL'}] {number:2d}. {detail}"
    return ok


@pytest.fixture(scope="module")
def corpus_runs():
    out = {}
    for name in corpus_names():
        p = load_problem(name)
        out[name] = (p, run(p.F, p.S, p.x0, PpaConfig(seed=0)))
    return out


def _sample_points_1d(f, lo, hi, count=50, clearance=1e-2):
    kinks = list(kinks_1d(f, lo, hi))
    pts = list(kinks)
    for t in np.linspace(lo, hi, 4 * count):
        if len(pts) >= count:
            break
        if all(abs(t - k) > clearance for k in kinks):
            pts.append(float(t))
    return pts, kinks


def test_01_subdifferential_oracle():
    worst, checked = 0.0, 0
    for name in corpus_names():
        p = load_problem(name)
        if p.n != 1:
            continue
        lo, hi = p.S.bounding_box()
        for f in p.F.components:
            pts, _ = _sample_points_1d(f, lo[0], hi[0])
            for x in pts:
                lim, _ = frechet_limit_subdiff_1d(f, x)
                worst = max(worst, hausdorff_1d(lim, limiting_as_intervals(f, x)))
                checked += 1
    neg_abs = MinOf([Affine([1.0], 0.0), Affine([-1.0], 0.0)])
    _, reg = frechet_limit_subdiff_1d(neg_abs, 0.0)
    empty = frechet_subdiff(neg_abs, [0.0]).is_empty and reg.empty
    lim_ok = hausdorff_1d(limiting_as_intervals(neg_abs, 0.0), IntervalSet([(-1, -1), (1, 1)])) == 0
    ok = worst <= 1e-4 and empty and lim_ok
    record(1, ok, f"subdifferential oracle: max Hausdorff {worst:.2e} over {checked} points "
                  f"(tol 1e-4); regular subdifferential of -|x| at 0 empty: {empty}")
    assert ok


def test_02_clarke_is_hull():
    worst, checked = 0.0, 0
    rng = np.random.default_rng(0)
    for name in corpus_names():
        p = load_problem(name)
        lo, hi = p.S.bounding_box()
        pts = [np.asarray(k["point"]) for k in p.known_critical_points]
        pts += list(rng.uniform(lo, hi, size=(20, p.n)))
        if p.n == 1:
            for f in p.F.components:
                pts += [np.array([k]) for k in kinks_1d(f, lo[0], hi[0])]
        for x in pts:
            for f in p.F.components:
                C = clarke_subdiff(f, x).generators()
                V = hull_vertices(limiting_subdiff(f, x).generators())
                if C.shape != V.shape:
                    worst = np.inf
                    continue
                a = C[np.lexsort(C.T[::-1])]
                b = V[np.lexsort(V.T[::-1])]
                worst = max(worst, float(np.max(np.abs(a - b))))
                checked += 1
    ok = worst <= 1e-12
    record(2, ok, f"Clarke = hull of limiting generators: max vertex gap {worst:.1e} "
                  f"over {checked} evaluations (tol 1e-12)")
    assert ok


def test_03_limiting_vs_clarke():
    p = load_problem("P3")
    f = [g for g in p.F.components if isinstance(g, MinOf)][0]
    F1 = VectorFunction([f])
    lim = is_pareto_critical(F1, p.S, [0.0])
    hull = hull_stationarity(F1, p.S, [0.0])
    ok = lim.verdict == "not_critical" and hull.stationary
    record(3, ok, f"limiting vs Clarke at 0 for the min-of-parabolas: limiting verdict "
                  f"{lim.verdict}, hull stationary {hull.stationary}")
    assert ok


def test_04_descent(corpus_runs):
    violations, steps = 0, 0
    for p, traj in corpus_runs.values():
        V = traj.values
        violations += int(np.sum(np.any(V[1:] > V[:-1] + 1e-9, axis=1)))
        steps += len(V) - 1
    ok = violations == 0
    record(4, ok, f"vector descent: {violations} violations over {steps} accepted steps")
    assert ok


def test_05_terminal_criticality(corpus_runs):
    lines, ok = [], True
    for name, (p, traj) in corpus_runs.items():
        if traj.termination != "step_tol":
            continue
        fj = traj.final_fritz_john.residual
        crit = is_pareto_critical(p.F, p.S, traj.final.x, tol=1e-6)
        good = fj <= 1e-5 and crit.critical
        ok &= good
        lines.append(f"{name}:fj={fj:.1e},{crit.verdict}")
    passed = sum(1 for s in lines if s.endswith(",critical"))
    record(5, ok, f"terminal criticality: {passed}/{len(lines)} step_tol runs critical at 1e-6 "
                  f"({'; '.join(lines)})")
    assert ok


def test_06_closed_form_trajectory():
    p = load_problem("P1")
    cfg = PpaConfig(lam=2.0, eps=[1.0], step_tol=0.0, max_iters=30, criticality_tol=1e-300)
    traj = run(p.F, p.S, [1.0], cfg)
    k = np.arange(len(traj.iterates))
    err = float(np.max(np.abs(traj.xs[:, 0] - 2.0 ** -k)))
    ok = err <= 1e-9 and len(k) == 31
    record(6, ok, f"closed-form trajectory 2^-k for k <= 30: max error {err:.1e} (tol 1e-9)")
    assert ok


def test_07_fejer(corpus_runs):
    worst = -np.inf
    excluded = 0
    for name in PSEUDOCONVEX:
        _, traj = corpus_runs[name]
        rep = fejer_diagnostics(traj, [traj.final.x])
        excluded += len(rep.excluded)
        worst = max(worst, rep.max_violation)
    ok = worst <= 1e-9 and excluded == 0
    record(7, ok, f"Fejer monotonicity on {','.join(PSEUDOCONVEX)}: max violation {worst:.1e} "
                  f"(tol 1e-9)")
    assert ok


def test_08_weak_pareto_at_limit(corpus_runs):
    res = {}
    for name in PSEUDOCONVEX:
        p, traj = corpus_runs[name]
        res[name] = positivity_check(p.F, [], p.S, traj.final.x, 1e-3, samples=10_000)
    ok = all(res.values())
    record(8, ok, "positivity at pseudoconvex terminal points (eps 1e-3, 1e4 samples): "
                  + ", ".join(f"{k}={v}" for k, v in res.items()))
    assert ok


def test_09_exp_invariance():
    p3, p6 = load_problem("P3"), load_problem("P6")
    lo, hi = p3.S.bounding_box()
    a = grid_weak_pareto(p3.F, GridSpec(Box(lo, hi), 201), p3.S)
    b = grid_weak_pareto(p6.F, GridSpec(Box(lo, hi), 201), p6.S)
    same_front = np.array_equal(a.indices, b.indices)
    disagree = sum(is_pareto_critical(p3.F, p3.S, [x]).verdict
                   != is_pareto_critical(p6.F, p6.S, [x]).verdict
                   for x in np.linspace(lo[0], hi[0], 101))
    ok = same_front and disagree == 0
    record(9, ok, f"exp invariance P3 vs P6: identical grid fronts {same_front} "
                  f"({len(a)} points), verdict disagreements {disagree}/101")
    assert ok


def test_10_step_norm(corpus_runs):
    worst_margin, worst_defect = np.inf, np.inf
    for p, traj in corpus_runs.values():
        rep = step_norm_identity_check(traj)
        if len(rep.squared_margins):
            worst_margin = min(worst_margin, float(rep.squared_margins.min()))
        defects = [r.dominance_defect for r in traj.iterates[1:]]
        if defects:
            worst_defect = min(worst_defect, min(defects))
    ok = worst_margin >= -1e-9 and worst_defect >= -1e-9
    record(10, ok, f"step-norm inequality: min margin {worst_margin:.1e}; "
                   f"min dominance defect {worst_defect:.1e} (tol -1e-9)")
    assert ok


def test_11_sweep_coverage():
    rep = sweep("P2", 20, [0], PpaConfig())
    d = np.array(rep["distance_to_critical_set"])
    fj = rep["fj_pass_rate"]
    ok = rep["completed"] == 20 and d.max() <= 0.05 and fj == 1.0
    record(11, ok, f"sweep P2 x20: max distance to oracle critical set {d.max():.3f} (tol 0.05), "
                   f"Fritz-John pass rate {fj:.2f}, critical rate {rep['critical_rate']:.2f}, "
                   f"max distance to grid front {rep['max_distance_to_front']:.3f}")
    assert ok


def test_12_replay(tmp_path):
    same = {}
    for name in corpus_names():
        out = tmp_path / name
        code = cli_main(["run", name, "--out-dir", str(out)])
        same[name] = code == 0 and replay_manifest(out / f"{name}-seed0.manifest.json")[0]
    ok = all(same.values())
    record(12, ok, f"manifest replay byte-identical for {sum(same.values())}/{len(same)} corpus runs")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
