"""End-to-end acceptance gate.

One test per shipped guarantee, each timed against its budget and checked
at the stated tolerance against an oracle computed by an independent
route.  Every test ends by printing a single pass line with the measured
numbers; pytest -v adds the per-criterion PASSED/FAILED verdict.
"""

import json
import math
import time
from pathlib import Path

import numpy as np
import pytest
from scipy import special, stats

from beliefmdp.aumann import build_aumann_map, gaussian_correlation_kernel
from beliefmdp.beliefs import GaussianBelief
from beliefmdp.beliefgrid import simplex_grid
from beliefmdp.catalog import catalog_model, fixture_model
from beliefmdp.cli import main as cli_main
from beliefmdp.continuity import continuity_profile
from beliefmdp.costs import (
    estimation_cost,
    kinf_compact_probe,
    quadratic_cost,
    table_cost,
)
from beliefmdp.diffeo import check_diffeomorphic
from beliefmdp.feller import feller_modulus
from beliefmdp.filtering import bayes_update
from beliefmdp.fixtures import load_fixture
from beliefmdp.gridfilter import gaussian_on_grid, grid_bayes_oracle
from beliefmdp.kernels import transition_noise_map
from beliefmdp.models import observe, step_state
from beliefmdp.noise import Box
from beliefmdp.setconv import Ball, set_convergence_check
from beliefmdp.solver import value_iteration


def _passline(n, name, detail):
    print(f"criterion {n:02d} {name}: PASS ({detail})")


def test_criterion_01_kalman_matches_grid_oracle():
    start = time.perf_counter()
    model = catalog_model("lssm", {"F1": [[0.9]], "F2": [[1.0]], "G": [[1.0]],
                                   "sigma_xi2": 1.0, "sigma_eta2": 0.25,
                                   "mean0": [0.0], "cov0": [[1.0]]})
    axes = (np.linspace(-8.0, 8.0, 401),)
    a = np.array([0.0])

    rng = np.random.default_rng(20260814)
    x = np.array([rng.standard_normal()])
    kalman = GaussianBelief(model.p0.mean, model.p0.cov)
    grid = gaussian_on_grid(model.p0, axes)
    l1_steps = []
    for t in range(10):
        x = step_state(model, x, a, model.mu.sample(1000 + t, 1)[0])
        y = observe(model, a, x, model.nu.sample(2000 + t, 1)[0])
        kalman = bayes_update(model, kalman, a, y).posterior
        grid = grid_bayes_oracle(model, axes, grid, a, y)
        l1_steps.append(float(np.abs(gaussian_on_grid(kalman, axes).weights
                                     - grid.weights).sum()))
    elapsed = time.perf_counter() - start
    assert l1_steps[0] <= 0.02
    assert max(l1_steps) <= 0.05
    assert elapsed < 5.0
    _passline(1, "kalman-vs-grid-oracle",
              f"one-step L1 {l1_steps[0]:.2e}, 10-step max {max(l1_steps):.2e}, "
              f"{elapsed:.1f}s")


def test_criterion_02_tv_counterexamples_detected():
    radii = [2.0 ** -k for k in range(1, 7)]  # 1/2 .. 1/64

    start = time.perf_counter()
    delta = catalog_model("delta_noise_counterexample", {})
    prof = continuity_profile(
        transition_noise_map(delta, np.zeros(delta.action_dim)), delta.mu,
        np.zeros(delta.state_dim), radii, n_samples=4000, seed=0)
    t_delta = time.perf_counter() - start
    tvs = [row.tv for row in prof.rows]
    assert tvs == [1.0] * len(radii)
    assert prof.verdicts["tv"] == "discontinuous"
    assert t_delta < 10.0

    start = time.perf_counter()
    sing = catalog_model("singular_gaussian_counterexample", {})
    prof2 = continuity_profile(
        transition_noise_map(sing, np.zeros(sing.action_dim)), sing.mu,
        np.zeros(sing.state_dim), radii,
        directions=sing.metadata["profile_directions"],
        n_samples=4000, seed=0)
    t_sing = time.perf_counter() - start
    assert prof2.verdicts["tv"] == "discontinuous"
    assert t_sing < 10.0
    _passline(2, "tv-counterexamples",
              f"delta tv=1 at all {len(radii)} radii in {t_delta:.1f}s; "
              f"singular verdict discontinuous in {t_sing:.1f}s")


def test_criterion_03_tv_matches_gaussian_shift_formula():
    start = time.perf_counter()
    model = catalog_model("lssm", {"F1": [[1.0]], "sigma_xi2": 1.0})
    radii = [0.5, 0.1, 0.02]
    prof = continuity_profile(
        transition_noise_map(model, np.zeros(1)), model.mu, np.zeros(1),
        radii, n_samples=4000, seed=0, mode="density", density_grid_res=401)
    elapsed = time.perf_counter() - start
    errs = []
    for row, r in zip(prof.rows, radii):
        oracle = float(special.erf(r / (2.0 * math.sqrt(2.0))))
        errs.append(abs(row.tv - oracle))
    assert max(errs) <= 0.01
    assert elapsed < 10.0
    _passline(3, "tv-gaussian-shift",
              f"max |tv - erf(r/2sqrt2)| = {max(errs):.2e} over r={radii}, "
              f"{elapsed:.1f}s")


def _joint_transition_map(model):
    def phi(s2, omegas, _m=model):
        return _m.transition(s2[: _m.state_dim], s2[_m.state_dim:], omegas)
    return phi


def test_criterion_04_diffeomorphic_checker():
    passes = {}
    for name in ("arctan_example", "additive_nonlinear", "multiplicative_nonlinear"):
        m = catalog_model(name, {})
        joint = np.zeros(m.state_dim + m.action_dim)
        if name == "multiplicative_nonlinear":
            joint = np.concatenate([np.ones(m.state_dim), np.zeros(m.action_dim)])
        rep = check_diffeomorphic(_joint_transition_map(m),
                                  Box(joint - 0.5, joint + 0.5),
                                  m.mu.truncated_box(), grid_res=7, seed=0)
        passes[name] = rep.verdict
    assert all(v == "pass" for v in passes.values()), passes

    def collapsed(s2, omegas):
        s = omegas[:, 0:1] + omegas[:, 1:2]
        return np.concatenate([s, s], axis=1)

    rep = check_diffeomorphic(collapsed, Box([-1.0], [1.0]),
                              Box([-1.0, -1.0], [1.0, 1.0]), grid_res=7, seed=0)
    assert rep.verdict == "fail"

    arctan = catalog_model("arctan_example", {})
    xi = arctan.mu.sample(7, 20000)
    gaps = {}
    for xval, lim in ((0.0, math.pi / 2.0), (1.0, math.pi)):
        img = arctan.transition(np.array([xval]), np.array([0.0]), xi)
        lo, hi = float(img.min()), float(img.max())
        assert -lim < lo < -lim + 0.05
        assert lim - 0.05 < hi < lim
        gaps[xval] = max(lo + lim, lim - hi)
    _passline(4, "diffeomorphic-checker",
              f"3 catalog maps pass, det==0 map fails; image endpoint gaps "
              f"{gaps[0.0]:.3f} / {gaps[1.0]:.3f} < 0.05")


def test_criterion_05_gaussian_copula_map():
    amap = build_aumann_map(gaussian_correlation_kernel())
    u = np.linspace(1.0 / 22.0, 21.0 / 22.0, 21)
    U1, U2 = np.meshgrid(u, u)
    pts = np.column_stack([U1.ravel(), U2.ravel()])
    z = special.ndtri(pts)
    worst_rel = 0.0
    corr_errs = {}
    for r in (0.0, 0.5, -0.5, 0.9, -0.9):
        dets = amap.jacobian_det(np.array([r]), pts)
        oracle = math.sqrt(1.0 - r * r) / (
            stats.norm.pdf(z[:, 0]) * stats.norm.pdf(z[:, 1]))
        worst_rel = max(worst_rel, float(np.max(np.abs(dets / oracle - 1.0))))

        draws = np.random.default_rng(99).random((100000, 2))
        out = amap(np.array([r]), draws)
        corr = float(np.corrcoef(out[:, 0], out[:, 1])[0, 1])
        corr_errs[r] = abs(corr - r)
    assert worst_rel <= 1e-4
    assert max(corr_errs.values()) <= 0.01
    _passline(5, "gaussian-copula-map",
              f"jacobian rel err {worst_rel:.1e}, corr err "
              f"{max(corr_errs.values()):.4f} at 1e5 points")


def test_criterion_06_set_convergence_disk():
    start = time.perf_counter()

    def phi(s2, omegas):
        return float(np.atleast_1d(s2)[0]) * np.atleast_2d(omegas)

    region = Ball(np.zeros(2), 1.0)
    rep = set_convergence_check(phi, region, np.array([1.0]), np.array([1.1]),
                                resolution=600, seed=0)
    sym_oracle = math.pi * (1.1 ** 2 - 1.0)
    sym_rel = abs(rep.symdiff - sym_oracle) / sym_oracle
    haus_rel = abs(rep.hausdorff - 0.1) / 0.1
    assert sym_rel <= 0.02
    assert haus_rel <= 0.02

    ladder = []
    for s in (1.1, 1.01, 1.001):
        r = set_convergence_check(phi, region, np.array([1.0]), np.array([s]),
                                  resolution=600, seed=0)
        ladder.append((r.symdiff, r.hausdorff))
    assert ladder[0][0] > ladder[1][0] > ladder[2][0]
    assert ladder[0][1] > ladder[1][1] > ladder[2][1]
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    _passline(6, "set-convergence-disk",
              f"symdiff rel {sym_rel:.4f}, hausdorff rel {haus_rel:.4f}, "
              f"ladder decreasing, {elapsed:.1f}s")


def test_criterion_07_feller_modulus_split():
    radii = [0.5, 0.25, 0.125, 0.0625, 0.03125]
    start = time.perf_counter()
    lssm = catalog_model("lssm", {})
    rep = feller_modulus(lssm, np.zeros(1), np.zeros(1), radii,
                         n_samples=20000, seed=0)
    assert rep.modulus[-1] < 0.05

    pp = fixture_model("pomdp1_pointmass", {})
    rep2 = feller_modulus(pp, np.zeros(1), np.zeros(1), radii,
                          n_samples=20000, seed=0)
    assert min(rep2.modulus) > 0.1
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    _passline(7, "feller-modulus",
              f"lssm tail {rep.modulus[-1]:.3f} < 0.05, point-mass floor "
              f"{min(rep2.modulus):.3f} > 0.1, {elapsed:.1f}s")


def _exhaustive_backup(model, table, alpha, grid, horizon):
    """Direct recursion with L1-scan projection, coded apart from the solver."""
    N, A, Y = grid.n_nodes, model.n_actions, model.n_obs
    v = np.zeros(N)
    for _ in range(horizon):
        v_new = np.empty(N)
        for n in range(N):
            z = grid.nodes[n]
            best = np.inf
            for a in range(A):
                q = float(z @ table[:, a])
                for y in range(Y):
                    joint = (z @ model.transition[a]) * model.observation[a][:, y]
                    mass = float(joint.sum())
                    if mass <= 0:
                        continue
                    post = joint / mass
                    near = int(np.argmin(np.sum(np.abs(grid.nodes - post), axis=1)))
                    q += alpha * mass * v[near]
                best = min(best, q)
            v_new[n] = best
        v = v_new
    return v


def test_criterion_08_solver_against_exhaustive_oracle():
    start = time.perf_counter()
    model = load_fixture("two_state_pomdp")
    table = np.asarray(model.metadata["cost_table"], dtype=float)
    cost = table_cost(table)
    alpha, mesh = 0.9, 200

    res = value_iteration(model, cost, alpha, mesh, mode="horizon", horizon=60)
    oracle = _exhaustive_backup(model, table, alpha, simplex_grid(2, mesh), 60)
    sup_gap = float(np.max(np.abs(res.value_fn.values - oracle)))
    assert sup_gap <= 1e-3

    ladder = res.horizon_values
    assert all(np.all(hi >= lo) for lo, hi in zip(ladder, ladder[1:]))

    tol_res = value_iteration(model, cost, alpha, mesh, tol=1e-3)
    tail = tol_res.contraction_ratios[-10:]
    assert max(tail) <= 0.9 + 0.02

    rescaled = value_iteration(model, table_cost(2.0 * table), alpha, mesh, tol=1e-3)
    assert np.array_equal(tol_res.value_fn.policy, rescaled.value_fn.policy)
    elapsed = time.perf_counter() - start
    assert elapsed < 120.0
    _passline(8, "solver-vs-exhaustive-backup",
              f"sup gap {sup_gap:.1e}, ladder monotone, contraction max "
              f"{max(tail):.3f}, argmin rescale-invariant, {elapsed:.1f}s")


def test_criterion_09_cost_compactness_probes():
    start = time.perf_counter()
    quad = quadratic_cost(np.eye(2), [[1.0]])
    box1 = Box([-0.5, -0.5], [0.5, 0.5])
    rep = kinf_compact_probe(quad, box1, 4.0, Box([-1.0], [1.0]),
                             resolution=9, seed=0)
    assert rep.verdict == "bounded"
    assert abs(rep.radius - 2.0) <= 0.05  # sqrt(gamma / lambda_min(A))

    est = estimation_cost(np.eye(2), np.eye(2))
    rep2 = kinf_compact_probe(est, box1, 4.0, Box([-1.0, -1.0], [1.0, 1.0]),
                              resolution=9, seed=0)
    assert rep2.verdict == "bounded"

    sing = quadratic_cost([[1.0, 0.0], [0.0, 0.0]], [[1.0]])
    rep3 = kinf_compact_probe(sing, box1, 4.0, Box([-1.0], [1.0]),
                              resolution=9, mode="joint", seed=0)
    assert rep3.verdict == "unbounded_witness"
    far = rep3.witness[-1]
    assert abs(far["x"][1]) > 100.0 and abs(far["x"][0]) <= 2.0
    assert far["cost"] <= 4.0
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    _passline(9, "cost-compactness-probes",
              f"quadratic radius {rep.radius:.2f} (oracle 2.0), estimation "
              f"bounded, null-direction escape |x2|={abs(far['x'][1]):.0f}, "
              f"{elapsed:.1f}s")


def _task_configs():
    fixture = {"kind": "fixture", "name": "two_state_pomdp"}
    return {
        "simulate": ({"horizon": 4, "n_episodes": 10, "alpha": 0.9,
                      "policy": {"kind": "fixed", "action": 1},
                      "cost": {"family": "fixture_metadata"},
                      "record_trajectories": 2}, fixture),
        "filter": ({"horizon": 5, "actions": 0.0}, fixture),
        "diagnose": ({"checks": ["diffeo", "transition_profile"],
                      "radii": [0.5, 0.25], "n_samples": 2000,
                      "grid_res": 5}, {"kind": "catalog", "name": "additive_nonlinear"}),
        "feller": ({"radii": [0.5, 0.25], "n_samples": 1000,
                    "f_dictionary_size": 16, "y_partition_levels": 3},
                   {"kind": "catalog", "name": "lssm"}),
        "setconv": ({"map": {"kind": "scaling", "dim": 2},
                     "region": {"center": [0.0, 0.0], "radius": 1.0},
                     "s2": [1.0], "ladder": [[1.2], [1.05]],
                     "resolution": 64}, None),
        "solve": ({"alpha": 0.9, "mesh": 20}, fixture),
        "probe-cost": ({"cost": {"family": "quadratic",
                                 "params": {"X": [[1.0, 0.0], [0.0, 1.0]],
                                            "A": [[1.0]]}},
                        "gamma": 4.0,
                        "state_region": {"lo": [-0.5, -0.5], "hi": [0.5, 0.5]},
                        "action_box": {"lo": [-1.0], "hi": [1.0]}}, None),
    }


def test_criterion_10_cli_reruns_are_byte_identical(tmp_path, capsys):
    checked_files = 0
    for task, (params, model) in _task_configs().items():
        blob = {"schema_version": 1, "task": task, "seed": 5, "params": params}
        if model is not None:
            blob["model"] = model
        cfg_path = tmp_path / f"{task}.json"
        cfg_path.write_text(json.dumps(blob))
        argv = [task, "--config", str(cfg_path), "--out",
                str(tmp_path / "out"), "--label", "rerun"]
        assert cli_main(argv) == 0, task
        capsys.readouterr()
        run_dir = Path(tmp_path / "out" / task / "rerun")
        first = {p.name: p.read_bytes() for p in run_dir.iterdir()}
        assert "report.json" in first
        assert cli_main(argv) == 0, task
        capsys.readouterr()
        again = {p.name: p.read_bytes() for p in run_dir.iterdir()}
        assert first == again, f"rerun of {task} changed bytes"
        checked_files += len(first)
    _passline(10, "cli-byte-reproducibility",
              f"7 tasks rerun, {checked_files} artifact files byte-identical")
