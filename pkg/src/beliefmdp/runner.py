"""Task execution behind the service and the CLI.

``run_task`` resolves a validated config into library calls, collects the
artifacts as (filename, text) pairs, and reports numeric failures
(degenerate updates, singular Jacobians) as a structured status instead
of raising.  All float formatting goes through repr(), so identical
configs reproduce artifact bytes exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .beliefs import FiniteBelief, GaussianBelief, ParticleBelief, belief_summary
from .catalog import CatalogError, catalog_model, fixture_model, model_from_json
from .config import CostRef, ExperimentConfig, ModelRef
from .continuity import continuity_profile, profile_csv
from .costs import (
    CostSpec,
    estimation_cost,
    inventory_cost,
    kinf_compact_probe,
    quadratic_cost,
    table_cost,
)
from .diffeo import check_diffeomorphic
from .feller import feller_csv, feller_modulus
from .filtering import (
    DegenerateUpdateError,
    SingularInnovationError,
    bayes_update,
    sample_belief,
)
from .fixtures import FIXTURE_FILES, load_fixture
from .gridfilter import gaussian_on_grid, grid_bayes_oracle
from .inversion import SingularJacobianError
from .kernels import observation_noise_map, transition_noise_map
from .models import (
    FiniteTablePOMDP,
    StochasticControlModel,
    observe,
    observe1,
    step_state,
)
from .noise import Box, noise_from_json
from .rollout import simulate_policy
from .seeding import substream
from .setconv import Ball, set_convergence_check
from .solver import value_iteration

__all__ = ["TaskResult", "TaskSetupError", "run_task", "build_report"]

_NUMERIC_ERRORS = (DegenerateUpdateError, SingularInnovationError, SingularJacobianError)


class TaskSetupError(ValueError):
    """Config is schema-valid but names something the task cannot use."""


@dataclass
class TaskResult:
    status: str                                   # "ok" | "numeric_error"
    summary: dict
    artifacts: list = field(default_factory=list)  # (filename, text) pairs
    error: dict | None = None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _csv(header: list[str], rows: list) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _resolve_model(ref: ModelRef):
    try:
        if ref.kind == "catalog":
            return catalog_model(ref.name, ref.params)
        if ref.kind == "fixture":
            if ref.name in FIXTURE_FILES:
                return load_fixture(ref.name)
            return fixture_model(ref.name, ref.params)
        blob = ref.inline
        if blob.get("kind") == "finite_pomdp":
            return FiniteTablePOMDP.from_json(blob)
        return model_from_json(blob)
    except (CatalogError, KeyError, ValueError) as err:
        raise TaskSetupError(f"cannot resolve model: {err}") from err


def _resolve_cost(ref: CostRef | None, model=None) -> CostSpec | None:
    if ref is None:
        return None
    p = ref.params
    try:
        if ref.family == "quadratic":
            return quadratic_cost(p["X"], p["A"], mode=ref.mode)
        if ref.family == "estimation":
            return estimation_cost(p["X"], p["A"], mode=ref.mode)
        if ref.family == "table":
            return table_cost(p["table"], mode=ref.mode)
        if ref.family == "inventory":
            return inventory_cost(
                p.get("fixed_order", [0.0]), p.get("unit_order", [1.0]),
                p.get("holding", 1.0), p.get("backlog", 1.0),
                noise_from_json(p["demand"]), lost_sales=p.get("lost_sales", False),
                n_mc=p.get("n_mc", 4096), seed=p.get("seed", 0))
        # fixture_metadata: stage table shipped with a finite model
        if not isinstance(model, FiniteTablePOMDP) or "cost_table" not in model.metadata:
            raise TaskSetupError("cost family 'fixture_metadata' needs a finite model "
                                 "with a cost_table in its metadata")
        return table_cost(model.metadata["cost_table"], mode=ref.mode)
    except (KeyError, ValueError) as err:
        if isinstance(err, TaskSetupError):
            raise
        raise TaskSetupError(f"cannot resolve cost: {err}") from err


def _action_vector(value, dim: int) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(0.0 if value is None else value, dtype=float))
    if arr.shape == (dim,):
        return arr
    if arr.shape == (1,):
        return np.full(dim, float(arr[0]))
    raise TaskSetupError(f"action has dimension {arr.shape[0]}, model wants {dim}")


def _error_payload(err: Exception) -> dict:
    witness = {}
    for name in ("prior", "s2", "omega", "target"):
        val = getattr(err, name, None)
        if val is None:
            continue
        if isinstance(val, (FiniteBelief,)):
            witness[name] = val.weights.tolist()
        elif isinstance(val, (GaussianBelief,)):
            witness[name] = {"mean": val.mean.tolist(), "cov": val.cov.tolist()}
        elif isinstance(val, ParticleBelief):
            witness[name] = belief_summary(val)
        else:
            witness[name] = _jsonable(np.asarray(val).tolist())
    return {"type": type(err).__name__, "message": str(err), "witness": witness}


# ---------------------------------------------------------------- simulate

def _run_simulate(cfg: ExperimentConfig, p) -> TaskResult:
    model = _resolve_model(cfg.model)
    cost = _resolve_cost(p.cost, model)
    if isinstance(model, FiniteTablePOMDP):
        if p.policy.kind == "greedy":
            vi = value_iteration(model, cost, p.alpha, p.policy.mesh)
            policy = vi.value_fn
        else:
            policy = int(p.policy.action or 0)
            if not 0 <= policy < model.n_actions:
                raise TaskSetupError(f"fixed action {policy} out of range")
    else:
        if p.policy.kind == "greedy":
            raise TaskSetupError("greedy policies need a finite model")
        policy = _action_vector(p.policy.action, model.action_dim)

    report = simulate_policy(
        model, policy, p.horizon, n_episodes=p.n_episodes, alpha=p.alpha,
        seed=cfg.seed, cost=cost, filter_type=p.filter,
        n_particles=p.n_particles, record_trajectories=p.record_trajectories)

    if isinstance(model, FiniteTablePOMDP):
        header = ["episode", "t", "x", "a", "y"] + [f"belief_{k}" for k in range(model.n_states)]
        rows = []
        for e, traj in enumerate(report.trajectories):
            for r in traj:
                rows.append([e, r["t"], r["x"], r["a"], r["y"], *r["belief"]])
    else:
        d, ell, m = model.state_dim, model.action_dim, model.obs_dim
        header = (["episode", "t"] + [f"x_{i}" for i in range(d)]
                  + [f"a_{i}" for i in range(ell)] + [f"y_{i}" for i in range(m)]
                  + [f"belief_mean_{i}" for i in range(d)]
                  + [f"belief_spread_{i}" for i in range(d)])
        rows = []
        for e, traj in enumerate(report.trajectories):
            for r in traj:
                a = r["a"] if r["a"] is not None else [None] * ell
                bs = r["belief"]
                spread = bs["spread"] if bs["spread"] is not None else [None] * d
                rows.append([e, r["t"], *r["x"], *a, *r["y"], *bs["mean"], *spread])
    summary = {
        "mean_cost": report.mean_cost, "band": report.band,
        "degenerate_count": report.degenerate_count,
        "n_episodes": report.n_episodes, "horizon": report.horizon,
        "alpha": report.alpha,
    }
    return TaskResult(status="ok", summary=_jsonable(summary),
                      artifacts=[("trajectories.csv", _csv(header, rows))])


# ---------------------------------------------------------------- filter

def _run_filter(cfg: ExperimentConfig, p) -> TaskResult:
    model = _resolve_model(cfg.model)
    if isinstance(p.actions, list):
        if len(p.actions) != p.horizon:
            raise TaskSetupError("per-step actions must match the horizon")
        step_actions = [float(a) for a in p.actions]
    else:
        step_actions = [float(p.actions)] * p.horizon

    if isinstance(model, FiniteTablePOMDP):
        return _run_filter_finite(cfg, p, model, step_actions)
    return _run_filter_continuous(cfg, p, model, step_actions)


def _run_filter_finite(cfg, p, model: FiniteTablePOMDP, step_actions) -> TaskResult:
    rng = substream(cfg.seed, "filter_truth")
    z = model.uniform_belief()
    x = int(rng.choice(model.n_states, p=z.weights))
    header = ["t", "a", "y"] + [f"belief_{k}" for k in range(model.n_states)]
    rows = []
    for t, a_raw in enumerate(step_actions):
        a = int(a_raw)
        if not 0 <= a < model.n_actions:
            raise TaskSetupError(f"action {a} out of range at step {t}")
        x_next = int(rng.choice(model.n_states, p=model.transition[a, x]))
        src = x_next if model.flavor == "pomdp" else x
        y = int(rng.choice(model.n_obs, p=model.observation[a, src]))
        step = bayes_update(model, z, a, y)
        z = step.posterior
        rows.append([t + 1, a, y, *z.weights.tolist()])
        x = x_next
    summary = {"final_belief": z.weights.tolist(), "steps": len(rows)}
    return TaskResult(status="ok", summary=_jsonable(summary),
                      artifacts=[("filter_path.csv", _csv(header, rows))])


def _run_filter_continuous(cfg, p, model: StochasticControlModel, step_actions) -> TaskResult:
    filter_type = p.filter
    if filter_type == "exact":
        raise TaskSetupError("exact filtering needs a finite model")
    if filter_type == "auto":
        filter_type = "kalman" if model.lssm is not None else "particle"
    if filter_type == "kalman":
        if model.lssm is None or not isinstance(model.p0, GaussianBelief):
            raise TaskSetupError("kalman filtering needs linear coefficients and a Gaussian prior")
        z = GaussianBelief(model.p0.mean, model.p0.cov)
    else:
        root = cfg.seed
        pts = sample_belief(model.p0, root, p.n_particles)
        z = ParticleBelief(pts, np.full(p.n_particles, 1.0 / p.n_particles), lineage=(root, 0))

    use_oracle = p.oracle.enabled
    if use_oracle:
        if model.state_dim != 1:
            raise TaskSetupError("the grid oracle runs on 1D state models")
        if model.mu.density is None or model.obs_density is None:
            raise TaskSetupError("the grid oracle needs transition and observation densities")
        axes = (np.linspace(p.oracle.lo, p.oracle.hi, p.oracle.n),)
        if not isinstance(model.p0, GaussianBelief):
            raise TaskSetupError("the grid oracle starts from a Gaussian prior")
        oracle_belief = gaussian_on_grid(model.p0, axes)

    rng = substream(cfg.seed, "filter_truth")
    x = sample_belief(model.p0, cfg.seed * 733 + 17, 1)[0]
    d = model.state_dim
    header = ["t"] + [f"a_{i}" for i in range(model.action_dim)] \
        + [f"y_{i}" for i in range(model.obs_dim)] \
        + [f"mean_{i}" for i in range(d)] + [f"spread_{i}" for i in range(d)]
    if filter_type == "particle":
        header.append("ess")
    if use_oracle:
        header.append("l1_to_oracle")
    rows = []
    max_l1 = 0.0
    for t, a_raw in enumerate(step_actions):
        a = _action_vector(a_raw, model.action_dim)
        xi = model.mu.sample(int(rng.integers(2**31)), 1)[0]
        x_next = step_state(model, x, a, xi)
        eta = model.nu.sample(int(rng.integers(2**31)), 1)[0]
        y = observe(model, a, x_next, eta) if model.flavor == "pomdp" else observe1(model, x, a, eta)
        step = bayes_update(model, z, a, y)
        z = step.posterior
        bs = belief_summary(z)
        row = [t + 1, *a.tolist(), *np.atleast_1d(y).tolist(), *bs["mean"], *bs["spread"]]
        if filter_type == "particle":
            row.append(z.ess())
        if use_oracle:
            oracle_belief = grid_bayes_oracle(model, axes, oracle_belief, a, y)
            approx = gaussian_on_grid(z, axes) if isinstance(z, GaussianBelief) else None
            if approx is None:
                raise TaskSetupError("oracle comparison implemented for the kalman filter")
            l1 = float(np.abs(approx.weights - oracle_belief.weights).sum())
            max_l1 = max(max_l1, l1)
            row.append(l1)
        rows.append(row)
        x = x_next
    summary = {"final_belief": belief_summary(z), "steps": len(rows),
               "filter": filter_type}
    if use_oracle:
        summary["max_l1_to_oracle"] = max_l1
    return TaskResult(status="ok", summary=_jsonable(summary),
                      artifacts=[("filter_path.csv", _csv(header, rows))])


# ---------------------------------------------------------------- diagnose

def _run_diagnose(cfg: ExperimentConfig, p) -> TaskResult:
    model = _resolve_model(cfg.model)
    if not isinstance(model, StochasticControlModel):
        raise TaskSetupError("diagnose runs on stochastic-equation models")
    meta = model.metadata
    base_x = np.asarray(p.base_state if p.base_state is not None
                        else meta.get("profile_base_state", [0.0] * model.state_dim), dtype=float)
    base_a = np.asarray(p.base_action if p.base_action is not None
                        else meta.get("profile_action", [0.0] * model.action_dim), dtype=float)
    directions = p.directions
    if directions is None and "profile_directions" in meta:
        directions = meta["profile_directions"]

    artifacts = []
    summary: dict = {"base_state": base_x.tolist(), "base_action": base_a.tolist()}

    for check in p.checks:
        if check == "diffeo":
            if p.param_box is not None:
                pbox = Box(np.asarray(p.param_box.lo), np.asarray(p.param_box.hi))
            else:
                joint = np.concatenate([base_x, base_a])
                pbox = Box(joint - 1.0, joint + 1.0)
            omega_box = model.mu.truncated_box()

            def phi_joint(s2, omegas, _m=model):
                x = s2[: _m.state_dim]
                a = s2[_m.state_dim:]
                return _m.transition(x, a, omegas)

            rep = check_diffeomorphic(phi_joint, pbox, omega_box,
                                      grid_res=p.grid_res, seed=cfg.seed)
            summary["diffeo"] = rep.to_json()
        elif check == "transition_profile":
            phi = transition_noise_map(model, base_a)
            prof = continuity_profile(
                phi, model.mu, base_x, p.radii, directions=directions,
                n_samples=p.n_samples, seed=cfg.seed, mode=p.mode,
                density_grid_res=p.density_grid_res, floor=p.floor,
                bl_dictionary_size=p.bl_dictionary_size, threads=cfg.threads)
            artifacts.append(("transition_profile.csv", profile_csv(prof)))
            summary["transition_profile"] = prof.to_json()
        else:  # observation_profile: vary the conditioning state of the obs map
            phi = observation_noise_map(model, base_a)
            prof = continuity_profile(
                phi, model.nu, base_x, p.radii, directions=directions,
                n_samples=p.n_samples, seed=cfg.seed, mode=p.mode,
                density_grid_res=p.density_grid_res, floor=p.floor,
                bl_dictionary_size=p.bl_dictionary_size, threads=cfg.threads)
            artifacts.append(("observation_profile.csv", profile_csv(prof)))
            summary["observation_profile"] = prof.to_json()

    return TaskResult(status="ok", summary=_jsonable(summary), artifacts=artifacts)


# ---------------------------------------------------------------- feller

def _run_feller(cfg: ExperimentConfig, p) -> TaskResult:
    model = _resolve_model(cfg.model)
    if not isinstance(model, StochasticControlModel):
        raise TaskSetupError("feller runs on stochastic-equation models")
    rep = feller_modulus(
        model, np.asarray(p.base_state, dtype=float), np.asarray(p.base_action, dtype=float),
        p.radii, f_dictionary_size=p.f_dictionary_size,
        y_partition_levels=p.y_partition_levels, n_samples=p.n_samples,
        seed=cfg.seed, directions=p.directions, threads=cfg.threads)
    return TaskResult(status="ok", summary=_jsonable(rep.to_json()),
                      artifacts=[("feller.csv", feller_csv(rep))])


# ---------------------------------------------------------------- setconv

def _run_setconv(cfg: ExperimentConfig, p) -> TaskResult:
    if p.map.kind == "scaling":
        dim = p.map.dim

        def phi(s2, omegas):
            return float(np.atleast_1d(s2)[0]) * np.atleast_2d(omegas)

        if len(p.region.center) != dim:
            raise TaskSetupError("region center dimension must match map dim")
    else:
        model = _resolve_model(cfg.model)
        if not isinstance(model, StochasticControlModel):
            raise TaskSetupError("catalog_transition map needs a stochastic-equation model")
        action = _action_vector(p.map.action, model.action_dim)
        phi = transition_noise_map(model, action)
        if len(p.region.center) != model.mu.dim:
            raise TaskSetupError("region center must live in noise space")
    region = Ball(np.asarray(p.region.center, dtype=float), p.region.radius)
    base = np.asarray(p.s2, dtype=float)

    header = [f"s2_prime_{i}" for i in range(len(p.ladder[0]))] \
        + ["symdiff", "hausdorff", "inversion_failure_fraction", "inconclusive"]
    rows = []
    reports = []
    for s2p in p.ladder:
        rep = set_convergence_check(phi, region, base, np.asarray(s2p, dtype=float),
                                    resolution=p.resolution, seed=cfg.seed,
                                    failure_threshold=p.failure_threshold)
        reports.append(rep)
        rows.append([*s2p, rep.symdiff, rep.hausdorff,
                     rep.inversion_failure_fraction, rep.inconclusive])
    conclusive = [r for r in reports if not r.inconclusive]
    summary = {
        "s2": base.tolist(),
        "ladder": p.ladder,
        "symdiff": [r.symdiff for r in reports],
        "hausdorff": [r.hausdorff for r in reports],
        "inconclusive": [r.inconclusive for r in reports],
        "symdiff_decreasing": all(a.symdiff > b.symdiff for a, b in zip(conclusive, conclusive[1:])),
        "hausdorff_decreasing": all(a.hausdorff > b.hausdorff for a, b in zip(conclusive, conclusive[1:])),
        "resolution": p.resolution,
    }
    return TaskResult(status="ok", summary=_jsonable(summary),
                      artifacts=[("setconv.csv", _csv(header, rows))])


# ---------------------------------------------------------------- solve

def _run_solve(cfg: ExperimentConfig, p) -> TaskResult:
    model = _resolve_model(cfg.model)
    if not isinstance(model, FiniteTablePOMDP):
        raise TaskSetupError("solve runs on finite table models")
    cost = _resolve_cost(p.cost, model)
    vi = value_iteration(model, cost, p.alpha, p.mesh, mode=p.mode,
                         horizon=p.horizon, tol=p.tol, max_sweeps=p.max_sweeps)
    grid = vi.value_fn.grid
    vheader = [f"node_{k}" for k in range(model.n_states)] + ["value", "action"]
    vrows = [[*grid.nodes[i].tolist(), vi.value_fn.values[i], int(vi.value_fn.policy[i])]
             for i in range(grid.n_nodes)]
    cheader = ["sweep", "sup_diff"]
    crows = [[int(i), d] for i, d in vi.convergence_log]
    tail = vi.contraction_ratios[-10:]
    summary = {
        "n_sweeps": vi.n_sweeps, "stop_reason": vi.stop_reason,
        "final_sup_diff": vi.convergence_log[-1][1] if vi.convergence_log else None,
        "contraction_max_last10": max(tail) if tail else None,
        "n_nodes": grid.n_nodes, "alpha": p.alpha, "mesh": p.mesh,
    }
    return TaskResult(status="ok", summary=_jsonable(summary),
                      artifacts=[("values.csv", _csv(vheader, vrows)),
                                 ("convergence.csv", _csv(cheader, crows))])


# ---------------------------------------------------------------- probe-cost

def _run_probe_cost(cfg: ExperimentConfig, p) -> TaskResult:
    cost = _resolve_cost(p.cost)
    if cost.fn is None:
        raise TaskSetupError("probe-cost needs a pointwise cost callable")
    state_region = Box(np.asarray(p.state_region.lo), np.asarray(p.state_region.hi))
    action_box = Box(np.asarray(p.action_box.lo), np.asarray(p.action_box.hi))
    rep = kinf_compact_probe(cost, state_region, p.gamma, action_box,
                             resolution=p.resolution, mode=p.probe_mode,
                             max_doublings=p.max_doublings, seed=cfg.seed)
    d = len(p.state_region.lo)
    ell = len(p.action_box.lo)
    header = ["level", "cost", "radius"] + [f"x_{i}" for i in range(d)] + [f"a_{i}" for i in range(ell)]
    rows = [[w["level"], w["cost"], w["radius"], *w["x"], *w["a"]] for w in rep.witness]
    return TaskResult(status="ok", summary=_jsonable(rep.to_json()),
                      artifacts=[("witness.csv", _csv(header, rows))])


_DISPATCH = {
    "simulate": _run_simulate,
    "filter": _run_filter,
    "diagnose": _run_diagnose,
    "feller": _run_feller,
    "setconv": _run_setconv,
    "solve": _run_solve,
    "probe-cost": _run_probe_cost,
}


def build_report(cfg: ExperimentConfig, result: TaskResult) -> str:
    """The report.json text: resolved config, version, summary, artifact list.

    Wall-clock time is deliberately not written here so identical configs
    reproduce the file byte-for-byte; timing goes to the console.
    """
    blob = {
        "schema_version": 1,
        "library_version": __version__,
        "status": result.status,
        "config": cfg.resolved(),
        "summary": result.summary,
        "artifacts": [name for name, _ in result.artifacts],
        "error": result.error,
    }
    return json.dumps(blob, sort_keys=True, indent=2) + "\n"


def run_task(cfg: ExperimentConfig) -> TaskResult:
    """Execute one task; numeric failures become a structured result."""
    handler = _DISPATCH[cfg.task]
    params = cfg.typed_params()
    try:
        result = handler(cfg, params)
    except _NUMERIC_ERRORS as err:
        result = TaskResult(status="numeric_error", summary={},
                            artifacts=[], error=_error_payload(err))
    result.artifacts = [(name, text) for name, text in result.artifacts]
    result.artifacts.append(("report.json", build_report(cfg, result)))
    return result
