"""Numerical inversion of noise maps and change-of-variables densities.

The image density of a noise law under a parametrized diffeomorphism is
``f(phi^{-1}(s1)) / |det D phi(phi^{-1}(s1))|``.  The preimage is found by
damped Newton iteration from a fixed set of coarse starts inside the noise
box; targets for which every start fails are reported as outside the image
(density zero).  The batch core inverts many targets per call so grid
oracles and rasterization stay fast.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import GriddedKernel
from .diffeo import noise_jacobian
from .noise import Box, NoiseDistribution
from .seeding import substream

__all__ = [
    "SingularJacobianError",
    "InversionResult",
    "newton_invert",
    "change_of_variables_density",
    "density_via_change_of_variables",
    "density_on_grid",
]

_N_STARTS = 8
_MAX_ITERS = 50
_STEP_TOL = 1e-10
_SINGULARITY_TOL = 1e-8


class SingularJacobianError(RuntimeError):
    """Jacobian numerically singular at a located preimage."""

    def __init__(self, message: str, s2=None, omega=None, target=None):
        super().__init__(message)
        self.s2 = s2
        self.omega = omega
        self.target = target


@dataclass
class InversionResult:
    omegas: np.ndarray        # (k, n) preimage candidates
    converged: np.ndarray     # (k,) bool
    dets: np.ndarray          # (k,) Jacobian determinant at the candidate
    n_failures: int           # targets with no converged start
    n_singular_stalls: int    # Newton steps abandoned on a singular Jacobian


def _row_norm(arr: np.ndarray) -> np.ndarray:
    return np.max(np.abs(arr), axis=1)


def _starts(box: Box, n_starts: int) -> np.ndarray:
    pts = [box.center()]
    if n_starts > 1:
        rng = substream(0, "newton_starts")
        inset = 1e-6 * np.maximum(box.widths, 1.0)
        pts.append(box.lo + inset + 0.25 * box.widths)
        pts.append(box.hi - inset - 0.25 * box.widths)
        while len(pts) < n_starts:
            pts.append(rng.uniform(box.lo + inset, box.hi - inset))
    return np.asarray(pts[:n_starts])


def newton_invert(
    phi,
    s2,
    targets: np.ndarray,
    box: Box,
    *,
    max_iters: int = _MAX_ITERS,
    step_tol: float = _STEP_TOL,
    residual_tol: float = 1e-8,
    n_starts: int = _N_STARTS,
) -> InversionResult:
    """Solve phi(s2, omega) = target for each target, constrained to the box.

    Damped (backtracking) Newton with central-difference Jacobians; a target
    counts as converged only when the last step is below ``step_tol`` and
    the residual is below ``residual_tol`` (both relative to scale).
    """
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    k, n = targets.shape
    inset = 1e-12 * np.maximum(box.widths, 1.0)
    lo, hi = box.lo + inset, box.hi - inset

    best_omega = np.tile(box.center(), (k, 1))
    converged = np.zeros(k, dtype=bool)
    n_singular = 0
    res_scale = residual_tol * (1.0 + _row_norm(targets))

    for start in _starts(box, n_starts):
        todo = np.where(~converged)[0]
        if todo.size == 0:
            break
        w = np.tile(start, (todo.size, 1))
        active = np.ones(todo.size, dtype=bool)
        resid = np.atleast_2d(phi(s2, w)) - targets[todo]
        rnorm = _row_norm(resid)
        for _ in range(max_iters):
            act = np.where(active)[0]
            if act.size == 0:
                break
            wa = w[act]
            J = noise_jacobian(phi, s2, wa)
            dets = np.linalg.det(J)
            solvable = np.isfinite(dets) & (np.abs(dets) > 1e-250)
            n_singular += int(np.sum(~solvable))
            delta = np.zeros_like(wa)
            if np.any(solvable):
                delta[solvable] = np.linalg.solve(
                    J[solvable], resid[act][solvable][..., None])[..., 0]
            # backtracking line search on the residual norm, clipped into the box
            lam = np.ones(act.size)
            accepted = np.zeros(act.size, dtype=bool)
            new_w = wa.copy()
            new_rn = rnorm[act].copy()
            new_resid = resid[act].copy()
            for _bt in range(10):
                rem = ~accepted & solvable
                if not np.any(rem):
                    break
                trial = np.clip(wa[rem] - lam[rem, None] * delta[rem], lo, hi)
                tresid = np.atleast_2d(phi(s2, trial)) - targets[todo][act][rem]
                trn = _row_norm(tresid)
                improve = trn < new_rn[rem]
                rem_idx = np.where(rem)[0]
                good = rem_idx[improve]
                new_w[good] = trial[improve]
                new_rn[good] = trn[improve]
                new_resid[good] = tresid[improve]
                accepted[good] = True
                lam[rem_idx[~improve]] *= 0.5
            step = _row_norm(new_w - wa)
            w[act] = new_w
            resid[act] = new_resid
            rnorm[act] = new_rn
            done = accepted & (step <= step_tol * (1.0 + _row_norm(new_w)))
            stalled = ~accepted
            hit = done & (new_rn <= res_scale[todo][act])
            conv_idx = todo[act[hit]]
            best_omega[conv_idx] = new_w[hit]
            converged[conv_idx] = True
            active[act[done | stalled]] = False

    dets = np.zeros(k)
    if np.any(converged):
        idx = np.where(converged)[0]
        J = noise_jacobian(phi, s2, best_omega[idx])
        dets[idx] = np.linalg.det(J)
    return InversionResult(
        omegas=best_omega,
        converged=converged,
        dets=dets,
        n_failures=int(np.sum(~converged)),
        n_singular_stalls=n_singular,
    )


def change_of_variables_density(
    phi,
    p: NoiseDistribution,
    s2,
    points: np.ndarray,
    *,
    omega_box: Box | None = None,
    singularity_tol: float = _SINGULARITY_TOL,
) -> tuple[np.ndarray, InversionResult]:
    """Image density of the noise law at the given points.

    Points whose preimage search fails everywhere get density 0 (outside
    the image).  A located preimage with a numerically singular Jacobian
    raises :class:`SingularJacobianError` with a witness.
    """
    if p.density is None:
        raise ValueError("noise law has no Lebesgue density")
    box = omega_box or p.truncated_box()
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    res = newton_invert(phi, s2, pts, box)
    values = np.zeros(pts.shape[0])
    if np.any(res.converged):
        idx = np.where(res.converged)[0]
        dets = res.dets[idx]
        base = p.density(res.omegas[idx])
        tiny = np.abs(dets) <= singularity_tol
        if np.any(tiny & (base > 0)):
            j = int(idx[np.argmax(tiny & (base > 0))])
            raise SingularJacobianError(
                f"Jacobian determinant {res.dets[j]:.3e} at located preimage",
                s2=np.asarray(s2).tolist(),
                omega=res.omegas[j].tolist(),
                target=pts[j].tolist(),
            )
        safe = ~tiny
        values[idx[safe]] = base[safe] / np.abs(dets[safe])
    return values, res


def density_via_change_of_variables(phi, p: NoiseDistribution, s2, s1, **kw) -> float:
    """Scalar image density at one point s1 (0 when s1 is outside the image)."""
    vals, _ = change_of_variables_density(phi, p, s2, np.atleast_2d(np.asarray(s1, dtype=float)), **kw)
    return float(vals[0])


def density_on_grid(phi, p: NoiseDistribution, s2, axes, **kw) -> GriddedKernel:
    """Gridded image density via the change-of-variables identity."""
    axes = tuple(np.asarray(ax, dtype=float).reshape(-1) for ax in axes)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    vals, res = change_of_variables_density(phi, p, s2, pts, **kw)
    return GriddedKernel(
        axes=axes,
        values=vals,
        source={
            "kind": "change_of_variables",
            "s2": np.atleast_1d(np.asarray(s2, dtype=float)).tolist(),
            "n_newton_failures": res.n_failures,
        },
    )
