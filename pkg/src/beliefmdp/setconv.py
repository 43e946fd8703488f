"""Image-set convergence diagnostics for parametrized noise maps.

For a compact region K in noise space, compares the image sets
phi(s2, K) and phi(s2', K) by rasterizing both on a shared grid:

* symmetric-difference measure: cell count of the XOR times cell area
* Hausdorff distance: via Euclidean distance transforms of the masks

Cell membership is decided by Newton inversion (cell center has a
preimage inside K).  A forward-sampled cross-check flags cells the
inversion missed; a high miss fraction marks the report inconclusive.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .inversion import newton_invert
from .noise import Box
from .seeding import substream

__all__ = ["Ball", "SetConvergenceReport", "set_convergence_check"]

_FAILURE_THRESHOLD = 0.05


@dataclass(frozen=True)
class Ball:
    """Closed Euclidean ball in noise space."""

    center: np.ndarray
    radius: float

    def __post_init__(self) -> None:
        c = np.atleast_1d(np.asarray(self.center, dtype=float))
        object.__setattr__(self, "center", c)
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def bounding_box(self) -> Box:
        return Box(self.center - self.radius, self.center + self.radius)

    def contains(self, points: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.norm(pts - self.center, axis=1) <= self.radius * (1.0 + tol) + tol

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        z = rng.standard_normal((count, self.dim))
        z /= np.maximum(np.linalg.norm(z, axis=1, keepdims=True), 1e-300)
        # half interior (volume-uniform radii), half on the boundary sphere
        u = rng.random(count) ** (1.0 / self.dim)
        u[: count // 2] = 1.0
        return self.center + self.radius * u[:, None] * z


def _region_box(region) -> Box:
    if isinstance(region, Ball):
        return region.bounding_box()
    if isinstance(region, Box):
        return region
    raise TypeError("region must be a Ball or a Box")


def _region_contains(region, points: np.ndarray) -> np.ndarray:
    if isinstance(region, Ball):
        return region.contains(points)
    return region.contains(points, tol=1e-9)


def _region_sample(region, rng: np.random.Generator, count: int) -> np.ndarray:
    if isinstance(region, Ball):
        return region.sample(rng, count)
    return rng.uniform(region.lo, region.hi, size=(count, region.dim))


@dataclass
class SetConvergenceReport:
    hausdorff: float
    symdiff: float
    resolution: int
    cell_size: list
    inversion_failure_fraction: float
    inconclusive: bool
    bbox_lo: list
    bbox_hi: list
    n_cells_base: int
    n_cells_perturbed: int
    notes: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "hausdorff": self.hausdorff,
            "symdiff": self.symdiff,
            "resolution": self.resolution,
            "cell_size": self.cell_size,
            "inversion_failure_fraction": self.inversion_failure_fraction,
            "inconclusive": self.inconclusive,
            "bbox_lo": self.bbox_lo,
            "bbox_hi": self.bbox_hi,
            "n_cells_base": self.n_cells_base,
            "n_cells_perturbed": self.n_cells_perturbed,
            "notes": self.notes,
        }


def _rasterize(phi, s2, region, axes, chunk: int = 65536) -> np.ndarray:
    """Boolean mask over grid cells whose center has a preimage in the region."""
    mesh = np.meshgrid(*axes, indexing="ij")
    centers = np.stack([m.reshape(-1) for m in mesh], axis=-1)
    box = _region_box(region)
    mask = np.zeros(centers.shape[0], dtype=bool)
    for lo in range(0, centers.shape[0], chunk):
        part = centers[lo : lo + chunk]
        res = newton_invert(phi, s2, part, box)
        ok = res.converged & _region_contains(region, res.omegas)
        mask[lo : lo + chunk] = ok
    return mask.reshape([ax.size for ax in axes])


def _forward_mask(phi, s2, region, axes, seed: int, n_forward: int) -> tuple[np.ndarray, np.ndarray]:
    """Histogram counts of forward-pushed region samples per grid cell."""
    rng = substream(seed, "setconv_forward")
    pts = _region_sample(region, rng, n_forward)
    imgs = np.atleast_2d(phi(s2, pts))
    shape = [ax.size for ax in axes]
    idx = []
    inside = np.ones(imgs.shape[0], dtype=bool)
    for j, ax in enumerate(axes):
        cell = ax[1] - ax[0]
        k = np.floor((imgs[:, j] - (ax[0] - 0.5 * cell)) / cell).astype(np.int64)
        inside &= (k >= 0) & (k < ax.size)
        idx.append(np.clip(k, 0, ax.size - 1))
    flat = np.zeros(int(np.prod(shape)), dtype=np.int64)
    lin = np.ravel_multi_index([i[inside] for i in idx], shape)
    np.add.at(flat, lin, 1)
    return flat.reshape(shape), inside


def set_convergence_check(
    phi,
    region,
    s2,
    s2_prime,
    resolution: int = 600,
    seed: int = 0,
    failure_threshold: float = _FAILURE_THRESHOLD,
) -> SetConvergenceReport:
    """Compare the image sets of a compact region under two parameter values."""
    s2 = np.atleast_1d(np.asarray(s2, dtype=float))
    s2p = np.atleast_1d(np.asarray(s2_prime, dtype=float))
    rng = substream(seed, "setconv_pilot")
    pilot = _region_sample(region, rng, 4096)
    imgs = np.concatenate(
        [np.atleast_2d(phi(s2, pilot)), np.atleast_2d(phi(s2p, pilot))], axis=0
    )
    if not np.all(np.isfinite(imgs)):
        raise ValueError("phi produced non-finite image points")
    dim = imgs.shape[1]
    lo = imgs.min(axis=0)
    hi = imgs.max(axis=0)
    width = np.maximum(hi - lo, 1e-9)
    cell = width / (resolution - 4)  # leave a 2-cell margin on each side
    lo = lo - 2.0 * cell
    axes = tuple(lo[j] + (np.arange(resolution) + 0.5) * cell[j] for j in range(dim))

    mask_a = _rasterize(phi, s2, region, axes)
    mask_b = _rasterize(phi, s2p, region, axes)

    # forward cross-check: confident cells (>= 3 hits) must be inversion-members
    n_forward = min(4 * resolution**dim, 3_000_000)
    counts_a, _ = _forward_mask(phi, s2, region, axes, seed, n_forward)
    counts_b, _ = _forward_mask(phi, s2p, region, axes, seed + 1, n_forward)
    confident_a = counts_a >= 3
    confident_b = counts_b >= 3
    missed = int(np.sum(confident_a & ~mask_a)) + int(np.sum(confident_b & ~mask_b))
    confident = int(np.sum(confident_a)) + int(np.sum(confident_b))
    failure_fraction = missed / confident if confident else 1.0

    cell_area = float(np.prod(cell))
    symdiff = float(np.sum(mask_a ^ mask_b)) * cell_area

    notes = []
    if not mask_a.any() or not mask_b.any():
        hausdorff = float("inf")
        notes.append("an image rasterized to the empty set")
    else:
        dist_to_b = ndimage.distance_transform_edt(~mask_b, sampling=cell)
        dist_to_a = ndimage.distance_transform_edt(~mask_a, sampling=cell)
        hausdorff = float(max(dist_to_b[mask_a].max(), dist_to_a[mask_b].max()))

    inconclusive = failure_fraction > failure_threshold or not np.isfinite(hausdorff)
    if inconclusive:
        notes.append("inversion missed forward-confirmed cells above threshold"
                     if failure_fraction > failure_threshold else "empty rasterization")

    return SetConvergenceReport(
        hausdorff=hausdorff,
        symdiff=symdiff,
        resolution=resolution,
        cell_size=cell.tolist(),
        inversion_failure_fraction=float(failure_fraction),
        inconclusive=bool(inconclusive),
        bbox_lo=lo.tolist(),
        bbox_hi=(lo + resolution * cell).tolist(),
        n_cells_base=int(mask_a.sum()),
        n_cells_perturbed=int(mask_b.sum()),
        notes=notes,
    )
