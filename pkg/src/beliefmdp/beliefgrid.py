"""Lattice discretization of the probability simplex.

Grid nodes are the rational points with denominator ``mesh`` (spacing
delta = 1/mesh), enumerated in lexicographic order of their integer
numerators.  Projection maps an arbitrary weight vector to the nearest
node in L1 via largest-remainder rounding, which is exact on nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from .beliefs import FiniteBelief

__all__ = ["BeliefGrid", "simplex_grid"]


def _compositions(total: int, parts: int) -> np.ndarray:
    """All nonnegative integer vectors of given length summing to total."""
    out = np.zeros((comb(total + parts - 1, parts - 1), parts), dtype=np.int64)
    for row, cuts in enumerate(combinations(range(total + parts - 1), parts - 1)):
        prev = -1
        vals = []
        for c in cuts:
            vals.append(c - prev - 1)
            prev = c
        vals.append(total + parts - 2 - prev)
        out[row] = vals
    return out


@dataclass
class BeliefGrid:
    n_states: int
    mesh: int
    nodes: np.ndarray = field(repr=False)        # (N, K) float weights
    _numerators: np.ndarray = field(repr=False)  # (N, K) int
    _index: dict = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def spacing(self) -> float:
        return 1.0 / self.mesh

    def node_belief(self, idx: int) -> FiniteBelief:
        return FiniteBelief(self.nodes[idx])

    def project(self, weights: np.ndarray) -> np.ndarray:
        """Nearest-node indices for a batch of weight vectors.

        Largest-remainder rounding of mesh*w: floor, then top up the
        coordinates with the largest fractional parts (ties broken by
        lowest coordinate index) until the numerators sum to mesh.
        """
        w = np.atleast_2d(np.asarray(weights, dtype=float))
        if w.shape[1] != self.n_states:
            raise ValueError(f"expected {self.n_states} weights, got {w.shape[1]}")
        w = np.clip(w, 0.0, None)
        w = w / np.maximum(w.sum(axis=1, keepdims=True), 1e-300)
        scaled = w * self.mesh
        base = np.floor(scaled + 1e-12).astype(np.int64)
        base = np.minimum(base, self.mesh)
        frac = scaled - base
        deficit = self.mesh - base.sum(axis=1)
        # rank coordinates by descending fraction, lowest index first on ties
        order = np.lexsort((np.arange(self.n_states)[None, :].repeat(w.shape[0], 0), -frac), axis=1)
        take = np.arange(self.n_states)[None, :] < deficit[:, None]
        bump = np.zeros_like(base)
        np.put_along_axis(bump, order, take.astype(np.int64), axis=1)
        nums = base + bump
        # overshoot guard (deficit < 0 cannot happen after clipping, but keep exact)
        out = np.empty(w.shape[0], dtype=np.int64)
        for i in range(w.shape[0]):
            key = nums[i].tobytes()
            idx = self._index.get(key)
            if idx is None:
                # fall back: remove excess from largest numerators
                v = nums[i].copy()
                while v.sum() > self.mesh:
                    v[np.argmax(v)] -= 1
                while v.sum() < self.mesh:
                    v[np.argmin(v)] += 1
                idx = self._index[v.tobytes()]
            out[i] = idx
        return out

    def project_one(self, weights: np.ndarray) -> int:
        return int(self.project(np.atleast_2d(weights))[0])


def simplex_grid(n_states: int, mesh: int) -> BeliefGrid:
    if n_states < 1 or mesh < 1:
        raise ValueError("need n_states >= 1 and mesh >= 1")
    nums = _compositions(mesh, n_states)
    nodes = nums.astype(float) / mesh
    index = {nums[i].tobytes(): i for i in range(nums.shape[0])}
    return BeliefGrid(n_states=n_states, mesh=mesh, nodes=nodes,
                      _numerators=nums, _index=index)
