"""Seeded random step functions, operator trees and transfer matrices.

All generators take a ``numpy.random.Generator`` (``default_rng(seed)``) so
runs are reproducible within this implementation.
"""
from __future__ import annotations

import numpy as np

from .majorization import TransferMatrix
from .measure import UNIT, MeasureSpace, StepFunction, from_cells
from .operators import (
    CirculantKernel,
    Compose,
    ConvexCombine,
    DiscreteMatrix,
    DisjointFamilyCombine,
    FiniteRankTruncate,
    Grid,
    Identity,
    MeasurePreserve,
    Operator,
    PartitionAverage,
    PartitionFamily,
    Permutation,
)

__all__ = [
    "NODE_KINDS",
    "random_grid_function",
    "random_cell_values",
    "random_family",
    "random_substochastic_matrix",
    "random_operator",
]

NODE_KINDS = (
    "Identity", "PartitionAverage", "DisjointFamilyCombine", "MeasurePreserve",
    "DiscreteMatrix", "Permutation", "CirculantKernel", "ConvexCombine", "Compose",
    "FiniteRankTruncate",
)
_LEAVES = ("Identity", "PartitionAverage", "MeasurePreserve", "DiscreteMatrix",
           "Permutation", "CirculantKernel", "FiniteRankTruncate")


def random_cell_values(rng: np.random.Generator, n: int, signed: bool = False,
                       levels: int = 64, scale: float = 1.0) -> np.ndarray:
    """Values on the lattice ``scale * k / levels``, ``0 <= k <= levels`` (or ``|k|`` when signed)."""
    k = rng.integers(-levels if signed else 0, levels + 1, size=n)
    return scale * k / levels


def random_grid_function(rng: np.random.Generator, cells: int, space: MeasureSpace = UNIT,
                         extent: float = 1.0, signed: bool = False, levels: int = 64) -> StepFunction:
    """Step function constant on each of ``cells`` equal cells of ``[0, extent)``."""
    return from_cells(random_cell_values(rng, cells, signed, levels), extent / cells, space)


def random_family(rng: np.random.Generator, grid: Grid, max_cells: int,
                  space: MeasureSpace = UNIT) -> PartitionFamily:
    """Disjoint runs of grid cells, always leaving at least one grid cell uncovered."""
    n = grid.cells
    cuts = np.sort(rng.choice(np.arange(1, n), size=min(n - 1, 2 * max_cells), replace=False))
    pts = np.concatenate([[0], cuts, [n]])
    runs = [(int(a), int(b)) for a, b in zip(pts[:-1], pts[1:])]
    keep = rng.random(len(runs)) < 0.7
    keep[rng.integers(len(runs))] = False
    chosen = [r for r, k in zip(runs, keep) if k][:max_cells]
    if not chosen:
        chosen = [runs[0]] if len(runs) > 1 else []
    order = rng.permutation(len(chosen))
    w = grid.width
    cells = [(chosen[i][0] * w, chosen[i][1] * w) for i in order]
    return PartitionFamily.from_cells(cells, space)


def random_substochastic_matrix(rng: np.random.Generator, n: int, terms: int = 4,
                                doubly_stochastic: bool = False) -> TransferMatrix:
    """Convex (or sub-convex) combination of random permutation matrices."""
    w = rng.dirichlet(np.ones(terms))
    if not doubly_stochastic:
        w = w * rng.uniform(0.5, 1.0)
    D = np.zeros((n, n))
    for wk in w:
        D[np.arange(n), rng.permutation(n)] += wk
    if doubly_stochastic:
        # absorb rounding so row and column sums are 1 within 1e-15
        D /= D.sum(axis=1, keepdims=True)
    return TransferMatrix(D, "ds" if doubly_stochastic else "dss")


def _dyadic_aligned_family(rng, grid: Grid, space) -> PartitionFamily:
    n = grid.cells
    size = int(2 ** rng.integers(0, int(np.log2(n)) + 1))
    blocks = n // size
    keep = rng.random(blocks) < 0.75
    w = grid.width * size
    cells = [(i * w, (i + 1) * w) for i in range(blocks) if keep[i]]
    if not cells:
        cells = [(0.0, w)]
    return PartitionFamily.from_cells(cells, space)


def random_operator(rng: np.random.Generator, grid: Grid, depth: int = 5,
                    space: MeasureSpace = UNIT, kind: str | None = None) -> Operator:
    """Random expression tree of height at most ``depth`` on a power-of-two grid.

    Every node is aligned with ``grid`` so grid functions stay grid functions.
    """
    n = grid.cells
    if kind is None:
        pool = _LEAVES if depth <= 1 else NODE_KINDS
        kind = pool[int(rng.integers(len(pool)))]
    sub = depth - 1
    if kind == "Identity":
        return Identity()
    if kind == "PartitionAverage":
        return PartitionAverage(_dyadic_aligned_family(rng, grid, space), bool(rng.integers(2)))
    if kind == "MeasurePreserve":
        size = int(2 ** rng.integers(0, int(np.log2(n)) + 1))
        m = int(rng.integers(1, n // size + 1))
        start = int(rng.integers(0, n // size - m + 1)) * size * grid.width
        return MeasurePreserve(tuple(rng.permutation(m)), size * grid.width, start)
    if kind == "DiscreteMatrix":
        return DiscreteMatrix(random_substochastic_matrix(rng, n, doubly_stochastic=bool(rng.integers(2))), grid)
    if kind == "Permutation":
        return Permutation(tuple(rng.permutation(n)), grid)
    if kind == "CirculantKernel":
        k = int(rng.integers(1, min(n, 4) + 1))
        w = rng.integers(1, 5, size=k).astype(float)
        return CirculantKernel(tuple(w / w.sum()), grid)
    if kind == "FiniteRankTruncate":
        base = PartitionAverage(_dyadic_aligned_family(rng, grid, space), bool(rng.integers(2)))
        horizon = float(rng.integers(0, n + 1)) * grid.width
        return FiniteRankTruncate(base, horizon, int(rng.integers(0, len(base.family) + 1)))
    if kind == "DisjointFamilyCombine":
        fam = random_family(rng, grid, 4, space)
        inner = tuple(random_operator(rng, grid, min(sub, 2), space) for _ in range(len(fam)))
        return DisjointFamilyCombine(fam, inner)
    if kind == "ConvexCombine":
        k = int(rng.integers(1, 4))
        w = rng.dirichlet(np.ones(k)) * (1.0 if rng.integers(2) else rng.uniform(0.3, 1.0))
        return ConvexCombine(tuple(random_operator(rng, grid, sub, space) for _ in range(k)),
                             tuple((w / max(1.0, w.sum())).tolist()))
    if kind == "Compose":
        k = int(rng.integers(1, 3))
        return Compose(tuple(random_operator(rng, grid, sub, space) for _ in range(k)))
    raise ValueError(f"unknown node kind {kind!r}")
