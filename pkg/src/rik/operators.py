"""Substochastic operators on step functions.

Every node of the expression algebra below is a positive contraction on L1
and on Linf, and sums with weights adding up to at most one as well as
compositions stay in that class.  ``certify_substochastic`` checks the
property numerically on probe functions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .majorization import CERT_TOL, TransferMatrix, hlp_leq
from .measure import (
    UNIT,
    MeasureSpace,
    StepFunction,
    pointwise_arith,
    rearrange,
    splice,
    window,
)

__all__ = [
    "Grid",
    "GridAlignmentError",
    "PartitionFamily",
    "Operator",
    "Identity",
    "PartitionAverage",
    "DisjointFamilyCombine",
    "MeasurePreserve",
    "DiscreteMatrix",
    "Permutation",
    "CirculantKernel",
    "ConvexCombine",
    "Compose",
    "FiniteRankTruncate",
    "SubstochasticCertificate",
    "ChainViolationError",
    "Trajectory",
    "certify_substochastic",
    "dyadic_family",
    "truncated_dyadic_family",
    "build_partition_sequence",
    "finite_rank_truncate",
    "power_iterate",
    "operator_from_json",
]

MAX_CELLS = 1 << 22


class GridAlignmentError(ValueError):
    pass


class ChainViolationError(RuntimeError):
    """``A^{k+1} x < A^k x`` failed; the operator is not substochastic."""

    def __init__(self, step: int, margin):
        super().__init__(f"majorization chain broken at step {step} (margin {float(margin):.3e})")
        self.step = step
        self.margin = margin


@dataclass(frozen=True)
class Grid:
    """Uniform grid of ``cells`` cells on ``[0, extent)``."""

    cells: int
    extent: float = 1.0

    def __post_init__(self):
        if self.cells < 1:
            raise ValueError("grid needs at least one cell")
        if not 0 < self.extent < math.inf:
            raise ValueError("grid extent must be positive and finite")

    @property
    def width(self) -> float:
        return self.extent / self.cells

    @property
    def points(self) -> np.ndarray:
        return np.arange(self.cells + 1) * self.width

    def cell_values(self, x: StepFunction) -> np.ndarray:
        """Values of ``x`` on the cells; ``x`` must be constant on each cell."""
        pts = self.points
        inner = np.asarray(x.breakpoints, dtype=float)
        inner = inner[(inner > 0) & (inner < self.extent)]
        if len(inner):
            k = np.rint(inner / self.width)
            if np.any(np.abs(inner - k * self.width) > 1e-12 * max(1.0, self.extent)):
                raise GridAlignmentError("function breakpoints are not on the grid")
        mids = 0.5 * (pts[:-1] + pts[1:])
        if x.space.finite and self.extent > 1:
            raise GridAlignmentError("grid extends beyond [0, 1)")
        return np.asarray(x._left_values(mids), dtype=float)

    def embed(self, values, x: StepFunction) -> StepFunction:
        """``x`` with its restriction to the grid replaced by the cell ``values``."""
        pts = self.points
        return splice(x, [0.0], [self.extent], [(pts[:-1], pts[1:], np.asarray(values, dtype=float))])

    def to_json(self) -> dict:
        return {"cells": self.cells, "extent": self.extent}

    @classmethod
    def from_json(cls, data: dict) -> "Grid":
        return cls(int(data["cells"]), float(data.get("extent", 1.0)))


class PartitionFamily:
    """Finitely many disjoint cells ``E_j`` in ``[0, alpha)``; the rest is the residual.

    Cells keep the order they were given in (the index used by finite-rank
    truncations).  ``parent`` is an optional coarser family that must be a
    union of cells of this one.
    """

    def __init__(self, starts, ends, space: MeasureSpace = UNIT,
                 parent: Optional["PartitionFamily"] = None):
        starts = np.asarray(starts, dtype=float)
        ends = np.asarray(ends, dtype=float)
        if starts.shape != ends.shape or starts.ndim != 1:
            raise ValueError("cell start and end arrays must match")
        if len(starts) > MAX_CELLS:
            raise ValueError(f"more than {MAX_CELLS} cells")
        if np.any(ends <= starts) or np.any(~np.isfinite(ends)):
            raise ValueError("cells need positive finite length")
        if np.any(starts < 0) or np.any(ends > space.alpha):
            raise ValueError("cells must lie in [0, alpha)")
        order = np.argsort(starts, kind="stable")
        if np.any(starts[order][1:] < ends[order][:-1]):
            raise ValueError("cells overlap")
        self.starts = starts
        self.ends = ends
        self.space = space
        self.parent = parent
        self._order = order
        if parent is not None:
            self._check_refines(parent)

    @classmethod
    def from_cells(cls, cells, space: MeasureSpace = UNIT, parent=None) -> "PartitionFamily":
        cells = list(cells)
        return cls([a for a, _ in cells], [b for _, b in cells], space, parent)

    def __len__(self):
        return len(self.starts)

    @property
    def lengths(self) -> np.ndarray:
        return self.ends - self.starts

    @property
    def mesh(self) -> float:
        return float(self.lengths.max()) if len(self) else 0.0

    def residual(self) -> list[tuple[float, float]]:
        """The complement ``Omega`` as disjoint intervals."""
        s, e = self.starts[self._order], self.ends[self._order]
        out, cursor = [], 0.0
        for a, b in zip(s, e):
            if a > cursor:
                out.append((cursor, float(a)))
            cursor = float(b)
        if cursor < self.space.alpha:
            out.append((cursor, self.space.alpha))
        return out

    def residual_measure(self) -> float:
        return sum(b - a for a, b in self.residual())

    def _check_refines(self, parent: "PartitionFamily"):
        s, e = self.starts[self._order], self.ends[self._order]
        gap_after = np.concatenate([s[1:] != e[:-1], [True]])
        gaps = np.concatenate([[0], np.cumsum(gap_after)])
        for a, b in zip(parent.starts, parent.ends):
            i0 = int(np.searchsorted(s, a))
            i1 = int(np.searchsorted(e, b, side="right")) - 1
            if i0 >= len(s) or s[i0] != a or i1 < i0 or e[i1] != b or gaps[i1] - gaps[i0] > 0:
                raise ValueError(f"parent cell [{a}, {b}) is not a union of child cells")

    def cell_means(self, x: StepFunction) -> np.ndarray:
        G = np.asarray(x.antiderivative(np.concatenate([self.starts, self.ends])), dtype=float)
        n = len(self.starts)
        return (G[n:] - G[:n]) / self.lengths

    def to_json(self) -> dict:
        return {"alpha": self.space.to_json(),
                "cells": [[float(a), float(b)] for a, b in zip(self.starts, self.ends)]}

    @classmethod
    def from_json(cls, data: dict) -> "PartitionFamily":
        return cls.from_cells(data["cells"], MeasureSpace.from_json(data.get("alpha", "1")))


# ---------------------------------------------------------------------------
# operator nodes
# ---------------------------------------------------------------------------

class Operator:
    """Base class of the substochastic operator algebra."""

    node = "Operator"

    def apply(self, x: StepFunction) -> StepFunction:
        raise NotImplementedError

    def __call__(self, x: StepFunction) -> StepFunction:
        return self.apply(x)

    def to_json(self) -> dict:
        raise NotImplementedError

    def grids(self) -> list[Grid]:
        return []


@dataclass(frozen=True, eq=False)
class Identity(Operator):
    node = "Identity"

    def apply(self, x):
        return x

    def to_json(self):
        return {"node": self.node}


@dataclass(frozen=True, eq=False)
class PartitionAverage(Operator):
    """Replace ``x`` by its mean on every cell; keep or drop ``x`` on the residual.

    ``keep_residual=True`` gives the S_n-type operator, ``False`` the H_n-type.
    """

    family: PartitionFamily
    keep_residual: bool = True
    node = "PartitionAverage"

    def apply(self, x):
        means = self.family.cell_means(x)
        base = x if self.keep_residual else StepFunction.zero(x.space)
        return splice(base, self.family.starts, self.family.ends, list(means))

    def to_json(self):
        return {"node": self.node, "family": self.family.to_json(),
                "keep_residual": self.keep_residual}


@dataclass(frozen=True, eq=False)
class DisjointFamilyCombine(Operator):
    """``f chi_E + sum_j T_j(f chi_{E_j}) chi_{E_j}`` with ``E`` the residual."""

    family: PartitionFamily
    inner: tuple
    node = "DisjointFamilyCombine"

    def __post_init__(self):
        if len(self.inner) != len(self.family):
            raise ValueError("need one inner operator per cell")
        object.__setattr__(self, "inner", tuple(self.inner))

    def _cell_output(self, j: int, f: StepFunction):
        a, b = self.family.starts[j], self.family.ends[j]
        piece = pointwise_arith("restrict", f, [(a, b)])
        return window(self.inner[j].apply(piece), a, b)

    def apply(self, x):
        parts = [self._cell_output(j, x) for j in range(len(self.family))]
        return splice(x, self.family.starts, self.family.ends, parts)

    def partial_chain(self, x):
        """Yield ``A_1 x, ..., A_N x`` where ``A_n`` only replaces the first ``n`` cells."""
        current = x
        for j in range(len(self.family)):
            part = self._cell_output(j, x)
            current = splice(current, [self.family.starts[j]], [self.family.ends[j]], [part])
            yield current

    def grids(self):
        return [g for op in self.inner for g in op.grids()]

    def to_json(self):
        return {"node": self.node, "family": self.family.to_json(),
                "inner": [op.to_json() for op in self.inner]}


@dataclass(frozen=True, eq=False)
class MeasurePreserve(Operator):
    """Interval exchange ``x o sigma`` on ``len(perm)`` equal blocks starting at ``start``.

    Block ``i`` of the output carries block ``perm[i]`` of the input; outside
    the blocks ``x`` is unchanged.
    """

    perm: tuple
    width: float
    start: float = 0.0
    node = "MeasurePreserve"

    def __post_init__(self):
        perm = tuple(int(p) for p in self.perm)
        if sorted(perm) != list(range(len(perm))):
            raise ValueError("perm must be a permutation of 0..m-1")
        if self.width <= 0 or self.start < 0:
            raise ValueError("blocks need positive width and nonnegative start")
        object.__setattr__(self, "perm", perm)

    @property
    def end(self) -> float:
        return self.start + len(self.perm) * self.width

    def apply(self, x):
        if self.end > x.space.alpha:
            raise ValueError("exchange blocks do not fit inside [0, alpha)")
        w, s0 = self.width, self.start
        starts = [s0 + i * w for i in range(len(self.perm))]
        parts = []
        for i, src in enumerate(self.perm):
            a = s0 + src * w
            ps, pe, pv = window(x, a, a + w)
            shift = starts[i] - a
            parts.append((ps + shift, pe + shift, pv))
        return splice(x, starts, [a + w for a in starts], parts)

    def to_json(self):
        return {"node": self.node, "perm": list(self.perm), "width": self.width, "start": self.start}


class _GridOperator(Operator):
    grid: Grid

    def _cells(self, x):
        return self.grid.cell_values(x)

    def grids(self):
        return [self.grid]


@dataclass(frozen=True, eq=False)
class DiscreteMatrix(_GridOperator):
    """Doubly (sub)stochastic matrix acting on the cell values of a grid."""

    matrix: TransferMatrix
    grid: Grid
    node = "DiscreteMatrix"

    def __post_init__(self):
        if self.matrix.n != self.grid.cells:
            raise ValueError("matrix size does not match the grid")

    def apply(self, x):
        return self.grid.embed(self.matrix.rows @ self._cells(x), x)

    def to_json(self):
        return {"node": self.node, "matrix": self.matrix.to_json(), "grid": self.grid.to_json()}


@dataclass(frozen=True, eq=False)
class Permutation(_GridOperator):
    """``(P x)_i = x_{perm[i]}`` on grid cells."""

    perm: tuple
    grid: Grid
    node = "Permutation"

    def __post_init__(self):
        perm = tuple(int(p) for p in self.perm)
        if sorted(perm) != list(range(self.grid.cells)):
            raise ValueError("perm must permute the grid cells")
        object.__setattr__(self, "perm", perm)

    def apply(self, x):
        return self.grid.embed(self._cells(x)[list(self.perm)], x)

    def to_json(self):
        return {"node": self.node, "perm": list(self.perm), "grid": self.grid.to_json()}


@dataclass(frozen=True, eq=False)
class CirculantKernel(_GridOperator):
    """Cyclic convolution ``(K x)_i = sum_j w_j x_{(i - j) mod n}`` with probability weights."""

    weights: tuple
    grid: Grid
    node = "CirculantKernel"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if len(w) == 0 or len(w) > self.grid.cells:
            raise ValueError("need between 1 and n weights")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("circulant weights must be a probability vector")
        object.__setattr__(self, "weights", tuple(w.tolist()))

    def apply_cells(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros_like(v)
        for j, w in enumerate(self.weights):
            if w:
                out += w * np.roll(v, j)
        return out

    def apply(self, x):
        return self.grid.embed(self.apply_cells(self._cells(x)), x)

    def to_json(self):
        return {"node": self.node, "weights": list(self.weights), "grid": self.grid.to_json()}


@dataclass(frozen=True, eq=False)
class ConvexCombine(Operator):
    """``sum_k w_k T_k`` with ``w_k >= 0`` and ``sum w_k <= 1``."""

    children: tuple
    weights: tuple
    node = "ConvexCombine"

    def __post_init__(self):
        w = [float(v) for v in self.weights]
        if len(w) != len(self.children) or not w:
            raise ValueError("need one weight per child")
        if any(v < 0 for v in w) or sum(w) > 1 + 1e-12:
            raise ValueError("weights must be nonnegative with sum at most 1")
        object.__setattr__(self, "children", tuple(self.children))
        object.__setattr__(self, "weights", tuple(w))

    def apply(self, x):
        out = None
        for w, op in zip(self.weights, self.children):
            term = op.apply(x) * w
            out = term if out is None else out + term
        return out

    def grids(self):
        return [g for op in self.children for g in op.grids()]

    def to_json(self):
        return {"node": self.node, "children": [c.to_json() for c in self.children],
                "weights": list(self.weights)}


@dataclass(frozen=True, eq=False)
class Compose(Operator):
    """``T_1 o T_2 o ... o T_k``; the last child is applied first."""

    children: tuple
    node = "Compose"

    def __post_init__(self):
        if not self.children:
            raise ValueError("compose needs at least one child")
        object.__setattr__(self, "children", tuple(self.children))

    def apply(self, x):
        for op in reversed(self.children):
            x = op.apply(x)
        return x

    def grids(self):
        return [g for op in self.children for g in op.grids()]

    def to_json(self):
        return {"node": self.node, "children": [c.to_json() for c in self.children]}


@dataclass(frozen=True, eq=False)
class FiniteRankTruncate(Operator):
    """``x chi_Theta + sum_{j < rank} (mean of x on E_j) chi_{E_j}`` with ``Theta = Omega ∩ [0, horizon]``."""

    base: PartitionAverage
    horizon: float
    rank: int
    node = "FiniteRankTruncate"

    def __post_init__(self):
        if not 0 <= self.rank <= len(self.base.family):
            raise ValueError(f"rank {self.rank} exceeds the {len(self.base.family)} cells")

    def theta(self) -> list[tuple[float, float]]:
        if not self.base.keep_residual:
            return []
        return [(a, min(b, self.horizon)) for a, b in self.base.family.residual() if a < self.horizon]

    def apply(self, x):
        fam = self.base.family
        kept = pointwise_arith("restrict", x, self.theta())
        r = self.rank
        if r == 0:
            return kept
        means = fam.cell_means(x)[:r]
        return splice(kept, fam.starts[:r], fam.ends[:r], list(means))

    def to_json(self):
        return {"node": self.node, "base": self.base.to_json(), "horizon": self.horizon,
                "rank": self.rank}


def operator_from_json(data: dict) -> Operator:
    node = data["node"]
    if node == "Identity":
        return Identity()
    if node == "PartitionAverage":
        return PartitionAverage(PartitionFamily.from_json(data["family"]),
                                bool(data.get("keep_residual", True)))
    if node == "DisjointFamilyCombine":
        return DisjointFamilyCombine(PartitionFamily.from_json(data["family"]),
                                     tuple(operator_from_json(d) for d in data["inner"]))
    if node == "MeasurePreserve":
        return MeasurePreserve(tuple(data["perm"]), float(data["width"]), float(data.get("start", 0.0)))
    if node == "DiscreteMatrix":
        return DiscreteMatrix(TransferMatrix.from_json(data["matrix"]), Grid.from_json(data["grid"]))
    if node == "Permutation":
        return Permutation(tuple(data["perm"]), Grid.from_json(data["grid"]))
    if node == "CirculantKernel":
        return CirculantKernel(tuple(data["weights"]), Grid.from_json(data["grid"]))
    if node == "ConvexCombine":
        return ConvexCombine(tuple(operator_from_json(d) for d in data["children"]),
                             tuple(data["weights"]))
    if node == "Compose":
        return Compose(tuple(operator_from_json(d) for d in data["children"]))
    if node == "FiniteRankTruncate":
        base = operator_from_json(data["base"])
        if not isinstance(base, PartitionAverage):
            raise ValueError("FiniteRankTruncate needs a PartitionAverage base")
        return FiniteRankTruncate(base, float(data["horizon"]), int(data["rank"]))
    raise ValueError(f"unknown operator node {node!r}")


# ---------------------------------------------------------------------------
# certification
# ---------------------------------------------------------------------------

@dataclass
class SubstochasticCertificate:
    passed: bool
    probes: int
    margin: float
    failures: list = field(default_factory=list)

    def __bool__(self):
        return self.passed

    def to_json(self) -> dict:
        return {"passed": self.passed, "probes": self.probes, "margin": float(self.margin),
                "failures": self.failures}


def certify_substochastic(op: Operator, probes: Sequence[StepFunction],
                          tol: float = CERT_TOL) -> SubstochasticCertificate:
    """Check ``Tx < x``, the L1 and Linf contractions and positivity on every probe."""
    if not probes:
        raise ValueError("need at least one probe")
    failures = []
    margin = math.inf
    for i, x in enumerate(probes):
        y = op.apply(x)
        cert = hlp_leq(y, x, tol)
        margin = min(margin, float(cert.margin))
        if not cert.holds:
            failures.append({"probe": i, "check": "hlp", "witness": float(cert.witness_t),
                             "margin": float(cert.margin)})
        n1y, n1x = float(y.integral()), float(x.integral())
        if n1y > n1x + tol:
            failures.append({"probe": i, "check": "L1", "witness": n1y - n1x})
        if float(y.sup()) > float(x.sup()) + tol:
            failures.append({"probe": i, "check": "LInf", "witness": float(y.sup() - x.sup())})
        if x.is_nonnegative():
            low = min((float(v) for v in y.values), default=0.0)
            if low < -tol:
                failures.append({"probe": i, "check": "positivity", "witness": low})
    return SubstochasticCertificate(not failures, len(probes), margin, failures)


# ---------------------------------------------------------------------------
# partition sequences
# ---------------------------------------------------------------------------

def dyadic_family(level: int, space: MeasureSpace = UNIT, parent=None) -> PartitionFamily:
    """Cells of width ``2**-level`` covering ``[0, min(2**level, alpha))``."""
    cover = min(2.0 ** level, space.alpha)
    count = int(cover * 2 ** level)
    if count > MAX_CELLS:
        raise ValueError(f"dyadic level {level} needs {count} cells (cap {MAX_CELLS})")
    w = 2.0 ** -level
    pts = np.arange(count + 1) * w
    return PartitionFamily(pts[:-1], pts[1:], space, parent)


def truncated_dyadic_family(level: int, space: MeasureSpace = UNIT, parent=None) -> PartitionFamily:
    """Dyadic cells of width ``2**-level`` covering ``[0, 1 - 2**-level)``; the residual shrinks."""
    count = 2 ** level - 1
    if count > MAX_CELLS:
        raise ValueError(f"level {level} exceeds the cell cap")
    w = 2.0 ** -level
    pts = np.arange(count + 1) * w
    return PartitionFamily(pts[:-1], pts[1:], space, parent)


def build_partition_sequence(kind: str, levels: int, generator: Optional[Callable] = None,
                             space: MeasureSpace = UNIT) -> list[PartitionAverage]:
    """``[S_1, ..., S_n]`` (``kind='Sn'``) or ``[H_1, ..., H_n]`` (``kind='Hn'``).

    ``generator(level, space)`` returns the level's family; consecutive
    families must refine each other or ``ValueError`` is raised.
    """
    if kind not in ("Sn", "Hn"):
        raise ValueError("kind must be 'Sn' or 'Hn'")
    generator = generator or dyadic_family
    out, prev = [], None
    for level in range(1, levels + 1):
        fam = generator(level, space)
        if prev is not None:
            fam = PartitionFamily(fam.starts, fam.ends, fam.space, parent=prev)
        out.append(PartitionAverage(fam, keep_residual=(kind == "Sn")))
        prev = fam
    return out


def finite_rank_truncate(base: PartitionAverage, horizon: float, rank: int) -> FiniteRankTruncate:
    return FiniteRankTruncate(base, float(horizon), int(rank))


# ---------------------------------------------------------------------------
# power iteration
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """Iterates ``A^k x`` with per-step records ``(k, norm, delta_norm, chain_ok)``."""

    iterates: list
    rows: list
    converged: bool
    measure_gaps: list = field(default_factory=list)

    @property
    def limit(self) -> StepFunction:
        return self.iterates[-1]

    @property
    def limit_star(self) -> StepFunction:
        return rearrange(self.iterates[-1])

    @property
    def converged_step(self) -> Optional[int]:
        return len(self.iterates) - 2 if self.converged else None

    def chain_ok(self) -> bool:
        return all(r[3] for r in self.rows)


def power_iterate(A: Operator, x: StepFunction, n_max: int, stop_tol: float, spec,
                  tol: float = CERT_TOL, measure_eps: float = 1e-6) -> Trajectory:
    """Iterate ``x, Ax, A^2 x, ...`` until ``||(A^k x)* - (A^{k-1} x)*||_spec < stop_tol``.

    Raises :class:`ChainViolationError` if ``A^k x < A^{k-1} x`` ever fails.
    """
    iterates = [x]
    rows = []
    converged = False
    prev, prev_star = x, rearrange(x)
    for k in range(1, n_max + 1):
        cur = A.apply(prev)
        cur_star = rearrange(cur)
        cert = hlp_leq(cur, prev, tol)
        delta = spec.norm(cur_star - prev_star)
        rows.append((k, float(spec.norm(cur)), float(delta), cert.holds))
        iterates.append(cur)
        if not cert.holds:
            raise ChainViolationError(k, cert.margin)
        prev, prev_star = cur, cur_star
        if delta < stop_tol:
            converged = True
            break
    y_star = rearrange(iterates[-1])
    gaps = []
    for it in iterates:
        diff = rearrange(it) - y_star
        gaps.append(float(sum(float(l) for l, v in zip(diff.lengths, diff.values) if abs(v) >= measure_eps)))
    return Trajectory(iterates, rows, converged, gaps)
