"""Hardy-Littlewood-Polya relation and its realisation by T-transforms."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .measure import SpaceMismatchError, StepFunction, cumulative_profile

__all__ = [
    "MajorizationCertificate",
    "MajorizationError",
    "TransferMatrix",
    "hlp_leq",
    "vector_hlp_leq",
    "construct_doubly_stochastic",
    "calderon_ryff_discrete",
]

# default absolute tolerance of certification pipelines
CERT_TOL = 1e-10


class MajorizationError(ValueError):
    """Precondition ``f < g`` failed; ``index`` is the violating partial sum (0-based)."""

    def __init__(self, message: str, index: Optional[int] = None, witness_t=None):
        super().__init__(message)
        self.index = index
        self.witness_t = witness_t


@dataclass(frozen=True)
class MajorizationCertificate:
    holds: bool
    witness_t: Optional[float]
    margin: float

    def __post_init__(self):
        if self.holds != (self.witness_t is None):
            raise ValueError("holds must be true exactly when there is no witness")

    def __bool__(self):
        return self.holds

    def to_json(self) -> dict:
        return {
            "holds": self.holds,
            "witness_t": None if self.witness_t is None else float(self.witness_t),
            "margin": float(self.margin),
        }


def hlp_leq(f: StepFunction, g: StepFunction, tol: float = 0.0) -> MajorizationCertificate:
    """Decide ``f < g``, i.e. ``int_0^t f* <= int_0^t g* + tol`` for every ``t > 0``.

    Both cumulative profiles are concave, piecewise linear and start at the
    origin, so comparing them at the union of their nodes (plus the eventual
    slopes) decides the relation everywhere.
    """
    if f.space != g.space:
        raise SpaceMismatchError(f"alpha={f.space.alpha} vs alpha={g.space.alpha}")
    pf = cumulative_profile(f)
    pg = cumulative_profile(g)
    probes = np.union1d(pf.t[1:], pg.t[1:])
    if len(probes) == 0:
        return MajorizationCertificate(True, None, 0.0)
    margins = pg(probes) - pf(probes)
    bad = np.flatnonzero(np.asarray(margins < -tol, dtype=bool))
    margin = min(margins)
    if len(bad):
        return MajorizationCertificate(False, probes[bad[0]], margin)
    if pf.final_slope > pg.final_slope + tol:
        return MajorizationCertificate(False, probes[-1], margin)
    return MajorizationCertificate(True, None, margin)


def vector_hlp_leq(f, g, tol: float = 0.0) -> tuple[bool, Optional[int]]:
    """Partial sums of the decreasing sorts of ``|f|`` are dominated by those of ``|g|``."""
    fs = np.cumsum(np.sort(np.abs(np.asarray(f, dtype=float)))[::-1])
    gs = np.cumsum(np.sort(np.abs(np.asarray(g, dtype=float)))[::-1])
    bad = np.flatnonzero(fs > gs + tol)
    return (len(bad) == 0, int(bad[0]) if len(bad) else None)


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    """Doubly stochastic (``ds``) or doubly substochastic (``dss``) matrix."""

    rows: np.ndarray
    kind: str = "ds"
    transforms: int = field(default=0, compare=False)

    SUM_TOL = 1e-12

    def __post_init__(self):
        m = np.asarray(self.rows, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("transfer matrix must be square")
        if self.kind not in ("ds", "dss"):
            raise ValueError(f"kind must be 'ds' or 'dss', got {self.kind!r}")
        if np.any(m < 0):
            raise ValueError("transfer matrix has negative entries")
        r, c = m.sum(axis=1), m.sum(axis=0)
        if np.any(r > 1 + self.SUM_TOL) or np.any(c > 1 + self.SUM_TOL):
            raise ValueError("row or column sum exceeds 1")
        if self.kind == "ds" and (
            np.any(np.abs(r - 1) > self.SUM_TOL) or np.any(np.abs(c - 1) > self.SUM_TOL)
        ):
            raise ValueError("doubly stochastic matrix needs unit row and column sums")
        m.setflags(write=False)
        object.__setattr__(self, "rows", m)

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    def __matmul__(self, v):
        return self.rows @ np.asarray(v, dtype=float)

    def to_json(self) -> dict:
        return {"n": self.n, "rows": self.rows.tolist(), "kind": self.kind}

    @classmethod
    def from_json(cls, data: dict) -> "TransferMatrix":
        tm = cls(np.asarray(data["rows"], dtype=float), data.get("kind", "ds"))
        if "n" in data and data["n"] != tm.n:
            raise ValueError("n does not match the row count")
        return tm


def _t_transform_stage(x: np.ndarray, y: np.ndarray, tol: float):
    """Doubly stochastic ``D`` with ``D y = x`` for sorted ``x < y`` of equal totals.

    Each step picks the largest ``j`` with ``y_j > x_j`` and the first ``k > j``
    with ``y_k < x_k`` and moves ``delta = min(y_j - x_j, x_k - y_k)`` from
    ``j`` to ``k`` with a convex combination of the identity and the
    transposition ``(j k)``.  Every step pins one more coordinate of ``y`` to
    ``x`` so at most ``n - 1`` steps are needed.
    """
    n = len(x)
    y = y.copy()
    D = np.eye(n)
    steps = 0
    while steps < n - 1:
        diff = y - x
        over = np.flatnonzero(diff > tol)
        if not len(over):
            break
        j = int(over[-1])
        under = np.flatnonzero(diff[j + 1:] < -tol)
        if not len(under):
            break
        k = j + 1 + int(under[0])
        delta = min(y[j] - x[j], x[k] - y[k])
        mix = delta / (y[j] - y[k])
        lam = 1.0 - mix
        Dj, Dk = D[j].copy(), D[k].copy()
        D[j] = lam * Dj + mix * Dk
        D[k] = mix * Dj + lam * Dk
        if y[j] - x[j] <= x[k] - y[k]:
            y[k] = y[k] + (y[j] - x[j])
            y[j] = x[j]
        else:
            y[j] = y[j] - (x[k] - y[k])
            y[k] = x[k]
        steps += 1
    return D, steps


def construct_doubly_stochastic(f, g, tol: Optional[float] = None) -> TransferMatrix:
    """Build ``D`` with ``D @ g == f`` from T-transforms.

    With equal totals ``D`` is doubly stochastic.  If ``sum(f) < sum(g)`` (both
    nonnegative) the source is first shrunk coordinatewise to a vector ``v``
    with ``v <= g`` and ``f < v``; the shrink is a diagonal contraction, so
    ``D`` is doubly substochastic.
    """
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != g.shape or f.ndim != 1:
        raise ValueError("f and g must be vectors of equal length")
    n = len(f)
    scale = max(1.0, float(np.max(np.abs(g))) if n else 1.0, float(np.max(np.abs(f))) if n else 1.0)
    if tol is None:
        tol = 1e-12 * scale * max(n, 1)
    if n == 0:
        return TransferMatrix(np.zeros((0, 0)), "ds")

    pf = np.argsort(-f, kind="stable")
    pg = np.argsort(-g, kind="stable")
    xs, ys = f[pf], g[pg]
    X, Y = np.cumsum(xs), np.cumsum(ys)
    bad = np.flatnonzero(X > Y + tol)
    if len(bad):
        i = int(bad[0])
        raise MajorizationError(
            f"partial sum {i + 1} of f exceeds that of g by {X[i] - Y[i]:.3e}", index=i
        )
    deficit = Y[-1] - X[-1]
    kind = "ds"
    shrink = np.ones(n)
    if deficit > tol:
        if np.any(f < 0) or np.any(g < 0):
            raise MajorizationError("unequal totals need nonnegative vectors", index=n - 1)
        kind = "dss"
        V = np.minimum(Y, X[-1])
        v = np.diff(np.concatenate([[0.0], V]))
        np.divide(v, ys, out=shrink, where=ys > 0)
        shrink = np.clip(shrink, 0.0, 1.0)
        ys = ys * shrink
    D_sorted, steps = _t_transform_stage(xs, ys, tol)
    D_sorted = D_sorted * shrink[None, :]
    # undo the sorting permutations: D = P_f^T D_sorted P_g
    D = np.zeros((n, n))
    D[np.ix_(pf, pg)] = D_sorted
    return TransferMatrix(D, kind, steps)


def calderon_ryff_discrete(f: StepFunction, g: StepFunction, grid_cells: int,
                           extent=None, tol: float = CERT_TOL):
    """Grid operator ``B`` with ``B g = f`` for nonnegative grid functions ``f < g``.

    Both functions must be constant on the cells of the uniform grid of
    ``grid_cells`` cells on ``[0, extent)`` (``extent`` defaults to ``alpha``
    on the unit interval and to the larger support otherwise) and vanish
    beyond it.  Returns a :class:`~rik.operators.DiscreteMatrix`.
    """
    from .operators import DiscreteMatrix, Grid, GridAlignmentError

    cert = hlp_leq(f, g, tol)
    if not cert.holds:
        raise MajorizationError(f"f is not majorized by g (margin {float(cert.margin):.3e})",
                                witness_t=cert.witness_t)
    if extent is None:
        extent = 1.0 if f.space.finite else float(max(f.end, g.end))
    grid = Grid(grid_cells, extent)
    for h in (f, g):
        if h.end > extent:
            raise GridAlignmentError("function support exceeds the grid extent")
    fv = grid.cell_values(f)
    gv = grid.cell_values(g)
    if np.any(fv < 0) or np.any(gv < 0):
        raise MajorizationError("the discrete Calderon-Ryff construction needs nonnegative functions")
    return DiscreteMatrix(construct_doubly_stochastic(fv, gv), grid)
