"""Piecewise-constant functions on ``I = [0, alpha)`` with ``alpha`` in {1, inf}.

A :class:`StepFunction` is a right-continuous step function given by its
breakpoints ``0 = t_0 < t_1 < ... < t_m`` and one value per piece
``[t_{k-1}, t_k)``, plus a constant ``tail`` on ``[t_m, alpha)``.  On the
unit interval the tail is folded into the pieces, so canonical functions on
``[0, 1)`` always have ``tail == 0``.  On the half line a nonzero tail is only
allowed for functions flagged ``linf_only``; such functions take part in
pointwise arithmetic and sup-norms but have no finite rearrangement.

Arrays are ``float64`` by default.  Passing :class:`fractions.Fraction`
breakpoints or values switches the function to an ``object`` array and every
operation in this module stays exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Real
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "MeasureSpace",
    "UNIT",
    "HALF_LINE",
    "StepFunction",
    "CumulativeProfile",
    "MaximalFunction",
    "NotRearrangeableError",
    "SpaceMismatchError",
    "distribution",
    "rearrange",
    "maximal_profile",
    "cumulative_profile",
    "pointwise_arith",
    "indicator",
    "from_cells",
]


class NotRearrangeableError(ValueError):
    """Raised when ``x*`` would not be a finite step function."""


class SpaceMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class MeasureSpace:
    """Lebesgue measure on ``[0, alpha)``."""

    alpha: float

    def __post_init__(self):
        if self.alpha not in (1, math.inf):
            raise ValueError(f"alpha must be 1 or inf, got {self.alpha!r}")
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def finite(self) -> bool:
        return self.alpha == 1.0

    def to_json(self) -> str:
        return "1" if self.finite else "inf"

    @classmethod
    def from_json(cls, tag) -> "MeasureSpace":
        if str(tag) in ("1", "1.0"):
            return UNIT
        if str(tag).lower() in ("inf", "infinity"):
            return HALF_LINE
        raise ValueError(f"unknown alpha tag {tag!r}")


UNIT = MeasureSpace(1.0)
HALF_LINE = MeasureSpace(math.inf)


def _is_exact(v) -> bool:
    return isinstance(v, (Fraction, int)) and not isinstance(v, bool)


def _as_array(seq) -> np.ndarray:
    """float64 array, or an object array when any entry is a Fraction."""
    if isinstance(seq, np.ndarray) and seq.dtype != object:
        return np.asarray(seq, dtype=float)
    arr = np.asarray(seq)
    if arr.dtype != object:
        return arr.astype(float, copy=False)
    items = list(arr)
    if any(isinstance(v, Fraction) for v in items):
        return np.array([Fraction(v) if _is_exact(v) else v for v in items], dtype=object)
    return np.asarray(items, dtype=float)


def _search(points: np.ndarray, t) -> np.ndarray:
    return np.searchsorted(points, t, side="right") - 1


class StepFunction:
    """Immutable right-continuous step function on ``[0, alpha)``."""

    __slots__ = ("space", "breakpoints", "values", "tail", "linf_only")

    def __init__(
        self,
        breakpoints: Sequence[Real],
        values: Sequence[Real],
        tail: Real = 0.0,
        space: MeasureSpace = UNIT,
        linf_only: bool = False,
    ):
        bps = _as_array(breakpoints)
        vals = _as_array(values)
        if bps.ndim != 1 or vals.ndim != 1:
            raise ValueError("breakpoints and values must be one-dimensional")
        if len(bps) == 0:
            bps = _as_array([0.0])
        if len(vals) != len(bps) - 1:
            raise ValueError(
                f"need len(values) == len(breakpoints) - 1, got {len(vals)} and {len(bps)}"
            )
        if bps[0] != 0:
            raise ValueError("first breakpoint must be 0")
        if len(bps) > 1 and not bool(np.all(bps[1:] > bps[:-1])):
            raise ValueError("breakpoints must be strictly increasing")
        if not math.isfinite(float(bps[-1])):
            raise ValueError("breakpoints must be finite")
        if bps[-1] > space.alpha:
            raise ValueError(f"last breakpoint {bps[-1]} exceeds alpha={space.alpha}")
        if vals.dtype != object and not np.all(np.isfinite(vals)):
            raise ValueError("values must be finite")
        if isinstance(tail, float) and not math.isfinite(tail):
            raise ValueError("tail must be finite")
        if not space.finite and tail != 0 and not linf_only:
            raise ValueError("a nonzero tail on [0, inf) requires linf_only=True")
        bps, vals, tail = _canonical(bps, vals, tail, space)
        bps.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "tail", tail)
        object.__setattr__(self, "linf_only", bool(linf_only) and tail != 0)

    def __setattr__(self, name, value):
        raise AttributeError("StepFunction is immutable")

    # -- basic structure -------------------------------------------------
    @property
    def exact(self) -> bool:
        return self.breakpoints.dtype == object or self.values.dtype == object

    @property
    def end(self):
        """Last breakpoint ``t_m``."""
        return self.breakpoints[-1]

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def __len__(self) -> int:
        return len(self.values)

    def pieces(self):
        """``(starts, ends, values)`` of the finite pieces."""
        return self.breakpoints[:-1], self.breakpoints[1:], self.values

    def __call__(self, t):
        """Evaluate at ``t`` (scalar or array); ``t`` must lie in ``[0, alpha)``."""
        scalar = np.ndim(t) == 0
        ts = np.atleast_1d(np.asarray(t, dtype=object if self.exact else float))
        if np.any(ts < 0) or np.any(ts >= self.space.alpha):
            raise ValueError(f"evaluation point outside [0, {self.space.alpha})")
        out = self._left_values(ts)
        return out[0] if scalar else out

    def _left_values(self, ts: np.ndarray) -> np.ndarray:
        idx = _search(self.breakpoints, ts)
        vals = np.concatenate([self.values, _as_array([self.tail])])
        idx = np.where(idx >= len(self.values), len(self.values), idx)
        return vals[idx]

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return (
            self.space == other.space
            and len(self.breakpoints) == len(other.breakpoints)
            and bool(np.all(self.breakpoints == other.breakpoints))
            and bool(np.all(self.values == other.values))
            and self.tail == other.tail
        )

    __hash__ = None

    def __repr__(self):
        bps = [float(b) for b in self.breakpoints]
        vals = [float(v) for v in self.values]
        return f"StepFunction(breakpoints={bps}, values={vals}, tail={float(self.tail)}, alpha={self.space.to_json()})"

    # -- arithmetic sugar ------------------------------------------------
    def __add__(self, other):
        return pointwise_arith("add", self, other)

    def __sub__(self, other):
        return pointwise_arith("sub", self, other)

    def __neg__(self):
        return pointwise_arith("scale", self, -1)

    def __mul__(self, c):
        if isinstance(c, StepFunction):
            return pointwise_arith("mul", self, c)
        return pointwise_arith("scale", self, c)

    __rmul__ = __mul__

    def __abs__(self):
        return pointwise_arith("abs", self)

    # -- derived quantities ----------------------------------------------
    def is_nonnegative(self) -> bool:
        return bool(np.all(self.values >= 0)) and self.tail >= 0

    def sup(self):
        """Essential supremum of ``|x|``."""
        if self.values.dtype != object:
            m = float(np.max(np.abs(self.values))) if len(self.values) else 0.0
        else:
            m = max((abs(v) for v in self.values), default=0)
        return max(m, abs(self.tail))

    def integral(self):
        """``int |x|`` over ``[0, alpha)``; ``inf`` for nonzero tails on the half line."""
        if self.tail != 0:
            return math.inf
        return _dot(np.abs(self.values), self.lengths)

    def antiderivative(self, ts) -> np.ndarray:
        """Signed ``G(t) = int_0^t x`` at the points ``ts``."""
        ts = np.atleast_1d(np.asarray(ts, dtype=object if self.exact else float))
        cum = np.concatenate([_as_array([0 * self.tail]), np.cumsum(self.values * self.lengths)])
        idx = _search(self.breakpoints, ts)
        idx = np.clip(idx, 0, len(self.breakpoints) - 1)
        left = self.breakpoints[idx]
        vals = np.concatenate([self.values, _as_array([self.tail])])
        return cum[idx] + vals[idx] * (ts - left)

    def to_json(self) -> dict:
        return {
            "alpha": self.space.to_json(),
            "breakpoints": [_num_out(b) for b in self.breakpoints],
            "values": [_num_out(v) for v in self.values],
            "tail": _num_out(self.tail),
        }

    @classmethod
    def from_json(cls, data: dict) -> "StepFunction":
        space = MeasureSpace.from_json(data.get("alpha", "1"))
        return cls(
            [_num_in(b) for b in data["breakpoints"]],
            [_num_in(v) for v in data["values"]],
            _num_in(data.get("tail", 0.0)),
            space=space,
            linf_only=bool(data.get("linf_only", False)),
        )

    @classmethod
    def zero(cls, space: MeasureSpace = UNIT) -> "StepFunction":
        return cls([0.0], [], 0.0, space)

    @classmethod
    def from_pieces(cls, starts, ends, values, space: MeasureSpace = UNIT, tail=0.0,
                    linf_only: bool = False) -> "StepFunction":
        """Assemble from disjoint pieces in any order; gaps become zero."""
        starts = _as_array(starts)
        ends = _as_array(ends)
        values = _as_array(values)
        keep = np.asarray(ends > starts, dtype=bool)
        starts, ends, values = starts[keep], ends[keep], values[keep]
        order = np.argsort(starts, kind="stable")
        starts, ends, values = starts[order], ends[order], values[order]
        if len(starts) and np.any(starts[1:] < ends[:-1]):
            raise ValueError("pieces overlap")
        if not len(starts):
            return cls([0 * tail], [], tail, space, linf_only)
        zero = starts[0] * 0
        prev_end = np.concatenate([_as_array([zero]), ends[:-1]])
        gap = np.asarray(starts > prev_end, dtype=bool)
        # each piece contributes an optional gap piece followed by itself
        k = len(starts)
        bps = np.empty(2 * k + 1, dtype=starts.dtype)
        vals = np.empty(2 * k, dtype=values.dtype)
        bps[0] = zero
        bps[1::2] = starts
        bps[2::2] = ends
        vals[0::2] = values * 0
        vals[1::2] = values
        keep_piece = np.ones(2 * k, dtype=bool)
        keep_piece[0::2] = gap
        keep_bp = np.concatenate([[True], keep_piece])
        return cls(bps[keep_bp], vals[keep_piece], tail, space, linf_only)


def _num_out(v):
    if isinstance(v, Fraction):
        return v.numerator if v.denominator == 1 else f"{v.numerator}/{v.denominator}"
    return float(v)


def _num_in(v):
    if isinstance(v, str):
        return Fraction(v)
    return v


def _dot(a: np.ndarray, b: np.ndarray):
    if a.dtype != object and b.dtype != object:
        return float(np.dot(a, b))
    # exact entries: plain left-to-right accumulation
    total = 0 * (a[0] if len(a) else 0.0)
    for u, w in zip(a, b):
        total = total + u * w
    return total if len(a) else 0.0


def _canonical(bps: np.ndarray, vals: np.ndarray, tail, space: MeasureSpace):
    if space.finite:
        if bps[-1] < space.alpha and tail != 0:
            one = Fraction(1) if bps.dtype == object or vals.dtype == object else 1.0
            bps = np.concatenate([bps, _as_array([one])])
            vals = np.concatenate([vals, _as_array([tail])])
        tail = 0 * tail
    if bps.dtype != vals.dtype:
        bps = bps.astype(object)
        vals = vals.astype(object)
    if len(vals):
        keep = np.ones(len(vals), dtype=bool)
        keep[1:] = np.asarray(vals[1:] != vals[:-1], dtype=bool)
        starts = bps[:-1][keep]
        vals = vals[keep]
        bps = np.concatenate([starts, bps[-1:]])
        # trailing pieces equal to the tail are absorbed by it
        n = len(vals)
        while n and vals[n - 1] == tail:
            n -= 1
        bps = bps[: n + 1]
        vals = vals[:n]
    return bps, vals, tail


# ---------------------------------------------------------------------------
# distribution, rearrangement, maximal function
# ---------------------------------------------------------------------------

def distribution(x: StepFunction, lam):
    """``d_x(lam) = mu{|x| > lam}``."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    if abs(x.tail) > lam:
        return math.inf
    mask = np.asarray(np.abs(x.values) > lam, dtype=bool)
    total = 0 * x.end
    for length in x.lengths[mask]:
        total = total + length
    return total


def rearrange(x: StepFunction) -> StepFunction:
    """Decreasing rearrangement ``x*`` as a nonincreasing step function."""
    if x.tail != 0:
        raise NotRearrangeableError(
            "x* of a function with nonzero tail on [0, inf) is not a finite step function"
        )
    mags = np.abs(x.values)
    if len(mags) == 0:
        return x
    if bool(np.all(mags[1:] <= mags[:-1])) and bool(np.all(x.values >= 0)):
        return x
    order = np.argsort(-mags, kind="stable")
    lengths = x.lengths[order]
    bps = np.concatenate([x.breakpoints[:1], np.cumsum(lengths)])
    # same pieces, so the same total; pin it so float cumsum cannot overshoot alpha
    if bps.dtype != object:
        bps = np.minimum(bps, x.end)
    bps[-1] = x.end
    return StepFunction(bps, mags[order], 0 * x.tail, x.space)


class CumulativeProfile:
    """Concave piecewise-linear ``F(t) = int_0^t x*`` with nodes ``(t_k, F_k)``."""

    __slots__ = ("t", "F", "final_slope")

    def __init__(self, t, F, final_slope=0.0):
        t = _as_array(t)
        F = _as_array(F)
        if len(t) != len(F) or len(t) == 0 or t[0] != 0 or F[0] != 0:
            raise ValueError("profile needs matching node arrays starting at (0, 0)")
        self.t = t
        self.F = F
        self.final_slope = final_slope

    @property
    def slopes(self) -> np.ndarray:
        return np.diff(self.F) / np.diff(self.t) if len(self.t) > 1 else self.F[:0]

    @property
    def total(self):
        return self.F[-1]

    def __call__(self, t):
        scalar = np.ndim(t) == 0
        exact = self.t.dtype == object or self.F.dtype == object
        ts = np.atleast_1d(np.asarray(t, dtype=object if exact else float))
        idx = _search(self.t, ts)
        idx = np.clip(idx, 0, len(self.t) - 1)
        slopes = np.concatenate([self.slopes, _as_array([self.final_slope])])
        out = self.F[idx] + slopes[idx] * (ts - self.t[idx])
        return out[0] if scalar else out

    def is_concave(self) -> bool:
        s = np.concatenate([self.slopes, _as_array([self.final_slope])])
        return bool(np.all(s[1:] <= s[:-1])) and bool(np.all(s >= 0))

    def nodes(self):
        return list(zip(self.t, self.F))

    def __repr__(self):
        return f"CumulativeProfile(nodes={[(float(a), float(b)) for a, b in self.nodes()]}, final_slope={float(self.final_slope)})"


def cumulative_profile(x: StepFunction) -> CumulativeProfile:
    xs = rearrange(x)
    F = np.concatenate([xs.breakpoints[:1] * 0, np.cumsum(xs.values * xs.lengths)])
    return CumulativeProfile(xs.breakpoints, F, 0 * xs.tail)


class MaximalFunction:
    """``x**(t) = a_k + c_k / t`` on ``[s_{k-1}, s_k)``; the last piece runs to infinity."""

    __slots__ = ("starts", "a", "c", "profile")

    def __init__(self, profile: CumulativeProfile):
        t, F = profile.t, profile.F
        slopes = np.concatenate([profile.slopes, _as_array([profile.final_slope])])
        self.profile = profile
        self.starts = t
        self.a = slopes
        self.c = F - slopes * t

    def __call__(self, t):
        if np.any(np.asarray(t) <= 0):
            raise ValueError("x** is defined for t > 0 only")
        return self.profile(t) / t

    def pieces(self):
        ends = np.concatenate([self.starts[1:], _as_array([math.inf])])
        return list(zip(self.starts, ends, self.a, self.c))


def maximal_profile(x: StepFunction) -> MaximalFunction:
    return MaximalFunction(cumulative_profile(x))


# ---------------------------------------------------------------------------
# pointwise arithmetic
# ---------------------------------------------------------------------------

def _refined(x: StepFunction, points) -> tuple[np.ndarray, np.ndarray]:
    """Breakpoints of ``x`` merged with ``points`` and the value on each piece."""
    pts = _as_array(points) if not isinstance(points, np.ndarray) else points
    bps = x.breakpoints
    if len(pts):
        bps = np.union1d(bps, pts)
    return bps, x._left_values(bps[:-1])


def _common(x: StepFunction, y: StepFunction):
    if x.space != y.space:
        raise SpaceMismatchError(f"alpha={x.space.alpha} vs alpha={y.space.alpha}")
    bps = np.union1d(x.breakpoints, y.breakpoints)
    return bps, x._left_values(bps[:-1]), y._left_values(bps[:-1])


def _binary(x: StepFunction, y: StepFunction, fn) -> StepFunction:
    bps, u, v = _common(x, y)
    return StepFunction(bps, fn(u, v), fn(x.tail, y.tail), x.space,
                        linf_only=x.linf_only or y.linf_only)


def indicator(intervals: Iterable[tuple], space: MeasureSpace = UNIT) -> StepFunction:
    """``chi_S`` for a finite union ``S`` of disjoint intervals ``[a, b)``."""
    ivs = sorted((a, b) for a, b in intervals if b > a)
    one = 1
    if not any(isinstance(a, Fraction) or isinstance(b, Fraction) for a, b in ivs):
        one = 1.0
        ivs = [(float(a), min(float(b), space.alpha)) for a, b in ivs]
    if not ivs:
        return StepFunction.zero(space)
    return StepFunction.from_pieces([a for a, _ in ivs], [b for _, b in ivs],
                                    [one] * len(ivs), space, 0 * one)


def pointwise_arith(op: str, *args) -> StepFunction:
    """Exact pointwise arithmetic on step functions.

    ``op`` is one of ``add``, ``sub``, ``mul``, ``scale`` (``x, c``), ``abs``,
    ``min`` (``x, c``: min with a constant), ``max`` (``x, c``) or
    ``restrict`` (``x, intervals``).
    """
    if op == "add":
        return _binary(args[0], args[1], lambda u, v: u + v)
    if op == "sub":
        return _binary(args[0], args[1], lambda u, v: u - v)
    if op == "mul":
        return _binary(args[0], args[1], lambda u, v: u * v)
    x = args[0]
    if op == "abs":
        return StepFunction(x.breakpoints, np.abs(x.values), abs(x.tail), x.space, x.linf_only)
    if op == "scale":
        c = args[1]
        return StepFunction(x.breakpoints, x.values * c, x.tail * c, x.space, x.linf_only)
    if op == "min":
        c = args[1]
        return StepFunction(x.breakpoints, np.minimum(x.values, c), min(x.tail, c), x.space, x.linf_only)
    if op == "max":
        c = args[1]
        return StepFunction(x.breakpoints, np.maximum(x.values, c), max(x.tail, c), x.space, x.linf_only)
    if op == "restrict":
        return _binary(x, indicator(args[1], x.space), lambda u, v: u * v)
    raise ValueError(f"unknown pointwise op {op!r}")


def splice(base: StepFunction, starts, ends, parts) -> StepFunction:
    """Replace ``base`` on each ``[starts[j], ends[j])`` by ``parts[j]``.

    ``parts[j]`` is either a constant or a ``(starts, ends, values)`` triple of
    pieces lying inside the j-th interval.  Intervals must be disjoint.
    """
    starts = _as_array(starts)
    ends = _as_array(ends)
    if len(starts) == 0:
        return base
    cut = np.concatenate([starts, ends])
    hi = max(ends.max(), base.end)
    bps = np.union1d(base.breakpoints, cut)
    bps = bps[bps <= hi]
    left = bps[:-1]
    vals = base._left_values(left)
    order = np.argsort(starts, kind="stable")
    s_sorted, e_sorted = starts[order], ends[order]
    j = _search(s_sorted, left)
    inside = np.zeros(len(left), dtype=bool)
    ok = j >= 0
    inside[ok] = np.asarray(left[ok] < e_sorted[j[ok]], dtype=bool)
    out_s = [left[~inside]]
    out_e = [bps[1:][~inside]]
    out_v = [vals[~inside]]
    const_idx = [k for k, p in enumerate(parts) if not isinstance(p, tuple)]
    if const_idx:
        out_s.append(starts[const_idx])
        out_e.append(ends[const_idx])
        out_v.append(_as_array([parts[k] for k in const_idx]))
    for p in parts:
        if isinstance(p, tuple):
            out_s.append(_as_array(p[0]))
            out_e.append(_as_array(p[1]))
            out_v.append(_as_array(p[2]))
    return StepFunction.from_pieces(
        np.concatenate(out_s), np.concatenate(out_e), np.concatenate(out_v),
        base.space, base.tail, base.linf_only,
    )


def window(x: StepFunction, a, b):
    """Pieces of ``x`` clipped to ``[a, b)`` as ``(starts, ends, values)``."""
    bps, vals = _refined(x, _as_array([a, b]))
    if bps[-1] < b:
        bps = np.concatenate([bps, _as_array([b])])
        vals = np.concatenate([vals, _as_array([x.tail])])
    s, e = bps[:-1], bps[1:]
    m = np.asarray((s >= a) & (e <= b), dtype=bool)
    return s[m], e[m], vals[m]


def from_cells(values, width, space: MeasureSpace = UNIT, start=0.0) -> StepFunction:
    """Step function equal to ``values[i]`` on ``[start + i*width, start + (i+1)*width)``."""
    vals = _as_array(values)
    n = len(vals)
    if isinstance(width, Fraction) or isinstance(start, Fraction):
        bps = [start + k * width for k in range(n + 1)]
    else:
        bps = list(float(start) + np.arange(n + 1) * float(width))
    if start > 0:
        bps = [0 * start] + bps
        vals = np.concatenate([_as_array([0 * width]), vals])
    return StepFunction(bps, vals, 0 * width, space)
