"""Rearrangement-invariant norms: L1, Linf, L1+Linf, Lp and the Marcinkiewicz spaces."""
from __future__ import annotations

import math
from fractions import Fraction
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .measure import HALF_LINE, MeasureSpace, StepFunction, cumulative_profile, rearrange

__all__ = [
    "QuasiconcavePhi",
    "NormSpec",
    "QuasiconcaveReport",
    "IukmLimit",
    "norm",
    "fundamental_function",
    "quasiconcave_check",
    "iukm_limit",
]


@dataclass(frozen=True, eq=False)
class QuasiconcavePhi:
    """``phi(t) = t**a`` (``form='power'``) or a table interpolated linearly from the origin.

    Tables are extended by their last value to the right.
    """

    form: str = "power"
    a: float = 1.0
    t: tuple = field(default=())
    v: tuple = field(default=())

    def __post_init__(self):
        if self.form == "power":
            if not 0.0 <= self.a <= 1.0:
                raise ValueError("power exponent must lie in [0, 1]")
        elif self.form == "table":
            t = np.asarray(self.t, dtype=float)
            v = np.asarray(self.v, dtype=float)
            if len(t) == 0 or len(t) != len(v):
                raise ValueError("table needs matching nonempty abscissae and values")
            if np.any(t <= 0) or np.any(np.diff(t) <= 0):
                raise ValueError("table abscissae must be positive and increasing")
            if np.any(v <= 0):
                raise ValueError("phi must be positive for t > 0")
            object.__setattr__(self, "t", tuple(t.tolist()))
            object.__setattr__(self, "v", tuple(v.tolist()))
        else:
            raise ValueError(f"unknown phi form {self.form!r}")

    @classmethod
    def power(cls, a: float) -> "QuasiconcavePhi":
        return cls("power", float(a))

    @classmethod
    def table(cls, t, v) -> "QuasiconcavePhi":
        return cls("table", t=tuple(t), v=tuple(v))

    def __call__(self, t):
        ts = np.asarray(t, dtype=float)
        if self.form == "power":
            if self.a == 0:
                out = np.where(ts > 0, 1.0, 0.0)
            else:
                out = np.power(ts, self.a)
        else:
            out = np.interp(ts, (0.0,) + self.t, (0.0,) + self.v)
        return float(out) if np.ndim(out) == 0 else out

    def segments(self):
        """Linear pieces ``(lo, hi, p, q)`` with ``phi = p + q t`` on ``[lo, hi]`` (table form)."""
        knots = (0.0,) + self.t
        vals = (0.0,) + self.v
        out = []
        for lo, hi, vlo, vhi in zip(knots[:-1], knots[1:], vals[:-1], vals[1:]):
            q = (vhi - vlo) / (hi - lo)
            out.append((lo, hi, vlo - q * lo, q))
        out.append((knots[-1], math.inf, vals[-1], 0.0))
        return out

    def to_json(self) -> dict:
        if self.form == "power":
            return {"form": "power", "a": self.a}
        return {"form": "table", "t": list(self.t), "v": list(self.v)}

    @classmethod
    def from_json(cls, data: dict) -> "QuasiconcavePhi":
        if data.get("form", "power") == "power":
            return cls.power(data["a"])
        return cls.table(data["t"], data["v"])


_VARIANTS = ("L1", "LInf", "L1+LInf", "Lp", "Mstar", "M")


@dataclass(frozen=True, eq=False)
class NormSpec:
    """One of six rearrangement-invariant norms; ``p`` for ``Lp``, ``phi`` for the Marcinkiewicz pair.

    ``Mstar`` (``sup phi(t) x*(t)``) is only a quasi-norm: it is neither
    subadditive nor monotone under majorization in general.  Every other
    variant is a symmetric Banach norm; see :attr:`banach`.
    """

    variant: str
    p: Optional[float] = None
    phi: Optional[QuasiconcavePhi] = None

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise ValueError(f"unknown norm variant {self.variant!r}")
        if self.variant == "Lp":
            if self.p is None or not 1.0 < float(self.p) < math.inf:
                raise ValueError("Lp needs 1 < p < inf")
        if self.variant in ("Mstar", "M") and not isinstance(self.phi, QuasiconcavePhi):
            raise ValueError("Marcinkiewicz norms need a quasiconcave phi")

    # constructors
    @classmethod
    def l1(cls):
        return cls("L1")

    @classmethod
    def linf(cls):
        return cls("LInf")

    @classmethod
    def l1_plus_linf(cls):
        return cls("L1+LInf")

    @classmethod
    def lp(cls, p: float):
        return cls("Lp", p=float(p))

    @classmethod
    def mstar(cls, phi: QuasiconcavePhi):
        return cls("Mstar", phi=phi)

    @classmethod
    def marcinkiewicz(cls, phi: QuasiconcavePhi):
        return cls("M", phi=phi)

    def norm(self, x: StepFunction):
        return norm(self, x)

    @property
    def banach(self) -> bool:
        """True for the symmetric Banach norms, which are monotone under majorization."""
        return self.variant != "Mstar"

    def __repr__(self):
        extra = f", p={self.p}" if self.p is not None else ""
        extra += f", phi={self.phi.to_json()}" if self.phi is not None else ""
        return f"NormSpec({self.variant!r}{extra})"

    def to_json(self) -> dict:
        out = {"variant": self.variant}
        if self.p is not None:
            out["p"] = self.p
        if self.phi is not None:
            out["phi"] = self.phi.to_json()
        return out

    @classmethod
    def from_json(cls, data: dict) -> "NormSpec":
        phi = QuasiconcavePhi.from_json(data["phi"]) if data.get("phi") else None
        p = data.get("p")
        return cls(data["variant"], None if p is None else float(p), phi)


def norm(spec: NormSpec, x: StepFunction):
    """Exact norm of a step function."""
    v = spec.variant
    if v == "LInf":
        return x.sup()
    # integral norms are summed over x* so that they are exactly rearrangement invariant
    if v == "L1":
        return x.integral() if x.tail != 0 else rearrange(x).integral()
    if v == "Lp":
        if x.tail != 0:
            return math.inf
        p = spec.p
        xs = rearrange(x)
        mags = np.asarray(xs.values, dtype=float)
        lens = np.asarray(xs.lengths, dtype=float)
        return float(np.sum(mags ** p * lens) ** (1.0 / p))
    if v == "L1+LInf":
        return cumulative_profile(x)(x.end * 0 + 1)
    if v == "Mstar":
        return _mstar(spec.phi, x)
    return _marcinkiewicz(spec.phi, x)


def _mstar(phi: QuasiconcavePhi, x: StepFunction) -> float:
    # x* is constant on each piece and phi is continuous nondecreasing,
    # so the sup over a piece is approached at its right end
    xs = rearrange(x)
    if len(xs) == 0:
        return 0.0
    vals = np.asarray(xs.values, dtype=float)
    ends = np.asarray(xs.breakpoints[1:], dtype=float)
    return float(np.max(vals * phi(ends)))


def _marcinkiewicz(phi: QuasiconcavePhi, x: StepFunction) -> float:
    prof = cumulative_profile(x)
    t = np.asarray(prof.t, dtype=float)
    F = np.asarray(prof.F, dtype=float)
    if len(t) < 2:
        return 0.0
    slopes = np.diff(F) / np.diff(t)
    best = 0.0
    if phi.form == "power" and phi.a == 0:
        best = float(slopes[0])  # limit of x**(t) phi(t) as t -> 0+
    candidates = [t[1:]]
    if phi.form == "power":
        b = phi.a
        a_k = slopes
        c_k = F[:-1] - slopes * t[:-1]
        if 0 < b < 1:
            with np.errstate(divide="ignore", invalid="ignore"):
                crit = c_k * (1 - b) / (a_k * b)
            ok = (a_k > 0) & (c_k > 0) & (crit > t[:-1]) & (crit < t[1:])
            candidates.append(crit[ok])
    else:
        knots = np.asarray(phi.t, dtype=float)
        knots = knots[knots < t[-1]]
        candidates.append(knots)
        edges = np.union1d(t, knots)
        for lo, hi in zip(edges[:-1], edges[1:]):
            mid = 0.5 * (lo + hi)
            k = int(np.searchsorted(t, mid, side="right") - 1)
            a, c = slopes[k], F[k] - slopes[k] * t[k]
            seg = next(s for s in phi.segments() if s[0] <= mid < s[1])
            p, q = seg[2], seg[3]
            if a * q > 0 and c * p > 0:
                crit = math.sqrt(c * p / (a * q))
                if lo < crit < hi:
                    candidates.append(np.array([crit]))
    pts = np.concatenate(candidates)
    vals = np.asarray(prof(pts), dtype=float) / pts * phi(pts)
    return float(max(best, np.max(vals)))


def fundamental_function(spec: NormSpec, t, space: MeasureSpace = HALF_LINE):
    """``phi_E(t) = ||chi_[0,t)||_E``."""
    if t <= 0:
        raise ValueError("fundamental function needs t > 0")
    if t > space.alpha:
        raise ValueError(f"t must lie in (0, {space.alpha}]")
    one = 1 if isinstance(t, Fraction) else 1.0
    return norm(spec, StepFunction([0 * one, t], [one], space=space))


@dataclass(frozen=True)
class QuasiconcaveReport:
    passed: bool
    violation: Optional[str] = None
    at: Optional[float] = None

    def to_json(self) -> dict:
        return {"passed": self.passed, "violation": self.violation, "at": self.at}


def quasiconcave_check(phi: QuasiconcavePhi, probes: int = 200,
                       space: MeasureSpace = HALF_LINE, rtol: float = 1e-12) -> QuasiconcaveReport:
    """Check that ``phi`` is positive, nondecreasing and ``phi(t)/t`` nonincreasing.

    Probes form a geometric grid on ``[1e-6, 1e6]`` cut to ``(0, alpha)``; the
    abscissae of a table are added so no kink is skipped.
    """
    if probes < 2:
        raise ValueError("need at least two probes")
    ts = np.geomspace(1e-6, 1e6, probes)
    if phi.form == "table":
        ts = np.union1d(ts, np.asarray(phi.t))
    ts = ts[ts < space.alpha] if space.finite else ts
    vals = np.asarray(phi(ts), dtype=float)
    if np.any(vals <= 0):
        i = int(np.flatnonzero(vals <= 0)[0])
        return QuasiconcaveReport(False, "phi(t) <= 0 for t > 0", float(ts[i]))
    inc = np.flatnonzero(vals[1:] < vals[:-1] * (1 - rtol))
    if len(inc):
        return QuasiconcaveReport(False, "phi decreases", float(ts[inc[0] + 1]))
    ratio = vals / ts
    dec = np.flatnonzero(ratio[1:] > ratio[:-1] * (1 + rtol))
    if len(dec):
        return QuasiconcaveReport(False, "phi(t)/t increases", float(ts[dec[0] + 1]))
    return QuasiconcaveReport(True)


@dataclass(frozen=True)
class IukmLimit:
    """Limit of ``t / phi_E(t)`` as ``t -> 0+``: ``zero``, ``positive`` (with value) or ``divergent``."""

    verdict: str
    value: float

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "value": self.value}

    def __str__(self):
        return f"positive({self.value:g})" if self.verdict == "positive" else self.verdict


def _phi_exponent_near_zero(spec: NormSpec) -> Optional[float]:
    """Exponent ``b`` with ``phi_E(t) = t**b`` near 0, when analytic."""
    v = spec.variant
    if v in ("L1", "L1+LInf"):
        return 1.0
    if v == "LInf":
        return 0.0
    if v == "Lp":
        return 1.0 / spec.p
    if spec.phi.form == "power":
        return spec.phi.a
    return None


def iukm_limit(spec: NormSpec, rtol: float = 1e-6) -> IukmLimit:
    b = _phi_exponent_near_zero(spec)
    if b is not None:
        return IukmLimit("positive", 1.0) if b == 1.0 else IukmLimit("zero", 0.0)
    ts = 2.0 ** -np.arange(1, 41)
    r = np.array([t / fundamental_function(spec, t) for t in ts])
    last, prev = r[-1], r[-2]
    if last > 0 and abs(last - prev) <= rtol * abs(last):
        return IukmLimit("positive", float(last))
    if last > prev and last > r[0]:
        return IukmLimit("divergent", math.inf)
    return IukmLimit("zero", 0.0)
