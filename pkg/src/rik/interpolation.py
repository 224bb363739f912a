"""K-functional of the couple (L1, Linf), the K_{theta,q} norms and probe-set operator norms."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .measure import CumulativeProfile, StepFunction, cumulative_profile

__all__ = [
    "k_functional",
    "k_profile",
    "phi_theta_q",
    "divergent_end",
    "KThetaQ",
    "OperatorNormEstimate",
    "operator_norm_estimate",
]

# relative change at which step halving stops
QUAD_RTOL = 1e-12
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def k_functional(t, x: StepFunction):
    """``K(t, x) = inf ||x0||_1 + t ||x1||_inf`` over ``x = x0 + x1``, i.e. ``int_0^t x*``."""
    if t <= 0:
        raise ValueError("K(t, x) needs t > 0")
    return cumulative_profile(x)(t)


def k_profile(x: StepFunction) -> CumulativeProfile:
    """``t -> K(t, x)`` as a concave piecewise-linear profile."""
    return cumulative_profile(x)


def _pieces(profile: CumulativeProfile):
    t = np.asarray(profile.t, dtype=float)
    F = np.asarray(profile.F, dtype=float)
    a = np.diff(F) / np.diff(t) if len(t) > 1 else np.zeros(0)
    c = F[:-1] - a * t[:-1]
    return t, F, a, c


def divergent_end(profile: CumulativeProfile, theta: float, q: float) -> Optional[str]:
    """``'zero'`` or ``'infinity'`` when ``Phi_{theta,q}(K)`` diverges there, else ``None``."""
    _check(theta, q)
    t, F, a, _ = _pieces(profile)
    final = float(profile.final_slope)
    if F[-1] == 0 and final == 0:
        return None
    first_slope = a[0] if len(a) else final
    if theta == 1 and first_slope > 0 and q < math.inf:
        return "zero"
    if final > 0 and theta < 1:
        return "infinity"
    if final > 0 and q < math.inf:
        return "infinity"
    if final == 0 and theta == 0 and q < math.inf:
        return "infinity"
    return None


def _check(theta, q):
    if not 0 <= theta <= 1:
        raise ValueError("theta must lie in [0, 1]")
    if not q >= 1:
        raise ValueError("q must lie in [1, inf]")


def _closed_form_middle(a, c, lo, hi, theta, q) -> float:
    # (c + a t)^q t^(-q theta - 1) expanded binomially for q in {1, 2}
    total = 0.0
    for k in range(int(q) + 1):
        coef = math.comb(int(q), k) * c ** (q - k) * a ** k
        total += np.sum(coef * _vec_power_integral(k - q * theta, lo, hi))
    return float(total)


def _vec_power_integral(e, lo, hi):
    if e == 0:
        return np.log(hi / lo)
    return (hi ** e - lo ** e) / e


def _quadrature_middle(a, c, lo, hi, theta, q, panels: int) -> float:
    # Gauss-Legendre in u = ln t on each piece, ``panels`` equal sub-panels per piece
    ulo, uhi = np.log(lo), np.log(hi)
    h = (uhi - ulo) / panels
    edges = ulo[:, None] + h[:, None] * np.arange(panels)[None, :]
    u = edges[:, :, None] + 0.5 * h[:, None, None] * (_GL_NODES[None, None, :] + 1.0)
    t = np.exp(u)
    vals = ((c[:, None, None] + a[:, None, None] * t) * t ** (-theta)) ** q
    return float(np.sum(0.5 * h[:, None, None] * _GL_WEIGHTS[None, None, :] * vals))


def phi_theta_q(profile: CumulativeProfile, theta: float, q: float, panels: Optional[int] = None) -> float:
    """``(int_0^inf (t^-theta K(t))^q dt/t)^(1/q)``, or ``sup t^-theta K(t)`` for ``q = inf``.

    Divergent integrals give ``inf`` (see :func:`divergent_end`).  The first
    and last pieces and the cases ``q in {1, 2}`` use closed forms; other
    ``q`` use composite Gauss-Legendre in ``ln t``.  With ``panels=None`` the
    panel count doubles until the relative change drops below ``QUAD_RTOL``;
    a fixed ``panels`` skips the refinement.
    """
    _check(theta, q)
    if divergent_end(profile, theta, q) is not None:
        return math.inf
    t, F, a, c = _pieces(profile)
    final = float(profile.final_slope)
    if F[-1] == 0 and final == 0:
        return 0.0
    if q == math.inf:
        return _sup_norm(t, F, a, c, theta, final)

    # first piece: K = a0 t on (0, t1]
    total = a[0] ** q * t[1] ** (q * (1 - theta)) / (q * (1 - theta)) if a[0] > 0 else 0.0
    # last piece: K = F_end + final (t - t_end) on [t_end, inf); final > 0 diverged above
    total += F[-1] ** q * t[-1] ** (-q * theta) / (q * theta)
    if len(a) > 1:
        am, cm, lo, hi = a[1:], c[1:], t[1:-1], t[2:]
        if q in (1, 2):
            total += _closed_form_middle(am, cm, lo, hi, theta, q)
        elif panels is not None:
            total += _quadrature_middle(am, cm, lo, hi, theta, q, panels)
        else:
            n = 1
            prev = _quadrature_middle(am, cm, lo, hi, theta, q, n)
            while True:
                n *= 2
                cur = _quadrature_middle(am, cm, lo, hi, theta, q, n)
                if abs(cur - prev) <= QUAD_RTOL * abs(cur) or n >= 1 << 10:
                    break
                prev = cur
            total += cur
    return float(total ** (1.0 / q))


def _sup_norm(t, F, a, c, theta, final) -> float:
    pts = t[1:]
    best = float(np.max(pts ** (-theta) * F[1:]))
    if theta == 1:
        best = max(best, float(a[0]), final)
    if theta == 0:
        best = max(best, float(F[-1]))
    # interior critical points of c t^-theta + a t^(1-theta)
    if 0 < theta < 1:
        with np.errstate(divide="ignore", invalid="ignore"):
            crit = theta * c / (a * (1 - theta))
        ok = (a > 0) & (crit > t[:-1]) & (crit < t[1:])
        if np.any(ok):
            tc = crit[ok]
            best = max(best, float(np.max(tc ** (-theta) * (c[ok] + a[ok] * tc))))
    return best


@dataclass(frozen=True)
class KThetaQ:
    """Real-interpolation norm ``||x||_{theta,q} = Phi_{theta,q}(K(., x))``."""

    theta: float
    q: float

    def __post_init__(self):
        _check(self.theta, self.q)

    def norm(self, x: StepFunction) -> float:
        return phi_theta_q(k_profile(x), self.theta, self.q)

    def to_json(self) -> dict:
        return {"variant": "K", "theta": self.theta, "q": "inf" if self.q == math.inf else self.q}


@dataclass(frozen=True)
class OperatorNormEstimate:
    """Max of ``||Tx||_Y / ||x||_X`` over probes: a lower bound on the operator norm."""

    value: float
    probe_count: int
    witness: int
    bound_kind: str = "lower"

    def to_json(self) -> dict:
        return {"value": self.value, "probes": self.probe_count, "witness_id": self.witness,
                "bound_kind": self.bound_kind}


def operator_norm_estimate(T, X, Y, probes: Sequence[StepFunction], minus=None) -> OperatorNormEstimate:
    """Probe-set estimate of ``||T||_{B(X,Y)}``, or of ``||T - minus||`` when ``minus`` is given.

    ``X`` and ``Y`` are anything with a ``norm`` method (``NormSpec`` or
    :class:`KThetaQ`).  Differences are taken between the two outputs.
    """
    if not probes:
        raise ValueError("need at least one probe")
    best, arg = -math.inf, -1
    for i, x in enumerate(probes):
        nx = float(X.norm(x))
        if nx == 0:
            raise ValueError(f"probe {i} has zero norm")
        y = T.apply(x)
        if minus is not None:
            y = y - minus.apply(x)
        r = float(Y.norm(y)) / nx
        if r > best:
            best, arg = r, i
    return OperatorNormEstimate(best, len(probes), arg)
