"""
Dubins shortest paths (forward-only, bounded curvature) between two poses.
"""

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ..core.geometry import TWO_PI

# segment kinds: +1 left, 0 straight, -1 right
WORDS = {
    "LSL": (1, 0, 1),
    "LSR": (1, 0, -1),
    "RSL": (-1, 0, 1),
    "RSR": (-1, 0, -1),
    "RLR": (-1, 1, -1),
    "LRL": (1, -1, 1),
}


def _mod2pi(a: float) -> float:
    return a - TWO_PI * math.floor(a / TWO_PI)


def _lsl(alpha, beta, d, sa, sb, ca, cb, c_ab):
    p_sq = 2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sa - sb)
    if p_sq < 0:
        return None
    tmp = math.atan2(cb - ca, d + sa - sb)
    return _mod2pi(tmp - alpha), math.sqrt(p_sq), _mod2pi(beta - tmp)


def _rsr(alpha, beta, d, sa, sb, ca, cb, c_ab):
    p_sq = 2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sb - sa)
    if p_sq < 0:
        return None
    tmp = math.atan2(ca - cb, d - sa + sb)
    return _mod2pi(alpha - tmp), math.sqrt(p_sq), _mod2pi(tmp - beta)


def _lsr(alpha, beta, d, sa, sb, ca, cb, c_ab):
    p_sq = -2.0 + d * d + 2.0 * c_ab + 2.0 * d * (sa + sb)
    if p_sq < 0:
        return None
    p = math.sqrt(p_sq)
    tmp = math.atan2(-ca - cb, d + sa + sb) - math.atan2(-2.0, p)
    return _mod2pi(tmp - alpha), p, _mod2pi(tmp - _mod2pi(beta))


def _rsl(alpha, beta, d, sa, sb, ca, cb, c_ab):
    p_sq = -2.0 + d * d + 2.0 * c_ab - 2.0 * d * (sa + sb)
    if p_sq < 0:
        return None
    p = math.sqrt(p_sq)
    tmp = math.atan2(ca + cb, d - sa - sb) - math.atan2(2.0, p)
    return _mod2pi(alpha - tmp), p, _mod2pi(beta - tmp)


def _rlr(alpha, beta, d, sa, sb, ca, cb, c_ab):
    tmp = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sa - sb)) / 8.0
    if abs(tmp) > 1.0:
        return None
    phi = math.atan2(ca - cb, d - sa + sb)
    p = _mod2pi(TWO_PI - math.acos(tmp))
    t = _mod2pi(alpha - phi + _mod2pi(p / 2.0))
    return t, p, _mod2pi(alpha - beta - t + _mod2pi(p))


def _lrl(alpha, beta, d, sa, sb, ca, cb, c_ab):
    tmp = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sb - sa)) / 8.0
    if abs(tmp) > 1.0:
        return None
    phi = math.atan2(ca - cb, d + sa - sb)
    p = _mod2pi(TWO_PI - math.acos(tmp))
    t = _mod2pi(-alpha - phi + p / 2.0)
    return t, p, _mod2pi(_mod2pi(beta) - alpha - t + _mod2pi(p))


_SOLVERS = {"LSL": _lsl, "LSR": _lsr, "RSL": _rsl, "RSR": _rsr, "RLR": _rlr, "LRL": _lrl}


@dataclass(frozen=True)
class DubinsPath:
    start: Tuple[float, float, float]
    word: str
    params: Tuple[float, float, float]
    rho: float

    @property
    def length(self) -> float:
        return float(sum(self.params)) * self.rho

    @property
    def segment_lengths(self) -> Tuple[float, float, float]:
        return tuple(p * self.rho for p in self.params)

    @property
    def curvatures(self) -> Tuple[float, float, float]:
        return tuple(k / self.rho for k in WORDS[self.word])

    def sample(self, step: float) -> Tuple[np.ndarray, np.ndarray]:
        """Poses (n, 3) and curvatures (n,) at arc-length spacing ≤ step, both ends included"""
        total = self.length
        n = max(1, int(math.ceil(total / step - 1e-12)))
        s = np.linspace(0.0, total, n + 1)
        poses = np.array([self.pose_at(si) for si in s])
        kinds = WORDS[self.word]
        bounds = np.cumsum(self.segment_lengths)
        seg = np.minimum(np.searchsorted(bounds, s, side="right"), 2)
        curv = np.array([kinds[k] / self.rho for k in seg])
        return poses, curv

    def pose_at(self, s: float) -> np.ndarray:
        x0, y0, th0 = self.start
        q = np.array([0.0, 0.0, th0])
        t = max(0.0, s) / self.rho
        for kind, param in zip(WORDS[self.word], self.params):
            run = min(t, param)
            q = _segment(q, run, kind)
            t -= run
            if t <= 0.0:
                break
        return np.array([x0 + q[0] * self.rho, y0 + q[1] * self.rho, _mod2pi(q[2])])


def _segment(q: np.ndarray, t: float, kind: int) -> np.ndarray:
    x, y, th = q
    if kind == 1:
        return np.array([x + math.sin(th + t) - math.sin(th), y - math.cos(th + t) + math.cos(th), th + t])
    if kind == -1:
        return np.array([x - math.sin(th - t) + math.sin(th), y + math.cos(th - t) - math.cos(th), th - t])
    return np.array([x + math.cos(th) * t, y + math.sin(th) * t, th])


def dubins_shortest(q0, q1, rho: float) -> Optional[DubinsPath]:
    """Shortest of the six Dubins words from q0 to q1 = (x, y, ψ), turning radius rho"""
    dx, dy = q1[0] - q0[0], q1[1] - q0[1]
    d = math.hypot(dx, dy) / rho
    theta = _mod2pi(math.atan2(dy, dx)) if d > 0 else 0.0
    alpha = _mod2pi(q0[2] - theta)
    beta = _mod2pi(q1[2] - theta)
    args = (alpha, beta, d, math.sin(alpha), math.sin(beta), math.cos(alpha), math.cos(beta),
            math.cos(alpha - beta))
    best: Optional[DubinsPath] = None
    for word, solve in _SOLVERS.items():
        params = solve(*args)
        if params is None:
            continue
        if best is None or sum(params) < sum(best.params):
            best = DubinsPath((float(q0[0]), float(q0[1]), float(q0[2])), word, params, rho)
    return best


def dubins_length(q0, q1, rho: float) -> float:
    path = dubins_shortest(q0, q1, rho)
    return math.inf if path is None else path.length
