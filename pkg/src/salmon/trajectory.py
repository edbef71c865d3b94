"""Cubic-spline reference trajectory through route waypoints.

Each coordinate is a natural cubic spline over chord-length (3D) arc
parameter ``s``. Fitting is delegated to :class:`scipy.interpolate.CubicSpline`;
the per-tick evaluation used by the autopilot runs on the spline's piecewise
coefficients directly, which is much cheaper than a scipy call for a scalar.
"""

from __future__ import annotations

import bisect
import io
import math
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline


class TrajectoryError(ValueError):
    pass


class SplineTrajectory:
    def __init__(self, points: Sequence[Sequence[float]]):
        pts = np.asarray(points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise TrajectoryError("expected a sequence of (x, y, z) points")
        if len(pts) < 2:
            raise TrajectoryError("a trajectory needs at least two points")
        chords = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        if np.any(chords <= 1e-12):
            i = int(np.argmin(chords))
            raise TrajectoryError(f"points {i} and {i + 1} coincide")
        self.points = pts
        self.knots = np.concatenate(([0.0], np.cumsum(chords)))
        self.total_length = float(self.knots[-1])
        self._spline = CubicSpline(self.knots, pts, bc_type="natural", axis=0)
        # coefficients[k, i, d]: power k (cubic first) of interval i, dimension d
        self.coefficients = self._spline.c
        self._breaks = self.knots.tolist()
        self._c = [[self.coefficients[:, i, d].tolist() for d in range(3)] for i in range(len(pts) - 1)]

    def __len__(self):
        return len(self.points)

    def _check(self, s: float) -> float:
        if not (-1e-9 <= s <= self.total_length + 1e-9):
            raise TrajectoryError(f"s={s} outside [0, {self.total_length}]")
        return min(max(s, 0.0), self.total_length)

    def _piece(self, s: float) -> tuple[int, float]:
        i = bisect.bisect_right(self._breaks, s) - 1
        i = min(max(i, 0), len(self._c) - 1)
        return i, s - self._breaks[i]

    def _derivs(self, s: float):
        """Position, first and second derivative at ``s`` as three 3-lists."""
        i, t = self._piece(s)
        pos, d1, d2 = [], [], []
        for a, b, c, d in self._c[i]:
            pos.append(((a * t + b) * t + c) * t + d)
            d1.append((3.0 * a * t + 2.0 * b) * t + c)
            d2.append(6.0 * a * t + 2.0 * b)
        return pos, d1, d2

    def eval(self, s: float) -> tuple[float, float, float]:
        s = self._check(s)
        i, t = self._piece(s)
        return tuple(((a * t + b) * t + c) * t + d for a, b, c, d in self._c[i])

    def derivative(self, s: float, nu: int = 1) -> np.ndarray:
        s = self._check(s)
        return np.asarray(self._spline(s, nu), dtype=float)

    def eval_tangent(self, s: float) -> tuple[float, float, float]:
        s = self._check(s)
        _, d1, _ = self._derivs(s)
        n = math.sqrt(d1[0] ** 2 + d1[1] ** 2 + d1[2] ** 2)
        if n < 1e-12:
            raise TrajectoryError(f"zero derivative at s={s}")
        return (d1[0] / n, d1[1] / n, d1[2] / n)

    def sample(self, s_values) -> np.ndarray:
        s = np.clip(np.asarray(s_values, dtype=float), 0.0, self.total_length)
        return self._spline(s)

    def project(self, p, s_hint: float, window: float = 25.0, tol: float = 1e-7) -> float:
        """Arc parameter of the point nearest ``p`` within ``s_hint +- window``.

        A coarse scan brackets every local minimum of the distance, Newton
        iterations on ``(c(s) - p) . c'(s) = 0`` refine each one, and the
        closest result wins (ties go to the one nearest ``s_hint``).
        """
        L = self.total_length
        s_hint = min(max(s_hint, 0.0), L)
        lo, hi = max(0.0, s_hint - window), min(L, s_hint + window)
        n = max(3, int(math.ceil((hi - lo) / 0.5)) + 1)
        grid = np.linspace(lo, hi, n)
        d2 = ((self._spline(grid) - np.asarray(p, dtype=float)[:3]) ** 2).sum(axis=1)
        step = grid[1] - grid[0]
        left = np.concatenate(([np.inf], d2[:-1]))
        right = np.concatenate((d2[1:], [np.inf]))
        minima = np.flatnonzero((d2 <= left) & (d2 <= right))
        best_s, best_d = s_hint, math.inf
        for k in minima:
            s = self._refine(p, float(grid[k]), max(lo, grid[k] - step), min(hi, grid[k] + step), tol)
            d = _dist2(self.eval(s), p)
            if d < best_d - 1e-18 or (abs(d - best_d) <= 1e-18 and abs(s - s_hint) < abs(best_s - s_hint)):
                best_s, best_d = s, d
        return min(max(best_s, 0.0), L)

    def _refine(self, p, s: float, a: float, b: float, tol: float) -> float:
        px, py, pz = p[0], p[1], p[2]
        for _ in range(30):
            pos, d1, dd = self._derivs(s)
            ex, ey, ez = pos[0] - px, pos[1] - py, pos[2] - pz
            f = ex * d1[0] + ey * d1[1] + ez * d1[2]
            fp = d1[0] ** 2 + d1[1] ** 2 + d1[2] ** 2 + ex * dd[0] + ey * dd[1] + ez * dd[2]
            if f > 0:
                b = min(b, s)
            else:
                a = max(a, s)
            s_new = s - f / fp if fp > 0 else 0.5 * (a + b)
            if not (a <= s_new <= b):
                s_new = 0.5 * (a + b)
            if abs(s_new - s) < tol:
                s = s_new
                break
            s = s_new
        # the bracket ends may beat an interior stationary point
        return min((a, s, b), key=lambda v: _dist2(self.eval(v), p))

    def to_csv(self, ds: float = 1.0) -> str:
        if not ds > 0:
            raise ValueError("ds must be > 0")
        n = int(math.floor(self.total_length / ds))
        s_values = [k * ds for k in range(n + 1)]
        if self.total_length - s_values[-1] > 1e-9:
            s_values.append(self.total_length)
        buf = io.StringIO()
        buf.write("s,x,y,z\n")
        for s, (x, y, z) in zip(s_values, self.sample(s_values)):
            buf.write(f"{s!r},{float(x)!r},{float(y)!r},{float(z)!r}\n")
        return buf.getvalue()


def _dist2(a, b) -> float:
    return (a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2 + (a[2] - b[2]) ** 2


def fit_spline(waypoints: Sequence[Sequence[float]]) -> SplineTrajectory:
    """Natural cubic spline through ``waypoints`` (x, y, z), chord-length parameterised."""
    return SplineTrajectory(waypoints)
