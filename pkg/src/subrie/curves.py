"""The time-stamped polyline shared by every module."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["Curve", "polyline_length", "concat_curves"]


@dataclass(frozen=True, eq=False)
class Curve:
    """Samples ``points[k]`` at strictly increasing ``times[k]``.

    The arrays are stored read-only.  ``closed`` marks loops whose first and
    last samples coincide.
    """

    times: np.ndarray
    points: np.ndarray
    closed: bool = False

    def __post_init__(self):
        t = np.array(self.times, dtype=float)
        p = np.array(self.points, dtype=float)
        if p.ndim == 1:
            p = p[:, None]
        if t.ndim != 1 or p.shape[0] != t.shape[0]:
            raise ValueError("times and points must have matching length")
        if t.shape[0] < 1:
            raise ValueError("a curve needs at least one sample")
        if not np.all(np.diff(t) > 0):
            raise ValueError("times must be strictly increasing")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(p))):
            raise ValueError("non-finite sample")
        if self.closed and np.max(np.abs(p[0] - p[-1])) > 1e-12:
            raise ValueError("closed curve must end where it starts")
        t.flags.writeable = False
        p.flags.writeable = False
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "points", p)

    @property
    def dim(self):
        return self.points.shape[1]

    @property
    def start(self):
        return self.points[0].copy()

    @property
    def end(self):
        return self.points[-1].copy()

    @property
    def duration(self):
        return float(self.times[-1] - self.times[0])

    def __len__(self):
        return self.times.shape[0]

    def same_as(self, other: "Curve") -> bool:
        """Bitwise sample equality."""
        return (np.array_equal(self.times, other.times)
                and np.array_equal(self.points, other.points))

    def at(self, t):
        """Piecewise-linear interpolation at time(s) ``t``."""
        t = np.asarray(t, dtype=float)
        return np.stack([np.interp(t, self.times, self.points[:, k])
                         for k in range(self.dim)], axis=-1)

    def reversed(self) -> "Curve":
        t = self.times[-1] + self.times[0] - self.times[::-1]
        return Curve(t, self.points[::-1], self.closed)

    def close(self) -> "Curve":
        """Join the last sample back to the first with a straight chord."""
        if np.max(np.abs(self.points[0] - self.points[-1])) <= 1e-12:
            pts = self.points.copy()
            pts[-1] = pts[0]
            return Curve(self.times, pts, True)
        gap = float(np.linalg.norm(self.points[0] - self.points[-1]))
        return Curve(np.append(self.times, self.times[-1] + gap),
                     np.vstack([self.points, self.points[:1]]), True)

    def with_points(self, points) -> "Curve":
        return Curve(self.times, points, False)

    def spacing(self):
        return float(np.max(np.diff(self.times)))


def polyline_length(c: Curve) -> float:
    return float(np.sum(np.linalg.norm(np.diff(c.points, axis=0), axis=1)))


def concat_curves(curves) -> Curve:
    """Join curves end to start, dropping the duplicated joint sample."""
    times = [curves[0].times]
    pts = [curves[0].points]
    t_end = curves[0].times[-1]
    for c in curves[1:]:
        times.append(c.times[1:] - c.times[0] + t_end)
        pts.append(c.points[1:])
        t_end = times[-1][-1] if len(c) > 1 else t_end
    return Curve(np.concatenate(times), np.vstack(pts))
