"""Reference trajectory generators.

Three scenarios: a hover set-point, a tilted ellipse traced at constant
angular rate, and a piecewise-linear sweep through the cell centers of a
4x4 grid in second-order Hilbert order with rest-to-rest trapezoidal speed
profiles on every segment.  Samples carry position derivatives up to the
fourth order (zero where the profile does not define them).
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class TrajectorySample:
    """Reference position and its time derivatives at one instant."""

    pos: np.ndarray
    vel: np.ndarray
    acc: np.ndarray
    jerk: np.ndarray
    snap: np.ndarray


def _sample(pos, vel=(0.0, 0.0), acc=(0.0, 0.0), jerk=(0.0, 0.0), snap=(0.0, 0.0)):
    return TrajectorySample(
        pos=np.asarray(pos, dtype=float),
        vel=np.asarray(vel, dtype=float),
        acc=np.asarray(acc, dtype=float),
        jerk=np.asarray(jerk, dtype=float),
        snap=np.asarray(snap, dtype=float),
    )


def hover_sample(point) -> TrajectorySample:
    """Constant set-point: position only, all derivatives zero."""
    return _sample(point)


@dataclass(frozen=True)
class EllipseParams:
    """Tilted ellipse through the origin.

    phi: tilt [rad]; omega_t: angular rate [rad/s]; a, b: semi-axes [m].
    The curve starts at the origin and orbits the center
    (a cos(phi), a sin(phi)).
    """

    phi: float = math.pi / 4.0
    omega_t: float = 0.3
    a: float = 5.0
    b: float = 3.0

    def __post_init__(self):
        if not self.omega_t > 0.0:
            raise ValueError(f"omega_t must be > 0, got {self.omega_t}")


def ellipse_sample(t: float, p: EllipseParams) -> TrajectorySample:
    """Sample the ellipse at time t.

    Each position component is c0 + A cos(wt) + B sin(wt); differentiation
    multiplies by w and rotates the (A, B) phase, so all derivatives are
    closed-form.
    """
    cphi = math.cos(p.phi)
    sphi = math.sin(p.phi)
    ax = -p.a * cphi
    ay = -p.a * sphi
    bx = -p.b * sphi
    by = p.b * cphi
    w = p.omega_t
    cwt = math.cos(w * t)
    swt = math.sin(w * t)
    return _sample(
        pos=(p.a * cphi + ax * cwt + bx * swt, p.a * sphi + ay * cwt + by * swt),
        vel=(w * (-ax * swt + bx * cwt), w * (-ay * swt + by * cwt)),
        acc=(w * w * (-ax * cwt - bx * swt), w * w * (-ay * cwt - by * swt)),
        jerk=(w**3 * (ax * swt - bx * cwt), w**3 * (ay * swt - by * cwt)),
        snap=(w**4 * (ax * cwt + bx * swt), w**4 * (ay * cwt + by * swt)),
    )


def hilbert_cells(order: int):
    """Grid cells of the Hilbert curve of the given order, in visit order.

    Standard index-to-coordinate unfolding: at each scale the quadrant is
    read off two bits of the index and the sub-cell is reflected/transposed
    into place.
    """
    n = 2**order
    cells = []
    for d in range(n * n):
        x = y = 0
        t = d
        s = 1
        while s < n:
            rx = 1 & (t // 2)
            ry = 1 & (t ^ rx)
            if ry == 0:
                if rx == 1:
                    x = s - 1 - x
                    y = s - 1 - y
                x, y = y, x
            x += s * rx
            y += s * ry
            t //= 4
            s *= 2
        cells.append((x, y))
    return cells


@dataclass(frozen=True)
class SegmentProfile:
    """Rest-to-rest speed profile along one straight segment."""

    t_start: float
    t_accel: float
    t_cruise: float
    t_decel: float
    length: float
    accel: float
    v_peak: float
    origin: tuple
    direction: tuple

    @property
    def duration(self) -> float:
        return self.t_accel + self.t_cruise + self.t_decel


@dataclass(frozen=True)
class HilbertPlan:
    """Waypoints plus per-segment trapezoidal timing."""

    waypoints: np.ndarray
    segments: tuple
    v_max: float
    a_max: float

    @property
    def duration(self) -> float:
        last = self.segments[-1]
        return last.t_start + last.duration

    # segment start times, for bisection in hilbert_sample
    _starts: tuple = field(init=False, repr=False, compare=False, default=())

    def __post_init__(self):
        object.__setattr__(self, "_starts", tuple(s.t_start for s in self.segments))


def _trapezoid(d: float, v_max: float, a_max: float):
    """Timing (t_accel, t_cruise, v_peak) for a rest-to-rest move of length d."""
    v_peak = math.sqrt(d * a_max)
    if v_peak <= v_max:
        return v_peak / a_max, 0.0, v_peak  # triangular
    t_accel = v_max / a_max
    t_cruise = (d - v_max * v_max / a_max) / v_max
    return t_accel, t_cruise, v_max


def hilbert_build(order: int = 2, side: float = 4.0, v_max: float = 1.0,
                  a_max: float = 1.0) -> HilbertPlan:
    """Plan a sweep through the Hilbert-ordered cell centers of a side x side square."""
    if order != 2:
        raise ValueError(f"only order 2 is supported, got {order}")
    if not (side > 0.0 and v_max > 0.0 and a_max > 0.0):
        raise ValueError("side, v_max and a_max must be > 0")
    n = 2**order
    cell = side / n
    waypoints = np.array(
        [((i + 0.5) * cell, (j + 0.5) * cell) for i, j in hilbert_cells(order)]
    )
    segments = []
    t0 = 0.0
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        delta = b - a
        d = float(math.hypot(delta[0], delta[1]))
        t_accel, t_cruise, v_peak = _trapezoid(d, v_max, a_max)
        segments.append(
            SegmentProfile(
                t_start=t0,
                t_accel=t_accel,
                t_cruise=t_cruise,
                t_decel=t_accel,
                length=d,
                accel=a_max,
                v_peak=v_peak,
                origin=(float(a[0]), float(a[1])),
                direction=(float(delta[0] / d), float(delta[1] / d)),
            )
        )
        t0 += segments[-1].duration
    return HilbertPlan(waypoints=waypoints, segments=tuple(segments),
                       v_max=v_max, a_max=a_max)


def hilbert_sample(plan: HilbertPlan, t: float) -> TrajectorySample:
    """Sample the planned sweep at time t >= 0; holds the last waypoint after the end."""
    if t >= plan.duration:
        return _sample(plan.waypoints[-1])
    i = bisect.bisect_right(plan._starts, t) - 1
    seg = plan.segments[i]
    tau = t - seg.t_start
    a = seg.accel
    if tau < seg.t_accel:
        dist = 0.5 * a * tau * tau
        speed = a * tau
        acc = a
    elif tau < seg.t_accel + seg.t_cruise:
        dist = 0.5 * a * seg.t_accel**2 + seg.v_peak * (tau - seg.t_accel)
        speed = seg.v_peak
        acc = 0.0
    else:
        rem = seg.duration - tau
        dist = seg.length - 0.5 * a * rem * rem
        speed = a * rem
        acc = -a
    ux, uy = seg.direction
    ox, oy = seg.origin
    return _sample(
        pos=(ox + dist * ux, oy + dist * uy),
        vel=(speed * ux, speed * uy),
        acc=(acc * ux, acc * uy),
    )
