"""Thrust-extended state space of the bicopter.

Treating the total thrust F and its rate as controller states turns the
two-input rigid body into a chain

    x1' = x2
    x2' = f2 + g2(x3) * Theta1
    x3' = x4
    x4' = diag(1, Theta2) * u

with x1 = position, x2 = velocity, x3 = [F, theta], x4 = [F', theta'],
u = [F'', M], Theta1 = 1/m and Theta2 = 1/J.  The input map of this chain
is invertible whenever F != 0, which is what the raw force/moment input
map of the planar vehicle never achieves (see pre_extension_input_map).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ExtState3:
    """Thrust magnitude F [N] and roll angle theta [rad] (the x3 block)."""

    F: float
    theta: float


@dataclass(frozen=True)
class ExtState4:
    """Thrust rate F' [N/s] and roll rate theta' [rad/s] (the x4 block)."""

    Fdot: float
    omega: float


@dataclass(frozen=True)
class ThetaTrue:
    """True inverse parameters: inv_m = 1/m, inv_J = 1/J."""

    inv_m: float
    inv_J: float

    def __post_init__(self):
        if not (self.inv_m > 0.0 and self.inv_J > 0.0):
            raise ValueError("inverse parameters must be > 0")


def f2_const(g: float) -> np.ndarray:
    """Constant drift of the velocity block: [0, -g]."""
    return np.array([0.0, -g])


def g2_map(x3: ExtState3) -> np.ndarray:
    """Thrust direction field F * [-sin(theta), cos(theta)]; norm equals |F|."""
    return np.array([-math.sin(x3.theta) * x3.F, math.cos(x3.theta) * x3.F])


def g2_jacobian(x3: ExtState3) -> np.ndarray:
    """Jacobian of g2_map w.r.t. x3 = [F, theta].

    Column 1 = d g2 / dF = [-sin(theta), cos(theta)],
    column 2 = d g2 / dtheta = [-F cos(theta), -F sin(theta)].
    Ordered so that d/dt g2 = g2_jacobian @ x4 with x4 = [F', theta'];
    det = F, singular exactly at zero thrust.
    """
    s = math.sin(x3.theta)
    c = math.cos(x3.theta)
    return np.array([[-s, -x3.F * c], [c, -x3.F * s]])


def g2_jacobian_dot(x3: ExtState3, x4: ExtState4) -> np.ndarray:
    """Entrywise time derivative of g2_jacobian along x3' = x4."""
    s = math.sin(x3.theta)
    c = math.cos(x3.theta)
    F, Fd, om = x3.F, x4.Fdot, x4.omega
    return np.array(
        [
            [-c * om, -Fd * c + F * s * om],
            [-s * om, -Fd * s - F * c * om],
        ]
    )


def pre_extension_input_map(theta: float) -> np.ndarray:
    """Input map of the vehicle before the thrust extension.

    Maps [F, M] into the accelerations of (r1, r2, theta); its rank is 2 for
    every theta, so no static feedback can invert it.  That structural defect
    is the reason the extended chain above exists.  Not used at runtime.
    """
    return np.array(
        [
            [-math.sin(theta), 0.0],
            [math.cos(theta), 0.0],
            [0.0, 1.0],
        ]
    )
