"""Planar bicopter plant: physical parameters, rigid-body dynamics, rotor mixing.

The vehicle moves in a vertical plane with two thrusters mounted at the ends
of an arm of length l.  The individual rotor forces f1, f2 combine into a
total thrust F = f1 + f2 along the body vertical axis and a moment
M = (-f1 + f2) * l about the center of mass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class PhysicalParams:
    """Physical constants of the vehicle.

    m: mass [kg], J: rotational inertia [kg m^2],
    g: gravitational acceleration [m/s^2], l: arm length [m].
    """

    m: float = 1.0
    J: float = 0.2
    g: float = 9.81
    l: float = 0.5

    def __post_init__(self):
        for name in ("m", "J", "g", "l"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")


@dataclass
class PlantState:
    """Position, velocity, roll angle and roll rate.

    theta is deliberately not wrapped: the controller differentiates trig
    terms analytically, and wrapping would put jumps into the logs.
    """

    r1: float = 0.0
    r2: float = 0.0
    v1: float = 0.0
    v2: float = 0.0
    theta: float = 0.0
    omega: float = 0.0


@dataclass(frozen=True)
class Wrench:
    """Total thrust F [N] and moment M [N m] acting on the body."""

    F: float
    M: float


def plant_derivative(s: PlantState, w: Wrench, p: PhysicalParams):
    """Time derivative of the plant state under wrench w.

    Returns (r1', r2', v1', v2', theta', omega'):
        m r1'' = -F sin(theta)
        m r2'' =  F cos(theta) - m g
        J theta'' = M
    """
    return (
        s.v1,
        s.v2,
        -w.F * math.sin(s.theta) / p.m,
        w.F * math.cos(s.theta) / p.m - p.g,
        s.omega,
        w.M / p.J,
    )


def mix_forces(w: Wrench, l: float):
    """Split a wrench into the two rotor forces (f1, f2)."""
    if not l > 0.0:
        raise ValueError(f"arm length must be > 0, got {l}")
    f1 = (w.F - w.M / l) / 2.0
    f2 = (w.F + w.M / l) / 2.0
    return f1, f2


def unmix_forces(f1: float, f2: float, l: float) -> Wrench:
    """Combine rotor forces into the equivalent wrench."""
    if not l > 0.0:
        raise ValueError(f"arm length must be > 0, got {l}")
    return Wrench(F=f1 + f2, M=(-f1 + f2) * l)
