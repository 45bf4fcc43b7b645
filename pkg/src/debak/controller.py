"""Backstepping error system, control law and singularity guards.

The controller runs the four-stage error chain of the thrust-extended
vehicle.  The virtual-control targets for the upper stages are defined
through the *unknown* inverse mass, so they cannot be evaluated as written;
the error vectors below are therefore computed in an estimate-substituted
form in which the unknown parameter cancels and only the online estimates
remain.  Tests pin this form against the definitional one.

Two evaluation modes exist:

* literal (default): the stage formulas use the absolute position and
  velocity, and the reference enters only through the tracking error e1.
  Regulation to the origin converges exactly; a moving reference is
  followed with a bounded lag.
* feedforward: every stage works in error coordinates (position/velocity
  relative to the reference, gravity term shifted by the reference
  acceleration) and the reference jerk and snap appear as correction
  terms, consistently using the gain sum K12 where the error-coordinate
  algebra requires it.  On-reference initialization with exact estimates
  then yields exact tracking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .trajectory import TrajectorySample

#: Guard threshold for the inverted input map: far below operating thrust
#: (~10 N) yet far above round-off.
EPS_SING = 1e-6


class SingularInputMap(Exception):
    """The inverted input map lost rank: thrust or an estimate hit zero.

    Carries the name of the guard that tripped and, when raised from a
    simulation, the abort time.
    """

    def __init__(self, guard: str, value: float, t: float | None = None):
        self.guard = guard
        self.value = value
        self.t = t
        super().__init__(self._fmt())

    def _fmt(self) -> str:
        msg = f"singular input map: |{self.guard}| = {abs(self.value):.3e} too small"
        if self.t is not None:
            msg += f" at t = {self.t:.6f} s"
        return msg


@dataclass(frozen=True)
class Gains:
    """Backstepping gains k1..k4 and adaptation gains gamma1..gamma4."""

    k1: float = 5.0
    k2: float = 5.0
    k3: float = 4.0
    k4: float = 4.0
    gamma1: float = 1.0
    gamma2: float = 0.05
    gamma3: float = 0.05
    gamma4: float = 0.1

    def __post_init__(self):
        for name in ("k1", "k2", "k3", "k4", "gamma1", "gamma2", "gamma3", "gamma4"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")

    @property
    def kappa12(self) -> float:
        """Gain difference k1 - k2."""
        return self.k1 - self.k2

    @property
    def K12(self) -> float:
        """Gain sum k1 + k2."""
        return self.k1 + self.k2


@dataclass
class EstimateState:
    """Online parameter estimates.

    theta1_hat, vartheta1_hat and varphi1_hat each estimate the inverse
    mass (one per backstepping stage that needs it); theta2_hat estimates
    the inverse inertia.
    """

    theta1_hat: float = 0.5
    vartheta1_hat: float = 0.5
    varphi1_hat: float = 0.5
    theta2_hat: float = 40.0


@dataclass
class CompensatorState:
    """Dynamic-extension states owned by the controller: thrust and its rate."""

    F: float
    Fdot: float = 0.0


@dataclass
class BackstepErrors:
    """Stage errors e1..e4, each a 2-vector."""

    e1: np.ndarray
    e2: np.ndarray
    e3: np.ndarray
    e4: np.ndarray


@dataclass
class ControlOutput:
    """Control u = [F'', M] plus the per-step diagnostics."""

    u: np.ndarray
    errors: BackstepErrors
    xi2: np.ndarray  # estimate-substituted stage-2 residual, e3 - k2*e2
    xi3: np.ndarray  # estimate-substituted stage-3 residual, e4 - k3*e3
    det: float  # determinant of the inverted input map


def compute_errors(s, c, est, ref: TrajectorySample, k: Gains, g: float,
                   feedforward: bool = False) -> BackstepErrors:
    """Evaluate the backstepping errors at the current state.

    e1 = x1 - x1d and e2 = x2 + k1*e1 track the reference; e3 and e4 are the
    estimate-substituted forms of the stage-3/4 errors (the unknown inverse
    mass cancels against the estimate terms):

        e3 = x1 + f2 + g2*theta1_hat + k1*x2 + k2*e2
        e4 = 2*x2 + k1*e1 + G2*x4*theta1_hat + gamma1*g2*(g2.e2)
             + kappa12*(f2 + g2*vartheta1_hat) + k1*k2*x2 + k3*e3

    In feedforward mode x1/x2 are replaced by the reference-relative errors,
    f2 gains -ref.acc, e4 gains -ref.jerk, and the vartheta term uses K12.
    """
    k1, k2, k3 = k.k1, k.k2, k.k3
    th1 = est.theta1_hat
    vth1 = est.vartheta1_hat

    sth = math.sin(s.theta)
    cth = math.cos(s.theta)
    F = c.F
    g2x = -sth * F
    g2y = cth * F
    # G2 @ x4 with x4 = [Fdot, omega]
    G2x4x = -sth * c.Fdot - F * cth * s.omega
    G2x4y = cth * c.Fdot - F * sth * s.omega

    e1x = s.r1 - ref.pos[0]
    e1y = s.r2 - ref.pos[1]
    if feedforward:
        p1x = e1x
        p1y = e1y
        p2x = s.v1 - ref.vel[0]
        p2y = s.v2 - ref.vel[1]
        f2x = -ref.acc[0]
        f2y = -g - ref.acc[1]
        coef = k.K12
    else:
        p1x = s.r1
        p1y = s.r2
        p2x = s.v1
        p2y = s.v2
        f2x = 0.0
        f2y = -g
        coef = k.kappa12

    e2x = p2x + k1 * e1x
    e2y = p2y + k1 * e1y

    e3x = p1x + f2x + g2x * th1 + k1 * p2x + k2 * e2x
    e3y = p1y + f2y + g2y * th1 + k1 * p2y + k2 * e2y

    gTe2 = g2x * e2x + g2y * e2y
    e4x = (2.0 * p2x + k1 * e1x + G2x4x * th1 + k.gamma1 * g2x * gTe2
           + coef * (f2x + g2x * vth1) + k1 * k2 * p2x + k3 * e3x)
    e4y = (2.0 * p2y + k1 * e1y + G2x4y * th1 + k.gamma1 * g2y * gTe2
           + coef * (f2y + g2y * vth1) + k1 * k2 * p2y + k3 * e3y)
    if feedforward:
        e4x -= ref.jerk[0]
        e4y -= ref.jerk[1]

    return BackstepErrors(
        e1=np.array([e1x, e1y]),
        e2=np.array([e2x, e2y]),
        e3=np.array([e3x, e3y]),
        e4=np.array([e4x, e4y]),
    )


def control_law(s, c, est, ref: TrajectorySample, errors: BackstepErrors,
                k: Gains, g: float, feedforward: bool = False) -> ControlOutput:
    """Solve the final backstepping stage for u = [F'', M].

    u = -(theta1_hat * G2 * diag(1, theta2_hat))^-1 * B, where B collects the
    stage-4 error feedback, the estimate rates of the first two adaptation
    laws evaluated at this same state, and the drift terms of the chain.
    Scalar + matrix sums such as (c + gamma1*g2*g2^T) act as c*I + outer
    product.

    Raises SingularInputMap when |F|, |theta1_hat| or |theta2_hat| falls
    below EPS_SING, or the resulting determinant below EPS_SING**3.
    """
    th1 = est.theta1_hat
    vth1 = est.vartheta1_hat
    vphi1 = est.varphi1_hat
    th2 = est.theta2_hat
    F = c.F

    if abs(F) < EPS_SING:
        raise SingularInputMap("F", F)
    if abs(th1) < EPS_SING:
        raise SingularInputMap("theta1_hat", th1)
    if abs(th2) < EPS_SING:
        raise SingularInputMap("theta2_hat", th2)

    k1, k2, k3, k4 = k.k1, k.k2, k.k3, k.k4
    K12 = k.K12
    gamma1 = k.gamma1

    sth = math.sin(s.theta)
    cth = math.cos(s.theta)
    g2x = -sth * F
    g2y = cth * F
    # G2 columns: d g2/dF, d g2/dtheta
    G11, G12 = -sth, -F * cth
    G21, G22 = cth, -F * sth
    # entrywise d/dt of G2
    Gd11 = -cth * s.omega
    Gd12 = -c.Fdot * cth + F * sth * s.omega
    Gd21 = -sth * s.omega
    Gd22 = -c.Fdot * sth - F * cth * s.omega
    G2x4x = G11 * c.Fdot + G12 * s.omega
    G2x4y = G21 * c.Fdot + G22 * s.omega

    e1 = errors.e1
    e2 = errors.e2
    e3 = errors.e3
    e4 = errors.e4

    if feedforward:
        p2x = s.v1 - ref.vel[0]
        p2y = s.v2 - ref.vel[1]
        f2x = -ref.acc[0]
        f2y = -g - ref.acc[1]
    else:
        p2x = s.v1
        p2y = s.v2
        f2x = 0.0
        f2y = -g

    # the first two adaptation laws, evaluated at this instant (same
    # formulas as adaptation.adaptation_derivatives; the control residual
    # test re-multiplies u against an independently assembled B)
    th1_rate = gamma1 * (g2x * e2[0] + g2y * e2[1])
    vth1_rate = k.gamma2 * k.kappa12 * (g2x * e3[0] + g2y * e3[1])

    # (c1*I + gamma1*g2 g2^T)(f2 + g2*varphi1_hat)
    c1 = k3 * K12 + k1 * k2 + 2.0
    w1x = f2x + g2x * vphi1
    w1y = f2y + g2y * vphi1
    gTw1 = g2x * w1x + g2y * w1y
    Bx = k4 * e4[0] + e3[0] + c1 * w1x + gamma1 * g2x * gTw1
    By = k4 * e4[1] + e3[1] + c1 * w1y + gamma1 * g2y * gTw1

    # (c2*I + gamma1*g2 g2^T) x2
    c2 = k3 * (k1 * k2 + 1.0) + k1
    gTx2 = g2x * p2x + g2y * p2y
    Bx += c2 * p2x + gamma1 * g2x * gTx2
    By += c2 * p2y + gamma1 * g2y * gTx2

    # (G2 x4 - k3 g2) * theta1_hat'
    Bx += (G2x4x - k3 * g2x) * th1_rate
    By += (G2x4y - k3 * g2y) * th1_rate

    # (dG2/dt + k3 G2) x4 * theta1_hat
    Bx += ((Gd11 + k3 * G11) * c.Fdot + (Gd12 + k3 * G12) * s.omega) * th1
    By += ((Gd21 + k3 * G21) * c.Fdot + (Gd22 + k3 * G22) * s.omega) * th1

    # K12 * (G2 x4 * vartheta1_hat + g2 * vartheta1_hat')
    Bx += K12 * (G2x4x * vth1 + g2x * vth1_rate)
    By += K12 * (G2x4y * vth1 + g2y * vth1_rate)

    # 2*gamma1 * (G2 x4) * g2^T (x2 + k1 e1)
    gTz = g2x * (p2x + k1 * e1[0]) + g2y * (p2y + k1 * e1[1])
    Bx += 2.0 * gamma1 * G2x4x * gTz
    By += 2.0 * gamma1 * G2x4y * gTz

    if feedforward:
        # d/dt of the reference-shifted gravity term and of the -jerk term
        # in e4: the chain differentiation contributes -(K12 + k3)*jerk and
        # -snap to the bracket.
        Bx -= (K12 + k3) * ref.jerk[0] + ref.snap[0]
        By -= (K12 + k3) * ref.jerk[1] + ref.snap[1]

    # A = theta1_hat * G2 * diag(1, theta2_hat)
    A11 = th1 * G11
    A12 = th1 * G12 * th2
    A21 = th1 * G21
    A22 = th1 * G22 * th2
    det = A11 * A22 - A12 * A21  # = th1^2 * th2 * F
    if abs(det) < EPS_SING**3:
        raise SingularInputMap("det", det)

    u1 = -(A22 * Bx - A12 * By) / det
    u2 = -(-A21 * Bx + A11 * By) / det

    return ControlOutput(
        u=np.array([u1, u2]),
        errors=errors,
        xi2=errors.e3 - k2 * errors.e2,
        xi3=errors.e4 - k3 * errors.e3,
        det=det,
    )


def controller_derivatives(c: CompensatorState, u1: float):
    """Time derivative of the compensator states: (F', F'') = (Fdot, u1)."""
    return (c.Fdot, u1)
