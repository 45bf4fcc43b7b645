"""Parameter-adaptation laws.

Each law is chosen so that the coefficient of the corresponding estimate
error in the Lyapunov-rate expansion cancels exactly; the estimates are not
asked to converge to the true parameters, only to neutralize their own
cross terms.  No projection or clamping is applied: the controller guards
abort instead when an inverted estimate approaches zero.
"""

from __future__ import annotations

import math

from .controller import BackstepErrors, EstimateState, Gains


def adaptation_derivatives(err: BackstepErrors, x3, u2: float,
                           est: EstimateState, k: Gains):
    """Rates of the four estimates at the current state.

    Returns (theta1_hat', vartheta1_hat', varphi1_hat', theta2_hat'):

        theta1_hat'   = gamma1 * g2.e2
        vartheta1_hat' = gamma2 * kappa12 * g2.e3
        varphi1_hat'  = gamma3 * (k3*K12 + k1*k2 + 2 + gamma1*g2.g2) * g2.e4
        theta2_hat'   = gamma4 * theta1_hat * u2 * (d g2/dtheta).e4

    With k1 == k2 the vartheta law is identically zero and that estimate
    stays at its initial value.
    """
    sth = math.sin(x3.theta)
    cth = math.cos(x3.theta)
    F = x3.F
    g2x = -sth * F
    g2y = cth * F

    th1_rate = k.gamma1 * (g2x * err.e2[0] + g2y * err.e2[1])
    vth1_rate = k.gamma2 * k.kappa12 * (g2x * err.e3[0] + g2y * err.e3[1])
    scale = k.k3 * k.K12 + k.k1 * k.k2 + 2.0 + k.gamma1 * (g2x * g2x + g2y * g2y)
    vphi1_rate = k.gamma3 * scale * (g2x * err.e4[0] + g2y * err.e4[1])
    # [0, u2] @ G2^T @ e4 selects the moment channel through d g2/dtheta
    th2_rate = k.gamma4 * est.theta1_hat * u2 * (
        -F * cth * err.e4[0] - F * sth * err.e4[1]
    )
    return (th1_rate, vth1_rate, vphi1_rate, th2_rate)
