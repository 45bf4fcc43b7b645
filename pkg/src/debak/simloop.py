"""Fixed-step closed-loop simulation of plant, compensator and estimates.

The 12 continuous states (6 plant, 2 compensator, 4 estimates) advance as
one monolithic ODE under classical RK4; the control is re-evaluated at
every integration stage.  Each logged record carries the full state, the
control and rotor forces, the stage-error norms and the composite Lyapunov
value, so the run invariants (descent, control residual, derivative
consistency) can be re-checked from the log alone.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np

from .adaptation import adaptation_derivatives
from .controller import (
    BackstepErrors,
    CompensatorState,
    EstimateState,
    Gains,
    SingularInputMap,
    compute_errors,
    control_law,
)
from .extended import ExtState3, ThetaTrue
from .model import PhysicalParams, PlantState, Wrench, mix_forces
from .trajectory import (
    EllipseParams,
    ellipse_sample,
    hilbert_build,
    hilbert_sample,
    hover_sample,
)

SCENARIOS = ("hover", "ellipse", "hilbert")


class NumericalDivergence(Exception):
    """A state left the floating-point range (NaN or infinity)."""

    def __init__(self, t: float):
        self.t = t
        super().__init__(f"non-finite state at t = {t:.6f} s")


@dataclass
class SimConfig:
    """Everything a closed-loop run depends on."""

    params: PhysicalParams
    gains: Gains
    plant0: PlantState
    comp0: CompensatorState
    est0: EstimateState
    scenario: str
    duration: float
    dt: float = 1e-3
    feedforward: bool = False
    decimation: int = 10
    hover_target: tuple = (0.0, 0.0)
    ellipse: EllipseParams = EllipseParams()
    hilbert_side: float = 4.0
    hilbert_v_max: float = 1.0
    hilbert_a_max: float = 1.0

    def __post_init__(self):
        if not self.dt > 0.0:
            raise ValueError(f"dt must be > 0, got {self.dt}")
        if not self.duration >= self.dt:
            raise ValueError(f"duration must be >= dt, got {self.duration}")
        if self.decimation < 1:
            raise ValueError(f"decimation must be >= 1, got {self.decimation}")
        if self.scenario not in SCENARIOS:
            raise ValueError(f"unknown scenario {self.scenario!r}")


@dataclass
class LogRecord:
    """One telemetry row; field order is the CSV column order."""

    t: float
    r1: float
    r2: float
    theta: float
    v1: float
    v2: float
    omega: float
    F: float
    Fdot: float
    u1: float
    u2: float
    f1: float
    f2: float
    e1: float
    e2: float
    e3: float
    e4: float
    theta1_hat: float
    vartheta1_hat: float
    varphi1_hat: float
    theta2_hat: float
    V4: float


LOG_FIELDS = tuple(f.name for f in fields(LogRecord))


def rk4_step(deriv, state: np.ndarray, t: float, h: float) -> np.ndarray:
    """One classical 4-stage Runge-Kutta update of `state` at time t."""
    k1 = deriv(t, state)
    k2 = deriv(t + 0.5 * h, state + (0.5 * h) * k1)
    k3 = deriv(t + 0.5 * h, state + (0.5 * h) * k2)
    k4 = deriv(t + h, state + h * k3)
    return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def lyapunov_eval(errors: BackstepErrors, est: EstimateState, truth: ThetaTrue,
                  k: Gains) -> float:
    """Composite Lyapunov value: quadratic stage errors plus weighted estimate errors."""
    e = errors
    quad = 0.5 * (
        float(e.e1 @ e.e1) + float(e.e2 @ e.e2) + float(e.e3 @ e.e3) + float(e.e4 @ e.e4)
    )
    t1 = est.theta1_hat - truth.inv_m
    t2 = est.vartheta1_hat - truth.inv_m
    t3 = est.varphi1_hat - truth.inv_m
    t4 = est.theta2_hat - truth.inv_J
    return quad + 0.5 * (
        t1 * t1 / k.gamma1 + t2 * t2 / k.gamma2 + t3 * t3 / k.gamma3 + t4 * t4 / k.gamma4
    )


def make_reference(cfg: SimConfig):
    """Reference sampler t -> TrajectorySample for the configured scenario."""
    if cfg.scenario == "hover":
        target = hover_sample(cfg.hover_target)
        return lambda t: target
    if cfg.scenario == "ellipse":
        p = cfg.ellipse
        return lambda t: ellipse_sample(t, p)
    plan = hilbert_build(side=cfg.hilbert_side, v_max=cfg.hilbert_v_max,
                         a_max=cfg.hilbert_a_max)
    return lambda t: hilbert_sample(plan, t)


def _unpack(y):
    s = PlantState(r1=y[0], r2=y[1], v1=y[2], v2=y[3], theta=y[4], omega=y[5])
    c = CompensatorState(F=y[6], Fdot=y[7])
    est = EstimateState(theta1_hat=y[8], vartheta1_hat=y[9],
                        varphi1_hat=y[10], theta2_hat=y[11])
    return s, c, est


def run_closed_loop(cfg: SimConfig):
    """Simulate the closed loop and return the list of LogRecords.

    Raises SingularInputMap (with the abort time) when a controller guard
    trips and NumericalDivergence when the state leaves the float range.
    """
    ref = make_reference(cfg)
    p = cfg.params
    k = cfg.gains
    truth = ThetaTrue(inv_m=1.0 / p.m, inv_J=1.0 / p.J)
    ff = cfg.feedforward
    g = p.g

    def deriv(t, y):
        s, c, est = _unpack(y)
        sample = ref(t)
        errors = compute_errors(s, c, est, sample, k, g, feedforward=ff)
        out = control_law(s, c, est, sample, errors, k, g, feedforward=ff)
        u1 = float(out.u[0])
        u2 = float(out.u[1])
        x3 = ExtState3(F=c.F, theta=s.theta)
        rates = adaptation_derivatives(errors, x3, u2, est, k)
        sth = math.sin(s.theta)
        cth = math.cos(s.theta)
        return np.array(
            [
                s.v1,
                s.v2,
                -c.F * sth * truth.inv_m,
                c.F * cth * truth.inv_m - g,
                s.omega,
                u2 * truth.inv_J,
                c.Fdot,
                u1,
                rates[0],
                rates[1],
                rates[2],
                rates[3],
            ]
        )

    def record(t, y) -> LogRecord:
        s, c, est = _unpack(y)
        sample = ref(t)
        errors = compute_errors(s, c, est, sample, k, g, feedforward=ff)
        out = control_law(s, c, est, sample, errors, k, g, feedforward=ff)
        f1, f2 = mix_forces(Wrench(F=c.F, M=float(out.u[1])), p.l)
        return LogRecord(
            t=t,
            r1=s.r1, r2=s.r2, theta=s.theta,
            v1=s.v1, v2=s.v2, omega=s.omega,
            F=c.F, Fdot=c.Fdot,
            u1=float(out.u[0]), u2=float(out.u[1]),
            f1=f1, f2=f2,
            e1=float(np.linalg.norm(errors.e1)),
            e2=float(np.linalg.norm(errors.e2)),
            e3=float(np.linalg.norm(errors.e3)),
            e4=float(np.linalg.norm(errors.e4)),
            theta1_hat=est.theta1_hat,
            vartheta1_hat=est.vartheta1_hat,
            varphi1_hat=est.varphi1_hat,
            theta2_hat=est.theta2_hat,
            V4=lyapunov_eval(errors, est, truth, k),
        )

    y = np.array(
        [
            cfg.plant0.r1, cfg.plant0.r2, cfg.plant0.v1, cfg.plant0.v2,
            cfg.plant0.theta, cfg.plant0.omega,
            cfg.comp0.F, cfg.comp0.Fdot,
            cfg.est0.theta1_hat, cfg.est0.vartheta1_hat,
            cfg.est0.varphi1_hat, cfg.est0.theta2_hat,
        ]
    )
    n_steps = round(cfg.duration / cfg.dt)
    records = []
    t = 0.0
    try:
        for step in range(n_steps + 1):
            t = step * cfg.dt
            if step % cfg.decimation == 0 or step == n_steps:
                records.append(record(t, y))
            if step == n_steps:
                break
            y = rk4_step(deriv, y, t, cfg.dt)
            if not np.isfinite(y).all():
                raise NumericalDivergence(t + cfg.dt)
    except SingularInputMap as exc:
        exc.t = t
        raise
    return records
