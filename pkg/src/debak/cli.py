"""Scenario runner: config parsing, simulation dispatch, CSV telemetry.

Config files are line-oriented ``key = value`` with ``#`` comments; CLI
flags override file values, file values override the built-in defaults.
Telemetry is written as UTF-8 CSV with round-trip-exact decimal floats.

Exit codes: 0 success, 1 validation/IO failure, 2 config error,
3 singular input map, 4 numerical divergence.
"""

from __future__ import annotations

import argparse
import math
import os
import sys

import numpy as np

from .controller import CompensatorState, EstimateState, Gains, SingularInputMap
from .extended import ExtState3, g2_jacobian
from .model import PhysicalParams, PlantState
from .simloop import (
    LOG_FIELDS,
    LogRecord,
    NumericalDivergence,
    SimConfig,
    hilbert_build,
    make_reference,
    run_closed_loop,
)
from .trajectory import EllipseParams

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_SINGULAR = 3
EXIT_DIVERGED = 4

CSV_HEADER = ",".join(LOG_FIELDS)


class ConfigError(Exception):
    """Bad config file or option value."""


# key -> (type, default); None defaults are filled in per scenario
_FLOAT_KEYS = {
    "m": 1.0, "J": 0.2, "g": 9.81, "l": 0.5,
    "k1": 5.0, "k2": 5.0, "k3": 4.0, "k4": 4.0,
    "gamma1": 1.0, "gamma2": 0.05, "gamma3": 0.05, "gamma4": 0.1,
    "theta1_hat0": 0.5, "vartheta1_hat0": 0.5, "varphi1_hat0": 0.5,
    "theta2_hat0": 40.0,
    "dt": 1e-3, "duration": None,
    "r1_0": None, "r2_0": None, "v1_0": 0.0, "v2_0": 0.0,
    "theta_0": 0.0, "omega_0": 0.0,
    "F_0": None, "Fdot_0": 0.0,
    "hover_r1": 0.0, "hover_r2": 0.0,
    "ellipse_phi_deg": 45.0, "ellipse_omega": 0.3,
    "hilbert_side": 4.0, "hilbert_v_max": 1.0, "hilbert_a_max": 1.0,
    "hilbert_hold": 5.0,
}
_POSITIVE_KEYS = (
    "m", "J", "g", "l", "k1", "k2", "k3", "k4",
    "gamma1", "gamma2", "gamma3", "gamma4", "dt",
    "ellipse_omega", "hilbert_side", "hilbert_v_max", "hilbert_a_max",
)


def _parse_kv(text: str) -> dict:
    """Parse ``key = value`` lines into raw typed values."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key == "scenario":
            values[key] = val
        elif key == "feedforward":
            if val.lower() in ("true", "1", "yes"):
                values[key] = True
            elif val.lower() in ("false", "0", "no"):
                values[key] = False
            else:
                raise ConfigError(f"line {lineno}: feedforward must be boolean, got {val!r}")
        elif key == "decimation":
            try:
                values[key] = int(val)
            except ValueError:
                raise ConfigError(f"line {lineno}: decimation must be an integer, got {val!r}")
        elif key in _FLOAT_KEYS:
            try:
                values[key] = float(val)
            except ValueError:
                raise ConfigError(f"line {lineno}: {key} must be a number, got {val!r}")
        else:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
    return values


def build_config(values: dict) -> SimConfig:
    """Materialize a SimConfig from merged key/value settings."""
    for key in values:
        if key not in _FLOAT_KEYS and key not in ("scenario", "feedforward", "decimation"):
            raise ConfigError(f"unknown key {key!r}")

    scenario = values.get("scenario", "hover")
    if scenario not in ("hover", "ellipse", "hilbert"):
        raise ConfigError(f"scenario must be hover, ellipse or hilbert, got {scenario!r}")

    merged = dict(_FLOAT_KEYS)
    merged.update({k: v for k, v in values.items() if k in _FLOAT_KEYS})
    for key in _POSITIVE_KEYS:
        if not merged[key] > 0.0:
            raise ConfigError(f"{key} must be > 0, got {merged[key]}")
    if merged["hilbert_hold"] < 0.0:
        raise ConfigError(f"hilbert_hold must be >= 0, got {merged['hilbert_hold']}")
    decimation = values.get("decimation", 10)
    if decimation < 1:
        raise ConfigError(f"decimation must be >= 1, got {decimation}")

    ellipse = EllipseParams(phi=math.radians(merged["ellipse_phi_deg"]),
                            omega_t=merged["ellipse_omega"])

    # scenario-dependent defaults: run length and start point
    if merged["duration"] is None:
        if scenario == "hover":
            merged["duration"] = 15.0
        elif scenario == "ellipse":
            merged["duration"] = 40.0
        else:
            plan = hilbert_build(side=merged["hilbert_side"],
                                 v_max=merged["hilbert_v_max"],
                                 a_max=merged["hilbert_a_max"])
            merged["duration"] = plan.duration + merged["hilbert_hold"]
    if not merged["duration"] >= merged["dt"]:
        raise ConfigError(f"duration must be >= dt, got {merged['duration']}")

    if merged["r1_0"] is None or merged["r2_0"] is None:
        if scenario == "hover":
            start = (1.0, 1.0)
        elif scenario == "ellipse":
            start = (0.0, 0.0)
        else:
            start = (merged["hilbert_side"] / 8.0, merged["hilbert_side"] / 8.0)
        if merged["r1_0"] is None:
            merged["r1_0"] = start[0]
        if merged["r2_0"] is None:
            merged["r2_0"] = start[1]

    if merged["F_0"] is None:
        # the controller's own best hover-thrust guess
        th10 = merged["theta1_hat0"]
        merged["F_0"] = merged["g"] / th10 if th10 != 0.0 else 0.0

    try:
        params = PhysicalParams(m=merged["m"], J=merged["J"], g=merged["g"], l=merged["l"])
        gains = Gains(k1=merged["k1"], k2=merged["k2"], k3=merged["k3"], k4=merged["k4"],
                      gamma1=merged["gamma1"], gamma2=merged["gamma2"],
                      gamma3=merged["gamma3"], gamma4=merged["gamma4"])
        return SimConfig(
            params=params,
            gains=gains,
            plant0=PlantState(r1=merged["r1_0"], r2=merged["r2_0"],
                              v1=merged["v1_0"], v2=merged["v2_0"],
                              theta=merged["theta_0"], omega=merged["omega_0"]),
            comp0=CompensatorState(F=merged["F_0"], Fdot=merged["Fdot_0"]),
            est0=EstimateState(theta1_hat=merged["theta1_hat0"],
                               vartheta1_hat=merged["vartheta1_hat0"],
                               varphi1_hat=merged["varphi1_hat0"],
                               theta2_hat=merged["theta2_hat0"]),
            scenario=scenario,
            duration=merged["duration"],
            dt=merged["dt"],
            feedforward=values.get("feedforward", False),
            decimation=decimation,
            hover_target=(merged["hover_r1"], merged["hover_r2"]),
            ellipse=ellipse,
            hilbert_side=merged["hilbert_side"],
            hilbert_v_max=merged["hilbert_v_max"],
            hilbert_a_max=merged["hilbert_a_max"],
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(text: str) -> SimConfig:
    """Parse a config file into a fully populated SimConfig."""
    return build_config(_parse_kv(text))


def write_csv(records, path: str):
    """Write telemetry records as CSV; floats in shortest round-trip form."""
    if not records:
        raise ValueError("no records to write")
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(CSV_HEADER + "\n")
            for rec in records:
                fh.write(",".join(repr(getattr(rec, name)) for name in LOG_FIELDS) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write telemetry to {path!r}: {exc}") from exc


def read_csv(path: str):
    """Read a telemetry CSV back into LogRecords; header must match exactly."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != CSV_HEADER:
            got = set(header.split(","))
            missing = [name for name in LOG_FIELDS if name not in got]
            if missing:
                raise ConfigError(f"{path}: missing column(s) {', '.join(missing)}")
            raise ConfigError(f"{path}: unexpected header {header!r}")
        records = []
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").split(",")
            if len(parts) != len(LOG_FIELDS):
                raise ConfigError(f"{path}:{lineno}: expected {len(LOG_FIELDS)} columns")
            records.append(LogRecord(*(float(p) for p in parts)))
    return records


def _merged_values(args) -> dict:
    """File values overlaid with whatever flags were set on the command line."""
    values = {}
    if args.config:
        try:
            with open(args.config, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc}") from exc
        values = _parse_kv(text)
    flag_keys = (
        "scenario", "dt", "duration", "decimation",
        "k1", "k2", "k3", "k4", "gamma1", "gamma2", "gamma3", "gamma4",
        "theta1_hat0", "vartheta1_hat0", "varphi1_hat0", "theta2_hat0",
    )
    for key in flag_keys:
        val = getattr(args, key, None)
        if val is not None:
            values[key] = val
    if getattr(args, "feedforward", False):
        values["feedforward"] = True
    return values


def _default_out(scenario: str) -> str:
    out_dir = os.environ.get("DEBAK_OUT_DIR", ".")
    return os.path.join(out_dir, f"{scenario}.csv")


def _cmd_simulate(args) -> int:
    cfg = build_config(_merged_values(args))
    records = run_closed_loop(cfg)
    out = args.out if args.out else _default_out(cfg.scenario)
    write_csv(records, out)
    print(f"wrote {len(records)} records to {out}")
    return EXIT_OK


def _validate_records(records, cfg: SimConfig):
    """Re-check run invariants from the log; returns a list of failure strings."""
    from .adaptation import adaptation_derivatives  # noqa: F401  (parity with runtime path)
    from .controller import compute_errors, control_law
    from .simloop import lyapunov_eval
    from .extended import ThetaTrue

    failures = []
    ref = make_reference(cfg)
    truth = ThetaTrue(inv_m=1.0 / cfg.params.m, inv_J=1.0 / cfg.params.J)
    k = cfg.gains
    g = cfg.params.g

    worst_residual = 0.0
    worst_norm = 0.0
    worst_v4 = 0.0
    for rec in records:
        s = PlantState(r1=rec.r1, r2=rec.r2, v1=rec.v1, v2=rec.v2,
                       theta=rec.theta, omega=rec.omega)
        c = CompensatorState(F=rec.F, Fdot=rec.Fdot)
        est = EstimateState(theta1_hat=rec.theta1_hat, vartheta1_hat=rec.vartheta1_hat,
                            varphi1_hat=rec.varphi1_hat, theta2_hat=rec.theta2_hat)
        sample = ref(rec.t)
        errors = compute_errors(s, c, est, sample, k, g, feedforward=cfg.feedforward)
        out = control_law(s, c, est, sample, errors, k, g, feedforward=cfg.feedforward)
        # residual of the logged u against the recomputed bracket:
        # A u_log + B = A (u_log - u_recomputed)
        A = est.theta1_hat * g2_jacobian(ExtState3(F=rec.F, theta=rec.theta)) @ np.diag(
            [1.0, est.theta2_hat])
        B = -A @ out.u
        resid = np.linalg.norm(A @ np.array([rec.u1, rec.u2]) + B)
        worst_residual = max(worst_residual, resid / max(1.0, np.linalg.norm(B)))
        for name, vec in (("e1", errors.e1), ("e2", errors.e2),
                          ("e3", errors.e3), ("e4", errors.e4)):
            dev = abs(float(np.linalg.norm(vec)) - getattr(rec, name))
            worst_norm = max(worst_norm, dev / max(1.0, getattr(rec, name)))
        v4 = lyapunov_eval(errors, est, truth, k)
        worst_v4 = max(worst_v4, abs(v4 - rec.V4) / max(1.0, rec.V4))

    if worst_residual > 1e-10:
        failures.append(f"control-residual: worst relative residual {worst_residual:.3e} > 1e-10")
    if worst_norm > 1e-12:
        failures.append(f"error-norms: worst relative deviation {worst_norm:.3e} > 1e-12")
    if worst_v4 > 1e-12:
        failures.append(f"lyapunov-value: worst relative deviation {worst_v4:.3e} > 1e-12")

    if cfg.scenario == "hover":
        for prev, cur in zip(records[:-1], records[1:]):
            if cur.V4 > prev.V4 + 1e-8 * max(1.0, prev.V4):
                failures.append(
                    f"lyapunov-descent: V4 rose from {prev.V4!r} to {cur.V4!r} at t={cur.t}")
                break
        failures.extend(_derivative_consistency(records, cfg))
    return failures


def _derivative_consistency(records, cfg: SimConfig):
    """Central-difference checks on the logged grid (regulation runs).

    The O(h^2) quality of the check is asserted by comparing the mismatch at
    spacing h against the mismatch at 2h.
    """
    failures = []
    t = np.array([r.t for r in records])
    if len(t) < 5:
        return ["derivative-consistency: too few records"]
    h = t[1] - t[0]
    e1 = np.array([[r.r1 - cfg.hover_target[0], r.r2 - cfg.hover_target[1]]
                   for r in records])
    x2 = np.array([[r.v1, r.v2] for r in records])

    def mismatch(stride):
        # d/dt e1 = x2 for a fixed set-point
        d = (e1[2 * stride:] - e1[:-2 * stride]) / (2 * stride * h)
        return float(np.max(np.abs(d - x2[stride:-stride])))

    m1 = mismatch(1)
    m2 = mismatch(2)
    if m1 > 1.5 * m2 / 4.0 + 1e-9:
        failures.append(
            f"derivative-consistency: e1' vs x2 mismatch {m1:.3e} not O(h^2) (2h: {m2:.3e})")
    return failures


def _cmd_validate(args) -> int:
    values = _merged_values(args)
    records = read_csv(args.csv)
    # the run length comes from the log, not from the config defaults
    values.setdefault("duration", max(records[-1].t, 1.0))
    cfg = build_config(values)
    failures = _validate_records(records, cfg)
    if failures:
        for msg in failures:
            print(f"FAIL {msg}")
        return EXIT_FAILURE
    print(f"OK {args.csv}: {len(records)} records passed all checks")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="debak",
        description="Closed-loop bicopter simulation with an adaptive backstepping controller",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--scenario", choices=("hover", "ellipse", "hilbert"))
        p.add_argument("--dt", type=float, help="integration step [s]")
        p.add_argument("--duration", type=float, help="run length [s]")
        p.add_argument("--decimation", type=int, help="log every N-th step")
        p.add_argument("--feedforward", action="store_true",
                       help="track with reference-derivative feedforward")
        for gain in ("k1", "k2", "k3", "k4", "gamma1", "gamma2", "gamma3", "gamma4"):
            p.add_argument(f"--{gain}", type=float, help=f"override gain {gain}")
        for est in ("theta1_hat0", "vartheta1_hat0", "varphi1_hat0", "theta2_hat0"):
            p.add_argument(f"--{est.replace('_', '-')}", dest=est, type=float,
                           help=f"initial estimate {est}")

    sim = sub.add_parser("simulate", help="run a scenario and write telemetry CSV")
    add_common(sim)
    sim.add_argument("--out", help="output CSV path (default: $DEBAK_OUT_DIR/<scenario>.csv)")

    val = sub.add_parser("validate", help="re-check run invariants on a telemetry CSV")
    val.add_argument("csv", help="telemetry CSV produced by simulate")
    add_common(val)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        return _cmd_validate(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularInputMap as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except NumericalDivergence as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
