"""Command-line surface: simulations, fitness scans, oracle comparisons, sweeps.

Configuration is a flat ``key = value`` text file with dotted sections
(``model.*``, ``control.*``, ``integrator.*``, ...); see the example configs
shipped with the package.  Every randomized command takes an explicit seed
(default 0) and is bit-for-bit reproducible: rerunning with the same config
and seed yields byte-identical output files.  ``NONHOLO_THREADS`` caps the
scan worker pool without affecting results.

Exit codes are a stable contract::

    0  success (check-fit: verdict "fit"; oracle-compare: deviation <= tol)
    1  configuration error (message names the file, line, or missing key)
    2  step rejected by the integrator's residual guards
    3  model, chart, or rank errors
    4  check-fit: verdict "not-fit" (witness printed);
       oracle-compare: deviation above tolerance
    5  check-fit: verdict "inconclusive"
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, NonholoError, StepRejected
from .jump_analysis import BoxSampler, psi_scan, sufficiency_check, theta_on_III_scan
from .models import ModelBundle, build_model
from .reduced_dynamics import ControlSignal, frame_rhs
from .simulate import IntegratorConfig, integrate, oscillation_sweep


@dataclass(frozen=True)
class RunConfig:
    """Parsed flat config: dotted keys to raw string values, plus the file path."""

    path: str
    values: dict[str, str]

    def has(self, key: str) -> bool:
        return key in self.values

    def _raw(self, key: str, default: Optional[str], required: bool) -> Optional[str]:
        if key in self.values:
            return self.values[key]
        if required:
            raise ConfigError(f"{self.path}: missing required key '{key}'")
        return default

    def get_str(self, key: str, default: Optional[str] = None, required: bool = False) -> Optional[str]:
        return self._raw(key, default, required)

    def get_float(self, key: str, default: Optional[float] = None, required: bool = False) -> Optional[float]:
        raw = self._raw(key, None, required)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"{self.path}: key '{key}' has non-numeric value {raw!r}") from None

    def get_int(self, key: str, default: Optional[int] = None, required: bool = False) -> Optional[int]:
        raw = self._raw(key, None, required)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{self.path}: key '{key}' has non-integer value {raw!r}") from None

    def get_bool(self, key: str, default: Optional[bool] = None, required: bool = False) -> Optional[bool]:
        raw = self._raw(key, None, required)
        if raw is None:
            return default
        lowered = raw.lower()
        if lowered in ("true", "yes", "1", "on"):
            return True
        if lowered in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"{self.path}: key '{key}' has non-boolean value {raw!r}")

    def get_floats(self, key: str, default: Optional[list] = None, required: bool = False) -> Optional[np.ndarray]:
        raw = self._raw(key, None, required)
        if raw is None:
            return None if default is None else np.asarray(default, dtype=float)
        try:
            return np.array([float(part) for part in raw.split(",") if part.strip() != ""])
        except ValueError:
            raise ConfigError(f"{self.path}: key '{key}' has a non-numeric entry in {raw!r}") from None


def parse_config(path: str) -> RunConfig:
    """Read a flat ``key = value`` file; errors carry the offending line."""
    values: dict[str, str] = {}
    seen_line: dict[str, int] = {}
    try:
        with open(path, "r") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        value = raw.strip()
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        if key in seen_line:
            raise ConfigError(f"{path}:{lineno}: duplicate key '{key}' (first set on line {seen_line[key]})")
        seen_line[key] = lineno
        values[key] = value
    return RunConfig(path=path, values=values)


def _literal(raw: str):
    lowered = raw.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        return raw


def model_from_config(cfg: RunConfig) -> ModelBundle:
    """Instantiate ``model.name`` passing every other ``model.*`` key through."""
    name = cfg.get_str("model.name", required=True)
    options = {
        key.split(".", 1)[1]: _literal(raw)
        for key, raw in cfg.values.items()
        if key.startswith("model.") and key != "model.name"
    }
    return build_model(name, **options)


def control_from_config(cfg: RunConfig) -> ControlSignal:
    """Build the control trajectory from the ``control.*`` section."""
    family = cfg.get_str("control.family", required=True)
    if family == "constant":
        return ControlSignal.constant(cfg.get_floats("control.value", required=True))
    if family == "polynomial":
        return ControlSignal.polynomial(
            cfg.get_floats("control.coeffs", required=True),
            t0=cfg.get_float("control.t0", 0.0),
        )
    if family == "linear":
        return ControlSignal.linear(
            cfg.get_floats("control.value", required=True),
            cfg.get_floats("control.rate", required=True),
            t0=cfg.get_float("control.t0", 0.0),
        )
    if family == "sinusoid":
        return ControlSignal.sinusoid(
            cfg.get_floats("control.mean", required=True),
            cfg.get_floats("control.amp", required=True),
            omega=cfg.get_float("control.omega", required=True),
            phase=cfg.get_float("control.phase", 0.0),
        )
    if family == "dither":
        return ControlSignal.dither(
            cfg.get_floats("control.center", required=True),
            cfg.get_floats("control.gain", required=True),
            eps=cfg.get_float("control.eps", required=True),
        )
    if family == "ramp":
        return ControlSignal.ramp(
            cfg.get_floats("control.start", required=True),
            cfg.get_floats("control.end", required=True),
            t0=cfg.get_float("control.t0", 0.0),
            duration=cfg.get_float("control.duration", required=True),
        )
    raise ConfigError(
        f"{cfg.path}: key 'control.family' has unknown value {family!r} "
        "(expected constant|polynomial|linear|sinusoid|dither|ramp)"
    )


def integrator_from_config(cfg: RunConfig) -> tuple[IntegratorConfig, tuple[float, float]]:
    config = IntegratorConfig(
        dt=cfg.get_float("integrator.dt", required=True),
        representation=cfg.get_str("integrator.representation", "ambient"),
        reproject=cfg.get_bool("integrator.reproject", True),
        hard_residual=cfg.get_float("integrator.hard_residual", 1e-3),
    )
    t0 = cfg.get_float("integrator.t0", 0.0)
    t1 = cfg.get_float("integrator.t1", required=True)
    return config, (t0, t1)


def cmd_simulate(cfg: RunConfig, out: str, seed: int) -> int:
    model = model_from_config(cfg)
    control = control_from_config(cfg)
    config, t_span = integrator_from_config(cfg)
    n = model.spec.dim
    q0 = cfg.get_floats("initial.q")
    q0 = np.array(model.default_q0, dtype=float) if q0 is None else q0
    if q0.shape != (n,):
        raise ConfigError(f"{cfg.path}: key 'initial.q' needs {n} entries, got {q0.shape[0]}")
    p0 = cfg.get_floats("initial.p")
    p0 = np.zeros(n) if p0 is None else p0
    if p0.shape != (n,):
        raise ConfigError(f"{cfg.path}: key 'initial.p' needs {n} entries, got {p0.shape[0]}")
    traj = integrate(model.spec, q0, p0, control, t_span, config, frame_field=model.frame_field)
    traj.to_csv(out)
    print(f"simulate: {len(traj)} samples over t = {t_span[0]}..{t_span[1]} -> {out}")
    return 0


def cmd_check_fit(cfg: RunConfig, out: str, seed: int, samples: Optional[int], tol: Optional[float]) -> int:
    model = model_from_config(cfg)
    n_samples = samples if samples is not None else cfg.get_int("scan.samples", 500)
    scan_tol = tol if tol is not None else cfg.get_float("scan.tol", 1e-7)
    box = model.sample_box
    psi = psi_scan(model.spec, BoxSampler(box, seed=seed), n_samples=n_samples, tol=scan_tol)
    theta = theta_on_III_scan(model.spec, BoxSampler(box, seed=seed + 1), n_samples=n_samples, tol=scan_tol)
    if model.constancy_basis is not None:
        structural = sufficiency_check(
            model.spec,
            model.constancy_basis,
            BoxSampler(box, seed=seed + 2),
            n_samples=min(100, n_samples),
            declared_flat=model.declared_flat,
        )
        psi = dataclasses.replace(psi, structural=structural)
    text = psi.to_text() + theta.to_text()
    agree = psi.verdict == theta.verdict
    if not agree:
        text += "WARNING: scan verdicts disagree; treating as inconclusive\n"
    with open(out, "w") as fh:
        fh.write(text)
    print(text, end="")
    if not agree:
        return 5
    if psi.verdict == "fit":
        return 0
    if psi.verdict == "not-fit":
        return 4
    return 5


def cmd_oracle_compare(cfg: RunConfig, out: str, seed: int, samples: Optional[int], tol: Optional[float]) -> int:
    model = model_from_config(cfg)
    if model.closed_field is None or model.frame_field is None or model.extract_closed is None:
        raise NonholoError(f"model {model.name!r} has no closed-form oracle to compare against")
    n_samples = samples if samples is not None else cfg.get_int("oracle.samples", 100)
    dev_tol = tol if tol is not None else cfg.get_float("oracle.tol", 1e-5)
    rng = np.random.default_rng(seed)
    box = model.sample_box
    spec = model.spec

    max_dev = 0.0
    worst = None
    resampled = 0
    drawn = 0
    while drawn < n_samples:
        q = rng.uniform(box[:, 0], box[:, 1])
        xi = float(rng.uniform(-1.0, 1.0))
        udot = float(rng.uniform(-1.0, 1.0))
        control = ControlSignal.linear(q[spec.N :], np.full(spec.M, udot))
        try:
            qdot, xidot = frame_rhs(spec, q, np.array([xi]), 0.0, control, model.frame_field)
            y = np.append(q[: spec.N], xi)
            ref = model.closed_field(control)(0.0, y)
        except NonholoError:
            # singular or off-chart draw: log and replace it
            resampled += 1
            if resampled > 50 * max(1, n_samples):
                raise
            continue
        drawn += 1
        got = np.append(qdot[: spec.N], xidot)
        dev = float(np.abs(got - ref).max()) / (1.0 + float(np.abs(ref).max()))
        if dev > max_dev or worst is None:
            max_dev, worst = dev, q
    lines = [f"oracle comparison: model {model.name}, {drawn} samples, seed {seed}"]
    if resampled:
        lines.append(f"resampled {resampled} singular draws")
    if drawn == 0:
        lines.append("WARNING: no samples requested; nothing compared")
    else:
        lines.append(f"max relative deviation: {max_dev!r}")
        lines.append("worst point: [" + ", ".join(repr(float(x)) for x in worst) + "]")
    ok = drawn == 0 or max_dev <= dev_tol
    lines.append(f"tolerance: {dev_tol!r} -> {'PASS' if ok else 'FAIL'}")
    text = "\n".join(lines) + "\n"
    with open(out, "w") as fh:
        fh.write(text)
    print(text, end="")
    return 0 if ok else 4


def cmd_vibrate(cfg: RunConfig, out: str, seed: int) -> int:
    model = model_from_config(cfg)
    if model.extract_closed is None:
        raise NonholoError(f"model {model.name!r} has no closed-form reduced state")
    u_bar = cfg.get_float("vibrate.u_bar", 0.0)
    K = cfg.get_float("vibrate.K", 1.0)
    eps_list = cfg.get_floats("vibrate.eps_list", default=[0.1, 0.05, 0.025])
    horizon = cfg.get_float("vibrate.horizon", float(np.pi))
    steps = cfg.get_int("vibrate.steps_per_period", 50)
    if steps < 20:
        raise StepRejected(f"vibrate.steps_per_period = {steps} resolves the fast phase too coarsely (need >= 20)")
    y0 = cfg.get_floats("initial.y")
    if y0 is None:
        q0 = np.array(model.default_q0, dtype=float)
        q0[model.spec.N :] = u_bar
        y0 = model.extract_closed(q0, np.zeros(model.spec.dim))
    if y0.shape != (model.closed_dim,):
        raise ConfigError(f"{cfg.path}: key 'initial.y' needs {model.closed_dim} entries, got {y0.shape[0]}")
    sweep = oscillation_sweep(model, y0, u_bar, K, eps_list, horizon, steps_per_period=steps)
    text = sweep.to_text()
    with open(out, "w") as fh:
        fh.write(text)
    print(text, end="")
    return 0


def main(argv: Optional[list] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="nonholo",
        description="Reduced dynamics of non-holonomic systems with actively controlled coordinates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "check-fit", "oracle-compare", "vibrate"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="flat key = value config file")
        p.add_argument("--out", required=True, help="output CSV/report path")
        p.add_argument("--seed", type=int, default=0, help="seed for randomized draws (default 0)")
        if name in ("check-fit", "oracle-compare"):
            p.add_argument("--samples", type=int, default=None, help="sample count override")
            p.add_argument("--tol", type=float, default=None, help="tolerance override")
    args = parser.parse_args(argv)

    try:
        cfg = parse_config(args.config)
        if args.command == "simulate":
            return cmd_simulate(cfg, args.out, args.seed)
        if args.command == "check-fit":
            return cmd_check_fit(cfg, args.out, args.seed, args.samples, args.tol)
        if args.command == "oracle-compare":
            return cmd_oracle_compare(cfg, args.out, args.seed, args.samples, args.tol)
        return cmd_vibrate(cfg, args.out, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except StepRejected as exc:
        print(f"step rejected: {exc}", file=sys.stderr)
        return 2
    except NonholoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def run() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    run()
