"""Command-line front end for the STA pulse-design pipeline.

Configuration is a flat JSON file in laboratory units: durations in ms and
frequencies in MHz (meaning ``Omega / 2pi``).  Everything is converted to SI
seconds and rad/s on load.  Exit codes: 0 success, 1 runtime failure,
2 validation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import re
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__, cost, dynamics, export, model, optimize, robustness, sta
from .errors import BoundaryConditionError, DegenerateParametrization

log = logging.getLogger(__name__)

EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION = 0, 1, 2
MHZ = 2e6 * np.pi


class ValidationError(Exception):
    """Bad input, reported as ``path:line: message``."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")


def _key_line(text: str, key: str) -> int:
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    return text.count("\n", 0, m.start()) + 1 if m else 1


@dataclass
class RunConfig:
    """Every tunable of a run, in file units."""

    delta_MHz: float = model.DEFAULT_DELTA / MHZ
    omega0_MHz: float = model.DEFAULT_OMEGA0 / MHZ
    phi_L: float = 0.0
    grid_points: int = 2001
    boundary_tol: float = 9e-4
    q_scale: float = 1.0
    T_ms: float = 0.25
    N: int = 4
    n_seeds: int = 100_000
    keep: int = 100
    budget: int = 2000
    peak_target: float = 1.14
    q_target: float = 1.59
    peak_weight: float = 10.0
    q_weight: float = 2.0
    c_max: float = 1e12
    rng_seed: int = 0
    a_range: list = field(default_factory=lambda: [-1.0, 1.0])
    t0_range: list = field(default_factory=lambda: [-0.5, 0.5])
    w_range: list = field(default_factory=lambda: [0.02, 0.5])
    T_list_ms: list = field(default_factory=lambda: [0.2, 0.25, 0.3, 0.35, 0.4])
    epsilon_range: list = field(default_factory=lambda: [0.9, 1.1, 21])
    dump_traces: bool = False
    out_dir: str = "out"

    # ---- loading -------------------------------------------------------
    @classmethod
    def load(cls, path) -> "RunConfig":
        text = Path(path).read_text()
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ValidationError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
        if not isinstance(data, dict):
            raise ValidationError(path, 1, "config must be a JSON object")
        known = {f.name: f for f in fields(cls)}
        cfg = cls()
        for key, value in data.items():
            line = _key_line(text, key)
            if key not in known:
                raise ValidationError(path, line, f"unknown key {key!r}")
            try:
                setattr(cfg, key, _coerce(key, value, getattr(cfg, key)))
            except (TypeError, ValueError) as exc:
                raise ValidationError(path, line, str(exc)) from None
        cfg._source = (path, text)
        cfg.validate()
        return cfg

    def _fail(self, keys, message):
        path, text = getattr(self, "_source", ("<config>", ""))
        lines = [_key_line(text, k) for k in keys if f'"{k}"' in text]
        raise ValidationError(path, min(lines) if lines else 1, message)

    def validate(self) -> None:
        """Build every child object once so their invariants are checked."""
        groups = [
            (("delta_MHz", "omega0_MHz", "phi_L", "grid_points", "boundary_tol",
              "q_scale"), self.system_config),
            (("peak_target", "q_target", "peak_weight", "q_weight", "c_max"), self.cost_config),
            (("a_range", "t0_range", "w_range", "rng_seed"), self.seed_box),
            (("N", "n_seeds", "keep", "budget"), self.pipeline_config),
        ]
        for keys, build in groups:
            try:
                build()
            except (TypeError, ValueError) as exc:
                self._fail(keys, str(exc))
        if not self.T_ms > 0 or not all(t > 0 for t in self.T_list_ms):
            self._fail(("T_ms", "T_list_ms"), "durations must be positive")
        lo, hi, n = self.epsilon_range
        if not (0 < lo < 1 < hi and int(n) == n and n >= 3):
            self._fail(("epsilon_range",), "epsilon_range needs 0 < lo < 1 < hi and N >= 3")

    # ---- conversion to SI objects --------------------------------------
    def system_config(self) -> model.SystemConfig:
        return model.SystemConfig(
            delta=self.delta_MHz * MHZ, omega0=self.omega0_MHz * MHZ, phi_L=self.phi_L,
            grid_points=self.grid_points, boundary_tol=self.boundary_tol,
            q_scale=self.q_scale,
        )

    def cost_config(self) -> cost.CostConfig:
        return cost.CostConfig(self.peak_target, self.q_target, self.peak_weight,
                               self.q_weight, self.c_max)

    def seed_box(self) -> optimize.SeedBox:
        return optimize.SeedBox(*self.a_range, *self.t0_range, *self.w_range,
                                rng_seed=self.rng_seed)

    def pipeline_config(self) -> optimize.PipelineConfig:
        return optimize.PipelineConfig(self.system_config(), self.cost_config(),
                                       self.seed_box(), self.N, self.n_seeds, self.keep,
                                       self.budget)

    def as_dict(self) -> dict:
        return asdict(self)


def _coerce(key, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise TypeError(f"{key} must be true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise TypeError(f"{key} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise TypeError(f"{key} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise TypeError(f"{key} must be a string")
        return value
    # list-valued keys
    if not isinstance(value, list) or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        raise TypeError(f"{key} must be a list of numbers")
    if key != "T_list_ms" and len(value) != len(default):
        raise ValueError(f"{key} must have {len(default)} entries")
    if key == "T_list_ms" and not value:
        raise ValueError("T_list_ms must not be empty")
    return [float(v) for v in value]


def load_params(path, duration_ms: float, n_default: int = 0) -> model.PulseParameters:
    """Parameter file, or the Gaussian baseline when ``path`` is None."""
    if path is None:
        return model.PulseParameters.gaussian(duration_ms * 1e-3, n_default)
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(path, exc.lineno, f"invalid JSON: {exc.msg}") from None
    try:
        return model.PulseParameters.from_json_dict(data)
    except (TypeError, ValueError, KeyError) as exc:
        raise ValidationError(path, 1, f"invalid parameters: {exc}") from None


def parse_epsilon_range(text: str):
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected LO:HI:N")
    try:
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError("expected LO:HI:N with numeric values") from None
    if not (0 < lo < 1 < hi and n >= 3):
        raise argparse.ArgumentTypeError("need 0 < LO < 1 < HI and N >= 3")
    return [lo, hi, n]


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("rng seed must be an unsigned 64-bit integer")
    return v


# ---- run context -----------------------------------------------------------

@dataclass
class _Run:
    command: str
    config: RunConfig
    params: model.PulseParameters | None
    adiabatic: bool
    out: Path
    params_source: object = "<baseline>"

    @property
    def digest(self) -> str:
        payload = {"command": self.command, "config": self.config.as_dict(),
                   "adiabatic": self.adiabatic,
                   "params": self.params.to_json_dict() if self.params else None}
        return export.config_hash(payload)

    def csv(self, name, columns, extra=None):
        return export.write_columns(self.out / name, columns, self.digest, self.command,
                                    extra)

    def rows(self, name, header, rows):
        return export.write_rows(self.out / name, header, rows, self.digest, self.command)


def _reference(run: _Run):
    try:
        return model.reference_pulses(run.params, run.config.system_config())
    except (BoundaryConditionError, DegenerateParametrization) as exc:
        raise ValidationError(run.params_source, 1, str(exc)) from None


def _frame(run: _Run):
    ref = _reference(run)
    cfg = run.config.system_config()
    return ref, sta.effective_frame(ref, cfg, adiabatic=run.adiabatic)


def cmd_map(run: _Run) -> int:
    cfg = run.config.system_config()
    ref, frame = _frame(run)
    phys = sta.physical_pulses(frame, cfg)
    run.out.mkdir(parents=True, exist_ok=True)
    run.csv("reference.csv", {"time_ms": ref.times * 1e3,
                              "omega_P_MHz": ref.omega_P / MHZ,
                              "omega_S_MHz": ref.omega_S / MHZ})
    run.csv("frame.csv", frame.export_columns())
    run.csv("physical.csv", phys.export_columns())
    print(f"omega_peak {cost.peak_rabi(phys, cfg):.6f}")
    return EXIT_OK


def cmd_simulate(run: _Run) -> int:
    cfg = run.config.system_config()
    _, frame = _frame(run)
    phys = sta.physical_pulses(frame, cfg)
    psi2 = dynamics.integrate_two_level(frame)
    psi3 = dynamics.integrate_three_level(phys, cfg)
    rows = [("two_level", dynamics.transfer_fidelity(psi2), float(np.vdot(psi2, psi2).real)),
            ("three_level", dynamics.transfer_fidelity(psi3), float(np.vdot(psi3, psi3).real))]
    run.out.mkdir(parents=True, exist_ok=True)
    run.rows("simulate.csv", ["model", "fidelity", "norm"], rows)
    for name, fid, _ in rows:
        print(f"{name} fidelity {fid:.9f}")
    return EXIT_OK


def cmd_sweep_epsilon(run: _Run) -> int:
    cfg = run.config.system_config()
    _, frame = _frame(run)
    q = robustness.sensitivity(frame, cfg).q
    lo, hi, n = run.config.epsilon_range
    sweep = dynamics.scaling_sweep(frame, q, lo, hi, int(n))
    run.out.mkdir(parents=True, exist_ok=True)
    run.csv("sweep.csv", sweep.export_columns(), {"q": q})
    print(f"q {q:.6f}")
    return EXIT_OK


def cmd_sensitivity(run: _Run) -> int:
    cfg = run.config.system_config()
    report = cost.evaluate(run.params, cfg, run.config.cost_config(), adiabatic=run.adiabatic)
    _, frame = _frame(run)
    q_fit = dynamics.fitted_sensitivity(frame)
    run.out.mkdir(parents=True, exist_ok=True)
    run.rows("sensitivity.csv", ["T_ms", "omega_peak", "q", "q_fit", "C"],
             [(run.params.duration * 1e3, report.omega_peak, report.q, q_fit, report.C)])
    print(f"omega_peak {report.omega_peak:.6f} q {report.q:.6f} "
          f"q_fit {q_fit:.6f} C {report.C:.6f}")
    return EXIT_OK


def _report_rows(stage, reports):
    return [[stage, i] + r.csv_row() for i, r in enumerate(reports)]


def cmd_optimize(run: _Run) -> int:
    rc = run.config
    result = optimize.optimize_duration(rc.T_ms * 1e-3, rc.pipeline_config())
    best = result.best
    header = ["stage", "rank"] + cost.CostReport.csv_header(rc.N)
    rows = (_report_rows("screened", [r for _, r in result.screened])
            + _report_rows("optimized", [t.best for t in result.traces]))
    run.out.mkdir(parents=True, exist_ok=True)
    run.rows("results.csv", header, rows)
    (run.out / "best_params.json").write_text(
        json.dumps(best.params.to_json_dict(), indent=2) + "\n")
    if rc.dump_traces:
        tdir = run.out / "traces"
        tdir.mkdir(exist_ok=True)
        for i, tr in enumerate(result.traces):
            run.csv(f"traces/trace_{i:04d}.csv", tr.export_columns())
    print(f"screened {result.screened.n_scored} failed {result.screened.n_failed} "
          f"optimized {len(result.traces)}")
    print(f"best omega_peak {best.omega_peak:.6f} q {best.q:.6f} C {best.C:.6f}")
    return EXIT_OK


def cmd_sweep_duration(run: _Run) -> int:
    rc = run.config
    durations = [t * 1e-3 for t in rc.T_list_ms]
    reports = optimize.duration_sweep(durations, rc.pipeline_config())
    run.out.mkdir(parents=True, exist_ok=True)
    run.rows("sweep_duration.csv", cost.CostReport.csv_header(rc.N),
             [r.csv_row() for r in reports])
    for r in reports:
        print(f"T_ms {r.params.duration * 1e3:g} omega_peak {r.omega_peak:.6f} "
              f"q {r.q:.6f} C {r.C:.6f}")
    return EXIT_OK


def cmd_calibrate(run: _Run) -> int:
    rc = run.config
    cal = cost.calibrate_baseline(omega0=rc.omega0_MHz * MHZ, grid_points=rc.grid_points,
                                  peak_target=rc.peak_target, q_target=rc.q_target)
    run.out.mkdir(parents=True, exist_ok=True)
    run.rows("calibration.csv", ["delta_MHz", "omega_peak", "q_raw", "q_scale"],
             [(cal.delta / MHZ, cal.omega_peak, cal.q_raw, cal.q_scale)])
    print(f"delta_MHz {cal.delta / MHZ:.6f} omega_peak {cal.omega_peak:.6f} "
          f"q_raw {cal.q_raw:.6f} q_scale {cal.q_scale:.6f}")
    return EXIT_OK


COMMANDS = {
    "map": (cmd_map, "reference, frame and physical pulse samples"),
    "simulate": (cmd_simulate, "two- and three-level transfer fidelity"),
    "sweep-epsilon": (cmd_sweep_epsilon, "fidelity under uniform power scaling"),
    "sensitivity": (cmd_sensitivity, "sensitivity q, its fitted value, and cost"),
    "optimize": (cmd_optimize, "seed screening and local optimisation at T_ms"),
    "sweep-duration": (cmd_sweep_duration, "best optimised pulse for each of T_list_ms"),
    "calibrate": (cmd_calibrate, "detuning reproducing the baseline peak power"),
}
_NEEDS_PARAMS = {"map", "simulate", "sweep-epsilon", "sensitivity"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sta-lambda", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, help="flat JSON run configuration")
        p.add_argument("--out", type=Path, help="output directory (overrides out_dir)")
        p.add_argument("--rng-seed", type=_u64)
        p.add_argument("--grid-points", type=int)
        if name in _NEEDS_PARAMS:
            p.add_argument("--params", type=Path,
                           help="pulse parameters JSON; default is the Gaussian baseline")
            p.add_argument("--adiabatic", action="store_true",
                           help="drop the counter-diabatic term")
        if name == "sweep-epsilon":
            p.add_argument("--epsilon-range", type=parse_epsilon_range, metavar="LO:HI:N")
    return parser


def _prepare(args) -> _Run:
    rc = RunConfig.load(args.config) if args.config else RunConfig()
    if args.rng_seed is not None:
        rc.rng_seed = args.rng_seed
    if args.grid_points is not None:
        rc.grid_points = args.grid_points
    if getattr(args, "epsilon_range", None) is not None:
        rc.epsilon_range = args.epsilon_range
    rc.validate()
    params = None
    params_path = getattr(args, "params", None)
    if args.command in _NEEDS_PARAMS:
        params = load_params(params_path, rc.T_ms)
    out = args.out if args.out is not None else Path(rc.out_dir)
    return _Run(args.command, rc, params, bool(getattr(args, "adiabatic", False)), out,
                params_path or "<baseline>")


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        run = _prepare(args)
        return COMMANDS[args.command][0](run)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - surfaced as a runtime failure
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
