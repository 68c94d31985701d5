"""
Command-line front end.

Subcommands: run, sweep, fig1, fig2, check, estimate. Settings come from an
optional JSON config file (``--config``) overridden by flags. Output goes
to ``--output`` (``-`` for stdout); otherwise to ``<experiment>.<format>``
in the directory named by ``FBDD_OUTPUT_DIR`` (default: the working
directory).

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .conditions import check_blocks, check_ld, check_mixing, solve_qubit_feedback
from .cxmat import fro, identity, is_normal, is_unitary
from .errors import NumericalError, PreconditionError, ValidationError
from .estimate import EstimationState, tune
from .feedback import EXACT, SAMPLED, branch_operators
from .model import QubitErrorModel
from .protocols import ProtocolRun, RunResult, canonical_name, run

OUTPUT_DIR_ENV = "FBDD_OUTPUT_DIR"
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3

EXPERIMENTS = ("run", "sweep", "sweep-dt", "sweep-error", "fig1", "fig2", "check", "estimate")

FIG1_PRESET = {"eps_x": 0.05, "eps_y": 0.1, "eps_z": 0.0, "delta_t": 0.04, "t_total": 30.0}
FIG2_PRESET = {"eps_x": 0.1, "eps_y": 0.1, "eps_z": 0.0, "delta_t": 0.32, "t_total": 120.0}
FIG1_PROTOCOLS = (("F_fdd", "fdd"), ("F_seldd_x", "cp-x"), ("F_seldd_y", "cp-y"))
FIG2_PROTOCOLS = (("F_maxdd", "maxdd"), ("F_fed", "fed"), ("F_fed_plain", "fed-plain"), ("F_def", "def"))


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    experiment: str = "run"
    protocols: list = field(default_factory=lambda: ["free"])
    omega_z: float = 1.0
    eps_x: float = 0.0
    eps_y: float = 0.0
    eps_z: float = 0.0
    t_total: float | None = None
    t_c: float | None = None
    delta_t: float = 0.04
    cycles: int | None = None
    shots: int = 10_000
    iterations: int = 10
    seed: int = 0
    eta_x: float = 0.5
    eta_z: float = 0.5
    sign_x: int = 1
    floor: float = 1e-6
    mode: str = EXACT
    axis: str = "delta_t"
    grid: list = field(default_factory=list)
    workers: int = 1
    matrix: str | None = None
    dims: list | None = None
    output_path: str | None = None
    format: str = "csv"

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if self.format not in ("csv", "json"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.mode not in (EXACT, SAMPLED):
            raise ConfigError(f"unknown mode {self.mode!r}")
        for name in ("t_total", "t_c", "delta_t"):
            v = getattr(self, name)
            if v is not None and not (isinstance(v, (int, float)) and v > 0 and math.isfinite(v)):
                raise ConfigError(f"{name} must be a positive number, got {v!r}")
        for name in ("shots", "workers"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be at least 1")
        if self.cycles is not None and int(self.cycles) < 1:
            raise ConfigError("cycles must be at least 1")
        if self.iterations < 0:
            raise ConfigError("iterations must be nonnegative")
        if self.axis not in ("delta_t", "error_norm"):
            raise ConfigError(f"unknown sweep axis {self.axis!r}")
        try:
            self.protocols = [canonical_name(p) for p in self.protocols]
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return self

    def model(self) -> QubitErrorModel:
        return QubitErrorModel(self.omega_z, self.eps_x, self.eps_y, self.eps_z)


KEY_ALIASES = {"M": "shots", "T_total": "t_total", "T_c": "t_c", "output": "output_path"}


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)}
    out = {}
    for key, value in data.items():
        key = KEY_ALIASES.get(key, key)
        if key not in known:
            raise ConfigError(f"{path}: unknown config key {key!r}")
        out[key] = value
    return out


def build_config(experiment: str, args: argparse.Namespace, preset: dict | None = None) -> ExperimentConfig:
    """Preset < config file < flags."""
    values = dict(preset or {})
    values.update(load_config(getattr(args, "config", None)))
    for f in fields(ExperimentConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    from_file = values.get("experiment")
    sweep_kind = experiment == "sweep" and from_file in ("sweep-dt", "sweep-error")
    values["experiment"] = from_file if sweep_kind else experiment
    if sweep_kind:
        values["axis"] = "delta_t" if from_file == "sweep-dt" else "error_norm"
    if isinstance(values.get("protocols"), str):
        values["protocols"] = _names(values["protocols"])
    try:
        cfg = ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    return cfg.validate()


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def table_to_csv(columns: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def table_to_json(columns: list[str], rows: list[list]) -> str:
    def conv(v):
        if isinstance(v, (np.integer,)):
            return int(v)
        if isinstance(v, (np.floating,)):
            return float(v)
        return v

    return json.dumps({"columns": columns, "rows": [[conv(v) for v in r] for r in rows]}, indent=1) + "\n"


def output_target(cfg: ExperimentConfig) -> str:
    if cfg.output_path:
        return cfg.output_path
    base = os.environ.get(OUTPUT_DIR_ENV, ".")
    return os.path.join(base, f"{cfg.experiment}.{cfg.format}")


def emit(cfg: ExperimentConfig, text: str) -> str:
    target = output_target(cfg)
    if target == "-":
        sys.stdout.write(text)
        return target
    parent = os.path.dirname(target)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(target, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return target


def emit_table(cfg: ExperimentConfig, columns, rows) -> str:
    text = table_to_csv(columns, rows) if cfg.format == "csv" else table_to_json(columns, rows)
    return emit(cfg, text)


# --- experiments -----------------------------------------------------------


def _protocol_run(cfg: ExperimentConfig, name: str, model=None, delta_t=None) -> ProtocolRun:
    dt = cfg.delta_t if delta_t is None else delta_t
    kwargs = dict(name=name, model=model or cfg.model(), delta_t=dt, t_c=cfg.t_c if name in
                  ("fdd", "fed", "fed-plain", "def", "def-plain") else None,
                  seed=cfg.seed, mode=cfg.mode, shots=cfg.shots)
    if cfg.cycles is not None:
        return ProtocolRun(cycles=int(cfg.cycles), **kwargs)
    if cfg.t_total is None:
        raise ConfigError("give t_total or cycles")
    return ProtocolRun(t_total=cfg.t_total, **kwargs)


def align(results: list[RunResult]) -> tuple[np.ndarray, list[np.ndarray]]:
    """Sample every trace on the coarsest cycle grid shared by all of them."""
    coarse = max(r.metadata["cycle_time"] for r in results)
    cols = []
    for r in results:
        ratio = coarse / r.metadata["cycle_time"]
        step = int(round(ratio))
        if abs(step - ratio) > 1e-9 * ratio:
            raise ConfigError(f"cycle time of {r.name} does not divide {coarse}")
        cols.append(r.fidelities[::step])
    n = min(len(c) for c in cols)
    return coarse * np.arange(n), [c[:n] for c in cols]


def _column(name: str) -> str:
    return "F_" + name.replace("-", "_").replace(":", "_")


def cmd_run(cfg: ExperimentConfig) -> str:
    results = [run(_protocol_run(cfg, p)) for p in cfg.protocols]
    times, cols = align(results)
    rows = [[t, *(c[i] for c in cols)] for i, t in enumerate(times)]
    return emit_table(cfg, ["t", *(_column(p) for p in cfg.protocols)], rows)


def _sweep_point(args):
    cfg, value, name = args
    if cfg.axis == "delta_t":
        pr = _protocol_run(cfg, name, delta_t=value)
    else:
        direction = np.array([cfg.eps_x, cfg.eps_y, cfg.eps_z], dtype=float)
        norm = np.linalg.norm(direction)
        direction = direction / norm if norm > 0 else np.array([1.0, 1.0, 0.0]) / np.sqrt(2)
        ex, ey, ez = value * direction
        pr = _protocol_run(cfg, name, model=QubitErrorModel(cfg.omega_z, ex, ey, ez))
    r = run(pr)
    return [value, name, r.final, r.time_average]


def sweep_rows(cfg: ExperimentConfig) -> list[list]:
    if not cfg.grid:
        raise ConfigError("sweep grid is empty")
    jobs = [(cfg, float(v), p) for v in cfg.grid for p in cfg.protocols]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            return list(pool.map(_sweep_point, jobs))
    return [_sweep_point(j) for j in jobs]


def cmd_sweep(cfg: ExperimentConfig) -> str:
    rows = sweep_rows(cfg)
    return emit_table(cfg, [cfg.axis, "protocol", "final_fidelity", "mean_fidelity"], rows)


def fig1_table(cfg: ExperimentConfig):
    results = [run(_protocol_run(cfg, name)) for _, name in FIG1_PROTOCOLS]
    times, cols = align(results)
    env_x = np.cos(cfg.eps_x * times) ** 2
    env_y = np.cos(cfg.eps_y * times) ** 2
    columns = ["t", *(c for c, _ in FIG1_PROTOCOLS), "envelope_x", "envelope_y"]
    rows = [[t, *(c[i] for c in cols), env_x[i], env_y[i]] for i, t in enumerate(times)]
    return columns, rows


def fig2_table(cfg: ExperimentConfig):
    results = [run(_protocol_run(cfg, name)) for _, name in FIG2_PROTOCOLS]
    times, cols = align(results)
    columns = ["t", *(c for c, _ in FIG2_PROTOCOLS)]
    rows = [[t, *(c[i] for c in cols)] for i, t in enumerate(times)]
    return columns, rows


def cmd_fig1(cfg: ExperimentConfig) -> str:
    return emit_table(cfg, *fig1_table(cfg))


def cmd_fig2(cfg: ExperimentConfig) -> str:
    return emit_table(cfg, *fig2_table(cfg))


def estimate_rows(cfg: ExperimentConfig):
    state = EstimationState(eta_x=cfg.eta_x, eta_z=cfg.eta_z, sign_x=cfg.sign_x)
    t_c = cfg.t_c if cfg.t_c is not None else 1.0
    tune(state, cfg.model(), cfg.iterations, t_c, cfg.delta_t, shots=cfg.shots, mode=cfg.mode,
         seed=cfg.seed, floor=cfg.floor)
    columns = ["iteration", "p1_x", "p1_z", "est_eps_x", "est_eps_z", "sign_x", "est_error_norm"]
    return columns, [[h[c] for c in columns] for h in state.history]


def cmd_estimate(cfg: ExperimentConfig) -> str:
    return emit_table(cfg, *estimate_rows(cfg))


# --- condition checks ------------------------------------------------------


def _complex_pairs(m) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]


def parse_matrix(text: str, source: str = "<matrix>"):
    """Parse ``{"dims": [dS, dE], "matrix": [[[re, im], ...], ...]}`` (row-major)."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict) or "matrix" not in data:
        raise ConfigError(f"{source}: expected an object with a 'matrix' field")
    rows = data["matrix"]
    if not isinstance(rows, list) or not rows:
        raise ConfigError(f"{source}: 'matrix' must be a nonempty list of rows")
    n = len(rows)
    out = np.zeros((n, n), dtype=complex)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            raise ConfigError(f"{source}: matrix row {i} must have {n} entries")
        for j, z in enumerate(row):
            if (not isinstance(z, list) or len(z) != 2
                    or not all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in z)):
                raise ConfigError(f"{source}: matrix[{i}][{j}] must be a [re, im] pair of numbers")
            out[i, j] = complex(z[0], z[1])
    dims = data.get("dims")
    if dims is not None:
        if (not isinstance(dims, list) or len(dims) != 2
                or not all(isinstance(d, int) and d >= 1 for d in dims)):
            raise ConfigError(f"{source}: 'dims' must be [dS, dE] with positive integers")
        if dims[0] * dims[1] != n:
            raise ConfigError(f"{source}: dims {dims} do not match a {n}x{n} matrix")
    return out, dims


def check_report(u: np.ndarray, d_s: int, d_e: int, seed: int = 0) -> dict:
    report: dict = {"dims": [d_s, d_e], "is_unitary": bool(is_unitary(u, atol=1e-9))}
    x = u - np.trace(u) / u.shape[0] * identity(u.shape[0])
    if d_e == 1 and is_normal(x):
        mix = check_mixing(x, check_pre=False)
        report["mixing"] = {
            "satisfied": bool(mix.satisfied),
            "pairing": mix.pairing,
            "residual": mix.residual,
            "solution_U": None if mix.solution_u is None else _complex_pairs(mix.solution_u),
        }
    else:
        report["mixing"] = None
    ld = check_ld(u, d_s, d_e, seed=seed)
    report["is_LD"] = bool(ld.is_ld)
    report["ld_status"] = ld.status
    report["residuals"] = {"commutator": ld.commutator_residual, "offdiag": ld.offdiag_residual}
    report["diagonalizer"] = None if ld.diagonalizer is None else _complex_pairs(ld.diagonalizer)
    if report["is_unitary"]:
        blocks = check_blocks(u, d_s, d_e, seed=seed)
        report["blocks"] = {
            "correctable": bool(blocks.correctable),
            "rank_one": bool(blocks.rank_one),
            "unitary_up_to_scale": bool(blocks.unitary_up_to_scale),
            "mixing": bool(blocks.mixing),
        }
        report["residuals"].update(blocks.residuals)
        u_s, u_fb = blocks.u_s, blocks.u_fb
        if d_s == 2 and ld.is_ld:
            sol = solve_qubit_feedback(u, d_e, seed=seed)
            report["blocks"]["correctable"] = bool(sol.ok)
            report["residuals"].update({"A_plus": sol.plus_residual, "A_minus": sol.minus_residual})
            u_s, u_fb = sol.u_s, sol.u_fb
        report["U_S"] = None if u_s is None else _complex_pairs(u_s)
        report["U_fb"] = None if u_fb is None else _complex_pairs(u_fb)
        if u_s is not None:
            _, a_minus = branch_operators(u, u_s, d_e)
            report["residuals"]["A_minus_norm"] = fro(a_minus)
    return report


def cmd_check(cfg: ExperimentConfig) -> str:
    if not cfg.matrix:
        raise ConfigError("check needs a matrix file")
    with open(cfg.matrix, encoding="utf-8") as fh:
        text = fh.read()
    u, dims = parse_matrix(text, cfg.matrix)
    if cfg.dims is not None:
        dims = [int(d) for d in cfg.dims]
    if dims is None:
        dims = [u.shape[0], 1]
    if dims[0] * dims[1] != u.shape[0] or dims[0] < 2:
        raise ConfigError(f"dims {dims} are not valid for a {u.shape[0]}x{u.shape[0]} matrix")
    report = check_report(u, dims[0], dims[1], seed=cfg.seed)
    cfg = replace(cfg, format="json")
    return emit(cfg, json.dumps(report, indent=1) + "\n")


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "fig1": cmd_fig1,
    "fig2": cmd_fig2,
    "check": cmd_check,
    "estimate": cmd_estimate,
}


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _names(text: str) -> list[str]:
    return [v.strip() for v in text.split(",") if v.strip()]


def make_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--output", dest="output_path", help="output file, '-' for stdout")
    common.add_argument("--format", choices=["csv", "json"])
    common.add_argument("--seed", type=int)

    model = argparse.ArgumentParser(add_help=False)
    model.add_argument("--omega-z", dest="omega_z", type=float)
    model.add_argument("--eps-x", dest="eps_x", type=float)
    model.add_argument("--eps-y", dest="eps_y", type=float)
    model.add_argument("--eps-z", dest="eps_z", type=float)
    model.add_argument("--delta-t", dest="delta_t", type=float)
    model.add_argument("--t-total", dest="t_total", type=float)
    model.add_argument("--t-c", dest="t_c", type=float)
    model.add_argument("--cycles", type=int)
    model.add_argument("--mode", choices=[EXACT, SAMPLED])
    model.add_argument("--shots", "-M", dest="shots", type=int)

    parser = argparse.ArgumentParser(prog="fbdd", description="Feedback and decoupling simulations.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", parents=[common, model], help="fidelity traces of protocols")
    p.add_argument("--protocol", "-p", dest="protocols", type=_names, help="comma-separated names")
    p = sub.add_parser("sweep", parents=[common, model], help="final and mean fidelity over a grid")
    p.add_argument("--protocol", "-p", dest="protocols", type=_names)
    p.add_argument("--axis", choices=["delta_t", "error_norm"])
    p.add_argument("--grid", type=_floats, help="comma-separated axis values")
    p.add_argument("--workers", type=int)
    sub.add_parser("fig1", parents=[common, model], help="selective protocols at the first preset")
    sub.add_parser("fig2", parents=[common, model], help="maximal protocols at the second preset")
    p = sub.add_parser("check", parents=[common], help="correctability report for a matrix file")
    p.add_argument("matrix", help="JSON matrix file")
    p.add_argument("--dims", type=int, nargs=2, metavar=("DS", "DE"))
    p = sub.add_parser("estimate", parents=[common, model], help="adaptive estimation iterations")
    p.add_argument("--iterations", type=int)
    p.add_argument("--eta-x", dest="eta_x", type=float)
    p.add_argument("--eta-z", dest="eta_z", type=float)
    p.add_argument("--sign-x", dest="sign_x", type=int, choices=[-1, 1])
    p.add_argument("--floor", type=float)
    return parser


PRESETS = {"fig1": FIG1_PRESET, "fig2": FIG2_PRESET}


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = build_config(args.command, args, PRESETS.get(args.command))
        target = COMMANDS[args.command](cfg)
    except (ConfigError, ValidationError, PreconditionError) as exc:
        print(f"fbdd: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"fbdd: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"fbdd: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"fbdd: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if target != "-":
        print(target, file=sys.stderr)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
