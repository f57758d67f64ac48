"""Command-line entry point: ``fracstokes <command> ...``.

Exit codes: 0 success / Global, 2 configuration or domain error, 3 I/O error,
10 BlowUp, 11 Inconclusive, 12 sweep without a boundary.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import fujita
from .config import ConfigError, RunConfig
from .fractional_oracle import InstabilityError, TimeGrid, solve_scalar_mode
from .frdf import FormatError, atomic_write_bytes, read_field, write_field
from .linear_propagator import evolve_homogeneous
from .semilinear_solver import RunOutcome, Status, evolve_semilinear, evolve_system
from .spectral_grid import ScalarField, field_norm, gaussian_initial
from .special_functions import ConvergenceError, mittag_leffler

log = logging.getLogger("fracstokes")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_BLOWUP = 10
EXIT_INCONCLUSIVE = 11
EXIT_NO_BOUNDARY = 12

_STATUS_EXIT = {Status.GLOBAL: EXIT_OK, Status.BLOWUP: EXIT_BLOWUP, Status.INCONCLUSIVE: EXIT_INCONCLUSIVE}


def fmt(x: float | None) -> str:
    """Ten significant digits, locale independent; empty for ``None``."""
    if x is None:
        return ""
    return f"{float(x):.10g}"


def fmt_fixed(x: float) -> str:
    # ten decimals reads naturally for O(1) values, exponent form otherwise
    if x == 0.0 or 1e-4 <= abs(x) < 1e10:
        return f"{x:.10f}"
    return f"{x:.10e}"


class _IOFailure(Exception):
    pass


def _write_text(path: Path, text: str) -> None:
    try:
        atomic_write_bytes(path, text.encode("utf-8"))
    except OSError as exc:
        raise _IOFailure(f"cannot write {path}: {exc}") from exc


def _write_field(path: Path, f: ScalarField) -> None:
    try:
        write_field(path, f)
    except OSError as exc:
        raise _IOFailure(f"cannot write {path}: {exc}") from exc


def _load_initial(cfg: RunConfig, file_key: str = "file", prefix: str = "") -> ScalarField:
    grid = cfg.grid()
    path = cfg.initial_file(file_key)
    if path is not None:
        try:
            f = read_field(path)
        except FileNotFoundError as exc:
            raise _IOFailure(f"initial field {path} not found") from exc
        except OSError as exc:
            raise _IOFailure(f"cannot read {path}: {exc}") from exc
        except FormatError as exc:
            raise ConfigError(f"{cfg.where('initial', file_key)}: {path}: {exc}") from exc
        if f.grid != grid:
            raise ConfigError(f"{cfg.where('initial', file_key)}: field grid {f.grid} does not match [grid] {grid}")
        return f
    amp, width, center = cfg.gaussian(prefix)
    try:
        return gaussian_initial(grid, amp, width, center)
    except ValueError as exc:
        raise ConfigError(f"{cfg.where('initial', prefix + 'width')}: {exc}") from exc


# -- commands -------------------------------------------------------------


def cmd_ml(args: argparse.Namespace) -> int:
    try:
        value = mittag_leffler(args.alpha, args.z, args.beta)
    except (ValueError, ConvergenceError, OverflowError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(fmt_fixed(value))
    return EXIT_OK


def cmd_mode_oracle(args: argparse.Namespace) -> int:
    try:
        grid = TimeGrid(args.t_end, args.steps)
        y = solve_scalar_mode(args.lam, args.alpha, grid)
    except (ValueError, InstabilityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    lines = ["t,y"] + [f"{fmt(t)},{fmt(v)}" for t, v in zip(grid.nodes, y)]
    text = "\n".join(lines) + "\n"
    if args.out:
        _write_text(Path(args.out) / "mode_oracle.csv", text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_evolve_linear(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_path(args.config)
    grid = cfg.grid()
    alpha = cfg.alpha()
    t_end = cfg.t_end()
    steps = cfg.get_int("time", "steps", 1, lambda v: v >= 1, "steps >= 1")
    formats = cfg.formats()
    out_dir = cfg.output_dir(args.out)
    u0 = _load_initial(cfg)
    times = [0.0] if t_end == 0.0 else list(TimeGrid(t_end, steps).nodes)
    rows = ["t,p,norm"]
    final = u0
    for t in times:
        # each time is evolved from the data: there is no semigroup to chain
        field_t = u0 if t == 0.0 else evolve_homogeneous(u0, alpha, t)
        for p in ("1", "2", "inf"):
            rows.append(f"{fmt(t)},{p},{fmt(field_norm(field_t, p))}")
        final = field_t
    if "frdf" in formats:
        _write_field(out_dir / "field.frdf", final)
    if "csv" in formats:
        _write_text(out_dir / "norms.csv", "\n".join(rows) + "\n")
    log.info("evolve-linear: wrote outputs to %s", out_dir)
    return EXIT_OK


def _outcome_json(out: RunOutcome, name: str) -> dict:
    return {
        "component": name,
        "status": out.status.value,
        "t_star": out.t_star,
        "max_sup_norm": out.max_sup_norm,
        "picard_iters": out.picard_iters,
        "clamped_samples": out.clamped_samples,
        "reason": out.reason,
    }


def _run_log(outs: list[tuple[str, RunOutcome]]) -> str:
    """One JSON object per node (t, sup-norm, Picard iterations of its window)."""
    ref = outs[0][1]
    iters = [0] * len(ref.sup_norm_history)
    lo = 1
    for hi, count in zip(ref.window_ends, ref.picard_iters_history):
        for j in range(lo, min(hi, len(iters) - 1) + 1):
            iters[j] = count
        lo = hi + 1
    lines = []
    for j, (t, _) in enumerate(ref.sup_norm_history):
        rec: dict = {"t": float(fmt(t))}
        for name, out in outs:
            key = f"sup_norm_{name}" if len(outs) > 1 else "sup_norm"
            rec[key] = float(fmt(out.sup_norm_history[j][1]))
        rec["iterations"] = iters[j]
        lines.append(json.dumps(rec))
    for name, out in outs:
        lines.append(json.dumps({"event": "outcome", **_fix_floats(_outcome_json(out, name))}))
    return "\n".join(lines) + "\n"


def _fix_floats(d: dict) -> dict:
    return {k: (float(fmt(v)) if isinstance(v, float) else v) for k, v in d.items()}


def _checkpoints(out_dir: Path, name: str, out: RunOutcome, every: int) -> None:
    if out.trajectory is None:
        return
    grid = out.final.grid
    last = len(out.trajectory) - 1
    nodes = sorted(set(range(0, last + 1, every)) | {last}) if every > 0 else [last]
    for j in nodes:
        _write_field(out_dir / f"{name}_{j:06d}.frdf", ScalarField(grid, out.trajectory[j]))


def _finish_run(cfg: RunConfig, args, outs: list[tuple[str, RunOutcome]]) -> int:
    formats = cfg.formats()
    out_dir = cfg.output_dir(args.out)
    every = cfg.checkpoint_every()
    if "jsonl" in formats:
        _write_text(out_dir / "run_log.jsonl", _run_log(outs))
    if "frdf" in formats:
        for name, out in outs:
            _checkpoints(out_dir, name, out, every)
    summary = [_fix_floats(_outcome_json(out, name)) for name, out in outs]
    if "json" in formats:
        _write_text(out_dir / "outcome.json", json.dumps(summary, indent=2) + "\n")
    status = outs[0][1].status
    t_star = outs[0][1].t_star
    print(f"status={status.value} t_star={fmt(t_star)} max_sup_norm={fmt(max(o.max_sup_norm for _, o in outs))}")
    return _STATUS_EXIT[status]


def cmd_evolve_semilinear(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_path(args.config)
    alpha = cfg.alpha()
    spec = cfg.source_spec()
    u0 = _load_initial(cfg)
    solve = cfg.solve_config(cfg.time_grid(), float(np.max(np.abs(u0.values))))
    out = evolve_semilinear(u0, spec, alpha, solve)
    return _finish_run(cfg, args, [("u", out)])


def cmd_evolve_system(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_path(args.config)
    alpha = cfg.alpha()
    beta = cfg.alpha("beta")
    spec_uv = cfg.source_spec("1", "p")
    spec_vu = cfg.source_spec("2", "q")
    u0 = _load_initial(cfg)
    v0 = _load_initial(cfg, "v_file", "v_")
    sup0 = max(float(np.max(np.abs(u0.values))), float(np.max(np.abs(v0.values))))
    solve = cfg.solve_config(cfg.time_grid(), sup0)
    out_u, out_v = evolve_system(u0, v0, spec_uv, spec_vu, alpha, beta, solve)
    return _finish_run(cfg, args, [("u", out_u), ("v", out_v)])


def cmd_exponent(args: argparse.Namespace) -> int:
    try:
        scalar = fujita.ExponentInputs(args.N, args.alpha, args.sigma, args.rho)
        result: dict = {"p_c": fujita.critical_exponent_scalar(scalar)}
        if args.p is not None:
            result["lambda"] = fujita.lambda_exponent(args.p, scalar)
        if args.q is not None:
            if args.p is None:
                raise ValueError("the system exponents need both --p and --q")
            sys_in = fujita.SystemExponentInputs(
                args.N,
                args.alpha,
                args.beta if args.beta is not None else args.alpha,
                args.p,
                args.q,
                args.sigma1,
                args.sigma2,
                args.rho1,
                args.rho2,
            )
            l1, l2 = fujita.l_exponents(sys_in)
            b = fujita.system_dimension_bounds(sys_in)
            result.update(
                l1=l1,
                l2=l2,
                bounds={
                    "bound1": b.bound1,
                    "bound2": b.bound2,
                    "blowup_predicted": b.blowup_predicted,
                    "sign_l1_over_q_plus_l2": b.sign1,
                    "sign_l1_plus_l2_over_p": b.sign2,
                },
            )
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(json.dumps(_round_json(result), indent=2))
    return EXIT_OK


def _round_json(obj):
    if isinstance(obj, dict):
        return {k: _round_json(v) for k, v in obj.items()}
    if isinstance(obj, float) and math.isfinite(obj):
        return float(fmt(obj))
    return obj


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = RunConfig.from_path(args.config)
    sweep_cfg = cfg.sweep()
    formats = cfg.formats()
    out_dir = cfg.output_dir(args.out)
    try:
        records, boundary = fujita.run_sweep(sweep_cfg, jobs=args.jobs)
    except fujita.BudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    fujita.monotonicity_violations(records)
    if "csv" in formats:
        _write_text(out_dir / "sweep.csv", fujita.records_to_csv(records))
    if boundary is not None and "json" in formats:
        _write_text(out_dir / "boundary.json", boundary.to_json())
    if boundary is None:
        print("no boundary: the smallest amplitude never switched from BlowUp to Global (heuristic sweep)")
        return EXIT_NO_BOUNDARY
    print(
        f"p_c_theory={fmt(boundary.p_c_theory)} p_c_empirical={fmt(boundary.p_c_empirical)} "
        f"half_width={fmt(boundary.half_width)} (heuristic finite-box surrogate)"
    )
    return EXIT_OK


# -- parser ---------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracstokes", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ml", help="evaluate E_{alpha,beta}(z)")
    p.add_argument("alpha", type=float)
    p.add_argument("beta", type=float)
    p.add_argument("z", type=float)
    p.set_defaults(func=cmd_ml)

    p = sub.add_parser("mode-oracle", help="time-step one Fourier mode (CSV t,y)")
    p.add_argument("lam", type=float, metavar="lambda")
    p.add_argument("alpha", type=float)
    p.add_argument("--t-end", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=1024)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_mode_oracle)

    for name, func, help_ in (
        ("evolve-linear", cmd_evolve_linear, "homogeneous evolution: FRDF field and norm CSV"),
        ("evolve-semilinear", cmd_evolve_semilinear, "Picard mild solution of the scalar equation"),
        ("evolve-system", cmd_evolve_system, "Picard mild solution of the coupled system"),
    ):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config")
        p.add_argument("--out", default=None, help="output directory (overrides [output] dir)")
        p.set_defaults(func=func)

    p = sub.add_parser("exponent", help="critical exponents as JSON")
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--sigma", type=float, default=0.0)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--p", type=float, default=None)
    p.add_argument("--q", type=float, default=None, help="enables the system exponents")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--sigma1", type=float, default=0.0)
    p.add_argument("--sigma2", type=float, default=0.0)
    p.add_argument("--rho1", type=float, default=0.0)
    p.add_argument("--rho2", type=float, default=0.0)
    p.set_defaults(func=cmd_exponent)

    p = sub.add_parser("sweep", help="empirical Fujita sweep: CSV plus boundary JSON")
    p.add_argument("config")
    p.add_argument("--out", default=None)
    p.add_argument("--jobs", type=int, default=None, help="worker processes (default: CPU count)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValueError as exc:  # includes ConfigError
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except _IOFailure as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
