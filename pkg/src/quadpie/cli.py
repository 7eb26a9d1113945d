"""Command line entry point: ``quadpie {analyze,sweep,simulate,selftest,export}``.

Every command writes a JSON report (``--out``) and a short summary to stdout.
Exit codes: 0 certified or completed, 1 infeasible, 2 unknown or solver
failure, 3 input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import platform
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .benchmarks import BENCHMARKS, NAMES
from .pde2pie import IllPosed, PDESpec, SpecError, assemble_pie
from .polykernel import to_fraction

SCHEMA_VERSION = "1.0"
EXIT_OK, EXIT_INFEASIBLE, EXIT_UNKNOWN, EXIT_INPUT = 0, 1, 2, 3

log = logging.getLogger("quadpie")


class InputError(Exception):
    """Bad command line or input file; maps to exit code 3."""


def _fraction(text: str) -> Fraction:
    try:
        return to_fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def _common(p: argparse.ArgumentParser, need_r: bool = True):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--benchmark", choices=NAMES, help="named reference system")
    src.add_argument("--spec", type=Path, help="PDE description (JSON); '{r}' is replaced by --r")
    if need_r:
        p.add_argument("--r", type=_fraction, default=Fraction(0), help="system parameter (default 0)")
    p.add_argument("--out", type=Path, help="write the JSON report here")


def _sdp_options(p: argparse.ArgumentParser):
    p.add_argument("--eps", type=float, default=1e-4)
    p.add_argument("--delta", type=float, default=1e-6)
    p.add_argument("--degrees", type=int, nargs=2, metavar=("D1", "D2"), help="monomial degrees of P")
    p.add_argument("--neg-extra", type=int, default=None, help="extra degree for the negativity factor")
    p.add_argument("--klin-tol", type=float, default=None, help="bound on K_lin coefficients (0 = exact)")
    p.add_argument("--solver", default="CLARABEL", help="cvxpy solver name")
    p.add_argument("--check-tol", type=float, default=1e-6)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="quadpie", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="certify stability at one parameter value")
    _common(p)
    _sdp_options(p)

    p = sub.add_parser("sweep", help="bisect for the largest certified parameter")
    _common(p, need_r=False)
    _sdp_options(p)
    p.add_argument("--bracket", type=_fraction, nargs=2, metavar=("CERTIFIED", "UNCERTIFIED"))
    p.add_argument("--tol-r", type=float, default=1e-3)

    p = sub.add_parser("simulate", help="integrate the PIE from an initial condition")
    _common(p)
    p.add_argument("--n", type=int, default=24, help="collocation nodes")
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--t-end", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0, help="seed of the random initial condition")
    p.add_argument("--amplitude", type=float, default=1.0, help="L2 norm of the initial u")
    p.add_argument("--save-every", type=int, default=10)
    p.add_argument("--csv", type=Path, help="write t, V, u_norm, residual here")
    p.add_argument("--certificate", action="store_true", help="also solve for P and trace V(t)")
    _sdp_options(p)

    p = sub.add_parser("selftest", help="exact oracle checks of the operator algebra")
    p.add_argument("--instances", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", type=Path)

    p = sub.add_parser("export", help="write the stability SDP in SDPA sparse format")
    _common(p)
    _sdp_options(p)
    p.add_argument("--sdpa", type=Path, required=True, help="output .dat-s path")
    return ap


# --------------------------------------------------------------------------
# inputs


def _family(args):
    """(name, r -> PDESpec) for the selected input."""
    if args.benchmark:
        return args.benchmark, BENCHMARKS[args.benchmark].builder
    try:
        text = args.spec.read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{args.spec}: {exc.strerror}") from None

    def build(r):
        return PDESpec.from_json(text.replace("{r}", str(to_fraction(r))))

    build(Fraction(0))  # surface spec errors before any solving
    return str(args.spec), build


def _sdp_settings(args) -> dict:
    preset = BENCHMARKS[args.benchmark] if getattr(args, "benchmark", None) else None
    degrees = tuple(args.degrees) if args.degrees else (preset.degrees if preset else (2, 2))
    klin_tol = args.klin_tol if args.klin_tol is not None else (preset.klin_tol if preset else 0.0)
    neg_extra = args.neg_extra if args.neg_extra is not None else (preset.neg_extra if preset else 0)
    if min(degrees) < 0 or klin_tol < 0 or neg_extra < 0 or args.eps <= 0 or args.delta <= 0:
        raise InputError("degrees, --neg-extra and --klin-tol must be non-negative; --eps and --delta positive")
    return {
        "degrees": list(degrees),
        "eps": args.eps,
        "delta": args.delta,
        "klin_tol": klin_tol,
        "neg_extra": neg_extra,
        "solver": args.solver,
        "check_tol": args.check_tol,
    }


def _stability_family(builder, name, cfg):
    from .lpi_sdp import StabilityFamily

    return StabilityFamily(
        builder,
        tuple(cfg["degrees"]),
        cfg["eps"],
        cfg["delta"],
        neg_extra=cfg["neg_extra"],
        name=name,
        klin_tol=cfg["klin_tol"],
    )


def _config_echo(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if isinstance(v, Path):
            v = str(v)
        elif isinstance(v, Fraction):
            v = str(v)
        elif isinstance(v, (list, tuple)):
            v = [str(x) if isinstance(x, Fraction) else x for x in v]
        out[k] = v
    return out


# --------------------------------------------------------------------------
# commands


def _analyze(args, report) -> int:
    from .lpi_sdp import certify

    name, builder = _family(args)
    cfg = _sdp_settings(args)
    report["settings"] = cfg
    t0 = time.perf_counter()
    fam = _stability_family(builder, name, cfg)
    report["timings"]["assembly_s"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    verdict, cert, prob = certify(fam, args.r, cfg["solver"], cfg["check_tol"], return_problem=True)
    report["timings"]["solve_s"] = time.perf_counter() - t0
    report["problem"] = prob.metadata
    report["r"] = str(args.r)
    if verdict == "certified":
        report["verdict"] = "stable-certified"
        report["certificate"] = cert.to_json()
        report["residuals"] = cert.residuals
        print(
            f"{name} r={args.r}: stable-certified  mu={cert.mu:.6g}  decay rate={cert.decay_rate:.3e}  "
            f"transient={cert.transient:.4g}"
        )
        return EXIT_OK
    if verdict == "infeasible":
        report["verdict"] = "infeasible-at-degree"
        print(f"{name} r={args.r}: infeasible at degrees {tuple(cfg['degrees'])}")
        return EXIT_INFEASIBLE
    report["verdict"] = "unknown"
    if cert is not None:
        report["residuals"] = cert.residuals
    report["detail"] = verdict
    print(f"{name} r={args.r}: unknown ({verdict})")
    return EXIT_UNKNOWN


def _sweep(args, report) -> int:
    from .lpi_sdp import SweepError, sweep

    name, builder = _family(args)
    cfg = _sdp_settings(args)
    report["settings"] = cfg
    if args.bracket:
        bracket = tuple(args.bracket)
    elif args.benchmark:
        bracket = BENCHMARKS[args.benchmark].bracket
    else:
        raise InputError("--bracket is required with --spec")
    t0 = time.perf_counter()
    fam = _stability_family(builder, name, cfg)
    try:
        res = sweep(fam, bracket, tol_r=args.tol_r, backend=cfg["solver"])
    except SweepError as exc:
        report["verdict"] = "unknown"
        report["detail"] = str(exc)
        print(f"{name}: {exc}")
        return EXIT_UNKNOWN
    report["timings"]["sweep_s"] = time.perf_counter() - t0
    report["verdict"] = "stable-certified"
    report["thresholds"] = res.to_json()
    if res.certificate is not None:
        report["certificate"] = res.certificate.to_json()
        report["residuals"] = res.certificate.residuals
    print(f"{name}: certified up to r = {float(res.r_star):.6g}; not certified at r = {float(res.r_fail):.6g}")
    return EXIT_OK


def random_initial_state(disc, seed: int, amplitude: float, modes: int = 6) -> np.ndarray:
    """Nodal ``v`` for a random smooth ``v`` scaled so that ``||T v||_2 = amplitude``."""
    rng = np.random.default_rng(seed)
    a, b = float(disc.domain.a), float(disc.domain.b)
    z = (disc.nodes - a) / (b - a)
    coefs = rng.normal(size=modes) / (1.0 + np.arange(modes))
    v = sum(c * np.cos(np.pi * k * z) for k, c in enumerate(coefs))
    u = disc.Th @ v
    norm = float(np.sqrt(u @ (disc.weights * u)))
    return v * (amplitude / norm)


def _simulate(args, report) -> int:
    from .simulate import BlowUp, discretize, integrate, lyapunov_trace, pde_residual, write_csv

    name, builder = _family(args)
    spec = builder(args.r)
    if args.n < 4 or args.dt <= 0 or args.t_end <= 0 or args.save_every < 1:
        raise InputError("need --n >= 4, positive --dt and --t-end, --save-every >= 1")
    t0 = time.perf_counter()
    pie = assemble_pie(spec)
    disc = discretize(pie, args.n)
    v0 = random_initial_state(disc, args.seed, args.amplitude)
    status = EXIT_OK
    try:
        traj = integrate(disc, v0, args.t_end, args.dt, save_every=args.save_every)
        report["verdict"] = "completed"
    except BlowUp as exc:
        traj = exc.trajectory
        report["verdict"] = "blow-up"
        report["detail"] = str(exc)
        status = EXIT_UNKNOWN
    report["timings"]["simulate_s"] = time.perf_counter() - t0
    norms = traj.u_norms(disc.weights)
    summary = {"t": traj.times.tolist(), "u_norm": norms.tolist()}
    residual = pde_residual(traj, spec, disc) if len(traj.times) > 2 else None
    if residual is not None:
        summary["residual_max"] = float(np.max(residual))
    if args.certificate:
        from .lpi_sdp import certify

        cfg = _sdp_settings(args)
        report["settings"] = cfg
        verdict, cert, _ = certify(_stability_family(builder, name, cfg), args.r, cfg["solver"], cfg["check_tol"], return_problem=True)
        report["certificate_verdict"] = verdict
        if cert is not None and verdict == "certified":
            V, rise = lyapunov_trace(traj, cert.P, disc)
            env = cert.bound(norms[0] ** 2, traj.times)
            summary["V"] = V.tolist()
            summary["max_relative_V_increase"] = rise
            summary["max_envelope_violation"] = float(np.max((norms**2 - env) / np.maximum(env, 1e-300)))
    report["trajectory"] = summary
    if args.csv:
        write_csv(args.csv, traj, disc.weights, residual)
    print(f"{name} r={args.r}: {report['verdict']} to t = {traj.times[-1]:.4g}; ||u|| {norms[0]:.4g} -> {norms[-1]:.4g}")
    return status


def _selftest(args, report) -> int:
    from .selftest import run_selftest

    t0 = time.perf_counter()
    checks = run_selftest(args.instances, args.seed)
    report["timings"]["selftest_s"] = time.perf_counter() - t0
    report["checks"] = [
        {"name": c.name, "instances": c.instances, "passed": c.passed, "failures": c.failures, "seconds": c.seconds}
        for c in checks
    ]
    for c in checks:
        print(f"{'PASS' if c.passed else 'FAIL'}  {c.name} ({c.instances} instances, {c.seconds:.2f}s)")
        for f in c.failures[:3]:
            print(f"      {f}")
    ok = all(c.passed for c in checks)
    report["verdict"] = "completed" if ok else "failed"
    return EXIT_OK if ok else EXIT_UNKNOWN


def _export(args, report) -> int:
    from .lpi_sdp import export_sdpa

    name, builder = _family(args)
    cfg = _sdp_settings(args)
    if cfg["klin_tol"] > 0:
        if args.klin_tol is not None:
            raise InputError("SDPA export writes equality-only problems; use --klin-tol 0")
        cfg["klin_tol"] = 0.0  # presets with a tolerance fall back to exact rows
    report["settings"] = cfg
    prob = _stability_family(builder, name, cfg).problem(args.r)
    export_sdpa(prob, args.sdpa)
    report["verdict"] = "completed"
    report["problem"] = prob.metadata
    report["sdpa"] = str(args.sdpa)
    print(f"wrote {args.sdpa}: {len(prob.rows)} constraints, blocks {[n for _, n in prob.blocks]}")
    return EXIT_OK


COMMANDS = {
    "analyze": _analyze,
    "sweep": _sweep,
    "simulate": _simulate,
    "selftest": _selftest,
    "export": _export,
}


def run(argv=None) -> tuple[int, dict]:
    """Parse ``argv``, run the command and return (exit code, report)."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else EXIT_INPUT
        return (EXIT_OK if code == 0 else EXIT_INPUT), {}
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    report = {
        "schema_version": SCHEMA_VERSION,
        "tool": "quadpie",
        "version": __version__,
        "python": platform.python_version(),
        "command": args.command,
        "config": _config_echo(args),
        "verdict": "unknown",
        "timings": {},
    }
    t0 = time.perf_counter()
    try:
        code = COMMANDS[args.command](args, report)
    except (InputError, SpecError, IllPosed) as exc:
        report["verdict"] = "input-error"
        report["error"] = f"{type(exc).__name__}: {exc}"
        print(f"error: {exc}", file=sys.stderr)
        code = EXIT_INPUT
    report["timings"]["total_s"] = time.perf_counter() - t0
    out = getattr(args, "out", None)
    if out is not None:
        out.write_text(json.dumps(report, indent=2, default=str) + "\n", encoding="utf-8")
    return code, report


def main(argv=None) -> int:
    code, _ = run(argv)
    return code


if __name__ == "__main__":
    sys.exit(main())
