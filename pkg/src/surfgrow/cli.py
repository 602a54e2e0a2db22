"""Command-line experiment runner.

Every subcommand writes into ``<out>/<command>/``.  ``--out`` wins over the
SURFGROW_OUT environment variable; with neither, ``./surfgrow_out`` is used.
Settings are read from an optional INI file (``[run]`` plus a section named
after the command) and overridden by flags.  The resolved settings are echoed
to ``config.ini`` next to the results.

Exit status is 0 on success and 1 on invalid input.  Numerical failure exits
with 2 after writing ``diagnostic.json``.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import blowup, evolve, functionals, inequalities, profiles, semigroup
from .field import FourierField, InvalidFieldError, read_snapshot, sobolev_norm, write_snapshot

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2
COMMANDS = ("simulate", "picard", "blowup-scan", "profiles", "selfsimilar", "inequality-sweep", "verify")
PRESETS = ("cos1", "sin1", "mode", "random", "complex")


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    def __init__(self, message: str, details: dict | None = None):
        super().__init__(message)
        self.details = details or {}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- parsing helpers -------------------------------------------------------------------

def _range(text: str) -> list:
    """``a:b:n`` gives n evenly spaced values from a to b; a single number gives one value."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            return [float(parts[0])]
        if len(parts) != 3:
            raise ValueError
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a:b:n or a number, got {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError("range count must be >= 1")
    return [float(x) for x in np.linspace(a, b, n)]


def _int_list(text: str) -> list:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _coeff_list(text: str) -> dict:
    """``j:re[:im],...`` into a mode dictionary."""
    modes = {}
    for item in text.split(","):
        if not item.strip():
            continue
        bits = item.split(":")
        try:
            j = int(bits[0])
            val = complex(float(bits[1]), float(bits[2]) if len(bits) > 2 else 0.0)
        except (ValueError, IndexError):
            raise argparse.ArgumentTypeError(f"bad coefficient entry {item!r}; expected j:re[:im]") from None
        modes[j] = val
    return modes


def _add_data_args(p):
    g = p.add_argument_group("initial data")
    g.add_argument("--preset", choices=PRESETS, default="cos1")
    g.add_argument("--snapshot", help="read initial data from a snapshot file")
    g.add_argument("--coeffs", type=_coeff_list, help="explicit coefficients j:re[:im],...")
    g.add_argument("--complex-data", action="store_true", help="treat --coeffs as a complex field")
    g.add_argument("--amplitude", type=float, default=1.0)
    g.add_argument("--mode", type=int, default=1)
    g.add_argument("--slope", type=float, default=-1.1, help="spectral slope of the random preset")
    g.add_argument("--A", type=float, default=1.0)
    g.add_argument("--rho", type=float, default=0.7)
    g.add_argument("--sign", type=float, default=1.0)


def _add_grid_args(p, K=128, T=0.1, dt=1e-4):
    p.add_argument("--K", type=int, default=K)
    p.add_argument("--L", type=float, default=2 * math.pi)
    p.add_argument("--T", type=float, default=T)
    p.add_argument("--dt", type=float, default=dt)


def _add_stepper_args(p):
    p.add_argument("--dt-min", type=float, default=1e-13)
    p.add_argument("--scheme", choices=evolve.SCHEMES, default="ETDRK4")
    p.add_argument("--record-every", type=int, default=1)
    p.add_argument("--norm-cap", type=float, default=1e8)
    p.add_argument("--adapt-target", type=float, default=1e-8)
    p.add_argument("--fixed-step", action="store_true", help="disable step-doubling control")


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="INI file with [run] and per-command sections")
    common.add_argument("--out", help="output root (default: $SURFGROW_OUT or ./surfgrow_out)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--jobs", type=int, default=1)

    parser = _Parser(prog="surfgrow", description="Surface growth equation experiments.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="integrate and record diagnostics")
    _add_grid_args(p)
    _add_stepper_args(p)
    _add_data_args(p)
    p.add_argument("--snapshots", action="store_true", help="write every recorded state")

    p = sub.add_parser("picard", parents=[common], help="Picard iteration of the mild formulation")
    _add_grid_args(p, K=32, T=0.1, dt=1e-4)
    _add_data_args(p)
    p.add_argument("--alpha", type=float, default=0.25)
    p.add_argument("--iterations", type=int, default=8)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--grid", type=int, default=256)
    p.add_argument("--threshold-fraction", type=float,
                   help="rescale the data to this fraction of the measured contraction threshold")
    p.add_argument("--compare", action="store_true", help="compare the last iterate with a direct run")

    p = sub.add_parser("blowup-scan", parents=[common], help="complex-data blow-up search")
    p.add_argument("--complex", action="store_true", required=True, help="use the complex preset")
    p.add_argument("--A-range", type=_range, default=_range("0.5:2:4"))
    p.add_argument("--rho-range", type=_range, default=_range("0.5:0.9:5"))
    p.add_argument("--sign", type=float, default=1.0, help="+1 or -1 multiplying every coefficient")
    p.add_argument("--K", type=int, default=16)
    p.add_argument("--T", type=float, default=0.01)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--norm-cap", type=float, default=1e6)
    p.add_argument("--adapt-target", type=float, default=1e-6)
    p.add_argument("--record-every", type=int, default=5)

    p = sub.add_parser("profiles", parents=[common], help="stationary profile residuals")
    p.add_argument("--case", type=int, choices=(1, 2, 3), default=3)
    p.add_argument("--b", type=float, default=1.0)
    p.add_argument("--c1", type=float, default=0.0)
    p.add_argument("--c2", type=float, default=0.0)
    p.add_argument("--L", type=float, default=2 * math.pi)
    p.add_argument("--delta", type=float, default=0.05)

    p = sub.add_parser("selfsimilar", parents=[common], help="self-similar profile search")
    p.add_argument("--Y", type=_float_list, default=[10.0])
    p.add_argument("--guesses", type=int, default=50)
    p.add_argument("--n-points", type=int, default=401)
    p.add_argument("--bc", choices=("decay", "free"), default="decay")
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--dump-profiles", action="store_true")

    p = sub.add_parser("inequality-sweep", parents=[common], help="trilinear estimate sweep")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--K", type=_int_list, default=[64, 128])
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--hill-steps", type=int, default=500)
    p.add_argument("--allow-inadmissible", action="store_true")

    p = sub.add_parser("verify", parents=[common], help="run built-in identity checks")
    p.add_argument("--suite", choices=("trivial",), default="trivial")
    return parser


def _config_defaults(path: str, command: str) -> dict:
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keys such as K and T are case-sensitive
    if not cp.read(path):
        raise UsageError(f"cannot read config file {path!r}")
    out = {}
    for section in ("run", command):
        if cp.has_section(section):
            for k, v in cp.items(section):
                out[k.replace("-", "_")] = v
    return out


def parse_args(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        raise UsageError("missing command; choose one of " + ", ".join(COMMANDS))
    if args.config:
        values = _config_defaults(args.config, args.command)
        sub = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in sub._actions}
        converted = {}
        for k, v in values.items():
            if k not in known:
                raise UsageError(f"unknown config key {k!r} for {args.command}")
            action = known[k]
            if action.type is not None:
                try:
                    converted[k] = action.type(v)
                except (argparse.ArgumentTypeError, ValueError) as e:
                    raise UsageError(f"config key {k!r}: {e}") from None
            elif isinstance(action, argparse._StoreTrueAction):
                converted[k] = v.strip().lower() in ("1", "true", "yes", "on")
            else:
                converted[k] = v
        sub.set_defaults(**converted)
        args = parser.parse_args(argv)
    return args


# -- shared plumbing ------------------------------------------------------------------

def _out_dir(args) -> Path:
    root = args.out or os.environ.get("SURFGROW_OUT") or "surfgrow_out"
    d = Path(root) / args.command
    d.mkdir(parents=True, exist_ok=True)
    return d


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".17g")
    if isinstance(v, (list, tuple)):
        return ",".join(_fmt(x) for x in v)
    if isinstance(v, dict):
        return ",".join(f"{k}:{_fmt(x)}" for k, x in sorted(v.items()))
    return str(v)


def echo_config(args, out: Path) -> None:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    skip = {"config", "out"}
    cp[args.command] = {k: _fmt(v) for k, v in sorted(vars(args).items()) if k not in skip and v is not None}
    with open(out / "config.ini", "w") as fh:
        cp.write(fh)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not serializable: {type(o)}")


def write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1, default=_json_default)
        fh.write("\n")


def initial_data(args) -> FourierField:
    K, L = args.K, args.L
    if args.snapshot:
        try:
            u, _ = read_snapshot(args.snapshot)
        except OSError as e:
            raise UsageError(f"cannot read snapshot {args.snapshot!r}: {e.strerror}") from None
        return u
    if args.coeffs:
        return FourierField.from_modes(K, args.coeffs, L, real=not args.complex_data)
    amp = args.amplitude
    if args.preset == "cos1":
        return FourierField.from_modes(K, {1: 0.5 * amp}, L)
    if args.preset == "sin1":
        return FourierField.from_modes(K, {1: -0.5j * amp}, L)
    if args.preset == "mode":
        return FourierField.from_modes(K, {args.mode: 0.5 * amp}, L)
    if args.preset == "random":
        rng = np.random.default_rng(args.seed)
        j = np.arange(1, K + 1)
        c = amp * (rng.normal(size=K) + 1j * rng.normal(size=K)) * j ** args.slope
        return FourierField.from_modes(K, dict(zip(j.tolist(), c)), L)
    return blowup.complex_preset(K, args.A, args.rho, L, sign=args.sign)


# -- commands -------------------------------------------------------------------------

def cmd_simulate(args, out: Path) -> int:
    h0 = initial_data(args)
    cfg = evolve.StepperConfig(dt=args.dt, dt_min=args.dt_min, scheme=args.scheme, norm_cap=args.norm_cap,
                               adapt_target=args.adapt_target, record_every=args.record_every,
                               adaptive=not args.fixed_step)
    traj = evolve.simulate(h0, args.T, cfg)
    traj.to_csv(out / "trajectory.csv")
    write_snapshot(out / "final.snap", traj.states[-1], traj.times[-1])
    if args.snapshots:
        traj.write_snapshots(out / "snapshots")
    summary = {
        "termination": traj.termination,
        "t_end": traj.times[-1],
        "n_records": len(traj),
        "n_accepted": traj.n_accepted,
        "n_rejected": traj.n_rejected,
        "energy_residual": functionals.energy_residual(traj) if h0.real else None,
        "final_sobolev": {str(k): v for k, v in traj.records[-1].sobolev.items()},
    }
    if h0.real:
        summary["lyapunov_monotone_violation"] = {
            str(a): functionals.lyapunov_monotone_violation(traj, a) for a in functionals.LYAPUNOV_ALPHAS}
    write_json(out / "summary.json", summary)
    print(f"simulate: {traj.termination} at t={traj.times[-1]:.6g}, {len(traj)} records")
    if summary["energy_residual"] is not None:
        print(f"energy_residual = {summary['energy_residual']:.3e}")
    if traj.termination != "completed":
        raise NumericalFailure(f"run stopped early: {traj.termination}", summary)
    return EXIT_OK


def cmd_picard(args, out: Path) -> int:
    h0 = initial_data(args)
    result = {"alpha": args.alpha, "T": args.T}
    if args.threshold_fraction is not None:
        thr = evolve.contraction_threshold(h0, args.alpha, args.T)
        h0 = h0 * (args.threshold_fraction * thr / sobolev_norm(h0, 0.5))
        result["threshold"] = thr
    state = evolve.picard_iterate(h0, args.alpha, args.T, n_iter=args.iterations, delta=args.delta,
                                  n_grid=args.grid)
    result.update(k_norms=state.k_norms, diff_k_norms=state.diff_k_norms, ratios=state.ratios,
                  diverged_at=state.diverged_at)
    if args.compare and state.diverged_at is None:
        traj = evolve.simulate(h0, args.T, evolve.StepperConfig(dt=args.dt, record_every=10 ** 9))
        diff = sobolev_norm(state.field_at(-1) - traj.states[-1], 0.5)
        result["direct_difference_half"] = diff
        result["direct_relative_half"] = diff / max(sobolev_norm(traj.states[-1], 0.5), 1e-300)
    write_json(out / "picard.json", result)
    print("picard ratios: " + " ".join(f"{r:.4g}" for r in state.ratios))
    if state.diverged_at is not None:
        raise NumericalFailure(f"iteration diverged at iterate {state.diverged_at}", result)
    return EXIT_OK


def cmd_blowup_scan(args, out: Path) -> int:
    if args.sign not in (1.0, -1.0):
        raise UsageError("--sign must be 1 or -1")
    cfg = evolve.StepperConfig(dt=args.dt, norm_cap=args.norm_cap, adapt_target=args.adapt_target,
                               record_every=args.record_every)
    cells = blowup.blowup_scan(args.A_range, args.rho_range, K=args.K, T=args.T, cfg=cfg, s=args.s,
                               sign=args.sign, jobs=args.jobs)
    with open(out / "scan.json", "w") as fh:
        fh.write(blowup.scan_to_json(cells) + "\n")
    capped = [c for c in cells if c.termination != "completed"]
    consistent = [c for c in cells if c.consistent]
    print(f"blowup-scan: {len(cells)} cells, {len(capped)} terminated early, {len(consistent)} Leray-consistent")
    return EXIT_OK


def cmd_profiles(args, out: Path) -> int:
    p = profiles.StationaryProfile(args.case, c1=args.c1, c2=args.c2, b=args.b, L=args.L)
    res = profiles.stationary_residual(p, args.delta)
    # log|g| repeats when g(x + L) = +-g(x), i.e. b L is a multiple of pi
    periodic = args.case == 3 and abs(args.b * args.L / math.pi - round(args.b * args.L / math.pi)) < 1e-12
    report = {"case": args.case, "b": args.b, "c1": args.c1, "c2": args.c2, "L": args.L, "B": p.B,
              "residual": res, "singular_points": list(p.singular_points), "periodic": periodic}
    write_json(out / "profile.json", report)
    print(f"profiles: case {args.case} residual = {res:.3e}")
    return EXIT_OK


def _selfsimilar_job(task):
    Y, seed, n_points, bc, amp = task
    prob = profiles.SelfSimilarProblem(Y, n_points, bc)
    r = profiles.self_similar_solve(prob, profiles.random_guess(Y, seed, amplitude=amp))
    return Y, seed, r


def cmd_selfsimilar(args, out: Path) -> int:
    tasks = [(float(Y), args.seed * 100_003 + i, args.n_points, args.bc, args.amplitude)
             for Y in args.Y for i in range(args.guesses)]
    if args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            results = list(ex.map(_selfsimilar_job, tasks))
    else:
        results = [_selfsimilar_job(t) for t in tasks]
    rows = []
    for Y, seed, r in results:
        rows.append({"Y": Y, "seed": seed, "residual": r.final_residual, "best_residual": r.best_residual,
                     "outcome": r.outcome, "reason": r.reason, "iterations": r.iterations,
                     "no_solution_found": profiles.nonexistence_consistent(r)})
        if args.dump_profiles:
            y = profiles.SelfSimilarProblem(Y, args.n_points, args.bc).y
            profiles.write_profile(out / f"profile_Y{Y:g}_seed{seed}.txt", y, r.profile)
    with open(out / "summary.json", "w") as fh:
        fh.write(profiles.summary_json(rows) + "\n")
    print(f"{'Y':>6} {'collapsed':>10} {'stalled':>8} {'converged':>10} {'diverged':>9}")
    for Y in args.Y:
        sel = [r for r in rows if r["Y"] == float(Y)]
        n = {k: sum(r["outcome"] == k for r in sel) for k in ("collapsed", "stalled", "converged", "diverged")}
        print(f"{Y:>6g} {n['collapsed']:>10} {n['stalled']:>8} {n['converged']:>10} {n['diverged']:>9}")
    return EXIT_OK


def cmd_inequality_sweep(args, out: Path) -> int:
    t = inequalities.ExponentTriple(args.alpha, args.beta, args.gamma)
    rep = inequalities.trilinear_sup(t, args.K, samples=args.samples, seed=args.seed, hill_steps=args.hill_steps,
                                     jobs=args.jobs, require_admissible=not args.allow_inadmissible)
    with open(out / "report.json", "w") as fh:
        fh.write(rep.to_json() + "\n")
    print("inequality-sweep: " + ", ".join(f"K={k}: {v:.6g}" for k, v in rep.per_K.items()))
    print("stability quotients: " + " ".join(f"{s:.4f}" for s in rep.stability))
    return EXIT_OK


def trivial_checks() -> list:
    """(name, passed) for the closed-form identities with exact expected values."""
    from .field import derivative, lebesgue_norm, nonlinearity_B
    K = 8
    e1 = FourierField.from_modes(K, {1: 1.0}, real=False)
    e2 = FourierField.from_modes(K, {2: 1.0}, real=False)
    cos1 = FourierField.from_modes(K, {1: 0.5})
    sin1 = FourierField.from_modes(K, {1: -0.5j})
    zero = FourierField.zeros(K)
    zero_traj = evolve.simulate(zero, 0.01, evolve.StepperConfig(dt=1e-3))
    checks = []

    def add(name, ok):
        checks.append((name, bool(ok)))

    add("single mode norm is 1", all(abs(sobolev_norm(e1, a) - 1) < 1e-14 for a in (0, 0.5, 1, 2)))
    add("cos norm is 1/sqrt2", all(abs(sobolev_norm(cos1, a) - 2 ** -0.5) < 1e-14 for a in (0, 0.5, 1, 2)))
    add("mode 2 half norm is sqrt2", abs(sobolev_norm(e2, 0.5) - 2 ** 0.5) < 1e-14)
    add("zeroth derivative is identity", np.array_equal(derivative(cos1, 0).coeffs, cos1.coeffs))
    add("derivative of sin is cos", np.max(np.abs(derivative(sin1, 1).coeffs - cos1.coeffs)) < 1e-14)
    add("fourth derivative of e^{2ix}", np.max(np.abs(derivative(e2, 4).coeffs - 16 * e2.coeffs)) < 1e-13)
    add("B with zero factor", np.all(nonlinearity_B(zero, cos1).coeffs == 0))
    add("sup of derivative of cos", abs(lebesgue_norm(cos1, math.inf, 1) - 1) < 1e-12)
    add("semigroup at t=0", np.array_equal(semigroup.apply_semigroup(cos1, 0.0).coeffs, cos1.coeffs))
    add("semigroup on e^{ix}", np.max(np.abs(semigroup.apply_semigroup(e1, 1.0).coeffs - math.exp(-1) * e1.coeffs)) < 1e-15)
    add("fractional power 0", np.array_equal(semigroup.apply_fractional_power(cos1, 0).coeffs, cos1.coeffs))
    add("fractional power 1/4 on e^{2ix}",
        np.max(np.abs(semigroup.apply_fractional_power(e2, 0.25).coeffs - 2 * e2.coeffs)) < 1e-14)
    add("smoothing constant at 0", semigroup.smoothing_constant(0) == 1)
    add("step of zero", np.all(evolve.step(zero, 1e-3).coeffs == 0))
    add("zero trajectory", zero_traj.termination == "completed" and all(np.all(u.coeffs == 0) for u in zero_traj.states))
    st = evolve.picard_iterate(cos1, 0.25, 0.1, n_iter=1)
    grid = st.time_grid
    free = np.exp(-np.outer(grid, cos1.basis.kappa4)) * cos1.coeffs
    add("first Picard iterate is free evolution", np.max(np.abs(st.iterates[0] - free)) < 1e-15)
    add("star norm of zero", evolve.star_norm(zero_traj, 0.25, 0.01) == 0)
    add("integrability norm of zero", evolve.integrability_norm(zero_traj, 0.25, 0.01) == 0)
    add("energy residual of zero", functionals.energy_residual(zero_traj) == 0)
    add("Lyapunov value of zero", abs(functionals.lyapunov_value(zero, 1.0) - 2 * math.pi) < 1e-12)
    add("Lyapunov residual of zero", functionals.lyapunov_identity_residual(zero_traj, 1.0) == 0)
    add("cubic residual of zero", functionals.cubic_identity_residual(zero_traj) == 0)
    add("budgets of zero", all(functionals.budget(zero_traj, k, p).value == 0
                                for k, p in (("H", 1.0), ("W14", None), ("C1", None))))
    env = blowup.OdeEnvelope(2.0, 1.0, (0.0, 1.0))
    add("envelope at anchor", blowup.envelope_upper(env, 0.0) == 1.0)
    tt = np.linspace(0, 0.9, 50)
    q = blowup.leray_exponent(1.0)
    c_low, ok = blowup.leray_lower_check((tt, 3 * (1 - tt) ** -q), 1.0, 1.0, tail_fraction=1.0)
    add("manufactured Leray constant", abs(c_low - 3) < 1e-12 and ok)
    w1 = blowup.regularity_window(cos1, 1.0, 1.0)
    w2 = blowup.regularity_window(cos1 * 2.0, 1.0, 1.0)
    add("window scaling", abs(w1 / w2 - 2 ** 8) < 1e-9 * 2 ** 8)
    ts = np.linspace(0, 0.99, 200)
    rep = blowup.fit_blowup((ts, 2 * (1 - ts) ** -q), 1.0, tail_fraction=1.0)
    add("synthetic blow-up fit", abs(rep.exponent_est - q) < 1e-3 and abs(rep.t0_est - 1) < 1e-4)
    lhs, total, ok = blowup.singular_budget(zero_traj, [], 1.0)
    add("empty singular budget", lhs == [] and total == 0 and ok)
    mixed, expo = blowup.exp_blowup_indicator(zero_traj, 1.0, 1.0, 0.5)
    add("exponential indicator of zero", np.all(mixed == 0) and np.allclose(expo, 2 * math.pi, rtol=1e-14))
    add("stationary singular point",
        profiles.stationary_eval(profiles.StationaryProfile(3, b=1.0), math.pi / 2) == -math.inf)
    add("constant stationary residual", profiles.stationary_residual(profiles.StationaryProfile(1), 0.05) == 0)
    r0 = profiles.self_similar_solve(profiles.SelfSimilarProblem(5.0, 101), lambda y: 0 * y)
    add("self-similar zero guess", r0.best_residual == 0 and r0.converged_to_zero)
    add("easy sum gamma 0", inequalities.sum_easy(0.0, 10) == 20)
    add("condition (0,0,1)", inequalities.condition_holds(inequalities.ExponentTriple(0, 0, 1)))
    w3 = FourierField.from_modes(K, {5: 1.0}, real=False)
    add("orthogonal w", inequalities.trilinear_ratio(e1, e1, w3, inequalities.ExponentTriple(0, 0, 1)) == 0)
    return checks


def cmd_verify(args, out: Path) -> int:
    checks = trivial_checks()
    lines = [f"{'PASS' if ok else 'FAIL'} {name}" for name, ok in checks]
    (out / "verify.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    failed = sum(not ok for _, ok in checks)
    print(f"verify: {len(checks) - failed}/{len(checks)} passed")
    return EXIT_OK if failed == 0 else EXIT_INVALID


HANDLERS = {
    "simulate": cmd_simulate,
    "picard": cmd_picard,
    "blowup-scan": cmd_blowup_scan,
    "profiles": cmd_profiles,
    "selfsimilar": cmd_selfsimilar,
    "inequality-sweep": cmd_inequality_sweep,
    "verify": cmd_verify,
}


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    out = None
    try:
        args = parse_args(argv)
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        out = _out_dir(args)
        echo_config(args, out)
        return HANDLERS[args.command](args, out)
    except (UsageError, InvalidFieldError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalFailure, evolve.StepFailure, FloatingPointError, OverflowError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        if out is not None:
            details = getattr(e, "details", {})
            write_json(out / "diagnostic.json", {"error": str(e), "type": type(e).__name__, **details})
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
