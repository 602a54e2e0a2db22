"""Blow-up diagnostics: Leray lower bounds, ODE envelopes, fitting and search.

A norm that blows up at t0 obeys ``|h(t)|_s >= C (t0 - t)^{-q}`` with
``q = (2s - 1)/8`` for s > 1/2.  The helpers below test trajectories against
that profile and fit (C, q, t0) jointly; the complex-data search preset
sits at the end.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import least_squares

from .evolve import StepperConfig, Trajectory, simulate
from .field import FourierField, _require_valid, sobolev_norm


def leray_exponent(s: float) -> float:
    return (2.0 * s - 1.0) / 8.0


def _check_s(s: float) -> None:
    if not s > 0.5:
        raise ValueError(f"Sobolev index must exceed 1/2, got {s}")


# -- ODE comparison ------------------------------------------------------------------

@dataclass(frozen=True)
class OdeEnvelope:
    """Upper envelope for ``phi' <= C phi^p`` started from ``anchor = (s, phi(s))``."""
    p: float
    C: float
    anchor: tuple

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"envelope exponent must exceed 1, got {self.p}")
        if not self.C > 0:
            raise ValueError(f"envelope constant must be positive, got {self.C}")
        if not self.anchor[1] > 0:
            raise ValueError("anchor value must be positive")

    @property
    def horizon(self) -> float:
        """Time at which the envelope bracket reaches zero."""
        s, phi = self.anchor
        return s + phi ** (-(self.p - 1)) / (self.C * (self.p - 1))


def envelope_upper(env: OdeEnvelope, t: float) -> float:
    s, phi = env.anchor
    if t < s:
        raise ValueError(f"t = {t} precedes the anchor time {s}")
    q = env.p - 1
    bracket = phi ** (-q) - env.C * q * (t - s)
    if bracket <= 0:
        return math.inf
    return bracket ** (-1.0 / q)


# -- Leray lower bound -----------------------------------------------------------------

def _norm_series(source, s: float):
    """(times, |h|_s) from a Trajectory or a ``(times, norms)`` pair."""
    if isinstance(source, Trajectory):
        t = np.asarray(source.times, dtype=float)
        vals = []
        for rec, u in zip(source.records, source.states):
            v = rec.sobolev.get(s)
            vals.append(sobolev_norm(u, s) if v is None else v)
        return t, np.asarray(vals, dtype=float)
    t, v = source
    t = np.asarray(t, dtype=float)
    v = np.asarray(v, dtype=float)
    if t.shape != v.shape or t.ndim != 1:
        raise ValueError("times and norms must be 1-d arrays of equal length")
    return t, v


def _tail(t: np.ndarray, v: np.ndarray, tail_fraction: float):
    if not 0 < tail_fraction <= 1:
        raise ValueError("tail_fraction must lie in (0, 1]")
    start = t[0] + (1.0 - tail_fraction) * (t[-1] - t[0])
    keep = t >= start
    return t[keep], v[keep]


def leray_lower_check(source, s: float, t0: float, tail_fraction: float = 0.5):
    """Return ``(C_lower, ok)`` for the profile ``|h|_s (t0 - t)^q`` over the tail.

    ``ok`` requires C_lower to be positive and above 1e-3 times the median of
    the same quantity, so a tail that sinks towards zero is flagged.
    """
    _check_s(s)
    t, v = _tail(*_norm_series(source, s), tail_fraction)
    if not t0 > t[-1]:
        raise ValueError(f"t0 = {t0} must lie beyond the last recorded time {t[-1]}")
    prod = v * (t0 - t) ** leray_exponent(s)
    c_lower = float(np.min(prod))
    ok = bool(c_lower > 0 and c_lower > 1e-3 * float(np.median(prod)))
    return c_lower, ok


def dyadic_window_constants(source, s: float, t0: float, n_windows: int = 2) -> list:
    """Minimum of ``|h|_s (t0 - t)^q`` on dyadic windows in the distance to t0.

    With d = t0 - t_last, window k collects samples with t0 - t in
    [2^k d, 2^{k+1} d).  Entry 0 is the window closest to t0; empty windows
    give nan.
    """
    _check_s(s)
    t, v = _norm_series(source, s)
    d = t0 - t
    if not d[-1] > 0:
        raise ValueError("t0 must lie beyond the last recorded time")
    prod = v * d ** leray_exponent(s)
    out = []
    for k in range(n_windows):
        lo, hi = d[-1] * 2.0 ** k, d[-1] * 2.0 ** (k + 1)
        sel = (d >= lo) & (d < hi)
        out.append(float(np.min(prod[sel])) if np.any(sel) else math.nan)
    return out


def window_stability(constants: list) -> float:
    """Relative change between the two windows closest to t0."""
    a, b = constants[0], constants[1]
    if not (np.isfinite(a) and np.isfinite(b)) or max(a, b) <= 0:
        return math.inf
    return abs(a - b) / max(a, b)


# -- regularity windows ------------------------------------------------------------------

def regularity_window(u: FourierField, s: float, c_s: float) -> float:
    """Guaranteed regular duration ``(c_s |u|_s^{8/(2s-1)})^{-1}``; zero field gives inf."""
    _require_valid(u)
    _check_s(s)
    if not c_s > 0:
        raise ValueError("c_s must be positive")
    n = sobolev_norm(u, s)
    if n == 0:
        return math.inf
    return 1.0 / (c_s * n ** (8.0 / (2.0 * s - 1.0)))


def norm_growth_rate(u: FourierField, s: float) -> float:
    """Exact ``d/dt |h|_s^2`` for the truncated system at state u."""
    b = u.basis
    c = u.coeffs
    rhs = -b.kappa4 * c - b.B(c, c)
    w = np.zeros(b.abs_kappa.shape)
    w[b.nonzero] = b.abs_kappa[b.nonzero] ** (2 * s)
    return float(2.0 * np.sum(w * np.real(np.conj(c) * rhs)))


def calibrate_window_constant(states, s: float, safety: float = 1.0) -> float:
    """Empirical c_s from the comparison ODE ``phi' <= C phi^p`` with phi = |h|_s^2.

    p = 1 + 4/(2s-1) and C is the largest observed ``phi'/phi^p``; then
    ``c_s = safety * C (p - 1)`` so that the window is the envelope horizon.
    """
    _check_s(s)
    p = 1.0 + 4.0 / (2.0 * s - 1.0)
    best = 0.0
    for u in states:
        phi = sobolev_norm(u, s) ** 2
        if phi == 0:
            continue
        best = max(best, norm_growth_rate(u, s) / phi ** p)
    if best <= 0:
        raise ValueError("no state with growing norm; cannot calibrate")
    return safety * best * (p - 1)


def window_violations(traj: Trajectory, s: float, c_s: float) -> int:
    """Count records whose guaranteed window ends before the next record."""
    t = traj.times
    return sum(1 for i in range(len(t) - 1)
               if t[i] + regularity_window(traj.states[i], s, c_s) < t[i + 1])


# -- fitting ------------------------------------------------------------------------------

@dataclass
class BlowupReport:
    s: float
    t0_est: float
    exponent_est: float
    C_est: float
    leray_margin: float
    window: tuple
    r2: float
    n_samples: int

    def to_json(self) -> str:
        d = asdict(self)
        d["window"] = list(self.window)
        return json.dumps(d, sort_keys=True)


def fit_blowup(source, s: float, tail_fraction: float = 0.5, min_samples: int = 20,
               allow_completed: bool = False) -> BlowupReport:
    """Least-squares fit of ``log|h|_s = log C - q log(t0 - t)`` over the tail.

    The fit is joint in (log C, q, t0) with q > 0 and t0 beyond the window;
    several starting offsets for t0 are tried and the best kept.  A
    trajectory that ran to completion is rejected unless ``allow_completed``.
    """
    _check_s(s)
    if isinstance(source, Trajectory) and source.termination == "completed" and not allow_completed:
        raise ValueError("trajectory completed without a blow-up termination")
    t, v = _tail(*_norm_series(source, s), tail_fraction)
    if t.size < min_samples:
        raise ValueError(f"need at least {min_samples} tail samples, got {t.size}")
    if np.any(v <= 0):
        raise ValueError("norms must be positive to fit on a log scale")
    y = np.log(v)
    ta, tb = float(t[0]), float(t[-1])
    span = tb - ta
    scale = max(span, abs(tb), 1e-300)

    # t0 = tb + exp(z); z bounded so the offset stays resolvable
    def resid(x):
        logc, q, z = x
        return logc - q * np.log(tb - t + math.exp(z)) - y

    z_lo = math.log(scale * 1e-13)
    z_hi = math.log(1e3 * scale)
    best = None
    for frac in (1e-6, 1e-4, 1e-2, 0.1, 1.0, 10.0):
        z0 = min(max(math.log(frac * scale), z_lo + 1), z_hi - 1)
        d0 = tb - t + math.exp(z0)
        # linear least squares for (log C, q) at this t0
        A = np.column_stack([np.ones_like(d0), -np.log(d0)])
        (lc0, q0), *_ = np.linalg.lstsq(A, y, rcond=None)
        q0 = min(max(q0, 1e-6), 50.0)
        try:
            res = least_squares(resid, [lc0, q0, z0], bounds=([-np.inf, 0.0, z_lo], [np.inf, 100.0, z_hi]),
                                x_scale=[1.0, 0.1, 1.0], xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=4000)
        except ValueError:
            continue
        if best is None or res.cost < best.cost:
            best = res
    logc, q, z = best.x
    t0 = tb + math.exp(z)
    ss_res = float(np.sum(best.fun ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    margin = float(np.min(v * (t0 - t) ** leray_exponent(s)))
    return BlowupReport(s=float(s), t0_est=float(t0), exponent_est=float(q), C_est=float(math.exp(logc)),
                        leray_margin=margin, window=(ta, tb), r2=float(r2), n_samples=int(t.size))


# -- singular-time budget -----------------------------------------------------------------

def _dissipation_series(source):
    """(times, |h_xx|_{L^2}^2, |h(0)|_{L^2}^2) from a trajectory or a triple."""
    if isinstance(source, Trajectory):
        L = source.states[0].L
        return (np.asarray(source.times, dtype=float), L * source.column("h2_sq"),
                float(source.records[0].l2_sq))
    t, d, e0 = source
    return np.asarray(t, dtype=float), np.asarray(d, dtype=float), float(e0)


def _integrate(t, f, a, b):
    grid = np.union1d(t[(t > a) & (t < b)], [a, b])
    return float(np.trapezoid(np.interp(grid, t, f), grid))


def interval_ratio(source, interval) -> float:
    """``int_{t1}^{t2} |h_xx|^2 / (t2 - t1)^{1/4}`` on one interval."""
    t, d, _ = _dissipation_series(source)
    a, b = interval
    return _integrate(t, d, a, b) / (b - a) ** 0.25


def singular_budget(source, intervals, c: float):
    """Check ``c (t2 - t1)^{1/4} <= int |h_xx|^2`` on each interval and the total budget.

    Returns ``(lhs, total, ok)`` where ``lhs`` lists the dissipation integrals,
    ``total`` is the sum of ``(t2 - t1)^{1/4}`` and ``ok`` requires every
    interval bound together with ``total <= |h(0)|^2 / (2c)``.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    t, d, e0 = _dissipation_series(source)
    ivs = sorted((float(a), float(b)) for a, b in intervals)
    for a, b in ivs:
        if not a < b:
            raise ValueError(f"empty or reversed interval ({a}, {b})")
        if a < t[0] or b > t[-1]:
            raise ValueError(f"interval ({a}, {b}) leaves the trajectory span")
    for (a1, b1), (a2, b2) in zip(ivs, ivs[1:]):
        if a2 < b1:
            raise ValueError(f"intervals ({a1}, {b1}) and ({a2}, {b2}) overlap")
    lhs = [_integrate(t, d, a, b) for a, b in ivs]
    total = float(sum((b - a) ** 0.25 for a, b in ivs))
    ok = all(c * (b - a) ** 0.25 <= v for (a, b), v in zip(ivs, lhs)) and total <= e0 / (2 * c)
    return lhs, total, bool(ok)


# -- exponential indicator -------------------------------------------------------------

def exp_blowup_indicator(traj: Trajectory, alpha: float, k: float, gamma: float, log: bool = False):
    """Running ``int_0^t int |h_x|^alpha |h|^k`` and the history of ``int e^{-gamma h}``.

    Complex states use the real part in the exponential and moduli in the
    mixed integrand.  Overflowing exponentials are reported as inf; with
    ``log`` the history holds ``log int e^{-gamma h}`` instead, which stays finite.
    """
    if not 0 < alpha < 4:
        raise ValueError("alpha must lie in (0, 4)")
    if k < 0:
        raise ValueError("k must be >= 0")
    g_max = 2 * alpha / (4 - alpha)
    if not 0 < gamma < g_max:
        raise ValueError(f"gamma must lie in (0, {g_max}), got {gamma}")
    mixed, expo = [], []
    for u in traj.states:
        b = u.basis
        n = b.n_quad
        h = b.to_grid(u.coeffs, n)
        hx = b.to_grid(b.derivative(u.coeffs, 1), n)
        dx = u.L / n
        mixed.append(float(np.sum(np.abs(hx) ** alpha * np.abs(h) ** k) * dx))
        x = -gamma * h.real
        m = float(np.max(x))
        log_int = m + math.log(float(np.sum(np.exp(x - m))) * dx)
        expo.append(log_int if log else (math.exp(log_int) if log_int < 700 else math.inf))
    t = np.asarray(traj.times, dtype=float)
    f = np.asarray(mixed)
    running = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (f[1:] + f[:-1]))])
    return running, np.asarray(expo)


# -- complex blow-up search ------------------------------------------------------------

def complex_preset(K: int, A: float, rho: float, L: float = 2 * math.pi, sign: float = 1.0) -> FourierField:
    """Complex data ``c_j = sign * A rho^j`` on modes 1..K, zero on negative modes."""
    if not A > 0:
        raise ValueError("A must be positive")
    if not 0 < rho < 1:
        raise ValueError("rho must lie in (0, 1)")
    if sign not in (1.0, -1.0):
        raise ValueError("sign must be +1 or -1")
    c = np.zeros(2 * K + 1, dtype=complex)
    j = np.arange(1, K + 1)
    c[K + 1:] = sign * A * rho ** j
    return FourierField(c, L, real=False)


@dataclass
class ScanCell:
    A: float
    rho: float
    termination: str
    t_end: float
    final_h2: float
    n_records: int
    fit: dict | None
    leray_windows: list | None
    leray_stability: float | None
    consistent: bool


def _scan_cell(args) -> ScanCell:
    A, rho, K, T, cfg_kw, s, sign = args
    cfg = StepperConfig(**cfg_kw)
    traj = simulate(complex_preset(K, A, rho, sign=sign), T, cfg,
                    sobolev_indices=(0.5, 1.0, 2.0, s), lyapunov_alphas=())
    fit = None
    windows = None
    stab = None
    consistent = False
    if traj.termination != "completed" and len(traj) >= 20:
        try:
            rep = fit_blowup(traj, s, tail_fraction=0.5)
            fit = asdict(rep)
            fit["window"] = list(rep.window)
            windows = dyadic_window_constants(traj, s, rep.t0_est, 2)
            stab = window_stability(windows)
            consistent = bool(stab < 0.3 and rep.leray_margin > 0)
        except ValueError:
            pass
    return ScanCell(A=float(A), rho=float(rho), termination=traj.termination, t_end=float(traj.times[-1]),
                    final_h2=float(traj.records[-1].sobolev[2.0]), n_records=len(traj), fit=fit,
                    leray_windows=windows, leray_stability=stab, consistent=consistent)


def blowup_scan(A_values, rho_values, K: int = 64, T: float = 1.0, cfg: StepperConfig | None = None,
                s: float = 1.0, sign: float = 1.0, jobs: int = 1) -> list:
    """Run the complex preset over the (A, rho) grid; cells sorted by (A, rho)."""
    cfg = cfg or StepperConfig(dt=1e-3, record_every=10)
    cfg_kw = asdict(cfg)
    tasks = [(float(A), float(r), K, T, cfg_kw, s, sign) for A in sorted(A_values) for r in sorted(rho_values)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            cells = list(ex.map(_scan_cell, tasks))
    else:
        cells = [_scan_cell(a) for a in tasks]
    return sorted(cells, key=lambda c: (c.A, c.rho))


def scan_to_json(cells: list) -> str:
    return json.dumps([asdict(c) for c in cells], sort_keys=True, indent=1)
