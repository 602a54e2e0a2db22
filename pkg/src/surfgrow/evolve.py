"""Time integration of h_t = -h_xxxx - (h_x^2)_xx and Picard iteration of
the mild formulation.

In Fourier variables each mode obeys

    d/dt c_j = -kappa_j^4 c_j - B(h, h)_j,

which is stepped with an exponential integrator (ETDRK4 by default) that
treats the quartic symbol exactly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .field import FourierField, ModeBasis, _require_valid, basis as make_basis, sobolev_norm, write_snapshot
from .functionals import CSV_COLUMNS, DiagnosticsRecord, diagnose

SCHEMES = ("ETDRK4", "IFRK4")


class StepFailure(ArithmeticError):
    """A step produced non-finite amplitudes (blow-up or step too large)."""


# -- phi functions -------------------------------------------------------------

def phi_functions(z: np.ndarray, switch: float = 0.5, terms: int = 24):
    """phi_1, phi_2, phi_3 of z; Taylor series for |z| < switch, closed form otherwise."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < switch
    phis = []
    zs = np.where(small, z, 0.0)
    for k in (1, 2, 3):
        ser = np.zeros_like(z)
        term = np.full_like(z, 1.0 / math.factorial(k))
        for n in range(terms):
            ser = ser + term
            term = term * zs / (n + k + 1)
        phis.append(ser)
    zb = np.where(small, 1.0, z)
    ez = np.exp(zb)
    p1 = (ez - 1) / zb
    p2 = (ez - 1 - zb) / zb ** 2
    p3 = (ez - 1 - zb - zb ** 2 / 2) / zb ** 3
    return (np.where(small, phis[0], p1), np.where(small, phis[1], p2),
            np.where(small, phis[2], p3))


# -- steppers --------------------------------------------------------------------

class Stepper:
    """Exponential stepper on raw coefficient arrays for one ModeBasis."""

    def __init__(self, basis: ModeBasis, scheme: str = "ETDRK4"):
        if scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
        self.basis = basis
        self.scheme = scheme
        self._cache: dict = {}

    def rhs_nonlinear(self, c: np.ndarray) -> np.ndarray:
        return -self.basis.B(c, c)

    def _coefficients(self, dt: float):
        co = self._cache.get(dt)
        if co is not None:
            return co
        z = -dt * self.basis.kappa4
        E = np.exp(z)
        E2 = np.exp(z / 2)
        if self.scheme == "ETDRK4":
            p1h, _, _ = phi_functions(z / 2)
            p1, p2, p3 = phi_functions(z)
            co = (E, E2, 0.5 * dt * p1h, dt * (p1 - 3 * p2 + 4 * p3),
                  dt * (2 * p2 - 4 * p3), dt * (-p2 + 4 * p3))
        else:
            co = (E, E2)
        if len(self._cache) > 64:
            self._cache.clear()
        self._cache[dt] = co
        return co

    def step(self, c: np.ndarray, dt: float) -> np.ndarray:
        N = self.rhs_nonlinear
        if self.scheme == "ETDRK4":
            E, E2, Q, f1, f2, f3 = self._coefficients(dt)
            Na = N(c)
            a = E2 * c + Q * Na
            Nb = N(a)
            b = E2 * c + Q * Nb
            Nc = N(b)
            cc = E2 * a + Q * (2 * Nc - Na)
            Nd = N(cc)
            out = E * c + f1 * Na + f2 * (Nb + Nc) + f3 * Nd
        else:
            E, E2 = self._coefficients(dt)
            k1 = N(c)
            k2 = N(E2 * (c + 0.5 * dt * k1))
            k3 = N(E2 * c + 0.5 * dt * k2)
            k4 = N(E * c + dt * E2 * k3)
            out = E * c + dt / 6 * (E * k1 + 2 * E2 * (k2 + k3) + k4)
        out[..., self.basis.K] = 0.0
        if not np.all(np.isfinite(out)):
            raise StepFailure(f"non-finite amplitudes after step dt={dt:g}")
        return out


def step(u: FourierField, dt: float, scheme: str = "ETDRK4") -> FourierField:
    """One step of size ``dt``; raises StepFailure on non-finite output."""
    _require_valid(u)
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    out = Stepper(u.basis, scheme).step(u.coeffs, dt)
    return FourierField(out, u.L, u.real)


# -- simulation --------------------------------------------------------------------

@dataclass
class StepperConfig:
    dt: float = 1e-3
    dt_min: float = 1e-13
    scheme: str = "ETDRK4"
    norm_cap: float = 1e8
    adapt_target: float = 1e-8
    record_every: int = 1
    adaptive: bool = True

    def __post_init__(self):
        if not 0 < self.dt_min <= self.dt:
            raise ValueError(f"need 0 < dt_min <= dt, got dt={self.dt}, dt_min={self.dt_min}")
        if not self.norm_cap > 0:
            raise ValueError("norm_cap must be positive")
        if not self.adapt_target > 0:
            raise ValueError("adapt_target must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")


@dataclass
class Trajectory:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    records: list = field(default_factory=list)
    termination: str | None = None
    n_accepted: int = 0
    n_rejected: int = 0
    last_dt: float = math.nan

    def append(self, t: float, u: FourierField, rec: DiagnosticsRecord) -> None:
        if self.times and not t > self.times[-1]:
            raise ValueError("trajectory times must increase strictly")
        self.times.append(float(t))
        self.states.append(u)
        self.records.append(rec)

    def finish(self, cause: str) -> None:
        if self.termination is not None:
            raise RuntimeError("termination already set")
        self.termination = cause

    def __len__(self):
        return len(self.times)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for rec in self.records:
                w.writerow([format(float(x), ".17g") for x in rec.csv_row()])

    def write_snapshots(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        for i, (t, u) in enumerate(zip(self.times, self.states)):
            write_snapshot(d / f"snap_{i:06d}.txt", u, t)


def simulate(h0: FourierField, T: float, cfg: StepperConfig | None = None, **diag_kw) -> Trajectory:
    """Integrate from ``h0`` to ``T`` or until a termination cause.

    With ``cfg.adaptive`` each step is checked by step doubling: the step is
    redone as two half steps and the difference, measured in |.|_2, must not
    exceed ``adapt_target * (1 + |h|_2)``.  Rejected steps halve dt; dt is
    doubled back (never above ``cfg.dt``) after comfortably accurate steps.
    """
    _require_valid(h0)
    cfg = cfg or StepperConfig()
    if not T > 0:
        raise ValueError("T must be positive")
    b = h0.basis
    stepper = Stepper(b, cfg.scheme)
    L = h0.L
    traj = Trajectory()
    c = np.array(h0.coeffs)
    t = 0.0
    diss = 0.0
    rate = L * float(b.sobolev_sq(c, 2.0))
    traj.append(t, h0, diagnose(h0, t, diss, **diag_kw))
    dt = min(cfg.dt, T)
    since_record = 0

    def record(c_arr):
        u = FourierField(c_arr, L, h0.real)
        traj.append(t, u, diagnose(u, t, diss, **diag_kw))

    while True:
        remaining = T - t
        if remaining <= 1e-14 * max(T, 1.0):
            if since_record:
                record(c)
            traj.finish("completed")
            break
        h = min(dt, remaining)
        try:
            if cfg.adaptive:
                full = stepper.step(c, h)
                half = stepper.step(stepper.step(c, h / 2), h / 2)
                err = math.sqrt(float(b.sobolev_sq(full - half, 2.0)))
                tol = cfg.adapt_target * (1.0 + math.sqrt(float(b.sobolev_sq(half, 2.0))))
                if not err <= tol:
                    raise StepFailure("local error above target")
                c_new = half
            else:
                err, tol = 0.0, 1.0
                c_new = stepper.step(c, h)
        except StepFailure:
            traj.n_rejected += 1
            dt = h / 2
            if dt < cfg.dt_min:
                if since_record:
                    record(c)
                traj.finish("dt_underflow")
                break
            continue
        rate_new = L * float(b.sobolev_sq(c_new, 2.0))
        diss += 0.5 * h * (rate + rate_new)
        rate = rate_new
        t += h
        c = c_new
        traj.n_accepted += 1
        traj.last_dt = h
        since_record += 1
        if h == dt and err < tol / 64 and dt < cfg.dt:
            dt = min(2 * dt, cfg.dt)
        if math.sqrt(rate_new / L) > cfg.norm_cap:
            record(c)
            traj.finish("norm_cap_hit")
            break
        if since_record >= cfg.record_every:
            record(c)
            since_record = 0
    return traj


# -- mild formulation ------------------------------------------------------------------

@dataclass
class PicardState:
    alpha: float
    horizon: float
    time_grid: np.ndarray
    iterates: list
    k_norms: list
    diff_k_norms: list
    delta: float
    L: float
    real: bool
    diverged_at: int | None = None

    @property
    def ratios(self) -> list:
        """K(T, h_{n+1} - h_n) / K(T, h_n - h_{n-1}) for n >= 1, with h_0 = 0."""
        d = self.diff_k_norms
        return [d[i + 1] / d[i] for i in range(len(d) - 1) if d[i] > 0]

    def field_at(self, i: int = -1, iterate: int = -1) -> FourierField:
        return FourierField(self.iterates[iterate][i], self.L, self.real)

    @property
    def times(self):
        return self.time_grid

    @property
    def coefficient_samples(self):
        return self.iterates[-1]


def graded_grid(T: float, n: int, grading: float = 4.0) -> np.ndarray:
    return T * (np.arange(n + 1) / n) ** grading


class DuhamelQuadrature:
    """Product trapezoid rule for D(t_i) = int_0^{t_i} e^{-(t_i-s)A} N(s) ds.

    N is interpolated linearly on each subinterval and the exponential factor
    is integrated exactly, giving the recursion
    D_i = e^{-lam dt} D_{i-1} + dt[(phi1 - phi2)(-lam dt) N_{i-1} + phi2(-lam dt) N_i].
    """

    def __init__(self, grid: np.ndarray, basis: ModeBasis):
        self.grid = grid
        dts = np.diff(grid)
        z = -np.multiply.outer(dts, basis.kappa4)
        p1, p2, _ = phi_functions(z)
        self.E = np.exp(z)
        self.w_left = dts[:, None] * (p1 - p2)
        self.w_right = dts[:, None] * p2

    def __call__(self, Nv: np.ndarray) -> np.ndarray:
        D = np.zeros_like(Nv)
        for i in range(1, Nv.shape[0]):
            D[i] = self.E[i - 1] * D[i - 1] + self.w_left[i - 1] * Nv[i - 1] + self.w_right[i - 1] * Nv[i]
        return D


def _k_norm(samples: np.ndarray, grid: np.ndarray, basis: ModeBasis, alpha: float) -> float:
    theta = (2 * alpha + 1) / 8
    vals = grid[1:] ** theta * np.sqrt(basis.sobolev_sq(samples[1:], 1 + alpha))
    return float(np.max(vals)) if vals.size else 0.0


def mild_map(h0: FourierField, samples: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """F(h)(t_i) = e^{-t_i A} h0 - int_0^{t_i} e^{-(t_i-s)A} (h_x^2)_xx(s) ds on the grid.

    The minus sign follows from writing h_t = -Ah - B(h, h) in Duhamel form.
    """
    b = h0.basis
    free = np.exp(-np.multiply.outer(grid, b.kappa4)) * h0.coeffs
    return free - DuhamelQuadrature(grid, b)(b.B(samples, samples))


def picard_iterate(h0: FourierField, alpha: float, T: float, n_iter: int = 8,
                   delta: float = 1.0, n_grid: int = 256, grading: float = 4.0) -> PicardState:
    """Iterates h_{n+1} = F(h_n) starting from h_0 = 0, so h_1 = e^{-tA} h0.

    Successive differences are propagated through the exact bilinear identity
    F(h) - F(k) = -int e^{-(t-s)A} B(h - k, h + k) ds, which avoids cancellation
    once the iterates have converged to many digits.
    """
    _require_valid(h0)
    if not 0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 1/2), got {alpha}")
    if not T > 0:
        raise ValueError("T must be positive")
    if n_grid < 2 or grading < 1:
        raise ValueError("need n_grid >= 2 and grading >= 1")
    b = h0.basis
    grid = graded_grid(T, n_grid, grading)
    duh = DuhamelQuadrature(grid, b)
    h_prev = np.zeros((grid.size, b.modes.size), dtype=complex)
    h = np.exp(-np.multiply.outer(grid, b.kappa4)) * h0.coeffs
    d = h.copy()
    state = PicardState(alpha, T, grid, [h], [_k_norm(h, grid, b, alpha)],
                        [_k_norm(d, grid, b, alpha)], delta, h0.L, h0.real)
    for n in range(1, n_iter):
        d = -duh(b.B(d, h + h_prev))
        h_prev, h = h, h + d
        state.iterates.append(h)
        state.k_norms.append(_k_norm(h, grid, b, alpha))
        state.diff_k_norms.append(_k_norm(d, grid, b, alpha))
        if not math.isfinite(state.k_norms[-1]) or state.k_norms[-1] > 10 * delta:
            state.diverged_at = n + 1
            break
    return state


def contraction_threshold(shape: FourierField, alpha: float, T: float, target_ratio: float = 0.5,
                          n_grid: int = 256, tol: float = 1e-3) -> float:
    """Measured small-data threshold in |h0|_{1/2}.

    The returned value is the amplitude a at which the first measured
    contraction ratio K(T, h_3 - h_2) / K(T, h_2 - h_1) of the Picard map
    for ``a * shape / |shape|_{1/2}`` reaches ``target_ratio``.
    """
    unit = shape * (1.0 / sobolev_norm(shape, 0.5))

    def ratio(a):
        st = picard_iterate(unit * a, alpha, T, n_iter=3, delta=math.inf, n_grid=n_grid)
        r = st.ratios
        return r[1] if len(r) > 1 else math.inf

    lo, hi = 1e-8, 1.0
    while ratio(hi) < target_ratio:
        lo, hi = hi, hi * 4
        if hi > 1e8:
            return math.inf
    while hi / lo > 1 + tol:
        mid = math.sqrt(lo * hi)
        if ratio(mid) < target_ratio:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


# -- critical-norm diagnostics on sampled solutions ----------------------------------------

def _samples(obj):
    if isinstance(obj, PicardState):
        return np.asarray(obj.time_grid), obj.iterates[-1], make_basis(obj.iterates[-1].shape[1] // 2, obj.L)
    if len(obj.times) == 0:
        raise ValueError("empty trajectory")
    return (np.asarray(obj.times, dtype=float), np.stack([u.coeffs for u in obj.states]),
            obj.states[0].basis)


def star_norm(traj, alpha: float, T: float) -> float:
    """(sum_k kappa_k^{2(1+a)} (sup_{0<s<=T} s^theta |c_k(s)|)^2)^{1/2}."""
    t, C, b = _samples(traj)
    theta = (1 + 2 * alpha) / 8
    sel = (t > 0) & (t <= T * (1 + 1e-12))
    if not np.any(sel):
        return 0.0
    sup_k = np.max(t[sel, None] ** theta * np.abs(C[sel]), axis=0)
    w = np.zeros(b.modes.size)
    w[b.nonzero] = b.abs_kappa[b.nonzero] ** (2 * (1 + alpha))
    return float(math.sqrt(np.sum(w * sup_k ** 2)))


def weighted_sup_norm(traj, alpha: float, T: float) -> float:
    """Sampled ||h||_{alpha,T} = sup_{0<s<=T} s^theta |h(s)|_{1+alpha}."""
    t, C, b = _samples(traj)
    sel = (t > 0) & (t <= T * (1 + 1e-12))
    if not np.any(sel):
        return 0.0
    theta = (1 + 2 * alpha) / 8
    return float(np.max(t[sel] ** theta * np.sqrt(b.sobolev_sq(C[sel], 1 + alpha))))


def integrability_norm(traj, alpha: float, T: float) -> float:
    """Trapezoid in time of |h(t)|_{1+alpha}^{8/(1+2 alpha)} over recorded t <= T."""
    t, C, b = _samples(traj)
    sel = t <= T * (1 + 1e-12)
    t, C = t[sel], C[sel]
    if t.size < 2:
        return 0.0
    f = np.sqrt(b.sobolev_sq(C, 1 + alpha)) ** (8 / (1 + 2 * alpha))
    return float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(t)))
