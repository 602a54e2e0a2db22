"""Monitored functionals: energy, exponential Lyapunov functional, cubic
functional, and time-integrated norm budgets.

Physical-space integrals use the trapezoidal rule on the field's quadrature
grid.  For complex-valued states the integrands are evaluated on the real
part of h.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .field import FourierField, lebesgue_norm, sobolev_norm

SOBOLEV_INDICES = (0.5, 1.0, 2.0)
LYAPUNOV_ALPHAS = (0.5, 1.0, 1.5)

CSV_COLUMNS = ("t", "l2_sq", "h2_sq", "dissip", "h_half", "h1", "h2", "sup", "c1", "w14",
               "lyap_0.5", "lyap_1.0", "lyap_1.5", "cubic", "quartic_grad")


@dataclass
class DiagnosticsRecord:
    t: float
    l2_sq: float
    h2_sq: float
    dissipation_integral: float
    sobolev: dict
    sup_norm: float
    c1_norm: float
    w14_norm: float
    lyapunov: dict
    log_lyapunov: dict
    # int e^{a h} h_xx^2 and int e^{a h} h_x^4, keyed by a
    lyapunov_terms: dict
    cubic: float
    cubic_hessian: float  # int h h_xx^2
    quartic_gradient: float

    def csv_row(self) -> list:
        return [self.t, self.l2_sq, self.h2_sq, self.dissipation_integral,
                self.sobolev.get(0.5, math.nan), self.sobolev.get(1.0, math.nan),
                self.sobolev.get(2.0, math.nan), self.sup_norm, self.c1_norm, self.w14_norm,
                self.lyapunov.get(0.5, math.nan), self.lyapunov.get(1.0, math.nan),
                self.lyapunov.get(1.5, math.nan), self.cubic, self.quartic_gradient]


def _grid_derivs(u: FourierField):
    b = u.basis
    n = b.n_quad
    h = b.to_grid(u.coeffs, n).real
    hx = b.to_grid(b.derivative(u.coeffs, 1), n).real
    hxx = b.to_grid(b.derivative(u.coeffs, 2), n).real
    return h, hx, hxx, u.L / n


def dissipation_rate(u: FourierField) -> float:
    """``|h_xx|^2_{L^2}``, the integrand of the energy dissipation."""
    return u.L * sobolev_norm(u, 2.0) ** 2


def _log_exp_integral(h: np.ndarray, a: float, dx: float, weight=None) -> float:
    """log of int e^{a h} (weight) dx, evaluated with the max factored out."""
    z = a * h
    top = z.max()
    g = np.exp(z - top)
    if weight is not None:
        g = g * weight
    s = np.sum(g) * dx
    return top + math.log(s) if s > 0 else -math.inf


def _exp_or_inf(x: float) -> float:
    return math.exp(x) if x < 709.0 else math.inf


def lyapunov_value(u: FourierField, alpha: float) -> float:
    """``int_0^L exp(alpha h) dx``; +inf on overflow."""
    h, _, _, dx = _grid_derivs(u)
    return _exp_or_inf(_log_exp_integral(h, alpha, dx))


def diagnose(u: FourierField, t: float, dissipation_integral: float = 0.0,
             sobolev_indices=SOBOLEV_INDICES, lyapunov_alphas=LYAPUNOV_ALPHAS) -> DiagnosticsRecord:
    h, hx, hxx, dx = _grid_derivs(u)
    lyap, log_lyap, terms = {}, {}, {}
    for a in lyapunov_alphas:
        log_lyap[a] = _log_exp_integral(h, a, dx)
        lyap[a] = _exp_or_inf(log_lyap[a])
        terms[a] = (_exp_or_inf(_log_exp_integral(h, a, dx, hxx ** 2)),
                    _exp_or_inf(_log_exp_integral(h, a, dx, hx ** 4)))
    return DiagnosticsRecord(
        t=float(t),
        l2_sq=u.L * sobolev_norm(u, 0.0) ** 2,
        h2_sq=sobolev_norm(u, 2.0) ** 2,
        dissipation_integral=float(dissipation_integral),
        sobolev={a: sobolev_norm(u, a) for a in sobolev_indices},
        sup_norm=float(np.max(np.abs(h))),
        c1_norm=float(np.max(np.abs(h)) + np.max(np.abs(hx))),
        w14_norm=lebesgue_norm(u, 4, 0) + lebesgue_norm(u, 4, 1),
        lyapunov=lyap,
        log_lyapunov=log_lyap,
        lyapunov_terms=terms,
        cubic=float(np.sum(h ** 3) * dx),
        cubic_hessian=float(np.sum(h * hxx ** 2) * dx),
        quartic_gradient=float(np.sum(hx ** 4) * dx),
    )


# -- trajectory functionals ---------------------------------------------------

def _records(traj):
    recs = getattr(traj, "records", traj)
    if len(recs) == 0:
        raise ValueError("empty trajectory")
    return recs


def _centered_derivative(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    """d f / dt at interior points, second order on nonuniform spacing."""
    h0 = t[1:-1] - t[:-2]
    h1 = t[2:] - t[1:-1]
    # weighted one-sided slopes; exact zero on constant data
    back = (f[1:-1] - f[:-2]) / h0
    fwd = (f[2:] - f[1:-1]) / h1
    return (h1 * back + h0 * fwd) / (h0 + h1)


def trapezoid_running(t: np.ndarray, f: np.ndarray) -> np.ndarray:
    out = np.zeros_like(f, dtype=float)
    out[1:] = np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(t))
    return out


def energy_residual(traj, stride: int | None = None) -> float:
    """max_t | |h(t)|^2 + 2 int_0^t |h_xx|^2 - |h(0)|^2 | / |h(0)|^2.

    By default uses the dissipation integral accumulated by the stepper.  With
    ``stride`` the integral is recomputed by the trapezoidal rule from every
    ``stride``-th record only (quadrature sensitivity check).
    """
    recs = _records(traj)
    e0 = recs[0].l2_sq
    if e0 == 0:
        return 0.0
    if stride is None:
        t = None
        l2 = np.array([r.l2_sq for r in recs])
        diss = np.array([r.dissipation_integral for r in recs])
    else:
        sel = list(recs[::stride])
        if sel[-1] is not recs[-1]:
            sel.append(recs[-1])
        t = np.array([r.t for r in sel])
        l2 = np.array([r.l2_sq for r in sel])
        rate = np.array([r.h2_sq for r in sel]) * _length(traj)
        diss = trapezoid_running(t, rate)
    return float(np.max(np.abs(l2 + 2 * diss - e0)) / e0)


def _length(traj) -> float:
    states = getattr(traj, "states", None)
    if states:
        return states[0].L
    return 2 * math.pi


def lyapunov_identity_residual(traj, alpha: float, scaled: bool = True) -> float:
    """max over interior records of
    | d/dt int e^{ah} + a^2 int e^{ah} h_xx^2 + (2-a) a^3/3 int e^{ah} h_x^4 |.

    With ``scaled`` the residual is divided by the largest magnitude among the
    three terms, making the tolerance dimensionless.
    """
    recs = _records(traj)
    if len(recs) < 3:
        raise ValueError("need at least three records for centered differences")
    t = np.array([r.t for r in recs])
    val = np.array([r.lyapunov[alpha] for r in recs])
    hess = np.array([r.lyapunov_terms[alpha][0] for r in recs])[1:-1]
    quart = np.array([r.lyapunov_terms[alpha][1] for r in recs])[1:-1]
    dval = _centered_derivative(t, val)
    a = alpha
    terms = (dval, a ** 2 * hess, (2 - a) * a ** 3 / 3 * quart)
    res = np.abs(terms[0] + terms[1] + terms[2])
    if scaled:
        scale = max(1e-300, max(float(np.max(np.abs(x))) for x in terms))
        res = res / scale
    return float(np.max(res))


def lyapunov_monotone_violation(traj, alpha: float) -> float:
    """Largest increase of int e^{alpha h} between consecutive records."""
    vals = np.array([r.lyapunov[alpha] for r in _records(traj)])
    if vals.size < 2:
        return 0.0
    return float(max(0.0, np.max(np.diff(vals))))


def cubic_identity_residual(traj, hessian_coeff: float = 1.0, scaled: bool = True) -> float:
    """max over interior records of
    | (1/3) d/dt int h^3 + c int h h_xx^2 + (4/3) int h_x^4 |,  c = hessian_coeff.

    ``hessian_coeff=1`` is the form printed with the cubic blow-up criterion;
    integrating -int h^2 h_xxxx by parts twice gives ``c = 2`` (the quantity
    conserved exactly by smooth solutions).
    """
    recs = _records(traj)
    if len(recs) < 3:
        return 0.0
    t = np.array([r.t for r in recs])
    cub = np.array([r.cubic for r in recs])
    hess = np.array([r.cubic_hessian for r in recs])[1:-1]
    quart = np.array([r.quartic_gradient for r in recs])[1:-1]
    terms = (_centered_derivative(t, cub) / 3, hessian_coeff * hess, 4.0 / 3.0 * quart)
    res = np.abs(terms[0] + terms[1] + terms[2])
    if scaled:
        scale = max(1.0, max(float(np.max(np.abs(x))) for x in terms))
        res = res / scale
    return float(np.max(res)) if res.size else 0.0


# -- budgets ------------------------------------------------------------------

@dataclass
class BudgetReport:
    name: str
    exponent: float
    value: float
    critical: bool
    extra: dict = field(default_factory=dict)


def _window(traj, t_start, t_end):
    times = np.asarray(traj.times, dtype=float)
    lo = times[0] if t_start is None else t_start
    hi = times[-1] if t_end is None else t_end
    sel = np.nonzero((times >= lo - 1e-15) & (times <= hi + 1e-15))[0]
    return times[sel], [traj.states[i] for i in sel]


def _time_integral(t, f):
    if t.size < 2:
        return 0.0
    return float(np.sum(0.5 * (f[1:] + f[:-1]) * np.diff(t)))


def budget(traj, kind: str, param: float | None = None, t_start: float | None = None,
           t_end: float | None = None) -> BudgetReport:
    """Time integral of a critical-norm power over recorded states.

    kind: ``"H"`` (param = alpha in (1/2, 9/2)), ``"W14"``, ``"C1"``, or
    ``"H1H3"`` (param = r in (0, 10)); the last returns both sides of
    ``int |h_xxx|^{r/5} <= C (int |h_x|^r)^{(10-r)/5}`` and their ratio.
    """
    t, states = _window(traj, t_start, t_end)
    if kind == "H":
        a = param
        if a is None or not 0.5 < a < 4.5:
            raise ValueError(f"Sobolev budget needs alpha in (1/2, 9/2), got {a}")
        p = 8 / (2 * a - 1)
        f = np.array([sobolev_norm(u, a) ** p for u in states])
        return BudgetReport(f"H^{a:g}", p, _time_integral(t, f), True)
    if kind == "W14":
        p = 16 / 3
        f = np.array([(lebesgue_norm(u, 4, 0) + lebesgue_norm(u, 4, 1)) ** p for u in states])
        return BudgetReport("W^{1,4}", p, _time_integral(t, f), True)
    if kind == "C1":
        f = np.array([(lebesgue_norm(u, math.inf, 0) + lebesgue_norm(u, math.inf, 1)) ** 4
                      for u in states])
        return BudgetReport("C^1", 4.0, _time_integral(t, f), True)
    if kind == "H1H3":
        r = param
        if r is None or not 0 < r < 10:
            raise ValueError(f"H1->H3 budget needs r in (0, 10), got {r}")
        hx = np.array([math.sqrt(u.L) * sobolev_norm(u, 1.0) for u in states])
        hxxx = np.array([math.sqrt(u.L) * sobolev_norm(u, 3.0) for u in states])
        lhs = _time_integral(t, hxxx ** (r / 5))
        rhs = _time_integral(t, hx ** r) ** ((10 - r) / 5)
        ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
        return BudgetReport(f"H1->H3(r={r:g})", r / 5, lhs, False,
                            {"lhs": lhs, "rhs": rhs, "ratio": ratio})
    raise ValueError(f"unknown budget kind {kind!r}")


def poincare_decay_violation(traj) -> float:
    """max_t of (|h(t)|^2 - e^{-2 kmin^4 t}|h(0)|^2)/|h(0)|^2, positive if violated."""
    recs = _records(traj)
    L = _length(traj)
    kmin4 = (2 * math.pi / L) ** 4
    e0 = recs[0].l2_sq
    if e0 == 0:
        return 0.0
    t0 = recs[0].t
    return float(max((r.l2_sq - math.exp(-2 * kmin4 * (r.t - t0)) * e0) / e0 for r in recs))
