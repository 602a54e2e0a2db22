"""Closed-form stationary solutions and the self-similar boundary-value problem.

Stationary solutions have the form ``h = c1 + log|g|`` with ``g'' = B g``, so
``h_xx + h_x^2 = g''/g = B`` holds exactly away from the zeros of g.

Self-similar profiles solve ``phi'''' + (phi'^2)'' + y phi' = 0``.  We
discretize on [-Y, Y] with fourth-order centered stencils, clamp
``phi = phi' = 0`` at both ends through even reflection across the boundary,
and run damped Newton from a supplied guess.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import lsqr, spsolve

TWO_PI = 2.0 * math.pi


# -- stationary profiles --------------------------------------------------------------

@dataclass(frozen=True)
class StationaryProfile:
    """``h = c1 + log|g|``.

    case 1: g = 1 + c2 x (B = 0); case 2: g = cosh bx + (c2/b) sinh bx (B = b^2);
    case 3: g = b cos bx + c2 sin bx (B = -b^2).
    """
    case_id: int
    c1: float = 0.0
    c2: float = 0.0
    b: float = 1.0
    L: float = TWO_PI

    def __post_init__(self):
        if self.case_id not in (1, 2, 3):
            raise ValueError(f"case_id must be 1, 2 or 3, got {self.case_id}")
        if self.case_id in (2, 3) and not self.b > 0:
            raise ValueError("b must be positive in cases 2 and 3")
        if not self.L > 0:
            raise ValueError("L must be positive")

    @property
    def B(self) -> float:
        return {1: 0.0, 2: self.b ** 2, 3: -self.b ** 2}[self.case_id]

    def inner(self, x, order: int = 0):
        """g and its derivatives up to order 2."""
        x = np.asarray(x, dtype=float)
        b, c2 = self.b, self.c2
        if self.case_id == 1:
            return [1 + c2 * x, np.full_like(x, c2), np.zeros_like(x)][order]
        if self.case_id == 2:
            ch, sh = np.cosh(b * x), np.sinh(b * x)
            return [ch + c2 / b * sh, b * sh + c2 * ch, b * b * ch + c2 * b * sh][order]
        cs, sn = np.cos(b * x), np.sin(b * x)
        return [b * cs + c2 * sn, -b * b * sn + c2 * b * cs, -b ** 3 * cs - c2 * b * b * sn][order]

    @property
    def singular_points(self) -> tuple:
        """Zeros of g in [0, L)."""
        b, c2, L = self.b, self.c2, self.L
        if self.case_id == 1:
            if c2 == 0:
                return ()
            x = -1.0 / c2
            return (x,) if 0 <= x < L else ()
        if self.case_id == 2:
            if c2 == 0 or abs(b / c2) >= 1:
                return ()
            x = math.atanh(-b / c2) / b
            return (x,) if 0 <= x < L else ()
        # b cos bx + c2 sin bx = R cos(bx - phase)
        phase = math.atan2(c2, b)
        n0 = math.ceil((-phase - math.pi / 2) / math.pi)
        pts = []
        n = n0
        while True:
            x = (phase + math.pi / 2 + n * math.pi) / b
            if x >= L:
                break
            if x >= 0:
                pts.append(x)
            n += 1
        return tuple(pts)

    def derivatives(self, x):
        """(h, h_x, h_xx) away from singular points."""
        g0, g1, g2 = (self.inner(x, k) for k in range(3))
        with np.errstate(divide="ignore", invalid="ignore"):
            hx = g1 / g0
            return self.c1 + np.log(np.abs(g0)), hx, g2 / g0 - hx ** 2


def _singular_mask(p: StationaryProfile, x: np.ndarray, tol: float) -> np.ndarray:
    mask = np.zeros(x.shape, dtype=bool)
    for s in p.singular_points:
        mask |= np.abs(np.mod(x - s + 0.5 * p.L, p.L) - 0.5 * p.L) <= tol
    return mask


def stationary_eval(p: StationaryProfile, x):
    """Closed form of h; exactly -inf at the singular points."""
    x_arr = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        h = p.c1 + np.log(np.abs(p.inner(x_arr)))
    h = np.where(_singular_mask(p, x_arr, 1e-12 * max(1.0, p.L)), -np.inf, h)
    return float(h) if np.ndim(x) == 0 else h


@dataclass(frozen=True)
class PerturbedProfile:
    """A stationary profile plus ``eps * sin(k x)``; used to probe residual sensitivity."""
    base: StationaryProfile
    eps: float = 0.01
    k: float = 2.0

    @property
    def singular_points(self):
        return self.base.singular_points

    @property
    def B(self):
        return self.base.B

    @property
    def L(self):
        return self.base.L

    def derivatives(self, x):
        h, hx, hxx = self.base.derivatives(x)
        e, k = self.eps, self.k
        return h + e * np.sin(k * x), hx + e * k * np.cos(k * x), hxx - e * k * k * np.sin(k * x)


def stationary_residual(p, delta: float, n_grid: int = 4096) -> float:
    """Max of ``|h_xx + h_x^2 - B|`` over grid points at distance >= delta from singularities."""
    if not delta > 0:
        raise ValueError("exclusion distance must be positive")
    x = np.arange(n_grid) * (p.L / n_grid)
    keep = ~_singular_mask(p, x, delta)
    if not np.any(keep):
        raise ValueError("every grid point is excluded")
    _, hx, hxx = p.derivatives(x[keep])
    return float(np.max(np.abs(hxx + hx ** 2 - p.B)))


# -- self-similar problem ---------------------------------------------------------------

_D1 = np.array([1, -8, 0, 8, -1]) / 12.0
_D2 = np.array([-1, 16, -30, 16, -1]) / 12.0
_D4 = np.array([-1, 12, -39, 56, -39, 12, -1]) / 6.0
_GHOST = 5


@dataclass(frozen=True)
class SelfSimilarProblem:
    """Truncated self-similar problem on [-Y, Y].

    ``bc = "decay"`` clamps phi = phi' = 0 at both ends; ``bc = "free"`` leaves
    the end values free and imposes phi'' = 0 by odd reflection.
    """
    Y: float
    n_points: int = 401
    bc: str = "decay"
    guess: str = "random"

    def __post_init__(self):
        if not self.Y > 0:
            raise ValueError("Y must be positive")
        if self.n_points < 64:
            raise ValueError("n_points must be >= 64")
        if self.bc not in ("decay", "free"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")

    @property
    def y(self) -> np.ndarray:
        return np.linspace(-self.Y, self.Y, self.n_points)

    @property
    def dy(self) -> float:
        return 2.0 * self.Y / (self.n_points - 1)

    @property
    def unknown_slice(self) -> slice:
        return slice(1, self.n_points - 1) if self.bc == "decay" else slice(0, self.n_points)


def _stencil_matrix(n: int, coeffs: np.ndarray, scale: float):
    r = len(coeffs) // 2
    diags = [np.full(n - abs(k - r), c * scale) for k, c in enumerate(coeffs)]
    # rows whose stencil would leave the vector are truncated but never read
    return sparse.diags(diags, [k - r for k in range(len(coeffs))], shape=(n, n), format="csr")


class _Discretization:
    def __init__(self, prob: SelfSimilarProblem):
        n, g = prob.n_points, _GHOST
        h = prob.dy
        self.prob = prob
        self.N = n + 2 * g
        sl = prob.unknown_slice
        idx = np.arange(n)[sl]
        self.m = idx.size
        # extension: grid values (n) from unknowns, then ghosts by reflection
        rows, cols, vals = [], [], []
        for col, i in enumerate(idx):
            rows.append(g + i), cols.append(col), vals.append(1.0)
        odd = prob.bc == "free"
        for k in range(1, g + 1):
            for end, sgn in ((0, -1), (n - 1, 1)):
                ghost = g + end + sgn * k
                mirror = end - sgn * k
                if mirror in idx:
                    rows.append(ghost), cols.append(int(np.searchsorted(idx, mirror))), vals.append(-1.0 if odd else 1.0)
                if odd and end in idx:
                    rows.append(ghost), cols.append(int(np.searchsorted(idx, end))), vals.append(2.0)
        self.P = sparse.csr_matrix((vals, (rows, cols)), shape=(self.N, self.m))
        self.D1 = _stencil_matrix(self.N, _D1, 1 / h)
        self.D2 = _stencil_matrix(self.N, _D2, 1 / h ** 2)
        self.D4 = _stencil_matrix(self.N, _D4, 1 / h ** 4)
        ext_y = -prob.Y + (np.arange(self.N) - g) * h
        self.rows = g + idx
        self.S = sparse.csr_matrix((np.ones(self.m), (np.arange(self.m), self.rows)), shape=(self.m, self.N))
        self.Ydiag = sparse.diags(ext_y)

    def residual(self, u: np.ndarray) -> np.ndarray:
        v = self.P @ u
        d1 = self.D1 @ v
        return self.S @ (self.D4 @ v + self.D2 @ (d1 * d1) + self.Ydiag @ d1)

    def jacobian(self, u: np.ndarray):
        v = self.P @ u
        d1 = self.D1 @ v
        J = self.D4 + self.D2 @ sparse.diags(2 * d1) @ self.D1 + self.Ydiag @ self.D1
        return (self.S @ J @ self.P).tocsc()


def self_similar_operator(prob: SelfSimilarProblem, phi: np.ndarray) -> np.ndarray:
    """Discrete ``phi'''' + (phi'^2)'' + y phi'`` at the equation points.

    ``phi`` holds values on the full grid; entries outside the unknown set are
    taken from the boundary condition, not from ``phi``.
    """
    d = _Discretization(prob)
    return d.residual(np.asarray(phi, dtype=float)[prob.unknown_slice])


@dataclass
class SelfSimilarResult:
    best_residual: float
    profile: np.ndarray
    converged_to_zero: bool
    outcome: str
    iterations: int
    reason: str = ""
    trace: list = field(default_factory=list)

    @property
    def final_residual(self) -> float:
        return self.trace[-1]


def _l2(r: np.ndarray, h: float) -> float:
    return float(math.sqrt(h * float(np.dot(r, r))))


def self_similar_solve(prob: SelfSimilarProblem, guess, max_iter: int = 200, tol: float = 1e-6,
                       max_halvings: int = 30) -> SelfSimilarResult:
    """Damped Newton on the collocation equations.

    ``guess`` is a callable of y or an array on the full grid.  Outcomes:

    - ``collapsed``: the iterate norm fell below 1e-8;
    - ``converged``: discrete L2 residual below ``tol`` at a nonzero iterate
      that Newton no longer moves (relative step below 1e-6 or no further
      decrease possible);
    - ``stalled``: no further progress, with ``reason`` one of ``line_search``
      (30 halvings without decrease), ``small_step`` (step below 1e-12) or
      ``max_iter`` (iteration budget spent);
    - ``diverged``: non-finite values.
    """
    d = _Discretization(prob)
    h = prob.dy
    y = prob.y
    g = np.asarray(guess(y) if callable(guess) else guess, dtype=float)
    if g.shape != y.shape:
        raise ValueError("guess must have one value per grid point")
    u = g[prob.unknown_slice].copy()
    r = d.residual(u)
    res = _l2(r, h)
    best = res
    trace = [res]
    outcome, reason = "stalled", "max_iter"
    rel_step = math.inf
    it = 0
    for it in range(max_iter + 1):
        if _l2(u, h) < 1e-8:
            outcome, reason = "collapsed", ""
            break
        # near zero Newton steps stay comparable to the iterate, so require settling
        if res < tol and rel_step < 1e-6:
            outcome, reason = "converged", ""
            break
        if it == max_iter:
            break
        J = d.jacobian(u)
        try:
            with np.errstate(all="ignore"):
                step = spsolve(J, -r)
            if not np.all(np.isfinite(step)):
                raise ArithmeticError
        except (ArithmeticError, RuntimeError):
            step = lsqr(J, -r, atol=1e-14, btol=1e-14)[0]
        if not np.all(np.isfinite(step)):
            outcome, reason = "diverged", "non-finite step"
            break
        lam = 1.0
        accepted = False
        for _ in range(max_halvings + 1):
            trial = u + lam * step
            with np.errstate(all="ignore"):
                rt = d.residual(trial)
            rt_norm = _l2(rt, h)
            if np.isfinite(rt_norm) and rt_norm < res:
                accepted = True
                break
            lam *= 0.5
        if not accepted:
            if res < tol:
                outcome, reason = "converged", ""
            else:
                reason = "line_search"
            break
        step_norm = _l2(lam * step, h)
        rel_step = step_norm / max(_l2(u, h), 1e-300)
        u, r, res = trial, rt, rt_norm
        best = min(best, res)
        trace.append(res)
        if step_norm < 1e-12 and res > 1e-2:
            reason = "small_step"
            break
    profile = np.zeros_like(y)
    profile[prob.unknown_slice] = u
    return SelfSimilarResult(best_residual=float(best), profile=profile,
                             converged_to_zero=outcome == "collapsed", outcome=outcome,
                             iterations=it, reason=reason, trace=trace)


def nonexistence_consistent(res: SelfSimilarResult) -> bool:
    """True if the run found no nonzero solution: collapse, or a stall with residual > 1e-2."""
    return res.outcome == "collapsed" or (res.outcome == "stalled" and res.final_residual > 1e-2)


def random_guess(Y: float, seed: int, n_bumps: int = 3, amplitude: float = 1.0):
    """Sum of Gaussian bumps inside [-Y/2, Y/2]; smooth and negligible at the ends."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-Y / 2, Y / 2, n_bumps)
    widths = rng.uniform(0.5, max(0.6, Y / 8), n_bumps)
    amps = amplitude * rng.normal(size=n_bumps)

    def guess(y):
        y = np.asarray(y, dtype=float)
        return sum(a * np.exp(-((y - c) / w) ** 2) for a, c, w in zip(amps, centers, widths))

    return guess


# -- weak form -------------------------------------------------------------------------

def bump(center: float, radius: float, power: int = 8):
    """Compactly supported test function ``(1 - ((y - c)/r)^2)^power`` and its derivatives."""
    poly = np.polynomial.Polynomial([1.0, 0.0, -1.0]) ** power

    def eta(y, order: int = 0):
        z = (np.asarray(y, dtype=float) - center) / radius
        val = poly.deriv(order)(z) / radius ** order if order else poly(z)
        return np.where(np.abs(z) < 1, val, 0.0)

    return eta


def _fd4(phi: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order first derivative on a uniform grid, second order at the two end points."""
    d = np.empty_like(phi)
    d[2:-2] = (phi[:-4] - 8 * phi[1:-3] + 8 * phi[3:-1] - phi[4:]) / (12 * h)
    d[:2] = np.gradient(phi, h, edge_order=2)[:2]
    d[-2:] = np.gradient(phi, h, edge_order=2)[-2:]
    return d


def weak_form_residual(y: np.ndarray, phi: np.ndarray, eta) -> float:
    """``int phi eta'''' + int phi'^2 eta'' - int phi eta - int y phi eta'``."""
    h = y[1] - y[0]
    dphi = _fd4(phi, h)
    integrand = phi * eta(y, 4) + dphi ** 2 * eta(y, 2) - phi * eta(y) - y * phi * eta(y, 1)
    return float(np.trapezoid(integrand, y))


def strong_form_pairing(y: np.ndarray, strong: np.ndarray, eta) -> float:
    """``int (phi'''' + (phi'^2)'' + y phi') eta`` from pointwise strong residual values."""
    return float(np.trapezoid(strong * eta(y), y))


# -- output --------------------------------------------------------------------------

def write_profile(path, y: np.ndarray, phi: np.ndarray) -> None:
    with open(path, "w") as fh:
        for a, b in zip(y, phi):
            fh.write(f"{a:.17g} {b:.17g}\n")


def summary_json(rows: list) -> str:
    """Rows of dicts with keys Y, seed, residual, outcome."""
    return json.dumps(sorted(rows, key=lambda r: (r["Y"], r["seed"])), sort_keys=True, indent=1)
