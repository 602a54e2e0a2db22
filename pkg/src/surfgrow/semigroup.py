"""The semigroup exp(-tA), A = d^4/dx^4, and the K_0 functional.

A is diagonal in Fourier space with symbol kappa^4, so every operator here is
a coefficient-wise multiplier.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.optimize import minimize_scalar

from .field import FourierField, _require_valid


def apply_semigroup(u: FourierField, t: float) -> FourierField:
    _require_valid(u)
    if t < 0:
        raise ValueError(f"semigroup time must be >= 0, got {t}")
    return u.with_coeffs(u.coeffs * np.exp(-t * u.basis.kappa4))


def apply_fractional_power(u: FourierField, gamma: float) -> FourierField:
    """A^gamma u; coefficient j multiplied by |kappa_j|^(4 gamma)."""
    _require_valid(u)
    b = u.basis
    mult = np.zeros(b.abs_kappa.shape)
    mult[b.nonzero] = b.abs_kappa[b.nonzero] ** (4.0 * gamma)
    return u.with_coeffs(u.coeffs * mult)


def smoothing_constant(gamma: float) -> float:
    """Sharp c_gamma in ``|A^gamma e^{-tA}| <= c_gamma t^-gamma``: sup x^g e^-x."""
    if gamma < 0:
        raise ValueError(f"gamma must be >= 0, got {gamma}")
    if gamma == 0:
        return 1.0
    return (gamma / math.e) ** gamma


def smoothing_operator_norm(gamma: float, t: float, K: int, L: float = 2 * math.pi) -> float:
    """Operator norm of A^gamma e^{-tA} on the span of modes 0 < |j| <= K."""
    kappa4 = (2 * math.pi * np.arange(1, K + 1) / L) ** 4
    return float(np.max(kappa4 ** gamma * np.exp(-t * kappa4)))


def strong_continuity_quantity(u: FourierField, alpha: float, s: float) -> float:
    """``|s^alpha A^alpha e^{-sA} u|_{L^2}`` in coefficient norm; tends to 0 as s -> 0."""
    b = u.basis
    k4 = b.kappa4[b.nonzero]
    c = u.coeffs[b.nonzero]
    return float(math.sqrt(np.sum((s * k4) ** (2 * alpha) * np.exp(-2 * s * k4) * np.abs(c) ** 2)))


def _k0_weights(h0: FourierField, alpha: float):
    b = h0.basis
    k4 = b.kappa4[b.nonzero]
    w = b.abs_kappa[b.nonzero] ** (2 * (1 + alpha)) * np.abs(h0.coeffs[b.nonzero]) ** 2
    keep = w > 0
    return k4[keep], w[keep]


def k_zero(h0: FourierField, alpha: float, t: float, points_per_decade: int = 200,
           decades: float = 6.0, rtol: float = 1e-10) -> float:
    """K_0(t) = sup_{0<s<=t} s^theta |e^{-sA} h0|_{1+alpha}, theta = (2 alpha + 1)/8.

    Geometric grid search over (0, t] followed by bounded scalar refinement
    around the best grid point.
    """
    _require_valid(h0)
    if not 0 < alpha < 0.5:
        raise ValueError(f"alpha must lie in (0, 1/2), got {alpha}")
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    theta = (2 * alpha + 1) / 8
    k4, w = _k0_weights(h0, alpha)
    if w.size == 0:
        return 0.0

    def log_f(log_s):
        s = np.exp(log_s)
        inner = np.exp(-2 * np.multiply.outer(s, k4)) @ w
        return theta * log_s + 0.5 * np.log(inner)

    # every term increases for s < theta / max(k4), so the sup lives above that
    s_lo = min(t * 10.0 ** (-decades), 0.5 * theta / k4.max())
    n = max(int(points_per_decade * math.log10(t / s_lo)) + 1, 2)
    grid = np.linspace(math.log(s_lo), math.log(t), n)
    vals = log_f(grid)
    i = int(np.argmax(vals))
    best = vals[i]
    if i == n - 1:
        return float(math.exp(best))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, n - 1)]
    res = minimize_scalar(lambda z: -float(log_f(np.array([z]))[0]), bounds=(lo, hi),
                          method="bounded", options={"xatol": rtol})
    return float(math.exp(max(best, -res.fun)))
