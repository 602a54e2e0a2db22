"""Numerical checks of the trilinear estimate for B(u, v) = (u_x v_x)_xx.

The estimate ``<B(u,v), w> <= c |u|_{1+alpha} |v|_{1+beta} |w|_{2+gamma}`` is
probed by sampling.  For fixed u and v the best w is explicit: the supremum
over w of ``<B, w> / |w|_{2+gamma}`` equals ``L |B|_{-(2+gamma)}``, attained at
``w_k = |kappa_k|^{-2(2+gamma)} B_k``.  Sampling therefore only runs over u
and v.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .field import FourierField, basis, inner, sobolev_norm, _require_compatible

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class ExponentTriple:
    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.alpha, self.beta, self.gamma)):
            raise ValueError("exponents must be finite")

    @property
    def total(self) -> float:
        return self.alpha + self.beta + self.gamma


_EPS = 1e-12


def condition_holds(t: ExponentTriple) -> bool:
    """Admissibility of (alpha, beta, gamma); sums are compared with a 1e-12 tolerance."""
    a, b, g = t.alpha, t.beta, t.gamma
    if a < 0 or b < 0:
        return False
    s = a + b + g
    if any(abs(x - 0.5) <= _EPS for x in (a, b, g)):
        if not s > 0.5 + _EPS:
            return False
    elif s < 0.5 - _EPS:
        return False
    if g < 0 and not (a <= 0.5 or b <= 0.5 or a >= -g or b >= -g):
        return False
    return True


# -- counting sums ---------------------------------------------------------------

def sum_easy(gamma: float, a: float) -> float:
    """``sum_{0 < |k| <= a} |k|^{-2 gamma}``."""
    if a < 1:
        raise ValueError("a must be >= 1")
    k = np.arange(1, int(math.floor(a)) + 1, dtype=float)
    return float(2.0 * np.sum(k ** (-2.0 * gamma)))


def easy_regime(gamma: float) -> str:
    """Bound shape for the easy sum: power of a, log a, or a constant."""
    if gamma < 0.5:
        return "power"
    if gamma == 0.5:
        return "log"
    return "constant"


def _easy_bound(gamma: float, a: float) -> float:
    return {"power": a ** (1 - 2 * gamma), "log": math.log(a), "constant": 1.0}[easy_regime(gamma)]


@dataclass
class EasySumReport:
    gamma: float
    regime: str
    empirical_regime: str
    increment_ratio: float
    constant: float
    a_values: list


def classify_easy(gamma: float, a_max: int = 2 ** 14, a_min: int = 2 ** 4) -> EasySumReport:
    """Classify growth from dyadic increments ``S(2a) - S(a)``.

    The increments grow by 2^{1-2 gamma} per doubling, so their last ratio
    separates the regimes: above 1.05 is power growth, below 0.95 is a
    convergent sum and anything in between is logarithmic.  The fitted
    constant is the largest ``S(a) / bound(a)`` on the sweep.
    """
    a_vals = [2 ** k for k in range(int(math.log2(a_min)), int(math.log2(a_max)) + 1)]
    if len(a_vals) < 3:
        raise ValueError("sweep needs at least three dyadic values")
    S = [sum_easy(gamma, a) for a in a_vals]
    inc = np.diff(S)
    ratio = float(inc[-1] / inc[-2])
    if ratio > 1.05:
        emp = "power"
    elif ratio < 0.95:
        emp = "constant"
    else:
        emp = "log"
    c = max(s / _easy_bound(gamma, a) for s, a in zip(S, a_vals))
    return EasySumReport(gamma=gamma, regime=easy_regime(gamma), empirical_regime=emp,
                         increment_ratio=ratio, constant=float(c), a_values=a_vals)


def hard_support(m: int) -> np.ndarray:
    """Indices k with ``|k| < 2|m|`` and ``0 < |k - m| < |k|/2``."""
    if m == 0:
        raise ValueError("m must be nonzero")
    M = abs(m)
    k = np.arange(-2 * M + 1, 2 * M)
    d = np.abs(k - m)
    return k[(d > 0) & (2 * d < np.abs(k))]


def sum_hard(alpha: float, gamma: float, m: int) -> float:
    k = hard_support(m)
    if k.size == 0:
        return 0.0
    return float(np.sum(np.abs(k - m).astype(float) ** (-2 * alpha) * np.abs(k).astype(float) ** (-2 * gamma)))


def critical_beta(alpha: float, gamma: float) -> float:
    """Smallest beta for which the hard sum is O(|m|^{2 beta}), away from alpha = 1/2."""
    return 0.5 * (max(1.0 - 2.0 * alpha, 0.0) - 2.0 * gamma)


def hard_growth_exponent(alpha: float, gamma: float, m_values=None) -> float:
    """Least-squares slope of log sum_hard against log m."""
    m_values = m_values or [2 ** k for k in range(3, 13)]
    vals = np.array([sum_hard(alpha, gamma, m) for m in m_values])
    slope, _ = np.polyfit(np.log(m_values), np.log(vals), 1)
    return float(slope)


# -- trilinear estimate ----------------------------------------------------------------

def _sobolev_rows(c: np.ndarray, weights: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(weights * np.abs(c) ** 2, axis=-1))


def _weights(b, s: float) -> np.ndarray:
    w = np.zeros(b.abs_kappa.shape)
    w[b.nonzero] = b.abs_kappa[b.nonzero] ** (2 * s)
    return w


def trilinear_ratio(u: FourierField, v: FourierField, w: FourierField, t: ExponentTriple) -> float:
    """``|<B(u,v), w>| / (|u|_{1+alpha} |v|_{1+beta} |w|_{2+gamma})`` with B by direct convolution."""
    _require_compatible(u, v)
    _require_compatible(u, w)
    den = sobolev_norm(u, 1 + t.alpha) * sobolev_norm(v, 1 + t.beta) * sobolev_norm(w, 2 + t.gamma)
    if den == 0:
        raise ValueError("all three fields must have nonzero norm")
    Bc = u.basis.B_direct(u.coeffs, v.coeffs)
    return abs(inner(FourierField(Bc, u.L, real=False), w)) / den


class _Evaluator:
    """Batched ratio with dual-optimal w: ``L |B(u,v)|_{-(2+gamma)} / (|u|_{1+alpha} |v|_{1+beta})``."""

    def __init__(self, t: ExponentTriple, K: int, L: float = TWO_PI):
        self.b = basis(K, L)
        self.L = L
        self.wu = _weights(self.b, 1 + t.alpha)
        self.wv = _weights(self.b, 1 + t.beta)
        self.ww = _weights(self.b, -(2 + t.gamma))

    def __call__(self, cu: np.ndarray, cv: np.ndarray) -> np.ndarray:
        Bc = self.b.B(cu, cv)
        num = self.L * _sobolev_rows(Bc, self.ww)
        den = _sobolev_rows(cu, self.wu) * _sobolev_rows(cv, self.wv)
        with np.errstate(invalid="ignore", divide="ignore"):
            r = num / den
        return np.where(den > 0, r, 0.0)

    def optimal_w(self, cu: np.ndarray, cv: np.ndarray) -> np.ndarray:
        return self.ww * self.b.B(cu, cv)


def _random_fields(rng, K: int, n: int):
    """n complex fields on modes 0 < |j| <= K with Gaussian coefficients and slope in [-3, 0]."""
    slopes = rng.uniform(-3.0, 0.0, size=(n, 1))
    j = np.abs(np.arange(-K, K + 1)).astype(float)
    j[K] = 1.0
    c = (rng.normal(size=(n, 2 * K + 1)) + 1j * rng.normal(size=(n, 2 * K + 1))) * j ** slopes
    c[:, K] = 0.0
    return c


def _structured_candidates(K: int, t: ExponentTriple):
    """Single-mode pairs and flat high-frequency bands whose modes nearly cancel."""
    us, vs, tags = [], [], []
    top = min(K, 8)
    for p in range(1, top + 1):
        for q in range(-top, top + 1):
            if q == 0 or p + q == 0 or abs(p + q) > K:
                continue
            cu = np.zeros(2 * K + 1, complex)
            cv = np.zeros(2 * K + 1, complex)
            cu[K + p] = 1.0
            cv[K + q] = 1.0
            us.append(cu), vs.append(cv), tags.append(f"modes({p},{q})")
    n = 1
    while 2 * n <= K:
        cu = np.zeros(2 * K + 1, complex)
        cv = np.zeros(2 * K + 1, complex)
        ll = np.arange(n, 2 * n + 1)
        cu[K + ll] = ll.astype(float) ** (-(1 + t.alpha))
        cv[K - ll] = ll.astype(float) ** (-(1 + t.beta))
        us.append(cu), vs.append(cv), tags.append(f"band({n})")
        n *= 2
    return np.array(us), np.array(vs), tags


CHUNK = 1000


def _sample_chunk(args):
    t, K, L, seed, index, n = args
    rng = np.random.default_rng([seed, index])
    ev = _Evaluator(t, K, L)
    cu = _random_fields(rng, K, n)
    cv = _random_fields(rng, K, n)
    r = ev(cu, cv)
    i = int(np.argmax(r))
    return float(r[i]), index, i, cu[i], cv[i]


def _hill_climb(ev: _Evaluator, cu: np.ndarray, cv: np.ndarray, steps: int, rng):
    """Coordinate perturbations of u or v, accepted when the ratio increases."""
    K = (cu.size - 1) // 2
    best = float(ev(cu[None], cv[None])[0])
    modes = np.concatenate([np.arange(0, K), np.arange(K + 1, 2 * K + 1)])
    batch = 16
    for _ in range(steps):
        which = rng.integers(0, 2, size=batch)
        idx = rng.choice(modes, size=batch)
        scale = np.maximum(np.abs(np.where(which == 0, cu[idx], cv[idx])),
                           1e-2 * max(np.abs(cu).max(), np.abs(cv).max()))
        delta = scale * (rng.normal(size=batch) + 1j * rng.normal(size=batch))
        U = np.repeat(cu[None], batch, axis=0)
        V = np.repeat(cv[None], batch, axis=0)
        rows = np.arange(batch)
        U[rows[which == 0], idx[which == 0]] += delta[which == 0]
        V[rows[which == 1], idx[which == 1]] += delta[which == 1]
        r = ev(U, V)
        i = int(np.argmax(r))
        if r[i] > best:
            best, cu, cv = float(r[i]), U[i], V[i]
    return best, cu, cv


@dataclass
class InequalityReport:
    triple: ExponentTriple
    sample_count: int
    max_ratio: float
    argmax: str
    K_used: list
    per_K: dict = field(default_factory=dict)
    argmax_per_K: dict = field(default_factory=dict)
    stability: list = field(default_factory=list)

    def to_json(self) -> str:
        d = asdict(self)
        d["per_K"] = {str(k): v for k, v in self.per_K.items()}
        d["argmax_per_K"] = {str(k): v for k, v in self.argmax_per_K.items()}
        return json.dumps(d, sort_keys=True, indent=1)


def _sup_at(t: ExponentTriple, K: int, samples: int, seed: int, hill_steps: int, L: float, jobs: int):
    ev = _Evaluator(t, K, L)
    su, sv, tags = _structured_candidates(K, t)
    rs = ev(su, sv)
    i = int(np.argmax(rs))
    best, cu, cv, tag = float(rs[i]), su[i], sv[i], tags[i]
    n_chunks = math.ceil(samples / CHUNK)
    tasks = [(t, K, L, seed, c, min(CHUNK, samples - c * CHUNK)) for c in range(n_chunks)]
    if jobs > 1 and n_chunks > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            results = list(ex.map(_sample_chunk, tasks))
    else:
        results = [_sample_chunk(a) for a in tasks]
    # ties resolved by chunk index so the winner does not depend on scheduling
    for r, c, j, u, v in sorted(results, key=lambda x: (-x[0], x[1], x[2])):
        if r > best:
            best, cu, cv, tag = r, u, v, f"seed({seed},{c})#{j}"
        break
    climbed, _, _ = _hill_climb(ev, cu, cv, hill_steps, np.random.default_rng([seed, 10 ** 6]))
    if climbed > best:
        best, tag = climbed, tag + "+climb"
    return best, tag, len(tags) + samples


def trilinear_sup(t: ExponentTriple, K, samples: int = 10_000, seed: int = 0, hill_steps: int = 500,
                  L: float = TWO_PI, jobs: int = 1, require_admissible: bool = True) -> InequalityReport:
    """Empirical sup of the trilinear ratio at each resolution in ``K``.

    ``K`` is an int (then K and 2K are used) or a list of resolutions.
    ``stability`` lists ``max_ratio(K_{i+1}) / max_ratio(K_i)``.
    """
    if require_admissible and not condition_holds(t):
        raise ValueError(f"triple {t} violates the admissibility condition")
    Ks = [int(K), 2 * int(K)] if np.isscalar(K) else sorted(int(k) for k in K)
    if len(Ks) < 2:
        raise ValueError("need at least two resolutions")
    per_K, arg = {}, {}
    count = 0
    for k in Ks:
        per_K[k], arg[k], count = _sup_at(t, k, samples, seed, hill_steps, L, jobs)
    stab = [per_K[b] / per_K[a] for a, b in zip(Ks, Ks[1:])]
    return InequalityReport(triple=t, sample_count=count, max_ratio=per_K[Ks[-1]], argmax=arg[Ks[-1]],
                            K_used=Ks, per_K=per_K, argmax_per_K=arg, stability=stab)
