"""Zero-mean periodic fields stored as truncated Fourier coefficients.

A field of max mode ``K`` on ``[0, L)`` is

    u(x) = sum_{0 < |j| <= K} c_j exp(i kappa_j x),   kappa_j = 2 pi j / L.

Coefficients live in an array of length ``2K + 1`` indexed by ``j + K``; the
entry for ``j = 0`` is always zero.  The array-level helpers in
:class:`ModeBasis` work on stacks of such arrays (leading batch axes) and are
what the time steppers use; :class:`FourierField` is the immutable, validated
wrapper exposed to users.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
from scipy import fft as sfft

TWO_PI = 2.0 * math.pi


class InvalidFieldError(ValueError):
    """Raised when a field violates its invariants (NaN, mode 0, symmetry)."""


class ModeBasis:
    """Wavenumbers and dealiased transforms for a given ``(K, L)``."""

    def __init__(self, K: int, L: float = TWO_PI):
        if K < 1:
            raise ValueError(f"max_mode must be positive, got {K}")
        if not L > 0:
            raise ValueError(f"period length must be positive, got {L}")
        self.K = int(K)
        self.L = float(L)
        self.modes = np.arange(-self.K, self.K + 1)
        self.kappa = TWO_PI * self.modes / self.L
        self.abs_kappa = np.abs(self.kappa)
        self.kappa4 = self.kappa ** 4
        self.nonzero = self.modes != 0
        # 3K+1 points suffice for an alias-free quadratic product
        self.n_pad = sfft.next_fast_len(3 * self.K + 1)
        self.n_quad = sfft.next_fast_len(4 * (self.K + 1))

    # -- transforms -------------------------------------------------------

    def _fft_index(self, n: int) -> np.ndarray:
        return np.where(self.modes >= 0, self.modes, n + self.modes)

    def to_grid(self, c: np.ndarray, n: int | None = None) -> np.ndarray:
        """Samples on the uniform grid ``x_m = m L / n`` (complex)."""
        n = self.n_quad if n is None else n
        if n < 2 * self.K + 1:
            raise ValueError(f"grid of {n} points cannot hold {self.K} modes")
        buf = np.zeros(c.shape[:-1] + (n,), dtype=complex)
        buf[..., self._fft_index(n)] = c
        return sfft.ifft(buf, axis=-1, norm="forward")

    def from_grid(self, u: np.ndarray) -> np.ndarray:
        """Truncated coefficients of grid samples, mode 0 removed."""
        n = u.shape[-1]
        if n < 2 * self.K + 1:
            raise ValueError(f"grid of {n} points cannot hold {self.K} modes")
        spec = sfft.fft(u, axis=-1, norm="forward")
        c = spec[..., self._fft_index(n)]
        c[..., self.K] = 0.0
        return c

    def grid_points(self, n: int | None = None) -> np.ndarray:
        n = self.n_quad if n is None else n
        return np.arange(n) * (self.L / n)

    # -- spectral operators -----------------------------------------------

    def derivative(self, c: np.ndarray, n: int) -> np.ndarray:
        if n == 0:
            return c.copy()
        return c * (1j * self.kappa) ** n

    def B(self, cu: np.ndarray, cv: np.ndarray) -> np.ndarray:
        """(u_x v_x)_xx, alias-free, truncated to |j| <= K."""
        ux = self.to_grid(1j * self.kappa * cu, self.n_pad)
        if cv is cu:
            vx = ux
        else:
            vx = self.to_grid(1j * self.kappa * cv, self.n_pad)
        prod = self.from_grid(ux * vx)
        return -self.kappa ** 2 * prod

    def B_direct(self, cu: np.ndarray, cv: np.ndarray) -> np.ndarray:
        """Same as :meth:`B` by explicit O(K^2) convolution (reference path)."""
        a = 1j * self.kappa * cu
        b = 1j * self.kappa * cv
        # averaging both orders makes the result exactly symmetric in (u, v)
        full = 0.5 * (np.convolve(a, b) + np.convolve(b, a))  # index runs over j = -2K..2K
        mid = full[self.K:3 * self.K + 1].copy()
        mid[self.K] = 0.0
        return -self.kappa ** 2 * mid

    def sobolev_sq(self, c: np.ndarray, alpha: float) -> np.ndarray:
        w = np.zeros_like(self.abs_kappa)
        w[self.nonzero] = self.abs_kappa[self.nonzero] ** (2.0 * alpha)
        return np.sum(w * np.abs(c) ** 2, axis=-1)


@functools.lru_cache(maxsize=64)
def basis(K: int, L: float = TWO_PI) -> ModeBasis:
    return ModeBasis(K, L)


def _check_coeffs(c: np.ndarray, K: int, real: bool) -> None:
    if not np.all(np.isfinite(c)):
        raise InvalidFieldError("field has non-finite amplitudes")
    if c[K] != 0:
        raise InvalidFieldError("mode 0 must vanish (zero spatial average)")
    if real:
        scale = max(1.0, float(np.max(np.abs(c))))
        if np.max(np.abs(c - np.conj(c[::-1]))) > 1e-12 * scale:
            raise InvalidFieldError("real field must satisfy c(-j) = conj(c(j))")


@dataclass(frozen=True, eq=False)
class FourierField:
    """Immutable zero-mean periodic field.

    Use :meth:`from_modes`, :meth:`from_function` or :meth:`from_grid`
    rather than the raw constructor unless the coefficient array is
    already laid out as ``c[j + K]``.
    """

    coeffs: np.ndarray
    L: float = TWO_PI
    real: bool = True
    _basis: ModeBasis = dc_field(init=False, repr=False, compare=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size < 3 or c.size % 2 == 0:
            raise InvalidFieldError(f"coefficient array must have odd length >= 3, got {c.shape}")
        K = c.size // 2
        _check_coeffs(c, K, self.real)
        if self.real:
            # remove rounding asymmetry so physical samples are exactly real
            c = 0.5 * (c + np.conj(c[::-1]))
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "_basis", basis(K, float(self.L)))

    # -- constructors -----------------------------------------------------

    @classmethod
    def zeros(cls, K: int, L: float = TWO_PI, real: bool = True) -> "FourierField":
        return cls(np.zeros(2 * K + 1, dtype=complex), L, real)

    @classmethod
    def from_modes(cls, K: int, modes: dict, L: float = TWO_PI, real: bool = True) -> "FourierField":
        """Build from ``{j: amplitude}``.

        For real fields missing conjugate partners are filled in, so
        ``from_modes(K, {1: 0.5})`` is cos(x) when L = 2 pi.
        """
        c = np.zeros(2 * K + 1, dtype=complex)
        for j, a in modes.items():
            if j == 0 or abs(j) > K:
                raise InvalidFieldError(f"mode {j} outside 0 < |j| <= {K}")
            c[j + K] = a
        if real:
            for j, a in modes.items():
                if -j not in modes:
                    c[-j + K] = np.conj(a)
        return cls(c, L, real)

    @classmethod
    def from_grid(cls, values: np.ndarray, K: int, L: float = TWO_PI, real: bool | None = None) -> "FourierField":
        values = np.asarray(values)
        if real is None:
            real = not np.iscomplexobj(values) or bool(np.all(values.imag == 0))
        c = basis(K, float(L)).from_grid(values.astype(complex))
        return cls(c, L, real)

    @classmethod
    def from_function(cls, func, K: int, L: float = TWO_PI, real: bool | None = None) -> "FourierField":
        b = basis(K, float(L))
        x = b.grid_points(b.n_quad)
        return cls.from_grid(func(x), K, L, real)

    # -- accessors --------------------------------------------------------

    @property
    def K(self) -> int:
        return self.coeffs.size // 2

    @property
    def basis(self) -> ModeBasis:
        return self._basis

    def coeff(self, j: int) -> complex:
        return complex(self.coeffs[j + self.K])

    def with_coeffs(self, c: np.ndarray) -> "FourierField":
        return FourierField(c, self.L, self.real)

    def compatible(self, other: "FourierField") -> bool:
        return self.K == other.K and self.L == other.L

    def to_grid(self, n: int | None = None) -> np.ndarray:
        vals = self._basis.to_grid(self.coeffs, n)
        return vals.real if self.real else vals

    def __add__(self, other: "FourierField") -> "FourierField":
        _require_compatible(self, other)
        return FourierField(self.coeffs + other.coeffs, self.L, self.real and other.real)

    def __sub__(self, other: "FourierField") -> "FourierField":
        _require_compatible(self, other)
        return FourierField(self.coeffs - other.coeffs, self.L, self.real and other.real)

    def __mul__(self, a: float) -> "FourierField":
        real = self.real and np.isrealobj(a)
        return FourierField(self.coeffs * a, self.L, real)

    __rmul__ = __mul__

    def __neg__(self) -> "FourierField":
        return FourierField(-self.coeffs, self.L, self.real)

    def __repr__(self):
        return f"FourierField(K={self.K}, L={self.L:g}, real={self.real})"


def _require_compatible(u: FourierField, v: FourierField) -> None:
    if not u.compatible(v):
        raise InvalidFieldError(
            f"fields differ in shape: (K={u.K}, L={u.L}) vs (K={v.K}, L={v.L})")


def _require_valid(u: FourierField) -> None:
    if not isinstance(u, FourierField):
        raise InvalidFieldError(f"expected FourierField, got {type(u).__name__}")
    if not np.all(np.isfinite(u.coeffs)):
        raise InvalidFieldError("field has non-finite amplitudes")


# -- operations -------------------------------------------------------------

def sobolev_norm(u: FourierField, alpha: float) -> float:
    """Homogeneous norm ``(sum |kappa_j|^(2 alpha) |c_j|^2)^(1/2)``."""
    _require_valid(u)
    if not math.isfinite(alpha):
        raise ValueError("Sobolev index must be finite")
    return float(math.sqrt(u.basis.sobolev_sq(u.coeffs, alpha)))


def derivative(u: FourierField, n: int) -> FourierField:
    _require_valid(u)
    if n < 0:
        raise ValueError("derivative order must be >= 0")
    return u.with_coeffs(u.basis.derivative(u.coeffs, n))


def nonlinearity_B(u: FourierField, v: FourierField) -> FourierField:
    """``(u_x v_x)_xx`` projected onto the modes of ``u``."""
    _require_valid(u)
    _require_valid(v)
    _require_compatible(u, v)
    c = u.basis.B(u.coeffs, v.coeffs)
    return FourierField(c, u.L, u.real and v.real)


def lebesgue_norm(u: FourierField, p: float, k: int = 0, n_grid: int | None = None) -> float:
    """``|D^k u|_{L^p}`` by the trapezoidal rule on >= 4(K+1) points."""
    _require_valid(u)
    if not p >= 1:
        raise ValueError(f"Lebesgue exponent must be >= 1, got {p}")
    b = u.basis
    n = b.n_quad if n_grid is None else max(int(n_grid), b.n_quad)
    vals = np.abs(b.to_grid(b.derivative(u.coeffs, k), n))
    if math.isinf(p):
        return float(vals.max())
    # normalise before powering to keep large p finite
    top = vals.max()
    if top == 0:
        return 0.0
    return float(top * (np.sum((vals / top) ** p) * (u.L / n)) ** (1.0 / p))


def c1_norm(u: FourierField) -> float:
    return lebesgue_norm(u, math.inf, 0) + lebesgue_norm(u, math.inf, 1)


def w14_norm(u: FourierField) -> float:
    return lebesgue_norm(u, 4, 0) + lebesgue_norm(u, 4, 1)


def inner(u: FourierField, v: FourierField) -> complex:
    """``int_0^L u conj(v) dx``."""
    _require_compatible(u, v)
    return complex(u.L * np.sum(u.coeffs * np.conj(v.coeffs)))


# -- snapshot format ---------------------------------------------------------

def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_snapshot(path, u: FourierField, t: float = 0.0) -> None:
    lines = [f"L {_fmt(u.L)} K {u.K} t {_fmt(t)} complex {0 if u.real else 1}"]
    for j in range(-u.K, u.K + 1):
        if j == 0:
            continue
        c = u.coeffs[j + u.K]
        lines.append(f"{j} {_fmt(c.real)} {_fmt(c.imag)}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshot(path) -> tuple[FourierField, float]:
    text = Path(path).read_text().split("\n")
    head = text[0].split()
    if len(head) != 8 or head[0] != "L" or head[2] != "K" or head[4] != "t" or head[6] != "complex":
        raise InvalidFieldError(f"{path}: malformed snapshot header {text[0]!r}")
    L, K, t, cplx = float(head[1]), int(head[3]), float(head[5]), head[7] == "1"
    c = np.zeros(2 * K + 1, dtype=complex)
    for line in text[1:]:
        if not line.strip():
            continue
        j, re, im = line.split()
        j = int(j)
        if j == 0 or abs(j) > K:
            raise InvalidFieldError(f"{path}: mode {j} out of range")
        c[j + K] = complex(float(re), float(im))
    return FourierField(c, L, not cplx), t
