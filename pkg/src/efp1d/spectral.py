"""Spectral core: periodic grids, trigonometric fields, exact products.

Conventions used throughout the package
---------------------------------------
On the interval (a, b) of length L = b - a the Fourier basis is

    e_l(x) = exp(i mu_l (x - a)),   mu_l = 2 pi l / L,

with the symmetric index set T_K = {-K/2, ..., K/2 - 1} for even K.
A bandwidth-K field stores its coefficients c_l in *natural frequency
order* l = -K/2 .. K/2-1.  numpy's FFT routines index frequencies
0 .. K-1 with the negative half wrapped to the back, so every transform
below is bracketed by fftshift/ifftshift; that permutation is the only
place the two orderings meet.

Nodal data lives on the uniform grid x_j = a + j h, h = L/K, stored with
an explicit periodic closure entry v_K = v_0 (K+1 values).  The
interpolation coefficients of nodal data are

    c_l = (1/K) sum_{j=0}^{K-1} v_j exp(-i mu_l (x_j - a)),

which is an ordinary DFT because mu_l (x_j - a) = 2 pi l j / K.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class Domain:
    """The periodic interval (a, b)."""

    a: float
    b: float

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError("domain endpoints must be finite")
        if not self.b > self.a:
            raise ValueError(f"domain needs b > a, got ({self.a}, {self.b})")

    @property
    def length(self) -> float:
        return self.b - self.a


@dataclass(frozen=True)
class UniformGrid:
    """K equispaced nodes plus the periodic closure node x_K = x_0 + L."""

    domain: Domain
    n_points: int

    def __post_init__(self):
        if self.n_points < 2 or self.n_points % 2 != 0:
            raise ValueError(f"grid size must be even and >= 2, got {self.n_points}")

    @property
    def h(self) -> float:
        return self.domain.length / self.n_points

    @property
    def nodes(self) -> np.ndarray:
        return _grid_nodes(self.domain, self.n_points)


@lru_cache(maxsize=256)
def _grid_nodes(domain: Domain, k: int) -> np.ndarray:
    nodes = domain.a + np.arange(k + 1) * (domain.length / k)
    nodes.setflags(write=False)
    return nodes


@lru_cache(maxsize=256)
def angular_frequencies(domain: Domain, k: int) -> np.ndarray:
    """mu_l = 2 pi l / L for l in T_K, natural order."""
    mu = (2.0 * np.pi / domain.length) * np.arange(-(k // 2), k // 2)
    mu.setflags(write=False)
    return mu


@lru_cache(maxsize=256)
def _free_phase(domain: Domain, k: int, t: float) -> np.ndarray:
    mu = angular_frequencies(domain, k)
    phase = np.exp(-1j * t * mu * mu)
    phase.setflags(write=False)
    return phase


def _frozen_complex(values) -> np.ndarray:
    out = np.array(values, dtype=complex, copy=True)
    out.setflags(write=False)
    return out


class SpectralField:
    """A trigonometric polynomial given by coefficients over T_K.

    Coefficients are copied on construction and frozen; fields are safe
    to share between threads.
    """

    __slots__ = ("domain", "coeffs")

    def __init__(self, domain: Domain, coeffs):
        coeffs = _frozen_complex(coeffs)
        if coeffs.ndim != 1 or len(coeffs) < 2 or len(coeffs) % 2 != 0:
            raise ValueError(f"coefficient count must be even and >= 2, got shape {coeffs.shape}")
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "coeffs", coeffs)

    def __setattr__(self, name, value):
        raise AttributeError("SpectralField is immutable")

    @property
    def bandwidth(self) -> int:
        return len(self.coeffs)

    def __repr__(self):
        return f"SpectralField(K={self.bandwidth}, domain=({self.domain.a}, {self.domain.b}))"


class NodalField:
    """Grid values v_0..v_K with the periodic closure v_K = v_0."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: UniformGrid, values):
        values = _frozen_complex(values)
        if values.ndim != 1 or len(values) != grid.n_points + 1:
            raise ValueError(
                f"need {grid.n_points + 1} values including the closure entry, got {len(values)}"
            )
        v0, vk = values[0], values[-1]
        if not (v0 == vk or (np.isnan(v0) and np.isnan(vk))):
            raise ValueError("periodic closure violated: values[K] != values[0]")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", values)

    def __setattr__(self, name, value):
        raise AttributeError("NodalField is immutable")

    def __repr__(self):
        return f"NodalField(K={self.grid.n_points})"


def sample_function(grid: UniformGrid, fn: Callable[[np.ndarray], np.ndarray]) -> NodalField:
    """Sample a periodic function at the grid nodes.

    The closure entry is taken from x_0, not x_K, so sampling functions
    that are not exactly L-periodic still yields a valid nodal field.
    """
    values = np.asarray(fn(grid.nodes), dtype=complex).copy()
    values[-1] = values[0]
    return NodalField(grid, values)


# ---------------------------------------------------------------------------
# raw-array kernels; public operations and the time steppers share these


def _pad_natural(coeffs: np.ndarray, m: int) -> np.ndarray:
    k = len(coeffs)
    out = np.zeros(m, dtype=complex)
    off = (m - k) // 2
    out[off : off + k] = coeffs
    return out


def _values_from_coeffs(coeffs: np.ndarray, m: int) -> np.ndarray:
    """Interior grid values (length m) of a bandwidth-K field, K <= m."""
    return np.fft.ifft(np.fft.ifftshift(_pad_natural(coeffs, m))) * m


def _coeffs_from_values(interior: np.ndarray) -> np.ndarray:
    return np.fft.fftshift(np.fft.fft(interior)) / len(interior)


def _central_slice(coeffs: np.ndarray, n: int) -> np.ndarray:
    off = (len(coeffs) - n) // 2
    return coeffs[off : off + n]


# ---------------------------------------------------------------------------
# public operations


def interpolate(v: NodalField) -> SpectralField:
    """Trigonometric interpolation of nodal data (exact on bandwidth K)."""
    interior = v.values[:-1]
    return SpectralField(v.grid.domain, _coeffs_from_values(interior))


def evaluate_on_grid(u: SpectralField, m: int) -> NodalField:
    """Evaluate a bandwidth-K field on the m-point grid, m >= K even.

    Alias-free: interpolating the result at bandwidth m recovers the
    original coefficients exactly (up to rounding).
    """
    k = u.bandwidth
    if m < k:
        raise ValueError(f"evaluation grid ({m}) coarser than the field bandwidth ({k})")
    if m % 2 != 0:
        raise ValueError(f"evaluation grid size must be even, got {m}")
    interior = _values_from_coeffs(u.coeffs, m)
    values = np.concatenate([interior, interior[:1]])
    return NodalField(UniformGrid(u.domain, m), values)


def truncate(u: SpectralField, n: int) -> SpectralField:
    """Orthogonal projection onto bandwidth n <= K (drop outer modes)."""
    if n > u.bandwidth:
        raise ValueError(f"cannot widen: target {n} > bandwidth {u.bandwidth}")
    if n < 2 or n % 2 != 0:
        raise ValueError(f"target bandwidth must be even and >= 2, got {n}")
    return SpectralField(u.domain, _central_slice(u.coeffs, n))


def free_flow(u: SpectralField, t: float) -> SpectralField:
    """Exact free Schrodinger flow: c_l <- exp(-i t mu_l^2) c_l.

    Diagonal and unimodular, so every Sobolev norm is preserved.
    """
    phase = _free_phase(u.domain, u.bandwidth, float(t))
    return SpectralField(u.domain, u.coeffs * phase)


def extended_product(w: SpectralField, g: SpectralField) -> SpectralField:
    """Bandwidth-N projection of the pointwise product W*g, W in X_{2N}.

    Both factors are evaluated on the 4N grid, multiplied there,
    interpolated at bandwidth 4N and truncated to N.  The product has
    frequencies inside T_{4N}, so the 4N-point interpolation is exact
    and the result equals the direct convolution
    (W g)_l = sum_{k in T_N} W_{l-k} g_k for every l in T_N.
    """
    n = g.bandwidth
    if w.bandwidth != 2 * n:
        raise ValueError(
            f"first factor must live at exactly twice the bandwidth: {w.bandwidth} != 2*{n}"
        )
    if w.domain != g.domain:
        raise ValueError("factors live on different domains")
    m = 4 * n
    w_vals = _values_from_coeffs(w.coeffs, m)
    return SpectralField(w.domain, _product_with_values(w_vals, g.coeffs, n))


def _product_with_values(w_vals: np.ndarray, g_coeffs: np.ndarray, n: int) -> np.ndarray:
    """Kernel of extended_product given precomputed factor values on 4N nodes."""
    m = 4 * n
    g_vals = _values_from_coeffs(g_coeffs, m)
    return _central_slice(_coeffs_from_values(w_vals * g_vals), n)


def sobolev_norm(u: SpectralField, order: int = 0) -> float:
    """H^m norm ( L * sum_l (1 + mu_l^2)^m |c_l|^2 )^{1/2}; m=0 is L^2."""
    if order < 0:
        raise ValueError(f"norm order must be >= 0, got {order}")
    mu = angular_frequencies(u.domain, u.bandwidth)
    weights = (1.0 + mu * mu) ** order
    total = np.sum(weights * np.abs(u.coeffs) ** 2)
    return float(np.sqrt(u.domain.length * total))


def diff_norm(u: SpectralField, ref: SpectralField, order: int = 0) -> float:
    """Sobolev norm of (u - ref) with u zero-padded to the reference bandwidth."""
    if u.domain != ref.domain:
        raise ValueError("fields live on different domains")
    if ref.bandwidth < u.bandwidth:
        raise ValueError(
            f"reference bandwidth {ref.bandwidth} below field bandwidth {u.bandwidth}"
        )
    if order < 0:
        raise ValueError(f"norm order must be >= 0, got {order}")
    diff = _pad_natural(u.coeffs, ref.bandwidth) - ref.coeffs
    mu = angular_frequencies(ref.domain, ref.bandwidth)
    weights = (1.0 + mu * mu) ** order
    total = np.sum(weights * np.abs(diff) ** 2)
    return float(np.sqrt(ref.domain.length * total))
