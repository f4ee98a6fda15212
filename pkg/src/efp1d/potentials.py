"""Potentials and their spectrally projected phase factors.

The extended pseudospectral steppers never sample a potential V at grid
nodes.  V enters the scheme only through the bandwidth-2N projection of
the phase function exp(-i tau V), stored here as a PhaseFactorTable.
Square wells admit a closed form (the integrand is piecewise constant);
every other kind goes through certified refining quadrature.
"""

from __future__ import annotations

import abc
import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from efp1d.errors import QuadratureError
from efp1d.spectral import Domain, SpectralField, _central_slice, _values_from_coeffs


class Potential(abc.ABC):
    """A real-valued potential on a periodic interval."""

    domain: Domain

    @abc.abstractmethod
    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Vectorized pointwise values; no domain check on this path."""

    @abc.abstractmethod
    def cache_key(self) -> str:
        """A filename-safe string identifying this potential exactly."""

    def analytic_phase_coeffs(self, tau: float, n: int):
        """Closed-form projection coefficients, or None if unavailable."""
        return None

    @property
    def kind(self) -> str:
        return type(self).__name__


@dataclass(frozen=True)
class SquareWell(Potential):
    """0 inside the open well (inner_left, inner_right), depth outside.

    The well edges themselves take the outside value.
    """

    domain: Domain
    inner_left: float = -4.0
    inner_right: float = 4.0
    depth: float = 10.0

    def __post_init__(self):
        if not (self.domain.a < self.inner_left < self.inner_right < self.domain.b):
            raise ValueError(
                f"well ({self.inner_left}, {self.inner_right}) must sit strictly inside "
                f"({self.domain.a}, {self.domain.b})"
            )

    def __call__(self, x):
        x = np.asarray(x)
        inside = (x > self.inner_left) & (x < self.inner_right)
        return np.where(inside, 0.0, self.depth)

    def cache_key(self):
        return (
            f"squarewell_{self.domain.a!r}_{self.domain.b!r}_"
            f"{self.inner_left!r}_{self.inner_right!r}_{self.depth!r}"
        )

    def analytic_phase_coeffs(self, tau, n):
        # exp(-i tau V) is piecewise constant, so each coefficient is a
        # sum of elementary integrals of e^{-i mu_l (x-a)} over pieces
        dom = self.domain
        ls = np.arange(-n, n)
        mu = 2.0 * np.pi * ls / dom.length
        pieces = (
            (dom.a, self.inner_left, self.depth),
            (self.inner_left, self.inner_right, 0.0),
            (self.inner_right, dom.b, self.depth),
        )
        out = np.zeros(2 * n, dtype=complex)
        nz = mu != 0.0
        for p, q, value in pieces:
            seg = np.empty(2 * n, dtype=complex)
            seg[nz] = (
                np.exp(-1j * mu[nz] * (p - dom.a)) - np.exp(-1j * mu[nz] * (q - dom.a))
            ) / (1j * mu[nz])
            seg[~nz] = q - p
            out += np.exp(-1j * tau * value) * seg
        return out / dom.length


@dataclass(frozen=True)
class PowerLaw(Potential):
    """V(x) = |x|^alpha; has a derivative kink at x = 0."""

    domain: Domain
    alpha: float

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")

    def __call__(self, x):
        return np.abs(np.asarray(x, dtype=float)) ** self.alpha

    def cache_key(self):
        return f"powerlaw_{self.domain.a!r}_{self.domain.b!r}_{self.alpha!r}"


@dataclass(frozen=True)
class WindowedPowerLaw(Potential):
    """V(x) = |x|^alpha (1 - x^2/b^2)^p on a symmetric domain (-b, b).

    The window factor vanishes at the boundary, raising the periodic
    regularity of V compared to the bare power law.
    """

    domain: Domain
    alpha: float
    window_power: int

    def __post_init__(self):
        if self.domain.a != -self.domain.b:
            raise ValueError("windowed power law needs a symmetric domain (-b, b)")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.window_power < 1:
            raise ValueError(f"window power must be >= 1, got {self.window_power}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        window = 1.0 - (x / self.domain.b) ** 2
        return np.abs(x) ** self.alpha * window**self.window_power

    def cache_key(self):
        return (
            f"windowedpowerlaw_{self.domain.a!r}_{self.domain.b!r}_"
            f"{self.alpha!r}_{self.window_power}"
        )


@dataclass(frozen=True)
class ZeroPotential(Potential):
    domain: Domain

    def __call__(self, x):
        return np.zeros_like(np.asarray(x, dtype=float))

    def cache_key(self):
        return f"zero_{self.domain.a!r}_{self.domain.b!r}"

    def analytic_phase_coeffs(self, tau, n):
        out = np.zeros(2 * n, dtype=complex)
        out[n] = 1.0  # exp(0) is the constant 1
        return out


@dataclass(frozen=True)
class CallablePotential(Potential):
    """Wrap an arbitrary vectorized callable; keyed by an explicit name."""

    domain: Domain
    fn: Callable[[np.ndarray], np.ndarray]
    key: str

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)

    def cache_key(self):
        return f"callable_{self.key}_{self.domain.a!r}_{self.domain.b!r}"


_STANDARD_BOX = Domain(-16.0, 16.0)


POTENTIAL_NAMES = ("v1", "v2", "v3", "v4", "zero")


def standard_potential(name: str, domain: Domain = _STANDARD_BOX) -> Potential:
    """The study catalog, ordered by increasing periodic regularity.

    v1: discontinuous square well;  v2: |x|^0.76 (kink, W^{1,4});
    v3: |x|^1.51 windowed (H^2);    v4: |x|^2.51 windowed (H^3);
    zero: free evolution.
    """
    key = name.lower()
    if key == "v1":
        return SquareWell(domain)
    if key == "v2":
        return PowerLaw(domain, alpha=0.76)
    if key == "v3":
        return WindowedPowerLaw(domain, alpha=1.51, window_power=2)
    if key == "v4":
        return WindowedPowerLaw(domain, alpha=2.51, window_power=3)
    if key == "zero":
        return ZeroPotential(domain)
    raise ValueError(
        f"unknown potential {name!r}; choose from {', '.join(POTENTIAL_NAMES)}"
    )


def eval_potential(potential: Potential, x) -> float | np.ndarray:
    """Checked pointwise evaluation; x must lie in [a, b]."""
    arr = np.asarray(x, dtype=float)
    if np.any(arr < potential.domain.a) or np.any(arr > potential.domain.b):
        raise ValueError(
            f"evaluation point outside [{potential.domain.a}, {potential.domain.b}]"
        )
    values = potential(arr)
    if np.isscalar(x) or arr.ndim == 0:
        return float(values)
    return values


# ---------------------------------------------------------------------------
# phase-factor tables


@dataclass
class PhaseFactorTable:
    """Bandwidth-2n projection of exp(-i tau V).

    ``projection`` holds the coefficients over T_{2n}; ``values_on``
    returns (and caches) the grid values needed by the product kernel,
    so repeated time steps do not re-evaluate the inverse transform.
    """

    potential: Potential
    tau: float
    n: int
    projection: SpectralField
    tolerance: float
    achieved: float
    levels: int
    provenance: str  # "analytic" or "quadrature"
    _values: dict = field(default_factory=dict, repr=False, compare=False)

    def values_on(self, m: int) -> np.ndarray:
        got = self._values.get(m)
        if got is None:
            got = _values_from_coeffs(self.projection.coeffs, m)
            got.setflags(write=False)
            self._values[m] = got  # benign race: recomputation is idempotent
        return got


def quadrature_phase_coeffs(
    potential: Potential,
    tau: float,
    n: int,
    tol: float = 1e-12,
    max_points: int = 2**22,
    refine_to_floor: bool = False,
):
    """Projection coefficients by refining equispaced quadrature.

    Doubles the point count until two successive levels agree to tol in
    the maximum coefficient difference.  On the symmetric catalog box
    with power-of-two counts the kink x=0 and any piece boundaries fall
    on quadrature nodes.  Returns (coeffs, levels, achieved); raises
    QuadratureError with the best achieved agreement if the point
    budget is exhausted first.

    With ``refine_to_floor`` the refinement keeps going after tol is met
    for as long as each doubling still clearly improves the agreement,
    i.e. until the rounding-noise plateau.  Long runs multiply by the
    table once per step, so residual table error accumulates roughly
    linearly with the step count; driving it to the floor costs a few
    extra transforms once per run and removes that ceiling.
    """
    domain = potential.domain
    m = max(4 * n, 2048)
    prev = None
    prev_diff = np.inf
    best = np.inf
    levels = 0
    met: tuple | None = None
    while m <= max_points:
        x = domain.a + np.arange(m) * (domain.length / m)
        samples = np.exp(-1j * tau * potential(x))
        coeffs = _central_slice(np.fft.fftshift(np.fft.fft(samples)) / m, 2 * n)
        levels += 1
        if prev is not None:
            diff = float(np.max(np.abs(coeffs - prev)))
            best = min(best, diff)
            if diff <= tol:
                met = (coeffs, levels, diff)
                if not refine_to_floor:
                    return met
                if diff > 0.6 * prev_diff:  # no longer improving: noise plateau
                    return met
            prev_diff = diff
        prev = coeffs
        m *= 2
    if met is not None:
        return met
    raise QuadratureError(
        f"phase quadrature for {potential.cache_key()} stalled at "
        f"{best:.3e} with {max_points} points (requested tol {tol:g})",
        achieved=best,
    )


def phase_projection(
    potential: Potential,
    tau: float,
    n: int,
    tol: float = 1e-12,
    max_points: int = 2**22,
    refine_to_floor: bool = False,
) -> PhaseFactorTable:
    """Build the bandwidth-2n table of exp(-i tau V)."""
    if tau <= 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if n < 2 or n % 2 != 0:
        raise ValueError(f"n must be even and >= 2, got {n}")
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    closed_form = potential.analytic_phase_coeffs(tau, n)
    if closed_form is not None:
        coeffs, levels, achieved, provenance = closed_form, 0, 0.0, "analytic"
    else:
        coeffs, levels, achieved = quadrature_phase_coeffs(
            potential, tau, n, tol=tol, max_points=max_points,
            refine_to_floor=refine_to_floor,
        )
        provenance = "quadrature"
    return PhaseFactorTable(
        potential=potential,
        tau=float(tau),
        n=int(n),
        projection=SpectralField(potential.domain, coeffs),
        tolerance=float(tol),
        achieved=float(achieved),
        levels=levels,
        provenance=provenance,
    )


_phase_cache: dict = {}
_phase_cache_lock = threading.Lock()


def phase_factor_cache(
    potential: Potential,
    tau: float,
    n: int,
    tol: float = 1e-12,
) -> PhaseFactorTable:
    """Memoized phase_projection keyed by (potential, tau, n, tol).

    Tables built here feed time-stepping loops, so the quadrature is
    pushed to its noise floor rather than stopping at tol: the residual
    would otherwise accumulate over the step count.
    """
    key = (potential, float(tau), int(n), float(tol))
    with _phase_cache_lock:
        table = _phase_cache.get(key)
    if table is not None:
        return table
    table = phase_projection(potential, tau, n, tol=tol, refine_to_floor=True)
    with _phase_cache_lock:
        # keep the first one stored so concurrent builders agree on the object
        return _phase_cache.setdefault(key, table)


def clear_phase_cache():
    with _phase_cache_lock:
        _phase_cache.clear()
