"""Time-stepping schemes on top of the spectral core.

Three schemes share one state layout (synchronized nodal and spectral
views of the same bandwidth-N field):

* ``lt-efp``  Lie splitting with the extended pseudospectral product;
  the potential enters only through its projected phase-factor table.
* ``st-efp``  Strang splitting around the same potential+nonlinear block.
* ``fswq``    Lie splitting with M-point quadrature of the full phase;
  this baseline samples V pointwise, and M=N is the classical Fourier
  pseudospectral split step.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from efp1d.errors import BlowUpError, ConfigError
from efp1d.formats import read_spectral_csv, write_spectral_csv
from efp1d.potentials import PhaseFactorTable, Potential, phase_factor_cache
from efp1d.spectral import (
    Domain,
    NodalField,
    SpectralField,
    UniformGrid,
    _central_slice,
    _coeffs_from_values,
    _product_with_values,
    evaluate_on_grid,
    free_flow,
    interpolate,
    sample_function,
    truncate,
)

SCHEMES = ("lt-efp", "st-efp", "fswq")


def gaussian_datum(x):
    """The standard initial profile exp(-x^2/2)."""
    return np.exp(-0.5 * np.asarray(x, dtype=float) ** 2)


@dataclass(frozen=True)
class SchemeConfig:
    """Everything needed to reproduce a run.

    The step count is fixed at construction: T/tau must be an integer to
    within 1e-9 relative, and the run takes exactly round(T/tau) steps.
    """

    scheme: str
    potential: Potential
    n: int
    tau: float
    t_final: float
    beta: float = 1.0
    sigma: float = 1.0
    quad_points: Optional[int] = None
    fswq_init: str = "shifted"
    phase_tol: float = 1e-12
    n_steps: int = field(init=False)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if not isinstance(self.potential, Potential):
            raise ConfigError("potential must be a Potential instance")
        if self.n < 2 or self.n % 2 != 0:
            raise ConfigError(f"n must be even and >= 2, got {self.n}")
        if not (np.isfinite(self.tau) and self.tau > 0):
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if not (np.isfinite(self.t_final) and self.t_final >= 0):
            raise ConfigError(f"t_final must be >= 0, got {self.t_final}")
        if not np.isfinite(self.beta):
            raise ConfigError(f"beta must be finite, got {self.beta}")
        if not (np.isfinite(self.sigma) and self.sigma >= 1):
            raise ConfigError(f"sigma must be >= 1, got {self.sigma}")
        if self.phase_tol <= 0:
            raise ConfigError(f"phase_tol must be positive, got {self.phase_tol}")
        if self.fswq_init not in ("shifted", "plain"):
            raise ConfigError(f"fswq_init must be 'shifted' or 'plain', got {self.fswq_init!r}")
        if self.scheme == "fswq":
            m = self.quad_points
            if m is None:
                raise ConfigError("fswq needs quad_points (the quadrature size M >= N)")
            if m < self.n or m % 2 != 0:
                raise ConfigError(f"quad_points must be even and >= n={self.n}, got {m}")
        elif self.quad_points is not None:
            raise ConfigError("quad_points is only meaningful for the fswq scheme")
        if self.t_final == 0.0:
            steps = 0
        else:
            steps = int(round(self.t_final / self.tau))
            if abs(steps * self.tau - self.t_final) > 1e-9 * self.t_final:
                raise ConfigError(
                    f"t_final={self.t_final} is not an integer multiple of tau={self.tau}"
                )
        object.__setattr__(self, "n_steps", steps)

    @property
    def domain(self) -> Domain:
        return self.potential.domain

    @property
    def grid(self) -> UniformGrid:
        return UniformGrid(self.domain, self.n)

    @property
    def h(self) -> float:
        return self.domain.length / self.n


@dataclass(frozen=True)
class SolverState:
    """Synchronized views of the current iterate.

    Invariant: ``spectral`` equals ``interpolate(nodal)`` up to machine
    rounding after every step of every scheme.
    """

    step_index: int
    time: float
    nodal: NodalField
    spectral: SpectralField


@dataclass
class Trajectory:
    config: SchemeConfig
    steps: list
    times: list
    fields: list
    final_state: SolverState

    @property
    def final_field(self) -> SpectralField:
        return self.fields[-1]


def _require_finite(values: np.ndarray, step_index: int, time: float):
    if not np.all(np.isfinite(values)):
        raise BlowUpError(
            f"non-finite nodal values at step {step_index} (t={time:g})",
            step_index=step_index,
            time=time,
        )


def initial_state(config: SchemeConfig, psi0: Optional[Callable] = None) -> SolverState:
    """Build the step-0 state for the configured scheme.

    The extended schemes start from pointwise samples on the N-grid.
    The quadrature baseline projects the datum through its M-grid, and
    in "shifted" mode additionally applies one free-flight phase to the
    projected coefficients.
    """
    if psi0 is None:
        psi0 = gaussian_datum
    if config.scheme == "fswq":
        fine = sample_function(UniformGrid(config.domain, config.quad_points), psi0)
        _require_finite(fine.values, 0, 0.0)
        spectral = truncate(interpolate(fine), config.n)
        if config.fswq_init == "shifted":
            spectral = free_flow(spectral, config.tau)
        nodal = evaluate_on_grid(spectral, config.n)
    else:
        nodal = sample_function(config.grid, psi0)
        _require_finite(nodal.values, 0, 0.0)
        spectral = interpolate(nodal)
    return SolverState(step_index=0, time=0.0, nodal=nodal, spectral=spectral)


def nonlinear_nodal_step(v: NodalField, tau: float, beta: float, sigma: float) -> NodalField:
    """Exact flow of the nonlinearity on nodal values.

    v_j <- v_j exp(-i tau beta |v_j|^(2 sigma)); the multiplier is
    unimodular, so every nodal modulus is preserved.
    """
    interior = v.values[:-1]
    rho = np.abs(interior) ** 2
    out = interior * np.exp(-1j * (tau * beta) * rho**sigma)
    return NodalField(v.grid, np.concatenate([out, out[:1]]))


def _check_table(table: PhaseFactorTable, config: SchemeConfig):
    if table.n != config.n or table.tau != config.tau:
        raise ConfigError(
            f"phase table built for (n={table.n}, tau={table.tau}) does not match "
            f"config (n={config.n}, tau={config.tau})"
        )


def lt_efp_step(state: SolverState, config: SchemeConfig, table: PhaseFactorTable) -> SolverState:
    """One Lie step: nonlinear kick, projected-phase product, free flight.

    The potential is never sampled here; it acts through the
    bandwidth-2N table, and the product is the exact bandwidth-N
    projection of (table function) * (kicked field).
    """
    _check_table(table, config)
    n = config.n
    kicked = nonlinear_nodal_step(state.nodal, config.tau, config.beta, config.sigma)
    g = interpolate(kicked)
    prod = SpectralField(config.domain, _product_with_values(table.values_on(4 * n), g.coeffs, n))
    u = free_flow(prod, config.tau)
    nodal = evaluate_on_grid(u, n)
    return SolverState(
        step_index=state.step_index + 1,
        time=(state.step_index + 1) * config.tau,
        nodal=nodal,
        spectral=u,
    )


def st_efp_step(state: SolverState, config: SchemeConfig, table: PhaseFactorTable) -> SolverState:
    """One Strang step: half free flight around the full potential block."""
    _check_table(table, config)
    n = config.n
    half = free_flow(state.spectral, config.tau / 2)
    mid = evaluate_on_grid(half, n)
    kicked = nonlinear_nodal_step(mid, config.tau, config.beta, config.sigma)
    g = interpolate(kicked)
    prod = SpectralField(config.domain, _product_with_values(table.values_on(4 * n), g.coeffs, n))
    u = free_flow(prod, config.tau / 2)
    nodal = evaluate_on_grid(u, n)
    return SolverState(
        step_index=state.step_index + 1,
        time=(state.step_index + 1) * config.tau,
        nodal=nodal,
        spectral=u,
    )


def lt_fswq_step(state: SolverState, config: SchemeConfig) -> SolverState:
    """One Lie step of the quadrature baseline.

    The current field is evaluated on the M-point grid, multiplied by
    the full phase exp(-i tau (V + beta rho^sigma)) with V sampled at
    the quadrature nodes, transformed back and truncated to T_N.
    """
    n, m = config.n, config.quad_points
    fine = evaluate_on_grid(state.spectral, m)
    interior = fine.values[:-1]
    x = fine.grid.nodes[:-1]
    rho = np.abs(interior) ** 2
    phase = np.exp(-1j * config.tau * (config.potential(x) + config.beta * rho**config.sigma))
    coeffs = _central_slice(_coeffs_from_values(interior * phase), n)
    u = free_flow(SpectralField(config.domain, coeffs), config.tau)
    nodal = evaluate_on_grid(u, n)
    return SolverState(
        step_index=state.step_index + 1,
        time=(state.step_index + 1) * config.tau,
        nodal=nodal,
        spectral=u,
    )


def run(
    config: SchemeConfig,
    psi0: Optional[Callable] = None,
    snapshot_stride: Optional[int] = None,
) -> Trajectory:
    """Advance the configured scheme over n_steps = T/tau steps.

    Snapshots are recorded at step 0, at every ``snapshot_stride``-th
    step if a stride is given, and at the final step always.  Any
    non-finite nodal value aborts with BlowUpError.
    """
    if snapshot_stride is not None and snapshot_stride < 1:
        raise ConfigError(f"snapshot_stride must be >= 1, got {snapshot_stride}")
    state = initial_state(config, psi0)
    table = None
    if config.scheme in ("lt-efp", "st-efp"):
        table = phase_factor_cache(config.potential, config.tau, config.n, tol=config.phase_tol)
    step_fn = {
        "lt-efp": lambda s: lt_efp_step(s, config, table),
        "st-efp": lambda s: st_efp_step(s, config, table),
        "fswq": lambda s: lt_fswq_step(s, config),
    }[config.scheme]

    steps, times, fields = [0], [0.0], [state.spectral]
    for _ in range(config.n_steps):
        state = step_fn(state)
        _require_finite(state.nodal.values, state.step_index, state.time)
        is_last = state.step_index == config.n_steps
        if is_last or (snapshot_stride and state.step_index % snapshot_stride == 0):
            steps.append(state.step_index)
            times.append(state.time)
            fields.append(state.spectral)
    return Trajectory(config=config, steps=steps, times=times, fields=fields, final_state=state)


# ---------------------------------------------------------------------------
# reference solutions


def default_cache_dir() -> Path:
    env = os.environ.get("EFP_CACHE_DIR")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "efp1d"


def reference_key(
    potential: Potential, beta: float, sigma: float, t_final: float, n_ref: int, tau_ref: float
) -> str:
    return (
        f"ref_{potential.cache_key()}_beta{float(beta)!r}_sigma{float(sigma)!r}"
        f"_T{float(t_final)!r}_n{int(n_ref)}_tau{float(tau_ref)!r}"
    )


def reference_solution(
    potential: Potential,
    beta: float,
    sigma: float,
    t_final: float,
    n_ref: int,
    tau_ref: float,
    cache_dir=None,
    phase_tol: float = 1e-12,
) -> SpectralField:
    """Strang-splitting reference field at time T on a fine grid.

    Results are cached on disk keyed by all parameters; identical inputs
    produce identical cached bytes.  The standard Gaussian datum is
    always used (a free-form callable cannot be part of a cache key).
    """
    h_ref = potential.domain.length / n_ref
    if tau_ref > h_ref * h_ref / np.pi:
        raise ConfigError(
            f"reference step tau={tau_ref:g} violates tau <= h^2/pi = {h_ref * h_ref / np.pi:g}"
        )
    directory = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    path = directory / (reference_key(potential, beta, sigma, t_final, n_ref, tau_ref) + ".csv")
    if path.exists():
        return read_spectral_csv(path, potential.domain)
    config = SchemeConfig(
        scheme="st-efp",
        potential=potential,
        n=n_ref,
        tau=tau_ref,
        t_final=t_final,
        beta=beta,
        sigma=sigma,
        phase_tol=phase_tol,
    )
    final = run(config).final_field
    directory.mkdir(parents=True, exist_ok=True)
    write_spectral_csv(final, path)
    return final
