"""Convergence-study harness: error sweeps, order fits, report files.

A study runs one splitting scheme over a ladder of grid sizes, compares
each final field against a shared fine Strang reference, and fits
log-log slopes.  Spatial sweeps keep the time step fixed; temporal
sweeps derive it from a coupling tau = c * h**gamma.  Error points that
sit on the reference-accuracy floor are flagged and excluded from fits.
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from time import perf_counter

import numpy as np

from .errors import ConfigError
from .potentials import Potential
from .propagators import SCHEMES, SchemeConfig, reference_key, reference_solution, run
from .spectral import diff_norm

NORM_ORDERS = {"l2": 0, "h1": 1}

ERRORS_HEADER = "scheme,potential,norm,N,h,tau,error,wall_ms"
ORDERS_HEADER = "norm,coupling,slope,residual,points"

# error < FLOOR_FACTOR * (reference self-consistency estimate) is not a
# trustworthy measurement of the scheme and never enters a slope fit
FLOOR_FACTOR = 10.0


@dataclass(frozen=True)
class StudyConfig:
    """Plan for one convergence sweep.

    ``kind`` selects the sweep variable: "spatial" runs every n in
    ``n_values`` at the fixed step ``tau``; "temporal" runs every n once
    per coupling (c, gamma) with tau = c * h**gamma snapped to divide
    ``t_final`` exactly.  ``strict_cfl`` additionally insists every
    run satisfies tau <= h^2/pi.  ``timing`` turns the wall_ms column
    on; it defaults off so identical configs produce identical bytes.
    """

    kind: str
    scheme: str
    potential: Potential
    n_values: tuple
    tau: float = 1e-5
    couplings: tuple = ()
    t_final: float = 0.5
    beta: float = 1.0
    sigma: float = 1.0
    norms: tuple = ("l2", "h1")
    n_ref: int = 4096
    tau_ref: float = 1e-5
    quad_factor: int = 1
    fswq_init: str = "shifted"
    strict_cfl: bool = False
    timing: bool = False
    jobs: int = 1
    phase_tol: float = 1e-12
    cache_dir: object = None

    def __post_init__(self):
        if self.kind not in ("spatial", "temporal"):
            raise ConfigError(f"unknown study kind {self.kind!r}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")
        if not isinstance(self.potential, Potential):
            raise ConfigError("potential must be a Potential instance")
        n_values = tuple(int(n) for n in self.n_values)
        object.__setattr__(self, "n_values", n_values)
        if not n_values:
            raise ConfigError("n_values must not be empty")
        for n in n_values:
            if n < 4 or n % 2 != 0:
                raise ConfigError(f"grid sizes must be even and >= 4, got {n}")
        if any(b <= a for a, b in zip(n_values, n_values[1:])):
            raise ConfigError(f"n_values must be strictly increasing, got {n_values}")
        norms = tuple(self.norms)
        object.__setattr__(self, "norms", norms)
        if not norms or len(set(norms)) != len(norms):
            raise ConfigError(f"norms must be non-empty and distinct, got {norms}")
        for norm in norms:
            if norm not in NORM_ORDERS:
                raise ConfigError(f"unknown norm {norm!r}; choose from {sorted(NORM_ORDERS)}")
        couplings = tuple((float(c), float(g)) for c, g in self.couplings)
        object.__setattr__(self, "couplings", couplings)
        if self.kind == "temporal":
            if not couplings:
                raise ConfigError("temporal study needs at least one (c, gamma) coupling")
            for c, g in couplings:
                if c <= 0 or g < 0:
                    raise ConfigError(f"coupling must have c > 0 and gamma >= 0, got {c}:{g}")
        elif couplings:
            raise ConfigError("couplings only apply to temporal studies")
        if self.kind == "spatial" and self.tau <= 0:
            raise ConfigError(f"spatial step tau must be positive, got {self.tau}")
        if self.t_final <= 0:
            raise ConfigError(f"t_final must be positive, got {self.t_final}")
        if self.n_ref <= max(n_values):
            raise ConfigError(
                f"reference grid n_ref={self.n_ref} must be finer than the "
                f"finest study grid {max(n_values)}"
            )
        if self.tau_ref <= 0:
            raise ConfigError(f"tau_ref must be positive, got {self.tau_ref}")
        if self.quad_factor < 1:
            raise ConfigError(f"quad_factor must be >= 1, got {self.quad_factor}")
        if self.scheme != "fswq" and self.quad_factor != 1:
            raise ConfigError("quad_factor applies to the fswq scheme only")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be >= 1, got {self.jobs}")
        # fail fast on an infeasible plan rather than mid-sweep
        self.planned_runs()

    def planned_runs(self):
        """Ordered (coupling_label, n, tau) triples for the sweep."""
        length = self.potential.domain.length
        plan = []
        if self.kind == "spatial":
            for n in self.n_values:
                plan.append(("-", n, float(self.tau)))
        else:
            for c, g in self.couplings:
                label = f"{c:g}:{g:g}"
                for n in self.n_values:
                    h = length / n
                    raw = c * h**g
                    steps = max(1, round(self.t_final / raw))
                    plan.append((label, n, self.t_final / steps))
        if self.strict_cfl:
            for label, n, tau in plan:
                h = length / n
                if tau > h * h / np.pi:
                    raise ConfigError(
                        f"strict-cfl violated at n={n} (coupling {label}): "
                        f"tau={tau:g} > h^2/pi = {h * h / np.pi:g}"
                    )
        return plan


@dataclass(frozen=True)
class RunRow:
    """One (run, norm) error measurement."""

    coupling: str
    norm: str
    n: int
    h: float
    tau: float
    error: float
    wall_ms: float
    floored: bool


@dataclass(frozen=True)
class OrderFit:
    """Fitted slope for one (norm, coupling) series; nan when < 3 clean points."""

    norm: str
    coupling: str
    slope: float
    residual: float
    points: int


@dataclass(frozen=True)
class ErrorReport:
    config: StudyConfig
    rows: tuple
    orders: tuple
    reference_key: str
    floor_estimates: tuple  # aligned with config.norms
    monotone: tuple  # spatial only: per-norm non-increasing check, 5% slack
    version: str = ""


def fit_order(xs, errors):
    """Least-squares slope of log10(error) against log10(x).

    Non-positive error values are dropped with a warning; fewer than
    three surviving points is an error.  Returns (slope, residual) with
    the residual measured as the largest absolute log10 deviation.
    """
    xs = np.asarray(xs, dtype=float)
    es = np.asarray(errors, dtype=float)
    if xs.shape != es.shape or xs.ndim != 1:
        raise ValueError("xs and errors must be 1d arrays of equal length")
    if np.any(xs <= 0):
        raise ValueError("abscissae must be positive")
    keep = es > 0
    if not np.all(keep):
        warnings.warn(
            f"dropping {int(np.sum(~keep))} non-positive error value(s) from order fit",
            stacklevel=2,
        )
        xs, es = xs[keep], es[keep]
    if xs.size < 3:
        raise ValueError(f"order fit needs >= 3 positive points, got {xs.size}")
    lx, le = np.log10(xs), np.log10(es)
    dx = lx - lx.mean()
    denom = float(np.sum(dx * dx))
    if denom == 0.0:
        raise ValueError("order fit needs at least two distinct abscissae")
    slope = float(np.sum(dx * (le - le.mean())) / denom)
    intercept = float(le.mean() - slope * lx.mean())
    residual = float(np.max(np.abs(le - (slope * lx + intercept))))
    return slope, residual


def _scheme_config(cfg: StudyConfig, n: int, tau: float) -> SchemeConfig:
    quad = cfg.quad_factor * n if cfg.scheme == "fswq" else None
    return SchemeConfig(
        scheme=cfg.scheme,
        potential=cfg.potential,
        n=n,
        tau=tau,
        t_final=cfg.t_final,
        beta=cfg.beta,
        sigma=cfg.sigma,
        quad_points=quad,
        fswq_init=cfg.fswq_init,
        phase_tol=cfg.phase_tol,
    )


def _measure(cfg: StudyConfig, label: str, n: int, tau: float, reference, floors):
    started = perf_counter() if cfg.timing else 0.0
    final = run(_scheme_config(cfg, n, tau)).final_field
    wall_ms = (perf_counter() - started) * 1000.0 if cfg.timing else 0.0
    h = cfg.potential.domain.length / n
    rows = []
    for norm, floor in zip(cfg.norms, floors):
        err = diff_norm(final, reference, NORM_ORDERS[norm])
        rows.append(
            RunRow(
                coupling=label,
                norm=norm,
                n=n,
                h=h,
                tau=tau,
                error=err,
                wall_ms=wall_ms,
                floored=err < FLOOR_FACTOR * floor,
            )
        )
    return rows


def _reference_and_floors(cfg: StudyConfig):
    """Shared reference field plus the per-norm self-consistency floors.

    The floor compares the reference against a half-resolution rerun;
    with spatial order >= 2 the difference overstates the reference's
    own error by about 4x, hence the /4.
    """
    args = (cfg.potential, cfg.beta, cfg.sigma, cfg.t_final)
    ref = reference_solution(*args, cfg.n_ref, cfg.tau_ref, cache_dir=cfg.cache_dir)
    half = reference_solution(*args, cfg.n_ref // 2, cfg.tau_ref, cache_dir=cfg.cache_dir)
    floors = tuple(diff_norm(half, ref, NORM_ORDERS[norm]) / 4.0 for norm in cfg.norms)
    return ref, floors


def _run_study(cfg: StudyConfig) -> ErrorReport:
    from . import __version__

    plan = cfg.planned_runs()
    reference, floors = _reference_and_floors(cfg)
    if cfg.jobs == 1:
        packs = [_measure(cfg, *entry, reference, floors) for entry in plan]
    else:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = [pool.submit(_measure, cfg, *entry, reference, floors) for entry in plan]
            packs = [f.result() for f in futures]
    rows = tuple(row for pack in packs for row in pack)

    labels = []
    for label, _, _ in plan:
        if label not in labels:
            labels.append(label)
    orders = []
    for norm in cfg.norms:
        for label in labels:
            series = [r for r in rows if r.norm == norm and r.coupling == label and not r.floored]
            xs = [r.h if cfg.kind == "spatial" else r.tau for r in series]
            es = [r.error for r in series]
            if len(series) < 3:
                orders.append(OrderFit(norm, label, float("nan"), float("nan"), len(series)))
            else:
                try:
                    slope, residual = fit_order(xs, es)
                except ValueError:
                    # sweep degenerated (e.g. snapping collapsed every tau)
                    slope, residual = float("nan"), float("nan")
                orders.append(OrderFit(norm, label, slope, residual, len(series)))

    monotone = ()
    if cfg.kind == "spatial":
        checks = []
        for norm in cfg.norms:
            series = [r for r in rows if r.norm == norm and not r.floored]
            ok = all(b.error <= 1.05 * a.error for a, b in zip(series, series[1:]))
            checks.append(ok)
        monotone = tuple(checks)

    return ErrorReport(
        config=cfg,
        rows=rows,
        orders=tuple(orders),
        reference_key=reference_key(
            cfg.potential, cfg.beta, cfg.sigma, cfg.t_final, cfg.n_ref, cfg.tau_ref
        ),
        floor_estimates=floors,
        monotone=monotone,
        version=__version__,
    )


def spatial_study(cfg: StudyConfig) -> ErrorReport:
    """Error vs mesh size at fixed time step."""
    if cfg.kind != "spatial":
        raise ConfigError(f"spatial_study needs kind='spatial', got {cfg.kind!r}")
    return _run_study(cfg)


def temporal_study(cfg: StudyConfig) -> ErrorReport:
    """Error vs time step along tau = c * h**gamma couplings."""
    if cfg.kind != "temporal":
        raise ConfigError(f"temporal_study needs kind='temporal', got {cfg.kind!r}")
    return _run_study(cfg)


def _fmt(x: float) -> str:
    return repr(float(x))


def emit_report(report: ErrorReport, directory) -> list:
    """Write errors.csv, orders.csv and a gnuplot script into directory.

    Output bytes depend only on the report contents, so identical
    studies reproduce identical files.  Returns the written paths.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    cfg = report.config
    pot_key = cfg.potential.cache_key()

    lines = [ERRORS_HEADER]
    for r in report.rows:
        lines.append(
            f"{cfg.scheme},{pot_key},{r.norm},{r.n},{_fmt(r.h)},{_fmt(r.tau)},"
            f"{_fmt(r.error)},{_fmt(r.wall_ms)}"
        )
    errors_path = directory / "errors.csv"
    errors_path.write_text("\n".join(lines) + "\n")

    lines = [ORDERS_HEADER]
    for o in report.orders:
        lines.append(f"{o.norm},{o.coupling},{_fmt(o.slope)},{_fmt(o.residual)},{o.points}")
    orders_path = directory / "orders.csv"
    orders_path.write_text("\n".join(lines) + "\n")

    x_label, x_col = ("h", 5) if cfg.kind == "spatial" else ("tau", 6)
    plot = [
        "# log-log convergence plot; run: gnuplot plot.gp",
        "set datafile separator ','",
        "set logscale xy",
        "set key left top",
        f"set xlabel '{x_label}'",
        "set ylabel 'error'",
        "set terminal pngcairo size 800,600",
        "set output 'errors.png'",
    ]
    series = []
    for norm in cfg.norms:
        series.append(
            f"'errors.csv' using (strcol(3) eq '{norm}' ? column({x_col}) : NaN):7 "
            f"with points pt 7 title '{norm}'"
        )
    plot.append("plot \\")
    plot.append(", \\\n".join("    " + s for s in series))
    plot_path = directory / "plot.gp"
    plot_path.write_text("\n".join(plot) + "\n")

    return [errors_path, orders_path, plot_path]


def step_benchmark(potential: Potential, n: int, tau: float = 1e-3, steps: int = 20,
                   beta: float = 1.0, sigma: float = 1.0) -> dict:
    """Per-step wall time of the extended-product scheme vs quadrature at 4n.

    Both loops advance the same datum with the same step; a short warmup
    precedes each timing so transform caches do not bias the first
    iterations.  Returns seconds per step for each scheme and the ratio
    extended / quadrature.
    """
    from .potentials import phase_factor_cache
    from .propagators import initial_state, lt_efp_step, lt_fswq_step

    t_final = tau * steps
    cfg_e = SchemeConfig(scheme="lt-efp", potential=potential, n=n, tau=tau,
                         t_final=t_final, beta=beta, sigma=sigma)
    cfg_q = SchemeConfig(scheme="fswq", potential=potential, n=n, tau=tau,
                         t_final=t_final, beta=beta, sigma=sigma, quad_points=4 * n)

    table = phase_factor_cache(potential, tau, n)
    state = initial_state(cfg_e)
    for _ in range(3):
        state = lt_efp_step(state, cfg_e, table)
    started = perf_counter()
    for _ in range(steps):
        state = lt_efp_step(state, cfg_e, table)
    per_step_e = (perf_counter() - started) / steps

    state = initial_state(cfg_q)
    for _ in range(3):
        state = lt_fswq_step(state, cfg_q)
    started = perf_counter()
    for _ in range(steps):
        state = lt_fswq_step(state, cfg_q)
    per_step_q = (perf_counter() - started) / steps

    return {
        "extended": per_step_e,
        "quadrature_4n": per_step_q,
        "ratio": per_step_e / per_step_q,
    }
