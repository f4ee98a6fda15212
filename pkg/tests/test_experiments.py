"""Study harness tests: order fitting, sweep planning, reports.

The end-to-end study cases run deliberately coarse grids for speed;
slope windows at production scale live in the acceptance suite.  The
report golden bytes were produced by this implementation once and
frozen; any formatting drift is a regression.
"""

import numpy as np
import pytest

from efp1d.errors import ConfigError
from efp1d.experiments import (
    ERRORS_HEADER,
    ORDERS_HEADER,
    ErrorReport,
    StudyConfig,
    emit_report,
    fit_order,
    spatial_study,
    step_benchmark,
    temporal_study,
)
from efp1d.potentials import standard_potential


def make_study(**overrides):
    base = dict(
        kind="spatial",
        scheme="st-efp",
        potential=standard_potential("v1"),
        n_values=(16, 32, 64),
        tau=1e-3,
        t_final=0.01,
        n_ref=128,
        tau_ref=1e-3,
    )
    base.update(overrides)
    return StudyConfig(**base)


# ---------------------------------------------------------------- fit_order


def test_fit_order_recovers_exact_power():
    xs = np.array([1.0, 0.5, 0.25])
    slope, residual = fit_order(xs, xs**2)
    assert abs(slope - 2.0) <= 1e-12
    assert residual <= 1e-12


def test_fit_order_constant_errors_give_zero_slope():
    slope, residual = fit_order([1.0, 0.5, 0.25, 0.125], [0.3, 0.3, 0.3, 0.3])
    assert abs(slope) <= 1e-12
    assert residual <= 1e-12


def test_fit_order_tolerates_small_perturbation():
    xs = np.array([1.0, 0.5, 0.25, 0.125])
    delta = 1e-3 * np.sin(np.arange(4.0))
    slope, _ = fit_order(xs, 3.0 * xs**2.5 * (1.0 + delta))
    assert abs(slope - 2.5) <= 0.01


def test_fit_order_filters_nonpositive_with_warning():
    xs = [1.0, 0.5, 0.25, 0.125]
    es = [1.0, 0.25, 0.0625, 0.0]
    with pytest.warns(UserWarning, match="non-positive"):
        slope, _ = fit_order(xs, es)
    assert abs(slope - 2.0) <= 1e-12


def test_fit_order_too_few_points_raises():
    with pytest.raises(ValueError):
        fit_order([1.0, 0.5], [1.0, 0.5])
    # filtering can push a long series under the minimum too
    with pytest.raises(ValueError):
        with pytest.warns(UserWarning):
            fit_order([1.0, 0.5, 0.25, 0.125], [1.0, 0.5, 0.0, -1.0])


def test_fit_order_rejects_bad_abscissae():
    with pytest.raises(ValueError):
        fit_order([1.0, -0.5, 0.25], [1.0, 1.0, 1.0])
    with pytest.raises(ValueError):
        fit_order([1.0, 0.5], [1.0, 1.0, 1.0])


# ---------------------------------------------------------------- StudyConfig


def test_config_rejects_unknown_kind():
    with pytest.raises(ConfigError):
        make_study(kind="temporal-ish")


def test_config_rejects_unknown_scheme():
    with pytest.raises(ConfigError):
        make_study(scheme="rk4")


def test_config_rejects_unknown_norm():
    with pytest.raises(ConfigError):
        make_study(norms=("l2", "linf"))


def test_config_rejects_odd_grid():
    with pytest.raises(ConfigError):
        make_study(n_values=(16, 33))


def test_config_requires_increasing_grids():
    with pytest.raises(ConfigError):
        make_study(n_values=(32, 16))


def test_config_requires_couplings_for_temporal():
    with pytest.raises(ConfigError):
        make_study(kind="temporal")


def test_config_rejects_couplings_for_spatial():
    with pytest.raises(ConfigError):
        make_study(couplings=((0.2, 2.0),))


def test_config_requires_fine_reference():
    with pytest.raises(ConfigError):
        make_study(n_ref=64)


def test_config_quad_factor_only_for_fswq():
    with pytest.raises(ConfigError):
        make_study(quad_factor=4)
    cfg = make_study(scheme="fswq", quad_factor=4)
    assert cfg.quad_factor == 4


def test_strict_cfl_guard_rejects_linear_coupling():
    # tau = 0.2h at n=64 (h=0.5) gives tau=0.1 > h^2/pi ~ 0.0796
    with pytest.raises(ConfigError):
        make_study(
            kind="temporal",
            couplings=((0.2, 1.0),),
            t_final=0.1,
            strict_cfl=True,
        )


def test_strict_cfl_accepts_quadratic_coupling():
    cfg = make_study(
        kind="temporal",
        couplings=((0.2, 2.0),),
        t_final=0.1,
        strict_cfl=True,
    )
    assert cfg.planned_runs()


def test_planned_runs_snap_taus_to_divide_t_final():
    cfg = make_study(
        kind="temporal",
        couplings=((0.2, 2.0), (0.2, 1.0)),
        t_final=0.1,
    )
    plan = cfg.planned_runs()
    assert [label for label, _, _ in plan][:3] == ["0.2:2"] * 3
    for _, _, tau in plan:
        steps = round(cfg.t_final / tau)
        assert steps >= 1
        assert abs(steps * tau - cfg.t_final) <= 1e-12


# ---------------------------------------------------------------- studies


def test_spatial_study_flags_reference_floor(tmp_path):
    # deliberately coarse reference: the n=64 error sits on its floor,
    # gets flagged, and the fit degrades to nan with 2 clean points
    cfg = make_study(cache_dir=tmp_path)
    report = spatial_study(cfg)
    assert len(report.rows) == 6
    assert all(r.error > 0 for r in report.rows)
    for norm in cfg.norms:
        flags = [r.floored for r in report.rows if r.norm == norm]
        assert flags == [False, False, True]
    for fit in report.orders:
        assert fit.points == 2
        assert np.isnan(fit.slope) and np.isnan(fit.residual)
    assert report.monotone == (True, True)
    assert all(f > 0 for f in report.floor_estimates)


def test_spatial_study_is_deterministic(tmp_path):
    cfg = make_study(cache_dir=tmp_path)
    first = spatial_study(cfg)
    second = spatial_study(cfg)
    assert first.rows == second.rows
    out_a = emit_report(first, tmp_path / "a")
    out_b = emit_report(second, tmp_path / "b")
    for pa, pb in zip(out_a, out_b):
        assert pa.read_bytes() == pb.read_bytes()


def test_parallel_jobs_match_serial(tmp_path):
    serial = spatial_study(make_study(cache_dir=tmp_path))
    parallel = spatial_study(make_study(cache_dir=tmp_path, jobs=2))
    assert serial.rows == parallel.rows


def test_zero_potential_study_hits_spectral_floor(tmp_path):
    # free flow is exact in X_N once the Gaussian is resolved, so every
    # error collapses to rounding scale and no slope is meaningful
    cfg = StudyConfig(
        kind="spatial",
        scheme="st-efp",
        potential=standard_potential("zero"),
        n_values=(96, 128, 160),
        tau=1e-3,
        t_final=0.01,
        beta=0.0,
        n_ref=256,
        tau_ref=1e-3,
        cache_dir=tmp_path,
    )
    report = spatial_study(cfg)
    assert max(r.error for r in report.rows) < 1e-12
    assert all(f >= 0 for f in report.floor_estimates)


def test_temporal_study_structure(tmp_path):
    cfg = make_study(
        kind="temporal",
        scheme="lt-efp",
        couplings=((0.2, 2.0), (0.2, 1.0)),
        t_final=0.1,
        tau_ref=5e-4,
        cache_dir=tmp_path,
    )
    report = temporal_study(cfg)
    assert len(report.rows) == 12  # 2 couplings x 3 grids x 2 norms
    assert {r.coupling for r in report.rows} == {"0.2:2", "0.2:1"}
    assert len(report.orders) == 4  # (norm, coupling) pairs
    assert report.monotone == ()
    assert all(r.error > 0 for r in report.rows)


def test_study_kind_dispatch_is_guarded(tmp_path):
    spatial_cfg = make_study(cache_dir=tmp_path)
    temporal_cfg = make_study(
        kind="temporal", couplings=((0.2, 2.0),), t_final=0.1, cache_dir=tmp_path
    )
    with pytest.raises(ConfigError):
        temporal_study(spatial_cfg)
    with pytest.raises(ConfigError):
        spatial_study(temporal_cfg)


def test_timing_flag_populates_wall_ms(tmp_path):
    cfg = make_study(n_values=(8, 16, 32), timing=True, cache_dir=tmp_path)
    report = spatial_study(cfg)
    assert all(r.wall_ms > 0 for r in report.rows)


# ---------------------------------------------------------------- reports


GOLDEN_ERRORS = """\
scheme,potential,norm,N,h,tau,error,wall_ms
lt-efp,squarewell_-16.0_16.0_-4.0_4.0_10.0,l2,8,4.0,0.01,1.1184070554742727,0.0
lt-efp,squarewell_-16.0_16.0_-4.0_4.0_10.0,h1,8,4.0,0.01,1.4530359373738815,0.0
lt-efp,squarewell_-16.0_16.0_-4.0_4.0_10.0,l2,16,2.0,0.01,0.3135652709490023,0.0
lt-efp,squarewell_-16.0_16.0_-4.0_4.0_10.0,h1,16,2.0,0.01,0.5917180969845384,0.0
"""

GOLDEN_ORDERS = """\
norm,coupling,slope,residual,points
l2,-,nan,nan,2
h1,-,nan,nan,2
"""

GOLDEN_PLOT = """\
# log-log convergence plot; run: gnuplot plot.gp
set datafile separator ','
set logscale xy
set key left top
set xlabel 'h'
set ylabel 'error'
set terminal pngcairo size 800,600
set output 'errors.png'
plot \\
    'errors.csv' using (strcol(3) eq 'l2' ? column(5) : NaN):7 with points pt 7 title 'l2', \\
    'errors.csv' using (strcol(3) eq 'h1' ? column(5) : NaN):7 with points pt 7 title 'h1'
"""


def test_emit_report_golden_tiny_study(tmp_path):
    cfg = StudyConfig(
        kind="spatial",
        scheme="lt-efp",
        potential=standard_potential("v1"),
        n_values=(8, 16),
        tau=0.01,
        t_final=0.03,
        n_ref=64,
        tau_ref=0.01,
        cache_dir=tmp_path,
    )
    report = spatial_study(cfg)
    errors_path, orders_path, plot_path = emit_report(report, tmp_path / "out")
    assert errors_path.read_text() == GOLDEN_ERRORS
    assert orders_path.read_text() == GOLDEN_ORDERS
    assert plot_path.read_text() == GOLDEN_PLOT


def test_emit_report_empty_rows_write_headers_only(tmp_path):
    report = ErrorReport(
        config=make_study(),
        rows=(),
        orders=(),
        reference_key="unused",
        floor_estimates=(0.0, 0.0),
        monotone=(),
    )
    errors_path, orders_path, _ = emit_report(report, tmp_path)
    assert errors_path.read_text() == ERRORS_HEADER + "\n"
    assert orders_path.read_text() == ORDERS_HEADER + "\n"


def test_emit_report_schema(tmp_path):
    cfg = make_study(
        kind="temporal",
        couplings=((0.2, 2.0), (0.4, 1.5)),
        t_final=0.1,
        cache_dir=tmp_path,
    )
    report = temporal_study(cfg)
    errors_path, orders_path, plot_path = emit_report(report, tmp_path / "out")
    error_lines = errors_path.read_text().splitlines()
    assert error_lines[0] == ERRORS_HEADER
    assert len(error_lines) == 1 + len(report.rows)
    order_lines = orders_path.read_text().splitlines()
    assert order_lines[0] == ORDERS_HEADER
    assert len(order_lines) == 1 + len(cfg.norms) * len(cfg.couplings)
    assert "'errors.csv'" in plot_path.read_text()  # relative reference


# ---------------------------------------------------------------- benchmark


def test_step_benchmark_reports_positive_times():
    result = step_benchmark(standard_potential("v1"), n=64, tau=1e-3, steps=5)
    assert set(result) == {"extended", "quadrature_4n", "ratio"}
    assert result["extended"] > 0 and result["quadrature_4n"] > 0
    assert result["ratio"] > 0
