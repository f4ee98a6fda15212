"""Command-line front end: solve runs, convergence studies, phase tables.

Subcommands:
  solve            advance one configuration and write snapshot files
  spatial-study    error vs mesh size, fixed time step
  temporal-study   error vs time step along tau = c*h^gamma couplings
  potential-coeffs precompute one projected phase-factor table

Every option has a default listed in --help.  A flat TOML file given
via --config supplies values that individual flags override, and
--dump-config writes the fully resolved option set back out so the run
can be reproduced byte-identically from the file alone.  Exit codes:
0 success, 1 configuration problem, 2 numeric abort (blow-up or an
unreachable quadrature tolerance), 3 file-system failure.
"""

import argparse
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - python < 3.11
    import tomli as tomllib

from .errors import BlowUpError, ConfigError, QuadratureError
from .experiments import (
    StudyConfig,
    emit_report,
    spatial_study,
    temporal_study,
)
from .formats import provenance_string, write_phase_table, write_spectral_csv
from .potentials import POTENTIAL_NAMES, phase_projection, standard_potential
from .propagators import SCHEMES, SchemeConfig, run
from .spectral import sobolev_norm

_SOLVE_DEFAULTS = {
    "scheme": "lt-efp",
    "potential": None,  # required
    "n": 256,
    "tau": 1e-3,
    "t_final": 0.5,
    "beta": 1.0,
    "sigma": 1.0,
    "quad_points": None,  # fswq only; None means M = N
    "fswq_init": "shifted",
    "phase_tol": 1e-12,
    "stride": None,
    "out": "solve-out",
}

_STUDY_DEFAULTS = {
    "scheme": "st-efp",
    "potential": None,  # required
    "n_values": (128, 256, 512, 1024),
    "tau": 1e-5,
    "coupling": ("0.2:2",),  # temporal only
    "t_final": 0.5,
    "beta": 1.0,
    "sigma": 1.0,
    "norms": ("l2", "h1"),
    "n_ref": 4096,
    "tau_ref": 1e-5,
    "quad_factor": 1,
    "fswq_init": "shifted",
    "strict_cfl": False,
    "timing": False,
    "jobs": 1,
    "phase_tol": 1e-12,
    "cache_dir": None,
    "out": "study-out",
}

_COEFFS_DEFAULTS = {
    "potential": None,  # required
    "tau": 0.01,
    "n": 128,
    "tol": 1e-12,
    "out": "phase_table",
}


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on bad usage; our contract says 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_common(parser):
    parser.add_argument("--config", metavar="FILE", default=None,
                        help="flat TOML file with option values (flags win; default none)")
    parser.add_argument("--dump-config", metavar="FILE", default=None,
                        help="write the resolved options to FILE before running (default off)")
    parser.add_argument("--seed", type=int, default=None,
                        help="reserved for future extensions; rejected if supplied")


def build_parser() -> _Parser:
    parser = _Parser(prog="efp1d", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="advance one configuration")
    _add_common(p)
    p.add_argument("--scheme", choices=SCHEMES, default=None,
                   help="splitting scheme (default lt-efp)")
    p.add_argument("--potential", default=None,
                   help=f"potential name, one of {', '.join(POTENTIAL_NAMES)} (required)")
    p.add_argument("--n", type=int, default=None, help="grid size (default 256)")
    p.add_argument("--tau", type=float, default=None, help="time step (default 1e-3)")
    p.add_argument("--t", dest="t_final", type=float, default=None,
                   help="final time (default 0.5)")
    p.add_argument("--beta", type=float, default=None,
                   help="nonlinearity strength (default 1.0)")
    p.add_argument("--sigma", type=float, default=None,
                   help="nonlinearity exponent, >= 1 (default 1.0)")
    p.add_argument("--quad-points", dest="quad_points", type=int, default=None,
                   help="fswq quadrature points M (default N)")
    p.add_argument("--fswq-init", dest="fswq_init", choices=("shifted", "plain"), default=None,
                   help="fswq initial projection: shifted absorbs one free-flow phase (default shifted)")
    p.add_argument("--phase-tol", dest="phase_tol", type=float, default=None,
                   help="phase-table quadrature tolerance (default 1e-12)")
    p.add_argument("--stride", type=int, default=None,
                   help="snapshot every STRIDE steps (default endpoints only)")
    p.add_argument("--out", default=None, help="output directory (default solve-out)")
    p.set_defaults(handler=cmd_solve, defaults=_SOLVE_DEFAULTS)

    for name, handler in (("spatial-study", cmd_spatial_study),
                          ("temporal-study", cmd_temporal_study)):
        p = sub.add_parser(name, help=f"run a {name.split('-')[0]} convergence sweep")
        _add_common(p)
        p.add_argument("--scheme", choices=SCHEMES, default=None,
                       help="splitting scheme (default st-efp)")
        p.add_argument("--potential", default=None,
                       help=f"potential name, one of {', '.join(POTENTIAL_NAMES)} (required)")
        p.add_argument("--n-values", dest="n_values", default=None,
                       help="comma-separated grid sizes (default 128,256,512,1024)")
        if name == "spatial-study":
            p.add_argument("--tau", type=float, default=None,
                           help="fixed time step (default 1e-5)")
        else:
            p.add_argument("--coupling", action="append", default=None, metavar="C:G",
                           help="tau = C*h^G; repeatable (default 0.2:2)")
        p.add_argument("--t", dest="t_final", type=float, default=None,
                       help="final time (default 0.5)")
        p.add_argument("--beta", type=float, default=None,
                       help="nonlinearity strength (default 1.0)")
        p.add_argument("--sigma", type=float, default=None,
                       help="nonlinearity exponent, >= 1 (default 1.0)")
        p.add_argument("--norms", default=None,
                       help="comma-separated norms from l2,h1 (default l2,h1)")
        p.add_argument("--n-ref", dest="n_ref", type=int, default=None,
                       help="reference grid size (default 4096)")
        p.add_argument("--tau-ref", dest="tau_ref", type=float, default=None,
                       help="reference time step (default 1e-5)")
        p.add_argument("--quad-factor", dest="quad_factor", type=int, default=None,
                       help="fswq quadrature points per grid point (default 1)")
        p.add_argument("--fswq-init", dest="fswq_init", choices=("shifted", "plain"), default=None,
                       help="fswq initial projection: shifted absorbs one free-flow phase (default shifted)")
        p.add_argument("--strict-cfl", dest="strict_cfl", action="store_true", default=None,
                       help="require tau <= h^2/pi for every run (default off)")
        p.add_argument("--timing", action="store_true", default=None,
                       help="measure wall_ms per run; breaks byte determinism (default off)")
        p.add_argument("--jobs", type=int, default=None,
                       help="parallel runs within the sweep (default 1)")
        p.add_argument("--phase-tol", dest="phase_tol", type=float, default=None,
                       help="phase-table quadrature tolerance (default 1e-12)")
        p.add_argument("--cache-dir", dest="cache_dir", default=None,
                       help="reference cache directory (default EFP_CACHE_DIR or ~/.cache/efp1d)")
        p.add_argument("--out", default=None, help="report directory (default study-out)")
        p.set_defaults(handler=handler, defaults=_STUDY_DEFAULTS)

    p = sub.add_parser("potential-coeffs", help="precompute one phase-factor table")
    _add_common(p)
    p.add_argument("--potential", default=None,
                   help=f"potential name, one of {', '.join(POTENTIAL_NAMES)} (required)")
    p.add_argument("--tau", type=float, default=None, help="time step (default 0.01)")
    p.add_argument("--n", type=int, default=None, help="grid size (default 128)")
    p.add_argument("--tol", type=float, default=None,
                   help="quadrature tolerance (default 1e-12)")
    p.add_argument("--out", default=None,
                   help="output base path without suffix (default phase_table)")
    p.set_defaults(handler=cmd_potential_coeffs, defaults=_COEFFS_DEFAULTS)

    return parser


# ------------------------------------------------------------- option plumbing


def _load_config_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid TOML: {exc}") from exc
    for key, value in data.items():
        if isinstance(value, dict):
            raise ConfigError(f"config file {path}: nested table {key!r} not supported")
    return data


def _resolve(args) -> dict:
    """Defaults, overlaid by the config file, overlaid by explicit flags."""
    defaults = args.defaults
    merged = dict(defaults)
    if args.config is not None:
        file_values = _load_config_file(args.config)
        unknown = sorted(set(file_values) - set(defaults) - {"seed"})
        if unknown:
            raise ConfigError(f"config file {args.config}: unknown keys {', '.join(unknown)}")
        if "seed" in file_values:
            raise ConfigError("seed is reserved; the solver has no stochastic component")
        merged.update(file_values)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    if args.seed is not None:
        raise ConfigError("--seed is reserved; the solver has no stochastic component")
    if merged.get("potential") is None:
        raise ConfigError("--potential is required")
    return merged


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return repr(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
    raise ConfigError(f"cannot serialize config value {value!r}")


def _dump_config(merged: dict, path):
    lines = [f"{key} = {_toml_scalar(value)}"
             for key, value in sorted(merged.items()) if value is not None]
    Path(path).write_text("\n".join(lines) + "\n")


def _int_list(value) -> tuple:
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",") if p.strip()]
    else:
        parts = list(value)
    if not parts:
        raise ConfigError("expected a non-empty comma-separated list of grid sizes")
    try:
        return tuple(int(p) for p in parts)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad grid-size list {value!r}") from exc


def _norm_list(value) -> tuple:
    if isinstance(value, str):
        return tuple(p.strip() for p in value.split(",") if p.strip())
    return tuple(value)


def _coupling_list(value) -> tuple:
    items = [value] if isinstance(value, str) else list(value)
    parsed = []
    for item in items:
        try:
            c_text, g_text = str(item).split(":")
            parsed.append((float(c_text), float(g_text)))
        except ValueError as exc:
            raise ConfigError(f"coupling must look like C:G, got {item!r}") from exc
    return tuple(parsed)


# ------------------------------------------------------------------- handlers


def cmd_solve(args) -> int:
    opts = _resolve(args)
    if args.dump_config is not None:
        _dump_config(opts, args.dump_config)
    potential = standard_potential(opts["potential"])
    quad_points = opts["quad_points"]
    if opts["scheme"] == "fswq" and quad_points is None:
        quad_points = int(opts["n"])
    config = SchemeConfig(
        scheme=opts["scheme"],
        potential=potential,
        n=int(opts["n"]),
        tau=float(opts["tau"]),
        t_final=float(opts["t_final"]),
        beta=float(opts["beta"]),
        sigma=float(opts["sigma"]),
        quad_points=quad_points,
        fswq_init=opts["fswq_init"],
        phase_tol=float(opts["phase_tol"]),
    )
    stride = opts["stride"]
    trajectory = run(config, snapshot_stride=None if stride is None else int(stride))

    out_dir = Path(opts["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = ["step,time,file,l2,h1"]
    for step, time, field in zip(trajectory.steps, trajectory.times, trajectory.fields):
        name = f"step{step:06d}.csv"
        write_spectral_csv(field, out_dir / name)
        manifest.append(
            f"{step},{float(time)!r},{name},"
            f"{sobolev_norm(field, 0)!r},{sobolev_norm(field, 1)!r}"
        )
    (out_dir / "manifest.csv").write_text("\n".join(manifest) + "\n")

    final = trajectory.final_field
    print(f"steps={config.n_steps}")
    print(f"final l2={sobolev_norm(final, 0)!r} h1={sobolev_norm(final, 1)!r}")
    return 0


def _cmd_study(args, kind: str) -> int:
    opts = _resolve(args)
    if args.dump_config is not None:
        _dump_config(opts, args.dump_config)
    config = StudyConfig(
        kind=kind,
        scheme=opts["scheme"],
        potential=standard_potential(opts["potential"]),
        n_values=_int_list(opts["n_values"]),
        tau=float(opts["tau"]),
        couplings=_coupling_list(opts["coupling"]) if kind == "temporal" else (),
        t_final=float(opts["t_final"]),
        beta=float(opts["beta"]),
        sigma=float(opts["sigma"]),
        norms=_norm_list(opts["norms"]),
        n_ref=int(opts["n_ref"]),
        tau_ref=float(opts["tau_ref"]),
        quad_factor=int(opts["quad_factor"]),
        fswq_init=opts["fswq_init"],
        strict_cfl=bool(opts["strict_cfl"]),
        timing=bool(opts["timing"]),
        jobs=int(opts["jobs"]),
        phase_tol=float(opts["phase_tol"]),
        cache_dir=opts["cache_dir"],
    )
    report = spatial_study(config) if kind == "spatial" else temporal_study(config)
    paths = emit_report(report, opts["out"])
    for norm, floor in zip(config.norms, report.floor_estimates):
        print(f"floor {norm}={floor!r}")
    for fit in report.orders:
        print(f"order {fit.norm} coupling={fit.coupling}: "
              f"slope={fit.slope!r} residual={fit.residual!r} points={fit.points}")
    for path in paths:
        print(f"wrote {path}")
    return 0


def cmd_spatial_study(args) -> int:
    return _cmd_study(args, "spatial")


def cmd_temporal_study(args) -> int:
    # spatial-only keys keep their defaults when driven from the shared table
    return _cmd_study(args, "temporal")


def cmd_potential_coeffs(args) -> int:
    opts = _resolve(args)
    if args.dump_config is not None:
        _dump_config(opts, args.dump_config)
    potential = standard_potential(opts["potential"])
    table = phase_projection(
        potential, float(opts["tau"]), int(opts["n"]), tol=float(opts["tol"])
    )
    csv_path, json_path = write_phase_table(table, opts["out"])
    print(f"achieved={table.achieved!r} provenance={provenance_string(table)}")
    print(f"wrote {csv_path}")
    print(f"wrote {json_path}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.handler(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (BlowUpError, QuadratureError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
