"""On-disk formats: coefficient CSVs, phase-table sidecars, manifests.

All writers format floats with repr (shortest round-trip form), so
identical inputs always produce identical bytes and reading back is
lossless.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from efp1d.potentials import PhaseFactorTable
from efp1d.spectral import Domain, NodalField, SpectralField


def write_spectral_csv(field: SpectralField, path) -> Path:
    """Rows ``l,re,im`` sorted by l from -K/2 to K/2-1."""
    path = Path(path)
    k = field.bandwidth
    lines = ["l,re,im"]
    for i, l in enumerate(range(-(k // 2), k // 2)):
        c = field.coeffs[i]
        lines.append(f"{l},{float(c.real)!r},{float(c.imag)!r}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_spectral_csv(path, domain: Domain) -> SpectralField:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0] != "l,re,im":
        raise ValueError(f"{path}: expected header 'l,re,im'")
    ls, coeffs = [], []
    for line in lines[1:]:
        if not line:
            continue
        l_str, re_str, im_str = line.split(",")
        ls.append(int(l_str))
        coeffs.append(complex(float(re_str), float(im_str)))
    k = len(coeffs)
    if k < 2 or k % 2 != 0:
        raise ValueError(f"{path}: coefficient count {k} is not a valid bandwidth")
    if ls != list(range(-(k // 2), k // 2)):
        raise ValueError(f"{path}: index column must run contiguously from -K/2 to K/2-1")
    return SpectralField(domain, np.array(coeffs))


def write_nodal_csv(field: NodalField, path) -> Path:
    """Rows ``j,x,re,im`` for j = 0..K including the closure row."""
    path = Path(path)
    nodes = field.grid.nodes
    lines = ["j,x,re,im"]
    for j, (x, v) in enumerate(zip(nodes, field.values)):
        lines.append(f"{j},{float(x)!r},{float(v.real)!r},{float(v.imag)!r}")
    path.write_text("\n".join(lines) + "\n")
    return path


def provenance_string(table: PhaseFactorTable) -> str:
    if table.provenance == "analytic":
        return "analytic"
    return f"quadrature(levels={table.levels}, achieved={table.achieved!r})"


def write_phase_table(table: PhaseFactorTable, base_path) -> tuple[Path, Path]:
    """Write coefficients as a spectral CSV plus a JSON metadata sidecar."""
    base = Path(base_path)
    csv_path = base.with_suffix(".csv")
    json_path = base.with_suffix(".json")
    write_spectral_csv(table.projection, csv_path)
    meta = {
        "kind": table.potential.kind,
        "potential": table.potential.cache_key(),
        "tau": table.tau,
        "n": table.n,
        "tolerance": table.tolerance,
        "provenance": provenance_string(table),
    }
    json_path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    return csv_path, json_path
