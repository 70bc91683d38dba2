"""Deterministic CSV and JSON emission.

Floats are written with repr(), Python's shortest round-trip decimal
form, so identical runs produce identical bytes.  Column orders are
fixed here and documented in the README; JSON objects are emitted with
sorted keys and no trailing whitespace.
"""

from __future__ import annotations

import dataclasses
import json
import math

import numpy as np

from .solver import SolutionField

__all__ = ["format_value", "field_csv_rows", "write_field_csv",
           "write_sidecar_json", "write_json", "sweep_header",
           "write_sweep_csv", "cap_csv_rows"]

RADIAL_COLUMNS = ("r", "u", "du", "d2u", "kappa_rad", "kappa_ang",
                  "nu_vertical", "residual")


def format_value(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    v = float(x)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def _grid_columns(n: int) -> tuple:
    coords = tuple(f"x{i + 1}" for i in range(n))
    kappas = tuple(f"kappa_{i + 1}" for i in range(n))
    return coords + ("u", "nu_vertical") + kappas + ("residual",)


def field_csv_rows(field: SolutionField, extra: dict | None = None):
    """(header, row iterator) for one solved field.

    extra maps column name -> per-node array (None entries become empty
    cells); extra columns are appended after the fixed ones.
    """
    extra = extra or {}
    kind = field.meta.get("kind")
    if kind == "radial":
        header = RADIAL_COLUMNS
        cols = [np.asarray(field.nodes, dtype=float).ravel(), field.u,
                field.meta["du"], field.meta["d2u"],
                field.meta["kappa_rad"], field.meta["kappa_ang"],
                field.nu_vertical, field.residual_field]
    else:
        n = field.domain.n
        header = _grid_columns(n)
        nodes = np.asarray(field.nodes, dtype=float)
        cols = [nodes[:, i] for i in range(n)]
        cols += [field.u, field.nu_vertical]
        cols += [field.spectra[:, i] for i in range(n)]
        cols += [field.residual_field]
    names = list(header) + list(extra)
    cols += [extra[k] for k in extra]
    m = len(field.u)

    def rows():
        for i in range(m):
            yield [c[i] if c is not None else None for c in cols]

    return tuple(names), rows()


def write_field_csv(field: SolutionField, path, extra: dict | None = None):
    header, rows = field_csv_rows(field, extra)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(v) for v in row) + "\n")


def write_sidecar_json(field: SolutionField, path):
    payload = {
        "iterations": field.convergence.iterations,
        "residual": field.convergence.residual,
        "eps": field.convergence.eps_bdry,
        "sigma": field.convergence.sigma,
        "cone_ok": bool(field.cone_ok),
    }
    write_json(payload, path)


def _jsonable(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_json(payload, path):
    with open(path, "w", newline="\n") as fh:
        json.dump(_jsonable(payload), fh, sort_keys=True, indent=2)
        fh.write("\n")


def sweep_header() -> tuple:
    return ("domain", "n", "sigma", "eps", "max_kappa_interior",
            "max_kappa_boundary", "nu_min", "Q_max", "rw_minK_max",
            "iterations", "residual", "status")


def write_sweep_csv(rows, path):
    """rows: iterable of dicts keyed by sweep_header names."""
    header = sweep_header()
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_value(row.get(k)) for k in header) + "\n")


def cap_csv_rows(cap, radii) -> tuple:
    """Radial-format rows for the closed-form cap (residual identically 0)."""
    radii = np.asarray(radii, dtype=float)
    u = cap.height(radii)
    du = cap.height_d1(radii)
    d2u = cap.height_d2(radii)
    nu = cap.nu(radii)
    lam = np.full_like(radii, cap.lam)
    zero = np.zeros_like(radii)
    cols = [radii, u, du, d2u, lam, lam, nu, zero]

    def rows():
        for i in range(radii.size):
            yield [c[i] for c in cols]

    return RADIAL_COLUMNS, rows()
