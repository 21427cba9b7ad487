"""Binary field files, dataset directories, and CSV export.

A field file ``<name>.f64`` holds flat little-endian float64 values in
row-major node order: one plane for a real field, the real plane followed
by the imaginary plane for a complex field.  A text sidecar ``<name>.meta``
records the grid and provenance as sorted ``key = value`` lines.  Datasets
are directories with one complex field file per frequency and component
plus a ``manifest.cfg``.  All writes are deterministic: identical inputs
produce byte-identical files.
"""

from __future__ import annotations

import configparser
import os

import numpy as np

from .landweber import IterationRecord
from .mesh import Grid, build_grid
from .objective import Dataset, FrequencyGrid
from .pde import PotentialPair


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_field(base: str, values: np.ndarray, grid: Grid, meta: dict | None = None) -> None:
    """Write ``<base>.f64`` and its ``<base>.meta`` sidecar."""
    values = np.asarray(values)
    complex_field = np.iscomplexobj(values)
    planes = [values.real] if not complex_field else [values.real, values.imag]
    with open(base + ".f64", "wb") as fh:
        for plane in planes:
            fh.write(np.ascontiguousarray(plane, dtype="<f8").tobytes())
    lines = {
        "kind": "complex" if complex_field else "real",
        "n": grid.n,
        "c0": grid.c0,
        "order": "row-major",
        "dtype": "float64-le",
    }
    if meta:
        lines.update(meta)
    with open(base + ".meta", "w", encoding="utf-8") as fh:
        for key in sorted(lines):
            fh.write(f"{key} = {_fmt(lines[key])}\n")


def read_field(base: str) -> tuple[np.ndarray, dict]:
    """Read a field file pair written by ``write_field``."""
    meta: dict = {}
    with open(base + ".meta", "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            meta[key.strip()] = value.strip()
    n = int(meta["n"])
    raw = np.fromfile(base + ".f64", dtype="<f8")
    if meta.get("kind") == "complex":
        if raw.size != 2 * n * n:
            raise ValueError(f"{base}.f64: expected {2*n*n} values, found {raw.size}")
        values = raw[: n * n].reshape(n, n) + 1j * raw[n * n :].reshape(n, n)
    else:
        if raw.size != n * n:
            raise ValueError(f"{base}.f64: expected {n*n} values, found {raw.size}")
        values = raw.reshape(n, n)
    return values, meta


def write_field_csv(path: str, values: np.ndarray, grid: Grid) -> None:
    """CSV export of a nodal field: i, j, x, y, value columns (re/im if complex)."""
    values = np.asarray(values)
    complex_field = np.iscomplexobj(values)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("i,j,x,y,re,im\n" if complex_field else "i,j,x,y,value\n")
        for i in range(grid.n):
            for j in range(grid.n):
                x, y = grid.xs[i], grid.xs[j]
                if complex_field:
                    fh.write(
                        f"{i},{j},{_fmt(float(x))},{_fmt(float(y))},"
                        f"{_fmt(float(values[i, j].real))},{_fmt(float(values[i, j].imag))}\n"
                    )
                else:
                    fh.write(f"{i},{j},{_fmt(float(x))},{_fmt(float(y))},{_fmt(float(values[i, j]))}\n")


def write_dataset(directory: str, data: Dataset) -> None:
    """Write a dataset directory: manifest plus per-frequency field files."""
    os.makedirs(directory, exist_ok=True)
    grid = data.grid
    cp = configparser.ConfigParser()
    cp["grid"] = {"n": str(grid.n), "c0": _fmt(grid.c0)}
    cp["frequencies"] = {
        "omega_lo": _fmt(data.freqs.omega_lo),
        "omega_hi": _fmt(data.freqs.omega_hi),
        "nodes": " ".join(_fmt(float(v)) for v in data.freqs.nodes),
        "weights": " ".join(_fmt(float(v)) for v in data.freqs.weights),
    }
    cp["meta"] = {key: _fmt(data.metadata[key]) for key in sorted(data.metadata)}
    with open(os.path.join(directory, "manifest.cfg"), "w", encoding="utf-8") as fh:
        cp.write(fh)
    for k, pair in enumerate(data.potentials):
        for c, u in enumerate(pair.components, start=1):
            write_field(os.path.join(directory, f"u_{k:03d}_c{c}"), u, grid)


def read_dataset(directory: str) -> Dataset:
    """Read a dataset directory written by ``write_dataset``."""
    cp = configparser.ConfigParser()
    manifest = os.path.join(directory, "manifest.cfg")
    if not cp.read(manifest, encoding="utf-8"):
        raise FileNotFoundError(f"no dataset manifest at {manifest}")
    grid = build_grid(cp.getint("grid", "n"), cp.getfloat("grid", "c0"))
    nodes = np.array([float(v) for v in cp.get("frequencies", "nodes").split()])
    weights = np.array([float(v) for v in cp.get("frequencies", "weights").split()])
    freqs = FrequencyGrid(
        cp.getfloat("frequencies", "omega_lo"),
        cp.getfloat("frequencies", "omega_hi"),
        nodes,
        weights,
    )
    metadata = dict(cp["meta"]) if cp.has_section("meta") else {}
    potentials = []
    for k in range(nodes.size):
        u1, _ = read_field(os.path.join(directory, f"u_{k:03d}_c1"))
        u2, _ = read_field(os.path.join(directory, f"u_{k:03d}_c2"))
        potentials.append(PotentialPair(u1, u2))
    return Dataset(grid=grid, freqs=freqs, potentials=potentials, metadata=metadata)


def write_trajectory_csv(path: str, records: list[IterationRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("n,J,grad_norm,err_to_truth,proj_dev\n")
        for r in records:
            fh.write(
                f"{r.n},{_fmt(r.J)},{_fmt(r.grad_norm)},{_fmt(r.err_to_truth)},{_fmt(r.proj_dev)}\n"
            )
