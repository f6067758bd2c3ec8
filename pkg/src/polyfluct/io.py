"""CSV output with a provenance header and round-trip float formatting."""
from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .grid import DensityField, Grid

FLOAT_FORMAT = "{:.17g}"


def fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT.format(float(value))
    return str(value)


def write_csv(path, columns, rows, meta=None):
    """Write rows under a ``# key=value ...`` header line and a column header."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        if meta:
            fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    """Return ``(meta, columns, rows)``; numeric cells are parsed as floats."""
    meta, lines = {}, []
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("#"):
                for item in line[1:].split():
                    key, _, value = item.partition("=")
                    meta[key] = value
            else:
                lines.append(line)
    reader = csv.reader(lines)
    columns = next(reader)
    rows = []
    for raw in reader:
        row = []
        for cell in raw:
            try:
                row.append(float(cell))
            except ValueError:
                row.append(cell)
        rows.append(row)
    return meta, columns, rows


def density_rows(P, t=None):
    prefix = () if t is None else (t,)
    if P.dim == 1:
        return [prefix + (x, v) for x, v in zip(P.grid.centers[0], P.values)]
    X, Y = P.grid.mesh()
    return [prefix + (x, y, v) for x, y, v in zip(X.ravel(), Y.ravel(), P.values.ravel())]


def density_columns(dim, with_time=False):
    cols = ["x", "density"] if dim == 1 else ["x", "y", "density"]
    return (["t"] if with_time else []) + cols


def write_density(path, P, meta=None):
    return write_csv(path, density_columns(P.dim), density_rows(P), meta)


def read_density(path):
    """Rebuild a 1-D or 2-D DensityField from its CSV (uniform grid assumed)."""
    _, columns, rows = read_csv(path)
    data = np.array(rows, dtype=float)
    if columns[:1] == ["t"]:
        data = data[:, 1:]
        columns = columns[1:]
    if len(columns) == 2:
        x = data[:, 0]
        h = (x[-1] - x[0]) / (x.size - 1) if x.size > 1 else 1.0
        grid = Grid.uniform(x[0] - h / 2, x[-1] + h / 2, x.size)
        return DensityField(grid, data[:, 1])
    xs, ys = np.unique(data[:, 0]), np.unique(data[:, 1])
    hx = (xs[-1] - xs[0]) / (xs.size - 1)
    hy = (ys[-1] - ys[0]) / (ys.size - 1)
    grid = Grid((xs[0] - hx / 2, ys[0] - hy / 2), (xs[-1] + hx / 2, ys[-1] + hy / 2), (xs.size, ys.size))
    return DensityField(grid, data[:, 2].reshape(xs.size, ys.size))


def chain_rows(junctions):
    """``sample_id,k,x_k`` rows for an ``(samples, N)`` array of junctions."""
    junctions = np.asarray(junctions)
    return [(i, k + 1, x) for i, chain in enumerate(junctions) for k, x in enumerate(chain)]
