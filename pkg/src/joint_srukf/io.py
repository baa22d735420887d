"""CSV reading and writing (header row, full double precision)."""
import csv
import os

import numpy as np

FLOAT_FMT = "%.17g"


def write_csv(path, header, columns):
    """Write equal-length columns under ``header``; floats with 17 significant digits."""
    data = np.column_stack([np.asarray(c, dtype=float) for c in columns]) if columns else np.empty((0, 0))
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(FLOAT_FMT % v for v in row) + "\n")


def read_csv(path):
    """Return ``(header, data)`` with ``data`` of shape ``(rows, len(header))``."""
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return header, data


def read_columns(path):
    header, data = read_csv(path)
    return {name: data[:, i] for i, name in enumerate(header)}


def write_truth(path, t, x, y, u):
    n_x = x.shape[1]
    header = ["t"] + [f"x{i + 1}" for i in range(n_x)] + ["y"] + ["u"]
    write_csv(path, header, [t, *x.T, y[:, 0], u])


def write_estimate(path, t, x_est):
    header = ["t"] + [f"x{i + 1}" for i in range(x_est.shape[1])]
    write_csv(path, header, [t, *x_est.T])


def write_theta(path, t, theta, names):
    write_csv(path, ["t"] + [f"theta[{n}]" for n in names], [t, *theta])


def read_theta(path):
    header, data = read_csv(path)
    names = tuple(h[len("theta["):-1] for h in header[1:])
    return data[:, 0], data[:, 1:].T, names
