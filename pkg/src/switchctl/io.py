"""Text formats: CSV artifacts, the flat key-value report and system files."""

from __future__ import annotations

import csv
import io as _io
import math

import numpy as np

from .switching import ControlSchedule, SwitchingControlSet
from .system import LtiSystem

__all__ = [
    "fmt",
    "write_controls",
    "read_controls",
    "write_trajectory",
    "read_trajectory",
    "write_adjoint",
    "write_report",
    "read_report",
    "read_system",
    "write_system",
    "read_source",
    "SchemaError",
]

KINDS = ("node", "start", "mid", "end")


class SchemaError(ValueError):
    """A file does not follow the expected layout."""


def fmt(x):
    """17 significant digits: enough to round-trip any binary64 value."""
    return "%.17g" % x


def _block_columns(prefix, dims):
    cols = []
    for i, m in enumerate(dims, start=1):
        if m == 1:
            cols.append(f"{prefix}_{i}")
        else:
            cols.extend(f"{prefix}_{i}_{j}" for j in range(1, m + 1))
    return cols


def _parse_block_columns(prefix, names):
    dims = {}
    for name in names:
        parts = name.split("_")
        if parts[0] != prefix or len(parts) not in (2, 3):
            raise SchemaError(f"unexpected column {name!r}")
        try:
            i = int(parts[1])
            j = int(parts[2]) if len(parts) == 3 else 1
        except ValueError as exc:
            raise SchemaError(f"unexpected column {name!r}") from exc
        dims[i] = max(dims.get(i, 0), j)
    if sorted(dims) != list(range(1, len(dims) + 1)):
        raise SchemaError(f"{prefix} columns are not numbered 1..n")
    dims = tuple(dims[i] for i in range(1, len(dims) + 1))
    if list(names) != _block_columns(prefix, dims):
        raise SchemaError(f"{prefix} columns are out of order")
    return dims


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def write_controls(path, cs):
    """``t, active_index, u_1.., kind, interval``.

    Node rows (kind ``node``) carry the grid samples; each schedule piece adds
    three rows ``start``, ``mid`` and ``end``.  Active indices are 1-based.
    """
    header = ["t", "active_index"] + _block_columns("u", cs.block_dims) + ["kind", "interval"]
    U = cs.stacked()
    rows = []
    for k, t in enumerate(cs.t):
        rows.append([fmt(t), str(int(cs.active[k]) + 1)] + [fmt(v) for v in U[k]]
                    + ["node", str(k)])
    s = cs.schedule
    if s is not None:
        for p in range(len(s)):
            for j, kind in enumerate(KINDS[1:]):
                rows.append([fmt(s.times[p, j]), str(int(s.active[p]) + 1)]
                            + [fmt(v) for v in s.values[p, j]] + [kind, str(int(s.interval[p]))])
    _write_rows(path, header, rows)


def read_controls(path):
    """Inverse of :func:`write_controls`.  Files without the ``kind`` column
    are read as node samples only."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError("empty controls file")
    header = rows[0]
    if header[:2] != ["t", "active_index"]:
        raise SchemaError("controls file must start with columns t, active_index")
    has_kind = header[-2:] == ["kind", "interval"]
    ucols = header[2:-2] if has_kind else header[2:]
    dims = _parse_block_columns("u", ucols)
    M = sum(dims)
    nodes, pieces = [], []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise SchemaError(f"row {r} has {len(row)} fields, expected {len(header)}")
        try:
            t = float(row[0])
            act = int(row[1]) - 1
            u = [float(v) for v in row[2:2 + M]]
        except ValueError as exc:
            raise SchemaError(f"row {r}: {exc}") from exc
        if not 0 <= act < len(dims):
            raise SchemaError(f"row {r}: active index out of range")
        kind = row[-2] if has_kind else "node"
        if kind not in KINDS:
            raise SchemaError(f"row {r}: unknown kind {kind!r}")
        if kind == "node":
            nodes.append((t, act, u))
        else:
            pieces.append((kind, int(row[-1]), t, act, u))
    if len(nodes) < 3:
        raise SchemaError("need at least three node rows")
    t = np.array([n[0] for n in nodes])
    active = np.array([n[1] for n in nodes], dtype=int)
    U = np.array([n[2] for n in nodes], dtype=float).reshape(len(nodes), M)
    edges = np.concatenate([[0], np.cumsum(dims)])
    controls = tuple(U[:, a:b] for a, b in zip(edges[:-1], edges[1:]))
    schedule = None
    if pieces:
        if len(pieces) % 3:
            raise SchemaError("schedule rows must come in start/mid/end triples")
        interval, times, act, values = [], [], [], []
        for p in range(0, len(pieces), 3):
            trip = pieces[p:p + 3]
            if [x[0] for x in trip] != list(KINDS[1:]) or len({x[1] for x in trip}) != 1 \
                    or len({x[3] for x in trip}) != 1:
                raise SchemaError(f"malformed schedule triple near piece {p // 3}")
            interval.append(trip[0][1])
            times.append([x[2] for x in trip])
            act.append(trip[0][3])
            values.append([x[4] for x in trip])
        schedule = ControlSchedule(np.array(interval, dtype=int), np.array(times),
                                   np.array(act, dtype=int),
                                   np.array(values, dtype=float).reshape(len(interval), 3, M))
    return SwitchingControlSet(t, controls, active, math.nan, (), schedule,
                               not np.any(U) and (schedule is None or not np.any(schedule.values)))


def write_trajectory(path, t, y):
    header = ["t"] + [f"y_{i}" for i in range(1, y.shape[1] + 1)]
    _write_rows(path, header, ([fmt(tk)] + [fmt(v) for v in yk] for tk, yk in zip(t, y)))


def read_trajectory(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1:]


def write_adjoint(path, trace, block_dims):
    header = ["t"] + _block_columns("eta", block_dims)
    E = np.hstack(trace.eta)
    _write_rows(path, header, ([fmt(tk)] + [fmt(v) for v in ek] for tk, ek in zip(trace.t, E)))


def _value(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_value(x) for x in v) + "]"
    return str(v)


def render_report(report):
    """``key: value`` lines in sorted key order; floats via ``repr``."""
    return "".join(f"{k}: {_value(report[k])}\n" for k in sorted(report))


def write_report(path, report):
    with open(path, "w") as fh:
        fh.write(render_report(report))


def read_report(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            if line.strip():
                k, _, v = line.rstrip("\n").partition(": ")
                out[k] = v
    return out


def _tokens(text):
    lines = (ln.split("#", 1)[0] for ln in text.splitlines())
    return [tok for ln in lines for tok in ln.split()]


def read_system(path, structure="general", label=None):
    """Read ``d n m_1 .. m_n`` followed by ``A`` and each ``B_i`` in row-major order."""
    with open(path) as fh:
        tok = _tokens(fh.read())
    try:
        d, n = int(tok[0]), int(tok[1])
        dims = [int(x) for x in tok[2:2 + n]]
        vals = np.array([float(x) for x in tok[2 + n:]])
    except (IndexError, ValueError) as exc:
        raise SchemaError(f"malformed system file: {exc}") from exc
    if d < 1 or n < 1 or len(dims) != n or min(dims) < 1:
        raise SchemaError("header must be 'd n m_1 ... m_n' with positive entries")
    need = d * d + d * sum(dims)
    if vals.size != need:
        raise SchemaError(f"expected {need} matrix entries, found {vals.size}")
    A = vals[:d * d].reshape(d, d)
    blocks, pos = [], d * d
    for m in dims:
        blocks.append(vals[pos:pos + d * m].reshape(d, m))
        pos += d * m
    return LtiSystem(A, tuple(blocks), label=label or str(path), structure=structure)


def write_system(path, sys):
    buf = _io.StringIO()
    buf.write(" ".join(str(x) for x in (sys.dim, sys.n_blocks, *sys.block_dims)) + "\n")
    for M in (sys.A, *sys.blocks):
        for row in M:
            buf.write(" ".join(fmt(v) for v in row) + "\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def read_source(path, grid, dim):
    """Source samples ``t, f_1 .. f_d`` at the grid nodes."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape != (grid.N + 1, dim + 1):
        raise SchemaError(f"source file must have {grid.N + 1} rows of t plus {dim} values")
    if not np.allclose(data[:, 0], grid.nodes, rtol=0, atol=1e-12 * grid.T):
        raise SchemaError("source samples are not on the grid nodes")
    return data[:, 1:]
