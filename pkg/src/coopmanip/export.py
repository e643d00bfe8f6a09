"""
CSV export of trajectories and emission of matplotlib plotting scripts.

Numbers are written with ``repr(float)``, the shortest decimal string that
parses back to the same double, so ``float(field)`` round-trips bit-exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from .simulation import Trajectory

CSV_HEADER = (
    "t", "x", "x_dot", "alpha", "alpha_dot", "beta", "beta_dot",
    "u1", "u2", "u3", "u1_cmd", "u2_cmd", "u3_cmd", "ref_x", "ref_alpha",
)


def trajectory_table(traj: Trajectory) -> np.ndarray:
    """Trajectory as an ``(N, 15)`` array in :data:`CSV_HEADER` order."""
    return np.column_stack([traj.t, traj.states, traj.inputs, traj.commands, traj.applied])


def export_csv(traj: Trajectory, path) -> None:
    table = trajectory_table(traj)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in table:
            w.writerow([repr(float(v)) for v in row])


def read_csv(path) -> dict[str, np.ndarray]:
    """Columns of an exported CSV by name."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body]).reshape(len(body), len(header))
    return {name: data[:, i] for i, name in enumerate(header)}


_SCRIPT = '''\
"""Plot closed-loop trajectories exported as CSV (states and inputs panels)."""
import csv
import sys

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

RUNS = {runs!r}
OUTPUT = {output!r}
STATES = [("x", "x [m]"), ("alpha", "alpha [rad]"), ("beta", "beta [rad]")]
INPUTS = [("u1", "u1 [N]"), ("u2", "u2 [N m]"), ("u3", "u3 [N]")]
STYLES = ["-", "--", ":", "-."]


def load(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {{k: [float(r[k]) for r in rows] for k in rows[0]}} if rows else None


fig, (ax_s, ax_u) = plt.subplots(2, 1, sharex=True, figsize=(8, 6))
for i, (label, path) in enumerate(RUNS):
    d = load(path)
    if d is None:
        continue
    ls = STYLES[i % len(STYLES)]
    for col, name in STATES:
        ax_s.plot(d["t"], d[col], ls, label=f"{{name}} ({{label}})" if len(RUNS) > 1 else name)
    for col, name in INPUTS:
        ax_u.plot(d["t"], d[col], ls, label=f"{{name}} ({{label}})" if len(RUNS) > 1 else name)
ax_s.set_ylabel("states")
ax_u.set_ylabel("inputs")
ax_u.set_xlabel("t [s]")
for ax in (ax_s, ax_u):
    ax.grid(True)
    ax.legend(loc="best", fontsize="small")
fig.tight_layout()
fig.savefig(sys.argv[1] if len(sys.argv) > 1 else OUTPUT)
'''


def emit_plot_script(traj_csv, out, labels: Sequence[str] | None = None) -> None:
    """Write a standalone matplotlib script plotting one or more exported CSVs.

    ``traj_csv`` is a path or a sequence of paths; several paths are overlaid
    in one figure with distinct line styles (first solid, second dashed). The
    script saves a PNG next to itself unless given an output path argument.
    """
    paths = [traj_csv] if isinstance(traj_csv, (str, Path)) else list(traj_csv)
    if not paths:
        raise ValueError("at least one CSV path is required")
    resolved = []
    for p in paths:
        p = Path(p)
        if not p.is_file():
            raise FileNotFoundError(f"trajectory CSV not found: {p}")
        resolved.append(str(p.resolve()))
    labels = list(labels) if labels is not None else [Path(p).stem for p in resolved]
    if len(labels) != len(resolved):
        raise ValueError("one label per CSV is required")
    out = Path(out)
    script = _SCRIPT.format(runs=list(zip(labels, resolved)), output=str(out.with_suffix(".png").resolve()))
    out.write_text(script)
