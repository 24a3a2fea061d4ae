# Module for writing run artifacts:
# - Uniform-grid sampling of a hybrid record plus exact pre/post impact samples
# - Trajectory / events / momenta CSV files rendered with 17 significant digits
# - Two-column plot data files and a plain key: value report
# - Readers used to check exported files re-parse exactly

from __future__ import annotations

import csv
import logging
import os
from collections.abc import Sequence

import numpy as np

from hybrid.flow import COTANGENT, HybridFlowRecord

# Configure logging for this module
logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = int(os.environ.get("HYBRID_EXPORT_SAMPLES", "2000"))
FLOAT_FORMAT = "%.17g"


def fmt(value: float) -> str:
    return FLOAT_FORMAT % value


def _ensure_dir(path: str):
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)


def sample_record(record: HybridFlowRecord, samples: int | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Sample a record on a uniform grid plus every arc's exact endpoints.

    An impact time appears twice: once with the pre-impact state (end of arc i) and once with the
    post-impact state (start of arc i+1).

    Returns:
        (t, q, w) arrays with one row per sample

    Raises:
        ValueError: if the record has no arcs
    """
    if not record.arcs:
        raise ValueError("cannot sample an empty record")
    samples = samples or DEFAULT_SAMPLES
    t_start, t_stop = record.arcs[0].t0, record.t_final
    grid = np.linspace(t_start, t_stop, samples) if t_stop > t_start else np.array([t_start])
    ts, qs, ws = [], [], []
    for arc in record.arcs:
        inner = grid[(grid > arc.t0) & (grid < arc.t1)]
        times = np.concatenate([[arc.t0], inner, [arc.t1]]) if arc.t1 > arc.t0 else np.array([arc.t0])
        q, w = arc.sample(times)
        q[0], w[0] = arc.q[0], arc.w[0]
        q[-1], w[-1] = arc.q[-1], arc.w[-1]
        ts.append(times)
        qs.append(q)
        ws.append(w)
    return np.concatenate(ts), np.vstack(qs), np.vstack(ws)


def velocity_labels(labels: Sequence[str], phase: str) -> list[str]:
    prefix = "p_" if phase == COTANGENT else "d"
    return [f"{prefix}{name}" for name in labels]


def write_trajectory_csv(path: str, labels: Sequence[str], t: np.ndarray, q: np.ndarray, w: np.ndarray, phase: str):
    """Header ``t,<labels>,<velocity labels>``; one row per sample."""
    _ensure_dir(path)
    with open(path, "w", newline="", encoding="utf8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", *labels, *velocity_labels(labels, phase)])
        for ti, qi, wi in zip(t, q, w, strict=True):
            writer.writerow([fmt(ti), *(fmt(x) for x in qi), *(fmt(x) for x in wi)])
    logger.debug("wrote %d trajectory rows to %s", len(t), path)


def read_trajectory_csv(path: str) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="utf8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(x) for x in row] for row in rows[1:]])


def write_events_csv(path: str, labels: Sequence[str], record: HybridFlowRecord, mu_size: int = 0):
    """Columns: tau, guard, pre q/w, post q/w, mu_pre..., mu_post... (empty cells when unknown)."""
    _ensure_dir(path)
    wl = velocity_labels(labels, record.phase)
    header = ["tau", "guard"]
    header += [f"pre_{x}" for x in [*labels, *wl]] + [f"post_{x}" for x in [*labels, *wl]]
    header += [f"mu_pre_{i}" for i in range(mu_size)] + [f"mu_post_{i}" for i in range(mu_size)]
    with open(path, "w", newline="", encoding="utf8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for ev in record.events:
            pre, post = ev.pre_state.to_array(), ev.post_state.to_array()
            row = [fmt(ev.t), ev.guard_label, *(fmt(x) for x in pre), *(fmt(x) for x in post)]
            for mu in (ev.mu_pre, ev.mu_post):
                row += [fmt(x) for x in mu] if mu is not None else [""] * mu_size
            writer.writerow(row)
    logger.debug("wrote %d events to %s", len(record.events), path)


def write_momenta_csv(path: str, rows: Sequence[tuple[float, float, np.ndarray]]):
    """One row per hybrid interval: arc index, t_start, t_end, mu..."""
    _ensure_dir(path)
    size = len(rows[0][2]) if rows else 0
    with open(path, "w", newline="", encoding="utf8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["arc", "t_start", "t_end", *(f"mu_{i}" for i in range(size))])
        for i, (t0, t1, mu) in enumerate(rows):
            writer.writerow([i, fmt(t0), fmt(t1), *(fmt(x) for x in mu)])


def write_columns(path: str, a: np.ndarray, b: np.ndarray):
    """Two whitespace-separated columns, one sample per line."""
    _ensure_dir(path)
    with open(path, "w", encoding="utf8") as fh:
        for x, y in zip(a, b, strict=True):
            fh.write(f"{fmt(x)} {fmt(y)}\n")


def read_columns(path: str) -> np.ndarray:
    with open(path, encoding="utf8") as fh:
        return np.array([[float(x) for x in line.split()] for line in fh if line.strip()])


def export_plot_data(prefix: str, t: np.ndarray, r: np.ndarray, xy: np.ndarray | None, impact_times: Sequence[float]):
    """
    Write ``<prefix>_tr.dat`` (t, r), ``<prefix>_xy.dat`` (x, y) when given, and
    ``<prefix>_impacts.dat`` (impact index, tau).

    Raises:
        ValueError: if there are no samples
    """
    if len(t) == 0:
        raise ValueError("no samples to export")
    files = [f"{prefix}_tr.dat"]
    write_columns(files[0], t, r)
    if xy is not None:
        files.append(f"{prefix}_xy.dat")
        write_columns(files[-1], xy[:, 0], xy[:, 1])
    files.append(f"{prefix}_impacts.dat")
    write_columns(files[-1], np.arange(len(impact_times), dtype=float), np.asarray(impact_times, dtype=float))
    return files


def write_report(path: str, entries: dict):
    _ensure_dir(path)
    with open(path, "w", encoding="utf8") as fh:
        for key, value in entries.items():
            if isinstance(value, float):
                value = fmt(value)
            fh.write(f"{key}: {value}\n")
    logger.info(f"Report written to {path}")
