"""File formats: record CSV, masks, modal JSON, diagram tables, trends and flat configs.

Every writer goes through ``atomic_write`` so an interrupted run never leaves
a truncated file behind.
"""

from __future__ import annotations

import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .consistency import ConsistencyDiagram
from .mdof import MultiChannelRecord
from .modal import ModalSet

FLOAT_FMT = "%.17g"


def atomic_write(path, data) -> Path:
    """Write text or bytes to a sibling temp file, fsync, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = data.encode("utf-8") if isinstance(data, str) else bytes(data)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _matrix_csv(rows: np.ndarray, header: Sequence[str] = (), fmt: str = FLOAT_FMT) -> str:
    buf = io.StringIO()
    for line in header:
        buf.write(f"# {line}\n")
    if rows.size:
        np.savetxt(buf, rows, fmt=fmt, delimiter=",")
    return buf.getvalue()


def write_record(path, record: MultiChannelRecord) -> Path:
    """Samples as rows and channels as columns, after a single ``# dt=`` line."""
    return atomic_write(path, _matrix_csv(record.data.T, [f"dt={record.dt!r}"]))


def read_record(path) -> MultiChannelRecord:
    path = Path(path)
    dt = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                if key.strip() == "dt":
                    dt = float(val)
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric field in {line!r}") from None
    if dt is None:
        raise ValueError(f"{path}: missing '# dt=<seconds>' header")
    if not rows:
        raise ValueError(f"{path}: no samples")
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: rows have differing channel counts")
    data = np.array(rows, dtype=float).T
    return MultiChannelRecord(np.ascontiguousarray(data), dt)


def write_mask(path, mask: np.ndarray) -> Path:
    return atomic_write(path, _matrix_csv(np.asarray(mask, dtype=int).T, fmt="%d"))


def read_mask(path) -> np.ndarray:
    m = np.loadtxt(path, delimiter=",", comments="#", dtype=int, ndmin=2)
    return m.T.astype(bool)


def modal_sets_to_json(sets: Sequence[ModalSet], meta: dict | None = None) -> str:
    obj = {"modal_sets": [ms.to_dict() for ms in sets]}
    if meta:
        obj["meta"] = meta
    return json.dumps(obj, indent=2)


def write_modal_sets(path, sets: Sequence[ModalSet], meta: dict | None = None) -> Path:
    return atomic_write(path, modal_sets_to_json(sets, meta))


def read_modal_sets(path) -> list:
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    items = obj["modal_sets"] if isinstance(obj, dict) and "modal_sets" in obj else obj
    if isinstance(items, dict):
        items = [items]
    return [ModalSet.from_dict(o) for o in items]


DIAGRAM_COLUMNS = ("order", "freq_hz", "zeta", "freq_stable", "damp_stable", "shape_stable", "fully_consistent")


def diagram_rows(diagram: ConsistencyDiagram) -> list:
    return [
        (r.order, r.freq_hz, r.zeta, int(r.freq_stable), int(r.damp_stable),
         int(r.shape_stable), int(r.fully_consistent))
        for r in diagram.records
    ]


def diagram_tsv(diagram: ConsistencyDiagram) -> str:
    lines = ["\t".join(DIAGRAM_COLUMNS)]
    for row in diagram_rows(diagram):
        lines.append("\t".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def plot_ready_csv(diagram: ConsistencyDiagram) -> str:
    """Long-format table for generic plotters.

    ``kind=pole`` rows hold (freq_hz, order, flag); ``kind=psd`` rows hold the
    channel-summed spectrum as (freq_hz, power) when one is attached. The flag
    is ``consistent``, ``partial`` (frequency only) or ``new``.
    """
    lines = ["kind,freq_hz,value,flag"]
    for r in diagram.records:
        flag = "consistent" if r.fully_consistent else ("partial" if r.freq_stable else "new")
        lines.append(f"pole,{r.freq_hz!r},{r.order},{flag}")
    if diagram.spectrum is not None:
        f, p = diagram.spectrum
        lines.extend(f"psd,{fi!r},{pi!r}," for fi, pi in zip(np.asarray(f, float), np.asarray(p, float)))
    return "\n".join(lines) + "\n"


def diagram_json(diagram: ConsistencyDiagram) -> str:
    return json.dumps([dict(zip(DIAGRAM_COLUMNS, row)) for row in diagram_rows(diagram)], indent=2)


def trend_csv(rows: Iterable) -> str:
    rows = list(rows)
    width = max((len(r.frequencies) for r in rows), default=0)
    lines = [",".join(["timestamp"] + [f"f{i + 1}" for i in range(width)])]
    for r in rows:
        vals = [repr(float(f)) for f in r.frequencies] + [""] * (width - len(r.frequencies))
        lines.append(",".join([str(r.timestamp)] + vals))
    return "\n".join(lines) + "\n"


def read_trend_csv(path) -> list:
    """(timestamp, frequencies) pairs; blank cells are dropped."""
    out = []
    with open(path, encoding="utf-8") as fh:
        next(fh)
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            ts, *vals = line.split(",")
            out.append((ts, [float(v) for v in vals if v]))
    return out


def trend_json(rows: Iterable) -> str:
    return json.dumps([{"timestamp": r.timestamp, "frequencies": list(r.frequencies)} for r in rows], indent=2)


def clusters_json(rows: Iterable) -> str:
    return json.dumps(
        [{"timestamp": r.timestamp, "clusters": [c.to_dict() for c in r.clusters]} for r in rows],
        indent=2,
    )


def trace_csv(trace: Sequence) -> str:
    lines = ["iteration,q_before,q_after,nu,max_abs_dw"]
    lines.extend(",".join([str(int(t[0]))] + [repr(float(v)) for v in t[1:]]) for t in trace)
    return "\n".join(lines) + "\n"


def parse_config(text: str) -> dict:
    """Flat ``key = value`` pairs; ``#`` starts a comment, dashes in keys become underscores."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep or not key.strip():
            raise ValueError(f"config line {lineno}: expected key = value, got {raw!r}")
        out[key.strip().replace("-", "_")] = val.strip()
    return out


def read_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
