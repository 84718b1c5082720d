"""CSV ingestion of distributional panels, model export and config loading.

Panel files are long-format CSV. ``long_samples`` has one row per sample
``(subject, time, x)``; ``long_quantiles`` has one row per quantile level
``(subject, time, level, q)``. Times and values are mapped affinely onto
[0, 1]; both maps are kept on the returned panel.

Floats are written with ``repr`` so that files reload bit-exactly.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .dense import Baseline, FittedDenseModel, SubjectFit
from .errors import ConfigurationError, InvalidInputError, ParseError
from .fpca import CovarianceSurface, EigenSystem
from .frechet import Panel, Subject
from .grid import GridMeasure, TransportMap, unit_grid
from .links import as_link
from .measures import empirical_quantile
from .sparse import FittedSparseModel
from .transport import norm1, sign

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

__all__ = [
    "PanelSchema",
    "load_config",
    "ingest_panel",
    "export_panel",
    "export_model",
    "load_model",
    "write_rows",
    "read_quantile_file",
    "sign_mass_table",
]

FORMATS = ("long_samples", "long_quantiles")
PAYLOADS = ("measure", "transport")


def _fmt(x) -> str:
    return repr(float(x))


def load_config(path) -> dict:
    """Read a JSON or TOML file into a dict (chosen by extension)."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".toml":
            return tomllib.loads(raw.decode("utf-8"))
        return json.loads(raw.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigurationError(f"cannot parse config {path}: {exc}") from exc


@dataclass(frozen=True)
class PanelSchema:
    """Column layout and unit maps of a long-format panel CSV.

    Parameters
    ----------
    format : {"long_samples", "long_quantiles"}
    subject, time, value, level : str
        Column names. ``value`` holds samples or quantile values, ``level``
        the quantile level (long_quantiles only).
    support : (float, float)
        Support bounds ``(a, b)`` of the measures, mapped onto [0, 1].
    time_range : (float, float), optional
        Time units mapped to 0 and 1; defaults to the observed range.
    payload : {"measure", "transport"}
        Whether long_quantiles rows describe measures or transport maps.
    grid_size : int
        Quantile grid size for sample data.
    design : {"auto", "random", "fixed"}
    """

    format: str = "long_samples"
    subject: str = "subject"
    time: str = "time"
    value: str = "value"
    level: str = "level"
    support: tuple = (0.0, 1.0)
    time_range: Optional[tuple] = None
    payload: str = "measure"
    grid_size: int = 101
    design: str = "auto"

    def __post_init__(self):
        if self.format not in FORMATS:
            raise ConfigurationError(f"format must be one of {FORMATS}, got {self.format!r}")
        if self.payload not in PAYLOADS:
            raise ConfigurationError(f"payload must be one of {PAYLOADS}, got {self.payload!r}")
        if self.payload == "transport" and self.format != "long_quantiles":
            raise ConfigurationError("transport payloads need the long_quantiles format")
        if len(set(self.columns)) != len(self.columns):
            raise ConfigurationError(f"column names must be distinct, got {self.columns}")
        a, b = (float(v) for v in self.support)
        if not b > a:
            raise ConfigurationError(f"support must satisfy b > a, got {self.support}")
        object.__setattr__(self, "support", (a, b))
        if self.time_range is not None:
            t0, t1 = (float(v) for v in self.time_range)
            if not t1 > t0:
                raise ConfigurationError(f"time_range must be increasing, got {self.time_range}")
            object.__setattr__(self, "time_range", (t0, t1))
        if self.design not in ("auto", "random", "fixed"):
            raise ConfigurationError(f"design must be auto, random or fixed, got {self.design!r}")
        if int(self.grid_size) < 2:
            raise ConfigurationError("grid_size must be at least 2")

    @property
    def columns(self) -> tuple:
        if self.format == "long_samples":
            return (self.subject, self.time, self.value)
        return (self.subject, self.time, self.level, self.value)

    @classmethod
    def from_mapping(cls, data: dict) -> "PanelSchema":
        unknown = set(data) - set(cls.__dataclass_fields__) - {"units"}
        if unknown:
            raise ConfigurationError(f"unknown schema entries: {sorted(unknown)}")
        data = {k: v for k, v in data.items() if k != "units"}
        for key in ("support", "time_range"):
            if data.get(key) is not None:
                data[key] = tuple(data[key])
        return cls(**data)

    @classmethod
    def load(cls, path) -> "PanelSchema":
        return cls.from_mapping(load_config(path))

    def to_dict(self) -> dict:
        return asdict(self)


def _read_rows(path, columns):
    """Yield ``(row_number, values)`` with the file's own line numbering (header = 1)."""
    try:
        handle = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InvalidInputError(f"cannot open {path}: {exc}") from exc
    with handle:
        reader = csv.reader(handle)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError("file is empty", row=1) from None
        missing = [c for c in columns if c not in header]
        if missing:
            raise ParseError(f"missing columns {missing}; found {header}", row=1)
        idx = [header.index(c) for c in columns]
        for row in reader:
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", row=reader.line_num)
            yield reader.line_num, [row[k].strip() for k in idx]


def _number(text, what, row) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ParseError(f"{what} {text!r} is not a number", row=row) from None
    if not np.isfinite(value):
        raise ParseError(f"{what} must be finite, got {text!r}", row=row)
    return value


def _time_map(schema: PanelSchema, raw_times):
    if schema.time_range is not None:
        return schema.time_range
    lo, hi = min(raw_times), max(raw_times)
    return (lo, hi) if hi > lo else (lo, lo + 1.0)


def _scale(values, lo, hi):
    return (np.asarray(values, dtype=float) - lo) / (hi - lo)


def ingest_panel(path, schema: PanelSchema) -> Panel:
    """Read a long-format CSV into a :class:`Panel` on the unit square.

    Raises
    ------
    ParseError
        Missing columns, unparsable numbers, duplicate keys or quantile rows
        that decrease in level; the message names the row.
    """
    if schema.format == "long_samples":
        groups = _ingest_samples(path, schema)
    else:
        groups = _ingest_quantiles(path, schema)
    if not groups:
        raise InvalidInputError(f"{path} has no data rows")

    a, b = schema.support
    t0, t1 = _time_map(schema, [t for (_, t) in groups])
    by_subject: dict = {}
    for (sid, t), (row, payload) in groups.items():
        tt = (t - t0) / (t1 - t0)
        if not 0.0 <= tt <= 1.0:
            raise ParseError(f"time {t} is outside the time range {(t0, t1)}", row=row)
        by_subject.setdefault(sid, []).append((tt, payload))

    subjects = []
    for sid, items in by_subject.items():
        times = [tt for tt, _ in items]
        if len(set(times)) != len(times):
            raise InvalidInputError(f"subject {sid}: distinct raw times collide after rescaling")
        subjects.append(Subject(sid, np.array(times), tuple(p for _, p in items)))

    design = schema.design
    if design == "auto":
        first = subjects[0].times
        same = all(s.times.shape == first.shape and np.array_equal(s.times, first) for s in subjects)
        design = "fixed" if same and len(subjects) > 1 else "random"
    meta = {"source": os.fspath(path), "schema": schema.to_dict()}
    return Panel(tuple(subjects), design=design, time_map=(t0, t1), value_map=(a, b), meta=meta)


def _ingest_samples(path, schema: PanelSchema) -> dict:
    a, b = schema.support
    raw: dict = {}
    for row, (sid, t, x) in _read_rows(path, schema.columns):
        t = _number(t, "time", row)
        x = _number(x, "value", row)
        if not a <= x <= b:
            raise ParseError(f"value {x} lies outside the support {(a, b)}", row=row)
        raw.setdefault((sid, t), (row, []))[1].append(x)
    M = int(schema.grid_size)
    return {key: (row, empirical_quantile(_scale(xs, a, b), M)) for key, (row, xs) in raw.items()}


def _ingest_quantiles(path, schema: PanelSchema) -> dict:
    a, b = schema.support
    raw: dict = {}
    for row, (sid, t, lev, q) in _read_rows(path, schema.columns):
        t = _number(t, "time", row)
        lev = _number(lev, "level", row)
        q = _number(q, "quantile", row)
        if not 0.0 <= lev <= 1.0:
            raise ParseError(f"level {lev} is outside [0, 1]", row=row)
        if not a <= q <= b:
            raise ParseError(f"quantile {q} lies outside the support {(a, b)}", row=row)
        entry = raw.setdefault((sid, t), {})
        if lev in entry:
            raise ParseError(f"duplicate entry for subject {sid}, time {t}, level {lev}", row=row)
        entry[lev] = (row, q)

    out = {}
    for (sid, t), entry in raw.items():
        levels = np.array(sorted(entry))
        rows = [entry[v][0] for v in levels]
        q = _scale([entry[v][1] for v in levels], a, b)
        drops = np.flatnonzero(np.diff(q) < 0)
        if drops.size:
            raise ParseError(f"quantile decreases in level for subject {sid}, time {t}", row=rows[drops[0] + 1])
        if levels.size < 2 or levels[0] != 0.0 or levels[-1] != 1.0:
            raise ParseError(f"levels for subject {sid}, time {t} must include 0 and 1", row=rows[0])
        grid = unit_grid(levels.size)
        if np.max(np.abs(levels - grid)) > 1e-12:
            # irregular levels are resampled onto the default grid
            grid = unit_grid(int(schema.grid_size))
            q = np.interp(grid, levels, q)
        payload = TransportMap(q) if schema.payload == "transport" else GridMeasure(q)
        out[(sid, t)] = (rows[0], payload)
    return out


def write_rows(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _payload_values(p) -> tuple:
    if isinstance(p, TransportMap):
        return "transport", p.tvals
    if isinstance(p, GridMeasure):
        return "measure", p.qvals
    raise InvalidInputError("export_panel handles measure and transport payloads; ingest raw samples first")


def export_panel(panel: Panel, path, schema_path=None) -> PanelSchema:
    """Write a panel as ``long_quantiles`` CSV on the unit scale plus a schema sidecar.

    Returns the schema that reloads the file. Original time and value maps are
    stored in the sidecar for reporting.
    """
    path = Path(path)
    kinds = set()
    rows = []
    for s in panel:
        for t, p in zip(s.times, s.payloads):
            kind, values = _payload_values(p)
            kinds.add(kind)
            grid = unit_grid(values.size)
            rows.extend([s.id, _fmt(t), _fmt(lev), _fmt(q)] for lev, q in zip(grid, values))
    if len(kinds) > 1:
        raise InvalidInputError("panel mixes measure and transport payloads")
    schema = PanelSchema(
        format="long_quantiles",
        subject="subject",
        time="time",
        level="level",
        value="q",
        support=(0.0, 1.0),
        time_range=(0.0, 1.0),
        payload=kinds.pop(),
        design=panel.design,
    )
    write_rows(path, ["subject", "time", "level", "q"], rows)
    sidecar = Path(schema_path) if schema_path else path.with_suffix(".schema.json")
    doc = schema.to_dict()
    # original units, for reporting only
    doc["units"] = {"time_map": list(panel.time_map), "value_map": list(panel.value_map)}
    sidecar.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return schema


def read_quantile_file(path, M: int = None) -> GridMeasure:
    """Read a two-column ``level,q`` CSV (values already on [0, 1]) as a measure."""
    pairs = []
    for row, (lev, q) in _read_rows(path, ("level", "q")):
        pairs.append((_number(lev, "level", row), _number(q, "quantile", row), row))
    if len(pairs) < 2:
        raise InvalidInputError(f"{path} needs at least two quantile rows")
    pairs.sort()
    levels = np.array([p[0] for p in pairs])
    q = np.array([p[1] for p in pairs])
    rows = [p[2] for p in pairs]
    if np.any(np.diff(levels) == 0):
        raise ParseError("duplicate level", row=rows[int(np.flatnonzero(np.diff(levels) == 0)[0]) + 1])
    drops = np.flatnonzero(np.diff(q) < 0)
    if drops.size:
        raise ParseError("quantile decreases in level", row=rows[drops[0] + 1])
    if levels[0] != 0.0 or levels[-1] != 1.0:
        raise ParseError("levels must include 0 and 1", row=rows[0])
    size = M or levels.size
    grid = unit_grid(size)
    if size == levels.size and np.max(np.abs(levels - grid)) <= 1e-12:
        return GridMeasure(q)
    return GridMeasure(np.interp(grid, levels, q))


def sign_mass_table(panel: Panel) -> list:
    """Rows ``(subject, time, sign, mass)`` for every transport in a centred panel."""
    rows = []
    for s in panel:
        for t, T in zip(s.times, s.payloads):
            rows.append((s.id, float(t), sign(T), norm1(T)))
    return rows


# Model export ---------------------------------------------------------------


def _baseline_rows(sid, kind, base: Optional[Baseline], M):
    if base is None:
        return [[sid, kind, "0", _fmt(0.0), _fmt(0.0)] + [_fmt(v) for v in unit_grid(M)]]
    return [[sid, kind, str(base.count), _fmt(base.norm), _fmt(norm1(base.raw))] + [_fmt(v) for v in base.transport.tvals]] + [
        [sid, f"{kind}_raw", str(base.count), _fmt(norm1(base.raw)), _fmt(norm1(base.raw))] + [_fmt(v) for v in base.raw.tvals]
    ]


def export_model(model, out_dir, panel: Panel = None, config: dict = None, timestamp: str = None) -> Path:
    """Write a fitted model and plot-ready tables to ``out_dir``.

    Files: ``manifest.json``, ``eigenfunctions.csv`` (G rows), ``scores.csv``
    (n x J), ``baselines.csv``, ``covariance.csv`` and, when a centred panel is
    given, ``sign_mass.csv`` and ``barycenter.csv``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    eig = model.eig
    mode = "dense" if isinstance(model, FittedDenseModel) else "sparse"
    K = eig.count

    write_rows(
        out / "eigenfunctions.csv",
        ["t"] + [f"phi{k + 1}" for k in range(K)],
        ([_fmt(t)] + [_fmt(v) for v in eig.functions[:, j]] for j, t in enumerate(eig.grid)),
    )
    write_rows(out / "eigenvalues.csv", ["k", "lambda"], ([k + 1, _fmt(v)] for k, v in enumerate(eig.values)))
    sids = list(model.subjects)
    J = model.J
    write_rows(
        out / "scores.csv",
        ["subject"] + [f"score{k + 1}" for k in range(J)],
        ([sid] + [_fmt(v) for v in model.subjects[sid].scores[:J]] for sid in sids),
    )
    M = model.grid_size
    rows = []
    for sid in sids:
        fit = model.subjects[sid]
        rows += _baseline_rows(sid, "plus", fit.plus, M)
        rows += _baseline_rows(sid, "minus", fit.minus, M)
    write_rows(out / "baselines.csv", ["subject", "kind", "count", "norm", "raw_norm"] + [f"v{j}" for j in range(M)], rows)
    surface = model.surface.values
    write_rows(out / "covariance.csv", [f"c{j}" for j in range(surface.shape[1])], ([_fmt(v) for v in r] for r in surface))
    times_rows = []
    for sid in sids:
        times_rows += [[sid, _fmt(t)] for t in model.subjects[sid].times]
    write_rows(out / "observation_times.csv", ["subject", "time"], times_rows)

    if panel is not None:
        write_rows(
            out / "sign_mass.csv",
            ["subject", "time", "sign", "mass"],
            ([sid, _fmt(t), str(sg), _fmt(m)] for sid, t, sg, m in sign_mass_table(panel)),
        )
        if panel.barycenter is not None:
            bary = panel.barycenter
            write_rows(
                out / "barycenter.csv",
                ["time"] + [f"q{j}" for j in range(bary.measures[0].grid_size)],
                ([_fmt(t)] + [_fmt(v) for v in m.qvals] for t, m in zip(bary.times, bary.measures)),
            )

    manifest = {
        "mode": mode,
        "J": J,
        "grid_size": M,
        "time_grid_size": eig.grid.size,
        "eigenvalues": [float(v) for v in eig.values],
        "bandwidth": model.bandwidth,
        "model_config": model.config,
        "config": config or {},
        "subjects": sids,
    }
    if mode == "dense":
        manifest["kappa"] = model.kappa
    else:
        manifest["norm_T0"] = model.norm_T0
        manifest["link"] = model.link.variant
        manifest["empirical_norms"] = {k: float(v) for k, v in model.empirical_norms.items()}
    if panel is not None:
        manifest["time_map"] = list(panel.time_map)
        manifest["value_map"] = list(panel.value_map)
        manifest["design"] = panel.design
    doc = {"manifest": manifest, "generated_at": timestamp}
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out


def _read_table(path):
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader)
        return header, [row for row in reader if row]


def load_model(model_dir) -> Union[FittedDenseModel, FittedSparseModel]:
    """Rebuild a fitted model written by :func:`export_model`."""
    d = Path(model_dir)
    try:
        doc = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise InvalidInputError(f"cannot read model manifest in {d}: {exc}") from exc
    man = doc["manifest"]
    _, rows = _read_table(d / "eigenfunctions.csv")
    funcs = np.array([[float(v) for v in r[1:]] for r in rows]).T
    eig = EigenSystem(np.array(man["eigenvalues"], dtype=float), funcs)
    _, rows = _read_table(d / "covariance.csv")
    surface = CovarianceSurface(np.array([[float(v) for v in r] for r in rows]))

    scores = {r[0]: np.array([float(v) for v in r[1:]]) for r in _read_table(d / "scores.csv")[1]}
    times: dict = {}
    for sid, t in _read_table(d / "observation_times.csv")[1]:
        times.setdefault(sid, []).append(float(t))
    bases: dict = {}
    for r in _read_table(d / "baselines.csv")[1]:
        bases[(r[0], r[1])] = (int(r[2]), float(r[3]), np.array([float(v) for v in r[5:]]))

    def baseline(sid, kind):
        count, achieved, values = bases[(sid, kind)]
        if count == 0:
            return None
        raw = bases[(sid, f"{kind}_raw")][2]
        return Baseline(TransportMap(values), achieved, TransportMap(raw), count)

    fits = {
        sid: SubjectFit(sid, baseline(sid, "plus"), baseline(sid, "minus"), scores[sid], np.array(times.get(sid, [])))
        for sid in man["subjects"]
    }
    cfg = man["model_config"]
    if man["mode"] == "dense":
        return FittedDenseModel(man["kappa"], eig, fits, man["J"], man["grid_size"], surface, man["bandwidth"], cfg)
    return FittedSparseModel(
        man["norm_T0"],
        as_link(man["link"]),
        eig,
        surface,
        fits,
        man["J"],
        man["grid_size"],
        man["bandwidth"],
        man.get("empirical_norms", {}),
        cfg,
    )
