"""Canonical on-disk dataset layout.

A dataset is a directory with a ``cells.json`` index and one subdirectory
per cell holding ``rpt_<index>.csv`` files::

    dataset/
      cells.json                 {"schema_version": "1", "cells": [...]}
      cell_001/
        rpt_0.csv
        rpt_1.csv

Each RPT file is a sectioned CSV (UTF-8, "." decimal separator):

    [capacity]        capacity_ah
    [age]             days,cycles            (either value may be empty)
    [spectra]         spectrum_id,freq_hz,re_mohm,im_mohm,soc,temp_c,provenance
    [curves]          kind,v_start,v_step,values...   (one row per curve;
                      for relaxation rows the two grid columns hold
                      t_start/t_step in seconds)

Rows sharing a spectrum_id form one spectrum, ordered by frequency.
"""

from __future__ import annotations

import csv
import json
import re
from pathlib import Path
from typing import List, Sequence

import numpy as np

from ..exceptions import (
    DataValidationError,
    DuplicateRptError,
    MissingFieldError,
    UnknownSchemaVersionError,
)
from .types import (
    CellHistory,
    CurveKind,
    EisSpectrum,
    FrequencyGrid,
    Provenance,
    RptRecord,
    SOURCE_KINDS,
    TimeCurve,
    VoltageCurve,
)

SCHEMA_VERSION = "1"

_SECTIONS = ("capacity", "age", "spectra", "curves")
_SPECTRA_HEADER = ["spectrum_id", "freq_hz", "re_mohm", "im_mohm", "soc", "temp_c", "provenance"]
_RPT_FILE = re.compile(r"^rpt_(\d+)\.csv$")


def _fmt(x) -> str:
    return "" if x is None else repr(float(x))


def _write_rpt_csv(path: Path, record: RptRecord) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["[capacity]"])
        w.writerow(["capacity_ah"])
        w.writerow([_fmt(record.capacity_ah)])
        w.writerow(["[age]"])
        w.writerow(["days", "cycles"])
        w.writerow([_fmt(record.age_days), _fmt(record.age_cycles)])
        w.writerow(["[spectra]"])
        w.writerow(_SPECTRA_HEADER)
        sid = 0
        for spec in list(record.lab_spectra.values()) + list(record.field_spectra):
            for i, f in enumerate(spec.grid.frequencies):
                w.writerow([
                    sid,
                    _fmt(f),
                    _fmt(spec.re_mohm[i]),
                    _fmt(spec.im_mohm[i]) if spec.im_mohm is not None else "",
                    _fmt(spec.soc),
                    _fmt(spec.temp_c),
                    spec.provenance.value,
                ])
            sid += 1
        w.writerow(["[curves]"])
        w.writerow(["kind", "v_start", "v_step", "values"])
        for curve in (record.charge_qv, record.discharge_qv, record.relaxation):
            if curve is None:
                continue
            start = curve.v_start if isinstance(curve, VoltageCurve) else curve.t_start
            step = curve.v_step if isinstance(curve, VoltageCurve) else curve.t_step
            w.writerow([curve.kind.value, _fmt(start), _fmt(step)] + [_fmt(v) for v in curve.values])


def save_cells(cells: Sequence[CellHistory], path, schema_version: str = SCHEMA_VERSION) -> None:
    """Write histories into the canonical directory layout."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    index = {
        "schema_version": schema_version,
        "cells": [
            {"cell_id": c.cell_id, "metadata": dict(c.metadata)} for c in cells
        ],
    }
    (root / "cells.json").write_text(
        json.dumps(index, sort_keys=True, indent=1) + "\n", encoding="utf-8"
    )
    for cell in cells:
        cell_dir = root / cell.cell_id
        cell_dir.mkdir(parents=True, exist_ok=True)
        for record in cell.rpts:
            _write_rpt_csv(cell_dir / f"rpt_{record.rpt_index}.csv", record)


def _sections(rows: List[List[str]], where: str):
    """Split raw CSV rows into named sections."""
    out = {}
    current = None
    for row in rows:
        if not row or all(not c.strip() for c in row):
            continue
        first = row[0].strip()
        if first.startswith("[") and first.endswith("]"):
            name = first[1:-1]
            if name not in _SECTIONS:
                raise MissingFieldError(f"{where}: unknown section {first}")
            if name in out:
                raise MissingFieldError(f"{where}: repeated section {first}")
            current = out.setdefault(name, [])
            continue
        if current is None:
            raise MissingFieldError(f"{where}: data before any section header")
        current.append(row)
    for required in _SECTIONS[:3]:
        if required not in out:
            raise MissingFieldError(f"{where}: missing [{required}] section")
    return out


def _parse_float(cell: str, what: str, where: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise MissingFieldError(f"{where}: bad {what} value {cell!r}") from None


def _read_rpt_csv(path: Path, cell_id: str, rpt_index: int) -> RptRecord:
    where = f"cell {cell_id} rpt {rpt_index}"
    with path.open("r", encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    sec = _sections(rows, where)

    cap_rows = sec["capacity"]
    if len(cap_rows) != 2 or cap_rows[0][0].strip() != "capacity_ah":
        raise MissingFieldError(f"{where}: [capacity] must hold a capacity_ah header and one value")
    capacity = _parse_float(cap_rows[1][0], "capacity_ah", where)

    age_rows = sec["age"]
    if len(age_rows) != 2 or [c.strip() for c in age_rows[0][:2]] != ["days", "cycles"]:
        raise MissingFieldError(f"{where}: [age] must hold days,cycles header and one row")
    raw_days, raw_cycles = (age_rows[1] + ["", ""])[:2]
    age_days = _parse_float(raw_days, "days", where) if raw_days.strip() else None
    age_cycles = _parse_float(raw_cycles, "cycles", where) if raw_cycles.strip() else None

    spec_rows = sec["spectra"]
    if not spec_rows or [c.strip() for c in spec_rows[0]] != _SPECTRA_HEADER:
        raise MissingFieldError(f"{where}: [spectra] header must be {','.join(_SPECTRA_HEADER)}")
    groups: dict = {}
    order: list = []
    for row in spec_rows[1:]:
        if len(row) != len(_SPECTRA_HEADER):
            raise MissingFieldError(f"{where}: spectra row has {len(row)} columns")
        sid = row[0].strip()
        if sid not in groups:
            groups[sid] = []
            order.append(sid)
        groups[sid].append(row)

    lab_spectra = {}
    field_spectra = []
    for sid in order:
        g = groups[sid]
        freqs = [_parse_float(r[1], "freq_hz", where) for r in g]
        res = [_parse_float(r[2], "re_mohm", where) for r in g]
        ims = [r[3].strip() for r in g]
        has_im = any(ims)
        if has_im and not all(ims):
            raise MissingFieldError(f"{where}: spectrum {sid} mixes present and absent im_mohm")
        socs = {r[4].strip() for r in g}
        temps = {r[5].strip() for r in g}
        provs = {r[6].strip() for r in g}
        if len(socs) != 1 or len(temps) != 1 or len(provs) != 1:
            raise MissingFieldError(f"{where}: spectrum {sid} mixes soc/temp/provenance values")
        try:
            spec = EisSpectrum(
                grid=FrequencyGrid(np.asarray(freqs)),
                re_mohm=np.asarray(res),
                im_mohm=np.asarray([_parse_float(v, "im_mohm", where) for v in ims]) if has_im else None,
                soc=_parse_float(socs.pop(), "soc", where),
                temp_c=_parse_float(temps.pop(), "temp_c", where),
                provenance=Provenance(provs.pop()),
            )
        except DataValidationError as exc:
            raise type(exc)(f"{where}: spectrum {sid}: {exc}") from None
        except ValueError as exc:
            raise MissingFieldError(f"{where}: spectrum {sid}: {exc}") from None
        if spec.provenance is Provenance.LAB:
            lab_spectra[spec.soc] = spec
        else:
            field_spectra.append(spec)

    charge = discharge = relax = None
    for row in sec.get("curves", [])[1:] if sec.get("curves") else []:
        if len(row) < 4:
            raise MissingFieldError(f"{where}: curve row needs kind,v_start,v_step and values")
        try:
            kind = CurveKind(row[0].strip())
        except ValueError:
            raise MissingFieldError(f"{where}: unknown curve kind {row[0]!r}") from None
        if kind not in SOURCE_KINDS:
            raise MissingFieldError(f"{where}: derived curve kind {kind.value} is not stored")
        start = _parse_float(row[1], "v_start", where)
        step = _parse_float(row[2], "v_step", where)
        values = np.asarray([_parse_float(v, "curve value", where) for v in row[3:]])
        slot = {"relaxation_vt": relax, "charge_qv": charge, "discharge_qv": discharge}[kind.value]
        if slot is not None:
            raise DuplicateRptError(f"{where}: two {kind.value} curves")
        try:
            if kind is CurveKind.RELAXATION_VT:
                relax = TimeCurve(kind=kind, t_start=start, t_step=step, values=values)
            elif kind is CurveKind.CHARGE_QV:
                charge = VoltageCurve(kind=kind, v_start=start, v_step=step, values=values)
            else:
                discharge = VoltageCurve(kind=kind, v_start=start, v_step=step, values=values)
        except DataValidationError as exc:
            raise type(exc)(f"{where}: {kind.value}: {exc}") from None

    try:
        return RptRecord(
            cell_id=cell_id,
            rpt_index=rpt_index,
            capacity_ah=capacity,
            lab_spectra=lab_spectra,
            field_spectra=tuple(field_spectra),
            charge_qv=charge,
            discharge_qv=discharge,
            relaxation=relax,
            age_days=age_days,
            age_cycles=age_cycles,
        )
    except DataValidationError as exc:
        raise type(exc)(f"{where}: {exc}") from None


def load_cells(path, schema_version: str = SCHEMA_VERSION) -> List[CellHistory]:
    """Load a canonical dataset directory into :class:`CellHistory` values."""
    root = Path(path)
    index_path = root / "cells.json"
    if not index_path.exists():
        raise MissingFieldError(f"no cells.json under {root}")
    index = json.loads(index_path.read_text(encoding="utf-8"))
    version = index.get("schema_version")
    if version != schema_version:
        raise UnknownSchemaVersionError(
            f"dataset schema_version {version!r} does not match expected {schema_version!r}"
        )
    if "cells" not in index or not isinstance(index["cells"], list):
        raise MissingFieldError("cells.json lacks a 'cells' list")

    cells = []
    seen_ids = set()
    for entry in index["cells"]:
        cell_id = entry.get("cell_id")
        if not cell_id:
            raise MissingFieldError("cells.json entry lacks cell_id")
        if cell_id in seen_ids:
            raise DuplicateRptError(f"cells.json lists cell {cell_id} twice")
        seen_ids.add(cell_id)
        cell_dir = root / cell_id
        if not cell_dir.is_dir():
            raise MissingFieldError(f"cell {cell_id}: directory {cell_dir} not found")
        records = {}
        for f in sorted(cell_dir.iterdir()):
            m = _RPT_FILE.match(f.name)
            if not m:
                continue
            idx = int(m.group(1))
            if idx in records:
                raise DuplicateRptError(
                    f"cell {cell_id}: rpt index {idx} appears more than once"
                )
            records[idx] = _read_rpt_csv(f, cell_id, idx)
        if not records:
            raise MissingFieldError(f"cell {cell_id}: no rpt_<index>.csv files")
        cells.append(
            CellHistory(
                cell_id=cell_id,
                rpts=tuple(records[i] for i in sorted(records)),
                metadata=entry.get("metadata", {}),
            )
        )
    return cells
