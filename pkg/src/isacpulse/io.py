"""CSV and JSON serialisation for pulses, ESDs and tabular results.

Vector files hold a single header line ``<quantity>,<spacing-name>=<value>``
followed by one value per line.  Floats are written with 17 significant
digits so a write/read cycle is lossless.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .signal_core import Esd, FrameConfig, Pulse


def _fmt(x) -> str:
    if isinstance(x, (complex, np.complexfloating)):
        return repr(complex(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_pulse_csv(path, pulse: Pulse, config: FrameConfig) -> Path:
    path = Path(path)
    vals = pulse.real() if pulse.is_real else pulse.samples
    lines = [f"pulse,dt_s={_fmt(config.T_s)}"] + [_fmt(v) for v in vals]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_pulse_csv(path) -> Pulse:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"pulse file not found: {path}")
    rows = path.read_text().split()
    if not rows or not rows[0].startswith("pulse"):
        raise ValueError(f"{path}: missing 'pulse' header")
    return Pulse(np.array([complex(r) for r in rows[1:]]))


def write_esd_csv(path, esd: Esd) -> Path:
    path = Path(path)
    lines = [f"omega,df_hz={_fmt(esd.config.bin_spacing_hz)}"] + [_fmt(v) for v in esd.omega]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_esd_csv(path, config: FrameConfig) -> Esd:
    rows = Path(path).read_text().split()
    if not rows or not rows[0].startswith("omega"):
        raise ValueError(f"{path}: missing 'omega' header")
    return Esd(np.array([float(r) for r in rows[1:]]), config)


def pulse_record(pulse: Pulse, config: FrameConfig) -> dict:
    rec = {"config": config.to_dict(), "samples": pulse.samples.real.tolist()}
    if not pulse.is_real:
        rec["samples_imag"] = pulse.samples.imag.tolist()
    return rec


def pulse_from_record(rec: dict) -> tuple[Pulse, FrameConfig]:
    s = np.asarray(rec["samples"], dtype=float)
    if "samples_imag" in rec:
        s = s + 1j * np.asarray(rec["samples_imag"], dtype=float)
    return Pulse(s), FrameConfig.from_dict(rec["config"])


def esd_record(esd: Esd) -> dict:
    return {"config": esd.config.to_dict(), "omega": esd.omega.tolist()}


def esd_from_record(rec: dict) -> Esd:
    return Esd(np.asarray(rec["omega"], dtype=float), FrameConfig.from_dict(rec["config"]))


def write_table_csv(path, columns: list[str], rows) -> Path:
    """Write a rectangular table with a header row."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def read_table_csv(path) -> dict[str, np.ndarray]:
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = [[float(x) for x in row] for row in r]
    arr = np.array(data, dtype=float).reshape(-1, len(header))
    return {name: arr[:, i] for i, name in enumerate(header)}


def write_matrix_csv(path, mat: np.ndarray) -> Path:
    path = Path(path)
    np.savetxt(path, np.asarray(mat), delimiter=",", fmt="%.17g")
    return path


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path
