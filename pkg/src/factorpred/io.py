"""CSV and JSON files written and read by the command line tool.

Every CSV we write starts with a version line

    #factorpred-csv/1,config=<hash>,seed=<seed>

followed by an RFC 4180 header row and data rows. Readers accept files
without the version line (hand-made inputs), but reject any version other
than the one they know. Floats are written with ``repr`` so a value read
back is bit-identical to the one written.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from typing import Iterable, Optional, Sequence

import numpy as np

from .model import GENERATOR_VERSION, RNG_ALGORITHM, FactorModelParams

CSV_VERSION = 1
CSV_MAGIC = "#factorpred-csv/"
THETA_FORMAT = "factorpred-theta/1"


class CSVFormatError(ValueError):
    """A CSV file that cannot be read; the message carries the location."""


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence],
              chash: str, seed) -> None:
    buf = io.StringIO()
    buf.write(f"{CSV_MAGIC}{CSV_VERSION},config={chash},seed={seed}\r\n")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def write_records(path: str, columns: Sequence[str], records: Iterable[dict],
                  chash: str, seed) -> None:
    write_csv(path, columns, ([r.get(c) for c in columns] for r in records), chash, seed)


def write_matrix(path: str, m: np.ndarray, header: Sequence[str], chash: str, seed) -> None:
    m = np.asarray(m, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    if m.shape[1] != len(header):
        raise ValueError(f"{len(header)} column names for {m.shape[1]} columns")
    write_csv(path, header, m.tolist(), chash, seed)


def numbered(prefix: str, count: int) -> list:
    return [f"{prefix}{j}" for j in range(count)]


def _open_rows(path: str) -> tuple[dict, list, list]:
    """(provenance, header, data rows) with line numbers kept for messages."""
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise CSVFormatError(f"{path}: cannot open ({exc.strerror})") from exc
    with fh:
        lines = fh.read().splitlines(keepends=True)
    prov = {}
    start = 0
    if lines and lines[0].startswith("#"):
        first = lines[0].strip()
        if not first.startswith(CSV_MAGIC):
            raise CSVFormatError(f"{path}: line 1: unrecognized comment line {first!r}")
        parts = first[len(CSV_MAGIC):].split(",")
        try:
            version = int(parts[0])
        except ValueError:
            raise CSVFormatError(f"{path}: line 1: bad version field {parts[0]!r}") from None
        if version != CSV_VERSION:
            raise CSVFormatError(f"{path}: CSV schema version {version} is not supported "
                                 f"(expected {CSV_VERSION})")
        for item in parts[1:]:
            key, _, value = item.partition("=")
            prov[key] = value
        prov["version"] = version
        start = 1
    reader = csv.reader(lines[start:])
    try:
        header = next(reader)
    except StopIteration:
        raise CSVFormatError(f"{path}: missing header row") from None
    rows = []
    for i, row in enumerate(reader):
        line = start + 2 + i
        if not row:
            continue
        if len(row) != len(header):
            raise CSVFormatError(f"{path}: line {line}: expected {len(header)} columns, "
                                 f"found {len(row)}")
        rows.append((line, row))
    return prov, header, rows


def read_matrix(path: str) -> tuple[np.ndarray, list, dict]:
    """Numeric CSV as a float matrix; errors name the line and column."""
    prov, header, rows = _open_rows(path)
    if not rows:
        raise CSVFormatError(f"{path}: no data rows")
    out = np.empty((len(rows), len(header)))
    for r, (line, row) in enumerate(rows):
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise CSVFormatError(f"{path}: line {line}, column {c + 1} ({header[c]!r}): "
                                     f"not a number: {cell!r}") from None
            if not math.isfinite(v):
                raise CSVFormatError(f"{path}: line {line}, column {c + 1} ({header[c]!r}): "
                                     f"non-finite value {cell!r}")
            out[r, c] = v
    return out, header, prov


def read_records(path: str) -> tuple[list, list, dict]:
    """CSV rows as dicts of strings."""
    prov, header, rows = _open_rows(path)
    return [dict(zip(header, row)) for _, row in rows], header, prov


# ---------------------------------------------------------------------------
# parameters

def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _finite_or_null(obj):
    """JSON has no inf/nan; they become null (a failed candidate's score, say)."""
    if isinstance(obj, dict):
        return {k: _finite_or_null(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_null(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _finite_or_null(obj.tolist())
    if isinstance(obj, (float, np.floating)) and not math.isfinite(obj):
        return None
    return obj


def write_json(path: str, obj) -> None:
    text = json.dumps(_finite_or_null(obj), indent=2, sort_keys=True, default=_json_default,
                      allow_nan=False)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text + "\n")


def theta_to_dict(theta: FactorModelParams, seed=None, chash: Optional[str] = None,
                  design: Optional[dict] = None) -> dict:
    d = {
        "format": THETA_FORMAT,
        "generator": GENERATOR_VERSION,
        "rng": RNG_ALGORITHM,
        "seed": seed,
        "config": chash,
        "design": design,
        "k": theta.k,
        "a": theta.a,
        "beta": theta.beta,
        "sigma_z": theta.sigma_z,
        "sigma_sq": theta.sigma_sq,
    }
    if theta.w_is_diag:
        d["sigma_w_diag"] = theta.sigma_w
    else:
        d["sigma_w"] = theta.sigma_w
    return d


def theta_from_dict(d: dict) -> FactorModelParams:
    if d.get("format") != THETA_FORMAT:
        raise ValueError(f"unsupported parameter file format {d.get('format')!r}")
    if ("sigma_w" in d) == ("sigma_w_diag" in d):
        raise ValueError("parameter file needs exactly one of sigma_w, sigma_w_diag")
    sw = d["sigma_w"] if "sigma_w" in d else d["sigma_w_diag"]
    return FactorModelParams(
        int(d["k"]), np.array(d["a"], dtype=float).reshape(-1, int(d["k"])),
        np.array(d["beta"], dtype=float), np.array(d["sigma_z"], dtype=float).reshape(
            int(d["k"]), int(d["k"])),
        np.array(sw, dtype=float), float(d["sigma_sq"]))


def read_theta(path: str) -> FactorModelParams:
    with open(path, encoding="utf-8") as fh:
        return theta_from_dict(json.load(fh))


def ensure_dir(path: str) -> str:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {path!r}: {exc.strerror}") from exc
    if not os.access(path, os.W_OK):
        raise OSError(f"output directory {path!r} is not writable")
    return path
