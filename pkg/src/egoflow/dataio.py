"""CSV/JSON readers and writers with deterministic formatting.

Edge files are CSV or TSV with columns src,dst,created_at[,origin] where
origin is 's' or 'r' (anything absent or empty means unknown); the header
row is optional. Node files carry node,registered_at; impression files
user,candidate,shown_at. All outputs are written with stable column orders
and repr-style float formatting so identical inputs and seeds produce
byte-identical artifacts.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np
import pandas as pd

from .timegraph import ORIGIN_NAMES, ParseError, TimeGraph

ORIGIN_CHAR = {0: "s", 1: "r", 2: ""}
_ORIGIN_CODE = {"s": 0, "r": 1, "": 2, "spontaneous": 0, "recommended": 1,
                "unknown": 2}


def _sniff(path: Path) -> tuple[str, bool]:
    """(delimiter, has_header) from the first line."""
    with open(path, "r", encoding="utf-8") as fh:
        first = fh.readline()
    delim = "\t" if "\t" in first else ","
    fields = first.rstrip("\n").split(delim)
    has_header = len(fields) >= 3 and not fields[2].strip().lstrip("-").isdigit()
    return delim, has_header


def _coerce_ids(*columns):
    """Convert id columns to int64 when every value is integral, else strings."""
    as_num = [pd.to_numeric(col, errors="coerce") for col in columns]
    ok = all(num.notna().all() and (num % 1 == 0).all() for num in as_num)
    if ok:
        return [num.astype(np.int64).to_numpy() for num in as_num]
    return [col.astype(str).to_numpy() for col in columns]


def read_edges_csv(path):
    """Edge arrays (src, dst, ts, origin_code) from a CSV/TSV file."""
    path = Path(path)
    delim, has_header = _sniff(path)
    df = pd.read_csv(path, sep=delim, header=0 if has_header else None,
                     dtype=str, keep_default_na=False, skip_blank_lines=True)
    if df.shape[1] not in (3, 4):
        raise ParseError(f"{path}: expected 3 or 4 columns, found {df.shape[1]}")
    offset = 2 if has_header else 1  # 1-based line numbers for error reports
    ts = pd.to_numeric(df.iloc[:, 2], errors="coerce")
    bad = ts.isna()
    if bad.any():
        line = int(np.flatnonzero(bad.to_numpy())[0]) + offset
        raise ParseError(f"bad timestamp {df.iloc[:, 2].iloc[int(line - offset)]!r}",
                         line=line)
    src, dst = _coerce_ids(df.iloc[:, 0], df.iloc[:, 1])
    if df.shape[1] == 4:
        origin = df.iloc[:, 3].str.strip().map(_ORIGIN_CODE)
        bad = origin.isna()
        if bad.any():
            line = int(np.flatnonzero(bad.to_numpy())[0]) + offset
            raise ParseError(f"bad origin {df.iloc[:, 3].iloc[int(line - offset)]!r}",
                             line=line)
        origin = origin.to_numpy().astype(np.int8)
    else:
        origin = np.full(len(df), 2, dtype=np.int8)
    return src, dst, ts.to_numpy().astype(np.int64), origin


def read_nodes_csv(path):
    path = Path(path)
    delim, has_header = _sniff(path)
    df = pd.read_csv(path, sep=delim, header=0 if has_header else None,
                     dtype=str, keep_default_na=False, skip_blank_lines=True)
    reg = pd.to_numeric(df.iloc[:, 1], errors="coerce")
    if reg.isna().any():
        line = int(np.flatnonzero(reg.isna().to_numpy())[0]) + (2 if has_header else 1)
        raise ParseError("bad registration time", line=line)
    (ids,) = _coerce_ids(df.iloc[:, 0])
    return ids, reg.to_numpy().astype(np.int64)


def read_impressions_csv(path):
    """(user, candidate, shown_at) arrays; malformed rows counted and skipped."""
    path = Path(path)
    delim, has_header = _sniff(path)
    df = pd.read_csv(path, sep=delim, header=0 if has_header else None,
                     dtype=str, keep_default_na=False, skip_blank_lines=True)
    shown = pd.to_numeric(df.iloc[:, 2], errors="coerce")
    good = shown.notna().to_numpy()
    n_skipped = int((~good).sum())
    user, cand = _coerce_ids(df.iloc[:, 0][good], df.iloc[:, 1][good])
    return user, cand, shown.to_numpy()[good].astype(np.int64), n_skipped


def load_graph(edges_path, nodes_path=None, dedup: bool = True) -> TimeGraph:
    src, dst, ts, origin = read_edges_csv(edges_path)
    node_ids = node_reg = None
    if nodes_path is not None:
        node_ids, node_reg = read_nodes_csv(nodes_path)
    return TimeGraph.from_arrays(src, dst, ts, origin, node_ids=node_ids,
                                 node_reg=node_reg, dedup=dedup)


# -- writers ---------------------------------------------------------------


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return repr(value)
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    return str(value)


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_table_csv(path, table: dict, columns, transforms=None) -> None:
    """Columnar table (dict of aligned arrays) to CSV via pandas (fast path)."""
    data = {}
    for col in columns:
        arr = table[col]
        if transforms and col in transforms:
            arr = transforms[col](arr)
        data[col] = arr
    df = pd.DataFrame(data, columns=list(columns))
    df.to_csv(path, index=False, na_rep="", lineterminator="\n")


def write_json(path, payload) -> None:
    def default(obj):
        if isinstance(obj, (np.integer,)):
            return int(obj)
        if isinstance(obj, (np.floating,)):
            return float(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if hasattr(obj, "__dataclass_fields__"):
            from dataclasses import asdict
            return asdict(obj)
        raise TypeError(f"not JSON serializable: {type(obj)}")

    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=default,
                  allow_nan=False)
        fh.write("\n")


def write_edges_csv(path, records) -> None:
    """Records as (src, dst, ts, 's'|'r'|'') or EdgeRecord-likes."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("src,dst,created_at,origin\n")
        out = []
        for rec in records:
            if hasattr(rec, "src"):
                origin = rec.origin
                if origin in ORIGIN_NAMES:
                    origin = ORIGIN_CHAR[ORIGIN_NAMES.index(origin)]
                rec = (rec.src, rec.dst, rec.created_at, origin)
            out.append(f"{rec[0]},{rec[1]},{rec[2]},{rec[3]}\n")
        fh.writelines(out)


def write_nodes_csv(path, records) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("node,registered_at\n")
        fh.writelines(f"{node},{reg}\n" for node, reg in records)


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(out_dir, subcommand: str, config: dict, inputs: dict,
                   outputs: list) -> None:
    manifest = {
        "tool": "egoflow",
        "subcommand": subcommand,
        "config": {k: v for k, v in sorted(config.items())},
        "input_digests": {str(k): file_digest(v) for k, v in sorted(inputs.items())
                          if v is not None},
        "outputs": sorted(str(o) for o in outputs),
    }
    write_json(Path(out_dir) / "manifest.json", manifest)
