"""
Dataset files: CSV or JSON lines, gzip-compressed when the name ends in ``.gz``,
with the generation metadata in a ``<file>.meta.json`` sidecar.

Writes are byte-stable: the same dataset always produces the same bytes.
"""

import gzip
import io
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from feedpuf.exceptions import ConfigurationError, UsageError
from feedpuf.files import read_json, render_json, sidecar_path, write_atomic
from pufs.bits import rows_to_strings, strings_to_rows

from .generation import split_80_20
from .models import CrpDataset
from .serializers import DatasetSidecarSerializer

logger = logging.getLogger(__name__)

COLUMNS = ["instance_id", "challenge", "response", "cycle_index", "faulty"]


def dataset_format(path) -> tuple[str, bool]:
    suffixes = [suffix.lower() for suffix in Path(path).suffixes]
    compressed = bool(suffixes) and suffixes[-1] == ".gz"
    if compressed:
        suffixes = suffixes[:-1]
    kind = suffixes[-1] if suffixes else ""
    if kind == ".csv":
        return "csv", compressed
    if kind in (".jsonl", ".ndjson"):
        return "jsonl", compressed
    raise ConfigurationError(f"cannot infer a dataset format from {Path(path).name!r}; use .csv or .jsonl")


def to_frame(ds: CrpDataset) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "instance_id": [ds.instance_id] * len(ds),
            "challenge": rows_to_strings(ds.challenges),
            "response": rows_to_strings(ds.responses),
            "cycle_index": ds.cycle_index.astype(np.int64),
            "faulty": [ds.faulty] * len(ds),
        },
        columns=COLUMNS,
    )


def from_frame(frame: pd.DataFrame, challenge_width: int, response_width: int, meta=None) -> CrpDataset:
    if list(frame.columns) != COLUMNS:
        raise UsageError(f"dataset columns must be {COLUMNS}, got {list(frame.columns)}")
    ids = frame["instance_id"].astype(str).unique()
    faulty = frame["faulty"].map(_as_bool).unique()
    if len(ids) > 1 or len(faulty) > 1:
        raise UsageError("a dataset holds rows from exactly one device")
    return CrpDataset(
        instance_id=ids[0] if len(ids) else "",
        challenges=strings_to_rows(frame["challenge"].astype(str).tolist(), challenge_width),
        responses=strings_to_rows(frame["response"].astype(str).tolist(), response_width),
        cycle_index=frame["cycle_index"].astype(np.int64).to_numpy(),
        faulty=bool(faulty[0]) if len(faulty) else False,
        meta=dict(meta or {}),
    )


def _as_bool(value) -> bool:
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    text = str(value).strip().lower()
    if text in ("true", "1"):
        return True
    if text in ("false", "0"):
        return False
    raise UsageError(f"not a boolean: {value!r}")


def render_dataset(ds: CrpDataset, kind: str) -> bytes:
    frame = to_frame(ds)
    if kind == "csv":
        text = frame.to_csv(index=False, lineterminator="\n")
    else:
        text = frame.to_json(orient="records", lines=True)
        text = text.rstrip("\n") + "\n" if len(frame) else ""
    return text.encode("utf-8")


def parse_dataset(raw: bytes, kind: str) -> pd.DataFrame:
    text = io.StringIO(raw.decode("utf-8"))
    if kind == "csv":
        # bit strings keep their leading zeros only if read as text
        return pd.read_csv(text, dtype={"instance_id": str, "challenge": str, "response": str}, keep_default_na=False)
    if not raw.strip():
        return pd.DataFrame(columns=COLUMNS)
    return pd.read_json(text, lines=True, dtype=False, convert_dates=False)


def sidecar(ds: CrpDataset) -> dict:
    return {
        "columns": COLUMNS,
        "rows": len(ds),
        "crp_equivalents": ds.crp_equivalents(),
        "train_rows": len(ds.train_idx) if ds.is_split else None,
        "test_rows": len(ds.test_idx) if ds.is_split else None,
        "meta": ds.meta,
    }


def write_dataset(ds: CrpDataset, path) -> None:
    kind, compressed = dataset_format(path)
    data = render_dataset(ds, kind)
    if compressed:
        # mtime=0 keeps the gzip header free of timestamps
        data = gzip.compress(data, mtime=0)
    write_atomic(path, data)
    write_atomic(sidecar_path(path), render_json(sidecar(ds)))
    logger.info("wrote %d rows to %s", len(ds), path)


def read_dataset(path) -> CrpDataset:
    """Read rows and, when present, the sidecar; a recorded split is recomputed from its seed."""
    kind, compressed = dataset_format(path)
    raw = Path(path).read_bytes()
    if compressed:
        raw = gzip.decompress(raw)
    frame = parse_dataset(raw, kind)

    meta_path = sidecar_path(path)
    if not meta_path.exists():
        if frame.empty:
            raise UsageError(f"{path} is empty and has no metadata sidecar")
        widths = [len(str(frame[column].iloc[0])) for column in ("challenge", "response")]
        return from_frame(frame, *widths)

    info = read_json(meta_path)
    DatasetSidecarSerializer(data=info).is_valid(raise_exception=True)
    meta = info["meta"]
    ds = from_frame(frame, meta["challenge_width"], meta["response_width"], meta)
    if len(ds) != info["rows"]:
        raise UsageError(f"{path} has {len(ds)} rows but its sidecar records {info['rows']}")
    if meta.get("split_seed") is not None:
        ds = split_80_20(ds, meta["split_seed"])
        if len(ds.train_idx) != info["train_rows"]:
            raise UsageError("recomputed split does not match the sidecar")
    return ds
