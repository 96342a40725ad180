"""Checkpoint container for named arrays.

Layout (format version 1): an uncompressed zip archive whose members are

* ``__meta__.json`` - UTF-8 JSON ``{"format": "hypoxbench-checkpoint",
  "version": 1, "arrays": [names in order], "meta": {...}}``
* ``<name>.npy`` - one ``.npy`` (numpy format 1.0) file per array

Member timestamps are fixed at 1980-01-01 and members are written in sorted
name order, so identical arrays produce byte-identical files.  Arrays are
stored with their exact dtype, so a save/load round trip is bit-exact.
"""
from __future__ import annotations

import io
import json
import os
import zipfile
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from ..errors import DataError

FORMAT = "hypoxbench-checkpoint"
VERSION = 1
_EPOCH = (1980, 1, 1, 0, 0, 0)


def _member(name: str) -> zipfile.ZipInfo:
    info = zipfile.ZipInfo(name, date_time=_EPOCH)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = 0o644 << 16
    return info


def save_checkpoint(path, arrays: Mapping[str, np.ndarray], meta: Mapping[str, Any] | None = None) -> Path:
    path = Path(path)
    names = sorted(arrays)
    header = {"format": FORMAT, "version": VERSION, "arrays": names, "meta": dict(meta or {})}
    tmp = path.with_name(path.name + ".tmp")
    with zipfile.ZipFile(tmp, "w") as zf:
        zf.writestr(_member("__meta__.json"), json.dumps(header, sort_keys=True, indent=1))
        for name in names:
            buf = io.BytesIO()
            np.lib.format.write_array(buf, np.ascontiguousarray(arrays[name]), allow_pickle=False)
            zf.writestr(_member(f"{name}.npy"), buf.getvalue())
    os.replace(tmp, path)
    return path


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    path = Path(path)
    try:
        with zipfile.ZipFile(path) as zf:
            header = json.loads(zf.read("__meta__.json"))
            if header.get("format") != FORMAT:
                raise DataError(f"{path}: not a checkpoint file")
            if header.get("version") != VERSION:
                raise DataError(f"{path}: unsupported checkpoint version {header.get('version')}")
            arrays = {}
            for name in header["arrays"]:
                with zf.open(f"{name}.npy") as fh:
                    arrays[name] = np.lib.format.read_array(io.BytesIO(fh.read()), allow_pickle=False)
    except (zipfile.BadZipFile, KeyError) as exc:
        raise DataError(f"{path}: corrupt checkpoint ({exc})") from None
    return arrays, header["meta"]
