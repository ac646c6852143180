"""Single-file binary container for array-carrying artifacts.

Layout: one UTF-8 JSON header line (format tag, free-form metadata, array
names and shapes) followed by the arrays' raw little-endian float64 bytes in
header order. The writer is fully deterministic, so identical inputs produce
byte-identical files.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import ArtifactFormatError


def write_container(path, tag: str, meta: dict, arrays: dict[str, np.ndarray]) -> None:
    entries = []
    payload = []
    for name, array in arrays.items():
        data = np.ascontiguousarray(array, dtype="<f8")
        entries.append({"name": name, "shape": list(data.shape)})
        payload.append(data.tobytes())
    header = json.dumps({"format": tag, "meta": meta, "arrays": entries}, ensure_ascii=False)
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8") + b"\n")
        for chunk in payload:
            fh.write(chunk)


def read_container(path, tag: str) -> tuple[dict, dict[str, np.ndarray]]:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        try:
            header = json.loads(header_line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ArtifactFormatError(f"{path}: unreadable artifact header") from exc
        if header.get("format") != tag:
            raise ArtifactFormatError(f"{path}: expected format {tag!r}, got {header.get('format')!r}")
        arrays: dict[str, np.ndarray] = {}
        for entry in header["arrays"]:
            shape = tuple(int(n) for n in entry["shape"])
            nbytes = 8 * math.prod(shape)
            raw = fh.read(nbytes)
            if len(raw) != nbytes:
                raise ArtifactFormatError(f"{path}: truncated array {entry['name']!r}")
            arrays[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
        return header["meta"], arrays
