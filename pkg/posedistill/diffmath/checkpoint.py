"""
Parameter checkpoint I/O.

A checkpoint directory holds two files:

``checkpoint.json``
    format tag and version, a free-form ``header`` object supplied by the
    caller (model topology, epoch, config hash, ...), the parameter group
    table, the frozen groups, and one entry per stored array:
    ``{"name", "kind", "shape", "offset"}`` where offset counts float64
    elements from the start of the blob. ``kind`` is ``param``, ``buffer``,
    ``adam_m`` or ``adam_v``; Adam step counts live in ``adam_t``.
``params.bin``
    every array's values as little-endian float64, concatenated in entry
    order. Its CRC32 is stored in the JSON.
"""

from __future__ import annotations

import json
import logging
import zlib
from pathlib import Path
from typing import Any

import numpy as np

from posedistill.errors import CheckpointError

from .params import ParamStore

logger = logging.getLogger(__name__)

FORMAT_TAG = "posedistill-params"
FORMAT_VERSION = 1
MANIFEST_NAME = "checkpoint.json"
BLOB_NAME = "params.bin"

_LE_F8 = np.dtype("<f8")


def write_params(
    store: ParamStore,
    directory: str | Path,
    header: dict[str, Any] | None = None,
    *,
    include_optimizer: bool = True,
) -> Path:
    """Write *store* into *directory* (created if needed); returns the directory."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)

    entries: list[dict[str, Any]] = []
    chunks: list[bytes] = []
    offset = 0

    def push(name: str, kind: str, arr: np.ndarray) -> None:
        nonlocal offset
        entries.append({"name": name, "kind": kind, "shape": list(arr.shape), "offset": offset})
        chunks.append(np.ascontiguousarray(arr, dtype=_LE_F8).tobytes())
        offset += int(arr.size)

    for name in store.names:
        push(name, "param", store.value(name))
    for name in store.buffer_names:
        push(name, "buffer", store.buffer(name))
    adam_t: dict[str, int] = {}
    if include_optimizer:
        for name in store.names:
            m, v, t = store.adam_state(name)
            push(name, "adam_m", m)
            push(name, "adam_v", v)
            adam_t[name] = t

    blob = b"".join(chunks)
    manifest = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "header": header or {},
        "groups": {name: store.group_of(name) for name in store.names},
        "frozen_groups": store.frozen_groups,
        "entries": entries,
        "adam_t": adam_t,
        "count": offset,
        "crc32": zlib.crc32(blob),
    }
    (out / BLOB_NAME).write_bytes(blob)
    (out / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    logger.debug("wrote %d arrays (%d values) to %s", len(entries), offset, out)
    return out


def read_header(directory: str | Path) -> dict[str, Any]:
    """Return only the caller header of a checkpoint."""
    header: dict[str, Any] = _read_manifest(Path(directory))["header"]
    return header


def read_params(directory: str | Path) -> tuple[ParamStore, dict[str, Any]]:
    """
    Rebuild a ParamStore (values, buffers, groups, frozen flags and, when
    present, Adam state) from a checkpoint directory.

    Raises
    ------
    CheckpointError
        On missing files, an unknown format, a short blob, or a CRC mismatch.
    """
    src = Path(directory)
    manifest = _read_manifest(src)
    blob_path = src / BLOB_NAME
    try:
        blob = blob_path.read_bytes()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint blob {blob_path}: {exc}") from exc

    count = int(manifest["count"])
    if len(blob) != count * _LE_F8.itemsize:
        raise CheckpointError(
            f"{blob_path}: expected {count * _LE_F8.itemsize} bytes, found {len(blob)}"
        )
    if zlib.crc32(blob) != int(manifest["crc32"]):
        raise CheckpointError(f"{blob_path}: CRC32 mismatch")

    flat = np.frombuffer(blob, dtype=_LE_F8).astype(np.float64)
    groups: dict[str, str] = manifest["groups"]
    store = ParamStore()
    moments: dict[str, dict[str, np.ndarray]] = {}
    for entry in manifest["entries"]:
        shape = tuple(int(s) for s in entry["shape"])
        start = int(entry["offset"])
        arr = flat[start : start + int(np.prod(shape, dtype=np.int64))].reshape(shape).copy()
        kind = entry["kind"]
        name = entry["name"]
        if kind == "param":
            store.add(name, arr, groups[name])
        elif kind == "buffer":
            store.add_buffer(name, arr)
        elif kind in ("adam_m", "adam_v"):
            moments.setdefault(name, {})[kind] = arr
        else:
            raise CheckpointError(f"{src}: unknown entry kind {kind!r}")

    for name, t in manifest.get("adam_t", {}).items():
        pair = moments.get(name, {})
        if "adam_m" not in pair or "adam_v" not in pair:
            raise CheckpointError(f"{src}: incomplete Adam state for {name!r}")
        store.set_adam_state(name, pair["adam_m"], pair["adam_v"], int(t))
    store.freeze(manifest.get("frozen_groups", []))
    return store, dict(manifest["header"])


def _read_manifest(src: Path) -> dict[str, Any]:
    path = src / MANIFEST_NAME
    try:
        manifest: dict[str, Any] = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise CheckpointError(f"no checkpoint at {src} ({MANIFEST_NAME} missing)") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot parse {path}: {exc}") from exc
    if manifest.get("format") != FORMAT_TAG:
        raise CheckpointError(f"{path}: not a {FORMAT_TAG} checkpoint")
    if manifest.get("version") != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported version {manifest.get('version')!r}, expected {FORMAT_VERSION}"
        )
    for key in ("header", "groups", "entries", "count", "crc32"):
        if key not in manifest:
            raise CheckpointError(f"{path}: missing field {key!r}")
    return manifest
