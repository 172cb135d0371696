"""
Parameter checkpoints: magic, JSON header (spec hash, names, shapes), raw little-endian float64.
"""
import hashlib
import json
import struct
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import numpy as np

from .errors import CheckpointMismatchError

MAGIC = b"PBCKPT01"
FORMAT_VERSION = 1


def spec_digest(payload: Any) -> str:
    """sha256 over a canonical JSON rendering."""
    text = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def save_params(path: Union[str, Path], params: Mapping[str, np.ndarray], spec_hash: str,
                meta: Optional[Dict[str, Any]] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    names = list(params)
    header = {
        "format_version": FORMAT_VERSION,
        "spec_hash": spec_hash,
        "params": [{"name": n, "shape": list(np.shape(params[n]))} for n in names],
        "meta": meta or {},
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(blob)))
        f.write(blob)
        for name in names:
            f.write(np.ascontiguousarray(params[name], dtype="<f8").tobytes())
    return path


def _split_header(data: bytes, path: Union[str, Path]) -> Tuple[Dict[str, Any], int]:
    if data[:len(MAGIC)] != MAGIC:
        raise CheckpointMismatchError(f"{path} is not a parameter checkpoint")
    offset = len(MAGIC)
    if len(data) < offset + 4:
        raise CheckpointMismatchError(f"{path} is truncated before its header length")
    (length,) = struct.unpack_from("<I", data, offset)
    offset += 4
    if len(data) < offset + length:
        raise CheckpointMismatchError(f"{path} is truncated inside its header")
    try:
        header = json.loads(data[offset:offset + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointMismatchError(f"{path} has an unreadable header: {e}") from e
    if not isinstance(header, dict) or "spec_hash" not in header or "params" not in header:
        raise CheckpointMismatchError(f"{path} header lacks spec_hash or params")
    return header, offset + length


def read_header(path: Union[str, Path]) -> Dict[str, Any]:
    """
    Header of a checkpoint without touching its parameters.

    Raises:
        CheckpointMismatchError: bad magic or damaged header
    """
    return _split_header(Path(path).read_bytes(), path)[0]


def load_params(path: Union[str, Path], spec_hash: Optional[str] = None
                ) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    """
    Read a checkpoint.

    Raises:
        CheckpointMismatchError: bad magic, truncated payload or spec hash mismatch
    """
    data = Path(path).read_bytes()
    header, offset = _split_header(data, path)
    if spec_hash is not None and header["spec_hash"] != spec_hash:
        raise CheckpointMismatchError(
            f"{path} was written for spec {header['spec_hash'][:12]}, expected {spec_hash[:12]}")

    params: Dict[str, np.ndarray] = {}
    for entry in header["params"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 8 * count
        if end > len(data):
            raise CheckpointMismatchError(f"{path} is truncated at parameter '{entry['name']}'")
        params[entry["name"]] = np.frombuffer(data[offset:end], dtype="<f8").astype(np.float64).reshape(shape)
        offset = end
    return params, header


def load_into(module, path: Union[str, Path], spec_hash: str) -> Dict[str, Any]:
    """Load a checkpoint into a Module, mapping layout differences onto CheckpointMismatchError."""
    params, header = load_params(path, spec_hash)
    expected = {name: p.shape for name, p in module.named_parameters().items()}
    found = {name: value.shape for name, value in params.items()}
    if expected != found:
        raise CheckpointMismatchError(f"{path} parameter layout does not match the network")
    module.load_state_dict(params)
    return header
