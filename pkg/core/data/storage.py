"""
Dataset files.

Layout (all integers little-endian):
    b"POBD" | u32 format version | u32 header length | UTF-8 JSON header
    then one chunk per episode:
    u32 T | u32 d | uint8 frames (T+1, H, W, 3) | <f8 actions (T, d) | <f8 rewards (T,)

The header carries a sha256 checksum over the chunk region and the total
content length, so corruption, truncation and version drift are told apart.
"""
import hashlib
import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np

from .dataset import FORMAT_VERSION, Dataset, DatasetHeader, EpisodeRecord
from .errors import ChecksumError, ConsistencyError, DatasetFormatError, TruncatedError, VersionError

logger = logging.getLogger('pobench.data.storage')

MAGIC = b"POBD"


def _encode_header(header: Dict[str, Any]) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_raw(path: Union[str, Path], header: Dict[str, Any], content: bytes,
              version: int = FORMAT_VERSION) -> Path:
    """Write a header dict and content bytes exactly as given."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob = _encode_header(header)
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", version, len(blob)))
        f.write(blob)
        f.write(content)
    return path


def read_raw(path: Union[str, Path]) -> Tuple[int, Dict[str, Any], bytes]:
    """Split a file into (version, header dict, content bytes) without validation."""
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) + 8:
        raise TruncatedError(f"{path}: file too short for a dataset preamble")
    if data[:len(MAGIC)] != MAGIC:
        raise DatasetFormatError(f"{path}: not a dataset file")
    version, length = struct.unpack_from("<II", data, len(MAGIC))
    start = len(MAGIC) + 8
    if len(data) < start + length:
        raise TruncatedError(f"{path}: header truncated ({len(data) - start} of {length} bytes)")
    try:
        header = json.loads(data[start:start + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DatasetFormatError(f"{path}: unreadable header: {e}")
    return version, header, data[start + length:]


def save(dataset: Dataset, path: Union[str, Path]) -> Path:
    dataset.refresh_header()
    content = b"".join(e.content_bytes() for e in dataset.episodes)
    header = dataset.header.to_dict()
    header["content_bytes"] = len(content)
    written = write_raw(path, header, content)
    logger.info(f"Saved '{dataset.label}' ({dataset.transitions} transitions, "
                f"checksum {dataset.header.checksum[:12]}) to {written}")
    return written


def load(path: Union[str, Path]) -> Dataset:
    """
    Read and verify a dataset file.

    Raises:
        VersionError, TruncatedError, ChecksumError, ConsistencyError, DatasetFormatError
    """
    version, raw_header, content = read_raw(path)
    if version != FORMAT_VERSION:
        raise VersionError(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    declared = int(raw_header.get("content_bytes", -1))
    if len(content) < declared:
        raise TruncatedError(f"{path}: content truncated ({len(content)} of {declared} bytes)")
    if len(content) > declared:
        raise DatasetFormatError(f"{path}: {len(content) - declared} trailing bytes after content")
    if hashlib.sha256(content).hexdigest() != raw_header.get("checksum"):
        raise ChecksumError(f"{path}: content checksum mismatch")

    header = DatasetHeader.from_dict(raw_header)
    size = int(header.env_config["render_size"])
    try:
        episodes = _parse_episodes(content, header.episodes, size, path)
    except ValueError as e:
        raise ConsistencyError(f"{path}: episode layout disagrees with the header: {e}")
    dataset = Dataset(header=header, episodes=episodes)
    dataset.verify()
    return dataset


def _parse_episodes(content: bytes, metas: List[Dict[str, Any]], size: int, path) -> List[EpisodeRecord]:
    episodes: List[EpisodeRecord] = []
    offset = 0
    for index, meta in enumerate(metas):
        if offset + 8 > len(content):
            raise ConsistencyError(f"{path}: header lists {len(metas)} episodes, content ends at {index}")
        t, d = (int(v) for v in np.frombuffer(content, dtype="<u4", count=2, offset=offset))
        offset += 8
        frame_bytes = (t + 1) * size * size * 3
        frames = np.frombuffer(content, dtype=np.uint8, count=frame_bytes, offset=offset)
        offset += frame_bytes
        actions = np.frombuffer(content, dtype="<f8", count=t * d, offset=offset)
        offset += 8 * t * d
        rewards = np.frombuffer(content, dtype="<f8", count=t, offset=offset)
        offset += 8 * t
        episodes.append(EpisodeRecord(
            frames=frames.reshape(t + 1, size, size, 3).copy(),
            actions=actions.reshape(t, d).astype(np.float64),
            rewards=rewards.astype(np.float64),
            config_hash=meta["config_hash"],
            env_seed=int(meta["env_seed"]),
            variant=meta.get("variant", ""),
            distraction=meta.get("distraction"),
        ))
    if offset != len(content):
        raise ConsistencyError(f"{path}: {len(content) - offset} content bytes not covered by the header")
    return episodes
