"""Versioned binary container for disorder slabs.

Layout (little endian):
    magic        6 bytes  b"PLSLAB"
    version      uint16
    header_len   uint32
    header       JSON, UTF-8: {N, d, law, seed, replica, kind, count}
    records      count × (n: int32, x: int32[d], eta: float64), sorted by (n, x)
"""

import json
import logging
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..config import SLAB_FORMAT_VERSION, SLAB_MAGIC, ErrorCode
from ..disorder.laws import TailLaw
from ..utils.errors import PolymerLabError
from .environment import EnvSlab

logger = logging.getLogger(__name__)

_PREFIX = struct.Struct("<6sHI")


def _record_dtype(d: int) -> np.dtype:
    return np.dtype([("n", "<i4"), ("x", "<i4", (d,)), ("eta", "<f8")])


def save_slab(env: EnvSlab, path: Union[str, Path], kind: str = "slab") -> Path:
    """Write every reachable site of ``env`` to ``path``."""
    path = Path(path)
    sites = list(env.sites())
    records = np.zeros(len(sites), dtype=_record_dtype(env.d))
    for i, (n, x, eta) in enumerate(sites):
        records[i] = (n, x, eta)
    header = {
        "N": env.N,
        "d": env.d,
        "law": env.law.model_dump() if env.law is not None else None,
        "seed": env.key.seed if env.key is not None else None,
        "replica": env.key.replica if env.key is not None else None,
        "kind": kind,
        "count": len(sites),
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with path.open("wb") as fh:
        fh.write(_PREFIX.pack(SLAB_MAGIC, SLAB_FORMAT_VERSION, len(blob)))
        fh.write(blob)
        fh.write(records.tobytes())
    logger.debug(f"Wrote {len(sites)} sites to {path}")
    return path


def load_slab(path: Union[str, Path]) -> EnvSlab:
    """Read a slab written by ``save_slab``."""
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _PREFIX.size:
        raise PolymerLabError(ErrorCode.IO_ERROR, "truncated slab file", {"path": str(path)})
    magic, version, header_len = _PREFIX.unpack_from(raw)
    if magic != SLAB_MAGIC:
        raise PolymerLabError(ErrorCode.IO_ERROR, "not a slab container", {"path": str(path)})
    if version != SLAB_FORMAT_VERSION:
        raise PolymerLabError(ErrorCode.IO_ERROR, f"unsupported slab format version {version}", {"path": str(path)})
    start = _PREFIX.size
    header = json.loads(raw[start:start + header_len].decode("utf-8"))
    records = np.frombuffer(raw, dtype=_record_dtype(header["d"]), count=header["count"], offset=start + header_len)
    law: Optional[TailLaw] = TailLaw.model_validate(header["law"]) if header["law"] else None
    values = {(int(r["n"]), tuple(int(c) for c in r["x"])): float(r["eta"]) for r in records}
    slab = EnvSlab.from_values(header["N"], header["d"], values)
    slab.law = law
    return slab
