"""Flat binary parameter checkpoints.

Layout: a UTF-8 text header, then the raw parameter payload. The header is
one magic line, one line per parameter ("name dim0 dim1 ..."), and an "end"
line; the payload concatenates each parameter as little-endian float64 in
header order. Text header keeps the format greppable; fixed dtype keeps it
portable.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError, ShapeError

MAGIC = "scmsim-checkpoint v1"


def save_checkpoint(path, named_params):
    """Write (name, Tensor-or-array) pairs; order is preserved."""
    names = [name for name, _ in named_params]
    if len(set(names)) != len(names):
        raise ContractError("duplicate parameter names in checkpoint")
    lines = [MAGIC]
    blobs = []
    for name, param in named_params:
        data = np.asarray(getattr(param, "data", param), dtype=np.float64)
        if any(ch.isspace() for ch in name) or not name:
            raise ContractError(f"bad parameter name {name!r}")
        dims = " ".join(str(d) for d in data.shape) if data.shape else "0"
        lines.append(f"{name} {dims}".rstrip())
        blobs.append(data.astype("<f8").tobytes())
    header = ("\n".join(lines) + "\nend\n").encode("utf-8")
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            for blob in blobs:
                fh.write(blob)
    except OSError:
        raise


def load_checkpoint(path) -> dict:
    """Read a checkpoint into an ordered {name: float64 array} dict."""
    with open(path, "rb") as fh:
        raw = fh.read()
    marker = b"\nend\n"
    split = raw.find(marker)
    if split < 0:
        raise ContractError(f"{path}: missing checkpoint header terminator")
    header = raw[:split].decode("utf-8").splitlines()
    payload = raw[split + len(marker):]
    if not header or header[0] != MAGIC:
        raise ContractError(f"{path}: not a checkpoint file")
    out: dict = {}
    offset = 0
    for line in header[1:]:
        parts = line.split()
        name = parts[0]
        dims = tuple(int(d) for d in parts[1:])
        if dims == (0,):
            dims = ()
        count = int(np.prod(dims, dtype=int)) if dims else 1
        nbytes = count * 8
        if offset + nbytes > len(payload):
            raise ContractError(f"{path}: truncated payload at {name}")
        arr = np.frombuffer(payload[offset:offset + nbytes], dtype="<f8")
        out[name] = arr.reshape(dims).astype(np.float64)
        offset += nbytes
    if offset != len(payload):
        raise ContractError(f"{path}: {len(payload) - offset} trailing payload bytes")
    return out


def apply_checkpoint(named_params, loaded: dict):
    """Copy loaded arrays into live parameters, strict on names and shapes."""
    seen = set()
    for name, param in named_params:
        if name not in loaded:
            raise ContractError(f"checkpoint is missing parameter {name}")
        arr = loaded[name]
        if arr.shape != param.data.shape:
            raise ShapeError(
                f"{name}: checkpoint shape {arr.shape} != live shape {param.data.shape}")
        param.data[...] = arr
        seen.add(name)
    extra = set(loaded) - seen
    if extra:
        raise ContractError(f"checkpoint has unknown parameters: {sorted(extra)}")
