"""Reader/writer for the HWTS binary weight container.

This is the interchange format with the inference engine.  Little-endian
layout: magic "HWTS", u32 version (= 1), u32 tensor count; then per
tensor: u16 name length, UTF-8 name, u8 rank, rank x u32 dims,
product(dims) x f32 payload.  No alignment padding.
"""

import struct
from collections import OrderedDict

import numpy as np

MAGIC = b"HWTS"
VERSION = 1
MAX_RANK = 4


def save_hwts(tensors, path):
    """Write an ordered name -> float32 array mapping to ``path``."""
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(tensors)))
        for name, tensor in tensors.items():
            arr = np.ascontiguousarray(tensor, dtype=np.float32)
            if arr.ndim == 0 or arr.ndim > MAX_RANK:
                raise ValueError(f"tensor {name!r} has rank {arr.ndim}")
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.astype("<f4").tobytes())


def _read_exact(f, size, what):
    data = f.read(size)
    if len(data) != size:
        raise ValueError(f"HWTS file ended while reading {what}")
    return data


def load_hwts(path):
    """Read an HWTS file back into an ordered name -> array mapping."""
    out = OrderedDict()
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != MAGIC:
            raise ValueError(f"{path} is not an HWTS weight file")
        version, count = struct.unpack("<II", _read_exact(f, 8, "header"))
        if version != VERSION:
            raise ValueError(f"HWTS version {version} not supported")
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(f, 2, "name length"))
            name = _read_exact(f, name_len, "name").decode("utf-8")
            (rank,) = struct.unpack("<B", _read_exact(f, 1, "rank"))
            if rank == 0 or rank > MAX_RANK:
                raise ValueError(f"tensor {name!r} has invalid rank {rank}")
            dims = struct.unpack(f"<{rank}I", _read_exact(f, 4 * rank, "dims"))
            payload = _read_exact(f, 4 * int(np.prod(dims)),
                                  f"payload of {name!r}")
            out[name] = np.frombuffer(payload, dtype="<f4").reshape(dims)
    return out
