"""HWTS binary weight container.

Little-endian layout: magic "HWTS", u32 version (= 1), u32 tensor count;
then per tensor: u16 name length, UTF-8 name, u8 rank, rank x u32 dims,
product(dims) x f32 payload.  No alignment padding anywhere.  The round
trip through save/load is bit-exact.
"""

import struct

import numpy as np

from ..errors import BadMagic, DuplicateName, TruncatedFile, VersionUnsupported

MAGIC = b"HWTS"
VERSION = 1
MAX_RANK = 4


class WeightStore:
    """Ordered, insert-only map of tensor name -> float32 array."""

    def __init__(self):
        self._entries = {}

    def add(self, name, tensor):
        if name in self._entries:
            raise DuplicateName(f"tensor {name!r} already present")
        arr = np.ascontiguousarray(tensor, dtype=np.float32)
        if arr.ndim == 0 or arr.ndim > MAX_RANK:
            raise ValueError(f"tensor rank must be 1..{MAX_RANK}, got {arr.ndim}")
        self._entries[name] = arr

    def __getitem__(self, name):
        return self._entries[name]

    def __contains__(self, name):
        return name in self._entries

    def __len__(self):
        return len(self._entries)

    def names(self):
        return list(self._entries)

    def items(self):
        return self._entries.items()


def save_weights(store, path):
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(store)))
        for name, tensor in store.items():
            encoded = name.encode("utf-8")
            f.write(struct.pack("<H", len(encoded)))
            f.write(encoded)
            f.write(struct.pack("<B", tensor.ndim))
            f.write(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
            f.write(tensor.astype("<f4").tobytes())


def _read_exact(f, size, what):
    data = f.read(size)
    if len(data) != size:
        raise TruncatedFile(f"file ended while reading {what}")
    return data


def load_weights(path):
    store = WeightStore()
    with open(path, "rb") as f:
        if _read_exact(f, 4, "magic") != MAGIC:
            raise BadMagic(f"{path} is not an HWTS weight file")
        version, count = struct.unpack("<II", _read_exact(f, 8, "header"))
        if version != VERSION:
            raise VersionUnsupported(f"HWTS version {version} not supported")
        for _ in range(count):
            (name_len,) = struct.unpack("<H", _read_exact(f, 2, "name length"))
            name = _read_exact(f, name_len, "name").decode("utf-8")
            (rank,) = struct.unpack("<B", _read_exact(f, 1, "rank"))
            if rank == 0 or rank > MAX_RANK:
                raise TruncatedFile(f"tensor {name!r} has invalid rank {rank}")
            dims = struct.unpack(f"<{rank}I", _read_exact(f, 4 * rank, "dims"))
            n_elem = int(np.prod(dims))
            payload = _read_exact(f, 4 * n_elem, f"payload of {name!r}")
            arr = np.frombuffer(payload, dtype="<f4").reshape(dims)
            store.add(name, arr)
    return store
