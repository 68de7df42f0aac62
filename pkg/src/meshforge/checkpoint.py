"""Flat binary checkpoints for kernel weights and mixture parameters.

Layout (all little-endian):

    magic   4 bytes  b"MFKC"
    version u32      currently 1
    t       u32      mixture component count
    c_in    u32      input channel count
    lam     u32      depthwise multiplier
    count   u32      number of arrays
    then per array:
    name_len u16, name utf-8, dtype_code u8 (0=f8 1=f4 2=i8),
    ndim u8, shape u64 * ndim, raw C-order data
"""

import struct
from pathlib import Path

import numpy as np

from .conv import ConvKernel
from .errors import CheckpointError
from .gmm import SphereGMM

MAGIC = b"MFKC"
VERSION = 1
_DTYPE_CODES = {np.dtype("<f8"): 0, np.dtype("<f4"): 1, np.dtype("<i8"): 2}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}


def save_arrays(path, arrays: dict[str, np.ndarray], t: int, c_in: int, lam: int) -> None:
    """Write named arrays plus the kernel geometry header."""
    chunks = [MAGIC, struct.pack("<IIIII", VERSION, t, c_in, lam, len(arrays))]
    for name, arr in arrays.items():
        arr = np.ascontiguousarray(arr)
        if arr.dtype not in _DTYPE_CODES:
            arr = arr.astype(np.float64)
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<H", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<BB", _DTYPE_CODES[arr.dtype], arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        chunks.append(arr.tobytes())
    Path(path).write_bytes(b"".join(chunks))


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict[str, int]]:
    """Read a checkpoint back: (arrays, {'t', 'c_in', 'lam'})."""
    data = Path(path).read_bytes()
    if len(data) < 24 or data[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a meshforge checkpoint (bad magic)")
    version, t, c_in, lam, count = struct.unpack_from("<IIIII", data, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    offset = 24
    arrays: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", data, offset)
            offset += 2
            name = data[offset:offset + name_len].decode("utf-8")
            offset += name_len
            code, ndim = struct.unpack_from("<BB", data, offset)
            offset += 2
            shape = struct.unpack_from(f"<{ndim}Q", data, offset)
            offset += 8 * ndim
            dtype = _CODE_DTYPES[code]
            n_bytes = int(np.prod(shape)) * dtype.itemsize
            arr = np.frombuffer(data, dtype=dtype, count=int(np.prod(shape)), offset=offset)
            offset += n_bytes
            arrays[name] = arr.reshape(shape).copy()
    except (struct.error, KeyError, ValueError) as exc:
        raise CheckpointError(f"{path}: truncated or corrupt checkpoint") from exc
    return arrays, {"t": t, "c_in": c_in, "lam": lam}


def save_conv_checkpoint(
    path, kernels: dict[str, ConvKernel], gmm: SphereGMM | None = None
) -> None:
    """Persist a named set of kernels and (optionally) the sphere mixture."""
    if not kernels:
        raise ValueError("need at least one kernel")
    arrays = {f"{name}.weights": k.weights for name, k in kernels.items()}
    if gmm is not None:
        arrays["gmm.means"] = gmm.means
        arrays["gmm.sigmas"] = gmm.sigmas
        t = gmm.n_components
    else:
        t = max(k.n_filters for k in kernels.values())
    first = next(iter(kernels.values()))
    save_arrays(path, arrays, t=t, c_in=first.in_channels, lam=first.multiplier)


def load_conv_checkpoint(path) -> tuple[dict[str, ConvKernel], SphereGMM | None]:
    """Inverse of save_conv_checkpoint."""
    arrays, _meta = load_arrays(path)
    kernels = {
        name[: -len(".weights")]: ConvKernel(arr)
        for name, arr in arrays.items()
        if name.endswith(".weights") and not name.startswith("gmm.")
    }
    gmm = None
    if "gmm.means" in arrays and "gmm.sigmas" in arrays:
        gmm = SphereGMM(means=arrays["gmm.means"], sigmas=arrays["gmm.sigmas"])
    return kernels, gmm
