"""
Checkpoint codec: magic, JSON header, then little-endian parameter payload.

Layout::

    b"FNWS" | uint32 LE header length | UTF-8 JSON header | weights/bias per layer (LE, C order)
"""
import json
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from network.layers import Layer, LayerSpec, WeightSet
from utils.exceptions import DatasetFormatError, RunIOError

MAGIC = b"FNWS"
FORMAT_VERSION = 1


def encode(w: WeightSet, seed: Optional[int] = None) -> bytes:
    """
    Serialise a WeightSet.

    Args:
        w: Weights to encode
        seed: Seed recorded in the header

    Returns:
        Encoded bytes
    """
    dtype = np.dtype(w.dtype).newbyteorder("<")
    header = {
        "version": FORMAT_VERSION,
        "seed": seed,
        "dtype": dtype.str,
        "layers": [spec.to_dict() for spec in w.specs],
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    chunks = [MAGIC, struct.pack("<I", len(header_bytes)), header_bytes]
    for layer in w.layers:
        chunks.append(np.ascontiguousarray(layer.weights, dtype=dtype).tobytes())
        chunks.append(np.ascontiguousarray(layer.bias, dtype=dtype).tobytes())
    return b"".join(chunks)


def decode(payload: bytes) -> tuple[WeightSet, dict]:
    """
    Parse bytes produced by :func:`encode`.

    Args:
        payload: Encoded checkpoint

    Returns:
        (WeightSet in its native-endian dtype, header dictionary)

    Raises:
        DatasetFormatError: on bad magic, truncated payload or trailing bytes
    """
    if payload[:4] != MAGIC:
        raise DatasetFormatError("bad checkpoint magic", offset=0)
    if len(payload) < 8:
        raise DatasetFormatError("truncated checkpoint header", offset=len(payload))
    (header_length,) = struct.unpack("<I", payload[4:8])
    header_end = 8 + header_length
    if len(payload) < header_end:
        raise DatasetFormatError("truncated checkpoint header", offset=len(payload))
    header = json.loads(payload[8:header_end].decode("utf-8"))
    dtype = np.dtype(header["dtype"])
    cursor = header_end
    layers = []
    for raw in header["layers"]:
        spec = LayerSpec.from_dict(raw)
        arrays = []
        for shape in ((spec.output_size, spec.input_size), (spec.output_size,)):
            nbytes = int(np.prod(shape)) * dtype.itemsize
            if cursor + nbytes > len(payload):
                raise DatasetFormatError("truncated checkpoint payload", offset=cursor)
            array = np.frombuffer(payload, dtype=dtype, count=int(np.prod(shape)), offset=cursor)
            arrays.append(array.reshape(shape).astype(dtype.newbyteorder("=")))
            cursor += nbytes
        layers.append(Layer(arrays[0], arrays[1], spec))
    if cursor != len(payload):
        raise DatasetFormatError("trailing bytes after checkpoint payload", offset=cursor)
    return WeightSet(layers), header


def save_weights(w: WeightSet, path: Union[str, Path], seed: Optional[int] = None) -> Path:
    """Write a checkpoint file, creating parent directories."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(encode(w, seed))
    except OSError as exc:
        raise RunIOError("cannot write checkpoint", path) from exc
    return path


def load_weights(path: Union[str, Path]) -> WeightSet:
    """Read a checkpoint file."""
    path = Path(path)
    try:
        payload = path.read_bytes()
    except OSError as exc:
        raise RunIOError("cannot read checkpoint", path) from exc
    try:
        return decode(payload)[0]
    except DatasetFormatError as exc:
        raise DatasetFormatError(str(exc), path=path, offset=exc.offset) from exc
