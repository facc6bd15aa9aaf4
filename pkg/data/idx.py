"""
IDX container reader/writer (big-endian dimension headers, unsigned-byte
payloads) for image and label files. Paths ending in ``.gz`` are handled
transparently.
"""
import gzip
import struct
from pathlib import Path
from typing import Optional, Union

import numpy as np

from data.dataset import LabeledDataset
from utils.exceptions import DatasetFormatError, RunIOError
from utils.logger import get_logger

logger = get_logger(__name__)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

PathLike = Union[str, Path]


def _read_bytes(path: Path) -> bytes:
    try:
        if path.suffix == ".gz":
            with gzip.open(path, "rb") as handle:
                return handle.read()
        return path.read_bytes()
    except FileNotFoundError as exc:
        raise RunIOError("dataset file not found", path) from exc
    except OSError as exc:
        raise RunIOError("cannot read dataset file", path) from exc


def _write_bytes(path: Path, payload: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix == ".gz":
        # mtime=0 keeps gzip output reproducible
        with open(path, "wb") as raw, gzip.GzipFile(fileobj=raw, mode="wb", mtime=0) as handle:
            handle.write(payload)
    else:
        path.write_bytes(payload)


def _parse(payload: bytes, path: Path, expected_magic: int) -> np.ndarray:
    if len(payload) < 4:
        raise DatasetFormatError("truncated magic number", path, offset=len(payload))
    (magic,) = struct.unpack(">I", payload[:4])
    if magic != expected_magic:
        raise DatasetFormatError(f"bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}", path, offset=0)
    ndim = magic & 0xFF
    header_end = 4 + 4 * ndim
    if len(payload) < header_end:
        raise DatasetFormatError("truncated dimension header", path, offset=len(payload))
    dims = struct.unpack(f">{ndim}I", payload[4:header_end])
    expected = int(np.prod(dims)) if dims else 0
    available = len(payload) - header_end
    if available < expected:
        raise DatasetFormatError(
            f"truncated payload: {available} of {expected} bytes", path, offset=len(payload)
        )
    if available > expected:
        raise DatasetFormatError("trailing bytes after payload", path, offset=header_end + expected)
    return np.frombuffer(payload, dtype=np.uint8, count=expected, offset=header_end).reshape(dims)


def read_idx_images(path: PathLike) -> np.ndarray:
    """Raw uint8 images [count x rows x cols]."""
    path = Path(path)
    return _parse(_read_bytes(path), path, IMAGE_MAGIC)


def read_idx_labels(path: PathLike) -> np.ndarray:
    """Raw uint8 labels [count]."""
    path = Path(path)
    return _parse(_read_bytes(path), path, LABEL_MAGIC)


def load_idx(images_path: PathLike, labels_path: PathLike, num_classes: Optional[int] = None) -> LabeledDataset:
    """
    Load an image/label IDX pair into a LabeledDataset with pixels scaled to [0,1].

    Args:
        images_path: IDX3 image file
        labels_path: IDX1 label file
        num_classes: Class count (defaults to max label + 1)

    Returns:
        LabeledDataset with float32 samples

    Raises:
        DatasetFormatError: bad magic, truncated file or count mismatch
    """
    images = read_idx_images(images_path)
    labels = read_idx_labels(labels_path)
    if images.shape[0] != labels.shape[0]:
        # label count sits right after the label magic
        raise DatasetFormatError(
            f"image count {images.shape[0]} does not match label count {labels.shape[0]}",
            labels_path,
            offset=4,
        )
    rows, cols = int(images.shape[1]), int(images.shape[2])
    samples = images.reshape(images.shape[0], rows * cols).astype(np.float32) / np.float32(255.0)
    label_vector = labels.astype(np.int64)
    if num_classes is None:
        num_classes = int(label_vector.max()) + 1 if label_vector.size else 1
    logger.info(f"Loaded {images.shape[0]} samples of {rows}x{cols} from {images_path}")
    return LabeledDataset(samples, label_vector, int(num_classes), (rows, cols))


def write_idx(ds: LabeledDataset, images_path: PathLike, labels_path: PathLike) -> None:
    """
    Serialise a dataset back to an IDX pair (pixels rounded to bytes).

    Args:
        ds: Dataset with an image_shape (a 1 x n shape is assumed otherwise)
        images_path: Target image file
        labels_path: Target label file
    """
    rows, cols = ds.image_shape or (1, ds.num_features)
    pixels = np.rint(ds.samples.astype(np.float64) * 255.0).astype(np.uint8)
    image_payload = struct.pack(">IIII", IMAGE_MAGIC, len(ds), rows, cols) + pixels.tobytes()
    label_payload = struct.pack(">II", LABEL_MAGIC, len(ds)) + ds.labels.astype(np.uint8).tobytes()
    _write_bytes(Path(images_path), image_payload)
    _write_bytes(Path(labels_path), label_payload)
