"""
Matrix file formats.

DMR1 binary: the magic bytes ``DMR1``, rows and cols as little-endian
unsigned 64-bit integers, then rows*cols little-endian binary64 values in
row-major order. CSV: one matrix row per line, comma separated, written
with the shortest repr that reads back to the same double.
"""
import logging
from pathlib import Path
from typing import Union

import numpy as np
import pandas as pd

from .exceptions import MatrixFormatError
from .matcore import as_mat

logger = logging.getLogger(__name__)

MAGIC = b'DMR1'
HEADER_DTYPE = np.dtype('<u8')
VALUE_DTYPE = np.dtype('<f8')
HEADER_SIZE = len(MAGIC) + 2 * HEADER_DTYPE.itemsize

PathLike = Union[str, Path]


def encode_dmr1(m: np.ndarray) -> bytes:
    mat = as_mat(m)
    header = np.array(mat.shape, dtype=HEADER_DTYPE).tobytes()
    return MAGIC + header + np.ascontiguousarray(mat, dtype=VALUE_DTYPE).tobytes()


def decode_dmr1(payload: bytes) -> np.ndarray:
    if len(payload) < HEADER_SIZE or payload[:4] != MAGIC:
        raise MatrixFormatError("missing DMR1 magic bytes")
    rows, cols = np.frombuffer(payload, dtype=HEADER_DTYPE, count=2, offset=4)
    expected = HEADER_SIZE + int(rows) * int(cols) * VALUE_DTYPE.itemsize
    if len(payload) != expected:
        raise MatrixFormatError(
            f"DMR1 payload has {len(payload)} bytes, expected {expected} for {rows}x{cols}"
        )
    values = np.frombuffer(payload, dtype=VALUE_DTYPE, offset=HEADER_SIZE)
    return values.astype(np.float64).reshape(int(rows), int(cols))


def write_dmr1(path: PathLike, m: np.ndarray) -> Path:
    path = Path(path)
    path.write_bytes(encode_dmr1(m))
    logger.debug("Wrote %s matrix to %s", np.shape(m), path)
    return path


def read_dmr1(path: PathLike) -> np.ndarray:
    return decode_dmr1(Path(path).read_bytes())


def write_stacked_dmr1(path: PathLike, mats: np.ndarray) -> Path:
    """Store n matrices of shape (m1, m2) as one (n*m1) x m2 DMR1 matrix."""
    stack = np.asarray(mats, dtype=np.float64)
    n, m1, m2 = stack.shape
    return write_dmr1(path, stack.reshape(n * m1, m2))


def read_stacked_dmr1(path: PathLike, m1: int) -> np.ndarray:
    flat = read_dmr1(path)
    if flat.shape[0] % m1:
        raise MatrixFormatError(f"{flat.shape[0]} stacked rows are not a multiple of m1={m1}")
    return flat.reshape(flat.shape[0] // m1, m1, flat.shape[1])


def write_matrix_csv(path: PathLike, m: np.ndarray) -> Path:
    path = Path(path)
    pd.DataFrame(as_mat(m)).to_csv(path, header=False, index=False)
    return path


def read_matrix_csv(path: PathLike) -> np.ndarray:
    frame = pd.read_csv(path, header=None, float_precision='round_trip', dtype=np.float64)
    return as_mat(frame.to_numpy(dtype=np.float64))
