"""Versioned binary checkpoint format.

Layout (all integers little-endian)::

    b"SRMA1"                      magic
    uint64  count                 number of records
    uint8   flags                 bit 0 set = frozen parameters
    count x record:
        uint32  name length
        bytes   UTF-8 name
        uint32  rank
        uint64  dims[rank]
        float32 values[prod(dims)]

Round-trips of 32-bit values are bit-exact.
"""

import io
import logging
import struct
from pathlib import Path
from typing import Any, BinaryIO, Dict, Mapping, Tuple, Union

import numpy as np
import numpy.typing as npt

from .exceptions import CheckpointError
from .params import ParamStore

logger = logging.getLogger(__name__)

MAGIC = b"SRMA1"
FLAG_FROZEN = 0x01

PathLike = Union[str, Path]


def write_arrays(stream: BinaryIO, arrays: Mapping[str, npt.NDArray[Any]], frozen: bool = False) -> None:
    """Write named arrays to a binary stream."""
    stream.write(MAGIC)
    stream.write(struct.pack("<QB", len(arrays), FLAG_FROZEN if frozen else 0))
    for name, values in arrays.items():
        encoded = name.encode("utf-8")
        array = np.asarray(values)
        stream.write(struct.pack("<I", len(encoded)))
        stream.write(encoded)
        stream.write(struct.pack("<I", array.ndim))
        if array.ndim:
            stream.write(struct.pack(f"<{array.ndim}Q", *array.shape))
        stream.write(np.ascontiguousarray(array, dtype="<f4").tobytes())


def _read_exact(stream: BinaryIO, size: int) -> bytes:
    data = stream.read(size)
    if len(data) != size:
        raise CheckpointError("Checkpoint truncated")
    return data


def read_arrays(stream: BinaryIO) -> Tuple[Dict[str, npt.NDArray[np.float32]], bool]:
    """Read named float32 arrays and the frozen flag from a binary stream.

    Raises:
        CheckpointError: On a bad magic string or truncated data
    """
    if _read_exact(stream, len(MAGIC)) != MAGIC:
        raise CheckpointError("Not an SRMA1 checkpoint")
    count, flags = struct.unpack("<QB", _read_exact(stream, 9))
    arrays: Dict[str, npt.NDArray[np.float32]] = {}
    for _ in range(count):
        (name_length,) = struct.unpack("<I", _read_exact(stream, 4))
        try:
            name = _read_exact(stream, name_length).decode("utf-8")
        except UnicodeDecodeError as e:
            raise CheckpointError(f"Invalid parameter name: {e}") from e
        (rank,) = struct.unpack("<I", _read_exact(stream, 4))
        dims = struct.unpack(f"<{rank}Q", _read_exact(stream, 8 * rank)) if rank else ()
        size = int(np.prod(dims, dtype=np.int64)) if rank else 1
        values = np.frombuffer(_read_exact(stream, 4 * size), dtype="<f4")
        if name in arrays:
            raise CheckpointError(f"Duplicate record: {name}")
        arrays[name] = values.astype(np.float32).reshape(dims)
    return arrays, bool(flags & FLAG_FROZEN)


def dumps(arrays: Mapping[str, npt.NDArray[Any]], frozen: bool = False) -> bytes:
    buffer = io.BytesIO()
    write_arrays(buffer, arrays, frozen)
    return buffer.getvalue()


def loads(data: bytes) -> Tuple[Dict[str, npt.NDArray[np.float32]], bool]:
    return read_arrays(io.BytesIO(data))


def save(path: PathLike, arrays: Mapping[str, npt.NDArray[Any]], frozen: bool = False) -> None:
    target = Path(path)
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        with target.open("wb") as stream:
            write_arrays(stream, arrays, frozen)
    except OSError as e:
        logger.error(f"Failed to write checkpoint {target}: {e}")
        raise CheckpointError(f"Cannot write {target}: {e}") from e
    logger.debug(f"Wrote {len(arrays)} arrays to {target}")


def load(path: PathLike) -> Tuple[Dict[str, npt.NDArray[np.float32]], bool]:
    source = Path(path)
    try:
        with source.open("rb") as stream:
            return read_arrays(stream)
    except OSError as e:
        raise CheckpointError(f"Cannot read {source}: {e}") from e


def save_params(path: PathLike, params: ParamStore) -> None:
    """Write a parameter store; the frozen flag mirrors ``params.frozen``."""
    save(path, params.state_arrays(), frozen=params.frozen)


def load_params(path: PathLike, params: ParamStore) -> bool:
    """Load values into an existing store.

    Returns:
        bool: The checkpoint's frozen flag
    """
    arrays, frozen = load(path)
    params.load_arrays({k: v for k, v in arrays.items() if k in params}, strict=False)
    missing = [name for name in params if name not in arrays]
    if missing:
        raise CheckpointError(f"Checkpoint {path} lacks parameters: {missing}")
    return frozen
