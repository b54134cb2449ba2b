# -*- coding: utf-8 -*-

# State-Aliasing Lab - shared file, digest and seeding helpers


import hashlib
import os
import tempfile
from pathlib import Path
from typing import Iterable, Union

import numpy as np

PathLike = Union[str, Path]


def check_directory(dir_name: PathLike) -> Path:
    path = Path(dir_name)
    path.mkdir(parents=True, exist_ok=True)
    return path


def remove_file(file_name: PathLike) -> None:
    try:
        os.remove(file_name)
    except FileNotFoundError:
        pass


def atomic_write_bytes(path: PathLike, data: bytes) -> Path:
    """Write to a temp file in the target directory, then rename over the target."""
    path = Path(path)
    check_directory(path.parent)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
            f.flush()
            os.fsync(f.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        remove_file(tmp_name)
        raise
    return path


def atomic_write_text(path: PathLike, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def sha256_hex(chunks: Iterable[bytes]) -> str:
    digest = hashlib.sha256()
    for chunk in chunks:
        digest.update(chunk)
    return digest.hexdigest()


def derive_seed(*keys: int) -> int:
    """
    Derive an independent 32-bit seed from a tuple of non-negative integers.

    Streams for (dataset seed, trajectory index) and similar keys never collide
    with the streams of other key tuples.
    """
    return int(np.random.SeedSequence(list(keys)).generate_state(1)[0])


def make_rng(*keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(list(keys)))

