"""
Run provenance: a git-style content hash of the package sources and the
metadata block written next to every run.
"""
import hashlib
import platform
from functools import lru_cache
from typing import Any

import numpy as np

from config import settings

__version__ = "1.0.0"

SOURCE_PACKAGES = ("attacks", "cli", "config", "data", "defense", "evaluation", "federation", "network", "utils")


@lru_cache(maxsize=1)
def build_id() -> str:
    """
    Hash every tracked source file the way git hashes blobs into a tree.

    Returns:
        40-character hex digest, stable for identical sources
    """
    root = settings.project_root
    tree = hashlib.sha1()
    for package in SOURCE_PACKAGES:
        for path in sorted((root / package).rglob("*.py")):
            content = path.read_bytes()
            blob = hashlib.sha1(b"blob %d\0" % len(content) + content).hexdigest()
            tree.update(f"{path.relative_to(root).as_posix()} {blob}\n".encode("utf-8"))
    return tree.hexdigest()


def run_metadata(seed: int, extra: dict[str, Any]) -> dict[str, Any]:
    """
    Assemble the metadata block stored in ``metadata.json``.

    Args:
        seed: Master seed of the run
        extra: Run-specific fields (malicious ids, method, ...)

    Returns:
        JSON-serialisable dictionary
    """
    return {
        "version": __version__,
        "build_id": build_id(),
        "seed": seed,
        "python": platform.python_version(),
        "numpy": np.__version__,
        **extra,
    }

