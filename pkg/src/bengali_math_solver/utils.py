"""Utility functions for bengali-math-solver."""

from __future__ import annotations

import os
import unicodedata
from pathlib import Path

# Suffix of annotation and detection files
TEXT_SUFFIX = ".txt"

# Suffix of raw cell-prediction files
CELLS_SUFFIX = ".jsonl"


def nfc(s: str) -> str:
    """Normalize string to NFC Unicode form."""
    return unicodedata.normalize("NFC", s)


def image_id_from_path(path: str | os.PathLike[str]) -> str:
    """Image id of an annotation/detection file: its NFC-normalized stem."""
    return nfc(Path(path).stem)


def walk_files(directory: str | os.PathLike[str], suffix: str) -> list[str]:
    """
    Collect files under *directory* (non-recursive) with the given suffix.

    Hidden files are skipped. The result is sorted by image id so callers
    get the same order on every filesystem.
    """
    files: list[str] = []
    with os.scandir(directory) as entries:
        for entry in entries:
            if entry.name.startswith("."):
                continue
            if entry.is_file() and Path(entry.name).suffix.lower() == suffix:
                files.append(entry.path)
    return sorted(files, key=image_id_from_path)


def atomic_write_text(path: str | os.PathLike[str], text: str) -> None:
    """
    Write *text* to *path* atomically (write to temp, then rename).

    A reader never observes a partially written file; on failure the
    temp file is removed and the original destination is left untouched.
    """
    final_dest = os.fspath(path)
    dest_dir = os.path.dirname(final_dest)
    if dest_dir:
        os.makedirs(dest_dir, exist_ok=True)

    tmp_dest = final_dest + ".tmp__bms"
    try:
        with open(tmp_dest, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
        os.replace(tmp_dest, final_dest)
    except BaseException:
        _cleanup_temp(tmp_dest)
        raise


def _cleanup_temp(path: str) -> None:
    """Clean up a temporary file."""
    try:
        if os.path.exists(path):
            os.remove(path)
    except OSError:
        pass
