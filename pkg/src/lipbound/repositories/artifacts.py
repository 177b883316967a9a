"""
Atomic writing of run artifacts.

Files are staged next to their final path and renamed into place only
when the whole command has succeeded, so a failed run leaves nothing
partial behind.
"""

import csv
import io
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

logger = logging.getLogger(__name__)


def atomic_write_text(path: Path, text: str) -> Path:
    """Write ``text`` to ``path`` through a temp file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


def render_json(payload: Any) -> str:
    """Canonical JSON text (two-space indent, trailing newline)."""
    return json.dumps(payload, indent=2, allow_nan=False) + "\n"


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """CSV text with a header row and ``\\n`` line endings."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(["" if value is None else value for value in row])
    return buffer.getvalue()


class ArtifactWriter:
    """
    Stage several output files and commit them together.

    Usage::

        with ArtifactWriter() as artifacts:
            artifacts.write_json(out / "report.json", payload)
            artifacts.write_csv(out / "table.csv", header, rows)
        # files are in place here; on an exception none of them is
    """

    def __init__(self):
        self._staged: list[tuple[Path, Path]] = []

    @property
    def paths(self) -> list[Path]:
        """Final paths of all staged artifacts, in staging order."""
        return [final for _, final in self._staged]

    def write_text(self, path: Path, text: str) -> Path:
        """Stage a text file."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        self._staged.append((Path(tmp), path))
        return path

    def write_json(self, path: Path, payload: Any) -> Path:
        """Stage a JSON document."""
        return self.write_text(path, render_json(payload))

    def write_csv(self, path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
        """Stage a CSV table."""
        return self.write_text(path, render_csv(header, rows))

    def commit(self) -> list[Path]:
        """Rename every staged file into place."""
        for tmp, final in self._staged:
            os.replace(tmp, final)
            logger.info("Wrote %s", final)
        return self.paths

    def discard(self) -> None:
        """Remove every staged temp file."""
        for tmp, _ in self._staged:
            tmp.unlink(missing_ok=True)
        self._staged.clear()

    def __enter__(self) -> "ArtifactWriter":
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is None:
            self.commit()
        else:
            self.discard()
