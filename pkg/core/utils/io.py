import csv
import json
import os
import shutil
import tempfile
from pathlib import Path

from utils.logging import get_logger

# Setup logger
logger = get_logger("io")


class OutputStage:
    """
    Collects a run's output files in a staging directory and moves them into
    place only on ``commit``. Leaving the context without committing, or with
    an exception, discards everything, so a failed run leaves no partial files.
    """

    def __init__(self, out_dir: str | Path):
        self.out_dir = Path(out_dir)
        self._staging: Path | None = None
        self._created_out_dir = False
        self._files: list[str] = []

    def __enter__(self):
        self._created_out_dir = not self.out_dir.exists()
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self._staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=self.out_dir))
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self._discard()
        return False

    def _path(self, name: str) -> Path:
        if self._staging is None:
            raise RuntimeError("OutputStage used outside its context")
        if Path(name).name != name:
            raise ValueError(f"Output names must be plain file names, got {name!r}")
        self._files.append(name)
        return self._staging / name

    def write_csv(self, name: str, header: list[str], rows) -> None:
        """RFC 4180 CSV with a mandatory header row."""
        with open(self._path(name), "w", newline="", encoding="utf-8") as f:
            writer = csv.writer(f, lineterminator="\r\n")
            writer.writerow(header)
            writer.writerows(rows)

    def write_json(self, name: str, payload: dict) -> None:
        with open(self._path(name), "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2, sort_keys=True)
            f.write("\n")

    def commit(self) -> list[Path]:
        """Rename every staged file into the output directory."""
        written = []
        for name in self._files:
            target = self.out_dir / name
            os.replace(self._staging / name, target)
            written.append(target)
        logger.info(f"Wrote {len(written)} file(s) to {self.out_dir}")
        self._files = []
        return written

    def _discard(self) -> None:
        if self._staging is not None:
            shutil.rmtree(self._staging, ignore_errors=True)
            self._staging = None
        if self._created_out_dir and not any(self.out_dir.iterdir()):
            self.out_dir.rmdir()
