"""CSV result files and the run manifest."""

import csv
import hashlib
import json
import logging
import platform
from importlib import metadata
from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence

import numpy as np
import pydantic
import scipy

from ..config import CSV_SCHEMA_VERSION, ErrorCode
from ..utils.errors import PolymerLabError
from .settings import ExperimentConfig

logger = logging.getLogger(__name__)

PACKAGE_NAME = "polymerlab"


def config_hash(config: ExperimentConfig) -> str:
    """sha256 of the canonical (sorted-key) config JSON."""
    return hashlib.sha256(config.canonical_json().encode("utf-8")).hexdigest()


def _package_version() -> str:
    try:
        return metadata.version(PACKAGE_NAME)
    except metadata.PackageNotFoundError:
        return "0.0.0+local"


def _cell(value: Any) -> str:
    """Format one CSV cell; floats use repr so reruns are byte-identical."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (list, tuple)):
        return ";".join(_cell(v) for v in value)
    return str(value)


class ResultWriter:
    """Writes every CSV of one run into ``config.output`` and then its manifest."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.directory = Path(config.output)
        self.config_hash = config_hash(config)
        self.files: List[str] = []
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise PolymerLabError(ErrorCode.IO_ERROR, f"cannot create output directory: {e}", {"path": str(self.directory)})

    @property
    def experiment_id(self) -> str:
        return f"{self.config.experiment}-{self.config_hash[:12]}"

    def _kept_rows(self, path: Path, header: List[str]) -> List[List[str]]:
        """Rows of an existing file that belong to other runs; a different layout is refused."""
        if not path.exists():
            return []
        try:
            with path.open(newline="") as fh:
                reader = csv.reader(fh)
                existing = next(reader, None)
                rows = list(reader)
        except OSError as e:
            raise PolymerLabError(ErrorCode.IO_ERROR, f"cannot read {path}: {e}", {"path": str(path)})
        if existing is None:
            return []
        if existing != header:
            raise PolymerLabError(
                ErrorCode.IO_ERROR,
                f"{path.name} has a different column layout; use a fresh output directory",
                {"path": str(path), "expected": header, "found": existing},
            )
        id_col = header.index("experiment_id")
        return [row for row in rows if row and row[id_col] != self.experiment_id]

    def write_rows(self, name: str, rows: Sequence[Mapping[str, Any]], columns: Sequence[str]) -> Path:
        """
        Append ``rows`` to <output>/<name>.csv, keyed by experiment_id.

        Rows from other runs stay; rows from an earlier run of the same config are
        replaced, so a rerun leaves the file byte-identical. experiment_id, seed and
        config_hash are filled in for every row and put in front of ``columns``
        unless ``columns`` already places them.
        """
        path = self.directory / f"{name}.csv"
        fixed = {"experiment_id": self.experiment_id, "seed": self.config.seed, "config_hash": self.config_hash}
        header = list(columns) if "experiment_id" in columns else ["experiment_id", "seed", "config_hash", *columns]
        kept = self._kept_rows(path, header)
        try:
            with path.open("w", newline="") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                writer.writerow(header)
                writer.writerows(kept)
                for row in rows:
                    writer.writerow([_cell(fixed[c] if c in fixed else row.get(c)) for c in header])
        except OSError as e:
            raise PolymerLabError(ErrorCode.IO_ERROR, f"cannot write {path}: {e}", {"path": str(path)})
        self.files.append(path.name)
        logger.info(f"wrote {len(rows)} rows to {path} ({len(kept)} rows from other runs kept)")
        return path

    def register(self, path: Path) -> None:
        """Record a file written by another writer (e.g. a cloud CSV)."""
        self.files.append(Path(path).name)

    def manifest(self, wall_time: float, summary: Dict[str, Any]) -> Dict[str, Any]:
        return {
            "experiment": self.config.experiment,
            "experiment_id": self.experiment_id,
            "config_hash": self.config_hash,
            "config": self.config.model_dump(mode="json"),
            "seed": self.config.seed,
            "csv_schema_version": CSV_SCHEMA_VERSION,
            "versions": {
                PACKAGE_NAME: _package_version(),
                "python": platform.python_version(),
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "pydantic": pydantic.VERSION,
            },
            "wall_time_seconds": wall_time,
            "files": sorted(self.files),
            "summary": summary,
        }

    def _previous_runs(self, path: Path) -> Dict[str, Any]:
        if not path.exists():
            return {}
        try:
            previous = json.loads(path.read_text())
        except (OSError, ValueError) as e:
            logger.warning(f"ignoring unreadable manifest {path}: {e}")
            return {}
        runs = previous.get("runs") if isinstance(previous, dict) else None
        return dict(runs) if isinstance(runs, dict) else {}

    def write_manifest(self, wall_time: float, summary: Dict[str, Any]) -> Path:
        """Write the manifest of this run; ``runs`` lists every run whose rows share the directory."""
        path = self.directory / "manifest.json"
        manifest = self.manifest(wall_time, summary)
        runs = self._previous_runs(path)
        runs[self.experiment_id] = {
            "experiment": self.config.experiment,
            "config_hash": self.config_hash,
            "seed": self.config.seed,
            "files": sorted(self.files),
        }
        manifest["runs"] = runs
        try:
            path.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str))
        except OSError as e:
            raise PolymerLabError(ErrorCode.IO_ERROR, f"cannot write {path}: {e}", {"path": str(path)})
        return path
