"""Run output persistence with atomic writes, backups and a per-run manifest."""

import csv
import json
import platform
import shutil
import time
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence
import logging

import numpy as np

from .. import __version__
from ..engine.errors import DataPersistenceError


logger = logging.getLogger(__name__)


def _library_versions() -> Dict[str, str]:
    versions = {'python': platform.python_version(), 'numpy': np.__version__}
    for name in ('scipy', 'numba'):
        try:
            module = __import__(name)
            versions[name] = getattr(module, '__version__', 'unknown')
        except ImportError:
            versions[name] = 'missing'
    return versions


def read_config_text(path: Path) -> str:
    """Read a configuration document as UTF-8 text.

    Raises:
        DataPersistenceError: If the file cannot be read
    """
    path = Path(path)
    try:
        return path.read_text(encoding='utf-8')
    except OSError as e:
        raise DataPersistenceError(f"Cannot read configuration file {path}: {e}") from e


class RunOutputManager:
    """Writes the result files of one run into an output directory.

    Every file is first written to a temporary sibling and then moved into
    place. A file that already exists is copied to ``<name>.backup`` before it
    is replaced. Files written through the manager are listed in the manifest.
    """

    FORMAT_VERSION = "1.0"
    BACKUP_SUFFIX = ".backup"
    MANIFEST_NAME = "manifest.json"

    def __init__(self, out_dir: Path = Path("out")):
        self.out_dir = Path(out_dir)
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            raise DataPersistenceError(f"Cannot create output directory {self.out_dir}: {e}") from e
        self.files_written: List[str] = []
        self._started = time.monotonic()
        logger.info(f"Run outputs go to {self.out_dir}")

    def path_for(self, name: str) -> Path:
        return self.out_dir / name

    def _create_backup(self, file_path: Path) -> bool:
        try:
            backup_path = file_path.with_suffix(file_path.suffix + self.BACKUP_SUFFIX)
            shutil.copy2(file_path, backup_path)
            logger.debug(f"Created backup: {backup_path}")
            return True
        except OSError as e:
            logger.error(f"Failed to create backup for {file_path}: {e}")
            return False

    def _write_atomic(self, name: str, writer) -> Path:
        target = self.path_for(name)
        temp_file = target.with_suffix(target.suffix + '.tmp')
        try:
            if target.exists():
                self._create_backup(target)
            with open(temp_file, 'w', encoding='utf-8', newline='') as f:
                writer(f)
            temp_file.replace(target)
        except OSError as e:
            logger.error(f"Failed to write {target}: {e}")
            temp_file.unlink(missing_ok=True)
            raise DataPersistenceError(f"Failed to write {target}: {e}") from e

        if name not in self.files_written:
            self.files_written.append(name)
        logger.info(f"Wrote {target}")
        return target

    def write_csv(self, name: str, fields: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> Path:
        """Write rows as CSV with a header line."""
        def writer(f):
            out = csv.DictWriter(f, fieldnames=list(fields))
            out.writeheader()
            for row in rows:
                out.writerow(row)
        return self._write_atomic(name, writer)

    def write_json(self, name: str, data: Any) -> Path:
        def writer(f):
            json.dump(data, f, indent=2, ensure_ascii=False, default=_json_default)
            f.write("\n")
        return self._write_atomic(name, writer)

    def write_text(self, name: str, text: str) -> Path:
        return self._write_atomic(name, lambda f: f.write(text))

    def write_samples(self, name: str, samples: Mapping[str, np.ndarray]) -> Path:
        """Dump raw Monte Carlo samples as columns ``sweep,q,<observables...>``."""
        columns = list(samples)
        length = len(next(iter(samples.values()))) if samples else 0
        if any(len(v) != length for v in samples.values()):
            raise DataPersistenceError(f"Sample columns of {name} differ in length")

        def writer(f):
            out = csv.writer(f)
            out.writerow(columns)
            for i in range(length):
                out.writerow([_scalar(samples[c][i]) for c in columns])
        return self._write_atomic(name, writer)

    def write_manifest(self, config: Mapping[str, Any], seeds: Optional[Sequence[int]] = None,
                       extra: Optional[Mapping[str, Any]] = None) -> Path:
        """Write ``manifest.json`` describing the run and every file written so far."""
        manifest = {
            'format_version': self.FORMAT_VERSION,
            'fluxstoq_version': __version__,
            'created': datetime.now().isoformat(),
            'wall_time_s': round(time.monotonic() - self._started, 3),
            'config': dict(config),
            'seeds': [int(s) for s in (seeds or [])],
            'libraries': _library_versions(),
            'files': list(self.files_written),
        }
        if extra:
            manifest.update(extra)
        return self.write_json(self.MANIFEST_NAME, manifest)

    def load_json(self, name: str) -> Any:
        """Read back a JSON file, restoring it from its backup if it is corrupt."""
        target = self.path_for(name)
        try:
            with open(target, 'r', encoding='utf-8') as f:
                return json.load(f)
        except json.JSONDecodeError as e:
            logger.error(f"Invalid JSON in {target}: {e}")
            if self._restore_from_backup(target):
                return self.load_json(name)
            raise DataPersistenceError(f"Invalid JSON in {target}: {e}") from e
        except OSError as e:
            raise DataPersistenceError(f"Failed to read {target}: {e}") from e

    def _restore_from_backup(self, file_path: Path) -> bool:
        backup_path = file_path.with_suffix(file_path.suffix + self.BACKUP_SUFFIX)
        if not backup_path.exists():
            logger.warning(f"No backup found for {file_path}")
            return False
        try:
            # Move rather than copy so a corrupt backup cannot recurse forever.
            backup_path.replace(file_path)
            logger.info(f"Restored {file_path} from backup")
            return True
        except OSError as e:
            logger.error(f"Failed to restore {file_path} from backup: {e}")
            return False


def _scalar(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    return value


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")
