"""Tests for run output persistence."""

import csv
import json
from unittest.mock import patch

import numpy as np
import pytest

from src import __version__
from src.data.data_manager import RunOutputManager, read_config_text
from src.engine.errors import DataPersistenceError


class TestRunOutputManager:
    """Test RunOutputManager functionality."""

    @pytest.fixture
    def manager(self, tmp_path):
        return RunOutputManager(tmp_path / "out")

    def test_creates_output_directory(self, tmp_path):
        """Test that the output directory is created."""
        manager = RunOutputManager(tmp_path / "nested" / "out")
        assert manager.out_dir.is_dir()
        assert manager.files_written == []

    def test_write_csv(self, manager):
        """Test CSV output with a header."""
        path = manager.write_csv("ed.csv", ["phi_x", "label"], [{"phi_x": 3.14, "label": "00"}])
        with open(path, newline="") as f:
            rows = list(csv.DictReader(f))
        assert rows == [{"phi_x": "3.14", "label": "00"}]
        assert manager.files_written == ["ed.csv"]

    def test_write_json_with_numpy_values(self, manager):
        """Test that numpy scalars and arrays are serialized."""
        manager.write_json("stats.json", {"mean": np.float64(0.5), "values": np.arange(3)})
        assert manager.load_json("stats.json") == {"mean": 0.5, "values": [0, 1, 2]}

    def test_overwrite_creates_backup(self, manager):
        """Test that replacing a file keeps the previous version as a backup."""
        manager.write_text("matrix.txt", "first\n")
        manager.write_text("matrix.txt", "second\n")
        assert manager.path_for("matrix.txt").read_text() == "second\n"
        assert manager.path_for("matrix.txt.backup").read_text() == "first\n"
        assert manager.files_written == ["matrix.txt"]

    def test_corrupt_json_restored_from_backup(self, manager):
        """Test recovery of a corrupt JSON file from its backup."""
        manager.write_json("anneal.json", {"points": 3})
        manager.write_json("anneal.json", {"points": 5})
        manager.path_for("anneal.json").write_text("{broken")
        assert manager.load_json("anneal.json") == {"points": 3}

    def test_corrupt_json_without_backup(self, manager):
        """Test that a corrupt file without backup raises."""
        manager.path_for("anneal.json").write_text("{broken")
        with pytest.raises(DataPersistenceError, match="Invalid JSON"):
            manager.load_json("anneal.json")

    def test_missing_json(self, manager):
        """Test reading a file that does not exist."""
        with pytest.raises(DataPersistenceError, match="Failed to read"):
            manager.load_json("missing.json")

    def test_write_failure_cleans_up(self, manager):
        """Test that a failed write raises and leaves no temporary file."""
        with patch("pathlib.Path.replace", side_effect=OSError("disk full")):
            with pytest.raises(DataPersistenceError, match="disk full"):
                manager.write_text("ed.csv", "data")
        assert not manager.path_for("ed.csv.tmp").exists()
        assert not manager.path_for("ed.csv").exists()
        assert manager.files_written == []

    def test_write_samples(self, manager):
        """Test column-wise sample dumps."""
        path = manager.write_samples("samples.csv", {"sweep": np.array([0, 1]), "Phi1": np.array([0.5, -0.5])})
        assert path.read_text().splitlines() == ["sweep,Phi1", "0,0.5", "1,-0.5"]

    def test_write_samples_unequal_lengths(self, manager):
        """Test that sample columns must have equal length."""
        with pytest.raises(DataPersistenceError, match="differ in length"):
            manager.write_samples("samples.csv", {"a": np.zeros(2), "b": np.zeros(3)})

    def test_manifest(self, manager):
        """Test the manifest contents."""
        manager.write_text("ed.csv", "x\n")
        manager.write_manifest({"mode": "ed"}, seeds=[np.uint64(7)], extra={"status": "ok"})
        manifest = manager.load_json("manifest.json")
        assert manifest["format_version"] == "1.0"
        assert manifest["fluxstoq_version"] == __version__
        assert manifest["config"] == {"mode": "ed"}
        assert manifest["seeds"] == [7]
        assert manifest["files"] == ["ed.csv"]
        assert manifest["status"] == "ok"
        assert "numpy" in manifest["libraries"]


class TestReadConfigText:
    """Test configuration file reading."""

    def test_read(self, tmp_path):
        """Test reading a UTF-8 document."""
        path = tmp_path / "params.cfg"
        path.write_text("L1_pH = 1.0\n", encoding="utf-8")
        assert read_config_text(path) == "L1_pH = 1.0\n"

    def test_missing_file(self, tmp_path):
        """Test that an unreadable file is a persistence error."""
        with pytest.raises(DataPersistenceError, match="Cannot read configuration file"):
            read_config_text(tmp_path / "absent.cfg")
