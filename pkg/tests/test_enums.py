"""Tests for core enumerations."""

import pytest
from src.models.enums import EigenSolver, Engine, MoveKind, QubitLabel, RunMode


class TestEngine:
    """Test Engine enum."""

    def test_engine_values(self):
        """Test engine string values."""
        assert str(Engine.ED) == "ed"
        assert str(Engine.QMC) == "qmc"
        assert str(Engine.BOTH) == "both"

    def test_engine_includes(self):
        """Test which single engines a selection runs."""
        assert Engine.BOTH.includes(Engine.ED)
        assert Engine.BOTH.includes(Engine.QMC)
        assert Engine.ED.includes(Engine.ED)
        assert not Engine.ED.includes(Engine.QMC)
        assert not Engine.QMC.includes(Engine.ED)


class TestMoveKind:
    """Test MoveKind enum."""

    def test_move_keys_and_names(self):
        """Test keys and display names of the update moves."""
        assert MoveKind.SHORT.key == "short"
        assert MoveKind.LONG.key == "long"
        assert MoveKind.BLOCK_SWAP.display_name == "Block swap"
        assert str(MoveKind.CYCLE) == "cycle"

    def test_move_order(self):
        """Test that the move order matches the move-mix convention."""
        assert [k.key for k in MoveKind] == ["short", "long", "block_swap", "cycle"]

    def test_from_key(self):
        """Test lookup by key."""
        assert MoveKind.from_key("block_swap") is MoveKind.BLOCK_SWAP
        with pytest.raises(KeyError):
            MoveKind.from_key("teleport")


class TestQubitLabel:
    """Test QubitLabel enum."""

    def test_from_bits(self):
        """Test label construction from readout bits."""
        assert QubitLabel.from_bits(0, 0) is QubitLabel.ZERO_ZERO
        assert QubitLabel.from_bits(0, 1) is QubitLabel.ZERO_ONE
        assert QubitLabel.from_bits(1, 0) is QubitLabel.ONE_ZERO
        assert QubitLabel.from_bits(1, 1) is QubitLabel.ONE_ONE

    def test_string_representation(self):
        """Test string representation used in CSV output."""
        assert str(QubitLabel.ONE_ZERO) == "10"
        assert str(QubitLabel.INDETERMINATE) == "INDETERMINATE"


class TestRunModeAndSolver:
    """Test RunMode and EigenSolver enums."""

    def test_run_modes(self):
        """Test that every command-line mode exists."""
        assert {m.value for m in RunMode} == {"ed", "qmc", "sweep", "convergence", "surface", "stoq-check"}
        assert RunMode("stoq-check") is RunMode.STOQ_CHECK

    def test_eigensolvers(self):
        """Test eigensolver values."""
        assert EigenSolver("shift-invert") is EigenSolver.SHIFT_INVERT
        assert str(EigenSolver.LANCZOS) == "lanczos"
