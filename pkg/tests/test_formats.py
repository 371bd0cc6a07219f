"""Tests for text formats."""

from fractions import Fraction
from pathlib import Path

import pytest

from ctmcrand import __version__
from ctmcrand.ctmc import EMPTY_SPEC, Trajectory, TrajectorySpec
from ctmcrand.formats import (
    GENERATOR,
    ParseError,
    RunManifest,
    parse_cover,
    parse_rate_table,
    parse_trajectory,
    parse_transition_table,
    render_cover,
    render_trajectory,
    sha256_text,
)
from ctmcrand.sojourn import Duration

DATA = Path(__file__).resolve().parent.parent / "ctmcrand" / "data"


class TestTables:
    """Test transition and rate tables."""

    def test_rate_table(self) -> None:
        """Test reading rates and the initialization."""
        model = parse_rate_table((DATA / "branch.tab").read_text(encoding="utf-8"))
        assert model.exit_rate("a") == 4
        assert model.jump_prob("a", "c") == Fraction(3, 4)
        assert model.init.states == ["a"]
        assert model.states == ("a", "b", "c")

    def test_description_is_source_text(self) -> None:
        """Test that the fingerprint follows the file text."""
        text = "a -> b : 1\nb -> a : 1\ninit a : 1\n"
        assert parse_rate_table(text).description == text
        assert parse_rate_table(text).fingerprint == parse_rate_table(text).fingerprint
        assert parse_rate_table(text).fingerprint != parse_rate_table(text + "# note\n").fingerprint

    def test_transition_table(self) -> None:
        """Test reading probabilities."""
        sys, init = parse_transition_table("a -> b : 1/3\na -> c : 2/3\ninit a : 1\n")
        assert sys.pi("a", "c") == Fraction(2, 3)
        assert init.weight("a") == 1

    def test_missing_weight(self) -> None:
        """Test the location of a line without a weight."""
        with pytest.raises(ParseError) as info:
            parse_rate_table("init a : 1\na -> b\n")
        assert info.value.line == 2
        assert info.value.column == 7

    def test_bad_weight(self) -> None:
        """Test a weight that is not an exact rational."""
        with pytest.raises(ParseError) as info:
            parse_rate_table("a -> b : 0.x\ninit a : 1\n")
        assert info.value.line == 1
        assert "not an exact rational" in info.value.message

    def test_self_loop(self) -> None:
        """Test rejection of a self loop."""
        with pytest.raises(ParseError) as info:
            parse_rate_table("a -> a : 1\ninit a : 1\n")
        assert info.value.column == 6

    def test_missing_init(self) -> None:
        """Test a table without an initialization."""
        with pytest.raises(ParseError, match="no 'init' lines"):
            parse_rate_table("a -> b : 1\n")

    def test_error_message(self) -> None:
        """Test that errors render their location."""
        error = ParseError("oops", 3, 4)
        assert str(error) == "line 3, column 4: oops"
        assert isinstance(error, ValueError)


class TestTrajectoryFiles:
    """Test trajectory rendering and parsing."""

    @pytest.fixture
    def trajectory(self) -> Trajectory:
        steps = (
            ("a", Duration.of(Fraction(1, 2))),
            ("b", Duration.of(Fraction(1, 3))),
            ("a", Duration.quantile(1, Fraction(1, 4))),
            ("c", Duration.infinite()),
        )
        return Trajectory(steps, seed=9, model_hash="abc", stream=2)

    def test_render(self, trajectory: Trajectory) -> None:
        """Test header and step lines."""
        encoding = TrajectorySpec.parse("a:01/b:1/a:0/c:111")
        text = render_trajectory(trajectory, encoding, 3, precision=128)
        lines = text.splitlines()
        assert lines[:7] == [
            "# ctmcrand trajectory",
            "# model abc",
            "# seed 9",
            f"# generator {GENERATOR}",
            "# stream 2",
            "# precision 128",
            "# depth 3",
        ]
        assert lines[7] == "a\t0.5\t01@2"
        assert lines[8] == "b\t=1/3\t1@1"
        assert lines[9] == "a\tq:1/4:1\t0@1"
        assert lines[10] == "c\tinf\t111@3"

    def test_parse_inverts_render(self, trajectory: Trajectory) -> None:
        """Test reading back a rendered file with its manifest."""
        encoding = TrajectorySpec.parse("a:01/b:1/a:0/c:111")
        manifest = RunManifest.create("simulate", {"model": "a -> b : 1\n"}, seed=9, precision=128)
        text = render_trajectory(trajectory, encoding, 3, precision=128, manifest=manifest)
        stored = parse_trajectory(text)
        assert stored.trajectory == trajectory
        assert stored.encoding == encoding
        assert stored.depth == 3
        assert stored.precision == 128
        assert stored.manifest == manifest

    def test_bundled_files(self) -> None:
        """Test the bundled trajectory fixtures."""
        zeros = parse_trajectory((DATA / "zeros.traj").read_text(encoding="utf-8"))
        assert len(zeros.trajectory) == 20
        assert zeros.depth == 60
        assert zeros.trajectory.seed is None
        assert zeros.trajectory.model_hash == ""
        assert zeros.trajectory.durations[0] == Duration.of(Fraction(1, 2**62))
        zeno = parse_trajectory((DATA / "zeno.traj").read_text(encoding="utf-8"))
        assert zeno.encoding.bits == ("0",) * 30

    def test_bad_bits_count(self) -> None:
        """Test that the declared bit count must match."""
        with pytest.raises(ParseError) as info:
            parse_trajectory("# depth 2\na\t0.5\t01@3\n")
        assert info.value.line == 2
        assert info.value.column == 7

    def test_bad_fields(self) -> None:
        """Test lines that are not three tab-separated fields."""
        with pytest.raises(ParseError):
            parse_trajectory("a 0.5 01@2\n")
        with pytest.raises(ParseError):
            parse_trajectory("a\tsoon\t0@1\n")
        with pytest.raises(ParseError):
            parse_trajectory("a\t0.5\t02@2\n")


class TestCovers:
    """Test cover files."""

    def test_parse_bundled_cover(self) -> None:
        """Test levels and entries of the bundled cover."""
        cover = parse_cover((DATA / "cover.txt").read_text(encoding="utf-8"))
        assert sorted(cover) == [0, 1, 2, 3, 4, 5]
        assert cover[0] == [EMPTY_SPEC]
        assert cover[3] == [TrajectorySpec.parse("a:0/b:00")]
        assert len(cover[4]) == 2

    def test_empty_rows(self) -> None:
        """Test bare levels and comments."""
        cover = parse_cover("# none yet\n2\n3 a:1\n")
        assert cover == {2: [], 3: [TrajectorySpec.parse("a:1")]}
        assert render_cover(cover) == "2\n3 a:1\n"

    def test_render_round_trip(self) -> None:
        """Test that rendering keeps every row."""
        cover = {0: [EMPTY_SPEC], 1: [TrajectorySpec.parse("a:0"), TrajectorySpec.parse("a:1/b:")]}
        assert render_cover(cover) == "0 ()\n1 a:0\n1 a:1/b:\n"
        assert parse_cover(render_cover(cover)) == cover

    def test_bad_level(self) -> None:
        """Test a row without a numeric level."""
        with pytest.raises(ParseError) as info:
            parse_cover("1 a:0\nk a:1\n")
        assert info.value.line == 2

    def test_bad_spec(self) -> None:
        """Test an entry with a malformed token."""
        with pytest.raises(ParseError) as info:
            parse_cover("1 a:0/b\n")
        assert info.value.column == 3


class TestManifest:
    """Test run manifests."""

    def test_create(self) -> None:
        """Test hashing of inputs and stamping."""
        manifest = RunManifest.create("measure", {"model": "text"}, seed=3)
        assert manifest.inputs == {"model": sha256_text("text")}
        assert len(manifest.inputs["model"]) == 16
        assert manifest.version == __version__
        assert manifest.timestamp.endswith("+00:00")

    def test_render_and_absorb(self) -> None:
        """Test that rendered lines read back."""
        manifest = RunManifest("bet", {"model": "0123"}, seed=1, precision=256, timestamp="t")
        restored = RunManifest(command="")
        for line in manifest.render():
            restored.absorb(line)
        assert restored == manifest
