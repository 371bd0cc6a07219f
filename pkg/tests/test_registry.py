"""Tests for the martingale registry."""

from pathlib import Path

import pytest

from ctmcrand.ctmc import CtmcModel
from ctmcrand.formats import parse_rate_table
from ctmcrand.martingale import (
    ConstantMartingale,
    CoverMartingale,
    FirstBitMartingale,
    LiftedStateMartingale,
    Martingale,
    MartingaleKind,
    RandomBetMartingale,
    SavingsMartingale,
    SojournIndexMartingale,
    StateBetMartingale,
    SumMartingale,
    ZenoDetector,
)
from ctmcrand.registry import MartingaleFactory, MartingaleRegistry, parse_selector

DATA = Path(__file__).resolve().parent.parent / "ctmcrand" / "data"
COVER = DATA / "cover.txt"


@pytest.fixture
def model() -> CtmcModel:
    return parse_rate_table((DATA / "alternating.tab").read_text(encoding="utf-8"))


@pytest.fixture
def registry() -> MartingaleRegistry:
    return MartingaleRegistry.default()


class TestSelectors:
    """Test selector parsing."""

    def test_parse_selector(self) -> None:
        """Test names with and without parameters."""
        assert parse_selector("zeno:i=2") == ("zeno", {"i": "2"})
        assert parse_selector("random") == ("random", {})
        assert parse_selector("lift:index=1:state=b") == ("lift", {"index": "1", "state": "b"})

    def test_bad_selectors(self) -> None:
        """Test rejection of malformed selectors."""
        with pytest.raises(ValueError, match="not key=value"):
            parse_selector("zeno:i")
        with pytest.raises(ValueError, match="empty martingale name"):
            parse_selector(":i=1")


class TestRegistry:
    """Test MartingaleRegistry."""

    def test_default_factories(self, registry: MartingaleRegistry) -> None:
        """Test the built-in factory names."""
        names = [f.name() for f in registry.list_factories()]
        assert names == [
            "constant",
            "zeno",
            "cover",
            "sojourn",
            "lift",
            "state-bet",
            "first-bit",
            "random",
        ]
        assert all(f.description() for f in registry.list_factories())

    def test_build(self, registry: MartingaleRegistry, model: CtmcModel) -> None:
        """Test the type each selector builds."""
        cases = {
            "constant:value=3/2": ConstantMartingale,
            "zeno:i=1": ZenoDetector,
            "sojourn:n=2": SojournIndexMartingale,
            "lift:index=1:state=b": LiftedStateMartingale,
            "state-bet": StateBetMartingale,
            "first-bit:m=3": FirstBitMartingale,
            "random:seed=4": RandomBetMartingale,
        }
        for selector, expected in cases.items():
            assert isinstance(registry.build(selector, model), expected)

    def test_parameters_reach_the_martingale(
        self, registry: MartingaleRegistry, model: CtmcModel
    ) -> None:
        """Test defaults and parsed parameters."""
        assert registry.build("constant:value=3/2", model).initial_capital() == 1.5
        assert registry.build("zeno", model).start == 0
        bet = registry.build("state-bet:index=2", model)
        assert bet.kind is MartingaleKind.STATE
        assert (bet.index, bet.target) == (2, "a")
        random = registry.build("random", model)
        assert (random.seed, random.depth) == (0, 6)

    def test_cover(self, registry: MartingaleRegistry, model: CtmcModel) -> None:
        """Test row, saved row and summed cover martingales."""
        row = registry.build(f"cover:file={COVER}:k=3", model)
        assert isinstance(row, CoverMartingale)
        assert row.k == 3
        saved = registry.build(f"cover:file={COVER}:k=3:savings=1", model)
        assert isinstance(saved, SavingsMartingale)
        total = registry.build(f"cover:file={COVER}", model)
        assert isinstance(total, SumMartingale)
        assert total.truncation == 5

    def test_cover_errors(self, registry: MartingaleRegistry, model: CtmcModel) -> None:
        """Test a missing file parameter and a missing row."""
        with pytest.raises(ValueError, match="file=PATH"):
            registry.build("cover:k=1", model)
        with pytest.raises(ValueError, match="no stored row"):
            registry.build(f"cover:file={COVER}:k=9", model)

    def test_unknown_name(self, registry: MartingaleRegistry, model: CtmcModel) -> None:
        """Test an unregistered name."""
        with pytest.raises(ValueError, match="Martingale 'nope' not found"):
            registry.build("nope", model)

    def test_bad_integer(self, registry: MartingaleRegistry, model: CtmcModel) -> None:
        """Test a parameter that is not an integer."""
        with pytest.raises(ValueError, match="must be an integer"):
            registry.build("zeno:i=first", model)

    def test_register(self, model: CtmcModel) -> None:
        """Test adding a custom factory."""

        class DoubleFactory(MartingaleFactory):
            def name(self) -> str:
                return "double"

            def description(self) -> str:
                return "constant 2"

            def build(self, model: CtmcModel, params) -> Martingale:
                return ConstantMartingale(2)

        registry = MartingaleRegistry()
        registry.register(DoubleFactory())
        assert registry.build("double", model).initial_capital() == 2
        assert [f.name() for f in registry.list_factories()] == ["double"]
