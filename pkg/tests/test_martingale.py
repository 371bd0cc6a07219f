"""Tests for martingales, fairness verification and prefix sets."""

import functools
from fractions import Fraction
from typing import List

import numpy as np
import pytest

from ctmcrand.ctmc import EMPTY_SPEC, CtmcModel, TrajectorySpec, mu_traj, verify_null_cover
from ctmcrand.martingale import (
    ConstantMartingale,
    CoverMartingale,
    FunctionMartingale,
    MartingaleKind,
    NodeBudgetExceeded,
    NotAChain,
    NotAnAntichain,
    SavingsMartingale,
    SojournDepthPolicy,
    Split,
    StateBetMartingale,
    ancestry,
    cover_sum_martingale,
    cover_to_martingale,
    duration_first_bit_martingale,
    kraft_check,
    lift_state_martingale,
    martingale_to_prefix_set,
    random_bet_martingale,
    render_node,
    run_martingale,
    savings_martingale,
    sojourn_index_martingale,
    sum_martingales,
    verify_duration_fairness,
    verify_state_fairness,
    verify_trajectory_fairness,
    zeno_detector,
)
from ctmcrand.sojourn import RateSequence
from ctmcrand.transition import Initialization, StateSequence

UNIT_RATES = RateSequence([1], infinite=True)


def spec(text: str) -> TrajectorySpec:
    return TrajectorySpec.parse(text)


@pytest.fixture
def forked() -> CtmcModel:
    """a jumps to b at rate 2 and to the terminal c at rate 1; b returns to a."""
    return CtmcModel.from_table(
        {"a": {"b": 2, "c": 1}, "b": {"a": 1}},
        Initialization({"a": Fraction(1, 2), "b": Fraction(1, 2)}),
    )


@pytest.fixture
def alternating() -> CtmcModel:
    return CtmcModel.from_table({"a": {"b": 1}, "b": {"a": 1}}, Initialization.point("a"))


@pytest.fixture
def absorbing() -> CtmcModel:
    return CtmcModel.from_table({"a": {"b": 1}}, Initialization.point("a"))


def route_dependent(node: TrajectorySpec) -> Fraction:
    """Bets on sojourn 1's first bit, choosing the side by what is known of sojourn 0."""
    first = node[0][1] if len(node) else ""
    capital = Fraction(1) if not first else Fraction(2 if first[0] == "0" else 0)
    if len(node) >= 2 and node[1][1]:
        wanted = "0" if not first else "1"
        capital *= 2 if node[1][1][0] == wanted else 0
    return capital


class TestNodes:
    """Test ancestry and rendering of specifications of every kind."""

    def test_duration_ancestry(self) -> None:
        """Test the canonical chain of a duration tuple."""
        assert ancestry(MartingaleKind.DURATION, ("01", "1")) == [
            (),
            ("",),
            ("0",),
            ("01",),
            ("01", ""),
            ("01", "1"),
        ]

    def test_state_ancestry(self) -> None:
        """Test the prefixes of a state sequence."""
        chain = ancestry(MartingaleKind.STATE, StateSequence(("a", "b")))
        assert [x.states for x in chain] == [(), ("a",), ("a", "b")]

    def test_render_node(self) -> None:
        """Test report rendering."""
        assert render_node(EMPTY_SPEC) == "()"
        assert render_node(spec("a:0")) == "a:0"
        assert render_node(StateSequence(("a", "b"))) == "(a b)"
        assert render_node(("0", "")) == "('0', '')"


class TestTrajectoryFairness:
    """Test fairness of the named trajectory constructions."""

    def test_constant(self, forked: CtmcModel) -> None:
        """Test that a constant martingale has no residuals."""
        report = verify_trajectory_fairness(ConstantMartingale(3), forked, 6)
        assert report.passed
        assert report.nodes_checked > 10
        assert report.max_abs == 0

    def test_zeno_detector(self, forked: CtmcModel, absorbing: CtmcModel) -> None:
        """Test the double-or-nothing first-bit detector."""
        for start in (0, 1, 2):
            assert verify_trajectory_fairness(zeno_detector(forked, start), forked, 6).passed
        assert verify_trajectory_fairness(zeno_detector(absorbing), absorbing, 6).passed

    def test_cover_martingales(self, alternating: CtmcModel) -> None:
        """Test row martingales, savings and their sum."""
        cover = {
            1: [spec("a:0")],
            2: [spec("a:00"), spec("a:1/b:10")],
            3: [spec("a:0/b:11")],
        }
        for k in cover:
            d = cover_to_martingale(alternating, cover, k)
            assert verify_trajectory_fairness(d, alternating, 6).passed
            assert verify_trajectory_fairness(savings_martingale(d), alternating, 6).passed
        d = cover_sum_martingale(alternating, cover)
        assert verify_trajectory_fairness(d, alternating, 6).passed

    def test_lifted_state_bet(self, forked: CtmcModel) -> None:
        """Test a state strategy lifted to trajectories."""
        bet = StateBetMartingale(forked.embedded_chain(), forked.init, 1, "b")
        lifted = lift_state_martingale(bet, forked)
        assert verify_trajectory_fairness(lifted, forked, 6).passed

    def test_lifted_repeated_state(self, forked: CtmcModel) -> None:
        """Test that a spec repeating a state has capital 0 rather than an error."""
        bet = StateBetMartingale(forked.embedded_chain(), forked.init, 1, "b")
        lifted = lift_state_martingale(bet, forked)
        assert lifted(spec("a:/a:")) == 0
        assert lifted(spec("a:01/b:/b:1")) == 0
        assert lifted(spec("a:/b:")) == Fraction(3, 2)

    def test_sojourn_index(self, forked: CtmcModel, absorbing: CtmcModel) -> None:
        """Test a bit strategy confined to one sojourn."""
        for index in (0, 1, 2):
            d = sojourn_index_martingale(duration_first_bit_martingale(1), index, forked)
            assert d.initial_capital() == Fraction(1, 2**index)
            assert verify_trajectory_fairness(d, forked, 6).passed
        terminal = sojourn_index_martingale(duration_first_bit_martingale(1), 1, absorbing)
        assert verify_trajectory_fairness(terminal, absorbing, 6).passed

    def test_random_bets(self, forked: CtmcModel) -> None:
        """Test pseudo-random fair bet trees."""
        for seed in range(5):
            d = random_bet_martingale(forked, seed, 5)
            assert verify_trajectory_fairness(d, forked, 6).passed

    def test_random_bets_are_deterministic(self, forked: CtmcModel) -> None:
        """Test that capital is a pure function of seed and spec."""
        w = spec("a:01/b:1/a:")
        assert random_bet_martingale(forked, 7, 6)(w) == random_bet_martingale(forked, 7, 6)(w)

    def test_unfair_martingale(self, alternating: CtmcModel) -> None:
        """Test that residuals are reported for an unfair strategy."""
        d = FunctionMartingale(lambda w: 1 + w.total_bits, name="greedy")
        report = verify_trajectory_fairness(d, alternating, 4)
        assert not report.passed
        assert {r.condition for r in report.residuals} == {"B"}
        assert report.max_abs == Fraction(1, 1)

    def test_node_budget(self, alternating: CtmcModel) -> None:
        """Test the enumeration guard."""
        with pytest.raises(NodeBudgetExceeded):
            verify_trajectory_fairness(ConstantMartingale(), alternating, 12, node_budget=5)

    def test_kind_mismatch(self, alternating: CtmcModel) -> None:
        """Test rejection of a martingale of the wrong kind."""
        with pytest.raises(ValueError):
            verify_trajectory_fairness(duration_first_bit_martingale(1), alternating, 3)


class TestRandomizedFairness:
    """Test every named construction on the seeded suite of random models."""

    def test_constructions(self, random_models: List[CtmcModel]) -> None:
        """Test conditions (A) and (B) to size 3 on 1000 models."""
        for seed, model in enumerate(random_models):
            rng = np.random.default_rng(seed)
            chain = model.embedded_chain()
            target = model.states[int(rng.integers(0, len(model.states)))]
            index = int(rng.integers(0, 3))
            constructions = [
                ConstantMartingale(Fraction(int(rng.integers(1, 5)), 2)),
                zeno_detector(model),
                zeno_detector(model, 1),
                lift_state_martingale(
                    StateBetMartingale(chain, model.init, index, target),
                    model,
                ),
                sojourn_index_martingale(duration_first_bit_martingale(1), 0, model),
                sojourn_index_martingale(duration_first_bit_martingale(1), 1, model),
            ]
            detector = zeno_detector(model)
            cover = {k: martingale_to_prefix_set(model, detector, k, 4) for k in (1, 2)}
            # Cover rows on the first 250 models only
            if seed < 250 and all(cover.values()):
                for k in cover:
                    row = cover_to_martingale(model, cover, k)
                    constructions += [row, savings_martingale(row)]
                constructions.append(cover_sum_martingale(model, cover))
            for d in constructions:
                report = verify_trajectory_fairness(d, model, 3)
                assert report.passed, (seed, d)

    def test_state_bets(self, random_models: List[CtmcModel]) -> None:
        """Test state bets at every index and target over the jump chain."""
        for model in random_models[:250]:
            chain = model.embedded_chain()
            for index in range(3):
                for target in model.states:
                    d = StateBetMartingale(chain, model.init, index, target)
                    assert verify_state_fairness(d, chain, model.init, 4).passed

    def test_first_bit_durations(self) -> None:
        """Test first-bit strategies over random finite rate sequences."""
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            size = int(rng.integers(1, 4))
            rates = [
                Fraction(int(rng.integers(1, 9)), int(rng.integers(1, 4)))
                for _ in range(size)
            ]
            d = duration_first_bit_martingale(int(rng.integers(1, 4)))
            assert verify_duration_fairness(d, RateSequence(rates + [0]), 6).passed

    def test_prefix_set_round_trip(self, random_models: List[CtmcModel]) -> None:
        """Test prefix set -> null cover -> cover martingale on 100 bet trees."""
        policy = SojournDepthPolicy(1)
        for seed, model in enumerate(random_models[:100]):
            bets = random_bet_martingale(model, seed, 6)
            cached = functools.lru_cache(maxsize=None)(bets.capital)
            d = FunctionMartingale(cached, name=bets.name)
            assert d.initial_capital() == 1
            for k in range(1, 5):
                found = martingale_to_prefix_set(model, d, k, 7, policy)
                assert kraft_check(model, d, found, policy).holds
                assert verify_null_cover(model, {k: found}).passed
                assert sum(mu_traj(model, w) for w in found) <= Fraction(1, 2**k)
                if found:
                    cover = cover_to_martingale(model, {k: found}, k)
                    assert all(cover(w) >= 1 for w in found)


class TestStateAndDurationFairness:
    """Test the state and duration calculi."""

    def test_state_bet(self, forked: CtmcModel) -> None:
        """Test fairness of a state bet over the jump chain."""
        chain = forked.embedded_chain()
        for index, target in ((0, "a"), (1, "c"), (2, "b")):
            d = StateBetMartingale(chain, forked.init, index, target)
            assert verify_state_fairness(d, chain, forked.init, 5).passed

    def test_state_bet_payoff(self, forked: CtmcModel) -> None:
        """Test the 1/pi payoff."""
        d = StateBetMartingale(forked.embedded_chain(), forked.init, 1, "c")
        assert d(StateSequence(("a", "c"))) == 3
        assert d(StateSequence(("a", "b"))) == 0
        assert d(StateSequence(("b", "a"))) == 1

    def test_unfair_state_martingale(self, forked: CtmcModel) -> None:
        """Test residuals in the state calculus."""
        d = FunctionMartingale(lambda x: len(x), MartingaleKind.STATE)
        report = verify_state_fairness(d, forked.embedded_chain(), forked.init, 3)
        assert not report.passed
        assert report.residuals[0].condition == "state"

    def test_first_bit(self) -> None:
        """Test the first-bit duration strategy."""
        d = duration_first_bit_martingale(2)
        assert d(("0", "01", "1")) == 4
        assert d(("1",)) == 0
        assert verify_duration_fairness(d, UNIT_RATES, 6).passed

    def test_duration_no_bet(self) -> None:
        """Test that opening a component must not change capital."""
        d = FunctionMartingale(lambda w: len(w) + 1, MartingaleKind.DURATION)
        report = verify_duration_fairness(d, UNIT_RATES, 3)
        assert "no-bet" in {r.condition for r in report.residuals}

    def test_finite_rate_sequence(self) -> None:
        """Test that components stop at the end of a finite rate sequence."""
        d = duration_first_bit_martingale(3)
        report = verify_duration_fairness(d, RateSequence([1, 0]), 8)
        assert report.passed
        assert report.nodes_checked > 0


class TestCombinators:
    """Test cover, savings and sum martingales."""

    def test_cover_stages(self, alternating: CtmcModel) -> None:
        """Test lower approximation by enumerated entries."""
        d = CoverMartingale(alternating, [spec("a:00"), spec("a:11")], 1)
        assert d.capital_at_stage(EMPTY_SPEC, 0) == Fraction(1, 4)
        assert d.capital_at_stage(EMPTY_SPEC, 1) == Fraction(1, 2)
        assert d.capital(EMPTY_SPEC) == Fraction(1, 2)
        assert d(spec("a:00")) == 1

    def test_cover_at_null_spec(self, alternating: CtmcModel) -> None:
        """Test rejection of a null spec."""
        d = CoverMartingale(alternating, [spec("a:0")])
        with pytest.raises(ValueError):
            d(spec("b:"))

    def test_missing_cover_row(self, alternating: CtmcModel) -> None:
        """Test rejection of an absent level."""
        with pytest.raises(ValueError):
            cover_to_martingale(alternating, {1: []}, 2)

    def test_savings(self, alternating: CtmcModel) -> None:
        """Test that capital freezes once the threshold is reached."""
        d = SavingsMartingale(zeno_detector(alternating), threshold=4)
        assert d(spec("a:0/b:0/a:1")) == 4
        assert zeno_detector(alternating)(spec("a:0/b:0/a:1")) == 0
        assert d(spec("a:0/b:1")) == 0

    def test_sum(self, alternating: CtmcModel) -> None:
        """Test weighted sums."""
        d = sum_martingales([zeno_detector(alternating), (ConstantMartingale(1), 2)])
        assert d.initial_capital() == 3
        assert d(spec("a:0")) == 4
        with pytest.raises(ValueError):
            sum_martingales([ConstantMartingale(), duration_first_bit_martingale(1)])


class TestPrefixSets:
    """Test martingale_to_prefix_set and kraft_check."""

    def test_policy(self, forked: CtmcModel) -> None:
        """Test the sojourn-depth refinement policy."""
        policy = SojournDepthPolicy(1)
        assert policy.split(forked, EMPTY_SPEC) is Split.STATE
        assert policy.split(forked, spec("a:")) is Split.BIT
        assert policy.split(forked, spec("a:0")) is Split.STATE
        assert policy.split(forked, spec("a:0/c:")) is None
        assert policy.contains(forked, spec("a:1/b:0"))
        assert not policy.contains(forked, spec("a:/b:0"))

    def test_zeno_prefix_set(self, alternating: CtmcModel) -> None:
        """Test the success set of the zeno detector."""
        d = zeno_detector(alternating)
        found = martingale_to_prefix_set(alternating, d, 2, 6)
        assert found == [spec("a:0/b:0")]
        report = kraft_check(alternating, d, found, SojournDepthPolicy())
        assert report.holds
        assert report.total == 1 and report.margin == 0

    @pytest.mark.parametrize("seed", range(6))
    def test_round_trip(self, forked: CtmcModel, seed: int) -> None:
        """Test prefix set -> null cover -> cover martingale."""
        d = random_bet_martingale(forked, seed, 6)
        policy = SojournDepthPolicy(1)
        for k in range(1, 4):
            found = martingale_to_prefix_set(forked, d, k, 7, policy)
            assert kraft_check(forked, d, found, policy).holds
            assert verify_null_cover(forked, {k: found}).passed
            assert sum(mu_traj(forked, w) for w in found) <= Fraction(1, 2**k)
            if found:
                cover = cover_to_martingale(forked, {k: found}, k)
                assert all(cover(w) >= 1 for w in found)

    def test_overlap_rejected(self, alternating: CtmcModel) -> None:
        """Test that overlapping specs are not a prefix set."""
        with pytest.raises(NotAnAntichain):
            kraft_check(alternating, ConstantMartingale(), [spec("a:0"), spec("a:01")])

    def test_mixed_routes(self, alternating: CtmcModel) -> None:
        """Test a fair martingale whose disjoint set mixes refinement routes."""
        d = FunctionMartingale(route_dependent, name="route-dependent")
        assert verify_trajectory_fairness(d, alternating, 7).passed
        mixed = [spec("a:0/b:1"), spec("a:/b:0")]
        report = kraft_check(alternating, d, mixed)
        assert report.total == 2
        assert not report.holds
        with pytest.raises(NotAnAntichain):
            kraft_check(alternating, d, mixed, SojournDepthPolicy())


class TestRunMartingale:
    """Test run_martingale and CapitalTrace."""

    def test_zeno_trace(self, alternating: CtmcModel) -> None:
        """Test capital along the ancestry of a spec."""
        trace = run_martingale(zeno_detector(alternating), spec("a:0/b:0/a:0"))
        assert trace.capitals == [1, 1, 2, 2, 4, 4, 8]
        assert trace.final == 8 and trace.peak == 8
        assert trace.crossings() == [(0, 0), (1, 2), (2, 4), (3, 6)]
        assert trace.largest_threshold == 3
        assert trace.success_at(7)
        assert not trace.success_at(8)
        assert trace.unitary

    def test_schedule(self, alternating: CtmcModel) -> None:
        """Test an explicit refinement chain."""
        d = zeno_detector(alternating)
        target = spec("a:0/b:1")
        trace = run_martingale(d, target, [EMPTY_SPEC, spec("a:0"), target])
        assert trace.capitals == [1, 2, 0]
        with pytest.raises(NotAChain):
            run_martingale(d, target, [spec("a:0"), EMPTY_SPEC])
        with pytest.raises(NotAChain):
            run_martingale(d, target, [EMPTY_SPEC, spec("a:1")])

    def test_other_kinds(self, forked: CtmcModel) -> None:
        """Test traces of state and duration strategies."""
        bet = StateBetMartingale(forked.embedded_chain(), forked.init, 1, "c")
        trace = run_martingale(bet, StateSequence(("a", "c")))
        assert trace.capitals == [1, 1, 3]
        duration = run_martingale(duration_first_bit_martingale(2), ("0", "0"))
        assert duration.capitals == [1, 1, 2, 2, 4]
