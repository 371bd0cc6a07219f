"""Tests for Boolean and probabilistic transition systems."""

from fractions import Fraction

import pytest

from ctmcrand.transition import (
    BooleanTransitionSystem,
    Initialization,
    ProbabilisticTransitionSystem,
    StateSequence,
    apply_reaction,
    induced_boolean,
    is_admissible,
    is_maximal,
    mu_state,
    net_effect,
    parse_counts,
    ratefree_crn_to_boolean,
    render_counts,
    successors,
    ultrametric_distance,
)


def chain(*pairs: str) -> BooleanTransitionSystem:
    """A Boolean system from ``"ab"``-style edges."""
    edges = {}
    for a, b in pairs:
        edges.setdefault(a, []).append(b)
    return BooleanTransitionSystem(lambda q: edges.get(q, []))


@pytest.fixture
def branching() -> ProbabilisticTransitionSystem:
    return ProbabilisticTransitionSystem.from_table(
        {"a": {"b": Fraction(1, 3), "c": Fraction(2, 3)}, "b": {"a": 1}}
    )


class TestCounts:
    """Test species-vector state names."""

    def test_render_and_parse(self) -> None:
        """Test the canonical rendering of species vectors."""
        state = render_counts({"Y": 2, "X": 0, "Z": 1})
        assert state == "X:0,Y:2,Z:1"
        assert parse_counts(state) == {"X": 0, "Y": 2, "Z": 1}
        assert parse_counts("") == {}

    def test_parse_rejects_garbage(self) -> None:
        """Test rejection of malformed vectors."""
        with pytest.raises(ValueError):
            parse_counts("X=1")

    def test_net_effect(self) -> None:
        """Test net effect of X + Z -> 2Y + Z."""
        assert net_effect({"X": 1, "Z": 1}, {"Y": 2, "Z": 1}) == {"X": -1, "Y": 2, "Z": 0}

    def test_apply_reaction(self) -> None:
        """Test firing a reaction when it is enabled."""
        assert apply_reaction({"X": 1, "Y": 0}, {"X": 1}, {"Y": 2}) == {"X": 0, "Y": 2}
        assert apply_reaction({"X": 0, "Y": 5}, {"X": 1}, {"Y": 2}) is None


class TestBooleanSystem:
    """Test BooleanTransitionSystem and sequence predicates."""

    def test_successors_sorted(self) -> None:
        """Test that successors are sorted and deduplicated."""
        sys = BooleanTransitionSystem(lambda q: ["c", "b", "c"] if q == "a" else [])
        assert sys.successors("a") == ["b", "c"]
        assert sys.delta("a", "b")
        assert not sys.delta("b", "a")

    def test_self_loop_rejected(self) -> None:
        """Test rejection of a self loop."""
        sys = BooleanTransitionSystem(lambda q: [q])
        with pytest.raises(ValueError):
            sys.successors("a")

    def test_terminal_predicate_must_agree(self) -> None:
        """Test that a supplied terminal predicate is checked."""
        sys = BooleanTransitionSystem(lambda q: ["b"] if q == "a" else [], lambda q: True)
        assert sys.is_terminal("b")
        with pytest.raises(ValueError):
            sys.is_terminal("a")

    def test_is_admissible(self) -> None:
        """Test admissibility from an initialization."""
        sys = chain("ab")
        init = Initialization.point("a")
        assert is_admissible(sys, init, StateSequence())
        assert is_admissible(sys, init, StateSequence(("a", "b")))
        assert not is_admissible(sys, init, StateSequence(("b", "a")))

    def test_is_maximal(self) -> None:
        """Test maximality of admissible sequences."""
        init = Initialization.point("a")
        assert is_maximal(chain("ab"), init, StateSequence(("a", "b")))
        assert not is_maximal(chain("ab", "ba"), init, StateSequence(("a", "b")))
        assert not is_maximal(chain("ab"), init, StateSequence(("a",)))
        assert not is_maximal(chain("ab"), init, StateSequence())

    def test_is_maximal_requires_admissible(self) -> None:
        """Test rejection of a non-admissible sequence."""
        with pytest.raises(ValueError):
            is_maximal(chain("ab"), Initialization.point("a"), StateSequence(("b",)))


class TestStateSequence:
    """Test StateSequence and the ultrametric."""

    def test_adjacent_states_differ(self) -> None:
        """Test rejection of a repeated adjacent state."""
        with pytest.raises(ValueError):
            StateSequence(("a", "a"))

    def test_prefix_and_extend(self) -> None:
        """Test prefixes and one-step extensions."""
        x = StateSequence(("a", "b", "c"))
        assert x.prefix(2) == StateSequence(("a", "b"))
        assert x.prefix(2).extend("c") == x

    def test_ultrametric_distance(self) -> None:
        """Test 2^-|lcp|."""
        ab = StateSequence(("a", "b"))
        assert ultrametric_distance(ab, StateSequence(("a", "b"))) == 0
        assert ultrametric_distance(
            StateSequence(("a", "b", "c")), StateSequence(("a", "b", "d"))
        ) == Fraction(1, 4)
        assert ultrametric_distance(StateSequence(("a",)), StateSequence(("b",))) == 1


class TestProbabilisticSystem:
    """Test ProbabilisticTransitionSystem and mu_state."""

    def test_successors(self, branching: ProbabilisticTransitionSystem) -> None:
        """Test reading rows."""
        assert successors(branching, "a") == [("b", Fraction(1, 3)), ("c", Fraction(2, 3))]
        assert successors(branching, "c") == []
        assert branching.is_terminal("c")
        assert sum(w for _, w in branching.successors("a")) == 1
        assert branching.states == ("a", "b", "c")

    def test_invalid_rows(self) -> None:
        """Test rejection of rows that are not stochastic."""
        bad_sum = ProbabilisticTransitionSystem(lambda q: {"b": Fraction(1, 2)})
        with pytest.raises(ValueError):
            bad_sum.successors("a")
        loop = ProbabilisticTransitionSystem(lambda q: {q: 1})
        with pytest.raises(ValueError):
            loop.successors("a")
        negative = ProbabilisticTransitionSystem(lambda q: {"b": 2, "c": -1})
        with pytest.raises(ValueError):
            negative.successors("a")

    def test_mu_state(self, branching: ProbabilisticTransitionSystem) -> None:
        """Test the measure of state cylinders."""
        init = Initialization.point("a")
        assert mu_state(branching, init, StateSequence()) == 1
        assert mu_state(branching, init, StateSequence(("a", "b"))) == Fraction(1, 3)
        assert mu_state(branching, init, StateSequence(("a", "b", "a"))) == Fraction(1, 3)
        assert mu_state(branching, init, StateSequence(("b", "a"))) == 0

    def test_mu_state_additivity(self, branching: ProbabilisticTransitionSystem) -> None:
        """Test mu(x) = sum of mu over one-step extensions at nonterminal ends."""
        init = Initialization({"a": Fraction(1, 4), "b": Fraction(3, 4)})
        for x in (StateSequence(("a",)), StateSequence(("b", "a")), StateSequence(("a", "b"))):
            children = [x.extend(r) for r, _ in branching.successors(x[-1])]
            assert mu_state(branching, init, x) == sum(
                mu_state(branching, init, y) for y in children
            )

    def test_induced_boolean(self, branching: ProbabilisticTransitionSystem) -> None:
        """Test delta = sgn(pi)."""
        sys = induced_boolean(branching)
        assert sys.delta("a", "b") and sys.delta("a", "c")
        assert not sys.delta("a", "a")
        assert sys.is_terminal("c")

    def test_induced_terminals(self, branching: ProbabilisticTransitionSystem) -> None:
        """Test that the induced system keeps the source's terminal states."""
        sys = induced_boolean(branching)
        for q in branching.states:
            assert sys.is_terminal(q) == branching.is_terminal(q)
            assert bool(successors(branching, q)) != branching.is_terminal(q)
        assert successors(branching, "c") == []
        disagreeing = BooleanTransitionSystem(lambda q: [], terminal=lambda q: False)
        with pytest.raises(ValueError):
            disagreeing.is_terminal("a")


class TestInitialization:
    """Test Initialization."""

    def test_point(self) -> None:
        """Test point distributions."""
        init = Initialization.point("q")
        assert init.states == ["q"]
        assert init.weight("q") == 1
        assert init.weight("r") == 0

    def test_invalid(self) -> None:
        """Test rejection of empty, nonpositive and non-normalized weights."""
        with pytest.raises(ValueError):
            Initialization({})
        with pytest.raises(ValueError):
            Initialization({"a": 1, "b": 0})
        with pytest.raises(ValueError):
            Initialization({"a": Fraction(1, 2)})


class TestRatefreeCrn:
    """Test ratefree_crn_to_boolean."""

    def test_example_reaction(self) -> None:
        """Test X + Z -> 2Y + Z."""
        sys = ratefree_crn_to_boolean(["X", "Y", "Z"], [({"X": 1, "Z": 1}, {"Y": 2, "Z": 1})])
        assert sys.successors("X:1,Y:0,Z:1") == ["X:0,Y:2,Z:1"]
        assert sys.successors("X:0,Y:5,Z:1") == []

    def test_rejects_null_reaction(self) -> None:
        """Test rejection of a reaction with equal sides."""
        with pytest.raises(ValueError):
            ratefree_crn_to_boolean(["X"], [({"X": 1}, {"X": 1})])

    def test_rejects_unknown_species(self) -> None:
        """Test rejection of undeclared species."""
        with pytest.raises(ValueError):
            ratefree_crn_to_boolean(["X"], [({"X": 1}, {"W": 1})])
