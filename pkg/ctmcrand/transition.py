"""Boolean and probabilistic transition systems over countable state spaces.

States are canonical strings. Systems are given intensionally by a successor
rule, so only the finitely many states an operation touches are ever built.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

logger = logging.getLogger(__name__)

StateId = str
Weight = Union[int, str, Fraction]
Counts = Mapping[str, int]


def render_counts(counts: Counts) -> StateId:
    """Canonical rendering of a species vector: sorted ``name:count`` pairs."""
    return ",".join(f"{name}:{counts[name]}" for name in sorted(counts))


def parse_counts(state: StateId) -> Dict[str, int]:
    """Inverse of :func:`render_counts`."""
    counts: Dict[str, int] = {}
    if not state:
        return counts
    for pair in state.split(","):
        name, sep, count = pair.partition(":")
        if not sep or not name or not count.isdigit():
            raise ValueError(f"not a species vector: {state!r}")
        counts[name] = int(count)
    return counts


def net_effect(reactants: Counts, products: Counts) -> Dict[str, int]:
    """``p(Y) - r(Y)`` for every species mentioned by the reaction."""
    names = set(reactants) | set(products)
    return {name: products.get(name, 0) - reactants.get(name, 0) for name in sorted(names)}


def apply_reaction(state: Counts, reactants: Counts, products: Counts) -> Optional[Dict[str, int]]:
    """The state after firing the reaction, or ``None`` if it cannot occur."""
    if any(state.get(name, 0) < count for name, count in reactants.items()):
        return None
    after = dict(state)
    for name, delta in net_effect(reactants, products).items():
        after[name] = after.get(name, 0) + delta
    return after


class BooleanTransitionSystem:
    """A Boolean system ``(Q, delta)`` given by a successor rule."""

    def __init__(
        self,
        successors: Callable[[StateId], Iterable[StateId]],
        terminal: Optional[Callable[[StateId], bool]] = None,
    ) -> None:
        """Initialize Boolean transition system."""
        self._successors = successors
        self._terminal = terminal

    def successors(self, state: StateId) -> List[StateId]:
        """The states ``r`` with ``delta(state, r) = 1``, sorted."""
        found = sorted(set(self._successors(state)))
        if state in found:
            raise ValueError(f"self loop at state {state!r}")
        return found

    def delta(self, state: StateId, other: StateId) -> bool:
        return other in self.successors(state)

    def is_terminal(self, state: StateId) -> bool:
        terminal = not self.successors(state)
        if self._terminal is not None and self._terminal(state) != terminal:
            raise ValueError(f"terminal predicate disagrees with successors at {state!r}")
        return terminal


class ProbabilisticTransitionSystem:
    """A system ``(Q, pi)`` with exact rational transition weights.

    ``weights`` maps a state to its row ``{r: pi(q, r)}`` holding only positive
    entries. Rows are validated and cached the first time they are read. A
    finite universe may be supplied as ``states`` for exhaustive enumeration.
    """

    def __init__(
        self,
        weights: Callable[[StateId], Mapping[StateId, Weight]],
        states: Optional[Sequence[StateId]] = None,
    ) -> None:
        """Initialize probabilistic transition system."""
        self._weights = weights
        self.states: Optional[Tuple[StateId, ...]] = (
            tuple(sorted(states)) if states is not None else None
        )
        self._row = lru_cache(maxsize=None)(self._load_row)

    @classmethod
    def from_table(
        cls, rows: Mapping[StateId, Mapping[StateId, Weight]]
    ) -> "ProbabilisticTransitionSystem":
        """A finite system from an explicit table; unlisted states are terminal."""
        table = {q: dict(row) for q, row in rows.items()}
        universe = set(table)
        for row in table.values():
            universe.update(row)
        return cls(lambda q: table.get(q, {}), states=sorted(universe))

    def _load_row(self, state: StateId) -> Tuple[Tuple[StateId, Fraction], ...]:
        row = {r: Fraction(w) for r, w in self._weights(state).items() if Fraction(w) != 0}
        if state in row:
            raise ValueError(f"self loop at state {state!r}")
        if any(w < 0 for w in row.values()):
            raise ValueError(f"negative transition weight out of {state!r}")
        if row and sum(row.values()) != 1:
            raise ValueError(
                f"row of {state!r} sums to {sum(row.values())}, not 1"
            )
        return tuple(sorted(row.items()))

    def successors(self, state: StateId) -> List[Tuple[StateId, Fraction]]:
        """The ``(r, pi(state, r))`` with positive weight; empty for terminal states."""
        return list(self._row(state))

    def pi(self, state: StateId, other: StateId) -> Fraction:
        return dict(self._row(state)).get(other, Fraction(0))

    def is_terminal(self, state: StateId) -> bool:
        return not self._row(state)


class Initialization:
    """A finitely supported initial distribution ``sigma``."""

    def __init__(self, weights: Mapping[StateId, Weight]) -> None:
        """Initialize distribution."""
        support = {q: Fraction(w) for q, w in weights.items()}
        if not support:
            raise ValueError("an initialization has nonempty support")
        if any(w <= 0 for w in support.values()):
            raise ValueError("initial weights are positive")
        if sum(support.values()) != 1:
            raise ValueError(f"initial weights sum to {sum(support.values())}, not 1")
        self.support: Tuple[Tuple[StateId, Fraction], ...] = tuple(sorted(support.items()))

    @classmethod
    def point(cls, state: StateId) -> "Initialization":
        return cls({state: 1})

    @property
    def states(self) -> List[StateId]:
        return [q for q, _ in self.support]

    def weight(self, state: StateId) -> Fraction:
        return dict(self.support).get(state, Fraction(0))

    def __repr__(self) -> str:
        body = ", ".join(f"{q!r}: {w}" for q, w in self.support)
        return f"Initialization({{{body}}})"


@dataclass(frozen=True)
class StateSequence:
    """A finite state sequence, or the stored prefix of an infinite one."""

    states: Tuple[StateId, ...] = ()
    infinite: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "states", tuple(self.states))
        for a, b in zip(self.states, self.states[1:]):
            if a == b:
                raise ValueError(f"adjacent states must differ, got {a!r} twice")

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, index: int) -> StateId:
        return self.states[index]

    def prefix(self, length: int) -> "StateSequence":
        return StateSequence(self.states[:length])

    def extend(self, state: StateId) -> "StateSequence":
        return StateSequence(self.states + (state,))


def is_admissible(
    sys: BooleanTransitionSystem, init: Initialization, x: StateSequence
) -> bool:
    """``sigma_B(x_0) = 1`` and every consecutive pair is a transition."""
    if not len(x):
        return True
    if init.weight(x[0]) == 0:
        return False
    return all(sys.delta(a, b) for a, b in zip(x.states, x.states[1:]))


def is_maximal(sys: BooleanTransitionSystem, init: Initialization, x: StateSequence) -> bool:
    """True iff the admissible sequence ``x`` cannot be extended."""
    if not is_admissible(sys, init, x):
        raise ValueError(f"sequence {x.states} is not admissible")
    if not len(x):
        return False
    return sys.is_terminal(x[-1])


def ultrametric_distance(x: StateSequence, y: StateSequence) -> Fraction:
    """``2^-|lcp(x, y)|``, and 0 for equal sequences."""
    if x.states == y.states:
        return Fraction(0)
    common = 0
    for a, b in zip(x.states, y.states):
        if a != b:
            break
        common += 1
    return Fraction(1, 2**common)


def induced_boolean(sys: ProbabilisticTransitionSystem) -> BooleanTransitionSystem:
    """``delta(q, r) = sgn(pi(q, r))``, with terminals cross-checked against ``sys``."""
    return BooleanTransitionSystem(
        lambda q: [r for r, _ in sys.successors(q)], terminal=sys.is_terminal
    )


def mu_state(
    sys: ProbabilisticTransitionSystem, init: Initialization, x: StateSequence
) -> Fraction:
    """``sigma(x_0) * prod pi(x_i, x_{i+1})``; the empty sequence has measure 1."""
    if not len(x):
        return Fraction(1)
    measure = init.weight(x[0])
    for a, b in zip(x.states, x.states[1:]):
        if not measure:
            break
        measure *= sys.pi(a, b)
    return measure


def successors(
    sys: ProbabilisticTransitionSystem, state: StateId
) -> List[Tuple[StateId, Fraction]]:
    """The weighted successors of ``state``; empty exactly when it is terminal."""
    return sys.successors(state)


def ratefree_crn_to_boolean(
    species: Sequence[str], reactions: Sequence[Tuple[Counts, Counts]]
) -> BooleanTransitionSystem:
    """The Boolean system of a rate-free CRN over species vectors.

    ``delta(q, q')`` holds iff some reaction ``(r, p)`` has ``q >= r`` pointwise
    and ``q' = q + (p - r)``.
    """
    names = list(species)
    for reactants, products in reactions:
        unknown = (set(reactants) | set(products)) - set(names)
        if unknown:
            raise ValueError(f"reaction mentions unknown species {sorted(unknown)}")
        if not any(net_effect(reactants, products).values()):
            raise ValueError("a reaction must change the state (r != p)")

    def step(state: StateId) -> List[StateId]:
        counts = {name: 0 for name in names}
        counts.update(parse_counts(state))
        found = []
        for reactants, products in reactions:
            after = apply_reaction(counts, reactants, products)
            if after is not None:
                found.append(render_counts(after))
        return found

    return BooleanTransitionSystem(step)
