"""Martingales over state sequences, duration tuples and trajectory specs.

A martingale is a capital function on specifications. Its kind fixes which
specifications it reads and which fairness equations it must satisfy:

- ``STATE``: state sequences; ``d(x) mu(x) = sum_y d(y) mu(y)`` over one-step
  extensions.
- ``DURATION``: tuples of bit strings; the last string is averaged over its two
  one-bit refinements, and opening a new empty component is not a bet.
- ``TRAJECTORY``: trajectory specs; condition (A) splits on the next state and
  condition (B) on the next bit of the current sojourn.
"""

import enum
import hashlib
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ctmcrand.config import DEFAULT_NODE_BUDGET
from ctmcrand.ctmc import (
    EMPTY_SPEC,
    CtmcModel,
    SpecRelation,
    TrajectorySpec,
    meet,
    mu_traj,
    next_states,
    spec_compare,
)
from ctmcrand.sojourn import RateSequence
from ctmcrand.transition import (
    Initialization,
    ProbabilisticTransitionSystem,
    StateId,
    StateSequence,
    mu_state,
)

logger = logging.getLogger(__name__)

DurationTuple = Tuple[str, ...]
Node = Union[TrajectorySpec, StateSequence, DurationTuple]


class NodeBudgetExceeded(RuntimeError):
    """An enumeration visited more nodes than its budget allows."""


class NotAChain(ValueError):
    """A betting schedule is not increasing under refinement."""


class NotAnAntichain(ValueError):
    """A prefix set contains two overlapping specifications."""


class MartingaleKind(enum.Enum):
    STATE = "state"
    DURATION = "duration"
    TRAJECTORY = "trajectory"


def empty_node(kind: MartingaleKind) -> Node:
    """The root specification of a kind."""
    if kind is MartingaleKind.STATE:
        return StateSequence()
    if kind is MartingaleKind.DURATION:
        return ()
    return EMPTY_SPEC


def _duration_parent(node: DurationTuple) -> Optional[DurationTuple]:
    if not node:
        return None
    if node[-1]:
        return node[:-1] + (node[-1][:-1],)
    return node[:-1]


def ancestry(kind: MartingaleKind, node: Node) -> List[Node]:
    """The chain of specifications from the root to ``node``, inclusive."""
    if kind is MartingaleKind.TRAJECTORY:
        assert isinstance(node, TrajectorySpec)
        return list(node.ancestry())
    if kind is MartingaleKind.STATE:
        assert isinstance(node, StateSequence)
        return [node.prefix(i) for i in range(len(node) + 1)]
    chain: List[Node] = []
    current: Optional[DurationTuple] = tuple(node)  # type: ignore[arg-type]
    while current is not None:
        chain.append(current)
        current = _duration_parent(current)
    return chain[::-1]


def render_node(node: Node) -> str:
    """Text form of a specification of any kind, used in reports."""
    if isinstance(node, TrajectorySpec):
        return node.render() or "()"
    if isinstance(node, StateSequence):
        return "(" + " ".join(node.states) + ")"
    return "(" + ", ".join(repr(w) for w in node) + ")"


class Martingale(ABC):
    """A betting strategy: a nonnegative capital function on specifications."""

    kind: MartingaleKind = MartingaleKind.TRAJECTORY
    name: str = "martingale"

    @abstractmethod
    def capital(self, node: Any) -> Fraction:
        """Capital ``d(node)``."""

    def initial_capital(self) -> Fraction:
        return self.capital(empty_node(self.kind))

    def capital_at_stage(self, node: Any, stage: int) -> Fraction:
        """Approximation of ``d(node)`` from below at patience ``stage``.

        Values are nondecreasing in ``stage`` and reach ``d(node)``. Exact
        constructions are final at every stage.
        """
        return self.capital(node)

    def __call__(self, node: Any) -> Fraction:
        return self.capital(node)

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name} ({self.kind.value})>"


class ConstantMartingale(Martingale):
    """``d = c`` everywhere; fair under every calculus."""

    def __init__(self, value: Any = 1, kind: MartingaleKind = MartingaleKind.TRAJECTORY) -> None:
        """Initialize constant martingale."""
        self.value = Fraction(value)
        if self.value < 0:
            raise ValueError("capital is nonnegative")
        self.kind = kind
        self.name = f"constant:{self.value}"

    def capital(self, node: Any) -> Fraction:
        return self.value


class FunctionMartingale(Martingale):
    """A martingale given by an arbitrary capital function."""

    def __init__(
        self,
        function: Callable[[Any], Any],
        kind: MartingaleKind = MartingaleKind.TRAJECTORY,
        name: str = "function",
    ) -> None:
        """Initialize function martingale."""
        self.function = function
        self.kind = kind
        self.name = name

    def capital(self, node: Any) -> Fraction:
        return Fraction(self.function(node))


@dataclass
class Residual:
    node: str
    condition: str
    value: Fraction


@dataclass
class FairnessReport:
    """Outcome of checking a martingale's fairness equations over a finite tree."""

    kind: MartingaleKind
    depth: int
    nodes_checked: int = 0
    conditions_checked: int = 0
    residuals: List[Residual] = field(default_factory=list)
    exact: bool = True

    def check(self, node: Node, condition: str, value: Fraction) -> None:
        """Record ``value`` (left side minus right side) of one equation."""
        self.conditions_checked += 1
        if value != 0:
            self.residuals.append(Residual(render_node(node), condition, value))

    @property
    def max_abs(self) -> Fraction:
        return max((abs(r.value) for r in self.residuals), default=Fraction(0))

    @property
    def passed(self) -> bool:
        return not self.residuals


class _Budget:
    def __init__(self, limit: int) -> None:
        self.limit = limit
        self.used = 0

    def spend(self) -> None:
        self.used += 1
        if self.used > self.limit:
            raise NodeBudgetExceeded(f"enumeration exceeded {self.limit} nodes")


def _require_kind(d: Martingale, kind: MartingaleKind) -> None:
    if d.kind is not kind:
        raise ValueError(f"{d!r} is a {d.kind.value} martingale, expected {kind.value}")


def _visit(report: FairnessReport, node: Node, capital: Fraction) -> None:
    report.nodes_checked += 1
    if capital < 0:
        report.check(node, "nonnegative", capital)


def verify_state_fairness(
    d: Martingale,
    sys: ProbabilisticTransitionSystem,
    init: Initialization,
    depth: int,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> FairnessReport:
    """Check ``d(x) mu(x) = sum_y d(y) mu(y)`` at admissible ``x`` with ``|x| <= depth``."""
    _require_kind(d, MartingaleKind.STATE)
    report = FairnessReport(MartingaleKind.STATE, depth)
    budget = _Budget(node_budget)
    stack = [StateSequence()]
    while stack:
        x = stack.pop()
        budget.spend()
        capital = d.capital(x)
        _visit(report, x, capital)
        if not len(x):
            options = init.states
        elif sys.is_terminal(x[-1]):
            continue
        else:
            options = [r for r, _ in sys.successors(x[-1])]
        children = [x.extend(q) for q in options]
        weighted = sum(
            (d.capital(y) * mu_state(sys, init, y) for y in children), Fraction(0)
        )
        report.check(x, "state", capital * mu_state(sys, init, x) - weighted)
        if len(x) < depth:
            stack.extend(reversed(children))
    logger.debug("state fairness of %r: %d nodes", d, report.nodes_checked)
    return report


def verify_duration_fairness(
    d: Martingale,
    rates: RateSequence,
    depth: int,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> FairnessReport:
    """Check the averaging and no-bet conditions over tuples of size ``<= depth``.

    The size of a tuple is its number of components plus its number of bits.
    """
    _require_kind(d, MartingaleKind.DURATION)
    report = FairnessReport(MartingaleKind.DURATION, depth)
    budget = _Budget(node_budget)
    stack: List[DurationTuple] = [()]
    while stack:
        w = stack.pop()
        budget.spend()
        capital = d.capital(w)
        _visit(report, w, capital)
        children: List[DurationTuple] = []
        if w:
            bit_children = [w[:-1] + (w[-1] + b,) for b in "01"]
            average = (d.capital(bit_children[0]) + d.capital(bit_children[1])) / 2
            report.check(w, "average", capital - average)
            children.extend(bit_children)
        if rates.admits(len(w) + 1):
            opened = w + ("",)
            report.check(w, "no-bet", capital - d.capital(opened))
            children.append(opened)
        if len(w) + sum(len(u) for u in w) < depth:
            stack.extend(reversed(children))
    logger.debug("duration fairness of %r: %d nodes", d, report.nodes_checked)
    return report


def _state_children(model: CtmcModel, w: TrajectorySpec) -> List[TrajectorySpec]:
    return [w.extend(q) for q, _ in next_states(model, w)]


def _bit_children(w: TrajectorySpec) -> List[TrajectorySpec]:
    return [w.refine(b) for b in "01"] if len(w) else []


def _weighted_sum(d: Martingale, model: CtmcModel, children: Sequence[TrajectorySpec]) -> Fraction:
    total = Fraction(0)
    for child in children:
        measure = mu_traj(model, child)
        if measure:
            total += d.capital(child) * measure
    return total


def verify_trajectory_fairness(
    d: Martingale,
    model: CtmcModel,
    depth: int,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> FairnessReport:
    """Check conditions (A) and (B) at every positive-measure spec of size ``<= depth``.

    (A) is checked where a next state can follow: at the empty spec and at specs
    whose last state is nonterminal. (B) is checked at every nonempty spec.
    Children of measure 0 are never evaluated.
    """
    _require_kind(d, MartingaleKind.TRAJECTORY)
    report = FairnessReport(MartingaleKind.TRAJECTORY, depth)
    budget = _Budget(node_budget)
    stack = [EMPTY_SPEC]
    while stack:
        w = stack.pop()
        budget.spend()
        measure = mu_traj(model, w)
        capital = d.capital(w)
        _visit(report, w, capital)
        state_children = _state_children(model, w)
        bit_children = _bit_children(w)
        if not len(w) or not model.is_terminal(w[-1][0]):
            report.check(w, "A", capital * measure - _weighted_sum(d, model, state_children))
        if len(w):
            report.check(w, "B", capital * measure - _weighted_sum(d, model, bit_children))
        if w.size < depth:
            children = state_children + bit_children
            stack.extend(c for c in reversed(children) if mu_traj(model, c) > 0)
    logger.debug("trajectory fairness of %r: %d nodes", d, report.nodes_checked)
    return report


class CoverMartingale(Martingale):
    """``d_k(w) = sum_n mu(g(k, n) ∧ w) / mu(w)`` over one stored cover row.

    Stage ``s`` sums the first ``s + 1`` entries of the row.
    """

    def __init__(
        self, model: CtmcModel, row: Sequence[TrajectorySpec], k: Optional[int] = None
    ) -> None:
        """Initialize cover martingale."""
        self.model = model
        self.row = tuple(row)
        self.k = k
        self.name = f"cover:k={k}" if k is not None else "cover"

    def capital_at_stage(self, node: Any, stage: int) -> Fraction:
        measure = mu_traj(self.model, node)
        if measure == 0:
            raise ValueError(f"cover martingale evaluated at null spec {render_node(node)}")
        entries = self.row[: max(stage + 1, 0)]
        return sum((mu_traj(self.model, meet(g, node)) for g in entries), Fraction(0)) / measure

    def capital(self, node: Any) -> Fraction:
        return self.capital_at_stage(node, len(self.row))


def cover_to_martingale(
    model: CtmcModel, cover: Any, k: int
) -> CoverMartingale:
    """The martingale ``d_k`` of row ``k`` of a null cover."""
    if k not in cover:
        raise ValueError(f"cover has no stored row {k}")
    return CoverMartingale(model, cover[k], k)


class SavingsMartingale(Martingale):
    """Follows ``d`` until capital first reaches ``threshold``, then freezes."""

    def __init__(self, d: Martingale, threshold: Any = 1) -> None:
        """Initialize savings martingale."""
        self.d = d
        self.threshold = Fraction(threshold)
        self.kind = d.kind
        self.name = f"savings({d.name})"

    def capital(self, node: Any) -> Fraction:
        capital = Fraction(0)
        for ancestor in ancestry(self.kind, node):
            capital = self.d.capital(ancestor)
            if capital >= self.threshold:
                break
        return capital


def savings_martingale(d: Martingale) -> SavingsMartingale:
    return SavingsMartingale(d)


class SumMartingale(Martingale):
    """A weighted finite sum of martingales of one kind.

    ``truncation`` records the last index kept when the sum stands in for a
    countable one.
    """

    def __init__(
        self,
        terms: Sequence[Tuple[Martingale, Any]],
        truncation: Optional[int] = None,
    ) -> None:
        """Initialize sum martingale."""
        if not terms:
            raise ValueError("a sum needs at least one term")
        kinds = {d.kind for d, _ in terms}
        if len(kinds) != 1:
            raise ValueError("summed martingales must share a kind")
        self.terms = [(d, Fraction(w)) for d, w in terms]
        if any(w < 0 for _, w in self.terms):
            raise ValueError("sum weights are nonnegative")
        self.kind = kinds.pop()
        self.truncation = truncation
        self.name = "sum(" + ", ".join(d.name for d, _ in self.terms) + ")"

    def capital(self, node: Any) -> Fraction:
        return sum((w * d.capital(node) for d, w in self.terms if w), Fraction(0))

    def capital_at_stage(self, node: Any, stage: int) -> Fraction:
        return sum(
            (w * d.capital_at_stage(node, stage) for d, w in self.terms if w), Fraction(0)
        )


def sum_martingales(
    terms: Sequence[Union[Martingale, Tuple[Martingale, Any]]],
    truncation: Optional[int] = None,
) -> SumMartingale:
    """Sum martingales; bare entries carry weight 1."""
    weighted = [t if isinstance(t, tuple) else (t, 1) for t in terms]
    return SumMartingale(weighted, truncation)


def cover_sum_martingale(model: CtmcModel, cover: Any) -> SumMartingale:
    """``sum_k savings(d_k)`` over every stored row of a cover."""
    rows = sorted(cover)
    terms = [(savings_martingale(cover_to_martingale(model, cover, k)), 1) for k in rows]
    return SumMartingale(terms, truncation=rows[-1] if rows else None)


class LiftedStateMartingale(Martingale):
    """Bets on states as ``d_state`` does and hedges on every sojourn bit."""

    def __init__(self, d_state: Martingale, model: CtmcModel) -> None:
        """Initialize lifted martingale."""
        _require_kind(d_state, MartingaleKind.STATE)
        self.d_state = d_state
        self.model = model
        self.name = f"lift({d_state.name})"

    def capital(self, node: Any) -> Fraction:
        states = node.states
        # A repeated state names a null cylinder
        if any(a == b for a, b in zip(states, states[1:])):
            return Fraction(0)
        return self.d_state.capital(StateSequence(states))


def lift_state_martingale(d_state: Martingale, model: CtmcModel) -> LiftedStateMartingale:
    return LiftedStateMartingale(d_state, model)


class StateBetMartingale(Martingale):
    """Stakes everything on ``target`` being the state at ``index``.

    The payoff is ``1 / pi`` for the probability ``pi`` of that state at that
    position; where ``target`` cannot occur the bet is hedged.
    """

    kind = MartingaleKind.STATE

    def __init__(
        self,
        sys: ProbabilisticTransitionSystem,
        init: Initialization,
        index: int,
        target: StateId,
    ) -> None:
        """Initialize state bet."""
        if index < 0:
            raise ValueError("index is nonnegative")
        self.sys = sys
        self.init = init
        self.index = index
        self.target = target
        self.name = f"state-bet:index={index}:state={target}"

    def capital(self, node: Any) -> Fraction:
        if len(node) <= self.index:
            return Fraction(1)
        if self.index == 0:
            chance = self.init.weight(self.target)
        else:
            chance = self.sys.pi(node[self.index - 1], self.target)
        if chance == 0:
            return Fraction(1)
        return 1 / chance if node[self.index] == self.target else Fraction(0)


class SojournIndexMartingale(Martingale):
    """Applies a one-component bit strategy to the sojourn at ``index`` only.

    Initial capital is ``2^-index``. States, other sojourns and terminal
    positions are hedged.
    """

    def __init__(self, d_bits: Martingale, index: int, model: CtmcModel) -> None:
        """Initialize sojourn-index martingale."""
        _require_kind(d_bits, MartingaleKind.DURATION)
        if index < 0:
            raise ValueError("index is nonnegative")
        self.base = d_bits.capital(("",))
        if self.base <= 0:
            raise ValueError("bit strategy must start with positive capital")
        self.d_bits = d_bits
        self.index = index
        self.model = model
        self.name = f"sojourn:n={index}:{d_bits.name}"

    def capital(self, node: Any) -> Fraction:
        scale = Fraction(1, 2**self.index)
        if len(node) <= self.index:
            return scale
        state, bits = node[self.index]
        if self.model.is_terminal(state):
            return scale
        return scale * self.d_bits.capital((bits,)) / self.base


def sojourn_index_martingale(
    d_bits: Martingale, index: int, model: CtmcModel
) -> SojournIndexMartingale:
    return SojournIndexMartingale(d_bits, index, model)


class FirstBitMartingale(Martingale):
    """Doubles on a first bit 0 of each of the first ``count`` components."""

    kind = MartingaleKind.DURATION

    def __init__(self, count: int) -> None:
        """Initialize first-bit martingale."""
        if count < 1:
            raise ValueError("count must be at least 1")
        self.count = count
        self.name = f"first-bit:m={count}"

    def capital(self, node: Any) -> Fraction:
        capital = Fraction(1)
        for bits in tuple(node)[: self.count]:
            if not bits:
                continue
            if bits[0] == "1":
                return Fraction(0)
            capital *= 2
        return capital


def duration_first_bit_martingale(count: int) -> FirstBitMartingale:
    return FirstBitMartingale(count)


class ZenoDetector(Martingale):
    """Bets double-or-nothing that each sojourn from ``start`` on lies in the lower half cell.

    The first encoded bit of a sojourn is 0 exactly when ``F(t) <= 1/2``, i.e.
    ``t <= ln 2 / lambda``. Terminal positions are hedged.
    """

    def __init__(self, model: CtmcModel, start: int = 0) -> None:
        """Initialize zeno detector."""
        if start < 0:
            raise ValueError("start index is nonnegative")
        self.model = model
        self.start = start
        self.name = f"zeno:i={start}"

    def capital(self, node: Any) -> Fraction:
        capital = Fraction(1)
        for state, bits in tuple(node)[self.start :]:
            if not bits or self.model.is_terminal(state):
                continue
            if bits[0] == "1":
                return Fraction(0)
            capital *= 2
        return capital


def zeno_detector(model: CtmcModel, start: int = 0) -> ZenoDetector:
    return ZenoDetector(model, start)


class RandomBetMartingale(Martingale):
    """Pseudo-random fair bets at every node of size below ``depth``.

    Each node's split of capital is drawn from a generator seeded by ``seed``
    and a hash of the node, so capital is a pure function of the spec. Bit
    splits pay ``f`` and ``2 - f`` for ``f`` in quarters of ``[0, 2]``; state
    splits pay proportionally to random integer weights renormalized by the
    jump probabilities.
    """

    def __init__(self, model: CtmcModel, seed: int, depth: int) -> None:
        """Initialize random bet martingale."""
        if seed < 0:
            raise ValueError("seed is nonnegative")
        self.model = model
        self.seed = seed
        self.depth = depth
        self.name = f"random:seed={seed}:depth={depth}"

    def _generator(self, node: TrajectorySpec) -> np.random.Generator:
        digest = hashlib.sha256(node.render().encode("utf-8")).digest()
        entropy = [self.seed, int.from_bytes(digest[:8], "big")]
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    def _factor(self, parent: TrajectorySpec, child: TrajectorySpec) -> Fraction:
        if parent.size >= self.depth:
            return Fraction(1)
        rng = self._generator(parent)
        if len(child) == len(parent):
            if self.model.is_terminal(parent[-1][0]):
                return Fraction(1)
            share = Fraction(int(rng.integers(0, 9)), 4)
            return share if child[-1][1].endswith("0") else 2 - share
        options = next_states(self.model, parent)
        draws = [int(v) for v in rng.integers(0, 5, size=len(options))]
        norm = sum((p * r for (_, p), r in zip(options, draws)), Fraction(0))
        if norm == 0:
            return Fraction(1)
        for (state, _), draw in zip(options, draws):
            if state == child[-1][0]:
                return draw / norm
        return Fraction(0)

    def capital(self, node: Any) -> Fraction:
        chain = node.ancestry()
        capital = Fraction(1)
        for parent, child in zip(chain, chain[1:]):
            capital *= self._factor(parent, child)
            if not capital:
                break
        return capital


def random_bet_martingale(model: CtmcModel, seed: int, depth: int) -> RandomBetMartingale:
    return RandomBetMartingale(model, seed, depth)


class Split(enum.Enum):
    STATE = "state"
    BIT = "bit"


class RefinementPolicy(ABC):
    """Chooses, at each spec, whether the gambler's next bet is on a state or a bit.

    The specs a policy reaches form a tree in which siblings name disjoint
    cylinders; Kraft's inequality holds for antichains of that tree.
    """

    @abstractmethod
    def split(self, model: CtmcModel, node: TrajectorySpec) -> Optional[Split]:
        """The split taken at ``node``, or ``None`` at a leaf."""

    def children(self, model: CtmcModel, node: TrajectorySpec) -> List[TrajectorySpec]:
        split = self.split(model, node)
        if split is Split.STATE:
            return _state_children(model, node)
        if split is Split.BIT:
            return _bit_children(node)
        return []

    def contains(self, model: CtmcModel, node: TrajectorySpec) -> bool:
        """Whether ``node`` is reached by following this policy from the root."""
        chain = node.ancestry()
        for parent, child in zip(chain, chain[1:]):
            expected = Split.BIT if len(child) == len(parent) else Split.STATE
            if self.split(model, parent) is not expected:
                return False
        return True


class SojournDepthPolicy(RefinementPolicy):
    """Reads each sojourn to ``bits`` bits before moving to the next state."""

    def __init__(self, bits: int = 1) -> None:
        """Initialize sojourn depth policy."""
        if bits < 0:
            raise ValueError("bits is nonnegative")
        self.bits = bits

    def split(self, model: CtmcModel, node: TrajectorySpec) -> Optional[Split]:
        if not len(node):
            return Split.STATE
        state, bits = node[-1]
        if model.is_terminal(state):
            return None
        return Split.BIT if len(bits) < self.bits else Split.STATE

    def __repr__(self) -> str:
        return f"SojournDepthPolicy(bits={self.bits})"


def martingale_to_prefix_set(
    model: CtmcModel,
    d: Martingale,
    k: int,
    depth: int,
    policy: Optional[RefinementPolicy] = None,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> List[TrajectorySpec]:
    """The first specs along ``policy`` where ``d`` reaches ``2^k d(root)``.

    Only specs of size at most ``depth`` are searched. The result is an
    antichain of the policy tree, so its members are pairwise disjoint.
    """
    _require_kind(d, MartingaleKind.TRAJECTORY)
    policy = policy or SojournDepthPolicy()
    initial = d.initial_capital()
    if initial == 0:
        return []
    threshold = 2**k * initial
    budget = _Budget(node_budget)
    found: List[TrajectorySpec] = []
    stack = [EMPTY_SPEC]
    while stack:
        w = stack.pop()
        budget.spend()
        if d.capital(w) >= threshold:
            found.append(w)
            continue
        if w.size < depth:
            children = [c for c in policy.children(model, w) if mu_traj(model, c) > 0]
            stack.extend(reversed(children))
    logger.debug("prefix set for k=%d under %r: %d specs", k, policy, len(found))
    return found


@dataclass
class KraftReport:
    """Both sides of ``d(root) >= sum_B d(w) mu(w)``."""

    initial: Fraction
    total: Fraction
    size: int

    @property
    def margin(self) -> Fraction:
        return self.initial - self.total

    @property
    def holds(self) -> bool:
        return self.total <= self.initial


def kraft_check(
    model: CtmcModel,
    d: Martingale,
    specs: Sequence[TrajectorySpec],
    policy: Optional[RefinementPolicy] = None,
) -> KraftReport:
    """Evaluate the generalized Kraft inequality over a disjoint prefix set.

    With a ``policy`` every spec must also be a node of its tree, which is
    where the inequality is guaranteed for fair ``d``.
    """
    _require_kind(d, MartingaleKind.TRAJECTORY)
    members = list(specs)
    for i, w in enumerate(members):
        for v in members[i + 1 :]:
            if spec_compare(w, v) is not SpecRelation.DISJOINT:
                raise NotAnAntichain(f"{w.render()!r} and {v.render()!r} overlap")
        if policy is not None and not policy.contains(model, w):
            raise NotAnAntichain(f"{w.render()!r} is not a node of {policy!r}")
    total = Fraction(0)
    for w in members:
        measure = mu_traj(model, w)
        if measure:
            total += d.capital(w) * measure
    report = KraftReport(d.initial_capital(), total, len(members))
    if not report.holds:
        logger.warning("Kraft inequality fails for %r: %s > %s", d, total, report.initial)
    return report


def _precedes(kind: MartingaleKind, a: Node, b: Node) -> bool:
    """``a`` is ``b`` or a refinement-prefix of it."""
    if kind is MartingaleKind.TRAJECTORY:
        assert isinstance(a, TrajectorySpec) and isinstance(b, TrajectorySpec)
        return a == b or spec_compare(a, b) is SpecRelation.W_PREFIXES_V
    if kind is MartingaleKind.STATE:
        assert isinstance(a, StateSequence) and isinstance(b, StateSequence)
        return a.states == b.states[: len(a)]
    a, b = tuple(a), tuple(b)  # type: ignore[arg-type]
    if not a:
        return True
    if len(a) > len(b) or a[:-1] != b[: len(a) - 1]:
        return False
    return b[len(a) - 1].startswith(a[-1])


@dataclass
class CapitalTrace:
    """Capital along a refinement chain."""

    entries: List[Tuple[Node, Fraction]]

    @property
    def capitals(self) -> List[Fraction]:
        return [c for _, c in self.entries]

    @property
    def final(self) -> Fraction:
        return self.entries[-1][1] if self.entries else Fraction(0)

    @property
    def peak(self) -> Fraction:
        return max(self.capitals, default=Fraction(0))

    def crossings(self) -> List[Tuple[int, int]]:
        """``(k, i)``: the first entry ``i`` with capital at least ``2^k``, for ``k >= 0``."""
        found = []
        k = 0
        while 2**k <= self.peak:
            index = next(i for i, c in enumerate(self.capitals) if c >= 2**k)
            found.append((k, index))
            k += 1
        return found

    @property
    def largest_threshold(self) -> Optional[int]:
        crossings = self.crossings()
        return crossings[-1][0] if crossings else None

    def success_at(self, alpha: Any) -> bool:
        """Some entry has capital strictly above ``alpha``."""
        return any(c > Fraction(alpha) for c in self.capitals)

    @property
    def unitary(self) -> bool:
        return any(c >= 1 for c in self.capitals)


def run_martingale(
    d: Martingale,
    target: Node,
    schedule: Optional[Sequence[Node]] = None,
) -> CapitalTrace:
    """Capital of ``d`` along ``schedule``, by default every ancestor of ``target``."""
    chain = list(schedule) if schedule is not None else ancestry(d.kind, target)
    for a, b in zip(chain, chain[1:]):
        if a == b or not _precedes(d.kind, a, b):
            raise NotAChain(f"{render_node(a)} does not strictly precede {render_node(b)}")
    for node in chain:
        if not _precedes(d.kind, node, target):
            raise NotAChain(f"{render_node(node)} does not refine toward the target")
    return CapitalTrace([(node, d.capital(node)) for node in chain])
