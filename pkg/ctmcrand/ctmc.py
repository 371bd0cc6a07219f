"""Continuous-time Markov chains, trajectories and trajectory cylinders.

A specification ``w = ((q_0, u_0), ..., (q_{n-1}, u_{n-1}))`` names the cylinder
of trajectories that visit ``q_0, ..., q_{n-1}`` with each sojourn ``t_i`` in the
quantile cell ``D_{lambda_{q_i}}(u_i)``. Measures of cylinders are exact
rationals; only membership touches transcendental quantities.
"""

import enum
import hashlib
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import (
    Callable,
    Dict,
    Iterator,
    List,
    Mapping,
    Optional,
    Sequence,
    Tuple,
)

from ctmcrand.config import PrecisionConfig
from ctmcrand.sojourn import (
    INFINITY,
    Duration,
    Enclosure,
    approximates,
    check_bits,
    encode_time,
    log2_enclosure,
)
from ctmcrand.transition import (
    Initialization,
    ProbabilisticTransitionSystem,
    StateId,
    Weight,
)

logger = logging.getLogger(__name__)

Profile = Tuple[int, ...]


class CtmcModel:
    """A CTMC ``C = (Q, lambda, sigma)`` with exact rational rates.

    ``rates`` maps a state to ``{r: lambda(q, r)}``; it is consulted lazily and
    each row is validated and cached on first use. ``states`` names a finite
    universe when there is one.
    """

    def __init__(
        self,
        rates: Callable[[StateId], Mapping[StateId, Weight]],
        init: Initialization,
        states: Optional[Sequence[StateId]] = None,
        description: str = "",
    ) -> None:
        """Initialize CTMC model."""
        self._rates = rates
        self.init = init
        self.states: Optional[Tuple[StateId, ...]] = (
            tuple(sorted(states)) if states is not None else None
        )
        self.description = description
        self._row = lru_cache(maxsize=None)(self._load_row)

    @classmethod
    def from_table(
        cls,
        rows: Mapping[StateId, Mapping[StateId, Weight]],
        init: Initialization,
        description: Optional[str] = None,
    ) -> "CtmcModel":
        """A finite model from an explicit rate table; unlisted states are terminal."""
        table = {q: {r: Fraction(w) for r, w in row.items()} for q, row in rows.items()}
        universe = set(table) | set(init.states)
        for row in table.values():
            universe.update(row)
        if description is None:
            lines = [
                f"{q} -> {r} : {w}"
                for q in sorted(table)
                for r, w in sorted(table[q].items())
            ]
            lines += [f"init {q} : {w}" for q, w in init.support]
            description = "\n".join(lines) + "\n"
        return cls(lambda q: table.get(q, {}), init, sorted(universe), description)

    @property
    def fingerprint(self) -> str:
        """Short content hash of the model's source text."""
        return hashlib.sha256(self.description.encode("utf-8")).hexdigest()[:16]

    def _load_row(self, state: StateId) -> Tuple[Tuple[StateId, Fraction], ...]:
        row = {r: Fraction(w) for r, w in self._rates(state).items() if Fraction(w) != 0}
        if state in row:
            raise ValueError(f"rate matrix has a self loop at {state!r}")
        if any(w < 0 for w in row.values()):
            raise ValueError(f"negative rate out of {state!r}")
        return tuple(sorted(row.items()))

    def rates_from(self, state: StateId) -> List[Tuple[StateId, Fraction]]:
        return list(self._row(state))

    def rate(self, state: StateId, other: StateId) -> Fraction:
        return dict(self._row(state)).get(other, Fraction(0))

    def exit_rate(self, state: StateId) -> Fraction:
        """``lambda_q``, the total rate out of ``state``."""
        return sum((w for _, w in self._row(state)), Fraction(0))

    def is_terminal(self, state: StateId) -> bool:
        return self.exit_rate(state) == 0

    def jump_prob(self, state: StateId, other: StateId) -> Fraction:
        """``p(q, r) = lambda(q, r) / lambda_q``."""
        total = self.exit_rate(state)
        if total == 0:
            raise ValueError(f"no jump probabilities out of terminal state {state!r}")
        return self.rate(state, other) / total

    def successors(self, state: StateId) -> List[Tuple[StateId, Fraction]]:
        """``(r, p(state, r))`` for every reachable ``r``; empty at terminal states."""
        total = self.exit_rate(state)
        return [(r, w / total) for r, w in self._row(state)]

    def embedded_chain(self) -> ProbabilisticTransitionSystem:
        """The jump chain ``pi(q, r) = p(q, r)`` with the same terminal states."""
        return ProbabilisticTransitionSystem(
            lambda q: dict(self.successors(q)), states=self.states
        )


@dataclass(frozen=True)
class TrajectorySpec:
    """A finite specification ``w`` in ``(Q x {0,1}*)*``."""

    pairs: Tuple[Tuple[StateId, str], ...] = ()

    def __post_init__(self) -> None:
        pairs = tuple((str(q), check_bits(u)) for q, u in self.pairs)
        object.__setattr__(self, "pairs", pairs)

    @classmethod
    def of(cls, *pairs: Tuple[StateId, str]) -> "TrajectorySpec":
        return cls(tuple(pairs))

    def __len__(self) -> int:
        return len(self.pairs)

    def __getitem__(self, index: int) -> Tuple[StateId, str]:
        return self.pairs[index]

    def __iter__(self) -> Iterator[Tuple[StateId, str]]:
        return iter(self.pairs)

    @property
    def states(self) -> Tuple[StateId, ...]:
        return tuple(q for q, _ in self.pairs)

    @property
    def bits(self) -> Tuple[str, ...]:
        return tuple(u for _, u in self.pairs)

    @property
    def total_bits(self) -> int:
        return sum(len(u) for _, u in self.pairs)

    @property
    def size(self) -> int:
        """Number of pairs plus number of bits: the depth of ``w`` in the spec tree."""
        return len(self.pairs) + self.total_bits

    def extend(self, state: StateId) -> "TrajectorySpec":
        """``w (state, "")``."""
        return TrajectorySpec(self.pairs + ((state, ""),))

    def refine(self, bit: str) -> "TrajectorySpec":
        """Append ``bit`` to the last bit string."""
        if not self.pairs:
            raise ValueError("the empty specification has no bit string to refine")
        q, u = self.pairs[-1]
        return TrajectorySpec(self.pairs[:-1] + ((q, u + bit),))

    def truncate(self, length: int) -> "TrajectorySpec":
        return TrajectorySpec(self.pairs[:length])

    def parent(self) -> Optional["TrajectorySpec"]:
        """The spec this one was refined or extended from; ``None`` at the root."""
        if not self.pairs:
            return None
        q, u = self.pairs[-1]
        if u:
            return TrajectorySpec(self.pairs[:-1] + ((q, u[:-1]),))
        return TrajectorySpec(self.pairs[:-1])

    def ancestry(self) -> List["TrajectorySpec"]:
        """The chain from the empty spec to this one, inclusive."""
        chain: List[TrajectorySpec] = []
        node: Optional[TrajectorySpec] = self
        while node is not None:
            chain.append(node)
            node = node.parent()
        return chain[::-1]

    def render(self) -> str:
        """``state:bits`` tokens joined by ``/``."""
        return "/".join(f"{q}:{u}" for q, u in self.pairs)

    @classmethod
    def parse(cls, text: str) -> "TrajectorySpec":
        text = text.strip()
        if not text:
            return cls()
        pairs = []
        for token in text.split("/"):
            state, sep, bits = token.rpartition(":")
            if not sep:
                raise ValueError(f"spec token {token!r} lacks ':'")
            pairs.append((state, bits))
        return cls(tuple(pairs))

    def __str__(self) -> str:
        return self.render()


EMPTY_SPEC = TrajectorySpec()


@dataclass(frozen=True)
class Trajectory:
    """A finite stored prefix of a trajectory ``tau``.

    A terminal state closes the trajectory with an infinite sojourn; nothing
    follows it.
    """

    steps: Tuple[Tuple[StateId, Duration], ...]
    seed: Optional[int] = None
    model_hash: str = ""
    stream: Optional[int] = None
    metadata: Dict[str, str] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple(self.steps))
        for i, (_, duration) in enumerate(self.steps[:-1]):
            if duration.is_infinite:
                raise ValueError(f"infinite sojourn at index {i} is followed by more steps")
        for (a, _), (b, _) in zip(self.steps, self.steps[1:]):
            if a == b:
                raise ValueError(f"trajectory repeats state {a!r}")

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def states(self) -> Tuple[StateId, ...]:
        return tuple(q for q, _ in self.steps)

    @property
    def durations(self) -> Tuple[Duration, ...]:
        return tuple(t for _, t in self.steps)

    @property
    def terminated(self) -> bool:
        return bool(self.steps) and self.steps[-1][1].is_infinite

    @property
    def norm(self) -> Optional[int]:
        """``||tau||``: index of the terminal state, ``None`` if not reached."""
        return len(self.steps) - 1 if self.terminated else None

    @property
    def jumps(self) -> int:
        return len(self.steps) - 1 if self.terminated else len(self.steps)

    def total_time(self) -> float:
        """Sum of the finite sojourns."""
        return sum(t.approx() for t in self.durations if not t.is_infinite)


def mu_traj(model: CtmcModel, spec: Optional[TrajectorySpec]) -> Fraction:
    """``mu_C(Omega_w)``, exact.

    A terminal state before the last position gives 0. A terminal last state
    contributes no factor for its own bit string, which must be all ones since
    only the all-ones cell of rate 0 holds ``inf``. ``None`` (the empty marker
    of :func:`meet`) has measure 0.
    """
    if spec is None:
        return Fraction(0)
    if not len(spec):
        return Fraction(1)
    states = spec.states
    measure = model.init.weight(states[0])
    for i in range(len(spec) - 1):
        if not measure:
            return measure
        if model.is_terminal(states[i]):
            return Fraction(0)
        measure *= model.jump_prob(states[i], states[i + 1])
    last_state, last_bits = spec[-1]
    # Only the all-ones cell holds inf
    if model.is_terminal(last_state):
        if last_bits.strip("1"):
            return Fraction(0)
        charged = spec.total_bits - len(last_bits)
    else:
        charged = spec.total_bits
    return measure / 2**charged


class SpecRelation(enum.Enum):
    """How two specifications' cylinders relate syntactically."""

    W_PREFIXES_V = "w-prefixes-v"
    V_PREFIXES_W = "v-prefixes-w"
    EQUAL_OVERLAP = "equal-overlap"
    DISJOINT = "disjoint"


def _compatible(w: TrajectorySpec, v: TrajectorySpec) -> bool:
    for (q, u), (r, x) in zip(w, v):
        if q != r or not (u.startswith(x) or x.startswith(u)):
            return False
    return True


def _prefixes(w: TrajectorySpec, v: TrajectorySpec) -> bool:
    """``w`` is no longer than ``v`` and each of its bit strings prefixes ``v``'s."""
    return len(w) <= len(v) and all(
        q == r and x.startswith(u) for (q, u), (r, x) in zip(w, v)
    )


def spec_compare(w: TrajectorySpec, v: TrajectorySpec) -> SpecRelation:
    """Classify ``w`` against ``v``: refinement, overlap or disjointness."""
    if not _compatible(w, v):
        return SpecRelation.DISJOINT
    if w == v:
        return SpecRelation.EQUAL_OVERLAP
    if _prefixes(w, v):
        return SpecRelation.W_PREFIXES_V
    if _prefixes(v, w):
        return SpecRelation.V_PREFIXES_W
    return SpecRelation.EQUAL_OVERLAP


def meet(w: TrajectorySpec, v: TrajectorySpec) -> Optional[TrajectorySpec]:
    """The spec naming ``Omega_w ∩ Omega_v``, or ``None`` when they are disjoint."""
    if not _compatible(w, v):
        return None
    longer, shorter = (w, v) if len(w) >= len(v) else (v, w)
    pairs = []
    for i, (q, u) in enumerate(longer):
        if i < len(shorter):
            x = shorter[i][1]
            # Keep the longer bit string
            u = u if len(u) >= len(x) else x
        pairs.append((q, u))
    return TrajectorySpec(tuple(pairs))


def spec_matches_trajectory(
    model: CtmcModel,
    spec: TrajectorySpec,
    trajectory: Trajectory,
    prec: Optional[PrecisionConfig] = None,
) -> bool:
    """Decide ``trajectory ∈ Omega_spec``."""
    for i, (state, bits) in enumerate(spec):
        if i >= len(trajectory):
            if trajectory.terminated:
                return False
            raise ValueError(
                f"trajectory of {len(trajectory)} steps is too short for a spec of {len(spec)}"
            )
        observed, duration = trajectory.steps[i]
        if observed != state:
            return False
        if model.is_terminal(state):
            if i < len(spec) - 1:
                return False
            duration = INFINITY
        if not approximates(model.exit_rate(state), bits, duration, prec):
            return False
    return True


def encode_trajectory(
    model: CtmcModel,
    trajectory: Trajectory,
    depths: Sequence[int],
    prec: Optional[PrecisionConfig] = None,
) -> TrajectorySpec:
    """Encode the first ``len(depths)`` sojourns at the given depths.

    Terminal positions are encoded as all-ones strings, the cell of ``inf``.
    """
    if len(depths) > len(trajectory):
        raise ValueError(
            f"{len(depths)} depths requested for a trajectory of {len(trajectory)} steps"
        )
    pairs = []
    for (state, duration), depth in zip(trajectory.steps, depths):
        rate = model.exit_rate(state)
        if rate == 0:
            bits = "1" * depth
        else:
            bits = encode_time(rate, duration, depth, prec)
        pairs.append((state, bits))
    return TrajectorySpec(tuple(pairs))


def profile(spec: TrajectorySpec) -> Profile:
    return tuple(len(u) for u in spec.bits)


def self_information(
    model: CtmcModel, spec: TrajectorySpec, prec: Optional[PrecisionConfig] = None
) -> Enclosure:
    """``l(w) = -log2 mu_C(w)``, exact when the measure is a power of two."""
    measure = mu_traj(model, spec)
    if measure == 0:
        raise ValueError(f"spec {spec.render()!r} names a null cylinder")
    bits = (prec or PrecisionConfig()).working_bits
    return log2_enclosure(1 / measure, bits)


def next_states(model: CtmcModel, spec: TrajectorySpec) -> List[Tuple[StateId, Fraction]]:
    """States a one-pair extension of ``spec`` can add, with their conditional weights."""
    if not len(spec):
        return list(model.init.support)
    last = spec[-1][0]
    if model.is_terminal(last):
        return []
    return model.successors(last)


NullCoverPrefix = Dict[int, List[TrajectorySpec]]


@dataclass
class CoverRow:
    """Check of one level ``k`` of a null cover."""

    k: int
    count: int
    total: Fraction
    bound: Fraction

    @property
    def margin(self) -> Fraction:
        return self.bound - self.total

    @property
    def passed(self) -> bool:
        return self.total <= self.bound


@dataclass
class CoverReport:
    rows: List[CoverRow]

    @property
    def passed(self) -> bool:
        return all(row.passed for row in self.rows)

    @property
    def failures(self) -> List[CoverRow]:
        return [row for row in self.rows if not row.passed]


def verify_null_cover(
    model: CtmcModel, cover: Mapping[int, Sequence[TrajectorySpec]]
) -> CoverReport:
    """Check ``sum_l mu_C(g(k, l)) <= 2^-k`` for every stored level ``k``."""
    rows = []
    # Levels are checked independently
    for k in sorted(cover):
        if k < 0:
            raise ValueError(f"cover level must be nonnegative, got {k}")
        total = sum((mu_traj(model, g) for g in cover[k]), Fraction(0))
        row = CoverRow(k, len(cover[k]), total, Fraction(1, 2**k))
        if not row.passed:
            logger.info("cover level %d has mass %s above %s", k, total, row.bound)
        rows.append(row)
    return CoverReport(rows)
