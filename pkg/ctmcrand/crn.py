"""Stochastic chemical reaction networks.

The input language, one directive per line::

    species X, Y, Z             # optional declaration
    X + Z -> 2Y + Z @ 1         # reaction with rate constant
    2X -> 0 @ 1/2               # 0 names the empty side
    init X = 10
    bound Y <= 40               # consumed by zeno_report

A network compiles to a CTMC whose states are species vectors rendered as
``name:count`` pairs, with mass-action propensities. Trajectories are sampled
with the stochastic simulation algorithm on numpy PCG64 streams.
"""

import logging
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ctmcrand.config import PrecisionConfig
from ctmcrand.ctmc import CtmcModel, Trajectory, TrajectorySpec
from ctmcrand.formats import ParseError
from ctmcrand.martingale import ZenoDetector
from ctmcrand.sojourn import INFINITY, Duration, encode_time
from ctmcrand.transition import (
    BooleanTransitionSystem,
    Initialization,
    StateId,
    apply_reaction,
    net_effect,
    parse_counts,
    ratefree_crn_to_boolean,
    render_counts,
)

logger = logging.getLogger(__name__)

Side = Tuple[Tuple[str, int], ...]

_SPECIES = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_TERM = re.compile(r"^\s*(\d*)\s*([A-Za-z_][A-Za-z0-9_]*)\s*$")
_EMPTY_SIDE = {"", "0", "∅"}


@dataclass(frozen=True)
class Reaction:
    """A reaction ``(r, p, k)``: reactant and product vectors and a rate constant."""

    reactants: Side
    products: Side
    rate: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "reactants", tuple(sorted(self.reactants)))
        object.__setattr__(self, "products", tuple(sorted(self.products)))
        object.__setattr__(self, "rate", Fraction(self.rate))
        if self.rate <= 0:
            raise ValueError(f"rate constant must be positive, got {self.rate}")
        if not any(self.delta.values()):
            raise ValueError("reactants and products must differ")

    @classmethod
    def of(
        cls,
        reactants: Mapping[str, int],
        products: Mapping[str, int],
        rate: Union[int, str, Fraction],
    ) -> "Reaction":
        return cls(
            tuple((s, n) for s, n in reactants.items() if n),
            tuple((s, n) for s, n in products.items() if n),
            Fraction(rate),
        )

    @property
    def r(self) -> Dict[str, int]:
        return dict(self.reactants)

    @property
    def p(self) -> Dict[str, int]:
        return dict(self.products)

    @property
    def delta(self) -> Dict[str, int]:
        return net_effect(dict(self.reactants), dict(self.products))

    def render(self) -> str:
        def side(terms: Side) -> str:
            if not terms:
                return "0"
            return " + ".join(f"{n if n > 1 else ''}{s}" for s, n in terms)

        return f"{side(self.reactants)} -> {side(self.products)} @ {self.rate}"


def mass_action(reaction: Reaction, state: Mapping[str, int]) -> Fraction:
    """``k * prod_Y q(Y) (q(Y) - 1) ... (q(Y) - r(Y) + 1)``; 0 when not applicable."""
    value = reaction.rate
    for species, need in reaction.reactants:
        have = state.get(species, 0)
        if have < need:
            return Fraction(0)
        value *= math.perm(have, need)
    return value


Propensity = Callable[[Reaction, Mapping[str, int]], Fraction]


@dataclass(frozen=True)
class CrnModel:
    """A network ``N = (S, R)`` with an initial species vector and optional count bounds."""

    species: Tuple[str, ...]
    reactions: Tuple[Reaction, ...]
    init: Tuple[Tuple[str, int], ...] = ()
    bounds: Tuple[Tuple[str, int], ...] = ()
    description: str = field(default="", compare=False)
    propensity: Propensity = field(default=mass_action, compare=False, repr=False)

    def __post_init__(self) -> None:
        known = set(self.species)
        for reaction in self.reactions:
            unknown = (set(reaction.r) | set(reaction.p)) - known
            if unknown:
                raise ValueError(
                    f"reaction {reaction.render()!r} uses undeclared {sorted(unknown)}"
                )
        for name, _ in self.init + self.bounds:
            if name not in known:
                raise ValueError(f"unknown species {name!r}")

    def vector(self, counts: Mapping[str, int]) -> Dict[str, int]:
        """A full species vector, zero where ``counts`` is silent."""
        full = {name: 0 for name in self.species}
        full.update(counts)
        return full

    @property
    def initial_state(self) -> StateId:
        return render_counts(self.vector(dict(self.init)))

    def counts(self, state: StateId) -> Dict[str, int]:
        return self.vector(parse_counts(state))


def _parse_side(text: str, number: int, offset: int) -> Dict[str, int]:
    side: Dict[str, int] = {}
    if text.strip() in _EMPTY_SIDE:
        return side
    position = offset
    for term in text.split("+"):
        match = _TERM.match(term)
        if not match:
            raise ParseError(f"bad term {term.strip()!r}", number, position + 1)
        coefficient = int(match.group(1)) if match.group(1) else 1
        if coefficient:
            side[match.group(2)] = side.get(match.group(2), 0) + coefficient
        position += len(term) + 1
    return side


def parse_crn(text: str) -> CrnModel:
    """Parse the reaction-network language; errors carry line and column."""
    species: List[str] = []
    reactions: List[Reaction] = []
    init: Dict[str, int] = {}
    bounds: Dict[str, int] = {}

    def declare(name: str) -> None:
        if name not in species:
            species.append(name)

    pending: List[Tuple[str, int, int, str]] = []
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        stripped = line.strip()
        if not stripped:
            continue
        indent = len(line) - len(line.lstrip())
        keyword = stripped.split(None, 1)[0]
        if keyword == "species":
            for name in re.split(r"[,\s]+", stripped[len("species"):].strip()):
                if not name:
                    continue
                if not _SPECIES.fullmatch(name):
                    raise ParseError(f"bad species name {name!r}", number, line.find(name) + 1)
                declare(name)
        elif keyword in ("init", "bound"):
            pending.append((keyword, number, indent, stripped))
        else:
            reactions.append(_parse_reaction(line, number, declare))

    for keyword, number, indent, stripped in pending:
        operator = "=" if keyword == "init" else "<="
        body = stripped[len(keyword):]
        name, sep, value = body.partition(operator)
        name, value = name.strip(), value.strip()
        if not sep or not value.isdigit():
            raise ParseError(f"expected '{keyword} Species {operator} count'", number, indent + 1)
        if name not in species:
            raise ParseError(f"unknown species {name!r}", number, indent + stripped.find(name) + 1)
        target = init if keyword == "init" else bounds
        if name in target:
            raise ParseError(f"duplicate {keyword} for {name!r}", number, indent + 1)
        target[name] = int(value)

    return CrnModel(
        tuple(species),
        tuple(reactions),
        tuple(sorted(init.items())),
        tuple(sorted(bounds.items())),
        description=text,
    )


def _parse_reaction(line: str, number: int, declare: Callable[[str], None]) -> Reaction:
    body, at, rate_text = line.partition("@")
    if not at:
        if "->" not in line:
            raise ParseError("expected a reaction, species, init or bound line", number)
        raise ParseError("reaction lacks '@ rate'", number, len(line) + 1)
    if body.count("->") != 1:
        marks = [i for i in (body.find(m) for m in ("=", "<", "→", "-", ">")) if i >= 0]
        column = min(marks) + 1 if marks else 1
        raise ParseError("malformed arrow, expected a single '->'", number, column)
    left, _, right = body.partition("->")
    reactants = _parse_side(left, number, 0)
    products = _parse_side(right, number, len(left) + 2)
    for name in list(reactants) + list(products):
        declare(name)
    try:
        rate = Fraction(rate_text.strip())
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"bad rate {rate_text.strip()!r}", number, len(body) + 2) from None
    if rate <= 0:
        raise ParseError(f"rate must be positive, got {rate}", number, len(body) + 2)
    if reactants == products:
        raise ParseError("reactants and products must differ", number, 1)
    return Reaction.of(reactants, products, rate)


def render_crn(network: CrnModel) -> str:
    """Canonical source text; ``parse_crn`` reads it back to an equal network."""
    lines = []
    if network.species:
        lines.append("species " + ", ".join(network.species))
    lines += [reaction.render() for reaction in network.reactions]
    lines += [f"init {name} = {count}" for name, count in network.init]
    lines += [f"bound {name} <= {count}" for name, count in network.bounds]
    return "\n".join(lines) + "\n"


def propensity(reaction: Reaction, state: Mapping[str, int]) -> Fraction:
    return mass_action(reaction, state)


def crn_to_ctmc(network: CrnModel) -> CtmcModel:
    """The CTMC of ``network``.

    ``lambda(q, q')`` sums the propensities of reactions taking ``q`` to ``q'``.
    """

    def rates(state: StateId) -> Dict[StateId, Fraction]:
        counts = network.counts(state)
        row: Dict[StateId, Fraction] = {}
        for reaction in network.reactions:
            after = apply_reaction(counts, reaction.r, reaction.p)
            if after is None:
                continue
            value = Fraction(network.propensity(reaction, counts))
            if value:
                target = render_counts(after)
                row[target] = row.get(target, Fraction(0)) + value
        return row

    description = network.description or render_crn(network)
    return CtmcModel(rates, Initialization.point(network.initial_state), None, description)


def ratefree_system(network: CrnModel) -> BooleanTransitionSystem:
    """The Boolean system of ``network`` with its rates erased."""
    return ratefree_crn_to_boolean(
        network.species, [(reaction.r, reaction.p) for reaction in network.reactions]
    )


@dataclass(frozen=True)
class SimConfig:
    """Simulation limits; ``max_events`` counts fired reactions."""

    seed: int
    max_events: int = 10_000
    max_time: Optional[float] = None
    depth: int = 0

    def __post_init__(self) -> None:
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.max_events < 1:
            raise ValueError("max_events must be at least 1")
        if self.depth < 0:
            raise ValueError("depth is nonnegative")


def child_generator(seed: int, stream: int) -> np.random.Generator:
    """The PCG64 generator of child stream ``stream`` of ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(stream,))))


def _uniform_below(rng: np.random.Generator, bound: int) -> int:
    """An exactly uniform integer in ``[0, bound)``."""
    if bound < 2**62:
        return int(rng.integers(0, bound))
    width = (bound.bit_length() + 7) // 8
    while True:
        draw = int.from_bytes(rng.bytes(width), "big") >> (8 * width - bound.bit_length())
        if draw < bound:
            return draw


def _pick(rng: np.random.Generator, weighted: Sequence[Tuple[StateId, Fraction]]) -> StateId:
    """Choose a state with probability proportional to its exact weight."""
    common = math.lcm(*(w.denominator for _, w in weighted))
    integers = [int(w * common) for _, w in weighted]
    draw = _uniform_below(rng, sum(integers))
    for (state, _), weight in zip(weighted, integers):
        if draw < weight:
            return state
        draw -= weight
    raise AssertionError("draw exceeded total weight")


class StochasticSimulator:
    """Exact sampling of initial states, sojourns and jumps of a CTMC."""

    def __init__(self, model: CtmcModel) -> None:
        """Initialize simulator."""
        self.model = model

    def sample_initial(self, rng: np.random.Generator) -> StateId:
        return _pick(rng, self.model.init.support)

    def sample_sojourn(self, state: StateId, rng: np.random.Generator) -> Duration:
        """An exponential sojourn by inversion of a 53-bit uniform in ``(0, 1)``.

        The uniform is the cell midpoint ``(2k + 1) / 2^54``. Near 1 its log is
        taken through ``log1p`` of the complement, which is exact in binary64.
        """
        rate = self.model.exit_rate(state)
        if rate == 0:
            return INFINITY
        k = int(rng.integers(0, 2**53))
        if k < 2**52:
            minus_log = -math.log((2 * k + 1) / 2**54)
        else:
            minus_log = -math.log1p(-(2**54 - 2 * k - 1) / 2**54)
        return Duration.from_float(minus_log / float(rate))

    def sample_jump(self, state: StateId, rng: np.random.Generator) -> StateId:
        """The next state, drawn with probability ``p(state, r)``."""
        row = self.model.rates_from(state)
        if not row:
            raise ValueError(f"no jump out of terminal state {state!r}")
        return _pick(rng, row)


def ssa_simulate(
    network: Union[CrnModel, CtmcModel], cfg: SimConfig, stream: int = 0
) -> Trajectory:
    """Simulate one trajectory on child stream ``stream`` of ``cfg.seed``.

    Stops at a terminal state (stored with an infinite sojourn), after
    ``cfg.max_events`` reactions, or once elapsed time reaches ``cfg.max_time``.
    """
    model = crn_to_ctmc(network) if isinstance(network, CrnModel) else network
    simulator = StochasticSimulator(model)
    rng = child_generator(cfg.seed, stream)
    state = simulator.sample_initial(rng)
    steps: List[Tuple[StateId, Duration]] = []
    elapsed = 0.0
    fired = 0
    while True:
        # Terminal states hold forever
        if model.is_terminal(state):
            steps.append((state, INFINITY))
            reason = "terminal state"
            break
        sojourn = simulator.sample_sojourn(state, rng)
        steps.append((state, sojourn))
        elapsed += sojourn.approx()
        if cfg.max_time is not None and elapsed >= cfg.max_time:
            reason = "time limit"
            break
        if fired >= cfg.max_events:
            reason = "event limit"
            break
        state = simulator.sample_jump(state, rng)
        fired += 1
    logger.debug(
        "stream %d of seed %d: %d events, stopped at %s", stream, cfg.seed, fired, reason
    )
    return Trajectory(tuple(steps), seed=cfg.seed, model_hash=model.fingerprint, stream=stream)


def simulate_runs(
    network: Union[CrnModel, CtmcModel], cfg: SimConfig, runs: int
) -> List[Trajectory]:
    """One trajectory per child stream ``0 .. runs - 1``."""
    return [ssa_simulate(network, cfg, stream) for stream in range(runs)]


@dataclass
class ZenoReport:
    """Evidence about whether a trajectory is heading for a Zeno explosion."""

    within_bounds: bool
    first_violation: Optional[int]
    partial_sums: List[float]
    max_exit_rate: Fraction
    first_bits: List[Optional[str]]
    zero_suffix: int
    detector_capital: Fraction


def zeno_report(
    model: CtmcModel,
    trajectory: Trajectory,
    bounds: Union[None, int, Mapping[str, int]] = None,
    prec: Optional[PrecisionConfig] = None,
) -> ZenoReport:
    """Bound checks and sojourn evidence for a possible explosion.

    Reports partial sums of sojourns, the largest exit rate ``M`` and the zeno
    detector's fuel. ``bounds`` is a count cap for every species or a per-species mapping; the
    states must then be species vectors. ``zero_suffix`` is the length of the
    longest final run of nonterminal sojourns whose first encoded bit is 0, and
    ``detector_capital`` the zeno detector's capital started at that run.
    """
    first_violation = None
    if bounds is not None:
        for i, state in enumerate(trajectory.states):
            counts = parse_counts(state)
            caps = bounds if isinstance(bounds, Mapping) else {s: bounds for s in counts}
            if any(counts.get(s, 0) > cap for s, cap in caps.items()):
                first_violation = i
                break

    partial_sums = []
    elapsed = 0.0
    first_bits: List[Optional[str]] = []
    pairs = []
    max_rate = Fraction(0)
    for state, duration in trajectory.steps:
        rate = model.exit_rate(state)
        max_rate = max(max_rate, rate)
        elapsed += duration.approx()
        partial_sums.append(elapsed)
        if rate == 0:
            first_bits.append(None)
            pairs.append((state, ""))
        else:
            bit = encode_time(rate, duration, 1, prec)
            first_bits.append(bit)
            pairs.append((state, bit))

    suffix = 0
    for bit in reversed(first_bits):
        if bit is None and suffix == 0:
            continue
        if bit != "0":
            break
        suffix += 1
    start = len(trajectory) - suffix - (1 if trajectory.terminated else 0)
    detector = ZenoDetector(model, max(start, 0))
    capital = detector.capital(TrajectorySpec(tuple(pairs)))
    return ZenoReport(
        within_bounds=first_violation is None,
        first_violation=first_violation,
        partial_sums=partial_sums,
        max_exit_rate=max_rate,
        first_bits=first_bits,
        zero_suffix=suffix,
        detector_capital=capital,
    )


def is_conserved(network: CrnModel, weights: Mapping[str, int]) -> bool:
    """``v . delta(rho) = 0`` for every reaction."""
    return all(
        sum(weights.get(s, 0) * d for s, d in reaction.delta.items()) == 0
        for reaction in network.reactions
    )


def conservation_holds(
    network: CrnModel, weights: Mapping[str, int], trajectory: Trajectory
) -> bool:
    """``v . q`` takes one value along the trajectory."""
    totals = {
        sum(weights.get(s, 0) * n for s, n in network.counts(state).items())
        for state in trajectory.states
    }
    return len(totals) <= 1
