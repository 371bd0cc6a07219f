"""Sojourn-time approximation.

Dyadic intervals ``I_w``, the exponential distribution functions ``F_lambda``,
the quantile cells ``D_lambda(w) = F_lambda^{-1}(I_w)``, lambda-approximation of
durations, rate and duration sequences, and the product measure ``mu_lambda``.

Transcendental quantities are carried as enclosures: pairs of exact dyadic
rationals computed with mpmath's outward-rounded interval primitives. Comparisons
against dyadic cell boundaries escalate precision until the enclosure separates,
and raise :class:`BoundaryAmbiguous` when it never does.
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Sequence, Tuple, Union

from mpmath import libmp

from ctmcrand.config import PrecisionConfig

logger = logging.getLogger(__name__)

RateLike = Union[int, str, Fraction]
RawInterval = Tuple[tuple, tuple]

_ONE: RawInterval = (libmp.fone, libmp.fone)


class BoundaryAmbiguous(ArithmeticError):
    """A CDF enclosure cannot be separated from a dyadic cell boundary."""


class RateDurationMismatch(ValueError):
    """A finite duration was paired with rate 0, or an infinite one with a positive rate."""


def as_rate(value: RateLike) -> Fraction:
    """Coerce a rate to an exact nonnegative rational."""
    rate = Fraction(value)
    if rate < 0:
        raise ValueError(f"rate must be nonnegative, got {rate}")
    return rate


def check_bits(bits: str) -> str:
    """Return ``bits`` unchanged if it is an ASCII 0/1 string."""
    if not isinstance(bits, str) or bits.strip("01"):
        raise ValueError(f"not a bit string: {bits!r}")
    return bits


def _decimal(value: Fraction, digits: int = 30) -> str:
    """Render a rational as a fixed-point decimal, rounded to ``digits`` places."""
    sign = "-" if value < 0 else ""
    scaled = round(abs(value) * 10**digits)
    whole, frac = divmod(scaled, 10**digits)
    return f"{sign}{whole}.{frac:0{digits}d}"


class Enclosure:
    """A closed interval ``[lower, upper]`` of exact rationals containing a real value."""

    __slots__ = ("lower", "upper", "bits")

    def __init__(self, lower: Fraction, upper: Fraction, bits: int = 0) -> None:
        """Initialize enclosure."""
        if lower > upper:
            raise ValueError(f"empty enclosure [{lower}, {upper}]")
        self.lower = lower
        self.upper = upper
        self.bits = bits

    @classmethod
    def exact(cls, value: Fraction) -> "Enclosure":
        """An enclosure of zero width."""
        return cls(Fraction(value), Fraction(value), 0)

    @property
    def is_exact(self) -> bool:
        return self.lower == self.upper

    @property
    def radius(self) -> Fraction:
        return (self.upper - self.lower) / 2

    @property
    def midpoint(self) -> Fraction:
        return (self.upper + self.lower) / 2

    def contains(self, value: Fraction) -> bool:
        return self.lower <= value <= self.upper

    def render(self) -> str:
        """Exact values as ``p/q``, enclosures as ``midpoint +/- radius``."""
        if self.is_exact:
            return str(self.lower)
        radius = float(self.radius)
        return f"{_decimal(self.midpoint)} +/- {radius:.3e}"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Enclosure):
            return NotImplemented
        return (self.lower, self.upper) == (other.lower, other.upper)

    def __hash__(self) -> int:
        return hash((self.lower, self.upper))

    def __repr__(self) -> str:
        return f"Enclosure({self.lower!r}, {self.upper!r}, bits={self.bits})"


def _raw(value: Fraction, bits: int) -> RawInterval:
    """Outward-rounded raw interval around an exact rational."""
    p, q = value.numerator, value.denominator
    return (
        libmp.from_rational(p, q, bits, libmp.round_floor),
        libmp.from_rational(p, q, bits, libmp.round_ceiling),
    )


def _to_enclosure(interval: RawInterval, bits: int) -> Enclosure:
    lo, hi = interval
    if libmp.finf in (lo, hi) or libmp.fninf in (lo, hi):
        raise ArithmeticError("enclosure endpoint is infinite")
    return Enclosure(
        Fraction(*libmp.to_rational(lo)), Fraction(*libmp.to_rational(hi)), bits
    )


def _clamp_unit(enclosure: Enclosure) -> Enclosure:
    lower = max(enclosure.lower, Fraction(0))
    upper = min(enclosure.upper, Fraction(1))
    return Enclosure(lower, upper, enclosure.bits)


def _neg_log1m_over(level: Fraction, rate: Fraction, bits: int) -> Enclosure:
    """Enclose ``-ln(1 - level) / rate`` for ``0 < level < 1`` and ``rate > 0``."""
    log = libmp.mpi_log(_raw(1 - level, bits), bits)
    quotient = libmp.mpi_div(libmp.mpi_neg(log), _raw(rate, bits), bits)
    return _to_enclosure(quotient, bits)


def log2_enclosure(value: RateLike, bits: int = 128) -> Enclosure:
    """Enclose ``log2(value)`` for ``value > 0``; exact when it is a power of two."""
    value = Fraction(value)
    if value <= 0:
        raise ValueError(f"log2 of nonpositive value {value}")
    num, den = value.numerator, value.denominator
    if num & (num - 1) == 0 and den & (den - 1) == 0:
        return Enclosure.exact(Fraction(num.bit_length() - den.bit_length()))
    log = libmp.mpi_div(
        libmp.mpi_log(_raw(value, bits), bits),
        libmp.mpi_log(_raw(Fraction(2), bits), bits),
        bits,
    )
    return _to_enclosure(log, bits)


@dataclass(frozen=True)
class Duration:
    """A duration in ``(0, inf]``.

    Exactly one representation is active: an exact positive rational ``value``;
    an exact quantile ``-ln(1 - level) / quantile_rate``; or, with every field
    unset, infinity.
    """

    value: Optional[Fraction] = None
    level: Optional[Fraction] = None
    quantile_rate: Optional[Fraction] = None

    @classmethod
    def of(cls, value: RateLike) -> "Duration":
        """An exact finite duration."""
        exact = Fraction(value)
        if exact <= 0:
            raise ValueError(f"durations are positive, got {exact}")
        return cls(value=exact)

    @classmethod
    def from_float(cls, value: float) -> "Duration":
        """A binary64 sample, taken as the exact rational it denotes."""
        if math.isinf(value):
            return cls.infinite()
        return cls.of(Fraction(value))

    @classmethod
    def infinite(cls) -> "Duration":
        return cls()

    @classmethod
    def quantile(cls, rate: RateLike, level: RateLike) -> "Duration":
        """The duration ``t`` with ``F_rate(t) = level`` exactly."""
        rate, level = as_rate(rate), Fraction(level)
        if rate == 0:
            raise ValueError("quantiles need a positive rate")
        if not 0 < level <= 1:
            raise ValueError(f"quantile level must lie in (0, 1], got {level}")
        if level == 1:
            return cls.infinite()
        return cls(level=level, quantile_rate=rate)

    @property
    def is_infinite(self) -> bool:
        return self.value is None and self.level is None

    def approx(self) -> float:
        """A float approximation, for reporting and sums of sojourn times."""
        if self.is_infinite:
            return math.inf
        if self.value is not None:
            return float(self.value)
        assert self.level is not None and self.quantile_rate is not None
        return -math.log1p(-float(self.level)) / float(self.quantile_rate)

    def render(self) -> str:
        """``inf``; shortest decimal of a binary64 value; ``=p/q``; or ``q:level:rate``."""
        if self.is_infinite:
            return "inf"
        if self.value is not None:
            as_float = float(self.value)
            if Fraction(as_float) == self.value:
                return repr(as_float)
            return f"={self.value}"
        return f"q:{self.level}:{self.quantile_rate}"

    @classmethod
    def parse(cls, text: str) -> "Duration":
        """Inverse of :meth:`render`."""
        text = text.strip()
        if text == "inf":
            return cls.infinite()
        if text.startswith("="):
            return cls.of(Fraction(text[1:]))
        if text.startswith("q:"):
            _, level, rate = text.split(":")
            return cls.quantile(rate, level)
        return cls.from_float(float(text))

    def __str__(self) -> str:
        return self.render()


INFINITY = Duration.infinite()


@dataclass(frozen=True)
class DyadicInterval:
    """The half-open interval ``I_w = (i / 2^n, (i + 1) / 2^n]`` of a bit string ``w``."""

    bits: str
    index: int
    lower: Fraction
    upper: Fraction

    @property
    def width(self) -> Fraction:
        return self.upper - self.lower

    def contains(self, value: Fraction) -> bool:
        return self.lower < value <= self.upper


def dyadic_interval(bits: str) -> DyadicInterval:
    """Return ``I_w``; the empty string names ``(0, 1]``."""
    check_bits(bits)
    index = int(bits, 2) if bits else 0
    scale = 2 ** len(bits)
    return DyadicInterval(bits, index, Fraction(index, scale), Fraction(index + 1, scale))


def exp_cdf(rate: RateLike, duration: Duration, bits: int = 128) -> Enclosure:
    """Enclose ``F_rate(t) = 1 - exp(-rate t)``, with ``F_0`` the point mass at infinity."""
    rate = as_rate(rate)
    if duration.is_infinite:
        return Enclosure.exact(Fraction(1))
    if rate == 0:
        return Enclosure.exact(Fraction(0))
    if duration.value is not None:
        exponent = libmp.mpi_neg(_raw(rate * duration.value, bits))
    else:
        assert duration.level is not None and duration.quantile_rate is not None
        if duration.quantile_rate == rate:
            return Enclosure.exact(duration.level)
        log = libmp.mpi_log(_raw(1 - duration.level, bits), bits)
        exponent = libmp.mpi_mul(_raw(rate / duration.quantile_rate, bits), log, bits)
    survival = libmp.mpi_exp(exponent, bits)
    return _clamp_unit(_to_enclosure(libmp.mpi_sub(_ONE, survival, bits), bits))


@dataclass(frozen=True)
class TimeInterval:
    """A quantile cell ``D_lambda(w)`` with enclosed endpoints.

    ``lower`` is open. ``upper`` of ``None`` means infinity; ``upper_closed``
    then says whether infinity itself belongs to the cell.
    """

    bits: str
    rate: Fraction
    lower: Optional[Enclosure]
    upper: Optional[Enclosure]
    upper_closed: bool
    empty: bool = False
    only_infinity: bool = False

    def render(self) -> str:
        if self.empty:
            return "{}"
        if self.only_infinity:
            return "{inf}"
        assert self.lower is not None
        upper = "inf" if self.upper is None else self.upper.render()
        closing = "]" if self.upper_closed else ")"
        return f"({self.lower.render()}, {upper}{closing}"


def _zero_rate_cell(bits: str) -> TimeInterval:
    zero = Enclosure.exact(Fraction(0))
    rate = Fraction(0)
    if not bits:
        return TimeInterval(bits, rate, zero, None, upper_closed=True)
    if not bits.strip("0"):
        return TimeInterval(bits, rate, zero, None, upper_closed=False)
    if not bits.strip("1"):
        return TimeInterval(bits, rate, None, None, True, only_infinity=True)
    return TimeInterval(bits, rate, None, None, False, empty=True)


def quantile_interval(
    rate: RateLike, bits: str, prec: Optional[PrecisionConfig] = None
) -> TimeInterval:
    """Return ``D_rate(bits)``.

    For ``rate > 0`` this is ``(-ln(1-a)/rate, -ln(1-b)/rate]`` where
    ``(a, b] = I_bits``, with an infinite upper end when ``b = 1``. For
    ``rate = 0``: all-zero strings name ``(0, inf)``, all-one strings ``{inf}``,
    the empty string ``(0, inf]``, and every other string the empty set.
    """
    rate = as_rate(rate)
    prec = prec or PrecisionConfig()
    cell = dyadic_interval(bits)
    if rate == 0:
        return _zero_rate_cell(bits)

    for working in prec.escalation():
        lower = (
            Enclosure.exact(Fraction(0))
            if cell.lower == 0
            else _neg_log1m_over(cell.lower, rate, working)
        )
        if cell.upper == 1:
            return TimeInterval(bits, rate, lower, None, upper_closed=True)
        upper = _neg_log1m_over(cell.upper, rate, working)
        if lower.upper < upper.lower:
            return TimeInterval(bits, rate, lower, upper, upper_closed=True)
        logger.debug("escalating quantile cell %r at rate %s past %d bits", bits, rate, working)
    raise BoundaryAmbiguous(
        f"endpoints of D_{rate}({bits!r}) not separated at {prec.max_bits} bits"
    )


def approximates(
    rate: RateLike, bits: str, duration: Duration, prec: Optional[PrecisionConfig] = None
) -> bool:
    """Decide ``bits ⊑_rate duration``, i.e. ``duration ∈ D_rate(bits)``."""
    rate = as_rate(rate)
    check_bits(bits)
    prec = prec or PrecisionConfig()
    if duration.is_infinite:
        # F = 1 exactly, which only the rightmost cell (all ones) contains.
        return not bits.strip("1")
    if rate == 0:
        return not bits.strip("0")

    cell = dyadic_interval(bits)
    for working in prec.escalation():
        cdf = exp_cdf(rate, duration, working)
        if cdf.is_exact:
            return cell.contains(cdf.lower)
        if cdf.lower > cell.lower and cdf.upper <= cell.upper:
            return True
        if cdf.upper <= cell.lower or cdf.lower > cell.upper:
            return False
        logger.debug("escalating membership of %s in D_%s(%r) past %d bits",
                     duration, rate, bits, working)
    raise BoundaryAmbiguous(
        f"F_{rate}({duration}) not separated from the boundary of I_{bits!r} "
        f"at {prec.max_bits} bits"
    )


def _cell_index(value: Fraction, depth: int) -> int:
    index = math.ceil(value * 2**depth) - 1
    return min(max(index, 0), 2**depth - 1)


def encode_time(
    rate: RateLike, duration: Duration, depth: int, prec: Optional[PrecisionConfig] = None
) -> str:
    """The unique ``w`` of length ``depth`` with ``duration ∈ D_rate(w)``.

    Cells are closed on the right: a value equal to a shared boundary belongs to
    the left cell, which is only ever decided when ``F_rate(t)`` is known exactly.
    """
    rate = as_rate(rate)
    if depth < 0:
        raise ValueError(f"depth must be nonnegative, got {depth}")
    if duration.is_infinite:
        if rate > 0:
            raise RateDurationMismatch(f"infinite duration at positive rate {rate}")
        return "1" * depth
    if rate == 0:
        raise RateDurationMismatch(f"finite duration {duration} at rate 0")
    if depth == 0:
        return ""

    prec = prec or PrecisionConfig()
    for working in prec.escalation():
        cdf = exp_cdf(rate, duration, working)
        low, high = _cell_index(cdf.lower, depth), _cell_index(cdf.upper, depth)
        # Both ends in one cell
        if low == high:
            return format(low, f"0{depth}b")
        logger.debug("escalating depth-%d encoding of %s past %d bits", depth, duration, working)
    raise BoundaryAmbiguous(
        f"F_{rate}({duration}) straddles a depth-{depth} boundary at {prec.max_bits} bits"
    )


class RateSequence:
    """A rate sequence: finite with a single trailing zero, or infinite and positive.

    Infinite sequences keep a materialized prefix and an optional ``tail``
    callable producing rate ``i`` on demand.
    """

    def __init__(
        self,
        rates: Sequence[RateLike],
        infinite: bool = False,
        tail: Optional[Callable[[int], RateLike]] = None,
    ) -> None:
        """Initialize rate sequence."""
        self.prefix: Tuple[Fraction, ...] = tuple(as_rate(r) for r in rates)
        self.infinite = infinite or tail is not None
        self.tail = tail
        if self.infinite:
            if any(r == 0 for r in self.prefix):
                raise ValueError("an infinite rate sequence has no zero entries")
        else:
            if not self.prefix:
                raise ValueError("a rate sequence is nonempty")
            if self.prefix[-1] != 0 or any(r == 0 for r in self.prefix[:-1]):
                raise ValueError("a finite rate sequence has exactly one zero, occurring last")

    @property
    def length(self) -> Optional[int]:
        """``None`` for infinite sequences."""
        return None if self.infinite else len(self.prefix)

    def admits(self, count: int) -> bool:
        return self.infinite or count <= len(self.prefix)

    def __getitem__(self, index: int) -> Fraction:
        if index < len(self.prefix):
            return self.prefix[index]
        if self.tail is not None:
            rate = as_rate(self.tail(index))
            if rate == 0:
                raise ValueError(f"tail produced rate 0 at index {index}")
            return rate
        if self.infinite:
            raise IndexError(f"rate {index} is beyond the materialized prefix")
        raise IndexError(f"rate sequence has length {len(self.prefix)}")


class DurationSequence:
    """A sequence of durations paired with a rate sequence."""

    def __init__(self, durations: Sequence[Duration]) -> None:
        """Initialize duration sequence."""
        self.durations: Tuple[Duration, ...] = tuple(durations)

    def __len__(self) -> int:
        return len(self.durations)

    def __getitem__(self, index: int) -> Duration:
        return self.durations[index]

    def check(self, rates: RateSequence) -> None:
        """Enforce ``t_i < inf  iff  lambda_i > 0`` over the stored entries."""
        if not rates.admits(len(self.durations)):
            raise ValueError("more durations than rates")
        for i, duration in enumerate(self.durations):
            if duration.is_infinite != (rates[i] == 0):
                raise RateDurationMismatch(
                    f"duration {duration} at index {i} does not fit rate {rates[i]}"
                )


ApproximationTuple = Tuple[str, ...]


def mu_duration(rates: RateSequence, approximation: Sequence[str]) -> Fraction:
    """``mu_lambda`` of the cylinder named by ``approximation``: ``2^-(sum of lengths)``."""
    if not rates.admits(len(approximation)):
        raise ValueError(
            f"approximation of length {len(approximation)} exceeds rate sequence"
        )
    return Fraction(1, 2 ** sum(len(check_bits(w)) for w in approximation))


def tuple_approximates(
    rates: RateSequence,
    approximation: Sequence[str],
    durations: DurationSequence,
    prec: Optional[PrecisionConfig] = None,
) -> bool:
    """Componentwise ``w_i ⊑_{lambda_i} t_i`` over the approximation's length."""
    if not rates.admits(len(approximation)):
        raise ValueError("approximation longer than the rate sequence")
    if len(durations) < len(approximation):
        raise ValueError("approximation longer than the duration sequence")
    return all(
        approximates(rates[i], w, durations[i], prec) for i, w in enumerate(approximation)
    )


def partition(
    rate: RateLike, depth: int, prec: Optional[PrecisionConfig] = None
) -> List[TimeInterval]:
    """All ``2^depth`` cells ``D_rate(w)``, ``|w| = depth``, left to right."""
    return [
        quantile_interval(rate, format(i, f"0{depth}b") if depth else "", prec)
        for i in range(2**depth)
    ]
