"""Profiles, profile sums and compressor-proxy randomness deficiency.

True prefix complexity is uncomputable. A compressor gives an upper bound
``K^(w) >= K(w) - O(1)``, so only a *low* ``K^`` says anything: ``K^(w) < l(w) - k``
certifies deficiency of at least ``k``. A high ``K^`` is inconclusive.
"""

import itertools
import logging
import lzma
import math
import zlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

from ctmcrand.config import DEFAULT_NODE_BUDGET, PrecisionConfig
from ctmcrand.ctmc import (
    CtmcModel,
    Profile,
    TrajectorySpec,
    mu_traj,
    next_states,
    profile,
    self_information,
)
from ctmcrand.martingale import NodeBudgetExceeded
from ctmcrand.sojourn import Enclosure

logger = logging.getLogger(__name__)

_LZMA_FILTERS = [{"id": lzma.FILTER_LZMA2, "preset": 9 | lzma.PRESET_EXTREME}]


@dataclass(frozen=True)
class CompressorProxy:
    """A named, deterministic compressor standing in for a universal machine."""

    name: str
    version: str
    compress: Callable[[bytes], bytes] = field(repr=False)
    decompress: Callable[[bytes], bytes] = field(repr=False)

    @property
    def label(self) -> str:
        return f"{self.name}/{self.version}"


def _lzma_compress(data: bytes) -> bytes:
    return lzma.compress(data, format=lzma.FORMAT_RAW, filters=_LZMA_FILTERS)


def _lzma_decompress(data: bytes) -> bytes:
    return lzma.decompress(data, format=lzma.FORMAT_RAW, filters=_LZMA_FILTERS)


PROXIES: Dict[str, CompressorProxy] = {
    "zlib-raw": CompressorProxy(
        "zlib-raw",
        f"zlib-{zlib.ZLIB_RUNTIME_VERSION}-level9",
        lambda data: zlib.compress(data, level=9, wbits=-15),
        lambda data: zlib.decompress(data, wbits=-15),
    ),
    "lzma-raw": CompressorProxy(
        "lzma-raw", "lzma2-preset9e", _lzma_compress, _lzma_decompress
    ),
}


def get_proxy(name: str) -> CompressorProxy:
    if name not in PROXIES:
        raise ValueError(f"unknown compressor proxy {name!r}; known: {', '.join(PROXIES)}")
    return PROXIES[name]


def elias_gamma_length(n: int) -> int:
    """Bits in the Elias-gamma code of ``n >= 1``."""
    if n < 1:
        raise ValueError("Elias-gamma codes positive integers")
    return 2 * (n.bit_length() - 1) + 1


def serialize(spec: TrajectorySpec) -> bytes:
    """Canonical bytes of a spec: its text form in UTF-8."""
    return spec.render().encode("utf-8")


def k_upper_bound(spec: TrajectorySpec, proxy: CompressorProxy) -> int:
    """Compressed length in bits plus a self-delimiting header.

    The header is the Elias-gamma code of one more than the compressed byte
    count, which makes the whole description prefix-free.
    """
    compressed = proxy.compress(serialize(spec))
    return 8 * len(compressed) + elias_gamma_length(len(compressed) + 1)


def _profile_bytes(shape: Profile) -> bytes:
    return ",".join(str(n) for n in shape).encode("ascii")


@dataclass
class DeficiencyReport:
    """Self-information against a compressed-length upper bound on complexity."""

    spec: TrajectorySpec
    proxy: str
    self_information: Enclosure
    k_hat: int
    profile: Profile
    profile_k_hat: int
    roundtrip_ok: bool

    @property
    def deficiency(self) -> Enclosure:
        """``l(w) - K^(w)``."""
        return Enclosure(
            self.self_information.lower - self.k_hat,
            self.self_information.upper - self.k_hat,
            self.self_information.bits,
        )

    @property
    def certified_level(self) -> Optional[int]:
        """The largest ``k >= 0`` with ``K^(w) < l(w) - k`` provable, if any."""
        gap = self.self_information.lower - self.k_hat
        if gap <= 0:
            return None
        return math.ceil(gap) - 1

    @property
    def verdict(self) -> str:
        level = self.certified_level
        if level is not None and level >= 1:
            return "certified"
        return "inconclusive"


def deficiency_report(
    model: CtmcModel,
    spec: TrajectorySpec,
    proxy: CompressorProxy,
    prec: Optional[PrecisionConfig] = None,
) -> DeficiencyReport:
    information = self_information(model, spec, prec)
    data = serialize(spec)
    shape = profile(spec)
    profile_compressed = proxy.compress(_profile_bytes(shape))
    report = DeficiencyReport(
        spec=spec,
        proxy=proxy.label,
        self_information=information,
        k_hat=k_upper_bound(spec, proxy),
        profile=shape,
        profile_k_hat=8 * len(profile_compressed)
        + elias_gamma_length(len(profile_compressed) + 1),
        roundtrip_ok=proxy.decompress(proxy.compress(data)) == data,
    )
    logger.debug(
        "deficiency of %d-pair spec: l=%s K^=%d", len(spec), information.render(), report.k_hat
    )
    return report


def _paths(model: CtmcModel, length: int) -> Iterator[Tuple[str, ...]]:
    """State words of ``length`` that the model can produce with positive probability."""
    if length == 0:
        yield ()
        return
    stack: List[TrajectorySpec] = [TrajectorySpec()]
    while stack:
        partial = stack.pop()
        for state, _ in next_states(model, partial):
            extended = partial.extend(state)
            if len(extended) == length:
                yield extended.states
            else:
                stack.append(extended)


def specs_with_profile(
    model: CtmcModel, shape: Profile, node_budget: int = DEFAULT_NODE_BUDGET
) -> Iterator[TrajectorySpec]:
    """Every spec with profile ``shape`` over state words of positive probability.

    Specs over other state words have measure 0 and are skipped.
    """
    if model.states is None:
        raise ValueError("profile enumeration needs a finite-state model")
    if any(n < 0 for n in shape):
        raise ValueError("profile entries are nonnegative")
    per_path = 2 ** sum(shape)
    # The budget counts specs, not paths
    visited = 0
    for path in _paths(model, len(shape)):
        visited += per_path
        if visited > node_budget:
            raise NodeBudgetExceeded(f"profile enumeration exceeded {node_budget} specs")
        choices = [
            ["".join(bits) for bits in itertools.product("01", repeat=n)] for n in shape
        ]
        for strings in itertools.product(*choices):
            yield TrajectorySpec(tuple(zip(path, strings)))


def profile_measure_sum(
    model: CtmcModel, shape: Sequence[int], node_budget: int = DEFAULT_NODE_BUDGET
) -> Fraction:
    """``sum of mu_C(w)`` over every spec ``w`` with profile ``shape``, exact."""
    return sum(
        (mu_traj(model, w) for w in specs_with_profile(model, tuple(shape), node_budget)),
        Fraction(0),
    )


@dataclass
class TailRow:
    k: int
    mass: Fraction
    bound: Fraction


@dataclass
class TailReport:
    """Mass of ``{w : l(w) - K^(w) > k}`` among specs of one profile."""

    proxy: str
    profile: Profile
    rows: List[TailRow]
    c_proxy: int


def tail_mass_report(
    model: CtmcModel,
    shape: Sequence[int],
    proxy: CompressorProxy,
    ks: Sequence[int] = tuple(range(8)),
    prec: Optional[PrecisionConfig] = None,
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> TailReport:
    """Tail masses per ``k`` and the smallest ``c`` with every mass at most ``2^(c - k)``."""
    scored: List[Tuple[Fraction, Fraction]] = []
    for w in specs_with_profile(model, tuple(shape), node_budget):
        measure = mu_traj(model, w)
        if measure:
            gap = self_information(model, w, prec).lower - k_upper_bound(w, proxy)
            scored.append((measure, gap))
    masses = [
        (k, sum((m for m, gap in scored if gap > k), Fraction(0))) for k in ks
    ]
    # Smallest c with mass <= 2^(c - k) at every level
    fitted = 0
    for k, mass in masses:
        if mass:
            fitted = max(fitted, k + math.ceil(math.log2(mass)))
    rows = [TailRow(k, mass, Fraction(2) ** (fitted - k)) for k, mass in masses]
    return TailReport(proxy.label, tuple(shape), rows, fitted)
