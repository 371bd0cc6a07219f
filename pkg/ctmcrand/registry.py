"""Named martingale factories, selectable by ``NAME:key=value:...`` strings."""

from abc import ABC, abstractmethod
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from ctmcrand.ctmc import CtmcModel
from ctmcrand.formats import parse_cover
from ctmcrand.martingale import (
    ConstantMartingale,
    Martingale,
    StateBetMartingale,
    cover_sum_martingale,
    cover_to_martingale,
    duration_first_bit_martingale,
    lift_state_martingale,
    random_bet_martingale,
    savings_martingale,
    sojourn_index_martingale,
    zeno_detector,
)

Params = Dict[str, str]


def parse_selector(selector: str) -> Tuple[str, Params]:
    """Split ``zeno:i=0`` into ``("zeno", {"i": "0"})``."""
    name, *pairs = selector.split(":")
    params: Params = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or not key:
            raise ValueError(f"martingale parameter {pair!r} is not key=value")
        params[key.strip()] = value.strip()
    if not name:
        raise ValueError("empty martingale name")
    return name.strip(), params


def _int(params: Params, key: str, default: Optional[int] = None) -> int:
    if key not in params:
        if default is None:
            raise ValueError(f"missing parameter {key!r}")
        return default
    try:
        return int(params[key])
    except ValueError:
        raise ValueError(f"parameter {key!r} must be an integer, got {params[key]!r}") from None


def _flag(params: Params, key: str) -> bool:
    return params.get(key, "0").lower() in ("1", "true", "yes")


class MartingaleFactory(ABC):
    """Base class for named martingale constructions."""

    @abstractmethod
    def name(self) -> str:
        """Return the selector name."""

    @abstractmethod
    def description(self) -> str:
        """Return a one-line description."""

    @abstractmethod
    def build(self, model: CtmcModel, params: Params) -> Martingale:
        """Build the martingale for ``model``."""


class ConstantFactory(MartingaleFactory):
    def name(self) -> str:
        return "constant"

    def description(self) -> str:
        return "constant capital (value=c)"

    def build(self, model: CtmcModel, params: Params) -> Martingale:
        return ConstantMartingale(Fraction(params.get("value", "1")))


class ZenoFactory(MartingaleFactory):
    def name(self) -> str:
        return "zeno"

    def description(self) -> str:
        return "double-or-nothing on first sojourn bits from index i (i=0)"

    def build(self, model: CtmcModel, params: Params) -> Martingale:
        return zeno_detector(model, _int(params, "i", 0))


class CoverFactory(MartingaleFactory):
    """Martingales of a stored null cover.

    With ``k`` the row martingale ``d_k`` (optionally saved at 1 with
    ``savings=1``); without it, the sum of saved row martingales.
    """

    def name(self) -> str:
        return "cover"

    def description(self) -> str:
        return "martingale of a null cover file (file=PATH, k=K, savings=1)"

    def build(self, model: CtmcModel, params: Params) -> Martingale:
        if "file" not in params:
            raise ValueError("cover martingale needs file=PATH")
        cover = parse_cover(Path(params["file"]).read_text(encoding="utf-8"))
        if "k" not in params:
            return cover_sum_martingale(model, cover)
        d = cover_to_martingale(model, cover, _int(params, "k"))
        return savings_martingale(d) if _flag(params, "savings") else d


class SojournFactory(MartingaleFactory):
    def name(self) -> str:
        return "sojourn"

    def description(self) -> str:
        return "first-bit bet on the n-th sojourn only, initial capital 2^-n (n=0)"

    def build(self, model: CtmcModel, params: Params) -> Martingale:
        return sojourn_index_martingale(
            duration_first_bit_martingale(1), _int(params, "n", 0), model
        )


class LiftFactory(MartingaleFactory):
    def name(self) -> str:
        return "lift"

    def description(self) -> str:
        return "state bet on `state` at `index`, hedged on all sojourns"

    def build(self, model: CtmcModel, params: Params) -> Martingale:
        return lift_state_martingale(_state_bet(model, params), model)


class StateBetFactory(MartingaleFactory):
    def name(self) -> str:
        return "state-bet"

    def description(self) -> str:
        return "state-sequence bet on `state` at `index` over the jump chain"

    def build(self, model: CtmcModel, params: Params) -> Martingale:
        return _state_bet(model, params)


def _state_bet(model: CtmcModel, params: Params) -> StateBetMartingale:
    index = _int(params, "index", 0)
    target = params.get("state") or model.init.states[0]
    return StateBetMartingale(model.embedded_chain(), model.init, index, target)


class FirstBitFactory(MartingaleFactory):
    def name(self) -> str:
        return "first-bit"

    def description(self) -> str:
        return "duration strategy doubling on first bit 0 of the first m sojourns (m=1)"

    def build(self, model: CtmcModel, params: Params) -> Martingale:
        return duration_first_bit_martingale(_int(params, "m", 1))


class RandomFactory(MartingaleFactory):
    def name(self) -> str:
        return "random"

    def description(self) -> str:
        return "pseudo-random fair bets below a size limit (seed=0, depth=6)"

    def build(self, model: CtmcModel, params: Params) -> Martingale:
        return random_bet_martingale(model, _int(params, "seed", 0), _int(params, "depth", 6))


class MartingaleRegistry:
    """Registry of martingale factories."""

    def __init__(self) -> None:
        """Initialize registry."""
        self.factories: Dict[str, MartingaleFactory] = {}

    @classmethod
    def default(cls) -> "MartingaleRegistry":
        registry = cls()
        for factory in (
            ConstantFactory(),
            ZenoFactory(),
            CoverFactory(),
            SojournFactory(),
            LiftFactory(),
            StateBetFactory(),
            FirstBitFactory(),
            RandomFactory(),
        ):
            registry.register(factory)
        return registry

    def register(self, factory: MartingaleFactory) -> None:
        self.factories[factory.name()] = factory

    def build(self, selector: str, model: CtmcModel) -> Martingale:
        """Build the martingale a selector names."""
        name, params = parse_selector(selector)
        if name not in self.factories:
            raise ValueError(f"Martingale '{name}' not found")
        return self.factories[name].build(model, params)

    def list_factories(self) -> List[MartingaleFactory]:
        return list(self.factories.values())

