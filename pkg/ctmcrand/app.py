"""Main application logic for ctmcrand."""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

from ctmcrand.complexity import (
    DeficiencyReport,
    TailReport,
    deficiency_report,
    get_proxy,
    tail_mass_report,
)
from ctmcrand.config import Config
from ctmcrand.crn import (
    CrnModel,
    SimConfig,
    ZenoReport,
    crn_to_ctmc,
    parse_crn,
    simulate_runs,
    zeno_report,
)
from ctmcrand.ctmc import (
    CoverReport,
    CtmcModel,
    Trajectory,
    TrajectorySpec,
    encode_trajectory,
    mu_traj,
    verify_null_cover,
)
from ctmcrand.formats import (
    RunManifest,
    TrajectoryFile,
    parse_cover,
    parse_rate_table,
    parse_trajectory,
    render_cover,
    render_trajectory,
)
from ctmcrand.martingale import (
    CapitalTrace,
    FairnessReport,
    KraftReport,
    Martingale,
    MartingaleKind,
    Node,
    SojournDepthPolicy,
    kraft_check,
    martingale_to_prefix_set,
    run_martingale,
    verify_duration_fairness,
    verify_state_fairness,
    verify_trajectory_fairness,
)
from ctmcrand.registry import MartingaleRegistry
from ctmcrand.sojourn import RateSequence
from ctmcrand.transition import StateSequence

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


@dataclass
class ModelSummary:
    """What ``parse`` reports about a model file."""

    path: str
    kind: str
    fingerprint: str
    species: Tuple[str, ...] = ()
    reactions: List[str] = field(default_factory=list)
    states: Optional[Tuple[str, ...]] = None
    initial: List[Tuple[str, Fraction]] = field(default_factory=list)
    terminal: List[str] = field(default_factory=list)


@dataclass
class Measurement:
    """``mu_C(w)`` split as ``weight * 2^-charged_bits``."""

    spec: TrajectorySpec
    measure: Fraction
    weight: Fraction
    charged_bits: int


class App:
    """Main application class."""

    def __init__(
        self, config: Optional[Config] = None, registry: Optional[MartingaleRegistry] = None
    ) -> None:
        """Initialize the application."""
        self.config = config or Config.load()
        self.registry = registry or MartingaleRegistry.default()

    def read_model(self, path: PathLike) -> Tuple[str, Optional[CrnModel], CtmcModel]:
        """Read a model file: a reaction network for ``.crn`` files, else a rate table."""
        path = Path(path)
        text = path.read_text(encoding="utf-8")
        if path.suffix == ".crn":
            network = parse_crn(text)
            return text, network, crn_to_ctmc(network)
        return text, None, parse_rate_table(text)

    def load_model(self, path: PathLike) -> CtmcModel:
        model = self.read_model(path)[2]
        logger.debug("loaded %s as model %s", path, model.fingerprint)
        return model

    def parse_model(self, path: PathLike) -> ModelSummary:
        """Summarize a validated model file."""
        _, network, model = self.read_model(path)
        summary = ModelSummary(
            path=str(path),
            kind="crn" if network is not None else "table",
            fingerprint=model.fingerprint,
            states=model.states,
            initial=model.init.support,
        )
        if network is not None:
            summary.species = network.species
            summary.reactions = [reaction.render() for reaction in network.reactions]
            if model.is_terminal(network.initial_state):
                summary.terminal = [network.initial_state]
        else:
            assert model.states is not None
            summary.reactions = [
                f"{q} -> {r} : {w}" for q in model.states for r, w in model.rates_from(q)
            ]
            summary.terminal = [q for q in model.states if model.is_terminal(q)]
        return summary

    def simulate(
        self,
        path: PathLike,
        seed: int,
        events: int = 10_000,
        max_time: Optional[float] = None,
        depth: int = 0,
        runs: int = 1,
    ) -> List[str]:
        """Rendered trajectory files, one per child stream of ``seed``.

        ``events == 0`` gives header-only files without simulating.
        """
        if runs < 1:
            raise ValueError("runs must be at least 1")
        if events < 0:
            raise ValueError("events is nonnegative")
        text, network, model = self.read_model(path)
        precision = self.config.precision.working_bits
        manifest = RunManifest.create(
            "simulate", {Path(path).name: text}, seed=seed, precision=precision
        )
        if events == 0:
            empty = [
                Trajectory((), seed=seed, model_hash=model.fingerprint, stream=stream)
                for stream in range(runs)
            ]
            return [
                render_trajectory(t, TrajectorySpec(), depth, precision, manifest) for t in empty
            ]
        cfg = SimConfig(seed=seed, max_events=events, max_time=max_time, depth=depth)
        trajectories = simulate_runs(network or model, cfg, runs)
        rendered = []
        for trajectory in trajectories:
            encoding = encode_trajectory(
                model, trajectory, [depth] * len(trajectory), self.config.precision
            )
            rendered.append(render_trajectory(trajectory, encoding, depth, precision, manifest))
        logger.info("simulated %d run(s) of model %s with seed %d", runs, model.fingerprint, seed)
        return rendered

    def read_trajectory(self, path: PathLike) -> TrajectoryFile:
        return parse_trajectory(Path(path).read_text(encoding="utf-8"))

    def measure(self, path: PathLike, spec: Union[str, TrajectorySpec]) -> Measurement:
        model = self.load_model(path)
        w = TrajectorySpec.parse(spec) if isinstance(spec, str) else spec
        measure = mu_traj(model, w)
        charged = w.total_bits
        if len(w) and model.is_terminal(w[-1][0]):
            charged -= len(w[-1][1])
        return Measurement(w, measure, measure * 2**charged, charged)

    def encoding_at(
        self, model: CtmcModel, stored: TrajectoryFile, depth: Optional[int]
    ) -> TrajectorySpec:
        """The stored encoding, or a fresh one at ``depth`` bits per sojourn."""
        if depth is None:
            return stored.encoding
        trajectory = stored.trajectory
        return encode_trajectory(
            model, trajectory, [depth] * len(trajectory), self.config.precision
        )

    def bet(
        self,
        path: PathLike,
        trajectory_path: PathLike,
        selector: str,
        depth: Optional[int] = None,
    ) -> CapitalTrace:
        """Capital of a named martingale along an encoded trajectory."""
        model = self.load_model(path)
        stored = self.read_trajectory(trajectory_path)
        encoding = self.encoding_at(model, stored, depth)
        d = self.registry.build(selector, model)
        return run_martingale(d, node_for(d.kind, encoding))

    def verify(
        self, path: PathLike, selector: str, depth: Optional[int] = None
    ) -> Tuple[Martingale, FairnessReport]:
        """Check the fairness equations of a named martingale on a finite tree."""
        model = self.load_model(path)
        d = self.registry.build(selector, model)
        return d, verify_martingale(d, model, depth or self.config.default_depth, self.config)

    def cover_check(self, path: PathLike, cover_path: PathLike) -> CoverReport:
        model = self.load_model(path)
        cover = parse_cover(Path(cover_path).read_text(encoding="utf-8"))
        return verify_null_cover(model, cover)

    def prefix_set(
        self,
        path: PathLike,
        selector: str,
        k: int,
        depth: Optional[int] = None,
        bits: int = 1,
    ) -> Tuple[List[TrajectorySpec], KraftReport, str]:
        """The success set of a named martingale at level ``k``, its Kraft check and cover text."""
        model = self.load_model(path)
        d = self.registry.build(selector, model)
        policy = SojournDepthPolicy(bits)
        found = martingale_to_prefix_set(
            model,
            d,
            k,
            depth or self.config.default_depth,
            policy,
            self.config.node_budget,
        )
        report = kraft_check(model, d, found, policy)
        return found, report, render_cover({k: found})

    def deficiency(
        self,
        path: PathLike,
        target: str,
        proxy: Optional[str] = None,
        depth: Optional[int] = None,
    ) -> DeficiencyReport:
        """Deficiency of a spec, given as text or as a trajectory file."""
        model = self.load_model(path)
        if Path(target).is_file():
            spec = self.encoding_at(model, self.read_trajectory(target), depth)
        else:
            spec = TrajectorySpec.parse(target)
        return deficiency_report(
            model, spec, get_proxy(proxy or self.config.proxy), self.config.precision
        )

    def tail(
        self,
        path: PathLike,
        shape: Sequence[int],
        proxy: Optional[str] = None,
        ks: Sequence[int] = tuple(range(8)),
    ) -> TailReport:
        model = self.load_model(path)
        return tail_mass_report(
            model,
            shape,
            get_proxy(proxy or self.config.proxy),
            ks,
            self.config.precision,
            self.config.node_budget,
        )

    def zeno(
        self,
        path: PathLike,
        trajectory_path: PathLike,
        bounds: Optional[int] = None,
    ) -> ZenoReport:
        _, network, model = self.read_model(path)
        stored = self.read_trajectory(trajectory_path)
        if bounds is None and network is not None and network.bounds:
            return zeno_report(
                model, stored.trajectory, dict(network.bounds), self.config.precision
            )
        return zeno_report(model, stored.trajectory, bounds, self.config.precision)


def node_for(kind: MartingaleKind, spec: TrajectorySpec) -> Node:
    """The specification a martingale of ``kind`` reads off a trajectory encoding."""
    if kind is MartingaleKind.STATE:
        return StateSequence(spec.states)
    if kind is MartingaleKind.DURATION:
        return spec.bits
    return spec


def verify_martingale(
    d: Martingale, model: CtmcModel, depth: int, config: Config
) -> FairnessReport:
    """Fairness check in the calculus of ``d``'s kind.

    State strategies are checked over the model's jump chain and duration
    strategies over the unit rate sequence ``(1, 1, ...)``.
    """
    if d.kind is MartingaleKind.STATE:
        return verify_state_fairness(
            d, model.embedded_chain(), model.init, depth, config.node_budget
        )
    if d.kind is MartingaleKind.DURATION:
        return verify_duration_fairness(
            d, RateSequence([1], infinite=True, tail=lambda i: 1), depth, config.node_budget
        )
    return verify_trajectory_fairness(d, model, depth, config.node_budget)
