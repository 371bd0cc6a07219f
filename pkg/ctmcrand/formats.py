"""Text formats: transition tables, trajectory files, cover files and run manifests."""

import hashlib
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from ctmcrand import __version__
from ctmcrand.ctmc import EMPTY_SPEC, CtmcModel, Trajectory, TrajectorySpec
from ctmcrand.sojourn import Duration, check_bits
from ctmcrand.transition import Initialization, ProbabilisticTransitionSystem

logger = logging.getLogger(__name__)

GENERATOR = "numpy-pcg64-seedsequence/1"


class ParseError(ValueError):
    """Malformed input text, located by line and column (both 1-based)."""

    def __init__(self, message: str, line: int, column: int = 1) -> None:
        """Initialize parse error."""
        super().__init__(f"line {line}, column {column}: {message}")
        self.message = message
        self.line = line
        self.column = column


def _content(raw: str) -> str:
    return raw.split("#", 1)[0].rstrip()


def _fraction(text: str, line: int, column: int) -> Fraction:
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise ParseError(f"not an exact rational: {text.strip()!r}", line, column) from None


def _read_table(text: str) -> Tuple[Dict[str, Dict[str, Fraction]], Dict[str, Fraction]]:
    rows: Dict[str, Dict[str, Fraction]] = {}
    init: Dict[str, Fraction] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = _content(raw)
        if not line.strip():
            continue
        head, sep, value = line.rpartition(":")
        if not sep:
            raise ParseError("expected ': weight'", number, len(line) + 1)
        weight = _fraction(value, number, len(head) + 2)
        words = head.split()
        if words and words[0] == "init":
            if len(words) != 2:
                raise ParseError("expected 'init state : weight'", number)
            init[words[1]] = init.get(words[1], Fraction(0)) + weight
            continue
        if len(words) != 3 or words[1] != "->":
            column = raw.find(words[0]) + 1 if words else 1
            raise ParseError("expected 'state -> state : weight'", number, column)
        source, target = words[0], words[2]
        if source == target:
            column = raw.find(target, raw.find("->") + 2) + 1
            raise ParseError(f"self loop at {source!r}", number, column)
        row = rows.setdefault(source, {})
        row[target] = row.get(target, Fraction(0)) + weight
    if not init:
        raise ParseError("no 'init' lines", max(len(text.splitlines()), 1))
    return rows, init


def parse_transition_table(text: str) -> Tuple[ProbabilisticTransitionSystem, Initialization]:
    """A probabilistic system and initialization from ``q -> r : p/q`` lines."""
    rows, init = _read_table(text)
    return ProbabilisticTransitionSystem.from_table(rows), Initialization(init)


def parse_rate_table(text: str) -> CtmcModel:
    """A CTMC from ``q -> r : rate`` lines; the weights are read as rates."""
    rows, init = _read_table(text)
    return CtmcModel.from_table(rows, Initialization(init), description=text)


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


@dataclass
class RunManifest:
    """Provenance of one output file."""

    command: str
    inputs: Dict[str, str] = field(default_factory=dict)
    seed: Optional[int] = None
    precision: Optional[int] = None
    version: str = __version__
    timestamp: str = ""

    @classmethod
    def create(
        cls,
        command: str,
        inputs: Optional[Dict[str, str]] = None,
        seed: Optional[int] = None,
        precision: Optional[int] = None,
    ) -> "RunManifest":
        """A manifest stamped with the current UTC time; ``inputs`` maps names to file text."""
        hashes = {name: sha256_text(text) for name, text in (inputs or {}).items()}
        stamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
        return cls(command, hashes, seed, precision, __version__, stamp)

    def render(self) -> List[str]:
        lines = [f"# manifest command={self.command}", f"# manifest version={self.version}"]
        lines += [
            f"# manifest input={name}:{digest}"
            for name, digest in sorted(self.inputs.items())
        ]
        if self.seed is not None:
            lines.append(f"# manifest seed={self.seed}")
        if self.precision is not None:
            lines.append(f"# manifest precision={self.precision}")
        if self.timestamp:
            lines.append(f"# manifest timestamp={self.timestamp}")
        return lines

    def absorb(self, line: str) -> None:
        """Read one ``# manifest key=value`` line back."""
        key, _, value = line[len("# manifest ") :].partition("=")
        if key == "command":
            self.command = value
        elif key == "version":
            self.version = value
        elif key == "input":
            name, _, digest = value.rpartition(":")
            self.inputs[name] = digest
        elif key == "seed":
            self.seed = int(value)
        elif key == "precision":
            self.precision = int(value)
        elif key == "timestamp":
            self.timestamp = value


@dataclass
class TrajectoryFile:
    """A trajectory with its stored encoding and header."""

    trajectory: Trajectory
    encoding: TrajectorySpec
    depth: int
    precision: Optional[int] = None
    manifest: Optional[RunManifest] = None


def render_trajectory(
    trajectory: Trajectory,
    encoding: TrajectorySpec,
    depth: int,
    precision: Optional[int] = None,
    manifest: Optional[RunManifest] = None,
) -> str:
    """Header lines, then ``state<TAB>duration<TAB>bits@depth`` per stored step."""
    lines = ["# ctmcrand trajectory", f"# model {trajectory.model_hash or '-'}"]
    if trajectory.seed is not None:
        lines.append(f"# seed {trajectory.seed}")
        lines.append(f"# generator {GENERATOR}")
    if trajectory.stream is not None:
        lines.append(f"# stream {trajectory.stream}")
    if precision is not None:
        lines.append(f"# precision {precision}")
    lines.append(f"# depth {depth}")
    if manifest is not None:
        lines.extend(manifest.render())
    for i, (state, duration) in enumerate(trajectory.steps):
        bits = encoding[i][1] if i < len(encoding) else ""
        lines.append(f"{state}\t{duration.render()}\t{bits}@{len(bits)}")
    return "\n".join(lines) + "\n"


def parse_trajectory(text: str) -> TrajectoryFile:
    """Inverse of :func:`render_trajectory`."""
    header: Dict[str, str] = {}
    manifest: Optional[RunManifest] = None
    steps = []
    pairs = []
    for number, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        # Provenance lines first, then plain headers
        if raw.startswith("# manifest "):
            manifest = manifest or RunManifest(command="")
            manifest.absorb(raw)
            continue
        if raw.startswith("#"):
            key, _, value = raw[1:].strip().partition(" ")
            header[key] = value.strip()
            continue
        # One step per line
        fields = raw.split("\t")
        if len(fields) != 3:
            raise ParseError("expected state, duration and bits separated by tabs", number)
        state, duration_text, coded = fields
        try:
            duration = Duration.parse(duration_text)
        except ValueError as e:
            raise ParseError(f"bad duration: {e}", number, len(state) + 2) from None
        bits, at, count = coded.partition("@")
        column = len(state) + len(duration_text) + 3
        if not at or not count.isdigit() or int(count) != len(bits):
            raise ParseError("expected bits@depth", number, column)
        try:
            check_bits(bits)
        except ValueError as e:
            raise ParseError(str(e), number, column) from None
        steps.append((state, duration))
        pairs.append((state, bits))
    seed = int(header["seed"]) if "seed" in header else None
    stream = int(header["stream"]) if "stream" in header else None
    model_hash = header.get("model", "")
    trajectory = Trajectory(
        tuple(steps), seed=seed, model_hash="" if model_hash == "-" else model_hash, stream=stream
    )
    return TrajectoryFile(
        trajectory,
        TrajectorySpec(tuple(pairs)),
        int(header.get("depth", "0")),
        int(header["precision"]) if "precision" in header else None,
        manifest,
    )


def parse_cover(text: str) -> Dict[int, List[TrajectorySpec]]:
    """Rows of a null cover: ``k spec`` per entry; a bare ``k`` declares an empty row.

    The empty spec is written ``()``.
    """
    cover: Dict[int, List[TrajectorySpec]] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = _content(raw).strip()
        if not line:
            continue
        level, _, rest = line.partition(" ")
        if not level.isdigit():
            raise ParseError(f"expected a level, got {level!r}", number)
        row = cover.setdefault(int(level), [])
        rest = rest.strip()
        if not rest:
            continue
        try:
            row.append(EMPTY_SPEC if rest == "()" else TrajectorySpec.parse(rest))
        except ValueError as e:
            raise ParseError(str(e), number, raw.find(rest) + 1) from None
    return cover


def render_cover(cover: Dict[int, List[TrajectorySpec]]) -> str:
    lines = []
    for k in sorted(cover):
        if not cover[k]:
            lines.append(str(k))
        lines += [f"{k} {g.render() or '()'}" for g in cover[k]]
    return "\n".join(lines) + "\n"
