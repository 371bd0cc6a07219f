"""Configuration management for ctmcrand."""

import os
from pathlib import Path
from typing import Any, Dict, List, Optional

import appdirs
import yaml

DEFAULT_WORKING_BITS = 128
DEFAULT_MAX_BITS = 4096
DEFAULT_NODE_BUDGET = 200_000


class PrecisionConfig:
    """Working and maximum precision, in bits, of interval enclosures."""

    def __init__(
        self,
        working_bits: int = DEFAULT_WORKING_BITS,
        max_bits: int = DEFAULT_MAX_BITS,
    ) -> None:
        """Initialize precision configuration."""
        if working_bits < 1 or max_bits < 1:
            raise ValueError("precision must be a positive number of bits")
        if working_bits > max_bits:
            raise ValueError(
                f"working precision {working_bits} exceeds maximum {max_bits}"
            )
        self.working_bits = working_bits
        self.max_bits = max_bits

    def escalation(self) -> List[int]:
        """Precisions tried in order: doubling from working up to maximum."""
        steps = []
        bits = self.working_bits
        while bits < self.max_bits:
            steps.append(bits)
            bits *= 2
        steps.append(self.max_bits)
        return steps

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PrecisionConfig):
            return NotImplemented
        return (self.working_bits, self.max_bits) == (other.working_bits, other.max_bits)

    def __hash__(self) -> int:
        return hash((self.working_bits, self.max_bits))

    def __repr__(self) -> str:
        return f"PrecisionConfig(working_bits={self.working_bits}, max_bits={self.max_bits})"


class Config:
    """Application configuration."""

    def __init__(
        self,
        precision: Optional[PrecisionConfig] = None,
        node_budget: int = DEFAULT_NODE_BUDGET,
        default_depth: int = 5,
        proxy: str = "zlib-raw",
        log_level: str = "WARNING",
    ) -> None:
        """Initialize configuration."""
        self.precision = precision or PrecisionConfig()
        self.node_budget = node_budget
        self.default_depth = default_depth
        self.proxy = proxy
        self.log_level = log_level

    @classmethod
    def load(cls, path: Optional[Path] = None) -> "Config":
        """Load configuration from file or return default."""
        config_file = path or cls._get_config_file()

        data: Dict[str, Any] = {}
        if config_file.exists():
            with open(config_file, encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}

        precision = data.get("precision", {})
        return cls(
            precision=PrecisionConfig(
                working_bits=precision.get("working_bits", DEFAULT_WORKING_BITS),
                max_bits=precision.get("max_bits", DEFAULT_MAX_BITS),
            ),
            node_budget=data.get("node_budget", DEFAULT_NODE_BUDGET),
            default_depth=data.get("default_depth", 5),
            proxy=data.get("proxy", "zlib-raw"),
            log_level=data.get("log_level", "WARNING"),
        )

    def save(self, path: Optional[Path] = None) -> None:
        """Save configuration to file."""
        config_file = path or self._get_config_file()
        config_file.parent.mkdir(parents=True, exist_ok=True)

        data = {
            "precision": {
                "working_bits": self.precision.working_bits,
                "max_bits": self.precision.max_bits,
            },
            "node_budget": self.node_budget,
            "default_depth": self.default_depth,
            "proxy": self.proxy,
            "log_level": self.log_level,
        }

        with open(config_file, "w", encoding="utf-8") as f:
            yaml.dump(data, f, default_flow_style=False)

    @staticmethod
    def _get_config_file() -> Path:
        """Get the configuration file path."""
        if override := os.environ.get("CTMCRAND_CONFIG"):
            return Path(override)
        return Path(appdirs.user_config_dir("ctmcrand")) / "config.yml"
