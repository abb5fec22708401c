"""Pipeline configuration: INI file with sections, overridable field by field."""

from __future__ import annotations

import configparser
import hashlib
import io
import math
import os
from dataclasses import dataclass, field, fields, replace
from importlib import resources
from pathlib import Path
from typing import Any

from .features import DEFAULT_RESCALE, DEFAULT_TARGET, RescaleSpec
from .labeling import DEFAULT_PENALTY, Objective
from .selector import LossSpec
from .solvers import parse_portfolio


class UsageError(Exception):
    """Bad flags, config values or missing upstream artifacts (exit code 2)."""


class DataContractError(Exception):
    """Input data that violates a pipeline contract (exit code 3)."""


def bundled_data() -> Path:
    return Path(str(resources.files("mapfsel") / "data"))


def _default_workers() -> int:
    return max(1, (os.cpu_count() or 2) - 1)


def _csv(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def _opt_int(value: str) -> int | None:
    return None if value.strip().lower() in ("", "none") else int(value)


def _opt_csv(value: str) -> list[str] | None:
    return None if value.strip().lower() in ("", "none", "all") else _csv(value)


def _opt(section: str, key: str, conv) -> dict:
    return {"section": section, "key": key, "conv": conv}


@dataclass
class PipelineConfig:
    maps_dir: Path = field(default_factory=lambda: bundled_data() / "maps",
                           metadata=_opt("data", "maps_dir", Path))
    scenarios_dir: Path = field(default_factory=lambda: bundled_data() / "scenarios",
                                metadata=_opt("data", "scenarios_dir", Path))
    maps: list[str] | None = field(default=None, metadata=_opt("data", "maps", _opt_csv))
    scenarios_per_map: int | None = field(default=None, metadata=_opt("data", "scenarios_per_map", _opt_int))

    portfolio: list[str] = field(default_factory=lambda: ["cbs", "ecbs:1.1", "pp", "pibt"],
                                 metadata=_opt("sweep", "portfolio", _csv))
    time_limit: float = field(default=120.0, metadata=_opt("sweep", "time_limit", float))
    agent_start: int = field(default=10, metadata=_opt("sweep", "agent_start", int))
    agent_step: int = field(default=10, metadata=_opt("sweep", "agent_step", int))
    stop_count: int = field(default=2, metadata=_opt("sweep", "stop_count", int))
    max_agents: int | None = field(default=None, metadata=_opt("sweep", "max_agents", _opt_int))
    budget_mode: str = field(default="wall", metadata=_opt("sweep", "budget_mode", str))
    expansion_budget: int = field(default=200_000, metadata=_opt("sweep", "expansion_budget", int))
    workers: int = field(default_factory=_default_workers, metadata=_opt("sweep", "workers", int))
    seed: int = field(default=0, metadata=_opt("sweep", "seed", int))

    objectives: list[str] = field(default_factory=lambda: ["score:0.001", "bound:1.1"],
                                  metadata=_opt("labels", "objectives", _csv))
    penalty: float = field(default=DEFAULT_PENALTY, metadata=_opt("labels", "penalty", float))

    rescale: str = field(default=DEFAULT_RESCALE, metadata=_opt("features", "rescale", str))
    target: int = field(default=DEFAULT_TARGET, metadata=_opt("features", "target", int))
    # which split the normalisation maxima are fitted on: "train" or "all"
    stats_scope: str = field(default="train", metadata=_opt("features", "stats_scope", str))

    loss: str = field(default="CE", metadata=_opt("train", "loss", str))
    learning_rate: float = field(default=0.05, metadata=_opt("train", "learning_rate", float))
    epochs: int = field(default=200, metadata=_opt("train", "epochs", int))
    batch_size: int = field(default=64, metadata=_opt("train", "batch_size", int))
    train_seed: int = field(default=0, metadata=_opt("train", "seed", int))
    augment: bool = field(default=False, metadata=_opt("train", "augment", _bool))

    fractions: tuple[float, float, float] = field(
        default=(0.7, 0.1, 0.2),
        metadata=_opt("split", "fractions", lambda v: tuple(float(x) for x in _csv(v))))
    split_seed: int = field(default=0, metadata=_opt("split", "seed", int))

    output_dir: Path = field(default=Path("mapfsel-out"), metadata=_opt("output", "dir", Path))

    # -- derived / validated views ------------------------------------------

    def validate(self) -> "PipelineConfig":
        try:
            parse_portfolio(self.portfolio)
        except ValueError as exc:
            raise UsageError(f"portfolio: {exc}") from None
        self.objective_specs()
        self.loss_spec()
        self.rescale_spec()
        if len(self.fractions) != 3 or any(f < 0 for f in self.fractions) \
                or abs(sum(self.fractions) - 1.0) > 1e-9:
            raise UsageError(f"split fractions must be three nonnegative numbers summing to 1, got {self.fractions}")
        if self.time_limit <= 0:
            raise UsageError("time_limit must be > 0")
        if self.agent_step < 1 or self.agent_start < 1:
            raise UsageError("agent_start and agent_step must be >= 1")
        if self.budget_mode not in ("wall", "expansions"):
            raise UsageError(f"budget_mode must be 'wall' or 'expansions', got {self.budget_mode!r}")
        if self.stats_scope not in ("train", "all"):
            raise UsageError(f"stats_scope must be 'train' or 'all', got {self.stats_scope!r}")
        if self.workers < 1:
            raise UsageError("workers must be >= 1")
        if self.penalty <= 0:
            raise UsageError("penalty must be > 0")
        return self

    def portfolio_specs(self):
        return parse_portfolio(self.portfolio)

    def solver_ids(self) -> list[str]:
        return [s.id for s in self.portfolio_specs()]

    def objective_specs(self) -> list[Objective]:
        if not self.objectives:
            raise UsageError("at least one objective is required")
        out = []
        for text in self.objectives:
            try:
                out.append(Objective.parse(text))
            except ValueError as exc:
                raise UsageError(f"{exc}; valid forms are 'score:<w>' with w >= 0 "
                                 f"and 'bound:<b>' with b >= 1") from None
        return out

    def loss_spec(self) -> LossSpec:
        try:
            return LossSpec(self.loss)
        except ValueError:
            raise UsageError(f"unknown loss {self.loss!r}; valid losses are CE, BCE, REG") from None

    def rescale_spec(self, methods: str | None = None) -> RescaleSpec:
        try:
            return RescaleSpec.parse(methods or self.rescale, self.target)
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    def fingerprint(self, *names: str) -> str:
        """Stable hash of the named fields; used to detect completed stages."""
        payload = repr([(n, _plain(getattr(self, n))) for n in names])
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _plain(value: Any) -> Any:
    if isinstance(value, Path):
        return str(value.resolve())
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def load_config(path: Path | None, overrides: dict[str, Any] | None = None) -> PipelineConfig:
    """Read an INI file (if given) and apply non-None overrides."""
    cfg = PipelineConfig()
    values: dict[str, Any] = {}
    if path is not None:
        parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except (OSError, configparser.Error) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        known = {(f.metadata["section"], f.metadata["key"]): f for f in fields(PipelineConfig)}
        for section in parser.sections():
            for key, raw in parser.items(section):
                f = known.get((section, key))
                if f is None:
                    raise UsageError(f"{path}: unknown option [{section}] {key}")
                try:
                    values[f.name] = f.metadata["conv"](raw)
                except ValueError as exc:
                    raise UsageError(f"{path}: [{section}] {key}: {exc}") from None
        base = Path(path).parent
        for name in ("maps_dir", "scenarios_dir", "output_dir"):
            if name in values and not Path(values[name]).is_absolute():
                values[name] = base / values[name]
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    return replace(cfg, **values).validate()


def config_text(cfg: PipelineConfig) -> str:
    parser = configparser.ConfigParser()
    for f in fields(PipelineConfig):
        section, key = f.metadata["section"], f.metadata["key"]
        if not parser.has_section(section):
            parser.add_section(section)
        value = getattr(cfg, f.name)
        if value is None:
            text = "none"
        elif isinstance(value, (list, tuple)):
            text = ", ".join(str(v) for v in value)
        else:
            text = str(value)
        parser.set(section, key, text)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def split_of(map_name: str, scenario_id: str, seed: int,
             fractions: tuple[float, float, float] = (0.7, 0.1, 0.2)) -> str:
    """Deterministic train/val/test assignment for one scenario (all of its agent tiers)."""
    digest = hashlib.sha256(f"{seed}\x00{map_name}\x00{scenario_id}".encode()).digest()
    u = int.from_bytes(digest[:8], "big") / 2.0 ** 64
    if u < fractions[0]:
        return "train"
    if u < fractions[0] + fractions[1] and not math.isclose(fractions[1], 0.0):
        return "val"
    return "test" if fractions[2] > 0 else ("val" if fractions[1] > 0 else "train")
