"""Run configuration: every module's settings in one JSON document.

The file has one object per section (``corpus``, ``gan``, ``lineage``,
``analyzer``, ``stats``). Every field has a default, so ``{}`` is a valid
configuration; unknown sections or keys are errors. The configuration hash
is recorded in every lineage manifest.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .acoustics import AnalyzerConfig
from .corpus import CorpusSpec
from .errors import ConfigError
from .gan import GanConfig
from .lineage import LineageConfig


@dataclass(frozen=True)
class LineageSettings:
    n_generations: int = 4
    n_generate: int = 1000
    master_seed: int = 0
    steps_per_generation: tuple | None = None
    record_wallclock: bool = False

    def __post_init__(self):
        if self.steps_per_generation is not None:
            object.__setattr__(self, "steps_per_generation", tuple(int(s) for s in self.steps_per_generation))


@dataclass(frozen=True)
class StatsOptions:
    cap_tv: int | None = None
    kde_points: int = 512
    duration_bins: int = 5
    contrast_adjust: str = "bonferroni"
    threads: int = 1

    def validate(self) -> None:
        if self.cap_tv is not None and self.cap_tv < 0:
            raise ConfigError("stats.cap_tv must be >= 0")
        if self.kde_points < 2:
            raise ConfigError("stats.kde_points must be >= 2")
        if self.duration_bins < 1:
            raise ConfigError("stats.duration_bins must be >= 1")
        if self.contrast_adjust not in ("none", "bonferroni"):
            raise ConfigError("stats.contrast_adjust must be 'none' or 'bonferroni'")
        if self.threads < 1:
            raise ConfigError("stats.threads must be >= 1")


SECTIONS = {"corpus": CorpusSpec, "gan": GanConfig, "lineage": LineageSettings,
            "analyzer": AnalyzerConfig, "stats": StatsOptions}


@dataclass(frozen=True)
class RunConfig:
    corpus: CorpusSpec = field(default_factory=CorpusSpec)
    gan: GanConfig = field(default_factory=GanConfig)
    lineage: LineageSettings = field(default_factory=LineageSettings)
    analyzer: AnalyzerConfig = field(default_factory=AnalyzerConfig)
    stats: StatsOptions = field(default_factory=StatsOptions)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = sorted(set(data) - set(SECTIONS))
        if unknown:
            raise ConfigError(f"unknown configuration sections: {unknown}")
        parts = {}
        for name, klass in SECTIONS.items():
            parts[name] = _build_section(name, klass, data.get(name, {}))
        cfg = cls(**parts)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        return {name: _plain(dataclasses.asdict(getattr(self, name))) for name in SECTIONS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def validate(self) -> None:
        try:
            self.corpus.validate()
            self.gan.validate()
            self.analyzer.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        self.stats.validate()
        self.lineage_config().validate()

    def lineage_config(self) -> LineageConfig:
        lin = self.lineage
        return LineageConfig(gan=self.gan, n_generations=lin.n_generations, n_generate=lin.n_generate,
                             master_seed=lin.master_seed, steps_per_generation=lin.steps_per_generation,
                             record_wallclock=lin.record_wallclock)

    def replace(self, section: str, **changes) -> "RunConfig":
        """Copy with some fields of one section changed (re-validated)."""
        new = dataclasses.replace(self, **{section: dataclasses.replace(getattr(self, section), **changes)})
        new.validate()
        return new


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def _check_value(section, key, default, value):
    where = f"{section}.{key}"
    if default is None or value is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where} must be an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where} must be a list")
        return tuple(tuple(x) if isinstance(x, list) else x for x in value)
    return value


def _build_section(name, klass, values):
    if not isinstance(values, dict):
        raise ConfigError(f"section {name!r} must be a JSON object")
    fields = {f.name: f for f in dataclasses.fields(klass)}
    unknown = sorted(set(values) - set(fields))
    if unknown:
        raise ConfigError(f"unknown keys in section {name!r}: {unknown}")
    defaults = klass()
    kwargs = {k: _check_value(name, k, getattr(defaults, k), v) for k, v in values.items()}
    try:
        return klass(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"section {name!r}: {exc}") from exc


def parse_config(text: str) -> RunConfig:
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"configuration is not valid JSON: {exc}") from exc
    return RunConfig.from_dict(data)


def load_config(path=None) -> RunConfig:
    """Read a configuration file; ``None`` gives the defaults. IO errors propagate as OSError."""
    if path is None:
        return RunConfig()
    return parse_config(Path(path).read_text())
