"""Run configuration: an ini file with [section] headers, merged as flag > file > default."""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace

from .features import FeatureConfig
from .synth import PROFILES, GeneratorProfile
from .train import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class FilterConfig:
    mode: str = "all-text"
    tau: float = 0.5
    category: str = ""
    mr_source: str = "coarse"
    taus: str = "0:1:0.05"


@dataclass(frozen=True)
class PathsConfig:
    dictionary: str = ""  # empty: the bundled synthetic dictionary
    embeddings: str = ""  # empty: hashed text encoder
    threads: int = 0  # 0: leave BLAS thread pools alone
    figures: bool = True


SECTIONS = {
    "features": FeatureConfig,
    "train": TrainConfig,
    "profile": GeneratorProfile,
    "filter": FilterConfig,
    "paths": PathsConfig,
}


@dataclass(frozen=True)
class RunConfig:
    features: FeatureConfig = field(default_factory=FeatureConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    profile: GeneratorProfile = field(default_factory=GeneratorProfile)
    filter: FilterConfig = field(default_factory=FilterConfig)
    paths: PathsConfig = field(default_factory=PathsConfig)

    def override(self, section: str, **values) -> "RunConfig":
        """Apply command-line values; ``None`` means "not given on the command line"."""
        given = {k: v for k, v in values.items() if v is not None}
        if not given:
            return self
        try:
            return replace(self, **{section: replace(getattr(self, section), **given)})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}]: {exc}") from exc


def _convert(section: str, key: str, raw: str, default):
    try:
        if isinstance(default, bool):
            value = raw.strip().lower()
            if value in ("1", "true", "yes", "on"):
                return True
            if value in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: {exc}") from exc
    return raw.strip()


def _section_values(parser, section: str, cls) -> tuple[dict, object]:
    defaults = cls()
    if section == "profile" and parser.has_option("profile", "base"):
        base = parser["profile"]["base"]
        if base not in PROFILES:
            raise ConfigError(f"[profile] base: unknown profile {base!r}")
        defaults = PROFILES[base]
    known = {f.name for f in fields(cls)}
    values = {}
    for key, raw in parser[section].items():
        if section == "profile" and key == "base":
            continue
        if key not in known:
            raise ConfigError(f"[{section}] unknown key {key!r}")
        values[key] = _convert(section, key, raw, getattr(defaults, key))
    return values, defaults


def parse_config(text: str, name: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=name)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc
    parts = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        values, defaults = _section_values(parser, section, SECTIONS[section])
        try:
            parts[section] = replace(defaults, **values)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{section}]: {exc}") from exc
    return RunConfig(**parts)


def load_config(path: str | None) -> RunConfig:
    if not path:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, path)


def parse_taus(spec: str) -> list[float]:
    """"start:stop:step" (inclusive) or a comma-separated list."""
    spec = spec.strip()
    try:
        if ":" in spec:
            start, stop, step = (float(x) for x in spec.split(":"))
            if step <= 0:
                raise ValueError("step must be positive")
            n = int(round((stop - start) / step))
            taus = [round(start + k * step, 12) for k in range(n + 1)]
        else:
            taus = [float(x) for x in spec.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad tau list {spec!r}: {exc}") from exc
    if not taus or any(not 0.0 <= t <= 1.0 for t in taus):
        raise ConfigError(f"tau values must lie in [0, 1]: {spec!r}")
    return taus


def dump_config(cfg: RunConfig) -> str:
    """The effective configuration as ini text (every key, current values)."""
    lines = []
    for section in SECTIONS:
        lines.append(f"[{section}]")
        obj = getattr(cfg, section)
        for f in fields(obj):
            value = getattr(obj, f.name)
            lines.append(f"{f.name} = {str(value).lower() if isinstance(value, bool) else value}")
        lines.append("")
    return "\n".join(lines)
