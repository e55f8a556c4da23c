"""Run configuration: directories, thresholds and model endpoints.

Configuration files use INI syntax. One ``[qmigtax]`` section holds the run
settings and each ``[endpoint <name>]`` section declares one endpoint::

    [qmigtax]
    corpus_dir = corpus
    threshold = 0.5

    [endpoint gpt-4o]
    base_url = https://api.openai.com/v1
    context_window = 128000
    auth_env_var = OPENAI_API_KEY

Relative paths are resolved against the directory holding the file.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from .errors import ConfigError, InvalidInputError
from .gateway import MOCK_ENDPOINT, ModelEndpoint
from .ingest import LANGUAGES

CONFIG_NAME = "qmigtax.conf"
DEFAULT_SOURCE_BASE = "https://docs.quantum.ibm.com/api/qiskit/release-notes"

BUILTIN_ENDPOINTS: tuple[ModelEndpoint, ...] = (
    MOCK_ENDPOINT,
    ModelEndpoint("gpt-4o", "https://api.openai.com/v1", 128_000, auth_env_var="OPENAI_API_KEY"),
    ModelEndpoint("gpt-4o-mini", "https://api.openai.com/v1", 128_000, auth_env_var="OPENAI_API_KEY"),
    ModelEndpoint(
        "deepseek-v3", "https://api.deepseek.com/v1", 65_536, auth_env_var="DEEPSEEK_API_KEY", model="deepseek-chat"
    ),
    ModelEndpoint(
        "deepseek-r1", "https://api.deepseek.com/v1", 65_536, auth_env_var="DEEPSEEK_API_KEY", model="deepseek-reasoner"
    ),
    ModelEndpoint("gemma-3-27b-it", "http://localhost:1234/v1", 131_072),
    ModelEndpoint("deepseek-r1-distill-qwen-32b", "http://localhost:1234/v1", 32_768),
)


@dataclass
class RunConfig:
    corpus_dir: Path = Path("corpus")
    runs_dir: Path = Path("runs")
    reports_dir: Path = Path("reports")
    endpoints: list[ModelEndpoint] = field(default_factory=lambda: list(BUILTIN_ENDPOINTS))
    default_language: str = "en"
    threshold: float = 0.5
    parallelism: int = 4
    source_base: str = DEFAULT_SOURCE_BASE
    url_template: str = "{base}/{minor}"

    def __post_init__(self) -> None:
        self.corpus_dir = Path(self.corpus_dir)
        self.runs_dir = Path(self.runs_dir)
        self.reports_dir = Path(self.reports_dir)
        if not 0 < self.threshold <= 1:
            raise ConfigError(f"threshold must be in (0, 1], got {self.threshold}")
        if self.parallelism < 1:
            raise ConfigError(f"parallelism must be >= 1, got {self.parallelism}")
        if self.default_language not in LANGUAGES:
            raise ConfigError(f"unsupported language {self.default_language!r}")

    def endpoint(self, name: str) -> ModelEndpoint:
        for ep in self.endpoints:
            if ep.name == name:
                return ep
        known = ", ".join(ep.name for ep in self.endpoints)
        raise ConfigError(f"unknown endpoint {name!r} (configured: {known})")


def _resolve(base: Path, value: str) -> Path:
    p = Path(value).expanduser()
    return p if p.is_absolute() else base / p


def _endpoint_from_section(name: str, sec: configparser.SectionProxy, base: Path) -> ModelEndpoint:
    try:
        response_dir = sec.get("response_dir")
        return ModelEndpoint(
            name=name,
            base_url=sec["base_url"],
            context_window=sec.getint("context_window"),
            temperature=sec.getfloat("temperature", 0.0),
            max_retries=sec.getint("max_retries", 3),
            auth_env_var=sec.get("auth_env_var") or None,
            model=sec.get("model") or None,
            response_dir=str(_resolve(base, response_dir)) if response_dir else None,
            timeout=sec.getfloat("timeout", 120.0),
        )
    except KeyError as exc:
        raise ConfigError(f"endpoint {name!r} is missing {exc}") from exc
    except (TypeError, ValueError, InvalidInputError) as exc:
        raise ConfigError(f"endpoint {name!r}: {exc}") from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    base = path.resolve().parent

    endpoints = {ep.name: ep for ep in BUILTIN_ENDPOINTS}
    for section in parser.sections():
        if section.startswith("endpoint "):
            name = section[len("endpoint "):].strip()
            endpoints[name] = _endpoint_from_section(name, parser[section], base)

    cfg = RunConfig(endpoints=list(endpoints.values()))
    if parser.has_section("qmigtax"):
        sec = parser["qmigtax"]
        try:
            cfg = replace(
                cfg,
                corpus_dir=_resolve(base, sec.get("corpus_dir", "corpus")),
                runs_dir=_resolve(base, sec.get("runs_dir", "runs")),
                reports_dir=_resolve(base, sec.get("reports_dir", "reports")),
                default_language=sec.get("default_language", cfg.default_language),
                threshold=sec.getfloat("threshold", cfg.threshold),
                parallelism=sec.getint("parallelism", cfg.parallelism),
                source_base=sec.get("source_base", cfg.source_base),
                url_template=sec.get("url_template", cfg.url_template),
            )
        except ValueError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    return cfg


def discover_config(explicit: Optional[str] = None, cwd: Optional[Path] = None) -> RunConfig:
    """``--config`` if given, else ``./qmigtax.conf``, else built-in defaults."""
    if explicit:
        return load_config(explicit)
    local = (cwd or Path.cwd()) / CONFIG_NAME
    if local.exists():
        return load_config(local)
    return RunConfig()
