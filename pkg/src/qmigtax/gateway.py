"""Model access: send prompt bundles to chat-completion endpoints and log runs.

Each call to :func:`generate` creates exactly one run directory::

    runs/<model>/<target-version>/<timestamp>/
        system.txt  user.txt  response.md  log.json

``response.md`` exists only for successful runs. Credentials are read from
the environment variable named by the endpoint and never written to disk.
"""

from __future__ import annotations

import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping, Optional, Protocol, Sequence, Union

import requests

from .errors import (
    ConfigError,
    ContextExceededError,
    EmptyResponseError,
    InvalidInputError,
    ReplayError,
    TransportError,
)
from .parser import HEADER_ROW, SEPARATOR_ROW
from .prompts import PromptBundle, safe_name

logger = logging.getLogger(__name__)

OUTCOMES = ("ok", "transport-error", "over-budget", "empty-response")
LOG_NAME = "log.json"


@dataclass(frozen=True)
class ModelEndpoint:
    name: str
    base_url: str
    context_window: int
    temperature: float = 0.0
    max_retries: int = 3
    auth_env_var: Optional[str] = None
    model: Optional[str] = None
    response_dir: Optional[str] = None
    timeout: float = 120.0

    def __post_init__(self) -> None:
        if not self.name:
            raise InvalidInputError("endpoint needs a name")
        if int(self.context_window) <= 0:
            raise InvalidInputError(f"{self.name}: context window must be positive")
        if self.temperature < 0:
            raise InvalidInputError(f"{self.name}: temperature must be >= 0")
        if self.max_retries < 1:
            raise InvalidInputError(f"{self.name}: max_retries must be >= 1")

    @property
    def is_mock(self) -> bool:
        return self.base_url.startswith("mock:")

    @property
    def wire_model(self) -> str:
        return self.model or self.name


MOCK_ENDPOINT = ModelEndpoint("mock", "mock://", 32_768)


@dataclass
class GenerationLog:
    model: str
    version: str
    prompt_ref: str
    raw_response: str
    started_at: str
    finished_at: str
    attempt: int
    outcome: str
    endpoint_url: str = ""
    error: str = ""
    path: Optional[Path] = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.outcome not in OUTCOMES:
            raise InvalidInputError(f"unknown outcome {self.outcome!r}")
        if self.outcome == "ok" and not self.raw_response.strip():
            raise InvalidInputError("ok outcome needs a non-empty response")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("path")
        return d


# --------------------------------------------------------------------------
# transports
# --------------------------------------------------------------------------


class ChatTransport(Protocol):
    def complete(self, endpoint: ModelEndpoint, bundle: PromptBundle, credential: Optional[str]) -> str: ...


class HttpChatTransport:
    """OpenAI-style ``POST {base_url}/chat/completions``."""

    def __init__(self, session: Optional[requests.Session] = None) -> None:
        self.session = session or requests.Session()

    def complete(self, endpoint: ModelEndpoint, bundle: PromptBundle, credential: Optional[str]) -> str:
        url = endpoint.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if credential:
            headers["Authorization"] = f"Bearer {credential}"
        payload = {
            "model": endpoint.wire_model,
            "temperature": endpoint.temperature,
            "messages": [
                {"role": "system", "content": bundle.system_text},
                {"role": "user", "content": bundle.user_text},
            ],
        }
        try:
            resp = self.session.post(url, json=payload, headers=headers, timeout=endpoint.timeout)
        except (requests.ConnectionError, requests.Timeout) as exc:
            raise TransportError(f"{url}: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(f"{url} answered {resp.status_code}")
        if resp.status_code >= 400:
            raise TransportError(f"{url} answered {resp.status_code}: {resp.text[:200]}", retryable=False)
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"{url} returned an unexpected payload", retryable=False) from exc
        return content or ""


Responder = Union[str, Mapping[str, str], Callable[[PromptBundle], str], None]


class MockTransport:
    """Offline stand-in for a model.

    ``responses`` may be a fixed string, a mapping from target version to
    text, or a callable taking the bundle. Without one, a directory of
    ``<version>.md`` files is consulted, and failing that the example rows
    embedded in the system prompt are echoed back as a table.
    """

    def __init__(self, responses: Responder = None) -> None:
        self.responses = responses
        self.calls = 0

    def complete(self, endpoint: ModelEndpoint, bundle: PromptBundle, credential: Optional[str]) -> str:
        self.calls += 1
        r = self.responses
        if callable(r):
            return r(bundle)
        if isinstance(r, str):
            return r
        if isinstance(r, Mapping):
            return r.get(bundle.version, "")
        if endpoint.response_dir:
            path = Path(endpoint.response_dir) / f"{bundle.version}.md"
            if path.exists():
                return path.read_bytes().decode("utf-8")
        return "\n".join([HEADER_ROW, SEPARATOR_ROW, *bundle.shots]) + "\n"


# --------------------------------------------------------------------------
# generate / replay
# --------------------------------------------------------------------------


def _stamp(now: datetime) -> str:
    return now.strftime("%Y%m%dT%H%M%S.%fZ")


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_bytes(text.encode("utf-8"))
    tmp.replace(path)


def _new_run_dir(runs_dir, model: str, version: str, now: datetime) -> Path:
    parent = Path(runs_dir) / safe_name(model) / version
    parent.mkdir(parents=True, exist_ok=True)
    base = _stamp(now)
    for n in range(1000):
        candidate = parent / (base if n == 0 else f"{base}-{n}")
        try:
            candidate.mkdir()
            return candidate
        except FileExistsError:
            continue
    raise ConfigError(f"could not allocate a run directory under {parent}")


def _utc() -> datetime:
    return datetime.now(timezone.utc)


def _credential(endpoint: ModelEndpoint) -> Optional[str]:
    if endpoint.is_mock or not endpoint.auth_env_var:
        return None
    value = os.environ.get(endpoint.auth_env_var)
    if not value:
        raise ConfigError(
            f"endpoint {endpoint.name!r} needs a credential in ${endpoint.auth_env_var}, which is not set"
        )
    return value


def generate(
    bundle: PromptBundle,
    endpoint: ModelEndpoint,
    runs_dir,
    *,
    transport: Optional[ChatTransport] = None,
    sleep: Callable[[float], None] = time.sleep,
    backoff: float = 1.0,
) -> tuple[str, GenerationLog]:
    """Send ``bundle`` to ``endpoint`` and log the exchange.

    A missing credential is rejected before anything touches the disk or
    the network. Every other call, successful or not, leaves one log.
    Transport failures are retried up to ``endpoint.max_retries`` attempts
    with exponential backoff starting at ``backoff`` seconds.
    """
    credential = _credential(endpoint)
    if transport is None:
        transport = MockTransport() if endpoint.is_mock else HttpChatTransport()

    started = _utc()
    run_dir = _new_run_dir(runs_dir, endpoint.name, bundle.version, started)
    _write_atomic(run_dir / "system.txt", bundle.system_text)
    _write_atomic(run_dir / "user.txt", bundle.user_text)

    def finish(outcome: str, text: str, attempt: int, error: str = "") -> GenerationLog:
        log = GenerationLog(
            model=endpoint.name,
            version=bundle.version,
            prompt_ref=str(run_dir),
            raw_response=text,
            started_at=started.isoformat(),
            finished_at=_utc().isoformat(),
            attempt=attempt,
            outcome=outcome,
            endpoint_url=endpoint.base_url,
            error=error,
            path=run_dir / LOG_NAME,
        )
        if outcome == "ok":
            _write_atomic(run_dir / "response.md", text)
        _write_atomic(run_dir / LOG_NAME, json.dumps(log.to_dict(), indent=2, sort_keys=True) + "\n")
        return log

    if bundle.token_estimate > endpoint.context_window:
        exc = ContextExceededError(bundle.token_estimate, endpoint.context_window)
        finish("over-budget", "", 0, str(exc))
        raise exc

    text = ""
    for attempt in range(1, endpoint.max_retries + 1):
        try:
            text = transport.complete(endpoint, bundle, credential)
            break
        except TransportError as exc:
            if not exc.retryable or attempt == endpoint.max_retries:
                finish("transport-error", "", attempt, str(exc))
                raise
            delay = backoff * 2 ** (attempt - 1)
            logger.warning("%s attempt %d failed (%s); retrying in %.1fs", endpoint.name, attempt, exc, delay)
            sleep(delay)

    if not text or not text.strip():
        finish("empty-response", text or "", attempt, "model returned an empty response")
        raise EmptyResponseError(f"{endpoint.name} returned an empty response for {bundle.version}")
    log = finish("ok", text, attempt)
    return text, log


def load_log(log_path) -> GenerationLog:
    path = Path(log_path)
    if path.is_dir():
        path = path / LOG_NAME
    if not path.exists():
        raise ReplayError(f"no generation log at {path}")
    try:
        data = json.loads(path.read_bytes().decode("utf-8"))
        return GenerationLog(**data, path=path)
    except (ValueError, TypeError, InvalidInputError) as exc:
        raise ReplayError(f"unreadable generation log {path}: {exc}") from exc


def replay(log_path) -> str:
    """The raw response recorded by a successful run, byte for byte."""
    log = load_log(log_path)
    if log.outcome != "ok":
        raise ReplayError(f"run at {log.path} ended with outcome {log.outcome!r}; nothing to replay")
    return log.raw_response


def list_runs(runs_dir, version: str) -> list[Path]:
    """Every log for ``version`` across all models, oldest first per model."""
    return sorted(Path(runs_dir).glob(f"*/{version}/*/{LOG_NAME}"))


@dataclass
class GenerationOutcome:
    bundle: PromptBundle
    endpoint: ModelEndpoint
    text: Optional[str] = None
    log: Optional[GenerationLog] = None
    error: Optional[BaseException] = None


def generate_many(
    jobs: Sequence[tuple[PromptBundle, ModelEndpoint]],
    runs_dir,
    *,
    parallelism: int = 4,
    transport: Optional[ChatTransport] = None,
    **kwargs,
) -> list[GenerationOutcome]:
    """Run several generations with at most ``parallelism`` in flight.

    Failures are captured per job instead of aborting the batch.
    """
    if parallelism < 1:
        raise InvalidInputError("parallelism must be >= 1")

    def run(job):
        bundle, endpoint = job
        out = GenerationOutcome(bundle, endpoint)
        try:
            out.text, out.log = generate(bundle, endpoint, runs_dir, transport=transport, **kwargs)
        except Exception as exc:  # noqa: BLE001 - reported per job
            out.error = exc
        return out

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(run, jobs))
