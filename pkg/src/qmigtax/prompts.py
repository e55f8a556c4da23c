"""Prompt assembly: system task description and user message with the notes.

Prompt wording is shipped as package data (``data/system.<lang>.txt`` and
``data/user.<lang>.txt``) and versioned by ``TEMPLATE_VERSION``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from string import Template
from typing import TYPE_CHECKING, Optional, Sequence, Union

from .errors import ContextExceededError, InvalidInputError, InvalidSchemaError
from .ingest import ReleaseDoc, Tokenizer, estimate_tokens
from .model import TABLE_COLUMNS, Scenario, canonical_version
from .parser import HEADER_ROW, SEPARATOR_ROW, parse_markdown, render_row

if TYPE_CHECKING:
    from .gateway import ModelEndpoint

TEMPLATE_VERSION = "1"
DEFAULT_RESERVE = 4096
FENCE_TAG = "release-notes"

DEFAULT_GUIDELINES: tuple[str, ...] = (
    "Write one row per migration scenario; never group several changes into one row.",
    "Keep each row on a single physical line and write line breaks inside code cells as <br>.",
    "Do not repeat a scenario that already has a row.",
)

Shot = Union[Scenario, str]


def _template(kind: str, language: str) -> Template:
    if language not in ("en", "es"):
        raise InvalidInputError(f"no prompt template for language {language!r}")
    text = resources.files("qmigtax").joinpath("data", f"{kind}.{language}.txt").read_text("utf-8")
    return Template(text)


def load_one_shot() -> Scenario:
    """The shipped one-shot row (a 0.45.0 -> 0.46.0 deprecation scenario)."""
    text = resources.files("qmigtax").joinpath("data", "one_shot.md").read_text("utf-8")
    tax, _ = parse_markdown(text)
    return tax.scenarios[0]


def _render_shot(shot: Shot) -> str:
    return render_row(shot) if isinstance(shot, Scenario) else shot.strip()


def _table(rows: Sequence[str]) -> str:
    return "\n".join([HEADER_ROW, SEPARATOR_ROW, *rows])


def build_system_prompt(
    schema: Sequence[str] = TABLE_COLUMNS,
    guidelines: Sequence[str] = DEFAULT_GUIDELINES,
    shots: Sequence[Shot] = (),
    language: str = "en",
) -> str:
    if tuple(schema) != TABLE_COLUMNS:
        raise InvalidSchemaError(f"schema must be the nine taxonomy columns in order, got {list(schema)}")
    guide = ""
    if guidelines:
        title = "Guidelines:" if language == "en" else "Pautas:"
        guide = "\n" + title + "\n" + "\n".join(f"- {g.strip()}" for g in guidelines) + "\n"
    examples = ""
    if shots:
        title = "Example rows in the required format:" if language == "en" else "Filas de ejemplo en el formato requerido:"
        examples = "\n" + title + "\n\n" + _table([_render_shot(s) for s in shots]) + "\n"
    text = _template("system", language).substitute(
        header=HEADER_ROW, separator=SEPARATOR_ROW, guidelines=guide, examples=examples
    )
    return re.sub(r"\n{3,}", "\n\n", text).rstrip("\n") + "\n"


def _fence_for(body: str) -> str:
    longest = max((len(m) for m in re.findall(r"`+", body)), default=0)
    return "`" * max(3, longest + 1)


def build_user_prompt(doc: ReleaseDoc, one_shot: Optional[Shot] = None, language: Optional[str] = None) -> str:
    """Framing text, optional one-shot row, then the notes body inside a fence.

    The fence is one backtick longer than any backtick run in the body, so
    ``extract_body`` recovers the body byte for byte.
    """
    if not doc.body:
        raise InvalidInputError("release notes body is empty")
    language = language or doc.language
    shot = ""
    if one_shot:
        intro = "One example row in the required format:" if language == "en" else "Una fila de ejemplo en el formato requerido:"
        shot = "\n" + intro + "\n\n" + _table([_render_shot(one_shot)]) + "\n"
    framing = _template("user", language).substitute(version=doc.version, one_shot=shot)
    fence = _fence_for(doc.body)
    return f"{framing}{fence}{FENCE_TAG}\n{doc.body}\n{fence}\n"


_OPEN_FENCE_RE = re.compile(r"^(`{3,})" + re.escape(FENCE_TAG) + r"\n", re.MULTILINE)


def extract_body(user_prompt: str) -> str:
    m = _OPEN_FENCE_RE.search(user_prompt)
    if m is None:
        raise InvalidInputError("prompt has no release-notes fence")
    close = "\n" + m.group(1) + "\n"
    end = user_prompt.find(close, m.end())
    if end < 0:
        raise InvalidInputError("release-notes fence is not closed")
    return user_prompt[m.end():end]


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str
    token_estimate: int
    endpoint_context: int
    version: str
    language: str = "en"
    shots: tuple[str, ...] = ()
    reserve: int = DEFAULT_RESERVE
    endpoint_name: str = ""
    template_version: str = TEMPLATE_VERSION
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        if not self.system_text.strip() or not self.user_text.strip():
            raise InvalidInputError("system and user prompt must both be non-empty")
        if self.token_estimate > self.endpoint_context:
            raise ContextExceededError(self.token_estimate, self.endpoint_context)


def assemble(
    system_text: str,
    user_text: str,
    endpoint: "ModelEndpoint",
    version: str,
    *,
    language: str = "en",
    shots: Sequence[Shot] = (),
    reserve: int = DEFAULT_RESERVE,
    tokenizer: Optional[Tokenizer] = None,
) -> PromptBundle:
    """Check the prompt plus a response reserve against the endpoint window."""
    if endpoint.context_window <= 0:
        raise InvalidInputError("endpoint context window must be positive")
    if not system_text or not system_text.strip():
        raise InvalidInputError("system prompt is empty")
    if not user_text or not user_text.strip():
        raise InvalidInputError("user prompt is empty")
    needed = estimate_tokens(system_text, tokenizer) + estimate_tokens(user_text, tokenizer) + reserve
    if needed > endpoint.context_window:
        raise ContextExceededError(needed, endpoint.context_window)
    return PromptBundle(
        system_text=system_text,
        user_text=user_text,
        token_estimate=needed,
        endpoint_context=endpoint.context_window,
        version=canonical_version(version),
        language=language,
        shots=tuple(_render_shot(s) for s in shots),
        reserve=reserve,
        endpoint_name=endpoint.name,
    )


def build_bundle(
    doc: ReleaseDoc,
    endpoint: "ModelEndpoint",
    *,
    one_shot: Optional[Shot] = None,
    shots: Optional[Sequence[Shot]] = None,
    guidelines: Sequence[str] = DEFAULT_GUIDELINES,
    language: Optional[str] = None,
    reserve: int = DEFAULT_RESERVE,
) -> PromptBundle:
    """Full prompt stage for one document, using the shipped one-shot row by default."""
    language = language or doc.language
    if one_shot is None:
        one_shot = load_one_shot()
    if shots is None:
        shots = [one_shot] if one_shot else []
    system = build_system_prompt(TABLE_COLUMNS, guidelines, shots, language)
    user = build_user_prompt(doc, one_shot, language)
    bundle = assemble(system, user, endpoint, doc.version, language=language, shots=shots, reserve=reserve)
    bundle.meta.update(source_checksum=doc.checksum, source=doc.source)
    return bundle


# --------------------------------------------------------------------------
# on-disk form: runs/<model>/<version>/{system.txt,user.txt,bundle.json}
# --------------------------------------------------------------------------


def safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", name).strip("_") or "model"


def bundle_dir(runs_dir, model: str, version: str) -> Path:
    return Path(runs_dir) / safe_name(model) / canonical_version(version)


def _bundle_meta(bundle: PromptBundle) -> dict:
    return {
        "version": bundle.version,
        "language": bundle.language,
        "token_estimate": bundle.token_estimate,
        "endpoint_context": bundle.endpoint_context,
        "endpoint_name": bundle.endpoint_name,
        "reserve": bundle.reserve,
        "template_version": bundle.template_version,
        "shots": list(bundle.shots),
        "meta": bundle.meta,
    }


def write_bundle(bundle: PromptBundle, directory) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, data in (
        ("system.txt", bundle.system_text),
        ("user.txt", bundle.user_text),
        ("bundle.json", json.dumps(_bundle_meta(bundle), indent=2, sort_keys=True) + "\n"),
    ):
        tmp = directory / f".{name}.tmp"
        tmp.write_bytes(data.encode("utf-8"))
        tmp.replace(directory / name)
    return directory


def read_bundle(directory) -> PromptBundle:
    directory = Path(directory)
    meta = json.loads((directory / "bundle.json").read_text("utf-8"))
    bundle = PromptBundle(
        system_text=(directory / "system.txt").read_bytes().decode("utf-8"),
        user_text=(directory / "user.txt").read_bytes().decode("utf-8"),
        token_estimate=meta["token_estimate"],
        endpoint_context=meta["endpoint_context"],
        version=meta["version"],
        language=meta["language"],
        shots=tuple(meta.get("shots", ())),
        reserve=meta.get("reserve", DEFAULT_RESERVE),
        endpoint_name=meta.get("endpoint_name", ""),
        template_version=meta.get("template_version", TEMPLATE_VERSION),
    )
    bundle.meta.update(meta.get("meta", {}))
    return bundle
