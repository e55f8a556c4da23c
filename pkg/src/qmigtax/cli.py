"""Command-line entry point.

Subcommands::

  qmigtax fetch      download (or import with --from) release notes into the corpus
  qmigtax verify     check a corpus document against golden sentinel lines
  qmigtax tokens     token size distribution over the corpus
  qmigtax prompt     build and store the prompt bundle for one version
  qmigtax generate   send prompt bundles to an endpoint (mock works offline)
  qmigtax parse      markdown table or run log -> taxonomy record
  qmigtax validate   report schema violations in a markdown table or record
  qmigtax compare    match a manual taxonomy against an automatic one
  qmigtax merge      unify two taxonomies
  qmigtax report     render a stored comparison record

Exit status: 0 success, 1 validation or data errors, 2 usage errors,
3 transport or configuration errors. Files receive machine output;
standard output gets human summaries.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .config import RunConfig, discover_config
from .diff import compare, merge, parse_report, render_report, serialize_report
from .errors import (
    ConfigError,
    EmptyResponseError,
    QmigtaxError,
    ReplayError,
    TransportError,
    UnknownVersionError,
)
from .gateway import LOG_NAME, generate_many, load_log, replay
from .ingest import (
    CorpusStore,
    fetch_release_notes,
    load_release_notes,
    size_distribution,
    verify_extraction,
)
from .model import Provenance, Taxonomy, VersionFlow, canonical_version
from .parser import (
    errors_only,
    parse_markdown,
    parse_record,
    record_filename,
    serialize_markdown,
    serialize_record,
    validate,
    validate_markdown,
)
from .prompts import DEFAULT_GUIDELINES, DEFAULT_RESERVE, build_bundle, bundle_dir, safe_name, write_bundle

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_TRANSPORT = 0, 1, 2, 3

log = logging.getLogger("qmigtax")

_ENV_ERRORS = (ConfigError, TransportError, UnknownVersionError, EmptyResponseError, ReplayError)


class UsageError(QmigtaxError):
    pass


# --------------------------------------------------------------------------
# helpers
# --------------------------------------------------------------------------


def _say(msg: str = "") -> None:
    print(msg)


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp")
    tmp.write_bytes(text.encode("utf-8"))
    tmp.replace(path)
    return path


def _settings(ns: argparse.Namespace) -> RunConfig:
    cfg = discover_config(getattr(ns, "config", None))
    if getattr(ns, "corpus", None):
        cfg.corpus_dir = Path(ns.corpus)
    if getattr(ns, "runs", None):
        cfg.runs_dir = Path(ns.runs)
    if getattr(ns, "reports", None):
        cfg.reports_dir = Path(ns.reports)
    if getattr(ns, "lang", None):
        cfg.default_language = ns.lang
    if getattr(ns, "threshold", None) is not None:
        if not 0 < ns.threshold <= 1:
            raise UsageError(f"--threshold must be in (0, 1], got {ns.threshold}")
        cfg.threshold = ns.threshold
    return cfg


def _endpoint_name(ns: argparse.Namespace) -> str:
    name = getattr(ns, "endpoint", None)
    if not name:
        raise UsageError("--endpoint is required for this subcommand")
    return name


def _print_violations(violations) -> None:
    for v in violations:
        _say(f"  {v}")


def _read_text(path: Path) -> str:
    if not path.exists():
        raise UsageError(f"no such file: {path}")
    return path.read_bytes().decode("utf-8")


def load_taxonomy(path, *, flow: Optional[VersionFlow] = None, model: Optional[str] = None):
    """Load a taxonomy from a record, a markdown table, or a generation run.

    Returns ``(taxonomy, violations)``; records carry no parse violations.
    """
    path = Path(path)
    if path.is_dir() or path.name == LOG_NAME:
        run_log = load_log(path)
        text = replay(path)
        prov = Provenance.model(model or run_log.model)
        return parse_markdown(text, flow=flow, provenance=prov)
    text = _read_text(path)
    if text.lstrip().startswith("{"):
        return parse_record(text), []
    prov = Provenance.model(model) if model else Provenance.manual()
    return parse_markdown(text, flow=flow, provenance=prov)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_fetch(ns, cfg: RunConfig) -> int:
    store = CorpusStore(cfg.corpus_dir)
    lang = cfg.default_language
    versions = [canonical_version(v) for v in ns.version]
    if ns.source_file:
        if len(versions) != 1:
            raise UsageError("--from imports exactly one --version")
        doc = load_release_notes(ns.source_file, versions[0], lang, kind=ns.kind)
        store.write(doc)
        docs = [doc]
    elif getattr(ns, "offline", False):
        docs = []
        for v in versions:
            if not store.body_path(v, lang).exists():
                raise ConfigError(f"--offline: {v} ({lang}) is not in the corpus at {cfg.corpus_dir}")
            docs.append(store.read(v, lang))
    else:
        base = ns.source_base or cfg.source_base

        def one(v):
            return fetch_release_notes(v, lang, base, store=store, kind=ns.kind, url_template=cfg.url_template)

        with ThreadPoolExecutor(max_workers=cfg.parallelism) as pool:
            docs = list(pool.map(one, versions))
    for doc in docs:
        _say(f"{doc.version} {doc.language}: {len(doc.body)} chars, ~{doc.token_estimate} tokens, sha256 {doc.checksum[:12]}")
    return EXIT_OK


def cmd_verify(ns, cfg: RunConfig) -> int:
    doc = CorpusStore(cfg.corpus_dir).read(canonical_version(ns.version), cfg.default_language)
    golden = [
        ln.strip()
        for ln in _read_text(Path(ns.golden)).splitlines()
        if ln.strip() and not ln.lstrip().startswith("#")
    ]
    report = verify_extraction(doc, golden)
    _say(f"{doc.version} {doc.language}: {'PASS' if report.passed else 'FAIL'} ({len(golden)} sentinels)")
    for s in report.missing_sentinels:
        _say(f"  missing: {s}")
    for note in report.extra_notes:
        _say(f"  note: {note}")
    return EXIT_OK if report.passed else EXIT_INVALID


def cmd_tokens(ns, cfg: RunConfig) -> int:
    store = CorpusStore(cfg.corpus_dir)
    versions = [canonical_version(v) for v in ns.version] if ns.version else None
    docs = store.load_all(cfg.default_language, versions)
    if not docs:
        raise UsageError(f"no {cfg.default_language} documents in {cfg.corpus_dir}")
    dist = size_distribution(docs)
    out = Path(ns.out) if ns.out else cfg.reports_dir / "tokens" / f"size_distribution.{cfg.default_language}.record"
    _write(out, json.dumps(dist.to_dict(), indent=2, sort_keys=True) + "\n")
    w = dist.windows
    _say(f"{'version':<10} {'chars':>8} {'tokens':>8} " + " ".join(f"{'>' + str(x // 1024) + 'K':>6}" for x in w))
    for r in dist.rows:
        flags = " ".join(f"{'yes' if r.over_budget[x] else 'no':>6}" for x in w)
        _say(f"{r.version:<10} {r.characters:>8} {r.tokens:>8} {flags}")
    _say(f"{len(dist.rows)} documents; min {dist.min}, median {dist.median:g}, max {dist.max} tokens")
    _say(f"written to {out}")
    return EXIT_OK


def _guidelines(ns) -> list[str]:
    if not getattr(ns, "guidelines", None):
        return list(DEFAULT_GUIDELINES)
    return [ln.strip() for ln in _read_text(Path(ns.guidelines)).splitlines() if ln.strip()]


def _one_shot(ns):
    if not getattr(ns, "one_shot", None):
        return None
    tax, _ = parse_markdown(_read_text(Path(ns.one_shot)))
    if not tax.scenarios:
        raise UsageError(f"{ns.one_shot} has no usable example row")
    return tax.scenarios[0]


def _bundles(ns, cfg: RunConfig, endpoint):
    store = CorpusStore(cfg.corpus_dir)
    one_shot, guidelines = _one_shot(ns), _guidelines(ns)
    out = []
    for v in ns.version:
        doc = store.read(canonical_version(v), cfg.default_language)
        bundle = build_bundle(doc, endpoint, one_shot=one_shot, guidelines=guidelines, reserve=ns.reserve)
        path = write_bundle(bundle, bundle_dir(cfg.runs_dir, endpoint.name, bundle.version))
        out.append((bundle, path))
    return out


def cmd_prompt(ns, cfg: RunConfig) -> int:
    endpoint = cfg.endpoint(_endpoint_name(ns))
    for bundle, path in _bundles(ns, cfg, endpoint):
        _say(
            f"{bundle.version}: {bundle.token_estimate} / {bundle.endpoint_context} tokens "
            f"(incl. {bundle.reserve} reserve) -> {path}"
        )
    return EXIT_OK


def cmd_generate(ns, cfg: RunConfig) -> int:
    endpoint = cfg.endpoint(_endpoint_name(ns))
    jobs = [(b, endpoint) for b, _ in _bundles(ns, cfg, endpoint)]
    results = generate_many(jobs, cfg.runs_dir, parallelism=cfg.parallelism)
    status = EXIT_OK
    for r in results:
        if r.error is None:
            _say(f"{r.bundle.version} via {endpoint.name}: ok ({len(r.text)} chars) -> {r.log.path.parent}")
            continue
        _say(f"{r.bundle.version} via {endpoint.name}: {type(r.error).__name__}: {r.error}")
        code = EXIT_TRANSPORT if isinstance(r.error, _ENV_ERRORS) else EXIT_INVALID
        status = max(status, code)
    return status


def cmd_parse(ns, cfg: RunConfig) -> int:
    flow = VersionFlow.parse(ns.flow) if ns.flow else None
    tax, violations = load_taxonomy(ns.input, flow=flow, model=ns.model)
    src = Path(ns.input)
    default_dir = src if src.is_dir() else src.parent
    out = Path(ns.out) if ns.out else default_dir / record_filename(tax)
    _write(out, serialize_record(tax))
    _say(f"{len(tax)} scenarios for {tax.flow}; {len(violations)} violation(s) -> {out}")
    _print_violations(violations)
    return EXIT_INVALID if errors_only(violations) else EXIT_OK


def cmd_validate(ns, cfg: RunConfig) -> int:
    path = Path(ns.input)
    text = _read_text(path) if not path.is_dir() else None
    if text is not None and not text.lstrip().startswith("{"):
        tax, violations = validate_markdown(text)
    else:
        tax, found = load_taxonomy(path)
        violations = found + [v for v in validate(tax) if v not in found]
    errors = errors_only(violations)
    _say(
        f"{path}: {len(tax)} scenarios, {len(errors)} error(s), "
        f"{len(violations) - len(errors)} warning(s)"
    )
    _print_violations(violations)
    return EXIT_INVALID if errors else EXIT_OK


def _pair(ns, cfg: RunConfig):
    manual, mv = load_taxonomy(ns.manual)
    auto, av = load_taxonomy(ns.auto, flow=manual.flow, model=getattr(ns, "model", None))
    for label, vs in (("manual", mv), ("auto", av)):
        if errors_only(vs):
            log.warning("%s taxonomy had %d parse error(s); compared rows only", label, len(errors_only(vs)))
    return manual, auto


def cmd_compare(ns, cfg: RunConfig) -> int:
    manual, auto = _pair(ns, cfg)
    report = compare(manual, auto, cfg.threshold, model=ns.model or auto.meta.generator)
    out_dir = Path(ns.out_dir) if ns.out_dir else cfg.reports_dir / manual.flow.slug / safe_name(report.model)
    _write(out_dir / "comparison.record", serialize_report(report, manual, auto))
    text = render_report(report, manual, auto)
    _write(out_dir / "comparison.txt", text)
    _say(text.rstrip("\n"))
    _say(f"\nwritten to {out_dir}")
    return EXIT_OK


def cmd_merge(ns, cfg: RunConfig) -> int:
    if ns.report:
        loaded = parse_report(_read_text(Path(ns.report)))
        manual = loaded.manual or load_taxonomy(ns.manual)[0]
        auto = loaded.auto or load_taxonomy(ns.auto, flow=manual.flow)[0]
        report = loaded.report
    else:
        if not (ns.manual and ns.auto):
            raise UsageError("merge needs --manual and --auto, or --report")
        manual, auto = _pair(ns, cfg)
        report = compare(manual, auto, cfg.threshold)
    merged = merge(manual, auto, report)
    out = Path(ns.out) if ns.out else cfg.reports_dir / manual.flow.slug / record_filename(merged)
    _write(out, serialize_markdown(merged) if out.suffix == ".md" else serialize_record(merged))
    errors = errors_only(validate(merged))
    _say(f"merged {len(manual)} manual + {len(auto)} auto scenarios into {len(merged)} -> {out}")
    return EXIT_INVALID if errors else EXIT_OK


def cmd_report(ns, cfg: RunConfig) -> int:
    if ns.record:
        loaded = parse_report(_read_text(Path(ns.record)))
        if loaded.manual is None or loaded.auto is None:
            raise UsageError(f"{ns.record} does not embed both taxonomies")
        text = render_report(loaded.report, loaded.manual, loaded.auto)
    else:
        if not (ns.manual and ns.auto):
            raise UsageError("report needs a comparison record, or --manual and --auto")
        manual, auto = _pair(ns, cfg)
        text = render_report(compare(manual, auto, cfg.threshold), manual, auto)
    if ns.out:
        _write(Path(ns.out), text)
    _say(text.rstrip("\n"))
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------


def _add_globals(p: argparse.ArgumentParser, suppress: bool) -> None:
    d = {"default": argparse.SUPPRESS} if suppress else {"default": None}
    p.add_argument("--config", help="configuration file (default: ./qmigtax.conf)", **d)
    p.add_argument("--corpus", help="corpus directory", **d)
    p.add_argument("--runs", help="run-log directory", **d)
    p.add_argument("--reports", help="report directory", **d)
    p.add_argument("--lang", choices=("en", "es"), help="documentation language", **d)
    p.add_argument("--threshold", type=float, help="match acceptance threshold in (0, 1]", **d)
    p.add_argument("--endpoint", help="endpoint name from the configuration", **d)
    if suppress:
        p.add_argument("--offline", action="store_true", default=argparse.SUPPRESS, help="never touch the network")
    else:
        p.add_argument("--offline", action="store_true", help="never touch the network")
    p.add_argument("-v", "--verbose", action="store_true", **({"default": argparse.SUPPRESS} if suppress else {}))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qmigtax",
        description="Build, validate, compare and merge taxonomies of Qiskit migration scenarios.",
    )
    parser.add_argument("--version", action="version", version=f"qmigtax {__version__}")
    _add_globals(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _add_globals(common, suppress=True)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    def add(name, help_):
        return sub.add_parser(name, help=help_, parents=[common], description=help_)

    p = add("fetch", "download or import release notes into the corpus")
    p.add_argument("--version", dest="version", action="append", required=True)
    p.add_argument("--kind", choices=("major", "minor", "patch", "bug-fix", "prelude"))
    p.add_argument("--from", dest="source_file", help="import a local file instead of downloading")
    p.add_argument("--source-base", help="HTTP(S) base URL of the release notes")
    p.set_defaults(func=cmd_fetch)

    p = add("verify", "check a corpus document against golden sentinels")
    p.add_argument("--version", required=True)
    p.add_argument("--golden", required=True, help="file with one sentinel per line")
    p.set_defaults(func=cmd_verify)

    p = add("tokens", "token size distribution over the corpus")
    p.add_argument("--version", action="append", help="restrict to these versions")
    p.add_argument("--out", help="record file (default: <reports>/tokens/...)")
    p.set_defaults(func=cmd_tokens)

    for name, func, help_ in (
        ("prompt", cmd_prompt, "build and store prompt bundles"),
        ("generate", cmd_generate, "send prompt bundles to an endpoint"),
    ):
        p = add(name, help_)
        p.add_argument("--version", action="append", required=True)
        p.add_argument("--one-shot", help="markdown table whose first row is the one-shot example")
        p.add_argument("--guidelines", help="file with one guideline per line")
        p.add_argument("--reserve", type=int, default=DEFAULT_RESERVE, help="tokens kept free for the answer")
        p.set_defaults(func=func)

    p = add("parse", "markdown table or run log to taxonomy record")
    p.add_argument("input", help="markdown file, run directory or log.json")
    p.add_argument("--flow", help='version flow, e.g. "0.46.0 -> 1.0.0"')
    p.add_argument("--model", help="mark scenarios as produced by this model")
    p.add_argument("--out", help="record file to write")
    p.set_defaults(func=cmd_parse)

    p = add("validate", "report schema violations")
    p.add_argument("input")
    p.set_defaults(func=cmd_validate)

    p = add("compare", "match a manual taxonomy against an automatic one")
    p.add_argument("--manual", required=True)
    p.add_argument("--auto", required=True)
    p.add_argument("--model", help="label for the automatic side")
    p.add_argument("--out-dir", help="default: <reports>/<flow>/<model>/")
    p.set_defaults(func=cmd_compare)

    p = add("merge", "unify a manual and an automatic taxonomy")
    p.add_argument("--manual")
    p.add_argument("--auto")
    p.add_argument("--report", help="comparison record to reuse")
    p.add_argument("--model", help="label for the automatic side")
    p.add_argument("--out", help="output file; .md writes markdown, anything else a record")
    p.set_defaults(func=cmd_merge)

    p = add("report", "render a comparison")
    p.add_argument("record", nargs="?", help="comparison record written by compare")
    p.add_argument("--manual")
    p.add_argument("--auto")
    p.add_argument("--model")
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.DEBUG if getattr(ns, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _settings(ns)
        return ns.func(ns, cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"qmigtax: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _ENV_ERRORS as exc:
        print(f"qmigtax: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except QmigtaxError as exc:
        print(f"qmigtax: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
