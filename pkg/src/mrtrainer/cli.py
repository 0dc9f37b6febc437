"""Operator entry point: ingest, generate, eval, serve, and terminal chat.

Exit codes: 0 ok, 1 usage, 2 data error, 3 backend error. Flag precedence is
command line > JSON config file (--config) > built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any, Sequence

from . import backends, forge, manuals, metrics, service
from .simulator import registry_json

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_BACKEND = 3


class UsageExit(SystemExit):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the documented contract is 1."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mrtrainer", description=__doc__.split("\n", 1)[0])
    parser.add_argument("--config", help="JSON config file; flags override its values")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse and validate a manual directory, print corpus stats")
    p.add_argument("--manual-dir", help="directory of manual JSON files")
    p.add_argument("--out", help="write the stats as JSON to this path")

    p = sub.add_parser("generate", help="run the dataset pipeline to JSONL files")
    p.add_argument("--manual-dir", help="directory of manual JSON files")
    p.add_argument("--out-dir", help="output directory for the dataset files")
    p.add_argument("--backend", help="backend config JSON (llm/vlm sections)")
    p.add_argument("--seed", type=int, help="master RNG seed (default 7)")
    p.add_argument("--chunk-size", type=int, help="steps per grounding chunk (default 10)")
    p.add_argument("--test-fraction", type=float, help="held-out share by conversation (default 0.2)")

    p = sub.add_parser("eval", help="score predictions against references, or aggregate reports")
    p.add_argument("--predictions", help="JSONL of {'id','text'} predictions")
    p.add_argument("--references", help="JSONL of {'id','text'} references")
    p.add_argument("--manual-dir", help="manual directory for the theme lexicon")
    p.add_argument("--model-id", help="label for the report row (default 'model')")
    p.add_argument("--out", help="write the report JSON to this path")
    p.add_argument("--stddev-of", nargs="+", metavar="REPORT",
                   help="report JSON files; print the per-metric dispersion row instead")

    p = sub.add_parser("serve", help="run the HTTP session service")
    p.add_argument("--manual-dir", help="directory of manual JSON files")
    p.add_argument("--backend", help="backend config JSON (llm/vlm sections)")
    p.add_argument("--port", type=int, help="listen port (default 8040)")
    p.add_argument("--host", help="bind address (default 127.0.0.1)")
    p.add_argument("--data-dir", help="directory for persisted session event logs")
    p.add_argument("--ui-dir", help="directory with the built web UI to serve at /")

    p = sub.add_parser("chat", help="interactive terminal session (in-process service)")
    p.add_argument("--manual-dir", help="directory of manual JSON files")
    p.add_argument("--manual-id", help="manual to train on")
    p.add_argument("--backend", help="backend config JSON (llm/vlm sections)")

    return parser


_DEFAULTS: dict[str, Any] = {
    "seed": 7,
    "chunk_size": 10,
    "test_fraction": 0.2,
    "port": 8040,
    "host": "127.0.0.1",
    "model_id": "model",
}


def resolve(args: argparse.Namespace, key: str, required: bool = False):
    """flags > config file > MRTRAINER_* env > defaults."""
    value = getattr(args, key, None)
    if value is None and getattr(args, "_file_config", None):
        value = args._file_config.get(key)
    if value is None:
        value = os.environ.get(f"MRTRAINER_{key.upper()}")
    if value is None:
        value = _DEFAULTS.get(key)
    if value is None and required:
        raise DataError(f"missing required option --{key.replace('_', '-')}")
    return value


class DataError(Exception):
    pass


def _load_backends(args: argparse.Namespace):
    path = resolve(args, "backend", required=True)
    p = Path(path)
    if not p.exists():
        raise DataError(f"backend config not found: {p}")
    cfg = json.loads(p.read_text(encoding="utf-8"))
    llm = backends.load_llm_from_config(cfg.get("llm") or {}, base_dir=p.parent)
    vlm = backends.load_vlm_from_config(cfg.get("vlm"), base_dir=p.parent)
    return llm, vlm, cfg, p


def _load_manuals(args: argparse.Namespace):
    directory = resolve(args, "manual_dir", required=True)
    d = Path(directory)
    if not d.is_dir():
        raise DataError(f"manual directory not found: {d}")
    ms = manuals.load_manual_dir(d)
    if not ms:
        raise DataError(f"no manual JSON files in {d}")
    return ms


def cmd_ingest(args: argparse.Namespace) -> int:
    ms = _load_manuals(args)
    stats = manuals.corpus_stats(ms, metrics.tokenize)
    rows = [
        ("manuals", stats.manual_count),
        ("steps", stats.total_steps),
        ("tokens (total)", stats.total_tokens),
        ("tokens (unique)", stats.unique_tokens),
        ("theme entities (unique)", stats.theme_entity_count),
        ("entity occurrences", stats.entity_occurrences),
        ("avg steps per manual", f"{stats.avg_steps_per_manual:.1f}"),
    ]
    width = max(len(label) for label, _ in rows)
    for label, value in rows:
        print(f"{label:<{width}}  {value}")
    out = resolve(args, "out")
    if out:
        Path(out).write_text(json.dumps(stats.__dict__, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_generate(args: argparse.Namespace) -> int:
    ms = _load_manuals(args)
    llm, vlm, _, _ = _load_backends(args)
    out_dir = Path(resolve(args, "out_dir", required=True))
    config = forge.GenerationConfig(
        seed=int(resolve(args, "seed")),
        chunk_size=int(resolve(args, "chunk_size")),
        test_fraction=float(resolve(args, "test_fraction")),
    )
    try:
        manifest = forge.run_generation(ms, llm, vlm, config, out_dir)
    except backends.BackendError:
        for name in ("conversations.jsonl", "pairs.jsonl", "vqa.jsonl", "manifest.json"):
            (out_dir / name).unlink(missing_ok=True)
        raise
    print(json.dumps(manifest.to_dict(), indent=2))
    return EXIT_OK


def _read_text_jsonl(path: str) -> list[str]:
    p = Path(path)
    if not p.exists():
        raise DataError(f"file not found: {p}")
    texts = []
    for line in p.read_text(encoding="utf-8").splitlines():
        if line.strip():
            texts.append(json.loads(line)["text"])
    return texts


def cmd_eval(args: argparse.Namespace) -> int:
    if args.stddev_of:
        reports = [metrics.load_report(p) for p in args.stddev_of]
        print(metrics.render_table(reports, stddev_row=True))
        return EXIT_OK
    predictions = _read_text_jsonl(resolve(args, "predictions", required=True))
    references = _read_text_jsonl(resolve(args, "references", required=True))
    theme_lexicon: list[str] = []
    if resolve(args, "manual_dir"):
        theme_lexicon = manuals.extract_theme_lexicon(_load_manuals(args))
    tool_lexicon = [row["name"] for row in registry_json()]
    try:
        report = metrics.evaluate(
            predictions, references, tool_lexicon, theme_lexicon,
            model_id=str(resolve(args, "model_id")),
        )
    except metrics.LengthMismatch as exc:
        raise DataError(str(exc)) from exc
    print(metrics.render_table([report]))
    out = resolve(args, "out")
    if out:
        metrics.save_report(report, out)
    return EXIT_OK


def _build_manager(args: argparse.Namespace, data_dir: str | None = None) -> service.SessionManager:
    ms = _load_manuals(args)
    backend_path = resolve(args, "backend", required=True)
    p = Path(backend_path)
    if not p.exists():
        raise DataError(f"backend config not found: {p}")
    cfg = json.loads(p.read_text(encoding="utf-8"))

    def factory():
        llm = backends.load_llm_from_config(cfg.get("llm") or {}, base_dir=p.parent)
        vlm = backends.load_vlm_from_config(cfg.get("vlm"), base_dir=p.parent)
        return llm, vlm

    factory()  # fail fast on unusable configs
    return service.SessionManager(ms, factory, data_dir=data_dir)


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    manager = _build_manager(args, data_dir=resolve(args, "data_dir"))
    assets = Path(str(resolve(args, "manual_dir"))) / "assets"
    app = service.build_app(manager, assets_dir=assets if assets.is_dir() else None)
    ui_dir = resolve(args, "ui_dir")
    if ui_dir:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=ui_dir, html=True), name="ui")
    host, port = str(resolve(args, "host")), int(resolve(args, "port"))
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    except (OSError, SystemExit) as exc:
        print(f"mrtrainer serve: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


def cmd_chat(args: argparse.Namespace) -> int:
    manager = _build_manager(args)
    manual_id = resolve(args, "manual_id", required=True)
    sess = manager.create_session(manual_id)
    print(f"(session {sess.session_id} on manual {manual_id}; /done N marks a step, "
          f"/state shows the panel, /quit exits)")
    print(f"Trainer: {service.GREETING}")
    seen = sess.last_seq
    for line in sys.stdin:
        text = line.strip()
        if not text:
            continue
        if text == "/quit":
            break
        if text == "/state":
            print(json.dumps(sess.assembly.snapshot(), indent=2))
            continue
        if text.startswith("/done"):
            parts = text.split()
            try:
                step = int(parts[1])
                done = len(parts) < 3 or parts[2] != "false"
                manager.control_step(sess.session_id, step, done)
                print(f"(step {step} marked {'done' if done else 'not done'})")
            except (IndexError, ValueError, service.ServiceError) as exc:
                print(f"(cannot mark step: {exc})")
            continue
        try:
            manager.post_message(sess.session_id, text)
        except service.SessionFinished:
            print("(session already finished; /quit to leave)")
            continue
        for event in manager.events_since(sess.session_id, seen):
            seen = max(seen, event.seq)
            p = event.payload
            if event.type == "trainer_message":
                print(f"Trainer: {p['text']}")
            elif event.type == "tool_call":
                print(f"  [tool] {p['call']['name']} {p['call']['args'] or ''}".rstrip())
            elif event.type in ("tool_response", "vlm_result"):
                mark = "ok" if p["response"]["ok"] else f"error {p['response']['error_code']}"
                print(f"  [tool] -> {mark}: {p['response']['text']}")
    print("bye.")
    return EXIT_OK


_COMMANDS = {
    "ingest": cmd_ingest,
    "generate": cmd_generate,
    "eval": cmd_eval,
    "serve": cmd_serve,
    "chat": cmd_chat,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args._file_config = {}
    if args.config:
        cfg_path = Path(args.config)
        if not cfg_path.exists():
            print(f"mrtrainer: config file not found: {cfg_path}", file=sys.stderr)
            return EXIT_DATA
        args._file_config = json.loads(cfg_path.read_text(encoding="utf-8"))
    try:
        return _COMMANDS[args.command](args)
    except (DataError, manuals.SchemaError, forge.TranscriptParseError, json.JSONDecodeError) as exc:
        print(f"mrtrainer {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except backends.BackendError as exc:
        print(f"mrtrainer {args.command}: backend error: {exc}", file=sys.stderr)
        return EXIT_BACKEND


if __name__ == "__main__":
    sys.exit(main())
