"""Language-model backends: a chat-completions HTTP client and scripted mocks."""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import requests

Message = tuple[str, str]  # (role, content)


class BackendError(Exception):
    """Base for every LLM-backend failure."""


class ConfigError(BackendError):
    """Backend configuration is unusable (bad URL, missing API key env)."""


class HttpError(BackendError):
    """Transport-level failure talking to the completion endpoint."""


class NonOkStatus(BackendError):
    """Endpoint answered with a non-2xx status."""


class ResponseSchemaError(BackendError):
    """Endpoint answered 2xx but not in the chat-completions shape."""


class ScriptExhausted(BackendError):
    """Scripted backend ran out of entries."""


class LlmBackend(Protocol):
    def complete(self, messages: Sequence[Message]) -> str: ...


@dataclass(frozen=True)
class HttpLlmConfig:
    base_url: str
    model: str
    api_key_env: str | None = None
    timeout: float = 60.0


class HttpLlm:
    """Minimal chat-completions client.

    POSTs {base_url}/chat/completions with {"model", "messages"} and returns
    the first choice's message content. The API key is read from the
    environment variable named in the config, never from files.
    """

    def __init__(self, config: HttpLlmConfig) -> None:
        if not config.base_url.startswith(("http://", "https://")):
            raise ConfigError(f"base_url must be http(s): {config.base_url!r}")
        api_key = None
        if config.api_key_env:
            api_key = os.environ.get(config.api_key_env)
            if not api_key:
                raise ConfigError(f"environment variable {config.api_key_env} is not set")
        self._config = config
        self._headers = {"Content-Type": "application/json"}
        if api_key:
            self._headers["Authorization"] = f"Bearer {api_key}"

    def complete(self, messages: Sequence[Message]) -> str:
        body = {
            "model": self._config.model,
            "messages": [{"role": role, "content": content} for role, content in messages],
        }
        url = self._config.base_url.rstrip("/") + "/chat/completions"
        try:
            resp = requests.post(url, json=body, headers=self._headers,
                                 timeout=self._config.timeout)
        except requests.RequestException as exc:
            raise HttpError(f"POST {url} failed: {exc}") from exc
        if not 200 <= resp.status_code < 300:
            raise NonOkStatus(f"{url} answered {resp.status_code}: {resp.text[:200]}")
        try:
            content = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ResponseSchemaError(f"unexpected response shape from {url}") from exc
        if not isinstance(content, str):
            raise ResponseSchemaError("message content is not a string")
        return content


class ScriptedLlm:
    """Replays a fixed list of outputs, ignoring the prompt.

    One more call than the script has entries raises ScriptExhausted. Safe
    for concurrent callers (entries are handed out under a lock), though
    tests normally use one instance per session.
    """

    def __init__(self, script: Sequence[str]) -> None:
        if not script:
            raise ConfigError("scripted backend needs a non-empty script")
        self._script = list(script)
        self._next = 0
        self._lock = threading.Lock()

    def complete(self, messages: Sequence[Message]) -> str:
        with self._lock:
            if self._next >= len(self._script):
                raise ScriptExhausted(f"script of {len(self._script)} entries used up")
            out = self._script[self._next]
            self._next += 1
            return out


def scripted_backend(script: Sequence[str]) -> ScriptedLlm:
    return ScriptedLlm(script)


def http_backend(config: HttpLlmConfig) -> HttpLlm:
    return HttpLlm(config)


def load_llm_from_config(cfg: dict, base_dir: Path | None = None) -> LlmBackend:
    """Build an LLM backend from a config mapping.

    kinds: {"kind": "scripted", "script": [...]} or {"kind": "scripted",
    "script_file": "replies.json"} or {"kind": "http", "base_url": ...,
    "model": ..., "api_key_env": ..., "timeout": ...}. Relative script paths
    resolve against base_dir.
    """
    kind = cfg.get("kind")
    if kind == "scripted":
        script = cfg.get("script")
        if script is None:
            script_file = cfg.get("script_file")
            if not script_file:
                raise ConfigError("scripted llm config needs 'script' or 'script_file'")
            path = Path(script_file)
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            script = json.loads(path.read_text(encoding="utf-8"))
        return ScriptedLlm(script)
    if kind == "http":
        try:
            conf = HttpLlmConfig(
                base_url=cfg["base_url"],
                model=cfg["model"],
                api_key_env=cfg.get("api_key_env"),
                timeout=float(cfg.get("timeout", 60.0)),
            )
        except KeyError as exc:
            raise ConfigError(f"http llm config missing {exc}") from exc
        return HttpLlm(conf)
    raise ConfigError(f"unknown llm backend kind {kind!r}")


def load_vlm_from_config(cfg: dict | None, base_dir: Path | None = None):
    """Build a vision backend from config, or None when cfg is None."""
    from .vision import HttpVisionBackend, MockVisionBackend

    if cfg is None:
        return None
    kind = cfg.get("kind")
    if kind == "mock":
        rules_file = cfg.get("rules_file")
        if not rules_file:
            raise ConfigError("mock vlm config needs 'rules_file'")
        path = Path(rules_file)
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return MockVisionBackend.from_file(path)
    if kind == "http":
        return HttpVisionBackend(load_llm_from_config({**cfg, "kind": "http"}, base_dir))
    raise ConfigError(f"unknown vlm backend kind {kind!r}")
