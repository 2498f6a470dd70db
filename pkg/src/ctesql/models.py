"""Model client interface and providers.

Every model interaction in the pipeline goes through ModelClient.complete
with an explicit role, so tests can replay canned responses and the call
budget can be asserted per request. Providers hand out one client per
request; call counters are never shared across requests.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from .errors import ConfigError, ModelError

ROLES = frozenset(
    {"reformulate", "intent", "prune", "plan", "generate", "assess", "correct",
     "annotate", "derive"}
)


class ModelClient:
    """Base client: complete(prompt, role) plus a per-request call counter."""

    def __init__(self):
        self.call_count = 0
        self.transcript: list[tuple[str, str]] = []  # (role, prompt)
        self.errors: list[tuple[str, str]] = []  # (role, message)

    def complete(self, prompt: str, role: str) -> str:
        if role not in ROLES:
            raise ValueError(f"unknown model role: {role}")
        self.call_count += 1
        self.transcript.append((role, prompt))
        try:
            return self._complete(prompt, role)
        except ModelError as exc:
            self.errors.append((role, str(exc)))
            raise

    def _complete(self, prompt: str, role: str) -> str:
        raise NotImplementedError


class ScriptedModel(ModelClient):
    """Replays canned responses keyed by role.

    The script maps role to an ordered list of entries; each entry is a
    response string or {"error": message} to simulate a provider failure.
    A role past the end of its list repeats the final entry; a role with
    no entries raises ModelError so caller fallbacks engage.
    """

    def __init__(self, script: dict[str, list]):
        super().__init__()
        self.script = script
        self._cursors: dict[str, int] = {}

    def _complete(self, prompt: str, role: str) -> str:
        entries = self.script.get(role)
        if not entries:
            raise ModelError(f"no scripted response for role {role}")
        idx = self._cursors.get(role, 0)
        entry = entries[min(idx, len(entries) - 1)]
        self._cursors[role] = idx + 1
        if isinstance(entry, dict):
            raise ModelError(str(entry.get("error", "scripted failure")))
        return str(entry)


class HttpModel(ModelClient):
    """Minimal JSON-over-HTTP provider: POST {model, role, prompt} -> {text}."""

    def __init__(self, endpoint: str, api_key: str = "", model_id: str = "",
                 timeout_s: float = 30.0):
        super().__init__()
        self.endpoint = endpoint
        self.api_key = api_key
        self.model_id = model_id
        self.timeout_s = timeout_s

    def _complete(self, prompt: str, role: str) -> str:
        import httpx

        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = httpx.post(
                self.endpoint,
                json={"model": self.model_id, "role": role, "prompt": prompt},
                headers=headers,
                timeout=self.timeout_s,
            )
            resp.raise_for_status()
            doc = resp.json()
        except Exception as exc:
            raise ModelError(f"model request failed: {exc}") from exc
        if not isinstance(doc, dict) or "text" not in doc:
            raise ModelError("model response missing 'text'")
        return str(doc["text"])


@dataclass
class ScriptedProvider:
    script: dict[str, list]

    def for_request(self) -> ScriptedModel:
        return ScriptedModel(self.script)


@dataclass
class HttpProvider:
    endpoint: str
    api_key: str = ""
    model_id: str = ""
    timeout_s: float = 30.0

    def for_request(self) -> HttpModel:
        return HttpModel(self.endpoint, self.api_key, self.model_id, self.timeout_s)


@dataclass
class FixedProvider:
    """Hands out a caller-supplied client; for tests that inspect one client."""

    client: ModelClient

    def for_request(self) -> ModelClient:
        return self.client


def load_script(path: str | Path) -> dict[str, list]:
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict) or not all(isinstance(v, list) for v in doc.values()):
        raise ConfigError(f"{path}: script must map role -> list of responses")
    return doc


def provider_from_settings(settings: dict):
    """Build a provider from {provider, script|endpoint, api_key, model_id, timeout_s}.

    Environment variables CTESQL_PROVIDER, CTESQL_SCRIPT, CTESQL_ENDPOINT,
    CTESQL_API_KEY, CTESQL_MODEL_ID and CTESQL_TIMEOUT_S override settings.
    """
    merged = dict(settings)
    env_map = {
        "provider": "CTESQL_PROVIDER",
        "script": "CTESQL_SCRIPT",
        "endpoint": "CTESQL_ENDPOINT",
        "api_key": "CTESQL_API_KEY",
        "model_id": "CTESQL_MODEL_ID",
        "timeout_s": "CTESQL_TIMEOUT_S",
    }
    for key, var in env_map.items():
        if os.environ.get(var):
            merged[key] = os.environ[var]
    name = merged.get("provider", "scripted")
    if name == "scripted":
        script_path = merged.get("script")
        if not script_path:
            raise ConfigError("scripted provider needs a script path")
        return ScriptedProvider(load_script(script_path))
    if name == "http":
        endpoint = merged.get("endpoint")
        if not endpoint:
            raise ConfigError("http provider needs an endpoint")
        return HttpProvider(
            endpoint=endpoint,
            api_key=str(merged.get("api_key", "")),
            model_id=str(merged.get("model_id", "")),
            timeout_s=float(merged.get("timeout_s", 30.0)),
        )
    raise ConfigError(f"unknown model provider: {name}")
