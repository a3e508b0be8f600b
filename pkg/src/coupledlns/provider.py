"""Text-generation providers and response parsing.

Every provider turns a prompt into raw text. The evolution loop only ever
sees that text and what :func:`parse_response` extracts from it, so any
provider that answers in the requested format can be swapped in.
"""

from __future__ import annotations

import json
import logging
import os
import re
import time
from dataclasses import dataclass, field
from typing import Protocol

import httpx

from . import dsl
from .core import HeuristicComponent

log = logging.getLogger(__name__)

METADATA_RE = re.compile(r"<!-- request-metadata (\{.*?\}) -->", re.S)
PARENTS_BEGIN = "<!-- parents begin -->"
PARENTS_END = "<!-- parents end -->"


class ProviderError(RuntimeError):
    pass


class Timeout(ProviderError):
    pass


class HttpError(ProviderError):
    pass


class RateLimited(ProviderError):
    pass


@dataclass(frozen=True)
class ProviderRequest:
    prompt: str
    temperature: float = 1.0
    seed: int | None = None
    metadata: dict = field(default_factory=dict)


class Provider(Protocol):
    def generate(self, request: ProviderRequest) -> str: ...


# ------------------------------------------------------------------ parsing


def _sections(text: str) -> list:
    lines = text.splitlines()
    starts = [i for i, ln in enumerate(lines) if ln.strip().lower().startswith("thought:")]
    out = []
    for n, s in enumerate(starts):
        end = starts[n + 1] if n + 1 < len(starts) else len(lines)
        out.append((lines[s], lines[s + 1:end]))
    return out


def parse_response(text: str, expected_components: int = 1) -> list:
    """Extract up to ``expected_components`` (thought, code) components.

    Each component is a ``thought:`` line followed by a fenced code block.
    Code that does not parse is returned as an invalid component. A section
    without a complete fence is skipped when one component is expected and
    kept as an invalid placeholder otherwise, so later sections stay aligned
    with their subproblems. Never raises on malformed text.
    """
    comps = []
    for head, body in _sections(text or ""):
        thought = head.strip()[len("thought:"):].strip()
        try:
            a = next(i for i, ln in enumerate(body) if ln.strip().startswith("```"))
            b = next(i for i in range(a + 1, len(body)) if body[i].strip().startswith("```"))
        except StopIteration:
            if expected_components > 1:
                comps.append(HeuristicComponent("", thought, error="section has no code fence"))
                if len(comps) == expected_components:
                    break
            continue
        comps.append(HeuristicComponent("\n".join(body[a + 1:b]), thought))
        if len(comps) == expected_components:
            break
    return comps


def read_metadata(prompt: str) -> dict:
    m = METADATA_RE.search(prompt)
    if m is None:
        raise ValueError("prompt carries no request metadata block")
    return json.loads(m.group(1))


def read_parents(prompt: str, n_parents: int, n_components: int) -> list:
    """Parent programs as listed in the prompt, parent-major."""
    if n_parents == 0:
        return []
    body = prompt.split(PARENTS_BEGIN, 1)[1].split(PARENTS_END, 1)[0]
    comps = parse_response(body, n_parents * n_components)
    if len(comps) != n_parents * n_components or not all(c.valid for c in comps):
        raise ValueError("parent blocks in the prompt are incomplete")
    progs = [c.program for c in comps]
    return [progs[i * n_components:(i + 1) * n_components] for i in range(n_parents)]


def render_response(components: list, names: list) -> str:
    parts = []
    for name, (thought, code) in zip(names, components):
        parts.append(f"## {name}\nthought: {thought}\n```dsl\n{code}\n```")
    return "\n\n".join(parts) + "\n"


# --------------------------------------------------------------------- mock


def describe(program: dsl.Program) -> str:
    feats = sorted(program.features)
    used = ", ".join(feats) if feats else "constants only"
    noise = " with random tie-breaking" if program.uses_rand else ""
    return f"Score elements by a formula over {used}{noise}; remove the top {program.rho:.0%}."


class MockProvider:
    """Offline provider that applies program transforms instead of a language model.

    I1 generates, E1 generates something unlike the parents, E2 crosses the
    parents over, M1 mutates and M2 rescales constants. The output depends
    only on the prompt's metadata block and parent listing.
    """

    def __init__(self, max_depth: int = 4):
        self.max_depth = max_depth
        self.calls = 0

    def generate(self, request: ProviderRequest) -> str:
        self.calls += 1
        meta = read_metadata(request.prompt)
        strategy = meta["strategy"]
        seed = int(meta["seed"])
        subs = meta["subproblems"]
        names = meta["names"]
        parents = read_parents(request.prompt, int(meta["n_parents"]), len(subs))
        out = []
        for c, k in enumerate(subs):
            schema = meta["schemas"][str(k)]
            mine = [p[c] for p in parents]
            prog = self._apply(strategy, mine, dsl.derive_seed(seed, k), schema)
            out.append((f"{strategy}: {describe(prog)}", dsl.render(prog)))
        return render_response(out, names)

    def _apply(self, strategy: str, parents: list, seed: int, schema: list) -> dsl.Program:
        depth = self.max_depth
        if strategy == "I1":
            return dsl.transform("generate", [], seed, schema, depth)
        if strategy == "E1":
            avoid = {dsl.digest(p) for p in parents}
            used = set().union(*(p.features for p in parents)) if parents else set()
            fallback = None
            for attempt in range(8):
                prog = dsl.transform("generate", [], dsl.derive_seed(seed, attempt), schema, depth)
                if dsl.digest(prog) in avoid:
                    continue
                if not prog.features <= used or not used:
                    return prog
                fallback = fallback or prog
            return fallback or dsl.transform("mutate", parents[:1], seed, schema, depth)
        if strategy == "E2":
            if len(parents) >= 2:
                return dsl.transform("crossover", parents, seed, schema, depth)
            return dsl.transform("mutate", parents, seed, schema, depth)
        if strategy == "M1":
            return dsl.transform("mutate", parents[:1], seed, schema, depth)
        if strategy == "M2":
            return dsl.transform("perturb_constants", parents[:1], seed, schema, depth)
        raise ValueError(f"unknown prompt strategy {strategy!r}")


# --------------------------------------------------------------------- http


class HttpProvider:
    """Chat-completions client with a timeout and a fixed number of retries."""

    def __init__(self, base_url: str, model: str, path: str = "/v1/chat/completions",
                 api_key_env: str = "OPENAI_API_KEY", timeout: float = 120.0, retries: int = 3,
                 backoff: float = 2.0, temperature: float | None = None, client: httpx.Client | None = None):
        self.url = base_url.rstrip("/") + path
        self.model = model
        self.api_key_env = api_key_env
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        self.temperature = temperature
        self.client = client or httpx.Client(timeout=timeout)
        self.attempts = 0

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def generate(self, request: ProviderRequest) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature if self.temperature is None else self.temperature,
        }
        if request.seed is not None:
            payload["seed"] = request.seed % 2**31
        last: ProviderError | None = None
        for attempt in range(self.retries + 1):
            if attempt:
                time.sleep(self.backoff * 2 ** (attempt - 1))
            self.attempts += 1
            try:
                resp = self.client.post(self.url, json=payload, headers=self._headers(), timeout=self.timeout)
            except httpx.TimeoutException as exc:
                last = Timeout(f"request timed out after {self.timeout}s: {exc}")
                continue
            except httpx.HTTPError as exc:
                last = HttpError(f"request failed: {exc}")
                continue
            if resp.status_code == 429:
                last = RateLimited("rate limited (HTTP 429)")
                continue
            if resp.status_code >= 500:
                last = HttpError(f"server error HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise HttpError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError):
                raise HttpError("response is not a chat completion") from None
        log.warning("provider gave up after %d attempts", self.retries + 1)
        raise last


def make_provider(settings: dict | None) -> Provider:
    settings = dict(settings or {"kind": "mock"})
    kind = settings.pop("kind", "mock")
    if kind == "mock":
        return MockProvider(**settings)
    if kind == "http":
        return HttpProvider(**settings)
    raise ValueError(f"unknown provider kind {kind!r}")
