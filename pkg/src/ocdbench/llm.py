"""Chat-completions client: prompt construction, answer parsing,
self-consistency aggregation, disk caching, and deterministic replay.

The prompt template is frozen; the only varying parts are the domain
blurb, the variable lines (shuffled per sample for diversity), the target
count, and an extra focus sentence in the bootstrapped stage.  Replay mode
serves bundled fixture files keyed by (dataset, stage, sample index) and
never touches the network, which the tests assert via an injected
transport counter.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

TIPS = (
    "1. Assess whether there is a direct causal relationship, and consider "
    "potential confounding variables that might affect the relationship that "
    "could potentially not causal relationship.",
    "2. Distinguish between correlations and causation; verify that "
    "correlations are not mistaken for causal relationships.",
    "3. Ensure the correct temporal order of variables; confirm that the "
    "cause precedes the effect.",
)

_HEADER = (
    "You are a helpful assistant and expert in {domain}. "
    "Here are some tips that you can pay attention to:"
)

_JOB = (
    "Assuming we can do interventions to all the variables, your job is to "
    "assist in designing the best intervention experiments among the "
    "following variables to help discover their causal relations:"
)

_BOOTSTRAP_FOCUS = (
    "These variables have not shown clear connections to the rest of the "
    "system so far, so please give more focus on this left set of variables "
    "and find the influential variables that were missing in previous rounds."
)

_ASK = (
    "Assuming we can do interventions to all the variables, given the "
    "aforementioned variables and their descriptions, can you **echo your "
    "knowledge those variables**, **temporally analyze** their relations, "
    "and then **choose the best {k} intervention targets from all the "
    "variables** which hopefully are the root causes of the other variables "
    "to start our analysis of their causal relations?"
)

_CLOSING = (
    "Let's think and analyze step by step. Then, provide your final answer "
    "(variable names only) within the tags <Answer>...</Answer>, "
    'separated by ", ".'
)


@dataclass
class PromptSpec:
    domain_blurb: str
    variable_entries: list[tuple[str, str]]
    k_targets: int
    stage: str = "warmup"  # warmup | bootstrapped

    def __post_init__(self) -> None:
        if self.k_targets < 1:
            raise ValueError("k_targets must be at least 1")
        if self.stage not in ("warmup", "bootstrapped"):
            raise ValueError(f"unknown stage {self.stage!r}")
        names = [name for name, _ in self.variable_entries]
        if len(set(names)) != len(names):
            raise ValueError("variable names must be unique")


def build_prompt(spec: PromptSpec, shuffle_seed: int | None = None) -> list[dict]:
    """Render the prompt as a one-message chat; ``shuffle_seed=None`` keeps
    the variable lines in their given order."""
    entries = list(spec.variable_entries)
    if shuffle_seed is not None:
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(shuffle_seed)))
        entries = [entries[i] for i in rng.permutation(len(entries))]
    parts = [_HEADER.format(domain=spec.domain_blurb)]
    parts.extend(TIPS)
    # the blank line separating sections is doubled after the tips block
    body = "\n\n".join(parts) + "\n\n\n" + _JOB + "\n\n"
    body += "\n\n".join(f"<{name}>: {desc}" for name, desc in entries)
    if spec.stage == "bootstrapped":
        body += "\n\n" + _BOOTSTRAP_FOCUS
    body += "\n\n" + _ASK.format(k=spec.k_targets) + "\n\n" + _CLOSING
    return [{"role": "user", "content": body}]


_ANSWER_RE = re.compile(r"<Answer>(.*?)</Answer>", re.DOTALL | re.IGNORECASE)


def parse_answer(raw: str, valid_names: list[str]) -> tuple[list[str], list[str]]:
    """Extract the last <Answer> block and resolve names.

    Tokens are matched case-insensitively against ``valid_names``, falling
    back to unique-prefix matching; unmatched tokens are dropped and
    reported.  Returns (ordered unique names, diagnostics).
    """
    blocks = _ANSWER_RE.findall(raw)
    if not blocks:
        return [], ["no <Answer> block found"]
    tokens = [t.strip().strip("<>").strip() for t in blocks[-1].split(",")]
    lower = {name.lower(): name for name in valid_names}
    out: list[str] = []
    seen: set[str] = set()
    diags: list[str] = []
    for tok in tokens:
        if not tok:
            continue
        resolved = lower.get(tok.lower())
        if resolved is None:
            prefix = [n for n in valid_names if n.lower().startswith(tok.lower())]
            if len(prefix) == 1:
                resolved = prefix[0]
        if resolved is None:
            diags.append(f"unmatched token {tok!r}")
            continue
        if resolved not in seen:
            seen.add(resolved)
            out.append(resolved)
    return out, diags


@dataclass
class EndpointConfig:
    mode: str = "replay"  # live | cached | replay
    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"
    model: str = "gpt-4o"
    temperature: float = 0.7
    timeout: float = 60.0
    retries: int = 2
    cache_dir: str | None = None
    fixture_dir: str | None = None  # defaults to the bundled replay files

    def validate(self) -> None:
        if self.mode not in ("live", "cached", "replay"):
            raise ValueError(f"unknown llm mode {self.mode!r}")
        if self.mode == "cached" and not self.cache_dir:
            raise ValueError("cached mode needs cache_dir")


class FixtureMissingError(FileNotFoundError):
    pass


def _default_transport(url: str, headers: dict, payload: dict, timeout: float) -> dict:
    import httpx

    response = httpx.post(url, headers=headers, json=payload, timeout=timeout)
    response.raise_for_status()
    return response.json()


class LlmClient:
    """Mode-aware completions client with an injectable transport."""

    def __init__(self, cfg: EndpointConfig, transport=None):
        cfg.validate()
        self.cfg = cfg
        self.transport = transport or _default_transport
        self.network_calls = 0

    # -- fixture / cache plumbing -------------------------------------

    def _fixture_text(self, key: tuple[str, str, int]) -> str:
        dataset, stage, index = key
        filename = f"{dataset}_{stage}_{index}.txt"
        if self.cfg.fixture_dir:
            path = Path(self.cfg.fixture_dir) / filename
            if not path.exists():
                raise FixtureMissingError(str(path))
            return path.read_text(encoding="utf-8")
        ref = resources.files("ocdbench").joinpath("data", "replay", filename)
        if not ref.is_file():
            raise FixtureMissingError(f"bundled replay fixture {filename}")
        return ref.read_text(encoding="utf-8")

    def _cache_path(self, messages: list[dict]) -> Path:
        digest = hashlib.sha256(
            (self.cfg.model + "\x00" + json.dumps(messages, sort_keys=True)).encode("utf-8")
        ).hexdigest()
        return Path(self.cfg.cache_dir) / f"{digest}.txt"

    def _call_endpoint(self, messages: list[dict]) -> str:
        key = os.environ.get(self.cfg.api_key_env, "")
        headers = {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}
        payload = {
            "model": self.cfg.model,
            "messages": messages,
            "temperature": self.cfg.temperature,
        }
        url = self.cfg.base_url.rstrip("/") + "/chat/completions"
        last_error: Exception | None = None
        for attempt in range(self.cfg.retries + 1):
            try:
                self.network_calls += 1
                data = self.transport(url, headers, payload, self.cfg.timeout)
                return data["choices"][0]["message"]["content"]
            except Exception as exc:  # noqa: BLE001 - retried, then re-raised
                last_error = exc
                if attempt < self.cfg.retries:
                    time.sleep(min(2.0**attempt, 8.0))
        raise RuntimeError(f"llm endpoint failed after {self.cfg.retries + 1} attempts") from last_error

    # -- public API ----------------------------------------------------

    def complete(self, messages: list[dict], fixture_key: tuple[str, str, int] | None = None) -> str:
        if self.cfg.mode == "replay":
            if fixture_key is None:
                raise ValueError("replay mode needs a fixture key")
            return self._fixture_text(fixture_key)
        if self.cfg.mode == "cached":
            path = self._cache_path(messages)
            if path.exists():
                return path.read_text(encoding="utf-8")
            text = self._call_endpoint(messages)
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
            return text
        return self._call_endpoint(messages)


@dataclass
class AggregationResult:
    ranking: list[str]
    votes: dict[str, int] = field(default_factory=dict)
    diagnostics: list[str] = field(default_factory=list)


def aggregate_rankings(parsed_lists: list[list[str]]) -> AggregationResult:
    """Vote-count aggregation: more appearances rank first; ties break by
    better average list position, then lexicographically."""
    votes: dict[str, int] = {}
    positions: dict[str, list[int]] = {}
    for sample in parsed_lists:
        for pos, name in enumerate(sample):
            votes[name] = votes.get(name, 0) + 1
            positions.setdefault(name, []).append(pos)
    ranked = sorted(
        votes,
        key=lambda name: (-votes[name], sum(positions[name]) / len(positions[name]), name),
    )
    return AggregationResult(ranked, votes)


def self_consistent_targets(
    spec: PromptSpec,
    client: LlmClient,
    valid_names: list[str],
    n_samples: int = 5,
    seed: int = 0,
    fixture_dataset: str | None = None,
) -> AggregationResult:
    """Issue ``n_samples`` completions under distinct shuffles and return
    the vote-aggregated ranking over parsed names."""
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    parsed_lists: list[list[str]] = []
    diags: list[str] = []
    for index in range(n_samples):
        shuffle = None if index == 0 else _derive_shuffle_seed(seed, index)
        messages = build_prompt(spec, shuffle)
        fixture_key = None
        if client.cfg.mode == "replay":
            if fixture_dataset is None:
                raise ValueError("replay mode needs fixture_dataset")
            fixture_key = (fixture_dataset, spec.stage, index)
        raw = client.complete(messages, fixture_key=fixture_key)
        names, sample_diags = parse_answer(raw, valid_names)
        parsed_lists.append(names)
        diags.extend(f"sample {index}: {d}" for d in sample_diags)
    result = aggregate_rankings(parsed_lists)
    result.diagnostics = diags
    if not result.ranking:
        result.diagnostics.append("no valid names parsed from any sample")
    return result


def _derive_shuffle_seed(seed: int, index: int) -> int:
    mixed = hashlib.sha256(f"shuffle:{seed}:{index}".encode()).digest()
    return int.from_bytes(mixed[:8], "big")
