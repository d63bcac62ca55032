"""Canonical agent instruction templates and their rendering.

The templates live as text assets under `eventlens/templates/` and are treated
as immutable: the test suite pins a checksum for each file, so any edit is a
deliberate, reviewed change. A template consists of a static instruction
body optionally followed by a context block -- the lines from the first
"Scene Graph:" line onward -- whose `<angle bracket>` placeholders are
substituted at request-build time. The body becomes the system prompt and
the rendered context block is sent as a user text part.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

TEMPLATE_NAMES = (
    "scene_graph",
    "abstract",
    "prompt_agent",
    "geo_direct",
    "temporal_direct",
    "event_direct",
    "geo_cross",
    "temporal_cross",
    "event_cross",
    "zeroshot_cot",
    "detective",
)

# Placeholder tokens exactly as they appear inside the template assets.
GRAPH_PLACEHOLDER = "<generated scene graph>"
ASG_PLACEHOLDER = "<abstract added scene graph>"
CROSS_PLACEHOLDERS = {
    "geo_cross": "<abstract added scene graph + event agent output + temporal agent output>",
    "temporal_cross": "<abstract added scene graph + event agent output + geospatial agent output>",
    "event_cross": "<abstract added scene graph + geospatial agent output + temporal agent output>",
}
SPECIALIST_PROMPT_PLACEHOLDERS = {
    "event": "<prompt agent generated event agent prompt>",
    "temporal": "<prompt agent generated temporal agent prompt>",
    "geo": "<prompt agent generated geospatial agent prompt>",
}

# Substituted when the prompt agent is disabled or permanently fails.
DEFAULT_SPECIALIST_PROMPTS = {
    "event": "Analyze the image for event information.",
    "temporal": "Analyze the image for temporal information.",
    "geo": "Analyze the image for geospatial information.",
}

_CONTEXT_LINE_RE = re.compile(r"^Scene Graph:", re.MULTILINE)


def load_template(name: str) -> str:
    if name not in TEMPLATE_NAMES:
        raise ValueError(f"unknown template {name!r}")
    return _read_template(name)


@lru_cache(maxsize=None)
def _read_template(name: str) -> str:
    return (
        resources.files("eventlens")
        .joinpath(f"templates/{name}.txt")
        .read_text(encoding="utf-8")
    )


def template_checksums() -> dict[str, str]:
    """sha256 hex digest per template, for manifests and the pin test."""
    return {
        name: hashlib.sha256(load_template(name).encode("utf-8")).hexdigest()
        for name in TEMPLATE_NAMES
    }


@dataclass(frozen=True)
class SplitTemplate:
    system: str
    context: str | None


def split_template(name: str) -> SplitTemplate:
    """Separate the instruction body from the trailing context block."""
    text = load_template(name)
    match = _CONTEXT_LINE_RE.search(text)
    if match is None:
        return SplitTemplate(system=text.rstrip("\n"), context=None)
    return SplitTemplate(
        system=text[: match.start()].rstrip("\n"),
        context=text[match.start() :].rstrip("\n"),
    )


def render_context(context: str, substitutions: dict[str, str]) -> str:
    """Replace placeholder tokens in a context block with real content."""
    for placeholder, content in substitutions.items():
        context = context.replace(placeholder, content)
    return context
