"""The layered extraction pipeline.

Stages run strictly in order for each image:

1. scene graph agent -- entities, attributes, relationships;
2. abstract agent -- merges a one-line higher-level idea into the graph;
3. prompt agent -- writes a tailored prompt for each extraction specialist;
4. direct extraction -- event, temporal, and geospatial specialists answer
   independently from the image, the augmented graph, and their prompt;
5. cross extraction (full_cross / partial_cross modes) -- specialists run
   again with the other agents' first-pass outputs appended, which lets
   them ground their answer in each other's evidence.

In `full_cross` each specialist sees both peers' direct outputs; in
`partial_cross` only the event output is fed to the temporal and geospatial
specialists and the event result is carried over unchanged. Two single-call
baseline modes (`zeroshot_cot`, `detective`) produce the same prediction
bundle from one request.

Every stage either yields a typed record or is degraded to an all-absent
one; a degraded cross stage falls back to its direct-stage result. The
pipeline always completes with a PipelineResult.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from . import prompts as prompt_assets
from .backend import (
    Backend,
    BackendRequest,
    CaptureLog,
    ImagePart,
    StageOutcome,
    TextPart,
    call_and_parse,
)
from .schema import (
    AugmentedSceneGraph,
    EventPrediction,
    GeoPrediction,
    ImageRecord,
    PromptSpec,
    SceneGraph,
    SpecialistPrompts,
    TemporalPrediction,
    asg_to_wire,
    event_to_wire,
    geo_to_wire,
    scene_graph_to_wire,
    temporal_to_wire,
)

MODES = ("direct", "partial_cross", "full_cross", "zeroshot_cot", "detective")

PUBLIC_FIGURES_PREFIX = "Public figures present: "

# Stages whose instructions reference the externally supplied figure list.
_FIGURE_AWARE_STAGES = {"scene_graph", "zeroshot_cot", "detective"}


@dataclass(frozen=True)
class PipelineConfig:
    mode: str = "full_cross"
    include_image_in_prompt_layer: bool = True
    include_image_in_extraction: bool = True
    enable_scene_graph: bool = True
    enable_abstract: bool = True
    enable_prompt_agent: bool = True
    max_parse_retries: int = 2

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown pipeline mode {self.mode!r}")


@dataclass(frozen=True)
class PredictionBundle:
    event: EventPrediction
    temporal: TemporalPrediction
    geo: GeoPrediction

    def to_json(self) -> dict:
        return {
            "event": event_to_wire(self.event),
            "temporal": temporal_to_wire(self.temporal),
            "geo": geo_to_wire(self.geo),
        }


@dataclass
class PipelineResult:
    image_id: str
    scene_graph: AugmentedSceneGraph
    prompts: SpecialistPrompts
    direct: PredictionBundle
    final: PredictionBundle
    degraded_stages: list[str] = field(default_factory=list)
    exhausted_stages: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


def _default_prompts() -> SpecialistPrompts:
    defaults = prompt_assets.DEFAULT_SPECIALIST_PROMPTS
    return SpecialistPrompts(
        event_prompt=PromptSpec(defaults["event"], ""),
        temporal_prompt=PromptSpec(defaults["temporal"], ""),
        geo_prompt=PromptSpec(defaults["geo"], ""),
    )


def _serialize(obj: dict) -> str:
    return json.dumps(obj, indent=2, ensure_ascii=False)


def _cross_context_json(
    asg: AugmentedSceneGraph, peers: dict[str, dict]
) -> str:
    """Augmented graph plus peer direct outputs, as one unambiguous object.

    Degraded peers appear as all-NA objects rather than being dropped; the
    cross-stage instructions explicitly tell agents to ignore NA values.
    """
    context: dict = {"scene_graph": scene_graph_to_wire(asg.graph)}
    if asg.abstract_idea is not None:
        context["abstract_idea"] = asg.abstract_idea
    context["peer_outputs"] = peers
    return _serialize(context)


class _StageRunner:
    """Builds per-stage requests for one image and tracks degradation."""

    def __init__(
        self,
        record: ImageRecord,
        cfg: PipelineConfig,
        backend: Backend,
        capture: CaptureLog | None,
    ):
        self.record = record
        self.cfg = cfg
        self.backend = backend
        self.capture = capture
        self.degraded: list[str] = []
        self.exhausted: list[str] = []
        self.warnings: list[str] = []
        self.image_part = ImagePart(
            data=record.load_image_bytes(), media_type=record.image_media_type()
        )

    def call(
        self,
        stage: str,
        template_name: str,
        schema: str,
        substitutions: dict[str, str] | None = None,
        include_image: bool = True,
    ) -> StageOutcome:
        template = prompt_assets.split_template(template_name)
        parts: list[TextPart | ImagePart] = []
        if template.context is not None:
            parts.append(
                TextPart(prompt_assets.render_context(template.context, substitutions or {}))
            )
        if include_image:
            parts.append(self.image_part)
        if stage in _FIGURE_AWARE_STAGES and self.record.public_figures:
            parts.append(TextPart(PUBLIC_FIGURES_PREFIX + ", ".join(self.record.public_figures)))
        if not parts:
            # Image excluded and no context block: keep the request well-formed.
            parts.append(TextPart("(no image provided)"))
        request = BackendRequest(
            stage=stage,
            system_prompt=template.system,
            user_parts=tuple(parts),
            schema=schema,
            image_id=self.record.id,
        )
        outcome = call_and_parse(
            request, self.backend, self.cfg.max_parse_retries, self.capture
        )
        if outcome.degraded:
            self.degraded.append(stage)
        if outcome.exhausted:
            self.exhausted.append(stage)
        self.warnings.extend(outcome.warnings)
        return outcome


def build_scene_graph(runner: _StageRunner) -> SceneGraph:
    """First layer: structured entities and relationships from the image."""
    if not runner.cfg.enable_scene_graph:
        return SceneGraph()
    outcome = runner.call("scene_graph", "scene_graph", "scene_graph")
    return outcome.record


def add_abstract(runner: _StageRunner, graph: SceneGraph) -> AugmentedSceneGraph:
    """Second layer: infer the image's higher-level idea and merge it in."""
    if not runner.cfg.enable_abstract:
        return AugmentedSceneGraph(graph=graph)
    outcome = runner.call(
        "abstract",
        "abstract",
        "abstract",
        substitutions={
            prompt_assets.GRAPH_PLACEHOLDER: _serialize(scene_graph_to_wire(graph))
        },
    )
    idea, reasoning = outcome.record
    return AugmentedSceneGraph(graph=graph, abstract_idea=idea, abstract_reasoning=reasoning)


def generate_prompts(runner: _StageRunner, asg: AugmentedSceneGraph) -> SpecialistPrompts:
    """Third layer: tailored instructions for the three specialists."""
    if not runner.cfg.enable_prompt_agent:
        return _default_prompts()
    outcome = runner.call(
        "prompts",
        "prompt_agent",
        "prompts",
        substitutions={prompt_assets.ASG_PLACEHOLDER: _serialize(asg_to_wire(asg))},
        include_image=runner.cfg.include_image_in_prompt_layer,
    )
    generated: SpecialistPrompts = outcome.record
    defaults = _default_prompts()
    # Any missing specialist prompt individually falls back to its default.
    return SpecialistPrompts(
        event_prompt=generated.event_prompt if generated.event_prompt.prompt else defaults.event_prompt,
        temporal_prompt=generated.temporal_prompt if generated.temporal_prompt.prompt else defaults.temporal_prompt,
        geo_prompt=generated.geo_prompt if generated.geo_prompt.prompt else defaults.geo_prompt,
    )


_SPECIALISTS = (
    ("event", "event_direct", "event"),
    ("temporal", "temporal_direct", "temporal"),
    ("geo", "geo_direct", "geo"),
)


def direct_extract(
    runner: _StageRunner, asg: AugmentedSceneGraph, specialist_prompts: SpecialistPrompts
) -> PredictionBundle:
    """Fourth layer: the three specialists answer independently."""
    asg_json = _serialize(asg_to_wire(asg))
    results = {}
    for role, stage, schema in _SPECIALISTS:
        spec: PromptSpec = getattr(specialist_prompts, f"{role}_prompt")
        outcome = runner.call(
            stage,
            stage,
            schema,
            substitutions={
                prompt_assets.ASG_PLACEHOLDER: asg_json,
                prompt_assets.SPECIALIST_PROMPT_PLACEHOLDERS[role]: spec.prompt,
            },
            include_image=runner.cfg.include_image_in_extraction,
        )
        results[role] = outcome.record
    return PredictionBundle(
        event=results["event"], temporal=results["temporal"], geo=results["geo"]
    )


def cross_extract(
    runner: _StageRunner,
    asg: AugmentedSceneGraph,
    specialist_prompts: SpecialistPrompts,
    direct: PredictionBundle,
) -> PredictionBundle:
    """Fifth layer: specialists re-run with each other's first-pass output.

    partial_cross re-runs only the temporal and geospatial specialists with
    the direct event output appended; full_cross re-runs all three with
    both peers' outputs. A degraded cross agent falls back to its direct
    result.
    """
    partial = runner.cfg.mode == "partial_cross"
    event_wire = event_to_wire(direct.event)
    temporal_wire = temporal_to_wire(direct.temporal)
    geo_wire = geo_to_wire(direct.geo)
    peer_sets = {
        "geo": {"event": event_wire} if partial else {"event": event_wire, "temporal": temporal_wire},
        "temporal": {"event": event_wire} if partial else {"event": event_wire, "geospatial": geo_wire},
        "event": {"geospatial": geo_wire, "temporal": temporal_wire},
    }
    results = {"event": direct.event, "temporal": direct.temporal, "geo": direct.geo}
    for role, _, schema in _SPECIALISTS:
        if partial and role == "event":
            continue  # event result is carried over from direct unchanged
        stage = f"{role}_cross"
        spec: PromptSpec = getattr(specialist_prompts, f"{role}_prompt")
        outcome = runner.call(
            stage,
            stage,
            schema,
            substitutions={
                prompt_assets.CROSS_PLACEHOLDERS[stage]: _cross_context_json(asg, peer_sets[role]),
                prompt_assets.SPECIALIST_PROMPT_PLACEHOLDERS[role]: spec.prompt,
            },
            include_image=runner.cfg.include_image_in_extraction,
        )
        if not outcome.degraded:
            results[role] = outcome.record
    return PredictionBundle(
        event=results["event"], temporal=results["temporal"], geo=results["geo"]
    )


def _run_baseline(runner: _StageRunner) -> PipelineResult:
    """Single-call baseline modes producing the same prediction bundle."""
    stage = runner.cfg.mode
    outcome = runner.call(stage, stage, "combined")
    temporal, geo, event = outcome.record
    bundle = PredictionBundle(event=event, temporal=temporal, geo=geo)
    return PipelineResult(
        image_id=runner.record.id,
        scene_graph=AugmentedSceneGraph(),
        prompts=_default_prompts(),
        direct=bundle,
        final=bundle,
        degraded_stages=runner.degraded,
        exhausted_stages=runner.exhausted,
        warnings=runner.warnings,
    )


def run_pipeline(
    record: ImageRecord,
    cfg: PipelineConfig,
    backend: Backend,
    capture: CaptureLog | None = None,
) -> PipelineResult:
    """Run every stage for one image and always return a PipelineResult.

    Only an unreadable image raises (propagating the I/O error); any agent
    failure degrades the affected stage and the run carries on.
    """
    runner = _StageRunner(record, cfg, backend, capture)
    if cfg.mode in ("zeroshot_cot", "detective"):
        return _run_baseline(runner)
    graph = build_scene_graph(runner)
    asg = add_abstract(runner, graph)
    specialist_prompts = generate_prompts(runner, asg)
    direct = direct_extract(runner, asg, specialist_prompts)
    if cfg.mode == "direct":
        final = direct
    else:
        final = cross_extract(runner, asg, specialist_prompts, direct)
    return PipelineResult(
        image_id=record.id,
        scene_graph=asg,
        prompts=specialist_prompts,
        direct=direct,
        final=final,
        degraded_stages=runner.degraded,
        exhausted_stages=runner.exhausted,
        warnings=runner.warnings,
    )
