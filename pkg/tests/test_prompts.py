from __future__ import annotations

import pytest

from eventlens.prompts import (
    ASG_PLACEHOLDER,
    CROSS_PLACEHOLDERS,
    DEFAULT_SPECIALIST_PROMPTS,
    GRAPH_PLACEHOLDER,
    SPECIALIST_PROMPT_PLACEHOLDERS,
    TEMPLATE_NAMES,
    load_template,
    render_context,
    split_template,
    template_checksums,
)

# Canonical digests of the instruction templates. These files are contract
# text: any change must be deliberate and reviewed, so the pins live here.
PINNED_CHECKSUMS = {
    "scene_graph": "91d56a892d805f0b82c1d4aa40c50c624b2a8fd67e98263e1a649fadd939dff5",
    "abstract": "7bc9410a72e252b436b9880e05ab99c549749ae373ffd0f9bd98a4285ba838d3",
    "prompt_agent": "e7222a3fe783acf740e074eedd481593cd3f6617e304eec681ac0a89ae66dee2",
    "geo_direct": "135970da37f6469e4c482fb45c0e19f8fb7091865196140bed6850068b511bee",
    "temporal_direct": "328fb42e00b2d5c85c8b0f3fa44fa1e773a69da8f122b4c31494c9559e067913",
    "event_direct": "de3837e1fa87ebf46231dde40727bdeb022e7a124c5e86133a4c7c2d78e05095",
    "geo_cross": "3533251a8b53df6dfe0d9a1f9bc0bc183a68c1fbc27dfa0cb38258092a4aa999",
    "temporal_cross": "e7c483829a0a1f4199955b8cb5588c5bc9d480a5e336fa77e4e4f3420e9b0c0b",
    "event_cross": "6a729613bee6c9025d3395741c509c23ee1fb3dbbd05c9f0d9e131e1ff05359c",
    "zeroshot_cot": "63411890d41e762b3e895888a74117b4ca72dab23b20435e738ed47069904498",
    "detective": "196c45e8be4cbca464fcf775f5690aeee1b1220d20802ca860c3b9961c499190",
}


def test_checksums_pinned():
    assert template_checksums() == PINNED_CHECKSUMS


def test_all_templates_load_nonempty():
    for name in TEMPLATE_NAMES:
        assert load_template(name).strip()


def test_unknown_template_rejected():
    with pytest.raises(ValueError):
        load_template("nonexistent")


class TestSplit:
    def test_templates_without_context_block(self):
        for name in ("scene_graph", "zeroshot_cot", "detective"):
            split = split_template(name)
            assert split.context is None
            assert "Scene Graph:" not in split.system.split("\n")[0]

    def test_abstract_context_block(self):
        split = split_template("abstract")
        assert split.context == f"Scene Graph: {GRAPH_PLACEHOLDER}"
        assert "generate a comprehensive abstract idea" in split.system
        assert GRAPH_PLACEHOLDER not in split.system

    def test_prompt_agent_context_has_no_space_after_colon(self):
        split = split_template("prompt_agent")
        assert split.context == f"Scene Graph:{ASG_PLACEHOLDER}"

    def test_direct_templates_carry_specialist_prompt_line(self):
        for role in ("event", "temporal", "geo"):
            split = split_template(f"{role}_direct")
            assert split.context is not None
            assert ASG_PLACEHOLDER in split.context
            assert SPECIALIST_PROMPT_PLACEHOLDERS[role] in split.context

    def test_cross_templates_carry_peer_placeholder(self):
        for stage, placeholder in CROSS_PLACEHOLDERS.items():
            split = split_template(stage)
            assert placeholder in split.context

    def test_cross_instructions_mention_ignoring_na(self):
        for stage in CROSS_PLACEHOLDERS:
            assert "NA" in split_template(stage).system


class TestRender:
    def test_substitution(self):
        context = f"Scene Graph: {GRAPH_PLACEHOLDER}"
        rendered = render_context(context, {GRAPH_PLACEHOLDER: '{"entities": []}'})
        assert rendered == 'Scene Graph: {"entities": []}'
        assert "<" not in rendered

    def test_multiple_substitutions(self):
        split = split_template("geo_direct")
        rendered = render_context(
            split.context,
            {
                ASG_PLACEHOLDER: "{}",
                SPECIALIST_PROMPT_PLACEHOLDERS["geo"]: "look at the signage",
            },
        )
        assert "Scene Graph: {}" in rendered
        assert "Prompt: look at the signage" in rendered


def test_default_specialist_prompts_cover_all_roles():
    assert set(DEFAULT_SPECIALIST_PROMPTS) == {"event", "temporal", "geo"}
    for role, text in DEFAULT_SPECIALIST_PROMPTS.items():
        assert text == f"Analyze the image for {role if role != 'geo' else 'geospatial'} information."
