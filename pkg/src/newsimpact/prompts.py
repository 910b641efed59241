"""Prompt templates for impact extraction and generation.

Template ids are part of the pipeline's stable interface:

  P1  summarize the negative impacts mentioned in a news article
  P2  describe the technology's functional capabilities from an article
  P3  zero-shot single-impact generation for chat models
  P4  zero-shot single-impact generation for instruct-served completion
      models (Mistral-style ``[INST]`` wrapper)

Template text is frozen; rendering substitutes the single placeholder
verbatim and must not alter any other byte (golden-file tested).
"""

from dataclasses import dataclass

# Literal marker a P1 reply uses to signal the article mentions no
# negative impacts. Matching of model output is tolerant (see
# extraction.parse_impacts); this constant is the canonical spelling
# used inside the template.
NO_IMPACTS_SENTINEL = "##No Impacts##"

INSTRUCT_OPEN = "<s>[INST]"
INSTRUCT_CLOSE = "[/INST]</s>"


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    template_text: str
    placeholder: str

    def __post_init__(self) -> None:
        token = "{" + self.placeholder + "}"
        if self.template_text.count(token) != 1:
            raise ValueError(
                f"template {self.id} must contain exactly one {token} occurrence"
            )


P1 = PromptTemplate(
    id="P1",
    template_text=(
        "Summarize the negative impacts explicitly mentioned in the following "
        "article. If no impacts are mentioned type only: ##No Impacts##. "
        "###Article###: {Article}"
    ),
    placeholder="Article",
)

P2 = PromptTemplate(
    id="P2",
    template_text=(
        "In a single paragraph, explain the functional capabilities of the "
        "technology described in the article, domain of use, stakeholders, and "
        "users without mentioning any negative aspects or concerns. Focus "
        "solely on the technology's features and its relevance to stakeholders "
        "and users. Be accurate. Do not make up information not described in "
        "the article. Let's think step by step. ###Article###: {Article}"
    ),
    placeholder="Article",
)

P3 = PromptTemplate(
    id="P3",
    template_text=(
        "You are given a functional description of a technology delimited by "
        "##Description. ##Description: {functional_description}. Write a "
        "single negative impact of this technology based on the provided "
        "functional description. Limit your answer to one sentence."
    ),
    placeholder="functional_description",
)

P4 = PromptTemplate(
    id="P4",
    template_text=(
        "<s>[INST] Describe a single negative impact of the technology "
        "described below and delimited by ##Description: ##Description "
        "{functional_description} Write a single negative impact of this "
        "technology based on the provided functional description. Limit your "
        "answer to one sentence. [/INST]</s>"
    ),
    placeholder="functional_description",
)

TEMPLATES: dict[str, PromptTemplate] = {t.id: t for t in (P1, P2, P3, P4)}


def render_prompt(template: PromptTemplate, substitution: str) -> str:
    """Replace the template's placeholder with ``substitution`` verbatim.

    Raises ValueError on an empty substitution; every other byte of the
    template is preserved unchanged.
    """
    if not substitution:
        raise ValueError(f"empty substitution for template {template.id}")
    token = "{" + template.placeholder + "}"
    return template.template_text.replace(token, substitution)
