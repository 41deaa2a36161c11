"""Prompt templates for LLM task generation.

Bodies are kept verbatim. Inside a body, ``{{`` and ``}}`` are literal
braces and ``{NAME}`` is a placeholder slot filled by ``render_prompt``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping, Sequence

from ..schema import DEFAULT_ORDER, ScreenSchema, serialize_schema

QA_BODY = """\
You only speak JSON. Do not write text that isn't JSON.\x20
You are given the following mobile screenshot, described in words. Can you generate 5 questions regarding the content of the screenshot as well as the corresponding short answers to them? The answer should be as short as possible, containing only the necessary information. Your answer should be structured as follows:
questions: [
{{question: the question,
 answer: the answer
}}, ...]
{THE SCREEN SCHEMA}"""


NAVIGATION_BODY = """\
You only speak JSON. Do not write text that isn't JSON. You are given a mobile screenshot, described in words. Each UI element has a class, which is expressed in capital letter. The class is sometimes followed by a description, and then 4 numbers between 0 and 999 represent the quantized coordinates of each element.
Generate {num_samples} single-step navigation instructions and their corresponding answers based on the screenshot. Each answer should always start with `click`, followed by the coordinates of the element to click on, e.g. `click 0 137 31 113`.
Be creative with the questions, do not always use the same wording, refer to the UI elements only indirectly, and use imperative tense. Your answer should be structured as in the example below:

"questions": [
{{"question": "the question",
  "answer": "click 0 137 31 113"
}},
...
]
{THE SCREEN SCHEMA}"""


SUMMARIZATION_BODY = """\
You only speak JSON. Do not write text that isn't JSON.
You are given the following mobile screenshot, described in words.
Generate a summary of the screenshot in 2-3 sentences. Do not focus on specifically naming the various UI elements, but instead, focus on the content. Your answer should be structured as follows:
"summary": the screen summary
{THE SCREEN SCHEMA}"""


REPHRASE_SINGLE_BODY = """\
List various ways to rephrase the answer. The answer should be as short as possible, without extra words from the question. Use all provided elements in each answer. Provide the output in square brackets.

Here is an example:
Question: 'What's the percentage of humidity?'
Answer elements: ['65%
Full answer: 'The humidity is 65%
Rephrases: ['65%

Here is another example:
Question: 'What is the gender?'
Answer elements: ['Male']
Full answer: 'The gender is male.'
Rephrases: ['male']

Here is another example:
Question: 'What is the status of "24 hr clock"?'
Answer elements: ['on']
Full answer: 'The status is "on".'
Rephrases: ['on', 'enabled']

[...]

Now is your turn.
Question: {THE QUESTION}
Answer elements: {THE UI ELEMENT DESCRIPTION}
Full answer: {THE FULL-SENTENCE ANSWER}
Rephrases:"""


REPHRASE_MULTIPLE_BODY = """\
List various ways to rephrase the answer. The answer should be as short as possible, without extra words from the question. Use all provided elements in each answer. Provide the output in square brackets.

Here is an example:
Question: 'What's the temperature?'
Answer elements: ['59', '°F']
Full answer: 'The temperature is 59 degrees Fahrenheit.'
Rephrases: ['59°F', '59 Fahrenheits', '59 degrees Fahrenheit']

Here is another example:
Question: 'What is the name?'
Answer elements: ['Jon', 'Brown']
Full answer: 'The name is Jon Brown.'
Rephrases: ['Jon Brown']

Here is another example:
Question: 'What is the rest interval duration?'
Answer elements: ['00', ':', '34']
Full answer: 'The rest interval lasts 00:34.'
Rephrases: ['00:34', '34 seconds', '0 minutes and 34 seconds', '34 minutes', '0 hours and 34 minutes']

[...]

Now is your turn.
Question: {THE QUESTION}
Answer elements: {THE FIRST UI ELEMENT DESCRIPTION, ...}
Full answer: {THE FULL-SENTENCE ANSWER}
Rephrases:"""


# slot text -> parameter name used by render_prompt
SLOT_PARAMS = {
    "THE SCREEN SCHEMA": "schema",
    "num_samples": "num_samples",
    "THE QUESTION": "question",
    "THE UI ELEMENT DESCRIPTION": "ui_elements",
    "THE FIRST UI ELEMENT DESCRIPTION, ...": "ui_elements",
    "THE FULL-SENTENCE ANSWER": "full_answer",
}

_TOKEN = re.compile(r"\{\{|\}\}|\{([^{}]*)\}|[{}]")


class TemplateError(ValueError):
    pass


def _scan(body: str):
    """Yield (literal_text, slot_or_None) chunks of a template body."""
    pos = 0
    for m in _TOKEN.finditer(body):
        lit = body[pos:m.start()]
        tok = m.group(0)
        pos = m.end()
        if tok in ("{{", "}}"):
            yield lit + tok[0], None
        elif m.group(1) is not None:
            yield lit, m.group(1)
        else:
            raise TemplateError(f"stray {tok!r} at offset {m.start()}")
    yield body[pos:], None


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    task_type: str
    body: str

    def __post_init__(self):
        for _, slot in _scan(self.body):
            if slot is not None and slot not in SLOT_PARAMS:
                raise TemplateError(f"template {self.name!r} has undeclared placeholder {{{slot}}}")

    @property
    def slots(self) -> list[str]:
        return [slot for _, slot in _scan(self.body) if slot is not None]

    @property
    def params(self) -> set[str]:
        return {SLOT_PARAMS[s] for s in self.slots}


QA = PromptTemplate("qa", "screen_qa", QA_BODY)
NAVIGATION = PromptTemplate("navigation", "screen_navigation", NAVIGATION_BODY)
SUMMARIZATION = PromptTemplate("summarization", "screen_summarization", SUMMARIZATION_BODY)
REPHRASE_SINGLE = PromptTemplate("rephrase_single", "screen_qa", REPHRASE_SINGLE_BODY)
REPHRASE_MULTIPLE = PromptTemplate("rephrase_multiple", "screen_qa", REPHRASE_MULTIPLE_BODY)

TEMPLATES = {t.name: t for t in (QA, NAVIGATION, SUMMARIZATION, REPHRASE_SINGLE, REPHRASE_MULTIPLE)}


def quote_list(items: Sequence[str]) -> str:
    """Format strings the way the few-shot examples show lists: ['a', 'b']."""
    return "[" + ", ".join(repr(str(x)) for x in items) + "]"


def _format_value(value) -> str:
    if isinstance(value, (list, tuple)):
        return quote_list(value)
    return str(value)


def render_prompt(
    template: PromptTemplate,
    schema: ScreenSchema | None = None,
    params: Mapping[str, object] | None = None,
    *,
    order: str = DEFAULT_ORDER,
) -> str:
    """Fill every placeholder slot of ``template``.

    The schema slot takes the serialized ``schema``; other slots read from
    ``params`` (see SLOT_PARAMS). Lists are written as quoted lists.
    """
    values = dict(params or {})
    if schema is not None:
        values["schema"] = serialize_schema(schema, order=order)
    out = []
    for lit, slot in _scan(template.body):
        out.append(lit)
        if slot is None:
            continue
        key = SLOT_PARAMS[slot]
        if key not in values:
            raise TemplateError(f"unbound placeholder {{{slot}}} (parameter {key!r})")
        out.append(_format_value(values[key]))
    return "".join(out)
