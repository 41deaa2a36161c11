import hashlib
import json
import random

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from screentk.schema import QuantBox, ScreenSchema, parse_schema
from screentk.taskgen import (
    TEMPLATES,
    BackendError,
    BackendTimeout,
    CompletionRequest,
    FileStubBackend,
    GenerationItem,
    GenerationStats,
    HttpBackend,
    QaPair,
    ResponseParseError,
    TemplateError,
    TransientBackendError,
    complete,
    generate_dataset,
    parse_nav_response,
    parse_qa_response,
    parse_rephrase_response,
    parse_summary_response,
    render_prompt,
    validate_nav_target,
    validate_qa,
)
from screentk.taskgen.parsing import split_nav, split_qa
from screentk.taskgen.templates import PromptTemplate, _scan

SCHEMA = parse_schema('TEXT "Hello world" 10 20 50 800 BUTTON "Sign in" 600 100 650 400')


# -- templates


def test_template_anchors():
    for name in ("qa", "navigation", "summarization"):
        assert TEMPLATES[name].body.startswith("You only speak JSON.")
    for name in ("rephrase_single", "rephrase_multiple"):
        assert TEMPLATES[name].body.startswith("List various ways to rephrase the answer.")


def test_render_empty_schema():
    out = render_prompt(TEMPLATES["qa"], ScreenSchema())
    assert out.endswith("}, ...]\n")
    assert "{THE SCREEN SCHEMA}" not in out


def test_render_escaped_braces():
    out = render_prompt(TEMPLATES["qa"], SCHEMA)
    assert "{question: the question," in out and "{{" not in out
    assert out.endswith('TEXT "Hello world" 10 20 50 800 BUTTON "Sign in" 600 100 650 400')


def test_render_nav_num_samples():
    out = render_prompt(TEMPLATES["navigation"], SCHEMA, {"num_samples": 3})
    assert "Generate 3 single-step navigation instructions" in out
    assert "`click 0 137 31 113`" in out


def test_render_rephrase_lists():
    out = render_prompt(TEMPLATES["rephrase_multiple"], None,
                        {"question": "'What is the name?'", "ui_elements": ["Jon", "Brown"],
                         "full_answer": "'The name is Jon Brown.'"})
    assert "Answer elements: ['Jon', 'Brown']\nFull answer: 'The name is Jon Brown.'\nRephrases:" in out


@pytest.mark.parametrize("name", sorted(TEMPLATES))
def test_render_leaves_no_placeholders(name):
    params = {"num_samples": 5, "question": "q", "ui_elements": ["a"], "full_answer": "f"}
    out = render_prompt(TEMPLATES[name], SCHEMA, params)
    # re-scan as a template: only literal text, no slots
    assert all(slot is None for _, slot in _scan(out.replace("{", "{{").replace("}", "}}")))
    for slot in TEMPLATES[name].slots:
        assert "{" + slot + "}" not in out


def test_unbound_placeholder():
    with pytest.raises(TemplateError):
        render_prompt(TEMPLATES["navigation"], SCHEMA)
    with pytest.raises(TemplateError):
        PromptTemplate("x", "screen_qa", "hello {NOT A SLOT}")


# -- backend


class Flaky:
    name = "flaky"

    def __init__(self, failures, exc=TransientBackendError):
        self.failures, self.calls, self.exc = failures, 0, exc

    def __call__(self, req):
        self.calls += 1
        if self.calls <= self.failures:
            raise self.exc("boom")
        return "ok:" + req.prompt


def test_complete_echo():
    r = complete(Flaky(0), CompletionRequest("hi"), sleep=lambda s: None)
    assert (r.text, r.attempts, r.backend) == ("ok:hi", 1, "flaky")


def test_complete_retries_then_succeeds():
    delays = []
    b = Flaky(2)
    r = complete(b, CompletionRequest("hi"), max_attempts=3, base_delay=1.0,
                 rng=random.Random(0), sleep=delays.append)
    assert r.attempts == 3 and b.calls == 3
    assert len(delays) == 2 and 0 <= delays[0] <= 1.0 and 0 <= delays[1] <= 2.0


def test_complete_gives_up_at_cap():
    b = Flaky(10, BackendTimeout)
    with pytest.raises(BackendError):
        complete(b, CompletionRequest("hi"), max_attempts=3, sleep=lambda s: None)
    assert b.calls == 3


def test_permanent_error_not_retried():
    b = Flaky(10, BackendError)
    with pytest.raises(BackendError):
        complete(b, CompletionRequest("hi"), max_attempts=3, sleep=lambda s: None)
    assert b.calls == 1


def test_request_validation_and_key():
    with pytest.raises(ValueError):
        CompletionRequest("x", max_tokens=0)
    blob = json.dumps({"prompt": "x", "temperature": 0.0, "max_tokens": 8}, sort_keys=True)
    assert CompletionRequest("x", 0.0, 8).key() == hashlib.sha256(blob.encode()).hexdigest()


def test_file_stub_backend(tmp_path):
    req = CompletionRequest("p")
    path = tmp_path / "stub.json"
    path.write_text(json.dumps({req.key(): "canned"}))
    stub = FileStubBackend(path)
    assert stub(req) == "canned"
    with pytest.raises(BackendError) as e:
        stub(CompletionRequest("other"))
    assert not isinstance(e.value, TransientBackendError)


def _http(handler):
    return HttpBackend("http://llm.test/complete", client=httpx.Client(transport=httpx.MockTransport(handler)))


def test_http_backend_roundtrip():
    seen = {}

    def handler(request):
        seen.update(json.loads(request.content))
        return httpx.Response(200, json={"text": "done"})

    assert _http(handler)(CompletionRequest("p", 0.5, 10)) == "done"
    assert seen == {"prompt": "p", "temperature": 0.5, "max_tokens": 10}


@pytest.mark.parametrize("status,exc", [(503, TransientBackendError), (429, TransientBackendError), (400, BackendError)])
def test_http_backend_errors(status, exc):
    with pytest.raises(exc) as e:
        _http(lambda r: httpx.Response(status, text="nope"))(CompletionRequest("p"))
    if status == 400:
        assert not isinstance(e.value, TransientBackendError)


def test_http_backend_timeout_is_transient():
    def handler(request):
        raise httpx.ReadTimeout("slow", request=request)

    with pytest.raises(BackendTimeout):
        _http(handler)(CompletionRequest("p"))


def test_http_backend_bad_body():
    with pytest.raises(BackendError):
        _http(lambda r: httpx.Response(200, json={"nope": 1}))(CompletionRequest("p"))


# -- parsers


def test_parse_qa():
    assert parse_qa_response('{"questions":[{"question":"q","answer":"a"}]}') == [QaPair("q", "a")]
    text = 'Sure! Here you go:\n{"questions": [{"question": "q", "answer": "a"}]} hope that helps'
    assert parse_qa_response(text) == [QaPair("q", "a")]
    with pytest.raises(ResponseParseError):
        parse_qa_response('{"questions":[{"question":"q"}]}')
    with pytest.raises(ResponseParseError):
        parse_qa_response("no json at all")


def test_parse_qa_bare_key_body():
    pairs, bad = split_qa('"questions": [{"question": "q1", "answer": "a1"}, {"question": "", "answer": "x"}]')
    assert pairs == [QaPair("q1", "a1")] and bad == 1


def test_parse_nav():
    text = '{"questions": [{"question": "open it", "answer": "click 0 0 999 999"}, {"question": "x", "answer": "tap 1 2 3 4"}]}'
    (s,) = parse_nav_response(text)
    assert s.target == QuantBox(0, 0, 999, 999)
    samples, bad = split_nav(text)
    assert bad == 1
    with pytest.raises(ResponseParseError):
        parse_nav_response('{"questions": [{"question": "x", "answer": "tap 1 2 3 4"}]}')


def test_parse_nav_inconsistent_example_coords():
    text = '"questions": [{"question": "the question", "answer": "click 0 137 31 113"}]'
    (s,) = parse_nav_response(text, order="raw")
    assert s.coords == (0, 137, 31, 113) and s.target is None
    assert s.target_text() == "click 0 137 31 113"
    # xmax < xmin under the default order
    with pytest.raises(ResponseParseError):
        parse_nav_response(text)


def test_parse_nav_rejects_out_of_range():
    samples, bad = split_nav('[{"question": "q", "answer": "click 0 0 1000 5"}]')
    assert samples == [] and bad == 1


def test_parse_summary():
    assert parse_summary_response('{"summary":"s"}') == "s"
    with pytest.raises(ResponseParseError):
        parse_summary_response("{}")
    assert parse_summary_response('Here it is: {"summary": "A login screen."}') == "A login screen."
    assert parse_summary_response('"summary": "bare body"') == "bare body"


def test_parse_rephrase():
    assert parse_rephrase_response("['male']") == ["male"]
    assert parse_rephrase_response("['on', 'enabled']") == ["on", "enabled"]
    assert parse_rephrase_response("['a','a','b']") == ["a", "b"]
    assert parse_rephrase_response("Rephrases: ['59°F', '59 Fahrenheits']") == ["59°F", "59 Fahrenheits"]
    assert parse_rephrase_response('["it\'s [x]", \'y\']') == ["it's [x]", "y"]
    with pytest.raises(ResponseParseError):
        parse_rephrase_response("nothing here")


@settings(max_examples=300)
@given(st.text(alphabet='{}[]"\':,questionanswerclick summary0123 \\\n', max_size=80))
def test_parsers_never_crash(text):
    for fn in (parse_qa_response, parse_nav_response, parse_summary_response, parse_rephrase_response):
        try:
            fn(text)
        except ResponseParseError:
            pass


def test_deeply_nested_input_is_structured_error():
    text = "[" * 5000 + "]" * 5000
    for fn in (parse_qa_response, parse_summary_response, parse_rephrase_response):
        with pytest.raises(ResponseParseError):
            fn(text)


# -- validation


def test_validate_qa():
    assert validate_qa(QaPair("q", "Hello"), SCHEMA) == "grounded"
    assert validate_qa(QaPair("q", "42"), SCHEMA) == "numeric"
    assert validate_qa(QaPair("q", "purple elephant"), SCHEMA) == "ungrounded"


def test_validate_nav_target():
    assert validate_nav_target(QuantBox(600, 100, 650, 400), SCHEMA) == "grounded"
    assert validate_nav_target(QuantBox(900, 900, 950, 950), SCHEMA) == "ungrounded"
    assert validate_nav_target(None, SCHEMA) == "ungrounded"


# -- pipeline


def qa_json(n, prefix=""):
    return json.dumps({"questions": [{"question": f"{prefix}q{i}", "answer": "Hello"} for i in range(n)]})


class ByPrompt:
    name = "by-prompt"

    def __init__(self, fn):
        self.fn = fn

    def __call__(self, req):
        return self.fn(req.prompt)


def test_generate_two_schemas():
    items = [GenerationItem(f"img{i}", SCHEMA) for i in range(2)]
    stats = GenerationStats()
    records = list(generate_dataset(items, TEMPLATES["qa"], ByPrompt(lambda p: qa_json(5)), stats=stats))
    assert len(records) == 10 and stats.rejected == 0 and stats.emitted == 10
    assert [r.image_ref for r in records] == ["img0"] * 5 + ["img1"] * 5
    assert records[0].task_type == "screen_qa"


def test_generate_malformed_response():
    other = parse_schema("TEXT 1 1 2 2")
    items = [GenerationItem("a", SCHEMA), GenerationItem("b", other)]
    backend = ByPrompt(lambda p: qa_json(5) if "Hello" in p else "I cannot do that.")
    stats = GenerationStats()
    records = list(generate_dataset(items, TEMPLATES["qa"], backend, stats=stats))
    assert len(records) == 5 and stats.rejected_responses == 1


def test_generate_empty_stream():
    stats = GenerationStats()
    assert list(generate_dataset([], TEMPLATES["qa"], ByPrompt(str), stats=stats)) == []
    assert stats.items == stats.emitted == stats.rejected == 0


def test_generate_backend_failure_does_not_abort():
    def fn(prompt):
        if "BUTTON" in prompt:
            raise BackendError("down")
        return qa_json(2)

    items = [GenerationItem("a", SCHEMA), GenerationItem("b", parse_schema('TEXT "Hello" 1 1 2 2'))]
    stats = GenerationStats()
    records = list(generate_dataset(items, TEMPLATES["qa"], ByPrompt(fn), stats=stats))
    assert len(records) == 2 and stats.backend_failures == 1


def test_generate_count_identity_and_order():
    rng = random.Random(3)
    responses = {}
    items = []
    for i in range(30):
        s = parse_schema(f'TEXT "w{i}" 1 1 2 2')
        items.append(GenerationItem(f"img{i}", s))
        entries = [{"question": f"q{j}", "answer": "Hello"} for j in range(rng.randint(0, 4))]
        entries += [{"question": "bad"}] * rng.randint(0, 2)
        responses[f'"w{i}"'] = json.dumps({"questions": entries})

    def fn(prompt):
        return next(v for k, v in responses.items() if prompt.endswith(k + " 1 1 2 2"))

    stats = GenerationStats()
    records = list(generate_dataset(items, TEMPLATES["qa"], ByPrompt(fn), stats=stats, max_in_flight=4))
    assert len(records) == stats.parsed_entries - stats.rejected_entries == stats.emitted
    refs = [r.image_ref for r in records]
    assert refs == sorted(refs, key=lambda r: int(r[3:]))


def test_generate_navigation_records():
    resp = json.dumps({"questions": [
        {"question": "Sign in", "answer": "click 600 100 650 400"},
        {"question": "Tap nowhere", "answer": "click 900 900 950 950"},
        {"question": "bad", "answer": "click 5 5 1 1"},
    ]})
    stats = GenerationStats()
    records = list(generate_dataset([GenerationItem("a", SCHEMA)], TEMPLATES["navigation"],
                                    ByPrompt(lambda p: resp), {"num_samples": 3}, stats=stats))
    assert [r.target_text for r in records] == ["click 600 100 650 400", "click 900 900 950 950"]
    assert [r.metadata["verdict"] for r in records] == ["grounded", "ungrounded"]
    assert stats.rejected_entries == 1 and stats.flagged == 1
    assert stats.flagged_fraction == 0.5 and stats.needs_review


def test_generate_summary_and_rephrase():
    recs = list(generate_dataset([GenerationItem("a", SCHEMA)], TEMPLATES["summarization"],
                                 ByPrompt(lambda p: '{"summary": "A greeting."}')))
    assert recs[0].task_type == "screen_summarization" and recs[0].target_text == "A greeting."
    item = GenerationItem("b", None, {"question": "'What is the gender?'", "ui_elements": ["Male"],
                                      "full_answer": "'The gender is male.'"})
    recs = list(generate_dataset([item], TEMPLATES["rephrase_single"], ByPrompt(lambda p: "['male', 'Male']")))
    assert recs[0].target_text == "male" and recs[0].metadata["candidates"] == ["male", "Male"]
