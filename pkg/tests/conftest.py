import random
import string

import pytest
from hypothesis import strategies as st

from screentk.schema import MASK_TOKEN, QuantBox, ScreenSchema, UiElement

CLASSES = ["TEXT", "BUTTON", "IMAGE", "PICTOGRAM", "LIST_ITEM", "NAV_BAR2"]
PAYLOAD_CHARS = string.ascii_letters + string.digits + ' "\\\n()<>%.,-éü中'


def random_box(rng: random.Random) -> QuantBox:
    y0, y1 = sorted(rng.randrange(1000) for _ in range(2))
    x0, x1 = sorted(rng.randrange(1000) for _ in range(2))
    return QuantBox(y0, x0, y1, x1)


def random_payload(rng: random.Random) -> str:
    while True:
        s = "".join(rng.choice(PAYLOAD_CHARS) for _ in range(rng.randint(1, 12)))
        if s.strip():
            return s


def random_element(rng: random.Random, depth: int = 0) -> UiElement:
    kind = rng.random()
    payload, masked = None, False
    if kind < 0.15:
        payload, masked = MASK_TOKEN, True
    elif kind < 0.7:
        payload = random_payload(rng)
    n_children = rng.choice([0, 0, 0, 1, 2, 3]) if depth < 4 else 0
    children = tuple(random_element(rng, depth + 1) for _ in range(n_children))
    return UiElement(rng.choice(CLASSES), random_box(rng), payload, children, masked)


def random_schema(rng: random.Random) -> ScreenSchema:
    return ScreenSchema(tuple(random_element(rng) for _ in range(rng.randint(0, 6))))


@st.composite
def quant_boxes(draw):
    y0, y1 = sorted(draw(st.integers(0, 999)) for _ in range(2))
    x0, x1 = sorted(draw(st.integers(0, 999)) for _ in range(2))
    return QuantBox(y0, x0, y1, x1)


@pytest.fixture
def rng():
    return random.Random(1234)


ACCEPTANCE_LINES: list[str] = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    if "test_acceptance.py" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1]
    status = "PASS" if report.outcome == "passed" else "FAIL"
    ACCEPTANCE_LINES.append(f"{status}  {name}  ({report.duration:.2f}s)")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def make_generation_corpus(root):
    """Ten schema files plus a stub backend file with canned QA responses.

    Eight responses are well formed (five pairs each, one of them with an
    extra malformed entry); two are malformed. Expected: 40 records, 2
    rejected responses, 1 rejected entry.
    """
    import json

    from screentk.schema import parse_schema
    from screentk.taskgen import TEMPLATES, CompletionRequest, render_prompt

    root.mkdir(parents=True, exist_ok=True)
    stub, paths = {}, []
    for i in range(10):
        text = f'TEXT "Screen {i} title" 10 20 50 800 BUTTON "Next" 600 100 650 400 ( TEXT "Next" 610 120 640 380 )'
        path = root / f"screen_{i:02d}.schema"
        path.write_text(text + "\n", encoding="utf-8")
        paths.append(path)
        prompt = render_prompt(TEMPLATES["qa"], parse_schema(text))
        if i == 3:
            response = "I'm sorry, I can only describe screenshots in prose."
        elif i == 7:
            response = '{"questions": [{"question": "What is the title?", "answer": "Screen'
        else:
            entries = [{"question": f"Question {j} about screen {i}?", "answer": ["Next", "Screen", "title", "3", "Screen title"][j]}
                       for j in range(5)]
            if i == 5:
                entries.append({"question": "Missing answer?"})
            response = "Here you go:\n" + json.dumps({"questions": entries}, indent=1)
        stub[CompletionRequest(prompt).key()] = response
    stub_path = root / "stub.json"
    stub_path.write_text(json.dumps(stub, indent=1, sort_keys=True), encoding="utf-8")
    return paths, stub_path
