import json
import time

import httpx
import pytest
from hypothesis import given, strategies as st

from mmrag.augmentation import EMPTY_BUNDLE, assemble_prompt
from mmrag.corpus import PageImage
from mmrag.errors import ConfigurationError, TransportError
from mmrag.generation import (
    AnswerLetter,
    FixedLetterGenerator,
    GenerationRecord,
    GeneratorConfig,
    HttpChatGenerator,
    OracleGenerator,
    ParseFailure,
    RandomGenerator,
    complete,
    extract_answer,
    parse_payload_choices,
)
from mmrag.testing import make_png


def chat_response(text, prompt_tokens=100, completion_tokens=20):
    return {
        "choices": [{"message": {"role": "assistant", "content": text}}],
        "usage": {
            "prompt_tokens": prompt_tokens,
            "completion_tokens": completion_tokens,
            "total_tokens": prompt_tokens + completion_tokens,
        },
    }


def cfg(**overrides):
    defaults = dict(endpoint="http://llm.local/v1", model_id="test-model", api_key="k")
    defaults.update(overrides)
    return GeneratorConfig(**defaults)


def payload_for(item):
    return assemble_prompt(item, EMPTY_BUNDLE)


# ---------------------------------------------------------------------------
# extract_answer
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "raw,expected",
    [
        ('{"query_answer": "B"}', AnswerLetter.B),
        ('{"query_answer":"D"}', AnswerLetter.D),
        ('Sure! {"query_answer":"D"} hope that helps', AnswerLetter.D),
        ("query_answer: C", AnswerLetter.C),
        ("A", AnswerLetter.A),
        ('{"query_answer": "b"}', AnswerLetter.B),
    ],
)
def test_extract_answer_accepts(raw, expected):
    assert extract_answer(raw) is expected


@pytest.mark.parametrize(
    "raw",
    ['{"query_answer": "E"}', "", "the answer is probably right", "AB", "a sentence. B."],
)
def test_extract_answer_rejects(raw):
    assert isinstance(extract_answer(raw), ParseFailure)


def test_extract_answer_round_trip_all_letters():
    for letter in AnswerLetter:
        raw = json.dumps({"query_answer": letter.value})
        assert extract_answer(raw) is letter


@given(st.text(max_size=200))
def test_extract_answer_total(raw):
    result = extract_answer(raw)
    assert isinstance(result, (AnswerLetter, ParseFailure))


# ---------------------------------------------------------------------------
# complete / HttpChatGenerator
# ---------------------------------------------------------------------------


def test_complete_captures_reported_usage(valid_item):
    def handler(request: httpx.Request) -> httpx.Response:
        body = json.loads(request.content)
        assert body["model"] == "test-model"
        assert body["messages"][0]["content"][0]["type"] == "text"
        return httpx.Response(200, json=chat_response('{"query_answer": "A"}', 100, 20))

    text, record = complete(
        payload_for(valid_item), cfg(), transport=httpx.MockTransport(handler)
    )
    assert extract_answer(text) is AnswerLetter.A
    assert (record.prompt_tokens, record.completion_tokens) == (100, 20)
    assert not record.usage_estimated
    assert record.ttft_ms is None


def test_complete_estimates_usage_when_missing(valid_item):
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(
            200, json={"choices": [{"message": {"content": "B"}}]}
        )

    _, record = complete(
        payload_for(valid_item), cfg(), transport=httpx.MockTransport(handler)
    )
    assert record.usage_estimated
    assert record.prompt_tokens > 0
    assert record.completion_tokens == 1


def test_retry_then_success(valid_item):
    calls = {"n": 0}

    def handler(request: httpx.Request) -> httpx.Response:
        calls["n"] += 1
        if calls["n"] <= 2:
            return httpx.Response(500, text="transient")
        return httpx.Response(200, json=chat_response('{"query_answer": "C"}'))

    text, record = complete(
        payload_for(valid_item), cfg(retries=2), transport=httpx.MockTransport(handler)
    )
    assert extract_answer(text) is AnswerLetter.C
    assert record.retries == 2
    assert calls["n"] == 3


def test_retries_exhausted(valid_item):
    def handler(request: httpx.Request) -> httpx.Response:
        return httpx.Response(500, text="down")

    with pytest.raises(TransportError):
        complete(
            payload_for(valid_item), cfg(retries=1), transport=httpx.MockTransport(handler)
        )


def test_image_limit_precondition(valid_item):
    image = PageImage(width_px=8, height_px=8, data=make_png(1, 8, 8))
    payload = assemble_prompt(valid_item, EMPTY_BUNDLE)
    payload = type(payload)(
        text=payload.text, images=(image,) * 3, option_order=payload.option_order
    )
    client = HttpChatGenerator(cfg(max_images=2))
    with pytest.raises(ValueError, match="images"):
        client.generate(payload)


def test_streaming_ttft(valid_item):
    def handler(request: httpx.Request) -> httpx.Response:
        def body():
            first = {
                "choices": [{"delta": {"content": '{"query_answer":'}}],
            }
            second = {
                "choices": [{"delta": {"content": ' "D"}'}}],
                "usage": {"prompt_tokens": 50, "completion_tokens": 5},
            }
            time.sleep(0.05)
            yield f"data: {json.dumps(first)}\n\n".encode()
            yield f"data: {json.dumps(second)}\n\n".encode()
            yield b"data: [DONE]\n\n"

        return httpx.Response(200, content=body())

    text, record = complete(
        payload_for(valid_item),
        cfg(streaming=True),
        transport=httpx.MockTransport(handler),
    )
    assert extract_answer(text) is AnswerLetter.D
    assert record.ttft_ms is not None
    assert record.ttft_ms >= 45.0  # the stub delays the first token by 50 ms
    assert record.latency_s >= record.ttft_ms / 1000.0
    assert (record.prompt_tokens, record.completion_tokens) == (50, 5)


def test_temperature_and_seed_serialized(valid_item):
    seen = {}

    def handler(request: httpx.Request) -> httpx.Response:
        seen.update(json.loads(request.content))
        return httpx.Response(200, json=chat_response("A"))

    complete(
        payload_for(valid_item),
        cfg(temperature=0.7, seed=42),
        transport=httpx.MockTransport(handler),
    )
    assert seen["temperature"] == 0.7
    assert seen["seed"] == 42


def test_temperature_omitted_when_absent(valid_item):
    seen = {}

    def handler(request: httpx.Request) -> httpx.Response:
        seen.update(json.loads(request.content))
        return httpx.Response(200, json=chat_response("A"))

    complete(payload_for(valid_item), cfg(), transport=httpx.MockTransport(handler))
    assert "temperature" not in seen
    assert "seed" not in seen


def test_generator_config_validation():
    with pytest.raises(ConfigurationError):
        cfg(retries=9)
    with pytest.raises(ConfigurationError):
        cfg(temperature=-0.1)


def test_generation_record_invariants():
    with pytest.raises(ValueError):
        GenerationRecord(prompt_tokens=-1, completion_tokens=0, latency_s=0.0)
    with pytest.raises(ValueError):
        GenerationRecord(prompt_tokens=0, completion_tokens=0, latency_s=0.01, ttft_ms=100.0)


# ---------------------------------------------------------------------------
# stub generators
# ---------------------------------------------------------------------------


def test_oracle_answers_gold_under_permutation(valid_item):
    oracle = OracleGenerator({valid_item.question: valid_item.gold_text()})
    payload = assemble_prompt(valid_item, EMPTY_BUNDLE, order=(3, 2, 1, 0))
    raw, _ = oracle.generate(payload)
    # gold B sits at display position C under (3,2,1,0)
    assert extract_answer(raw) is AnswerLetter.C


def test_parse_payload_choices_round_trip(valid_item):
    payload = assemble_prompt(valid_item, EMPTY_BUNDLE)
    question, options = parse_payload_choices(payload.text)
    assert question == valid_item.question
    assert options == dict(zip("ABCD", valid_item.options))


def test_random_generator_deterministic(valid_item):
    payload = payload_for(valid_item)
    a = [RandomGenerator(seed=9).generate(payload)[0] for _ in range(10)]
    b = [RandomGenerator(seed=9).generate(payload)[0] for _ in range(10)]
    assert a == b


def test_fixed_letter_generator(valid_item):
    raw, _ = FixedLetterGenerator("A").generate(payload_for(valid_item))
    assert extract_answer(raw) is AnswerLetter.A
    with pytest.raises(ConfigurationError):
        FixedLetterGenerator("Z")
