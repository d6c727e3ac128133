import json
import re

import httpx
import pytest

from langnav import prompts
from langnav.errors import ApiError, ConfigError, OracleError, ScriptError, TransportError
from langnav.llm import (AffinityTable, CompletionParams, HttpCompletionModel, ModelConfig, OracleModel,
                         RecordingModel, ScriptedModel, build_model)
from langnav.llm.http import request_body
from langnav.llm.stub import StubServer

URL = "http://llm.test/v1/chat/completions"


def completion(content: str) -> httpx.Response:
    return httpx.Response(200, json={"id": "1", "choices": [
        {"index": 0, "finish_reason": "stop", "message": {"role": "assistant", "content": content}}]})


def http_model(handler, sleeps=None, **kw) -> HttpCompletionModel:
    sleeps = sleeps if sleeps is not None else []
    return HttpCompletionModel(URL, "m", api_key="k", transport=httpx.MockTransport(handler),
                               sleep=sleeps.append, **kw)


def test_happy_path_sends_exact_body_and_auth():
    seen = []

    def handler(request):
        seen.append(request)
        return completion("hello")

    model = http_model(handler)
    assert model.complete("hi", CompletionParams(0.0, 64)) == "hello"
    assert seen[0].content == b'{"model":"m","messages":[{"role":"user","content":"hi"}],"temperature":0.0,"max_tokens":64}'
    assert seen[0].headers["authorization"] == "Bearer k"
    assert model.last_request_body == seen[0].content


def test_stop_sequences_and_unicode_are_serialized():
    body = request_body("m", "café", CompletionParams(0.5, 8, ("\n",)))
    assert json.loads(body) == {"model": "m", "messages": [{"role": "user", "content": "café"}],
                                "temperature": 0.5, "max_tokens": 8, "stop": ["\n"]}
    assert "café".encode() in body


def test_429_is_retried_after_one_second():
    replies = [httpx.Response(429, json={"error": {"message": "slow down"}}), completion("ok")]
    sleeps: list = []
    assert http_model(lambda r: replies.pop(0), sleeps).complete("hi") == "ok"
    assert sleeps == [1.0]


def test_exhaustion_raises_transport_error_after_backoff():
    sleeps: list = []
    calls = []

    def handler(request):
        calls.append(request)
        return httpx.Response(503, text="busy")

    with pytest.raises(TransportError) as err:
        http_model(handler, sleeps).complete("hi")
    assert sleeps == [1.0, 2.0] and len(calls) == 3
    assert err.value.request_id


def test_client_error_is_not_retried():
    calls = []

    def handler(request):
        calls.append(request)
        return httpx.Response(400, text="bad request")

    with pytest.raises(ApiError) as err:
        http_model(handler).complete("hi")
    assert err.value.status == 400 and len(calls) == 1


@pytest.mark.parametrize("exc", [httpx.ReadTimeout("slow"), httpx.ConnectError("refused")])
def test_timeouts_and_connection_failures_are_retried(exc):
    outcomes = [exc, completion("late")]

    def handler(request):
        item = outcomes.pop(0)
        if isinstance(item, Exception):
            raise item
        return item

    sleeps: list = []
    assert http_model(handler, sleeps).complete("hi") == "late"
    assert sleeps == [1.0]


def test_malformed_payload_is_an_api_error():
    with pytest.raises(ApiError):
        http_model(lambda r: httpx.Response(200, json={"choices": []})).complete("hi")


def test_api_key_comes_from_environment(monkeypatch):
    monkeypatch.delenv("NAV_LLM_API_KEY", raising=False)
    with pytest.raises(ConfigError):
        HttpCompletionModel(URL, "m")
    monkeypatch.setenv("NAV_LLM_API_KEY", "secret")
    assert HttpCompletionModel(URL, "m")._headers["Authorization"] == "Bearer secret"
    with pytest.raises(ConfigError):
        HttpCompletionModel("", "m", api_key="k")


def test_stub_server_round_trip():
    with StubServer([(429, "later"), (200, "from stub")]) as stub:
        sleeps: list = []
        model = HttpCompletionModel(stub.url, "m", api_key="k", sleep=sleeps.append)
        assert model.complete("ping") == "from stub"
        model.close()
    assert sleeps == [1.0]
    assert stub.bodies == [request_body("m", "ping", CompletionParams())] * 2


def test_scripted_rules_substring_regex_and_default():
    m = ScriptedModel([(re.compile(r"goal (\w+)"), r"found \1"), ("ping", lambda p: p.upper())], default="?")
    assert m.complete("the goal mug") == "found mug"
    assert m.complete("ping") == "PING"
    assert m.complete("other") == "?"
    with pytest.raises(ScriptError):
        ScriptedModel().complete("x")


def test_scripted_from_file(tmp_path):
    p = tmp_path / "s.json"
    p.write_text(json.dumps({"rules": [{"pattern": "#(\\d)", "response": "n\\1"}, {"match": "a", "response": "b"}]}))
    m = ScriptedModel.from_file(p)
    assert m.complete("x #4") == "n4" and m.complete("cat") == "b"
    p.write_text(json.dumps({"rules": [{"response": "b"}]}))
    with pytest.raises(ConfigError):
        ScriptedModel.from_file(p)


TABLE = AffinityTable({"mug": {"kitchen": 0.6, "counter": 0.3, "desk": 0.2}}, attributes=("red", "white"))


def test_oracle_scores_max_object_plus_room():
    q = "\n".join([prompts.location_line(1, "office", ["desk"]),
                   prompts.location_line(2, "kitchen", ["counter", "desk"]),
                   prompts.location_line(3, "unknown area", []),
                   prompts.FRONTIER_QUERY.format(goal="a white mug")])
    m = OracleModel(TABLE)
    assert m.location_scores(q) == [(1, 0.2), (2, pytest.approx(0.9)), (3, 0.0)]
    assert m.complete(q) == "Conclusion, location #2 with highest likelihood 90%."


def test_oracle_breaks_ties_to_lowest_index():
    q = "\n".join([prompts.location_line(1, "hall", []), prompts.location_line(2, "hall", []),
                   prompts.FRONTIER_QUERY.format(goal="mug")])
    assert OracleModel(TABLE).complete(q).startswith("Conclusion, location #1 ")


def test_oracle_identification_needs_every_known_term():
    m = OracleModel(TABLE)
    ask = lambda scene, target: m.complete(prompts.IDENTIFY.format(scene=scene, target=target))
    assert ask("You see: white mug ahead", "white mug") == "yes"
    assert ask("You see: red mug ahead", "white mug") == "no"
    assert ask("You see: desk", "mug") == "no"
    with pytest.raises(OracleError):
        m.complete("hello")


def test_recording_model_logs_requests_and_failures():
    records = []
    rec = RecordingModel(ScriptedModel([("a", "b")]), records.append)
    assert rec.complete("a") == "b"
    with pytest.raises(ScriptError):
        rec.complete("z")
    assert records[0]["response"] == "b" and records[1]["response"] is None


def test_build_model_dispatch(tmp_path):
    assert isinstance(build_model(ModelConfig()), OracleModel)
    (tmp_path / "s.json").write_text('{"default": "x"}')
    assert build_model(ModelConfig("scripted", script_path="s.json"), tmp_path).complete("q") == "x"
    with pytest.raises(ConfigError):
        ModelConfig("gpt")
    with pytest.raises(ConfigError):
        build_model(ModelConfig("scripted"))


def test_oracle_laptop_example_by_hand():
    table = AffinityTable({"laptop": {"desk": 0.9, "toilet": 0.05}})
    q = "\n".join([prompts.location_line(1, "unknown area", ["toilet"]),
                   prompts.location_line(2, "unknown area", ["desk"]),
                   prompts.FRONTIER_QUERY.format(goal="a laptop")])
    assert OracleModel(table).complete(q) == "Conclusion, location #2 with highest likelihood 90%."
