from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from pageforge.errors import (
    AuthenticationError,
    CapabilityError,
    JsonExtractError,
    ProviderError,
    ValidationFailed,
)
from pageforge.provider import (
    HttpChatProvider,
    HttpEmbedProvider,
    HttpJudgeProvider,
    HttpLogprobProvider,
    JudgeScore,
    ProviderConfig,
    UsageLedger,
    build_providers,
    extract_json_block,
    load_provider_configs,
)


def cfg(**kw) -> ProviderConfig:
    defaults = dict(
        endpoint="https://api.example/v1/chat",
        model_name="model-x",
        max_retries=2,
        retry_backoff=0.0,
    )
    defaults.update(kw)
    return ProviderConfig(**defaults)


def chat_response(text: str, prompt_tokens=7, completion_tokens=3) -> dict:
    return {
        "choices": [{"message": {"content": text}}],
        "usage": {"prompt_tokens": prompt_tokens, "completion_tokens": completion_tokens},
    }


class FlakyTransport:
    """Fails n times, then returns the canned response."""

    def __init__(self, failures: int, response: dict):
        self.failures = failures
        self.response = response
        self.calls = 0
        self.payloads: list[dict] = []

    def __call__(self, url, headers, payload, timeout):
        self.calls += 1
        self.payloads.append(payload)
        if self.calls <= self.failures:
            raise ConnectionError("transport down")
        return self.response


class TestChat:
    def test_reply_and_single_ledger_entry(self):
        ledger = UsageLedger()
        transport = FlakyTransport(0, chat_response("hi"))
        provider = HttpChatProvider(cfg(), ledger, transport)
        assert provider.chat([("user", "hello")], stage="greet") == "hi"
        assert len(ledger.entries) == 1
        entry = ledger.entries[0]
        assert (entry.stage, entry.prompt_tokens, entry.completion_tokens) == ("greet", 7, 3)

    def test_retries_then_succeeds(self):
        transport = FlakyTransport(2, chat_response("ok"))
        provider = HttpChatProvider(cfg(max_retries=2), transport=transport)
        assert provider.chat([("user", "x")]) == "ok"
        assert transport.calls == 3

    def test_exhausted_retries_raise(self):
        transport = FlakyTransport(99, chat_response("never"))
        provider = HttpChatProvider(cfg(max_retries=2), transport=transport)
        with pytest.raises(ProviderError, match="3 attempts"):
            provider.chat([("user", "x")])

    def test_auth_failure_is_distinct_and_not_retried(self):
        calls = {"n": 0}

        def transport(url, headers, payload, timeout):
            calls["n"] += 1
            raise AuthenticationError("bad key")

        provider = HttpChatProvider(cfg(), transport=transport)
        with pytest.raises(AuthenticationError):
            provider.chat([("user", "x")])
        assert calls["n"] == 1

    def test_empty_messages_precondition(self):
        provider = HttpChatProvider(cfg(), transport=FlakyTransport(0, chat_response("x")))
        with pytest.raises(ValueError):
            provider.chat([])

    def test_temperature_override_lands_in_payload(self):
        transport = FlakyTransport(0, chat_response("x"))
        provider = HttpChatProvider(cfg(temperature=0.9), transport=transport)
        provider.chat([("user", "x")], temperature=0.0)
        assert transport.payloads[0]["temperature"] == 0.0
        provider.chat([("user", "x")])
        assert transport.payloads[1]["temperature"] == 0.9


class TestLedger:
    @given(
        st.lists(
            st.tuples(
                st.integers(min_value=0, max_value=10_000),
                st.integers(min_value=0, max_value=10_000),
            ),
            max_size=30,
        )
    )
    def test_totals_equal_sum_of_entries(self, counts):
        ledger = UsageLedger()
        for p, c in counts:
            ledger.record("s", p, c, None, 0.0)
        totals = ledger.totals()
        assert totals["prompt_tokens"] == sum(p for p, _ in counts)
        assert totals["completion_tokens"] == sum(c for _, c in counts)
        assert totals["calls"] == len(counts)

    def test_unknown_cost_stays_absent_not_zero(self):
        ledger = UsageLedger()
        ledger.record("a", 10, 10, None, 0.0)
        assert ledger.totals()["cost"] is None
        assert ledger.totals()["cost_entries_missing"] == 1
        ledger.record("b", 10, 10, 1e-6, 0.0)
        totals = ledger.totals()
        assert totals["cost"] == pytest.approx(20e-6)
        assert totals["cost_entries_missing"] == 1

    def test_thread_safe_append(self):
        import threading

        ledger = UsageLedger()

        def spam():
            for _ in range(200):
                ledger.record("t", 1, 1, None, 0.0)

        threads = [threading.Thread(target=spam) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert ledger.totals()["calls"] == 1600


class TestExtractJson:
    def test_canonical_fenced_form(self):
        assert extract_json_block('```json\n{"a":1}\n```') == {"a": 1}

    def test_bare_json_fallback(self):
        assert extract_json_block('{"a":1}') == {"a": 1}

    def test_no_json_anywhere(self):
        with pytest.raises(JsonExtractError):
            extract_json_block("no json here")

    def test_prefers_json_fence_over_other_fences(self):
        reply = "```python\nx=1\n```\n```json\n[1, 2]\n```"
        assert extract_json_block(reply) == [1, 2]

    @given(
        st.recursive(
            st.one_of(st.none(), st.booleans(), st.integers(), st.text(max_size=20)),
            lambda children: st.one_of(
                st.lists(children, max_size=4),
                st.dictionaries(st.text(max_size=8), children, max_size=4),
            ),
            max_leaves=12,
        )
    )
    def test_fenced_round_trip(self, value):
        reply = f"Sure!\n```json\n{json.dumps(value)}\n```\nDone."
        assert extract_json_block(reply) == value


class TestEmbed:
    def test_arity_and_dimension(self):
        response = {"data": [{"embedding": [0.0, 1.0]}, {"embedding": [1.0, 0.0]}]}
        provider = HttpEmbedProvider(cfg(), transport=FlakyTransport(0, response))
        vectors = provider.embed(["a", "b"])
        assert len(vectors) == 2 and all(len(v) == 2 for v in vectors)

    def test_dimension_mismatch_is_an_error(self):
        response = {"data": [{"embedding": [0.0, 1.0]}, {"embedding": [1.0]}]}
        provider = HttpEmbedProvider(cfg(), transport=FlakyTransport(0, response))
        with pytest.raises(ProviderError, match="dimensions"):
            provider.embed(["a", "b"])

    def test_empty_input_precondition(self):
        provider = HttpEmbedProvider(cfg(), transport=FlakyTransport(0, {}))
        with pytest.raises(ValueError):
            provider.embed([])
        with pytest.raises(ValueError):
            provider.embed(["ok", ""])


class TestLogprobs:
    def test_uniform_binary_stub_shape(self):
        import math

        response = {"tokens": ["t1", "t2"], "logprobs": [math.log(0.5), math.log(0.5)]}
        provider = HttpLogprobProvider(cfg(), transport=FlakyTransport(0, response))
        pairs = provider.token_logprobs("t1 t2")
        assert [t for t, _ in pairs] == ["t1", "t2"]
        assert all(lp == pytest.approx(-0.6931471805599453) for _, lp in pairs)

    def test_capability_error_without_logprob_support(self):
        provider = HttpLogprobProvider(cfg(), transport=FlakyTransport(0, {"result": "nope"}))
        with pytest.raises(CapabilityError):
            provider.token_logprobs("text")

    def test_empty_text_precondition(self):
        provider = HttpLogprobProvider(cfg(), transport=FlakyTransport(0, {}))
        with pytest.raises(ValueError):
            provider.token_logprobs("")


class TestJudge:
    def test_valid_score(self):
        response = chat_response('{"reason": "poor", "score": 1}')
        provider = HttpJudgeProvider(cfg(), transport=FlakyTransport(0, response))
        score = provider.judge(b"png-bytes", "rubric")
        assert score == JudgeScore(reason="poor", score=1)

    def test_out_of_range_score_rejected_after_repair(self):
        response = chat_response('{"reason": "x", "score": 7}')
        provider = HttpJudgeProvider(cfg(), transport=FlakyTransport(0, response))
        with pytest.raises(ValidationFailed):
            provider.judge(b"img", "rubric")

    def test_prose_reply_repaired_once_then_errors(self):
        transport = FlakyTransport(0, chat_response("just prose, no json"))
        provider = HttpJudgeProvider(cfg(), transport=transport)
        with pytest.raises(ValidationFailed):
            provider.judge(b"img", "rubric")
        assert transport.calls == 2

    def test_judge_payload_is_temperature_zero(self):
        transport = FlakyTransport(0, chat_response('{"reason": "ok", "score": 3}'))
        provider = HttpJudgeProvider(cfg(temperature=0.8), transport=transport)
        provider.judge(b"img", "rubric")
        assert transport.payloads[0]["temperature"] == 0.0

    def test_score_bounds(self):
        JudgeScore("ok", 5)
        with pytest.raises(ValidationFailed):
            JudgeScore("bad", 0)
        with pytest.raises(ValidationFailed):
            JudgeScore("bad", 6)


class TestConfigAndFactory:
    def test_load_configs_with_env_credential(self, tmp_path, monkeypatch):
        monkeypatch.setenv("TEST_KEY_ENV", "sekrit")
        config = {
            "providers": {
                "chat": {
                    "endpoint": "https://x/v1",
                    "model": "m",
                    "credential_env": "TEST_KEY_ENV",
                    "temperature": 0.2,
                    "max_retries": 1,
                },
                "logprob": {"endpoint": "mock:", "model": "m2"},
            }
        }
        path = tmp_path / "providers.json"
        path.write_text(json.dumps(config), encoding="utf-8")
        configs = load_provider_configs(path)
        assert configs["chat"].api_credential == "sekrit"
        assert configs["chat"].temperature == 0.2
        assert configs["logprob"].endpoint == "mock:"

    def test_yaml_config(self, tmp_path):
        path = tmp_path / "providers.yaml"
        path.write_text(
            "providers:\n  chat:\n    endpoint: 'mock:'\n    model: offline\n",
            encoding="utf-8",
        )
        assert load_provider_configs(path)["chat"].endpoint == "mock:"

    def test_unknown_role_rejected(self, tmp_path):
        path = tmp_path / "providers.json"
        path.write_text(json.dumps({"providers": {"oracle": {"endpoint": "x"}}}))
        with pytest.raises(ValueError, match="unknown provider role"):
            load_provider_configs(path)

    def test_mock_endpoints_build_offline_set(self):
        from pageforge.offline import OfflineChatProvider

        providers = build_providers(
            {"chat": ProviderConfig(endpoint="mock:", model_name="offline")}
        )
        assert isinstance(providers.chat, OfflineChatProvider)

    def test_invalid_config_values(self):
        with pytest.raises(ValueError):
            ProviderConfig(endpoint="x", model_name="m", max_retries=-1)
        with pytest.raises(ValueError):
            ProviderConfig(endpoint="x", model_name="m", request_timeout=0)
