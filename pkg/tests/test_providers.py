import random

import pytest

from annobench.providers import (
    AttemptRecord,
    ChatRequest,
    ErrorClass,
    FaultScript,
    FinishReason,
    MissingFixtureError,
    MockTransport,
    ModelSpec,
    ProviderError,
    ProviderKind,
    RawResponse,
    RetryPolicy,
    classify_failure,
    complete,
    mock_provider,
)

POLICY = RetryPolicy(max_attempts=4, base_delay_ms=500, backoff_factor=2.0, jitter_fraction=0.2)
MOCK_SPEC = ModelSpec(provider_kind=ProviderKind.MOCK, model_id="m")


def req(user="annotate: a b", system="sys"):
    return ChatRequest(system=system, user=user)


class TestClassifyFailure:
    def test_quota(self):
        err = classify_failure(RawResponse("", FinishReason.OTHER, 429))
        assert err.error_class == ErrorClass.QUOTA_EXCEEDED
        assert err.retryable

    def test_auth_not_retryable(self):
        for status in (401, 403):
            err = classify_failure(RawResponse("", FinishReason.OTHER, status))
            assert err.error_class == ErrorClass.AUTH_ERROR
            assert not err.retryable

    def test_truncated(self):
        err = classify_failure(RawResponse('{"a": "b', FinishReason.LENGTH, 200))
        assert err.error_class == ErrorClass.TRUNCATED

    def test_server_error_retryable(self):
        err = classify_failure(RawResponse("", FinishReason.OTHER, 503))
        assert err.error_class == ErrorClass.NETWORK_ERROR
        assert err.retryable

    def test_empty_body(self):
        err = classify_failure(RawResponse("   ", FinishReason.STOP, 200))
        assert err.error_class == ErrorClass.MALFORMED_RESPONSE

    def test_clean_response_is_none(self):
        assert classify_failure(RawResponse("{}", FinishReason.STOP, 200)) is None


class TestMockTransport:
    def test_fixture_lookup(self):
        t = MockTransport(fixtures={"annotate: a b": "body"})
        resp = t.send(MOCK_SPEC, req())
        assert resp == RawResponse("body", FinishReason.STOP, 200)

    def test_ordered_defaults_then_missing(self):
        t = MockTransport(defaults=["one", "two"])
        assert t.send(MOCK_SPEC, req("x")).body_text == "one"
        assert t.send(MOCK_SPEC, req("y")).body_text == "two"
        with pytest.raises(MissingFixtureError):
            t.send(MOCK_SPEC, req("z"))

    def test_truncate_fault(self):
        body = '{"reasoning": "%s"}' % ("x" * 70)
        t = MockTransport(fixtures={"u": body}, fault=FaultScript(truncate_after=20))
        resp = t.send(MOCK_SPEC, req("u"))
        assert resp.body_text == body[:20]
        assert resp.finish_reason == FinishReason.LENGTH

    def test_delay_fault_times_out(self):
        t = MockTransport(fixtures={"u": "b"}, fault=FaultScript(delay_ms=120_000))
        with pytest.raises(ProviderError) as e:
            t.send(MOCK_SPEC, req("u"))
        assert e.value.error_class == ErrorClass.TIMEOUT

    def test_fault_scoped_by_substring(self):
        t = MockTransport(
            fixtures={"poison pill": "a", "fine": "b"},
            fault=FaultScript(status_code=429, match_substring="poison"),
        )
        assert t.send(MOCK_SPEC, req("fine")).http_status == 200
        assert t.send(MOCK_SPEC, req("poison pill")).http_status == 429

    def test_call_count(self):
        t = MockTransport(defaults=["a", "b", "c"])
        for _ in range(3):
            t.send(MOCK_SPEC, req("x"))
        assert t.call_count == 3


class TestComplete:
    def test_success_passthrough(self):
        t = MockTransport(fixtures={"annotate: a b": "canned"})
        resp = complete(MOCK_SPEC, req(), POLICY, transport=t, sleep=lambda s: None)
        assert resp.body_text == "canned"
        assert resp.http_status == 200

    def test_429_twice_then_success(self):
        t = MockTransport(
            fixtures={"u": "ok"}, fault=FaultScript(status_code=429, status_times=2)
        )
        attempts = []
        resp = complete(
            MOCK_SPEC,
            req("u"),
            POLICY,
            transport=t,
            sleep=lambda s: None,
            on_attempt=attempts.append,
        )
        assert resp.body_text == "ok"
        assert [a.attempt for a in attempts] == [1, 2, 3]
        assert attempts[0].error.error_class == ErrorClass.QUOTA_EXCEEDED
        assert attempts[2].error is None

    def test_always_429_exhausts_attempts(self):
        t = MockTransport(fixtures={"u": "ok"}, fault=FaultScript(status_code=429))
        attempts = []
        with pytest.raises(ProviderError) as e:
            complete(
                MOCK_SPEC,
                req("u"),
                POLICY,
                transport=t,
                sleep=lambda s: None,
                on_attempt=attempts.append,
            )
        assert e.value.error_class == ErrorClass.QUOTA_EXCEEDED
        assert len(attempts) == POLICY.max_attempts

    def test_non_retryable_stops_after_one_attempt(self):
        t = MockTransport(fixtures={"u": "ok"}, fault=FaultScript(status_code=401))
        attempts = []
        with pytest.raises(ProviderError) as e:
            complete(
                MOCK_SPEC,
                req("u"),
                POLICY,
                transport=t,
                sleep=lambda s: None,
                on_attempt=attempts.append,
            )
        assert e.value.error_class == ErrorClass.AUTH_ERROR
        assert len(attempts) == 1

    def test_backoff_schedule_within_jitter(self):
        t = MockTransport(fixtures={"u": "ok"}, fault=FaultScript(status_code=429))
        delays = []
        with pytest.raises(ProviderError):
            complete(
                MOCK_SPEC,
                req("u"),
                POLICY,
                transport=t,
                sleep=delays.append,
                rng=random.Random(3),
            )
        assert len(delays) == POLICY.max_attempts - 1
        for k, seconds in enumerate(delays, start=1):
            nominal = POLICY.base_delay_ms * POLICY.backoff_factor ** (k - 1) / 1000
            assert nominal * (1 - POLICY.jitter_fraction) <= seconds
            assert seconds <= nominal * (1 + POLICY.jitter_fraction)

    def test_truncation_is_retried_then_terminal(self):
        body = '{"reasoning": "' + "y" * 100 + '"}'
        t = MockTransport(fixtures={"u": body}, fault=FaultScript(truncate_after=10))
        attempts = []
        with pytest.raises(ProviderError) as e:
            complete(
                MOCK_SPEC,
                req("u"),
                POLICY,
                transport=t,
                sleep=lambda s: None,
                on_attempt=attempts.append,
            )
        assert e.value.error_class == ErrorClass.TRUNCATED
        assert len(attempts) == POLICY.max_attempts
        # the truncated body is still visible on each attempt record
        assert attempts[0].response.body_text == body[:10]


class TestChatClient:
    def test_mock_provider_roundtrip(self):
        client = mock_provider(fixtures={"annotate: a b": "gold"})
        resp = client.complete(req(), POLICY)
        assert resp.body_text == "gold"
        assert client.transport.call_count == 1

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            ModelSpec(provider_kind=ProviderKind.OPENAI_COMPATIBLE, model_id="m", base_url="ftp://x")
        with pytest.raises(ValueError):
            ModelSpec(provider_kind=ProviderKind.MOCK, model_id="")
        with pytest.raises(ValueError):
            ChatRequest(system="s", user="")

    def test_missing_api_key_is_auth_error(self, monkeypatch):
        monkeypatch.delenv("NO_SUCH_KEY_VAR", raising=False)
        spec = ModelSpec(
            provider_kind=ProviderKind.OPENAI_COMPATIBLE,
            model_id="m",
            base_url="http://127.0.0.1:9",
            api_key_ref="NO_SUCH_KEY_VAR",
        )
        from annobench.providers import HttpTransport

        with pytest.raises(ProviderError) as e:
            HttpTransport().send(spec, req())
        assert e.value.error_class == ErrorClass.AUTH_ERROR
        assert not e.value.retryable
        # detail names the variable, never a secret value
        assert "NO_SUCH_KEY_VAR" in e.value.detail


class TestRetryPolicyValidation:
    def test_defaults(self):
        p = RetryPolicy()
        assert (p.max_attempts, p.base_delay_ms, p.backoff_factor, p.jitter_fraction) == (
            4,
            500,
            2.0,
            0.2,
        )

    def test_bounds(self):
        with pytest.raises(ValueError):
            RetryPolicy(max_attempts=0)
        with pytest.raises(ValueError):
            RetryPolicy(backoff_factor=1.0)
        with pytest.raises(ValueError):
            RetryPolicy(jitter_fraction=1.5)
