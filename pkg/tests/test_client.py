"""Endpoint client: response parsing, retries, and concurrency limits."""
import threading

import pytest

from refinekit.client import (
    ChatClient, E2EResponse, EndpointConfig, MalformedResponse,
    TransportError, TruncatedOutput, fill_prompt, load_prompt,
    parse_e2e_response)


def config(**kw):
    defaults = dict(base_url="http://model.test", model_name="refiner",
                    backoff_base=0.0)
    defaults.update(kw)
    return EndpointConfig(**defaults)


def chat_body(content, finish="stop"):
    return {"choices": [{"message": {"content": content},
                         "finish_reason": finish}]}


class TestParseE2E:
    def test_both_blocks(self):
        raw = ("modification_reason:\n[doc]dropped the ad line[/doc]\n"
               "refined_text:\n[doc]clean content here[/doc]")
        resp = parse_e2e_response(raw)
        assert resp.refined_text == "clean content here"
        assert resp.modification_reason == "dropped the ad line"
        assert resp.raw == raw

    def test_empty_doc_means_all_deleted(self):
        resp = parse_e2e_response(
            "modification_reason:\n[doc]all spam[/doc]\nrefined_text:\n[doc][/doc]")
        assert resp.refined_text == ""

    def test_missing_label_is_malformed(self):
        with pytest.raises(MalformedResponse):
            parse_e2e_response("here is some text without any labels")

    def test_missing_doc_delimiters_is_malformed(self):
        with pytest.raises(MalformedResponse):
            parse_e2e_response("refined_text:\nno delimiters")

    def test_last_block_wins(self):
        raw = ("refined_text:\n[doc]from an echoed example[/doc]\n"
               "refined_text:\n[doc]the real answer[/doc]")
        assert parse_e2e_response(raw).refined_text == "the real answer"

    def test_multiline_content_verbatim(self):
        raw = "refined_text:\n[doc]line one\nline two[/doc]"
        assert parse_e2e_response(raw).refined_text == "line one\nline two"

    def test_absent_reason_degrades_to_empty(self):
        resp = parse_e2e_response("refined_text:\n[doc]x[/doc]")
        assert resp.modification_reason == ""

    def test_never_raises_other_exceptions_on_noise(self):
        for raw in ("", "[doc]", "refined_text:", "\x00\xff garbage [/doc]"):
            try:
                parse_e2e_response(raw)
            except MalformedResponse:
                pass


class TestPrompts:
    def test_e2e_prompt_loads_and_fills(self):
        template = load_prompt("e2e_prompt.txt")
        assert "{input_text_task}" in template
        filled = fill_prompt(template, "SAMPLE DOC TEXT")
        assert "SAMPLE DOC TEXT" in filled
        assert "{input_text_task}" not in filled

    def test_program_prompt_mentions_dsl(self):
        template = load_prompt("program_prompt.txt")
        assert "remove_lines" in template and "remove_str" in template


class FakeTransport:
    def __init__(self, script):
        self.script = list(script)
        self.calls = []
        self.lock = threading.Lock()

    def __call__(self, url, headers, payload, timeout):
        with self.lock:
            self.calls.append((url, payload))
            item = self.script.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


class TestChatClient:
    def test_success_passthrough(self):
        transport = FakeTransport([(200, chat_body("keep_all()"))])
        client = ChatClient(config(), transport=transport)
        assert client.request_program("doc text") == "keep_all()"
        url, payload = transport.calls[0]
        assert payload["model"] == "refiner"
        assert payload["top_p"] == 0.8
        assert payload["top_k"] == 20

    def test_retry_on_5xx_then_success(self):
        transport = FakeTransport([
            (500, {}), (503, {}), (200, chat_body("remove_lines(1, 1)"))])
        client = ChatClient(config(max_retries=3), transport=transport)
        assert client.request_program("x") == "remove_lines(1, 1)"
        assert client.retry_count == 2

    def test_retry_on_429(self):
        transport = FakeTransport([(429, {}), (200, chat_body("keep_all()"))])
        client = ChatClient(config(), transport=transport)
        assert client.request_program("x") == "keep_all()"

    def test_exhausted_retries_raise_transport_error(self):
        transport = FakeTransport([(500, {})] * 4)
        client = ChatClient(config(max_retries=3), transport=transport)
        with pytest.raises(TransportError):
            client.request_program("x")

    def test_4xx_is_not_retried(self):
        transport = FakeTransport([(401, {"error": "bad key"})])
        client = ChatClient(config(max_retries=3), transport=transport)
        with pytest.raises(TransportError):
            client.request_program("x")
        assert len(transport.calls) == 1

    def test_connection_error_retried(self):
        transport = FakeTransport([
            ConnectionError("boom"), (200, chat_body("keep_all()"))])
        client = ChatClient(config(), transport=transport)
        assert client.request_program("x") == "keep_all()"

    def test_truncated_output(self):
        transport = FakeTransport([(200, chat_body("remove_l", finish="length"))])
        client = ChatClient(config(), transport=transport)
        with pytest.raises(TruncatedOutput):
            client.request_program("x")

    def test_e2e_request_parses_response(self):
        body = chat_body("modification_reason:\n[doc]spam[/doc]\n"
                         "refined_text:\n[doc]kept text[/doc]")
        transport = FakeTransport([(200, body)])
        client = ChatClient(config(), transport=transport)
        resp = client.request_e2e_refinement("original doc")
        assert isinstance(resp, E2EResponse)
        assert resp.refined_text == "kept text"
        # the chunk is embedded in the prompt's [doc] task slot
        sent = transport.calls[0][1]["messages"][-1]["content"]
        assert "original doc" in sent

    def test_api_key_header_from_env(self, monkeypatch):
        monkeypatch.setenv("REFINE_API_KEY", "sk-test-123")
        captured = {}

        def transport(url, headers, payload, timeout):
            captured["auth"] = headers.get("Authorization")
            return 200, chat_body("keep_all()")

        client = ChatClient(config(), transport=transport)
        client.request_program("x")
        assert captured["auth"] == "Bearer sk-test-123"

    def test_max_in_flight_respected(self):
        active = []
        peak = []
        lock = threading.Lock()

        def transport(url, headers, payload, timeout):
            with lock:
                active.append(1)
                peak.append(len(active))
            import time
            time.sleep(0.01)
            with lock:
                active.pop()
            return 200, chat_body("keep_all()")

        client = ChatClient(config(max_in_flight=2), transport=transport)
        threads = [threading.Thread(target=client.request_program, args=("x",))
                   for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert max(peak) <= 2

    def test_config_validation(self):
        with pytest.raises(ValueError):
            config(max_in_flight=0)
