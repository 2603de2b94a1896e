"""Gateway retry classification, batching bounds, and wire formats."""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from emopipe.gateway import (
    AttachmentError,
    AttemptsExhaustedError,
    Gateway,
    GenOptions,
    HTTPStatusError,
    HttpTransport,
    MediaNotSupportedError,
    MockTransport,
    TransportReply,
    build_payload,
    request_fingerprint,
)
from emopipe.prompts import InstructionType, render_prompt

from conftest import make_sample


def _ok_body(text):
    return json.dumps({"choices": [{"message": {"content": text}}]})


class SequenceTransport:
    """Replays a fixed list of (status, text) replies; thread-safe."""

    def __init__(self, replies):
        self.replies = list(replies)
        self.calls = 0
        self.in_flight = 0
        self.max_in_flight = 0
        self._lock = threading.Lock()

    def __call__(self, payload, timeout_s):
        with self._lock:
            self.calls += 1
            self.in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self.in_flight)
            status, text = self.replies[min(self.calls - 1, len(self.replies) - 1)]
        time.sleep(0.01)
        with self._lock:
            self.in_flight -= 1
        if status == 200:
            return TransportReply(200, _ok_body(text))
        return TransportReply(status, text)


@pytest.fixture
def bundle(media_sample):
    return render_prompt(media_sample, InstructionType.AUX_TEXT)


def test_passthrough(bundle):
    gw = Gateway(SequenceTransport([(200, '{"Sentiment":"negative"}')]), sleep=lambda s: None)
    completion = gw.complete(bundle, GenOptions())
    assert completion.text == '{"Sentiment":"negative"}'
    assert completion.attempts == 1


def test_retries_transient_503_then_succeeds(bundle):
    transport = SequenceTransport([(503, "busy"), (503, "busy"), (200, "ok")])
    gw = Gateway(transport, max_attempts=4, sleep=lambda s: None)
    completion = gw.complete(bundle, GenOptions())
    assert completion.text == "ok"
    assert completion.attempts == 3
    assert transport.calls == 3


def test_401_fails_immediately_without_retry(bundle):
    transport = SequenceTransport([(401, "bad key")])
    gw = Gateway(transport, max_attempts=5, sleep=lambda s: None)
    with pytest.raises(HTTPStatusError) as err:
        gw.complete(bundle, GenOptions())
    assert err.value.status == 401
    assert transport.calls == 1


def test_attempt_cap_exhaustion(bundle):
    transport = SequenceTransport([(503, "busy")])
    gw = Gateway(transport, max_attempts=3, sleep=lambda s: None)
    with pytest.raises(AttemptsExhaustedError) as err:
        gw.complete(bundle, GenOptions())
    assert err.value.attempts == 3
    assert transport.calls == 3


def test_media_rejection_is_typed_and_not_retried(media_sample):
    bundle = render_prompt(media_sample, InstructionType.AUX_AUDIO)
    transport = SequenceTransport([(415, "audio input not supported by this model")])
    gw = Gateway(transport, sleep=lambda s: None)
    with pytest.raises(MediaNotSupportedError) as err:
        gw.complete(bundle, GenOptions())
    assert err.value.kind == "audio"
    assert transport.calls == 1


def test_unreadable_attachment(media_sample, tmp_path):
    from dataclasses import replace

    broken = replace(media_sample, audio_path=str(tmp_path / "missing.wav"))
    bundle = render_prompt(broken, InstructionType.AUX_AUDIO)
    gw = Gateway(SequenceTransport([(200, "ok")]), sleep=lambda s: None)
    with pytest.raises(AttachmentError):
        gw.complete(bundle, GenOptions())


def test_fingerprint_stable_across_retries_and_inputs(bundle):
    options = GenOptions(seed=7)
    a = request_fingerprint(bundle, options)
    b = request_fingerprint(bundle, options)
    assert a == b
    transport = SequenceTransport([(503, "x"), (200, "ok")])
    gw = Gateway(transport, sleep=lambda s: None)
    completion = gw.complete(bundle, options)
    assert completion.request_fingerprint == a
    assert request_fingerprint(bundle, GenOptions(seed=8)) != a


def test_payload_shape_text_only(bundle):
    payload = build_payload(bundle, GenOptions(model_id="m1", seed=3))
    assert payload["model"] == "m1"
    assert payload["seed"] == 3
    assert isinstance(payload["messages"][0]["content"], str)
    assert payload["metadata"]["schema"] == "aux_text"


def test_payload_shape_with_attachments(media_sample):
    bundle = render_prompt(media_sample, InstructionType.MAIN_SENTIMENT)
    payload = build_payload(bundle, GenOptions())
    parts = payload["messages"][0]["content"]
    kinds = [part["type"] for part in parts]
    assert kinds[0] == "text"
    assert "input_audio" in kinds
    assert "video_url" in kinds
    video = next(p for p in parts if p["type"] == "video_url")
    assert video["video_url"]["url"].startswith("data:video/mp4;base64,")


def test_batch_results_align_with_inputs(tmp_path):
    samples = [make_sample(i, tmp_path=tmp_path) for i in range(8)]
    bundles = [render_prompt(s, InstructionType.AUX_TEXT) for s in samples]
    script = {
        f"{s.id}|aux_text": f'{{"Sentiment":"neutral","marker":"{s.id}"}}'
        for s in samples
    }
    gw = Gateway(MockTransport(script), sleep=lambda s: None)
    results = gw.complete_batch(bundles, GenOptions(), parallelism=3)
    for sample, result in zip(samples, results):
        assert sample.id in result.text


def test_batch_in_flight_never_exceeds_parallelism(tmp_path):
    samples = [make_sample(i, tmp_path=tmp_path) for i in range(10)]
    bundles = [render_prompt(s, InstructionType.AUX_TEXT) for s in samples]
    transport = SequenceTransport([(200, "ok")])
    gw = Gateway(transport, sleep=lambda s: None)
    gw.complete_batch(bundles, GenOptions(), parallelism=3)
    assert transport.max_in_flight <= 3
    assert transport.calls == 10


def test_batch_parallelism_one_is_sequential(tmp_path):
    samples = [make_sample(i, tmp_path=tmp_path) for i in range(4)]
    bundles = [render_prompt(s, InstructionType.AUX_TEXT) for s in samples]
    transport = SequenceTransport([(200, "ok")])
    gw = Gateway(transport, sleep=lambda s: None)
    gw.complete_batch(bundles, GenOptions(), parallelism=1)
    assert transport.max_in_flight == 1


def test_batch_isolates_failures_positionally(tmp_path):
    samples = [make_sample(i, tmp_path=tmp_path) for i in range(5)]
    bundles = [render_prompt(s, InstructionType.AUX_TEXT) for s in samples]
    script = {f"{s.id}|aux_text": "ok" for s in samples}
    script[f"{samples[2].id}|aux_text"] = {"status": 401, "text": "denied"}
    gw = Gateway(MockTransport(script), sleep=lambda s: None)
    results = gw.complete_batch(bundles, GenOptions(), parallelism=2)
    assert isinstance(results[2], HTTPStatusError)
    assert all(not isinstance(r, Exception) for i, r in enumerate(results) if i != 2)


def test_mock_transport_consumes_scripted_sequences(bundle):
    transport = MockTransport({"aux_text": ["first", "second"]})
    gw = Gateway(transport, sleep=lambda s: None)
    assert gw.complete(bundle, GenOptions()).text == "first"
    assert gw.complete(bundle, GenOptions()).text == "second"
    assert gw.complete(bundle, GenOptions()).text == "second"  # last repeats


def test_rate_limiter_spaces_out_requests(bundle):
    waits = []
    transport = SequenceTransport([(200, "ok")])
    gw = Gateway(transport, rate_limit_rps=1.0, sleep=waits.append)
    for _ in range(3):
        gw.complete(bundle, GenOptions())
    # First call goes through untouched; each later call waits roughly one
    # more interval (the injected sleep never advances the clock).
    assert len(waits) == 2
    assert 0.5 < waits[0] <= 1.0
    assert 1.0 < waits[1] <= 2.0


class _Handler(BaseHTTPRequestHandler):
    fail_first = True

    def do_POST(self):
        length = int(self.headers["Content-Length"])
        payload = json.loads(self.rfile.read(length))
        if _Handler.fail_first:
            _Handler.fail_first = False
            self.send_response(503)
            self.end_headers()
            self.wfile.write(b"warming up")
            return
        body = _ok_body(f"echo:{payload['metadata']['sample_id']}")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.end_headers()
        self.wfile.write(body.encode("utf-8"))

    def log_message(self, *args):
        pass


def test_http_transport_round_trip_with_retry(bundle):
    _Handler.fail_first = True
    server = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    try:
        base = f"http://127.0.0.1:{server.server_port}/v1"
        gw = Gateway(HttpTransport(base, api_key="sk-test"), sleep=lambda s: None)
        completion = gw.complete(bundle, GenOptions(timeout_s=5))
        assert completion.text == f"echo:{bundle.sample_id}"
        assert completion.attempts == 2
    finally:
        server.shutdown()
