import http.server
import json
import threading
import time

import pytest
from hypothesis import given, strategies as st

from regcov.corpus import QuestionRecord
from regcov.errors import ConfigError, MalformedResponse, UnknownCode
from regcov.judge import (
    PROMPT_TEMPLATE,
    BackendError,
    Classification,
    ErrorKind,
    FileCache,
    HttpBackend,
    JudgeConfig,
    JudgeError,
    MockBackend,
    RateLimiter,
    backoff_delay,
    build_prompt,
    classify,
    classify_batch,
    dump_enriched,
    enrich,
    load_enriched,
    parse_response,
    render_response,
)
from regcov.errors import ParseError
from regcov.taxonomy import all_categories, parse_code

C = parse_code


def rec(i, q="plain question", bench="b"):
    return QuestionRecord(f"{bench}_{i}", bench, q)


def cfg(**kw):
    base = dict(model_id="m", rate_limit=1e6, backoff_base=0.0, backoff_jitter=0.0)
    base.update(kw)
    return JudgeConfig(**base)


class Scripted:
    """Backend replaying a list of outcomes per call (str reply or exception)."""

    def __init__(self, *outcomes):
        self.outcomes = list(outcomes)
        self.calls = 0

    def __call__(self, prompt, record):
        out = self.outcomes[min(self.calls, len(self.outcomes) - 1)]
        self.calls += 1
        if isinstance(out, BaseException):
            raise out
        return out


# ---------------------------------------------------------------- prompt


def test_prompt_placeholders_filled():
    r = QuestionRecord("x_1", "x", "What is {answer}?", "42", ("a", "b"), "ctx", "cat")
    p = build_prompt(r)
    assert "- Question: What is {answer}?" in p
    assert "- Answer: 42" in p
    assert '- Choices: ["a", "b"]' in p
    assert "- Context: ctx" in p and "- Category: cat" in p


def test_prompt_empty_fields_and_unicode():
    p = build_prompt(QuestionRecord("x_1", "x", "¿Qué?"))
    assert "- Choices: []" in p and "- Context: \n" in p and "¿Qué?" in p


def test_prompt_output_schema_single_braces():
    assert '{\n  "capab": ["C1", ..],\n  "prop": ["P4", ..]\n}' in PROMPT_TEMPLATE
    assert "{{" not in PROMPT_TEMPLATE


@given(st.text(max_size=40))
def test_prompt_is_single_pass(text):
    r = QuestionRecord("x_1", "x", text or "q", text, (text,), text, text)
    p = build_prompt(r)
    head, _, _ = PROMPT_TEMPLATE.partition("- Question:")
    assert p.startswith(head)
    assert p.endswith("CRUCIAL: Return ONLY the JSON, no other text or explanations!\n")


# ---------------------------------------------------------------- parsing


@pytest.mark.parametrize("text,caps,props", [
    ('{"capab":["C6"],"prop":[]}', {"C6"}, set()),
    ('```json\n{"capab": ["C1", "C12"], "prop": ["P4"]}\n```', {"C1", "C12"}, {"P4"}),
    ('Sure! {"capab": [" C3 "], "prop": ["P3", "P3"]} hope that helps', {"C3"}, {"P3"}),
    ('{bad} {"capab": [], "prop": []}', set(), set()),
])
def test_parse_ok(text, caps, props):
    got = parse_response(text)
    assert got == (frozenset(map(C, caps)), frozenset(map(C, props)))


@pytest.mark.parametrize("text", [
    "no json here",
    '{"capab": ["C1"]}',
    '{"capab": "C1", "prop": []}',
    '{"capab": [1], "prop": []}',
    '{"capab": ["P1"], "prop": []}',
    '{"capab": [], "prop": ["C2"]}',
    "[1, 2]",
])
def test_parse_malformed(text):
    with pytest.raises(MalformedResponse):
        parse_response(text)


def test_parse_unknown_code():
    with pytest.raises(UnknownCode):
        parse_response('{"capab": ["C14"], "prop": []}')


codes = st.sampled_from([d.code for d in all_categories()])


@given(st.frozensets(codes))
def test_render_parse_round_trip(labels):
    caps = frozenset(c for c in labels if c.is_capability)
    props = labels - caps
    assert parse_response(render_response(caps, props)) == (caps, props)


# ---------------------------------------------------------------- mock


def test_mock_backend_rules():
    m = MockBackend({"hack": ["C1", "P6"], "bias": "P4", "PLAN": "C6"})
    assert m.labels("How to HACK a plan?") == {C("C1"), C("P6"), C("C6")}
    reply = m("prompt", rec(0, "racial bias"))
    assert json.loads(reply) == {"capab": [], "prop": ["P4"]}
    assert m.calls == 1 and m.seen == ["b_0"]


# ---------------------------------------------------------------- enrichment


def test_enrich_shape():
    c = Classification("hle_194750", "hle", "google/gemini-2.5-flash", frozenset({C("C6")}), frozenset())
    assert enrich(c) == {
        "model": "google/gemini-2.5-flash",
        "id": "hle_194750",
        "benchmark": "hle",
        "evaluation": {
            "capabilities": {"Long-horizon planning, forecasting, or strategising": 1},
            "propensities": {},
        },
    }


@given(st.lists(st.frozensets(codes), max_size=6))
def test_enriched_round_trip(label_sets):
    cs = [
        Classification(f"b_{i}", "b", "m", frozenset(x for x in s if x.is_capability),
                       frozenset(x for x in s if not x.is_capability))
        for i, s in enumerate(label_sets)
    ]
    data = dump_enriched(cs)
    assert load_enriched(data) == cs
    assert dump_enriched(load_enriched(data)) == data


def test_enriched_bad_line():
    good = dump_enriched([Classification("b_0", "b", "m")]).decode()
    bad = good + json.dumps({"model": "m", "id": "b_1", "benchmark": "b",
                             "evaluation": {"capabilities": {"Telepathy": 1}, "propensities": {}}}) + "\n"
    with pytest.raises(ParseError) as ei:
        load_enriched(bad)
    assert ei.value.line == 2


def test_classification_rejects_wrong_kind():
    with pytest.raises(ValueError):
        Classification("q", "b", "m", frozenset({C("P1")}))


# ---------------------------------------------------------------- config


def test_config_validation():
    with pytest.raises(ConfigError):
        JudgeConfig(model_id="")
    with pytest.raises(ConfigError):
        JudgeConfig(model_id="m", max_concurrency=0)
    with pytest.raises(ConfigError):
        JudgeConfig(model_id="m", rate_limit=0)
    with pytest.raises(ConfigError):
        JudgeConfig.from_json({"model_id": "m", "temperature": 0})
    jc = JudgeConfig(model_id="m", decoding={"temperature": 0})
    assert JudgeConfig.from_json(jc.to_json()) == jc


def test_backoff_schedule():
    jc = JudgeConfig(model_id="m", backoff_base=0.5, backoff_factor=2.0, backoff_jitter=0.0)
    assert [backoff_delay(jc, n) for n in (1, 2, 3, 4)] == [0.5, 1.0, 2.0, 4.0]
    jj = JudgeConfig(model_id="m", backoff_base=1.0, backoff_jitter=0.1)
    for n in range(1, 5):
        d = backoff_delay(jj, n)
        assert 0.9 * 2 ** (n - 1) <= d <= 1.1 * 2 ** (n - 1)


# ---------------------------------------------------------------- retries


def test_transient_then_success():
    sleeps = []
    b = Scripted(BackendError(ErrorKind.TRANSPORT, "boom"), BackendError(ErrorKind.TIMEOUT, "slow"),
                 '{"capab": ["C2"], "prop": []}')
    out = classify(rec(0), b, cfg(backoff_base=1.0, backoff_factor=2.0), sleep=sleeps.append)
    assert isinstance(out, Classification) and out.capabilities == {C("C2")}
    assert b.calls == 3 and sleeps == [1.0, 2.0]


def test_transient_exhausted():
    b = Scripted(BackendError(ErrorKind.TRANSPORT, "down"))
    out = classify(rec(0), b, cfg(max_retries=3), sleep=lambda s: None)
    assert isinstance(out, JudgeError)
    assert out.kind is ErrorKind.TRANSPORT and out.attempts == 4 and b.calls == 4


def test_permanent_error_not_retried():
    b = Scripted(BackendError(ErrorKind.TRANSPORT, "401", retryable=False))
    out = classify(rec(0), b, cfg(), sleep=lambda s: None)
    assert isinstance(out, JudgeError) and out.attempts == 1


def test_retry_after_is_honoured():
    sleeps = []
    b = Scripted(BackendError(ErrorKind.RATE_LIMITED, "429", retry_after=7.0), '{"capab": [], "prop": []}')
    classify(rec(0), b, cfg(backoff_base=1.0), sleep=sleeps.append)
    assert sleeps == [7.0]


def test_malformed_retried_once():
    b = Scripted("garbage", "still garbage", '{"capab": [], "prop": []}')
    out = classify(rec(0), b, cfg(), sleep=lambda s: None)
    assert isinstance(out, JudgeError)
    assert out.kind is ErrorKind.MALFORMED_RESPONSE and out.attempts == 2 and b.calls == 2


def test_malformed_then_ok():
    b = Scripted("garbage", '{"capab": ["C5"], "prop": []}')
    out = classify(rec(0), b, cfg(), sleep=lambda s: None)
    assert isinstance(out, Classification) and b.calls == 2


def test_unknown_code_reported():
    b = Scripted('{"capab": ["C42"], "prop": []}')
    out = classify(rec(0), b, cfg(), sleep=lambda s: None)
    assert isinstance(out, JudgeError) and out.kind is ErrorKind.UNKNOWN_CODE and out.attempts == 2


def test_no_retries_configured():
    b = Scripted("garbage")
    out = classify(rec(0), b, cfg(max_retries=0), sleep=lambda s: None)
    assert out.attempts == 1


# ---------------------------------------------------------------- cache


def test_cache_key_depends_on_inputs():
    k = FileCache.key("m", "p")
    assert k == FileCache.key("m", "p", {})
    assert k != FileCache.key("m2", "p")
    assert k != FileCache.key("m", "p2")
    assert k != FileCache.key("m", "p", {"temperature": 0})


def test_cache_hit_skips_backend(tmp_path):
    m = MockBackend({"hack": "C1"})
    c = cfg(cache_dir=tmp_path)
    r = rec(0, "hack it")
    first = classify(r, m, c)
    second = classify(r, m, c)
    assert first == second and m.calls == 1
    classify(r, m, cfg(cache_dir=tmp_path, reuse_cache=False))
    assert m.calls == 2
    assert len(FileCache(tmp_path)) == 1


def test_corrupt_cache_entry_ignored(tmp_path):
    cache = FileCache(tmp_path)
    r = rec(0)
    key = FileCache.key("m", build_prompt(r))
    cache.put(key, "m", "not json at all")
    m = MockBackend({})
    out = classify(r, m, cfg(cache_dir=tmp_path))
    assert isinstance(out, Classification) and m.calls == 1


# ---------------------------------------------------------------- batch


def test_batch_order_and_isolation():
    class Flaky(MockBackend):
        def __call__(self, prompt, record):
            if record.id.endswith("_3"):
                raise BackendError(ErrorKind.TRANSPORT, "dead", retryable=False)
            time.sleep(0.001 * (7 - int(record.id.split("_")[1]) % 7))
            return super().__call__(prompt, record)

    records = [rec(i, "hack" if i % 2 else "bias") for i in range(12)]
    res = classify_batch(records, Flaky({"hack": "C1", "bias": "P4"}), cfg(max_concurrency=4))
    assert [o.question_id for o in res.outcomes] == [r.id for r in records]
    assert [e.question_id for e in res.errors] == ["b_3"]
    assert len(res.classifications) == 11
    assert [e.done for e in res.events] == list(range(1, 13))
    for c in res.classifications:
        assert c.labels == ({C("C1")} if int(c.question_id[2:]) % 2 else {C("P4")})


def test_max_in_flight():
    lock = threading.Lock()
    state = {"now": 0, "peak": 0}

    def backend(prompt, record):
        with lock:
            state["now"] += 1
            state["peak"] = max(state["peak"], state["now"])
        time.sleep(0.01)
        with lock:
            state["now"] -= 1
        return '{"capab": [], "prop": []}'

    classify_batch([rec(i) for i in range(30)], backend, cfg(max_concurrency=3))
    assert 1 < state["peak"] <= 3


def test_rate_limiter_fake_clock():
    t = [0.0]
    waits = []

    def sleep(s):
        waits.append(s)

    lim = RateLimiter(4.0, clock=lambda: t[0], sleep=sleep)
    for _ in range(5):
        lim.acquire()
    assert waits == [0.25, 0.5, 0.75, 1.0]


def test_rate_limit_wall_clock():
    stamps = []
    lock = threading.Lock()

    def backend(prompt, record):
        with lock:
            stamps.append(time.monotonic())
        return '{"capab": [], "prop": []}'

    start = time.monotonic()
    classify_batch([rec(i) for i in range(50)], backend, cfg(rate_limit=10.0, max_concurrency=8))
    assert time.monotonic() - start >= 4.9
    assert max(stamps) - min(stamps) >= 4.9 - 1e-3


def test_interrupt_then_resume_no_duplicates(tmp_path):
    class Slow(MockBackend):
        def __call__(self, prompt, record):
            time.sleep(0.005)
            return super().__call__(prompt, record)

    records = [rec(i, f"hack {i}" if i % 3 == 0 else f"question {i}") for i in range(40)]
    m1 = Slow({"hack": "C1"})
    c = cfg(cache_dir=tmp_path, max_concurrency=4)

    def stop(ev):
        if ev.done == 15:
            raise KeyboardInterrupt

    with pytest.raises(KeyboardInterrupt):
        classify_batch(records, m1, c, on_progress=stop)
    done_before = set(m1.seen)
    assert 15 <= len(done_before) < 40
    m2 = MockBackend({"hack": "C1"})
    res = classify_batch(records, m2, c)
    assert not done_before & set(m2.seen)
    assert done_before | set(m2.seen) == {r.id for r in records}
    assert len(res.classifications) == 40 and not res.errors


# ---------------------------------------------------------------- HTTP


class _Handler(http.server.BaseHTTPRequestHandler):
    script: list = []
    bodies: list = []

    def do_POST(self):
        body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
        type(self).bodies.append((self.headers.get("Authorization"), body))
        status, payload, headers = type(self).script.pop(0) if type(self).script else (200, None, {})
        if payload is None:
            payload = {"choices": [{"message": {"role": "assistant", "content": '{"capab": ["C6"], "prop": []}'}}]}
        raw = payload.encode() if isinstance(payload, str) else json.dumps(payload).encode()
        self.send_response(status)
        for k, v in headers.items():
            self.send_header(k, v)
        self.send_header("Content-Length", str(len(raw)))
        self.end_headers()
        self.wfile.write(raw)

    def log_message(self, *args):
        pass


@pytest.fixture
def server():
    _Handler.script = []
    _Handler.bodies = []
    srv = http.server.ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
    t = threading.Thread(target=srv.serve_forever, daemon=True)
    t.start()
    yield f"http://127.0.0.1:{srv.server_address[1]}/v1/chat/completions"
    srv.shutdown()
    srv.server_close()


def test_http_success(server):
    b = HttpBackend(server, "judge-1", api_key="k", decoding={"temperature": 0})
    assert b("hello") == '{"capab": ["C6"], "prop": []}'
    auth, body = _Handler.bodies[0]
    assert auth == "Bearer k"
    assert body == {"model": "judge-1", "messages": [{"role": "user", "content": "hello"}], "temperature": 0}


@pytest.mark.parametrize("status,payload,headers,kind,retryable,retry_after", [
    (429, {}, {"Retry-After": "3"}, ErrorKind.RATE_LIMITED, True, 3.0),
    (503, {}, {}, ErrorKind.TRANSPORT, True, None),
    (401, {"error": "no"}, {}, ErrorKind.TRANSPORT, False, None),
    (200, "not json", {}, ErrorKind.MALFORMED_RESPONSE, True, None),
    (200, {"choices": []}, {}, ErrorKind.MALFORMED_RESPONSE, True, None),
])
def test_http_errors(server, status, payload, headers, kind, retryable, retry_after):
    _Handler.script = [(status, payload, headers)]
    b = HttpBackend(server, "m", api_key="k")
    with pytest.raises(BackendError) as ei:
        b("x")
    assert ei.value.kind is kind and ei.value.retryable is retryable
    assert ei.value.retry_after == retry_after


def test_http_connection_refused():
    b = HttpBackend("http://127.0.0.1:9/none", "m", api_key="k", timeout=2)
    with pytest.raises(BackendError) as ei:
        b("x")
    assert ei.value.kind in (ErrorKind.TRANSPORT, ErrorKind.TIMEOUT)


def test_http_retry_through_classify(server):
    _Handler.script = [(500, {}, {}), (429, {}, {"Retry-After": "0"})]
    b = HttpBackend(server, "m", api_key="k")
    out = classify(rec(0), b, cfg(), sleep=lambda s: None)
    assert isinstance(out, Classification) and out.capabilities == {C("C6")}
    assert len(_Handler.bodies) == 3


def test_http_needs_key(monkeypatch):
    monkeypatch.delenv("REGCOV_API_KEY", raising=False)
    with pytest.raises(ConfigError):
        HttpBackend("http://x", "m")
    monkeypatch.setenv("REGCOV_API_KEY", "secret")
    assert HttpBackend("http://x", "m")._headers["Authorization"] == "Bearer secret"
