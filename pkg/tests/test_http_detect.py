from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from censorkit.http_detect import (
    BaselineVerdict,
    DiffStatus,
    Evidence,
    InconsistentCensorshipError,
    MiddleboxClass,
    Placement,
    SiteDownError,
    Statefulness,
    TransportVerdict,
    TriggerVerdict,
    UnclassifiedEvidenceError,
    Visibility,
    adjudicate,
    baseline_classify,
    classify_http,
    classify_middlebox,
    collect_evidence,
    content_diff,
    detect_transport_filtering,
    fuzz_trigger_fields,
    scan_http_domain,
    statefulness_probe,
    trigger_analysis,
)
from censorkit.netsim import ClientHandle, UnsupportedSchemeError
from censorkit.netsim.middlebox import AIRTEL_NOTICE_HTML, MbKind
from censorkit.netsim.scenarios import http_archetype, load_scenario
from censorkit.tracer import TraceResult
from censorkit.wire import HttpResponse, PortScope, build_response, parse_responses

from conftest import ARCHETYPE_NAMES, addr


# ---------------------------------------------------------------------------
# content diff


def test_diff_identical_bodies_is_zero():
    assert content_diff(b"same bytes", b"same bytes") == 0.0


def test_diff_fully_disjoint_bodies_is_one():
    assert content_diff(b"aaaa", b"zzzz") == 1.0


def test_diff_body_plus_equal_length_noise_is_one_third():
    # M = L, total = 3L, difference = 1 - 2L/3L = 1/3
    body = b"a" * 120
    noisy = body + b"z" * 120
    assert content_diff(body, noisy) == pytest.approx(1 / 3)


def test_diff_both_empty_is_zero():
    assert content_diff(b"", b"") == 0.0


@given(st.binary(max_size=160), st.binary(max_size=160))
@settings(max_examples=1000, deadline=None)
def test_diff_symmetric_and_bounded(a, b):
    d = content_diff(a, b)
    assert 0.0 <= d <= 1.0
    assert d == pytest.approx(content_diff(b, a))
    if a == b:
        assert d == 0.0


# ---------------------------------------------------------------------------
# diff classification


def _resp(body: bytes, headers=(("Content-Type", "text/html"), ("Server", "nginx"))):
    # route through the serializer so Content-Length appears as it would on the wire
    return parse_responses(build_response(200, headers, body))[0]


AIRTEL_NOTICE = parse_responses(build_response(200, (("Content-Type", "text/html"), ("Server", "nginx")), AIRTEL_NOTICE_HTML))[0]


def test_classify_notification_vs_real_body_is_confirmed():
    verdict = classify_http("blocked.example", AIRTEL_NOTICE, _resp(b"<p>the real page body</p>" * 4))
    assert verdict.status is DiffStatus.CONFIRMED_BLOCKED
    assert verdict.fingerprint == "airtel.com/dot"


def test_classify_dynamic_page_needs_review():
    direct = _resp(b"<p>news</p>" + b"x" * 400)
    clean = _resp(b"<p>news</p>" + b"y" * 400)
    verdict = classify_http("ads.example", direct, clean)
    assert verdict.status is DiffStatus.NEEDS_REVIEW
    assert verdict.difference > 0.3
    assert verdict.fingerprint is None


def test_classify_identical_static_page_unblocked():
    body = _resp(b"<p>static</p>")
    verdict = classify_http("ok.example", body, body)
    assert verdict.status is DiffStatus.UNBLOCKED
    assert verdict.difference == 0.0


def test_confirmed_blocked_requires_fingerprint_or_review():
    from censorkit.http_detect import DiffVerdict

    with pytest.raises(ValueError):
        DiffVerdict("a.com", 0.9, DiffStatus.CONFIRMED_BLOCKED)
    reviewed = adjudicate(DiffVerdict("a.com", 0.9, DiffStatus.NEEDS_REVIEW), confirmed_blocked=True)
    assert reviewed.status is DiffStatus.CONFIRMED_BLOCKED
    assert reviewed.fingerprint == "review:manual"
    cleared = adjudicate(DiffVerdict("a.com", 0.9, DiffStatus.NEEDS_REVIEW), confirmed_blocked=False)
    assert cleared.status is DiffStatus.UNBLOCKED


def test_threshold_boundary_is_unblocked():
    direct = _resp(b"abcdefgh")
    clean = _resp(b"abcdefgh")
    assert classify_http("x.example", direct, clean, threshold=0.0).status is DiffStatus.UNBLOCKED


# ---------------------------------------------------------------------------
# the baseline comparison classifier


def test_baseline_false_negative_path_headers_match():
    # notifications mirror the server's header names and carry no title;
    # matching header names alone exonerate the site
    real = _resp(b"<html><head><title>Actual Website</title></head><body>real</body></html>")
    verdict = baseline_classify(real, AIRTEL_NOTICE)
    assert verdict.headers_match
    assert verdict.title_match is None  # guard skipped: no title on the notice
    assert not verdict.blocked


def test_baseline_false_positive_path_dynamic_page():
    control = HttpResponse.make(
        200, (("Content-Type", "text/html"), ("X-Cache-aaaa", "HIT")), b"<html><head><title>Daily Briefing one</title></head><body>" + b"a" * 50 + b"</body></html>"
    )
    experiment = HttpResponse.make(
        200, (("Content-Type", "text/html"), ("X-Cache-bbbb", "HIT")), b"<html><head><title>Daily Briefing two</title></head><body>" + b"b" * 700 + b"</body></html>"
    )
    verdict = baseline_classify(control, experiment)
    assert not verdict.body_length_match
    assert not verdict.headers_match
    assert verdict.title_match is False
    assert verdict.blocked


def test_baseline_title_guard_requires_five_char_word_in_both():
    a = HttpResponse.make(200, (("A", "1"),), b"<title>tiny one</title>")
    b = HttpResponse.make(200, (("B", "2"),), b"<title>tiny two</title>")
    verdict = baseline_classify(a, b)
    assert verdict.title_match is None  # no >=5-char word on either side
    long_a = HttpResponse.make(200, (("A", "1"),), b"<title>longerword one</title>" + b"x" * 300)
    long_b = HttpResponse.make(200, (("B", "2"),), b"<title>longerword one</title>")
    verdict2 = baseline_classify(long_a, long_b)
    assert verdict2.title_match is True
    assert not verdict2.blocked  # matching titles exonerate


# ---------------------------------------------------------------------------
# transport filtering


def test_transport_filtering_verdicts():
    scenario = load_scenario("transport_filter", 1)
    sim = scenario.build()
    client = scenario.client(sim)
    assert detect_transport_filtering(client, "filtered.example") is TransportVerdict.TCP_IP_FILTERED
    assert detect_transport_filtering(client, "reachable.example") is TransportVerdict.NOT_FILTERED
    with pytest.raises(SiteDownError):
        detect_transport_filtering(client, "down.example")


def test_scan_pipeline_routes_transport_failures():
    scenario = load_scenario("transport_filter", 1)
    sim = scenario.build()
    client = scenario.client(sim)
    assert scan_http_domain(client, "filtered.example") is TransportVerdict.TCP_IP_FILTERED
    clean = scan_http_domain(client, "reachable.example")
    assert clean.status is DiffStatus.UNBLOCKED


def test_https_fetches_are_refused():
    scenario = load_scenario("honest_path", 1)
    sim = scenario.build()
    client = scenario.client(sim)
    with pytest.raises(UnsupportedSchemeError):
        client.fetch("blocked.example", scheme="https")


# ---------------------------------------------------------------------------
# trigger analysis


@pytest.mark.parametrize(
    "mode,expected",
    [
        ("request_only", TriggerVerdict.REQUEST_ONLY),
        ("response_only", TriggerVerdict.RESPONSE_ONLY),
        ("both", TriggerVerdict.BOTH),
    ],
)
def test_trigger_analysis_recovers_planted_inspect_mode(mode, expected):
    scenario = load_scenario(f"inspect_{mode}", 3)
    sim = scenario.build()
    client = scenario.client(sim)
    assert trigger_analysis(client, "blocked.example", addr(scenario.meta["blocked_dst"])) is expected


@pytest.mark.parametrize("archetype", ARCHETYPE_NAMES)
def test_trigger_analysis_archetypes_are_request_only(archetype):
    scenario = http_archetype(archetype, seed=13)
    sim = scenario.build()
    client = ClientHandle(sim, "c1")
    assert trigger_analysis(client, "blocked.example", addr(scenario.meta["blocked_dst"])) is TriggerVerdict.REQUEST_ONLY


def test_trigger_analysis_errors_on_honest_path():
    scenario = load_scenario("honest_path", 1)
    sim = scenario.build()
    client = scenario.client(sim)
    with pytest.raises(InconsistentCensorshipError):
        trigger_analysis(client, "blocked.example")


# ---------------------------------------------------------------------------
# placement fuzzing


@pytest.mark.parametrize("archetype", ARCHETYPE_NAMES)
def test_fuzzing_only_the_host_field_triggers(archetype):
    scenario = http_archetype(archetype, seed=17)
    sim = scenario.build()
    client = ClientHandle(sim, "c1")
    placements = fuzz_trigger_fields(client, "allowed.example", "blocked.example", addr(scenario.meta["allowed_dst"]))
    assert placements == {Placement.HOST_FIELD}


# ---------------------------------------------------------------------------
# statefulness


@pytest.mark.parametrize("archetype", ARCHETYPE_NAMES)
def test_archetypes_probe_stateful(archetype):
    scenario = http_archetype(archetype, seed=19)
    sim = scenario.build()
    client = ClientHandle(sim, "c1")
    assert statefulness_probe(client, "blocked.example", addr(scenario.meta["blocked_dst"])) is Statefulness.STATEFUL


def test_stateless_config_probe_stateless():
    scenario = http_archetype("jio_wm", seed=19, stateful=False)
    sim = scenario.build()
    client = ClientHandle(sim, "c1")
    assert statefulness_probe(client, "blocked.example", addr(scenario.meta["blocked_dst"])) is Statefulness.STATELESS


def test_statefulness_probe_errors_without_censorship():
    scenario = load_scenario("honest_path", 1)
    sim = scenario.build()
    client = scenario.client(sim)
    with pytest.raises(InconsistentCensorshipError):
        statefulness_probe(client, "blocked.example")


# ---------------------------------------------------------------------------
# middlebox classification


_EXPECTED_CLASS = {
    "airtel_wm": (MbKind.WM, Visibility.OVERT, "airtel.com/dot", 242),
    "jio_wm": (MbKind.WM, Visibility.OVERT, "jio.fixed-redirect", None),
    "idea_im": (MbKind.IM, Visibility.OVERT, "idea.dot-notice", None),
    "vodafone_im": (MbKind.IM, Visibility.COVERT, "", None),
}


@pytest.mark.parametrize("archetype", ARCHETYPE_NAMES)
def test_classify_middlebox_matches_planted_archetype(archetype):
    scenario = http_archetype(archetype, seed=23)
    sim = scenario.build()
    client = ClientHandle(sim, "c1")
    evidence = collect_evidence(client, addr(scenario.meta["blocked_dst"]), "blocked.example")
    got = classify_middlebox(evidence)
    kind, visibility, fingerprint, ip_id = _EXPECTED_CLASS[archetype]
    assert got.kind is kind
    assert got.visibility is visibility
    assert got.fingerprint == fingerprint
    assert got.fixed_ip_id == ip_id
    assert got.stateful
    assert got.port_scope is PortScope.PORT_80_ONLY


def test_wm_delivers_genuine_content_in_some_trials():
    scenario = http_archetype("airtel_wm", seed=29)
    sim = scenario.build()
    client = ClientHandle(sim, "c1")
    clean_body = client.clean().fetch("blocked.example").body
    wins = sum(client.fetch("blocked.example").body == clean_body for _ in range(20))
    assert wins >= 1


def test_classify_requires_censor_evidence():
    trace = TraceResult(addr("1.2.3.4"))
    trace.records = {}
    with pytest.raises(UnclassifiedEvidenceError):
        classify_middlebox(Evidence("x.example", trace, transcripts=[]))


def test_contradictory_evidence_raises_with_transcripts():
    scenario = http_archetype("airtel_wm", seed=31)
    sim = scenario.build()
    client = ClientHandle(sim, "c1")
    evidence = collect_evidence(client, addr(scenario.meta["blocked_dst"]), "blocked.example", trials=3, full=False)
    evidence.server_receipt_datagrams = 0  # claim the controlled target saw nothing
    with pytest.raises(UnclassifiedEvidenceError) as err:
        classify_middlebox(evidence)
    assert err.value.transcripts


def test_covert_class_must_be_im():
    with pytest.raises(ValueError):
        MiddleboxClass(MbKind.WM, Visibility.COVERT, True, PortScope.PORT_80_ONLY, "")


def test_evidence_transcripts_are_clock_ordered():
    scenario = http_archetype("idea_im", seed=37)
    sim = scenario.build()
    client = ClientHandle(sim, "c1")
    evidence = collect_evidence(client, addr(scenario.meta["blocked_dst"]), "blocked.example", trials=2, full=False)
    for transcript in evidence.transcripts:
        ticks = [t for t, *_ in transcript]
        assert ticks == sorted(ticks)


def test_all_ports_config_sets_port_scope():
    import copy

    from censorkit.netsim import Simulator, build_topology
    from censorkit.netsim.middlebox import middlebox_from_config
    from conftest import small_chain_config

    cfg = copy.deepcopy(small_chain_config())
    cfg["servers"][0]["open_ports"] = [80, 8080]
    cfg["servers"][0]["controlled"] = True
    mb = middlebox_from_config(
        {
            "name": "anyport",
            "kind": "WM",
            "attach": "81.0.0.2",
            "blocklist": ["blocked.example"],
            "matcher": {"ports": "all_ports"},
            "notification": {"html": "<p>denied</p>"},
        }
    )
    sim = Simulator(build_topology(cfg), [mb], seed=3)
    client = ClientHandle(sim, "c1")
    evidence = collect_evidence(client, addr("151.101.9.10"), "blocked.example")
    assert classify_middlebox(evidence).port_scope is PortScope.ALL_PORTS
