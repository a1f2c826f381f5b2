from __future__ import annotations

import pytest

from censorkit.netsim import ClientHandle, EventKind, Simulator, TransportError, build_topology, airtel_wm, idea_im
from censorkit.netsim.scenarios import http_archetype, load_scenario, random_localization
from censorkit.netsim.topology import ANONYMIZED
from censorkit.tracer import (
    CensorResponse,
    DnsMechanism,
    DnsQueryProbe,
    HonestDnsAnswer,
    HttpGetProbe,
    IcmpFrom,
    ManipulatedDnsAnswer,
    ProbeSpec,
    ProbeTimeout,
    ServerResponse,
    TraceResult,
    classify_dns_mechanism,
    http_trace,
    iterative_trace,
    locate_middlebox,
)
from censorkit.wire import make_get

from conftest import addr, small_chain_config


def test_ttl_range_validated():
    with pytest.raises(ValueError):
        ProbeSpec(HttpGetProbe(make_get("a.com")), addr("1.2.3.4"), (0, 5))
    with pytest.raises(ValueError):
        ProbeSpec(HttpGetProbe(make_get("a.com")), addr("1.2.3.4"), (1, 70))


def test_wm_trace_shape_matches_raw_event_oracle():
    """Oracle: the netsim event trace says which entity answered each probe."""
    scenario = http_archetype("airtel_wm", seed=7)
    sim = scenario.build()
    client = ClientHandle(sim, "c1")
    dst = addr(scenario.meta["blocked_dst"])
    hop = scenario.meta["attach_hop"]

    # raw oracle pass: at each TTL, look at provenance tags on the events
    oracle = {}
    for ttl in range(1, 7):
        flow = client.open_flow(dst)
        events = flow.send_request(make_get("blocked.example"), ttl=ttl)
        if any(e.origin.startswith("middlebox:") and e.kind is EventKind.DELIVERY for e in events):
            oracle[ttl] = "censor"
        elif any(e.kind is EventKind.ICMP for e in events):
            oracle[ttl] = "icmp"
        else:
            oracle[ttl] = "timeout"
    assert oracle == {1: "icmp", 2: "icmp", 3: "censor", 4: "censor", 5: "censor", 6: "censor"}

    trace = http_trace(client, "blocked.example", dst)
    for ttl, expected in oracle.items():
        got = trace.records[ttl]
        if expected == "censor":
            assert isinstance(got, CensorResponse)
        elif expected == "icmp":
            assert isinstance(got, IcmpFrom)
    assert trace.censor_ttls()[0] == hop


def test_allowed_host_gives_icmp_ladder_then_server_response():
    scenario = http_archetype("airtel_wm", seed=7)
    sim = scenario.build()
    client = ClientHandle(sim, "c1")
    dst = addr(scenario.meta["allowed_dst"])
    spec = ProbeSpec(HttpGetProbe(make_get("allowed.example")), dst, (1, 10))
    trace = iterative_trace(client, spec)
    n = scenario.meta["path_hops"]
    for ttl in range(1, n):
        assert isinstance(trace.records[ttl], IcmpFrom)
    assert isinstance(trace.records[n], ServerResponse)
    assert n + 1 not in trace.records  # early stop at the first genuine answer


def test_exhaustive_mode_probes_past_the_server_hop():
    scenario = http_archetype("airtel_wm", seed=7)
    sim = scenario.build()
    client = ClientHandle(sim, "c1")
    dst = addr(scenario.meta["allowed_dst"])
    spec = ProbeSpec(HttpGetProbe(make_get("allowed.example")), dst, (1, 8))
    trace = iterative_trace(client, spec, exhaustive=True)
    assert set(trace.records) == set(range(1, 9))


def test_dns_poisoning_trace_manipulated_at_last_hop_only():
    scenario, sim, client = _dns_case("bsnl_dns")
    resolver = addr(scenario.meta["default_resolver"])
    domain = scenario.meta["expected"]["blocked_sets"][scenario.meta["default_resolver"]][0]
    spec = ProbeSpec(
        DnsQueryProbe(domain, resolver, frozenset(client.resolve_clean(domain))), resolver, (1, 4)
    )
    trace = iterative_trace(client, spec)
    assert isinstance(trace.records[4], ManipulatedDnsAnswer)
    for ttl in (1, 2, 3):
        assert isinstance(trace.records[ttl], (IcmpFrom, ProbeTimeout))
    assert classify_dns_mechanism(trace, path_len=4) is DnsMechanism.POISONING


def _dns_case(name):
    scenario = load_scenario(name, 1)
    sim = scenario.build()
    return scenario, sim, scenario.client(sim)


def test_dns_injection_trace_manipulated_before_last_hop():
    scenario, sim, client = _dns_case("dns_injected")
    resolver = addr(scenario.meta["default_resolver"])
    domain = scenario.meta["pbw"][0]
    spec = ProbeSpec(
        DnsQueryProbe(domain, resolver, frozenset(client.resolve_clean(domain))), resolver, (1, 4)
    )
    trace = iterative_trace(client, spec)
    assert isinstance(trace.records[2], ManipulatedDnsAnswer)
    assert classify_dns_mechanism(trace, path_len=4) is DnsMechanism.INJECTION


def test_classify_dns_mechanism_earlier_evidence_dominates():
    trace = TraceResult(addr("1.2.3.4"))
    trace.records = {
        2: ManipulatedDnsAnswer(addr("10.0.0.1")),
        4: ManipulatedDnsAnswer(addr("10.0.0.1")),
    }
    assert classify_dns_mechanism(trace, path_len=4) is DnsMechanism.INJECTION


def test_classify_dns_mechanism_requires_manipulated_answers():
    trace = TraceResult(addr("1.2.3.4"))
    trace.records = {1: HonestDnsAnswer(frozenset())}
    with pytest.raises(ValueError):
        classify_dns_mechanism(trace, path_len=4)


def test_locate_middlebox_visible_and_anonymized_and_clean():
    scenario = http_archetype("airtel_wm", seed=9)
    sim = scenario.build()
    client = ClientHandle(sim, "c1")
    dst = addr(scenario.meta["blocked_dst"])
    located = locate_middlebox(http_trace(client, "blocked.example", dst))
    assert located.hop == scenario.meta["attach_hop"]
    assert located.addr == addr("125.16.0.3")

    hidden = http_archetype("airtel_wm", seed=9, anonymize_attach=True)
    sim2 = hidden.build()
    client2 = ClientHandle(sim2, "c1")
    located2 = locate_middlebox(http_trace(client2, "blocked.example", dst))
    assert located2.hop == hidden.meta["attach_hop"]
    assert located2.addr is ANONYMIZED

    clean = locate_middlebox(http_trace(client, "allowed.example", addr(scenario.meta["allowed_dst"])))
    assert clean is None


def test_locate_middlebox_rejects_empty_trace():
    with pytest.raises(ValueError):
        locate_middlebox(TraceResult(addr("1.2.3.4")))


def test_localization_soundness_on_randomized_topologies():
    for seed in range(10):
        scenario = random_localization(seed)
        sim = scenario.build()
        client = ClientHandle(sim, "c1")
        dst = addr(scenario.meta["blocked_dst"])
        located = locate_middlebox(http_trace(client, "blocked.example", dst))
        assert located is not None
        assert located.hop == scenario.meta["expected"]["attach_hop"], scenario.name


def test_im_monotonicity_no_icmp_beyond_located_hop():
    scenario = http_archetype("idea_im", seed=5)
    sim = scenario.build()
    client = ClientHandle(sim, "c1")
    dst = addr(scenario.meta["blocked_dst"])
    trace = http_trace(client, "blocked.example", dst)
    located = locate_middlebox(trace)
    for ttl, obs in trace.records.items():
        if ttl > located.hop:
            assert not isinstance(obs, IcmpFrom)


def test_handshake_failure_is_a_transport_error_not_a_timeout():
    scenario = load_scenario("transport_filter", 0)
    sim = scenario.build()
    client = scenario.client(sim)
    spec = ProbeSpec(HttpGetProbe(make_get("filtered.example")), addr("151.103.1.10"), (1, 3))
    with pytest.raises(TransportError):
        iterative_trace(client, spec)


def test_trace_jsonl_round_trips():
    scenario = http_archetype("jio_wm", seed=2)
    sim = scenario.build()
    client = ClientHandle(sim, "c1")
    trace = http_trace(client, "blocked.example", addr(scenario.meta["blocked_dst"]))
    lines = trace.to_jsonl().splitlines()
    assert len(lines) == len(trace.records)
    assert all(line.startswith("{") for line in lines)
