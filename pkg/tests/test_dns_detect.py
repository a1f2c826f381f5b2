from __future__ import annotations

from ipaddress import IPv4Network

import pytest

from censorkit.dns_detect import (
    BOGON_PREFIXES,
    CensorReason,
    DnsStatus,
    DnsVerdict,
    Overlap,
    ResolutionRecord,
    VantageKind,
    discover_resolvers,
    find_censorious_resolvers,
    frequency_analysis,
    is_bogon,
    overlap_filter,
    same_as_heuristic,
    scan_resolver,
    trace_dns_mechanism,
)
from censorkit.netsim.scenarios import load_scenario
from censorkit.tracer import DnsMechanism

from conftest import addr


def _rec(domain, vantage, *addrs):
    return ResolutionRecord(domain, vantage, frozenset(addr(a) for a in addrs))


# ---------------------------------------------------------------------------
# overlap filter


def test_overlap_shared_element():
    direct = _rec("a.com", VantageKind.DIRECT, "1.2.3.4")
    clean = _rec("a.com", VantageKind.CLEAN, "1.2.3.4", "5.6.7.8")
    assert overlap_filter(direct, clean) is Overlap.OVERLAPPING


def test_overlap_disjoint():
    direct = _rec("a.com", VantageKind.DIRECT, "10.11.12.13")
    clean = _rec("a.com", VantageKind.CLEAN, "5.6.7.8")
    assert overlap_filter(direct, clean) is Overlap.DISJOINT


def test_overlap_identical_sets():
    direct = _rec("a.com", VantageKind.DIRECT, "1.2.3.4")
    clean = _rec("a.com", VantageKind.CLEAN, "1.2.3.4")
    assert overlap_filter(direct, clean) is Overlap.OVERLAPPING


def test_overlap_rejects_domain_mismatch():
    with pytest.raises(ValueError):
        overlap_filter(_rec("a.com", VantageKind.DIRECT, "1.2.3.4"), _rec("b.com", VantageKind.CLEAN, "1.2.3.4"))


# ---------------------------------------------------------------------------
# frequency analysis


def test_frequency_analysis_clusters_shared_answers():
    records = [
        _rec("a.com", VantageKind.DIRECT, "59.180.255.10"),
        _rec("b.com", VantageKind.DIRECT, "59.180.255.10"),
        _rec("c.com", VantageKind.DIRECT, "151.101.1.1"),
    ]
    out = frequency_analysis(records)
    assert out == {addr("59.180.255.10"): {"a.com", "b.com"}}


def test_frequency_analysis_respects_whitelist():
    records = [
        _rec("a.com", VantageKind.DIRECT, "151.101.250.1"),
        _rec("b.com", VantageKind.DIRECT, "151.101.250.1"),
    ]
    assert frequency_analysis(records, {addr("151.101.250.1")}) == {}


def test_frequency_analysis_all_distinct_is_empty():
    records = [
        _rec("a.com", VantageKind.DIRECT, "1.1.1.1"),
        _rec("b.com", VantageKind.DIRECT, "2.2.2.2"),
    ]
    assert frequency_analysis(records) == {}


def test_frequency_analysis_rejects_clean_records():
    with pytest.raises(ValueError):
        frequency_analysis([_rec("a.com", VantageKind.CLEAN, "1.1.1.1")])


# ---------------------------------------------------------------------------
# bogon and same-AS heuristics


def test_bogon_examples():
    assert is_bogon(addr("10.1.2.3"))
    assert not is_bogon(addr("8.8.8.8"))
    assert is_bogon(addr("100.64.0.1"))


@pytest.mark.parametrize("prefix", [str(p) for p in BOGON_PREFIXES])
def test_bogon_prefix_boundaries(prefix):
    net = IPv4Network(prefix)
    assert is_bogon(net.network_address)
    assert is_bogon(net.broadcast_address)
    below = int(net.network_address) - 1
    above = int(net.broadcast_address) + 1
    for neighbor in (below, above):
        if 0 <= neighbor <= 0xFFFFFFFF:
            neighbor_addr = addr(str(IPv4Network((neighbor, 32)).network_address))
            if not any(neighbor_addr in p for p in BOGON_PREFIXES):
                assert not is_bogon(neighbor_addr)


def test_same_as_heuristic_inclusive_boundaries():
    prefixes = (IPv4Network("59.180.0.0/16"),)
    assert same_as_heuristic(addr("59.180.255.10"), prefixes)
    assert same_as_heuristic(addr("59.180.0.0"), prefixes)
    assert same_as_heuristic(addr("59.180.255.255"), prefixes)
    assert not same_as_heuristic(addr("59.181.0.0"), prefixes)
    assert not same_as_heuristic(addr("151.101.1.1"), prefixes)


def test_verdict_reason_consistency():
    with pytest.raises(ValueError):
        DnsVerdict("a.com", DnsStatus.CENSORED, addr("1.1.1.1"))
    with pytest.raises(ValueError):
        DnsVerdict("a.com", DnsStatus.UNCENSORED, addr("1.1.1.1"), CensorReason.BOGON)


# ---------------------------------------------------------------------------
# active probing on the planted grids


@pytest.fixture(scope="module")
def bsnl():
    scenario = load_scenario("bsnl_dns", 1)
    sim = scenario.build()
    return scenario, scenario.client(sim)


def test_discover_resolvers_finds_planted_grid(bsnl):
    scenario, client = bsnl
    known = {addr(a) for a in scenario.meta["known_answer"]}
    found = discover_resolvers(client, scenario.meta["resolver_prefix"], scenario.meta["probe_domain"], known)
    assert len(found) == scenario.meta["expected"]["resolver_count"]


def test_discover_resolvers_excludes_wrong_answers(bsnl):
    scenario, client = bsnl
    found = discover_resolvers(
        client, scenario.meta["resolver_prefix"], scenario.meta["probe_domain"], {addr("9.9.9.9")}
    )
    assert found == []


def test_find_censorious_resolvers_matches_planted_sets(bsnl):
    scenario, client = bsnl
    known = {addr(a) for a in scenario.meta["known_answer"]}
    resolvers = discover_resolvers(client, scenario.meta["resolver_prefix"], scenario.meta["probe_domain"], known)
    censorious = find_censorious_resolvers(
        client, resolvers, scenario.meta["pbw"], frozenset(addr(a) for a in scenario.meta["whitelist"])
    )
    expected = scenario.meta["expected"]["blocked_sets"]
    assert {str(r) for r in censorious} == set(expected)
    for resolver, blocked in censorious.items():
        assert sorted(blocked) == expected[str(resolver)]


def test_scan_soundness_verdicts_match_planted_poison(bsnl):
    scenario, client = bsnl
    resolver_addr = scenario.meta["default_resolver"]
    planted = set(scenario.meta["expected"]["blocked_sets"][resolver_addr])
    verdicts = scan_resolver(client, addr(resolver_addr), scenario.meta["pbw"])
    censored = {v.domain for v in verdicts if v.status is DnsStatus.CENSORED}
    assert censored == planted
    reasons = {v.domain: v.reason for v in verdicts if v.reason is not None}
    assert set(reasons.values()) <= {CensorReason.SAME_AS, CensorReason.BOGON}


def test_honest_resolver_yields_no_censorious_entries(bsnl):
    scenario, client = bsnl
    honest = addr(scenario.meta["honest_resolver"])
    assert find_censorious_resolvers(client, [honest], scenario.meta["pbw"][:10]) == {}


def test_shared_hosting_stays_uncensored(bsnl):
    scenario, client = bsnl
    verdicts = scan_resolver(
        client,
        addr(scenario.meta["default_resolver"]),
        ["shared-a.example", "shared-b.example"],
        frozenset(addr(a) for a in scenario.meta["whitelist"]),
    )
    assert all(v.status is DnsStatus.UNCENSORED for v in verdicts)


def test_trace_dns_mechanism_poisoning(bsnl):
    scenario, client = bsnl
    resolver_addr = scenario.meta["default_resolver"]
    domain = scenario.meta["expected"]["blocked_sets"][resolver_addr][0]
    mechanism, trace = trace_dns_mechanism(client, addr(resolver_addr), domain)
    assert mechanism is DnsMechanism.POISONING
    assert trace.records


def test_cdn_style_overlap_never_flags():
    """Direct and clean answers sharing one address must stay uncensored."""
    scenario = load_scenario("honest_path", 1)
    sim = scenario.build()
    client = scenario.client(sim)
    verdicts = scan_resolver(client, addr(scenario.meta["default_resolver"]), ["blocked.example"])
    assert [v.status for v in verdicts] == [DnsStatus.UNCENSORED]
