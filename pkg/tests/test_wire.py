from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from censorkit.wire import (
    Canonical,
    DoubleHost,
    HostSelection,
    HostWhitespace,
    KeywordCase,
    MatcherConfig,
    Packet,
    TcpSegment,
    WireError,
    build_response,
    extract_title,
    hexdump,
    make_get,
    parse_http_censor,
    parse_http_server,
    parse_responses,
    serialize_http,
    split_request,
)
from censorkit.netsim.middlebox import airtel_wm, idea_im, jio_wm, vodafone_im

from conftest import addr


# ---------------------------------------------------------------------------
# packet-layer invariants


def test_rst_segments_carry_no_data():
    with pytest.raises(WireError):
        TcpSegment(1000, 80, 0, 0, frozenset({"RST"}), b"payload")


def test_seq_ack_wrap_modulo_2_32():
    seg = TcpSegment(1000, 80, 2**32 + 5, 2**33 + 7, frozenset({"ACK"}))
    assert seg.seq == 5
    assert seg.ack == 7


def test_packet_field_ranges():
    with pytest.raises(WireError):
        Packet(addr("1.2.3.4"), addr("5.6.7.8"), 300, 0, TcpSegment(1, 2, 0, 0, frozenset()))
    with pytest.raises(WireError):
        Packet(addr("1.2.3.4"), addr("5.6.7.8"), 64, 70000, TcpSegment(1, 2, 0, 0, frozenset()))


# ---------------------------------------------------------------------------
# serialization


def test_serialize_canonical_get():
    req = make_get("a.com")
    assert serialize_http(req) == b"GET / HTTP/1.1\r\nHost: a.com\r\n\r\n"


def test_serialize_preserves_header_bytes_verbatim():
    req = make_get("a.com", KeywordCase("HOST"))
    assert b"HOST: a.com" in serialize_http(req)


def test_serialize_trailing_bytes_after_first_blank_line():
    req = make_get("blocked.com", DoubleHost("allowed.com"))
    data = serialize_http(req)
    head, _, tail = data.partition(b"\r\n\r\n")
    assert b"Host: blocked.com" in head
    assert tail == b"Host: allowed.com\r\n\r\n"


# ---------------------------------------------------------------------------
# server-side parser


def test_server_parses_host_keyword_case_insensitively():
    out = parse_http_server(b"GET / HTTP/1.1\r\nHOST: x.com\r\n\r\n")
    assert [(r.host, r.well_formed) for r in out] == [("x.com", True)]


def test_server_trims_whitespace_around_value():
    out = parse_http_server(b"GET / HTTP/1.1\r\nHost:   x.com  \r\n\r\n")
    assert [(r.host, r.well_formed) for r in out] == [("x.com", True)]


def test_server_treats_trailing_block_as_second_request():
    out = parse_http_server(b"GET / HTTP/1.1\r\nHost: b.com\r\n\r\nHost: a.com")
    assert [(r.host, r.well_formed) for r in out] == [("b.com", True), ("a.com", False)]


def test_server_rejects_empty_input():
    with pytest.raises(WireError):
        parse_http_server(b"")


def _ascii_host():
    label = st.text(alphabet="abcdefghijklmnopqrstuvwxyz0123456789-", min_size=1, max_size=12)
    return st.builds(lambda a, b: f"{a}.{b}", label, label)


@given(_ascii_host())
@settings(max_examples=150)
def test_roundtrip_serialize_then_server_parse(host):
    parsed = parse_http_server(serialize_http(make_get(host)))
    assert parsed[0].host == host
    assert parsed[0].well_formed


@given(_ascii_host(), st.sampled_from(["HOST", "HOst", "hoST", "host"]))
@settings(max_examples=100)
def test_roundtrip_survives_keyword_case(host, keyword):
    parsed = parse_http_server(serialize_http(make_get(host, KeywordCase(keyword))))
    assert parsed[0].host == host


# ---------------------------------------------------------------------------
# censor-side matcher


def test_censor_matches_canonical_host_line():
    cfg = MatcherConfig(keyword_case_sensitive=True, require_single_space_after_colon=True)
    assert parse_http_censor(b"GET / HTTP/1.1\r\nHost: blocked.com\r\n\r\n", cfg) == "blocked.com"


def test_case_sensitive_censor_misses_uppercase_keyword():
    cfg = MatcherConfig(keyword_case_sensitive=True)
    assert parse_http_censor(b"GET / HTTP/1.1\r\nHOST: blocked.com\r\n\r\n", cfg) is None


def test_last_host_selection_reads_trailing_bytes():
    cfg = MatcherConfig(host_selection=HostSelection.LAST, scan_trailing_bytes=True)
    data = serialize_http(make_get("blocked.com", DoubleHost("allowed.com")))
    assert parse_http_censor(data, cfg) == "allowed.com"


def test_first_host_selection_ignores_trailing_bytes_by_default():
    data = serialize_http(make_get("blocked.com", DoubleHost("allowed.com")))
    assert parse_http_censor(data, MatcherConfig()) == "blocked.com"


def test_domain_outside_host_line_never_matches():
    data = b"GET /blocked.com HTTP/1.1\r\nX-Pad: blocked.com\r\nHost: a.com\r\n\r\n"
    assert parse_http_censor(data, MatcherConfig()) == "a.com"


def test_single_space_matcher_rejects_padding():
    cfg = MatcherConfig(require_single_space_after_colon=True, reject_trailing_whitespace=True)
    assert parse_http_censor(b"Host:  blocked.com\r\n\r\n", cfg) is None
    assert parse_http_censor(b"Host:\tblocked.com\r\n\r\n", cfg) is None
    assert parse_http_censor(b"Host: blocked.com \r\n\r\n", cfg) is None
    assert parse_http_censor(b"Host: blocked.com\r\n\r\n", cfg) == "blocked.com"


@given(st.binary(max_size=300), st.booleans(), st.booleans(), st.booleans(), st.booleans())
@settings(max_examples=300)
def test_censor_parser_is_total_and_deterministic(data, case, single, trailing, scan):
    cfg = MatcherConfig(
        keyword_case_sensitive=case,
        require_single_space_after_colon=single,
        reject_trailing_whitespace=trailing,
        scan_trailing_bytes=scan,
    )
    assert parse_http_censor(data, cfg) == parse_http_censor(data, cfg)


# ---------------------------------------------------------------------------
# request construction


def test_make_get_canonical_header_line():
    assert make_get("a.com").header_lines == (b"Host: a.com",)


def test_make_get_keyword_case_permutation():
    assert make_get("a.com", KeywordCase("HOst")).header_lines == (b"HOst: a.com",)


def test_make_get_rejects_non_host_keyword():
    with pytest.raises(WireError):
        KeywordCase("Hosts")


def test_make_get_double_host_trailing():
    req = make_get("blocked.com", DoubleHost("allowed.com"))
    assert b"Host: allowed.com" in req.trailing_bytes


def test_make_get_rejects_empty_host_and_unknown_variant():
    with pytest.raises(WireError):
        make_get("")
    with pytest.raises(WireError):
        make_get("a.com", variant="fragment")  # type: ignore[arg-type]


def test_split_request_offsets_validated():
    data = serialize_http(make_get("a.com"))
    assert b"".join(split_request(data, (5, 9))) == data
    with pytest.raises(WireError):
        split_request(data, (0,))
    with pytest.raises(WireError):
        split_request(data, (9, 5))


# ---------------------------------------------------------------------------
# divergence witnesses: every archetype matcher misses at least one variant
# that the server still parses, and every variant slips one archetype


_ARCHETYPE_MATCHERS = {
    "airtel_wm": airtel_wm(addr("10.0.0.1"), {"blocked.com"}).matcher,
    "jio_wm": jio_wm(addr("10.0.0.1"), {"blocked.com"}).matcher,
    "idea_im": idea_im(addr("10.0.0.1"), {"blocked.com"}).matcher,
    "vodafone_im": vodafone_im(addr("10.0.0.1"), {"blocked.com"}).matcher,
}

_VARIANTS = {
    "keyword_case": make_get("blocked.com", KeywordCase("HOST")),
    "whitespace": make_get("blocked.com", HostWhitespace(before=2)),
    "double_host": make_get("blocked.com", DoubleHost("allowed.com")),
}


def _censor_sees_blocked(matcher, request, fragmented=False) -> bool:
    data = serialize_http(request)
    if fragmented:
        parts = split_request(data, (data.index(b"Host:") + 2,))
        return any(parse_http_censor(p, matcher) == "blocked.com" for p in parts)
    return parse_http_censor(data, matcher) == "blocked.com"


@pytest.mark.parametrize("archetype", sorted(_ARCHETYPE_MATCHERS))
def test_every_archetype_is_evadable_while_server_still_parses(archetype):
    matcher = _ARCHETYPE_MATCHERS[archetype]
    evading = [
        name
        for name, req in _VARIANTS.items()
        if not _censor_sees_blocked(matcher, req) and parse_http_server(serialize_http(req))[0].host == "blocked.com"
    ]
    # fragmentation works against every non-reassembling matcher
    if not _censor_sees_blocked(matcher, make_get("blocked.com"), fragmented=True):
        evading.append("fragmented")
    assert evading, f"{archetype} catches every catalog variant"


@pytest.mark.parametrize("variant", sorted(_VARIANTS))
def test_every_variant_slips_some_archetype(variant):
    req = _VARIANTS[variant]
    assert any(not _censor_sees_blocked(m, req) for m in _ARCHETYPE_MATCHERS.values())
    assert parse_http_server(serialize_http(req))[0].host == "blocked.com"


# ---------------------------------------------------------------------------
# responses


def test_build_and_parse_response_roundtrip():
    data = build_response(200, (("Content-Type", "text/html"),), b"<html><title>Hi there</title>x</html>")
    out = parse_responses(data)
    assert len(out) == 1
    assert out[0].status == 200
    assert out[0].title_tag == "Hi there"
    assert out[0].body.endswith(b"x</html>")


def test_parse_two_framed_responses():
    stream = build_response(200, (), b"first") + build_response(400, (), b"second")
    out = parse_responses(stream)
    assert [(r.status, r.body) for r in out] == [(200, b"first"), (400, b"second")]


def test_extract_title_absent():
    assert extract_title(b"<html><body>no title</body></html>") is None


def test_hexdump_renders_offsets_and_ascii():
    dump = hexdump(b"GET / HTTP/1.1\r\n")
    assert dump.startswith("00000000")
    assert "GET / HTTP/1.1.." in dump
