"""HTTP and TCP/IP censorship detection.

Content comparison uses the matching-blocks ratio (difflib): difference is
1 - 2M/(len_a + len_b) over response *bodies* only, never headers, which is
what keeps CDN header noise out of the verdict.  Anything over the threshold
lands in a review queue unless a known notification fingerprint confirms it;
nothing is auto-flagged on a bare diff.

The active probes then pin down mechanism: which message triggers the censor
(request, response, or both), which byte placements trigger it, whether it
needs a full handshake first, and whether it intercepts the flow or merely
races it from a tap.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass
from enum import Enum

from .fingerprints import DEFAULT_REGISTRY, FingerprintRegistry
from .netsim.client import ClientHandle, FlowHandle
from .netsim.middlebox import MbKind
from .netsim.sim import TransportError
from .tracer import TraceResult, http_trace
from .wire import (
    Canonical,
    HttpResponse,
    Ipv4Addr,
    KeywordCase,
    Packet,
    PortScope,
    RawHttpRequest,
    make_get,
    serialize_http,
)


class InconsistentCensorshipError(RuntimeError):
    """The flow under test did not behave like a censored flow."""


class UnclassifiedEvidenceError(RuntimeError):
    def __init__(self, message: str, transcripts=None):
        super().__init__(message)
        self.transcripts = transcripts or []


class SiteDownError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# content comparison


def content_diff(body_a: bytes, body_b: bytes) -> float:
    """1 - 2M/(len_a+len_b), M = total length of maximal matching blocks.

    The underlying matcher breaks ties differently depending on argument
    order, so the pair is canonicalized first to keep the measure symmetric.
    """
    if not body_a and not body_b:
        return 0.0
    if body_b < body_a:
        body_a, body_b = body_b, body_a
    matcher = difflib.SequenceMatcher(None, body_a, body_b, autojunk=False)
    return 1.0 - matcher.ratio()


class DiffStatus(Enum):
    UNBLOCKED = "unblocked"
    NEEDS_REVIEW = "needs_review"
    CONFIRMED_BLOCKED = "confirmed_blocked"


@dataclass(frozen=True)
class DiffVerdict:
    domain: str
    difference: float
    status: DiffStatus
    fingerprint: str | None = None

    def __post_init__(self) -> None:
        if self.status is DiffStatus.CONFIRMED_BLOCKED and not self.fingerprint:
            raise ValueError("ConfirmedBlocked requires a fingerprint or review confirmation")


def classify_http(
    domain: str,
    direct_response: HttpResponse,
    clean_response: HttpResponse,
    threshold: float = 0.3,
    registry: FingerprintRegistry = DEFAULT_REGISTRY,
) -> DiffVerdict:
    """Body-diff classification with a review queue instead of auto-flagging."""
    difference = content_diff(direct_response.body, clean_response.body)
    if difference <= threshold:
        return DiffVerdict(domain, difference, DiffStatus.UNBLOCKED)
    fp = registry.match(direct_response.body)
    if fp is not None:
        return DiffVerdict(domain, difference, DiffStatus.CONFIRMED_BLOCKED, fp.name)
    return DiffVerdict(domain, difference, DiffStatus.NEEDS_REVIEW)


def adjudicate(verdict: DiffVerdict, confirmed_blocked: bool, label: str = "manual") -> DiffVerdict:
    """Apply a review decision to a NeedsReview verdict."""
    if verdict.status is not DiffStatus.NEEDS_REVIEW:
        return verdict
    if confirmed_blocked:
        return DiffVerdict(verdict.domain, verdict.difference, DiffStatus.CONFIRMED_BLOCKED, f"review:{label}")
    return DiffVerdict(verdict.domain, verdict.difference, DiffStatus.UNBLOCKED)


# ---------------------------------------------------------------------------
# the comparison baseline detector (the object of study, not the default)


@dataclass(frozen=True)
class BaselineVerdict:
    blocked: bool
    body_length_match: bool
    headers_match: bool
    title_match: bool | None  # None when the length guard skipped the check


def _title_guard(a: str | None, b: str | None) -> bool:
    def has_long_word(title: str | None) -> bool:
        return title is not None and any(len(w) >= 5 for w in title.split())

    return has_long_word(a) and has_long_word(b)


def baseline_classify(control: HttpResponse, experiment: HttpResponse, factor: float = 0.8) -> BaselineVerdict:
    """Body-length / header-name / title-tag comparison, as the popular probes do it.

    Blocked only when every applicable condition signals a difference; the
    title comparison only applies when a word in both titles is at least five
    characters long.
    """
    la, lb = len(control.body), len(experiment.body)
    if la == 0 and lb == 0:
        proportion = 1.0
    elif la == 0 or lb == 0:
        proportion = 0.0
    else:
        proportion = min(la, lb) / max(la, lb)
    body_length_match = proportion > factor
    headers_match = set(control.header_names()) == set(experiment.header_names())
    title_match: bool | None = None
    if _title_guard(control.title_tag, experiment.title_tag):
        title_match = control.title_tag == experiment.title_tag
    blocked = not (body_length_match or headers_match or title_match is True)
    return BaselineVerdict(blocked, body_length_match, headers_match, title_match)


# ---------------------------------------------------------------------------
# transport filtering


class TransportVerdict(Enum):
    TCP_IP_FILTERED = "tcp_ip_filtered"
    NOT_FILTERED = "not_filtered"


def detect_transport_filtering(client: ClientHandle, site: str, attempts: int = 5, spacing_ticks: int = 2) -> TransportVerdict:
    """Five spaced handshake attempts; filtering means all of them die."""
    answers = client.resolve_clean(site)
    if not answers:
        raise SiteDownError(f"no known address for {site}")
    dst = sorted(answers, key=int)[0]
    try:
        clean_flow = client.clean().open_flow(dst)
    except TransportError as exc:
        raise SiteDownError(f"{site} is down even from the clean vantage") from exc
    clean_flow.close()
    failures = 0
    for attempt in range(attempts):
        if attempt:
            client.sim.advance(spacing_ticks)
        try:
            flow = client.open_flow(dst)
        except TransportError:
            failures += 1
            continue
        flow.close()
    return TransportVerdict.TCP_IP_FILTERED if failures == attempts else TransportVerdict.NOT_FILTERED


# ---------------------------------------------------------------------------
# trigger analysis


class TriggerVerdict(Enum):
    REQUEST_ONLY = "request_only"
    RESPONSE_ONLY = "response_only"
    BOTH = "both"


def _fragment_offsets(request: RawHttpRequest) -> tuple[int, ...]:
    data = serialize_http(request)
    # split inside the Host keyword so a non-reassembling matcher never sees it
    return (data.index(b"Host:") + 2,)


def trigger_analysis(client: ClientHandle, site: str, dst: Ipv4Addr | None = None) -> TriggerVerdict:
    """Two TTL-staggered GETs on one flow, then a censor-invisible control GET.

    The first GET dies at the penultimate hop, the second reaches the site;
    which of them draws a censor reply separates request- from
    response-triggered inspection, and the crafted control GET separates
    request-only from both.
    """
    if dst is None:
        dst = sorted(client.resolve_clean(site), key=int)[0]
    n = len(client.traceroute(dst))
    if n < 2:
        raise InconsistentCensorshipError(f"path to {dst} too short to stagger probes")
    flow = client.open_flow(dst)
    request = make_get(site)
    data = serialize_http(request)
    seq0 = flow._flow.snd_next
    before = len(flow.censor_hits())
    flow.send_request(request, ttl=n - 1)
    first_hits = len(flow.censor_hits()) - before
    # the second GET refills the same sequence space the dead probe used
    flow.emit({"PSH", "ACK"}, data=data, ttl=n, seq=seq0)
    second_hits = len(flow.censor_hits()) - before - first_hits
    if not first_hits and not second_hits:
        raise InconsistentCensorshipError(f"{site}: neither staggered GET drew a censor reply")
    if not first_hits and second_hits:
        return TriggerVerdict.RESPONSE_ONLY
    if first_hits and not second_hits:
        raise InconsistentCensorshipError(f"{site}: censor answered the dead probe but not the live one")
    # both answered: run the censor-invisible, server-valid control
    control = client.open_flow(dst)
    control.send_request(request, split_offsets=_fragment_offsets(request))
    if control.censor_hits():
        return TriggerVerdict.BOTH
    if control.genuine_data_seen():
        return TriggerVerdict.REQUEST_ONLY
    raise InconsistentCensorshipError(f"{site}: control GET produced neither content nor a censor reply")


# ---------------------------------------------------------------------------
# trigger placement fuzzing


class Placement(Enum):
    HOST_FIELD = "host_field"
    REQUEST_PATH = "request_path"
    HEADER_OFFSET = "header_offset"


def fuzz_trigger_fields(client: ClientHandle, site: str, censored_domain: str, dst: Ipv4Addr | None = None) -> set[Placement]:
    """Move the censored domain around the request; report which spots trigger.

    Probes carry TTL = penultimate hop so they pass the middlebox but never
    reach the server; any reply is the censor's.
    """
    if dst is None:
        dst = sorted(client.resolve_clean(site), key=int)[0]
    n = len(client.traceroute(dst))
    pent = n - 1
    rng = client.sim.rng
    pad = "x" * rng.randrange(3, 20)
    cd = censored_domain.encode("ascii")
    probes = {
        Placement.HOST_FIELD: make_get(censored_domain),
        Placement.REQUEST_PATH: RawHttpRequest(
            b"GET /fetch?url=http://" + cd + b"/ HTTP/1.1",
            (b"Host: " + site.encode("ascii"),),
        ),
        Placement.HEADER_OFFSET: RawHttpRequest(
            b"GET / HTTP/1.1",
            (
                b"Host: " + site.encode("ascii"),
                b"X-Pad: " + pad.encode("ascii") + cd + b"tail",
            ),
        ),
    }
    triggering = set()
    for placement, request in probes.items():
        flow = client.open_flow(dst)
        flow.send_request(request, ttl=pent)
        if flow.censor_hits():
            triggering.add(placement)
    return triggering


# ---------------------------------------------------------------------------
# statefulness


class Statefulness(Enum):
    STATEFUL = "stateful"
    STATELESS = "stateless"


def _handshake_scripts(client: ClientHandle, dst: Ipv4Addr, request_bytes: bytes, pent: int) -> list[FlowHandle]:
    """The four partial-handshake scripts; every GET dies at the penultimate hop."""
    flows = []

    f1 = client.script_flow(dst)  # SYN that never reaches the server
    f1.emit({"SYN"}, ttl=pent)
    f1.emit({"PSH", "ACK"}, data=request_bytes, ttl=pent)
    flows.append(f1)

    f2 = client.script_flow(dst)  # backwards opener
    f2.emit({"SYN", "ACK"}, ttl=pent)
    f2.emit({"PSH", "ACK"}, data=request_bytes, ttl=pent)
    flows.append(f2)

    f3 = client.script_flow(dst)  # real handshake minus the final ACK
    f3.emit({"SYN"})
    f3.emit({"PSH", "ACK"}, data=request_bytes, ttl=pent)
    flows.append(f3)

    f4 = client.script_flow(dst)  # no preceding handshake at all
    f4.emit({"PSH", "ACK"}, data=request_bytes, ttl=pent)
    flows.append(f4)

    return flows


def statefulness_probe(client: ClientHandle, site: str, dst: Ipv4Addr | None = None) -> Statefulness:
    """Stateful boxes ignore all four partial-handshake scripts but hit the control."""
    if dst is None:
        dst = sorted(client.resolve_clean(site), key=int)[0]
    n = len(client.traceroute(dst))
    pent = n - 1
    request_bytes = serialize_http(make_get(site))
    control = client.open_flow(dst)
    control.send_request(request_bytes, ttl=pent)
    if not control.censor_hits():
        raise InconsistentCensorshipError(f"{site}: full-handshake GET drew no censor reply")
    script_hits = sum(bool(f.censor_hits()) for f in _handshake_scripts(client, dst, request_bytes, pent))
    return Statefulness.STATEFUL if script_hits == 0 else Statefulness.STATELESS


# ---------------------------------------------------------------------------
# middlebox classification


class Visibility(Enum):
    OVERT = "overt"
    COVERT = "covert"


@dataclass(frozen=True)
class MiddleboxClass:
    kind: MbKind
    visibility: Visibility
    stateful: bool
    port_scope: PortScope
    fingerprint: str
    fixed_ip_id: int | None = None

    def __post_init__(self) -> None:
        if self.visibility is Visibility.COVERT and self.kind is not MbKind.IM:
            raise ValueError("covert censorship is IM-shaped in this model")


@dataclass
class Evidence:
    domain: str
    trace: TraceResult
    transcripts: list[list[tuple[int, str, Packet, str]]]
    statefulness: Statefulness | None = None
    nonstandard_port_triggered: bool | None = None
    server_receipt_datagrams: int | None = None  # data-bearing packets a controlled target logged


def _injections(transcript) -> list[Packet]:
    hits = []
    for tick, direction, pkt, note in transcript:
        if direction != "in" or note == "filtered":
            continue
        seg = pkt.tcp
        if seg is None:
            continue
        if (seg.data and "FIN" in seg.flags) or "RST" in seg.flags:
            hits.append(pkt)
    return hits


def _genuine_seen(transcript) -> bool:
    for tick, direction, pkt, note in transcript:
        if direction != "in" or note == "filtered":
            continue
        seg = pkt.tcp
        if seg is not None and seg.data and "FIN" not in seg.flags:
            return True
    return False


def collect_evidence(
    client: ClientHandle,
    dst: Ipv4Addr,
    domain: str,
    trials: int = 12,
    probe_ports: tuple[int, ...] = (8080,),
    registry: FingerprintRegistry = DEFAULT_REGISTRY,
    full: bool = True,
) -> Evidence:
    """Assemble the observations classify_middlebox needs, on fresh flows."""
    trace = http_trace(client, domain, dst, registry=registry)
    receipts_before = None
    server_cfg = client.sim.topology.servers.get(dst)
    if server_cfg is not None and server_cfg.controlled:
        receipts_before = len(client.sim.server_receipts(dst))
    transcripts = []
    for _ in range(trials):
        flow = client.open_flow(dst)
        flow.send_request(make_get(domain))
        transcripts.append(flow.transcript())
    receipt_datagrams = None
    if receipts_before is not None:
        receipts = client.sim.server_receipts(dst)[receipts_before:]
        receipt_datagrams = sum(
            1 for ev in receipts if ev.packet is not None and ev.packet.tcp is not None and ev.packet.tcp.data
        )
    statefulness = None
    port_triggered = None
    if full:
        statefulness = statefulness_probe(client, domain, dst)
        for port in probe_ports:
            try:
                flow = client.open_flow(dst, port=port)
            except TransportError:
                continue
            flow.send_request(make_get(domain))
            port_triggered = bool(flow.censor_hits())
            break
    return Evidence(domain, trace, transcripts, statefulness, port_triggered, receipt_datagrams)


def classify_middlebox(evidence: Evidence, registry: FingerprintRegistry = DEFAULT_REGISTRY) -> MiddleboxClass:
    """Decision tree over the assembled evidence.

    A genuine response showing up after the injection marks a wiretap; silence
    toward the server plus missing ICMP beyond the hop marks an interceptor.
    """
    injections = [pkt for tr in evidence.transcripts for pkt in _injections(tr)]
    if not injections and not evidence.trace.censor_ttls():
        raise UnclassifiedEvidenceError("no censor evidence in transcripts or trace", evidence.transcripts)
    genuine = any(_genuine_seen(tr) for tr in evidence.transcripts)
    if genuine and evidence.server_receipt_datagrams == 0:
        raise UnclassifiedEvidenceError(
            "contradictory evidence: genuine responses arrived but the controlled target logged no request data",
            evidence.transcripts,
        )
    kind = MbKind.WM if genuine else MbKind.IM
    bodies = [pkt.tcp.data for pkt in injections if pkt.tcp is not None and pkt.tcp.data]
    visibility = Visibility.OVERT if bodies else Visibility.COVERT
    if visibility is Visibility.COVERT and kind is MbKind.WM:
        raise UnclassifiedEvidenceError(
            "contradictory evidence: bare-RST censorship alongside delivered genuine content",
            evidence.transcripts,
        )
    fingerprint = ""
    for body in bodies:
        fp = registry.match(body)
        if fp is not None:
            fingerprint = fp.name
            break
    fixed_ip_id = None
    ids = [pkt.ip_id for pkt in injections]
    if len(ids) >= 10 and len(set(ids)) == 1:
        fixed_ip_id = ids[0]
    port_scope = PortScope.ALL_PORTS if evidence.nonstandard_port_triggered else PortScope.PORT_80_ONLY
    stateful = evidence.statefulness is not Statefulness.STATELESS
    return MiddleboxClass(kind, visibility, stateful, port_scope, fingerprint, fixed_ip_id)


# ---------------------------------------------------------------------------
# per-domain scan pipeline


def scan_http_domain(
    client: ClientHandle,
    domain: str,
    threshold: float = 0.3,
    registry: FingerprintRegistry = DEFAULT_REGISTRY,
):
    """Fetch direct and clean, classify; transport failures route to the TCP probe."""
    clean_result = client.clean().fetch(domain)
    if clean_result.first is None:
        raise SiteDownError(f"{domain} unserved from the clean vantage")
    try:
        direct_result = client.fetch(domain)
    except TransportError:
        return detect_transport_filtering(client, domain)
    if direct_result.first is None:
        return detect_transport_filtering(client, domain)
    return classify_http(domain, direct_result.first, clean_result.first, threshold, registry)
