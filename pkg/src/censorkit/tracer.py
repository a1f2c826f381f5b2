"""Iterative network tracing: walk a crafted probe up the path one TTL at a time.

For each TTL the tracer sends a protocol-specific probe and classifies what
came back: an ICMP Time Exceeded pins a router, a censorship notification or
suspicious RST pins the censor, a genuine answer pins the destination, and
silence is a timeout (or an anonymized hop).  Correlating the first TTL that
draws a censor response against the traceroute hop list localizes the
middlebox; for DNS, a manipulated answer arriving before the final hop can
only be an on-path injector, while one arriving exactly at the resolver means
the resolver itself is poisoned.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from .fingerprints import DEFAULT_REGISTRY, FingerprintRegistry
from .netsim.client import ClientHandle
from .netsim.sim import EventKind
from .netsim.topology import ANONYMIZED
from .wire import DnsKind, DnsMessage, IcmpKind, IcmpMessage, Ipv4Addr, RawHttpRequest


# ---------------------------------------------------------------------------
# probe specification


@dataclass(frozen=True)
class HttpGetProbe:
    request: RawHttpRequest
    requires_handshake: bool = True


@dataclass(frozen=True)
class DnsQueryProbe:
    qname: str
    resolver: Ipv4Addr
    reference_answers: frozenset[Ipv4Addr] = frozenset()


@dataclass(frozen=True)
class ProbeSpec:
    kind: HttpGetProbe | DnsQueryProbe
    dst: Ipv4Addr
    ttl_range: tuple[int, int] = (1, 30)

    def __post_init__(self) -> None:
        lo, hi = self.ttl_range
        if not (1 <= lo <= hi <= 64):
            raise ValueError(f"ttl_range must sit within 1..64: {self.ttl_range}")


# ---------------------------------------------------------------------------
# per-TTL observations


@dataclass(frozen=True)
class IcmpFrom:
    addr: Ipv4Addr


@dataclass(frozen=True)
class CensorResponse:
    fingerprint: str | None
    flags: frozenset[str]
    ip_id: int


@dataclass(frozen=True)
class ServerResponse:
    status: int | None = None


@dataclass(frozen=True)
class ManipulatedDnsAnswer:
    addr: Ipv4Addr


@dataclass(frozen=True)
class HonestDnsAnswer:
    addrs: frozenset[Ipv4Addr]


@dataclass(frozen=True)
class ProbeTimeout:
    pass


TIMEOUT = ProbeTimeout()

Observation = IcmpFrom | CensorResponse | ServerResponse | ManipulatedDnsAnswer | HonestDnsAnswer | ProbeTimeout

_TERMINAL = (ServerResponse, HonestDnsAnswer, ManipulatedDnsAnswer)


@dataclass
class TraceResult:
    dst: Ipv4Addr
    records: dict[int, Observation] = field(default_factory=dict)
    hops: list = field(default_factory=list)

    @property
    def path_len(self) -> int:
        return len(self.hops)

    def censor_ttls(self) -> list[int]:
        return sorted(t for t, o in self.records.items() if isinstance(o, CensorResponse))

    def to_jsonl(self) -> str:
        rows = []
        for ttl in sorted(self.records):
            rows.append(json.dumps({"ttl": ttl, **_obs_json(self.records[ttl])}, sort_keys=True))
        return "\n".join(rows)


def _obs_json(obs: Observation) -> dict:
    if isinstance(obs, IcmpFrom):
        return {"kind": "icmp_from", "addr": str(obs.addr)}
    if isinstance(obs, CensorResponse):
        return {"kind": "censor_response", "fingerprint": obs.fingerprint, "flags": sorted(obs.flags), "ip_id": obs.ip_id}
    if isinstance(obs, ServerResponse):
        return {"kind": "server_response", "status": obs.status}
    if isinstance(obs, ManipulatedDnsAnswer):
        return {"kind": "manipulated_dns_answer", "addr": str(obs.addr)}
    if isinstance(obs, HonestDnsAnswer):
        return {"kind": "honest_dns_answer", "addrs": sorted(str(a) for a in obs.addrs)}
    return {"kind": "timeout"}


def render_trace(trace: TraceResult) -> str:
    lines = [f"trace to {trace.dst} ({trace.path_len} hops)"]
    for ttl in sorted(trace.records):
        obs = trace.records[ttl]
        lines.append(f"  ttl {ttl:>2}  {_obs_json(obs)}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# the tracer


def _classify_http_burst(flow, events, registry: FingerprintRegistry) -> Observation:
    hits = flow.censor_hits()
    if hits:
        pkt = hits[0]
        seg = pkt.tcp
        fp = registry.match(seg.data) if seg.data else None
        return CensorResponse(fp.name if fp else None, seg.flags, pkt.ip_id)
    if flow.genuine_data_seen():
        responses = flow.responses()
        return ServerResponse(responses[0].status if responses else None)
    for ev in events:
        if ev.kind is EventKind.ICMP and ev.packet is not None:
            payload = ev.packet.payload
            if isinstance(payload, IcmpMessage) and payload.kind is IcmpKind.TIME_EXCEEDED:
                return IcmpFrom(payload.origin)
    return TIMEOUT


def _classify_dns_burst(events, txid: int, reference: frozenset) -> Observation:
    icmp = None
    for ev in events:
        pkt = ev.packet
        if pkt is None:
            continue
        payload = pkt.payload
        if (
            ev.kind is EventKind.DELIVERY
            and isinstance(payload, DnsMessage)
            and payload.kind is DnsKind.RESPONSE
            and payload.txid == txid
        ):
            answers = frozenset(payload.answers)
            if reference and answers and not (answers & reference):
                return ManipulatedDnsAnswer(sorted(answers, key=int)[0])
            return HonestDnsAnswer(answers)
        if ev.kind is EventKind.ICMP and isinstance(payload, IcmpMessage) and payload.kind is IcmpKind.TIME_EXCEEDED:
            icmp = IcmpFrom(payload.origin)
    return icmp if icmp is not None else TIMEOUT


def _probe_once(client: ClientHandle, spec: ProbeSpec, ttl: int, registry: FingerprintRegistry) -> Observation:
    kind = spec.kind
    if isinstance(kind, DnsQueryProbe):
        txid, events = client.dns_probe(kind.qname, kind.resolver, ttl=ttl)
        return _classify_dns_burst(events, txid, kind.reference_answers)
    if kind.requires_handshake:
        flow = client.open_flow(spec.dst)  # fresh handshake per burst, full TTL
    else:
        flow = client.script_flow(spec.dst)
    events = flow.send_request(kind.request, ttl=ttl)
    return _classify_http_burst(flow, events, registry)


def iterative_trace(
    client: ClientHandle,
    spec: ProbeSpec,
    exhaustive: bool = False,
    retries: int = 3,
    registry: FingerprintRegistry = DEFAULT_REGISTRY,
) -> TraceResult:
    """Probe every TTL in range and classify each answer.

    Stops at the first genuine answer unless ``exhaustive``; interceptive
    middleboxes are only distinguishable by what happens beyond their hop, so
    exhaustive mode exists for them.  A handshake failure raises
    ``TransportError`` rather than recording a timeout.
    """
    trace = TraceResult(dst=spec.dst)
    if isinstance(spec.kind, DnsQueryProbe):
        trace.hops = client.traceroute(spec.kind.resolver)
    else:
        trace.hops = client.traceroute(spec.dst)
    lo, hi = spec.ttl_range
    for ttl in range(lo, hi + 1):
        obs: Observation = TIMEOUT
        for _ in range(retries):
            obs = _probe_once(client, spec, ttl, registry)
            if not isinstance(obs, ProbeTimeout):
                break
        trace.records[ttl] = obs
        if not exhaustive and isinstance(obs, _TERMINAL):
            break
    return trace


def http_trace(
    client: ClientHandle,
    domain: str,
    dst: Ipv4Addr,
    path_len: int | None = None,
    exhaustive: bool = True,
    registry: FingerprintRegistry = DEFAULT_REGISTRY,
) -> TraceResult:
    """Convenience wrapper: canonical GET probe over TTLs 1..path length."""
    from .wire import make_get

    if path_len is None:
        path_len = len(client.traceroute(dst))
    spec = ProbeSpec(HttpGetProbe(make_get(domain)), dst, (1, max(path_len, 1)))
    return iterative_trace(client, spec, exhaustive=exhaustive, registry=registry)


# ---------------------------------------------------------------------------
# trace interpretation


@dataclass(frozen=True)
class Located:
    hop: int
    addr: Ipv4Addr | object  # ANONYMIZED when the hop is hidden


def locate_middlebox(trace: TraceResult) -> Located | None:
    """Smallest TTL with a censor response, tied to the traceroute hop there.

    Returns None when the trace holds no censor records.
    """
    if not trace.records:
        raise ValueError("empty trace")
    ttls = trace.censor_ttls()
    if not ttls:
        return None
    hop = ttls[0]
    addr = trace.hops[hop - 1] if hop <= len(trace.hops) else ANONYMIZED
    return Located(hop, addr)


class DnsMechanism(Enum):
    POISONING = "poisoning"
    INJECTION = "injection"


def classify_dns_mechanism(trace: TraceResult, path_len: int) -> DnsMechanism:
    """Manipulated answers from before the final hop betray an injector."""
    manipulated = [t for t, o in trace.records.items() if isinstance(o, ManipulatedDnsAnswer)]
    if not manipulated:
        raise ValueError("trace holds no manipulated answers; screen before classifying")
    if any(t < path_len for t in manipulated):
        return DnsMechanism.INJECTION
    return DnsMechanism.POISONING
