"""Client-side driver: what a measurement script can actually do.

A :class:`ClientHandle` wraps one client endpoint of a simulator and exposes
the operations the detectors build on: DNS resolution, traceroute, TCP flows
(managed handshakes or fully scripted packets), HTTP fetches and local
firewall rules.  ``handle.clean()`` returns the same client probing over the
clean vantage, the stand-in for an unfiltered external circuit.

Detectors only look at what a real client could observe: delivered packets,
ICMP, and their own firewall counters.  Ground-truth provenance tags on
events exist for oracle tests, not for detection logic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..wire import (
    Canonical,
    DnsKind,
    DnsMessage,
    HttpResponse,
    IcmpKind,
    IcmpMessage,
    Ipv4Addr,
    Packet,
    RawHttpRequest,
    StrategyVariant,
    TcpSegment,
    make_get,
    parse_responses,
    serialize_http,
    split_request,
)
from .sim import ClientFlow, Event, EventKind, Simulator, TransportError, UnroutableError, Vantage
from .topology import ANONYMIZED


class UnsupportedSchemeError(RuntimeError):
    """Raised for non-HTTP fetches; TLS interception is out of scope here."""


def first_addr(answers) -> Ipv4Addr:
    return sorted(answers, key=int)[0]


class FlowHandle:
    """One TCP flow owned by a client; records a clock-ordered transcript."""

    def __init__(self, client: "ClientHandle", dst: Ipv4Addr, dport: int = 80):
        self._client = client
        self.dst = dst
        self.dport = dport
        self._closed_by_us = False
        runtime = client.sim.client_runtime(client.name)
        self.sport = runtime.alloc_sport()
        isn = client.sim.rng.randrange(0, 0x100000000)
        self._flow = ClientFlow(self.sport, dst, dport, isn)
        runtime.flows[self.sport] = self._flow

    # -- raw primitives -----------------------------------------------------

    def emit(self, flag_names, data: bytes = b"", ttl: int = 64, seq: int | None = None, ack: int | None = None, ip_id: int | None = None) -> list[Event]:
        seg = TcpSegment(
            self.sport,
            self.dport,
            self._flow.snd_next if seq is None else seq,
            (self._flow.rcv_next or 0) if ack is None else ack,
            frozenset(flag_names),
            data,
        )
        if ip_id is None:
            ip_id = self._client.sim.rng.randrange(0, 0x10000)
        pkt = Packet(self._client.addr, self.dst, ttl, ip_id, seg)
        self._flow.on_send(seg, explicit_seq=seq is not None)
        self._flow.transcript.append((self._client.sim.clock, "out", pkt, "sent"))
        return self._client.sim.send(self._client.name, pkt, self._client.vantage)

    # -- managed operations ---------------------------------------------------

    def handshake(self, ttl: int = 64) -> None:
        self.emit({"SYN"}, ttl=ttl)
        if self._flow.state != "synack":
            raise TransportError(f"no SYN+ACK from {self.dst}:{self.dport}")
        self.emit({"ACK"}, ttl=ttl)
        self._flow.state = "open"

    def send_request(self, request: RawHttpRequest | bytes, ttl: int = 64, split_offsets: tuple[int, ...] | None = None) -> list[Event]:
        data = serialize_http(request) if isinstance(request, RawHttpRequest) else request
        if split_offsets:
            events: list[Event] = []
            for part in split_request(data, tuple(split_offsets)):
                events.extend(self.emit({"PSH", "ACK"}, data=part, ttl=ttl))
            return events
        return self.emit({"PSH", "ACK"}, data=data, ttl=ttl)

    def close(self) -> None:
        """Orderly FIN; falls back to a RST when the teardown gets no answer."""
        if self._closed_by_us:
            return
        self._closed_by_us = True
        before = len(self._flow.transcript)
        self.emit({"FIN", "ACK"})
        answered = any(
            note in ("fin", "ack") and direction == "in"
            for _, direction, _, note in self._flow.transcript[before:]
        )
        if not answered:
            self.emit({"RST"})
        self._flow.state = "closed"

    # -- observations ---------------------------------------------------------

    @property
    def is_open(self) -> bool:
        return self._flow.state not in ("closed",)

    @property
    def state(self) -> str:
        return self._flow.state

    def delivered(self) -> bytes:
        return bytes(self._flow.buffer)

    def responses(self) -> list[HttpResponse]:
        return parse_responses(self.delivered())

    def transcript(self) -> list[tuple[int, str, Packet, str]]:
        return list(self._flow.transcript)

    def inbound(self) -> list[tuple[int, Packet, str]]:
        return [(t, p, note) for t, d, p, note in self._flow.transcript if d == "in"]

    def censor_hits(self) -> list[Packet]:
        """Inbound packets bearing the injection signature.

        A notification is data with FIN set in the same segment; covert
        censorship is a bare RST.  Genuine servers send plain data and a
        separate dataless FIN+ACK, so neither shape occurs on clean paths.
        """
        hits = []
        for _, pkt, note in self.inbound():
            if note == "filtered":
                continue
            seg = pkt.tcp
            if seg is None:
                continue
            if seg.data and "FIN" in seg.flags:
                hits.append(pkt)
            elif "RST" in seg.flags:
                hits.append(pkt)
        return hits

    def genuine_data_seen(self) -> bool:
        """Whether any plain data segment (no FIN) arrived, accepted or stale."""
        for _, pkt, note in self.inbound():
            seg = pkt.tcp
            if seg is not None and seg.data and "FIN" not in seg.flags and note != "filtered":
                return True
        return False


@dataclass
class FetchResult:
    domain: str
    dst: Ipv4Addr
    responses: list[HttpResponse]
    delivered: bytes
    censor_packets: list[Packet]
    flow: FlowHandle
    events: list[Event] = field(default_factory=list)

    @property
    def body(self) -> bytes | None:
        return self.responses[0].body if self.responses else None

    @property
    def first(self) -> HttpResponse | None:
        return self.responses[0] if self.responses else None


class ClientHandle:
    def __init__(self, sim: Simulator, name: str, vantage: Vantage = Vantage.DIRECT):
        self.sim = sim
        self.name = name
        self.vantage = vantage
        self._cfg = sim.topology.clients[name]

    def clean(self) -> "ClientHandle":
        return ClientHandle(self.sim, self.name, Vantage.CLEAN)

    @property
    def addr(self) -> Ipv4Addr:
        return self._cfg.addr

    @property
    def as_prefixes(self):
        return self._cfg.as_prefixes

    # -- DNS ------------------------------------------------------------------

    def resolve_clean(self, domain: str) -> frozenset[Ipv4Addr]:
        return self.sim.topology.authority.get(domain.lower(), frozenset())

    def dns_probe(self, domain: str, resolver: Ipv4Addr, ttl: int = 64) -> tuple[int, list[Event]]:
        runtime = self.sim.client_runtime(self.name)
        txid = runtime.alloc_txid()
        pkt = Packet(
            self.addr,
            resolver,
            ttl,
            self.sim.rng.randrange(0, 0x10000),
            DnsMessage(DnsKind.QUERY, txid, domain),
        )
        return txid, self.sim.send(self.name, pkt, self.vantage)

    def resolve(self, domain: str, resolver: Ipv4Addr | None = None, ttl: int = 64) -> frozenset[Ipv4Addr] | None:
        """Resolve via the given resolver; None means the query timed out."""
        if self.vantage is Vantage.CLEAN or resolver is None:
            return self.resolve_clean(domain)
        txid, events = self.dns_probe(domain, resolver, ttl)
        for ev in events:
            pkt = ev.packet
            if (
                ev.kind in (EventKind.DELIVERY,)
                and pkt is not None
                and isinstance(pkt.payload, DnsMessage)
                and pkt.payload.kind is DnsKind.RESPONSE
                and pkt.payload.txid == txid
            ):
                return frozenset(pkt.payload.answers)
        return None

    # -- path probing ----------------------------------------------------------

    def ping(self, dst: Ipv4Addr, ttl: int = 64, probe_id: int = 0) -> list[Event]:
        pkt = Packet(
            self.addr,
            dst,
            ttl,
            self.sim.rng.randrange(0, 0x10000),
            IcmpMessage(IcmpKind.ECHO_REQUEST, probe_id=probe_id),
        )
        return self.sim.send(self.name, pkt, self.vantage)

    def traceroute(self, dst: Ipv4Addr, max_ttl: int = 64) -> list:
        """Hop list in path order; anonymized routers report as ANONYMIZED."""
        if dst == self.addr:
            return []
        if self.sim.topology.path(self.addr, dst) is None:
            raise UnroutableError(f"no route to {dst}")
        hops: list = []
        for ttl in range(1, max_ttl + 1):
            seen = None
            for ev in self.ping(dst, ttl=ttl, probe_id=ttl):
                pkt = ev.packet
                if ev.kind is EventKind.ICMP and pkt is not None and isinstance(pkt.payload, IcmpMessage):
                    if pkt.payload.kind is IcmpKind.TIME_EXCEEDED:
                        seen = pkt.payload.origin
                        break
                    if pkt.payload.kind is IcmpKind.ECHO_REPLY:
                        seen = "reply"
                        break
            if seen == "reply":
                hops.append(dst)
                return hops
            hops.append(seen if seen is not None else ANONYMIZED)
        return hops

    def hop_count(self, dst: Ipv4Addr) -> int:
        return len(self.traceroute(dst))

    # -- TCP/HTTP ----------------------------------------------------------------

    def script_flow(self, dst: Ipv4Addr, port: int = 80) -> FlowHandle:
        return FlowHandle(self, dst, port)

    def open_flow(self, dst: Ipv4Addr, port: int = 80, ttl: int = 64) -> FlowHandle:
        flow = self.script_flow(dst, port)
        flow.handshake(ttl)
        return flow

    def fetch(
        self,
        domain: str,
        dst: Ipv4Addr | None = None,
        variant: StrategyVariant = Canonical(),
        port: int = 80,
        scheme: str = "http",
        ttl: int = 64,
        split_offsets: tuple[int, ...] | None = None,
    ) -> FetchResult:
        if scheme != "http":
            raise UnsupportedSchemeError(f"{scheme} fetches are not supported; only plain HTTP is modeled")
        if dst is None:
            answers = self.resolve_clean(domain)
            if not answers:
                raise UnroutableError(f"no known address for {domain}")
            dst = first_addr(answers)
        flow = self.open_flow(dst, port, ttl)
        events = flow.send_request(make_get(domain, variant), ttl=ttl, split_offsets=split_offsets)
        return FetchResult(
            domain=domain,
            dst=dst,
            responses=flow.responses(),
            delivered=flow.delivered(),
            censor_packets=flow.censor_hits(),
            flow=flow,
            events=events,
        )

    # -- local firewall ------------------------------------------------------------

    def set_filter(self, rules) -> None:
        self.sim.set_client_filter(self.name, rules)

    def clear_filter(self) -> None:
        self.sim.set_client_filter(self.name, [])
