"""Deterministic discrete-event simulator of a censoring network.

Time is logical ticks; every router hop costs one tick.  A packet sent at
tick T reaches hop h at T+h, so a destination n hops out answers at T+2n.
All randomness comes from one seeded generator and event ordering is a heap
keyed by (tick, insertion), which makes a run a pure function of
(topology config, seed, script): identical inputs give byte-identical event
traces.

Middleboxes inspect packets when they arrive at the attach router, before
TTL expiry handling, so a probe whose TTL dies exactly at the attach hop is
still seen -- that is what lets TTL-walking localize the attach hop exactly.
Wiretap injections race the genuine response: the sampled injection delay
either undercuts the server round trip or lands just after it, with the
configured win probability.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, replace
from enum import Enum

from ..wire import (
    DnsKind,
    DnsMessage,
    IcmpKind,
    IcmpMessage,
    Ipv4Addr,
    Packet,
    TcpSegment,
    build_response,
    parse_http_server,
)
from .middlebox import Inspect, MbKind, MiddleboxConfig, MiddleboxRuntime
from .topology import ConfigError, Topology

_M32 = 0xFFFFFFFF


class Vantage(Enum):
    DIRECT = "direct"
    CLEAN = "clean"  # a probing path free of the censors under study


class EventKind(Enum):
    SENT = "sent"
    DELIVERY = "delivery"
    ICMP = "icmp"
    FILTERED = "filtered"  # dropped by the client's own firewall rules
    INJECTED = "injected"
    SERVER_RX = "server_rx"
    EXPIRED = "expired"
    DROPPED = "dropped"


@dataclass(frozen=True)
class Event:
    tick: int
    kind: EventKind
    at: Ipv4Addr | None
    packet: Packet | None
    origin: str = ""
    note: str = ""


@dataclass(frozen=True)
class DropRule:
    """Client-side firewall rule: drop inbound TCP matching any listed flag.

    ``ip_id`` narrows the match to packets bearing that exact IP identifier.
    An empty flag set matches nothing.
    """

    flags: frozenset[str]
    ip_id: int | None = None

    def matches(self, packet: Packet) -> bool:
        seg = packet.tcp
        if seg is None or not self.flags or not (seg.flags & self.flags):
            return False
        return self.ip_id is None or self.ip_id == packet.ip_id


class TransportError(RuntimeError):
    """Handshake or connection-level failure, distinct from a probe timeout."""


class UnroutableError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# per-endpoint runtime state


class ClientFlow:
    def __init__(self, sport: int, peer: Ipv4Addr, dport: int, isn: int):
        self.sport = sport
        self.peer = peer
        self.dport = dport
        self.isn = isn
        self.snd_next = isn
        self.state = "new"  # new / syn_sent / synack / open / closed
        self.rcv_next: int | None = None
        self.buffer = bytearray()
        self.transcript: list[tuple[int, str, Packet, str]] = []

    def on_send(self, seg: TcpSegment, explicit_seq: bool) -> None:
        if "SYN" in seg.flags and "ACK" not in seg.flags and self.state == "new":
            self.state = "syn_sent"
        if not explicit_seq:
            adv = len(seg.data)
            if "SYN" in seg.flags or "FIN" in seg.flags:
                adv += 1
            self.snd_next = (self.snd_next + adv) & _M32

    def on_segment(self, seg: TcpSegment) -> str:
        if seg.has("SYN", "ACK"):
            if self.state == "syn_sent":
                self.rcv_next = (seg.seq + 1) & _M32
                self.state = "synack"
                return "synack"
            return "stale"
        if "RST" in seg.flags:
            if self.rcv_next is not None and seg.seq == self.rcv_next and self.state != "closed":
                self.state = "closed"
                return "rst"
            return "stale"
        if seg.data:
            if self.state in ("synack", "open") and self.rcv_next == seg.seq:
                self.buffer.extend(seg.data)
                self.rcv_next = (self.rcv_next + len(seg.data)) & _M32
                if "FIN" in seg.flags:
                    self.rcv_next = (self.rcv_next + 1) & _M32
                    self.state = "closed"
                    return "accepted+fin"
                return "accepted"
            return "stale"
        if "FIN" in seg.flags:
            if self.state in ("synack", "open") and self.rcv_next == seg.seq:
                self.rcv_next = (self.rcv_next + 1) & _M32
                self.state = "closed"
                return "fin"
            return "stale"
        return "ack"


class ClientRuntime:
    def __init__(self, cfg):
        self.cfg = cfg
        self.filters: list[DropRule] = []
        self.flows: dict[int, ClientFlow] = {}
        self.next_sport = 40000
        self.next_txid = 1

    def alloc_sport(self) -> int:
        sport = self.next_sport
        self.next_sport += 1
        return sport

    def alloc_txid(self) -> int:
        txid = self.next_txid
        self.next_txid = (self.next_txid + 1) & 0xFFFF or 1
        return txid


class _ServerFlow:
    def __init__(self, client: Ipv4Addr, sport: int, dport: int, isn: int, peer_seq: int):
        self.client = client
        self.sport = sport
        self.dport = dport
        self.isn = isn
        self.snd_next = (isn + 1) & _M32
        self.rcv_next = (peer_seq + 1) & _M32
        self.state = "syn_rcvd"
        self.buffer = bytearray()


class ServerRuntime:
    def __init__(self, cfg):
        self.cfg = cfg
        self.flows: dict[tuple, _SererFlowType] = {}
        self.receipts: list[Event] = []


_SererFlowType = _ServerFlow  # keep annotations light


@dataclass
class _Walk:
    packet: Packet
    src: Ipv4Addr
    path: tuple[Ipv4Addr, ...]
    idx: int
    clean: bool
    origin: str
    client: str  # name of the client whose script caused this cascade


class Simulator:
    """Single-owner simulation instance; use one per experiment thread."""

    def __init__(self, topology: Topology, middleboxes=(), seed: int = 0, record_trace: bool = False):
        self.topology = topology
        self.seed = seed
        self.rng = random.Random(seed)
        self.clock = 0
        self._heap: list = []
        self._seq = 0
        self.record_trace = record_trace  # keep a global event log for JSONL export
        self.trace_log: list[Event] = []
        self.clients = {name: ClientRuntime(cfg) for name, cfg in topology.clients.items()}
        self.servers = {addr: ServerRuntime(cfg) for addr, cfg in topology.servers.items()}
        self.middleboxes: dict[Ipv4Addr, list[MiddleboxRuntime]] = {}
        self._mb_names: set[str] = set()
        for mb in middleboxes:
            self.attach_middlebox(mb)
        self._filters_at: dict[Ipv4Addr, list] = {}
        for df in topology.drop_filters:
            self._filters_at.setdefault(df.attach, []).append(df)
        self._addr_to_client = {cfg.addr: name for name, cfg in topology.clients.items()}

    # -- configuration ------------------------------------------------------

    def attach_middlebox(self, config: MiddleboxConfig) -> None:
        if not self.topology.is_router(config.attach):
            raise ConfigError("middlebox attach point is not a router", [config.attach])
        if config.name in self._mb_names:
            raise ConfigError("duplicate middlebox name", [config.name])
        self._mb_names.add(config.name)
        self.middleboxes.setdefault(config.attach, []).append(MiddleboxRuntime(config))

    def set_client_filter(self, client: str, rules) -> None:
        self.clients[client].filters = list(rules)

    def advance(self, ticks: int) -> None:
        self.clock += ticks

    # -- core ---------------------------------------------------------------

    def send(self, client: str, packet: Packet, vantage: Vantage = Vantage.DIRECT) -> list[Event]:
        """Inject one packet from a client and run the cascade to quiescence."""
        cfg = self.topology.clients[client].addr
        events: list[Event] = []
        self._record(events, Event(self.clock, EventKind.SENT, cfg, packet, origin=f"client:{client}"))
        if packet.ttl <= 0:
            self._record(events, Event(self.clock, EventKind.DROPPED, cfg, packet, note="ttl_zero"))
            return events
        path = self.topology.path(cfg, packet.dst)
        if path is None:
            self._record(events, Event(self.clock, EventKind.DROPPED, cfg, packet, note="unroutable"))
            return events
        walk = _Walk(packet, cfg, path, 0, vantage is Vantage.CLEAN, f"client:{client}", client)
        self._enqueue(self.clock + 1, walk)
        self._drain(events)
        return events

    def _enqueue(self, tick: int, walk: _Walk) -> None:
        self._seq += 1
        import heapq

        heapq.heappush(self._heap, (tick, self._seq, walk))

    def _drain(self, events: list[Event]) -> None:
        import heapq

        while self._heap:
            tick, _, walk = heapq.heappop(self._heap)
            if tick > self.clock:
                self.clock = tick
            self._arrive(tick, walk, events)

    def _record(self, events: list[Event], ev: Event) -> None:
        events.append(ev)
        if self.record_trace:
            self.trace_log.append(ev)

    # -- hop processing -----------------------------------------------------

    def _arrive(self, tick: int, walk: _Walk, events: list[Event]) -> None:
        node = walk.path[walk.idx]
        if self.topology.is_router(node):
            self._router_hop(tick, walk, node, events)
        elif node in self.servers:
            self._server_rx(tick, walk, node, events)
        elif node in self.topology.resolvers:
            self._resolver_rx(tick, walk, node, events)
        elif node in self._addr_to_client:
            self._client_rx(tick, walk, node, events)

    def _router_hop(self, tick: int, walk: _Walk, node: Ipv4Addr, events: list[Event]) -> None:
        pkt = walk.packet
        router = self.topology.routers[node]
        if not walk.clean:
            for df in self._filters_at.get(node, ()):
                if any(pkt.dst in p for p in df.dst_prefixes):
                    self._record(events, Event(tick, EventKind.DROPPED, node, pkt, origin=walk.origin, note="acl"))
                    return
            for mb in self.middleboxes.get(node, ()):
                decision = mb.process(pkt, tick, self.rng)
                if decision.injections:
                    self._emit_injections(tick, walk, node, mb, decision, events)
                if decision.consume:
                    self._record(
                        events,
                        Event(tick, EventKind.DROPPED, node, pkt, origin=f"middlebox:{mb.config.name}", note="intercepted"),
                    )
                    return
        ttl = pkt.ttl - 1
        if ttl <= 0:
            if router.anonymized:
                self._record(events, Event(tick, EventKind.EXPIRED, node, pkt, origin=walk.origin, note="anonymized"))
                return
            self._record(events, Event(tick, EventKind.EXPIRED, node, pkt, origin=walk.origin, note="icmp"))
            icmp = Packet(
                node,
                walk.src,
                64,
                self.rng.randrange(0, 0x10000),
                IcmpMessage(IcmpKind.TIME_EXCEEDED, origin=node, probe_id=_probe_id(pkt)),
            )
            back = tuple(reversed(walk.path[: walk.idx])) + (walk.src,)
            self._enqueue(tick + 1, _Walk(icmp, node, back, 0, walk.clean, f"router:{node}", walk.client))
            return
        walk.packet = replace(pkt, ttl=ttl)
        walk.idx += 1
        self._enqueue(tick + 1, walk)

    def _emit_injections(self, tick, walk: _Walk, node, mb: MiddleboxRuntime, decision, events) -> None:
        n = len(walk.path)
        h = walk.idx + 1
        routers_remaining = n - 1 - walk.idx
        reaches_dst = walk.packet.ttl > routers_remaining
        race_base: int | None = None
        origin = f"middlebox:{mb.config.name}"
        for inj in decision.injections:
            if inj.packet.dst == walk.src:
                sub = tuple(reversed(walk.path[: walk.idx])) + (walk.src,)
            else:
                sub = walk.path[walk.idx + 1 :]
                if not sub or sub[-1] != inj.packet.dst:
                    continue  # nowhere to route the forgery
            base = 0
            if inj.race:
                if race_base is None:
                    if reaches_dst:
                        won = self.rng.random() < mb.config.injection_win_probability
                        # lose the race by landing just after the genuine reply
                        race_base = 1 if won else 2 * (n - h) + 1
                    else:
                        race_base = 1
                base = race_base
            base += inj.extra_delay
            self._record(events, Event(tick, EventKind.INJECTED, node, inj.packet, origin=origin))
            self._enqueue(tick + base + 1, _Walk(inj.packet, node, sub, 0, walk.clean, origin, walk.client))

    # -- endpoints ----------------------------------------------------------

    def _reply_path(self, walk: _Walk) -> tuple[tuple[Ipv4Addr, ...], Ipv4Addr]:
        here = walk.path[walk.idx]
        back = tuple(reversed(walk.path[: walk.idx])) + (walk.src,)
        return back, here

    def _server_rx(self, tick: int, walk: _Walk, node: Ipv4Addr, events: list[Event]) -> None:
        runtime = self.servers[node]
        ev = Event(tick, EventKind.SERVER_RX, node, walk.packet, origin=walk.origin)
        self._record(events, ev)
        runtime.receipts.append(ev)
        if runtime.cfg.down:
            return
        pkt = walk.packet
        back, here = self._reply_path(walk)

        def reply(payload, offset: int = 0) -> None:
            out = Packet(node, pkt.src, 64, self.rng.randrange(0, 0x10000), payload)
            self._enqueue(tick + 1 + offset, _Walk(out, node, back, 0, walk.clean, f"server:{node}", walk.client))

        if isinstance(pkt.payload, IcmpMessage):
            if pkt.payload.kind is IcmpKind.ECHO_REQUEST:
                reply(IcmpMessage(IcmpKind.ECHO_REPLY, origin=node, probe_id=pkt.payload.probe_id))
            return
        seg = pkt.tcp
        if seg is None or seg.dport not in runtime.cfg.open_ports:
            return
        key = (pkt.src, seg.sport, seg.dport)
        flow = runtime.flows.get(key)
        if seg.has("SYN") and "ACK" not in seg.flags:
            isn = self.rng.randrange(0, 0x100000000)
            runtime.flows[key] = flow = _ServerFlow(pkt.src, seg.sport, seg.dport, isn, seg.seq)
            reply(TcpSegment(seg.dport, seg.sport, isn, flow.rcv_next, frozenset({"SYN", "ACK"})))
            return
        if flow is None:
            return
        if "RST" in seg.flags:
            runtime.flows.pop(key, None)
            return
        if seg.has("ACK") and not seg.data and not seg.has("FIN") and flow.state == "syn_rcvd":
            if seg.ack == flow.snd_next:
                flow.state = "established"
            return
        if seg.data and flow.state == "established" and seg.seq == flow.rcv_next:
            flow.rcv_next = (flow.rcv_next + len(seg.data)) & _M32
            flow.buffer.extend(seg.data)
            self._serve_requests(flow, runtime, reply, walk)
            return
        if seg.has("FIN") and not seg.data and flow.state == "established":
            if seg.seq == flow.rcv_next:
                flow.rcv_next = (flow.rcv_next + 1) & _M32
                reply(TcpSegment(seg.dport, seg.sport, flow.snd_next, flow.rcv_next, frozenset({"FIN", "ACK"})))
                flow.state = "closed"

    def _serve_requests(self, flow: _ServerFlow, runtime: ServerRuntime, reply, walk: _Walk) -> None:
        from ..wire import BLANK

        blocks: list[bytes] = []
        buf = bytes(flow.buffer)
        while True:
            block, sep, rest = buf.partition(BLANK)
            if not sep:
                break
            if block:
                blocks.append(block + BLANK)
            buf = rest
        flow.buffer = bytearray(buf)
        if not blocks:
            return
        vantage_key = "clean" if walk.clean else str(flow.client)
        offset = 0
        for block in blocks:
            for parsed in parse_http_server(block):
                data = self._render_response(runtime, parsed, vantage_key)
                reply(
                    TcpSegment(flow.dport, flow.sport, flow.snd_next, flow.rcv_next, frozenset({"PSH", "ACK"}), data),
                    offset,
                )
                flow.snd_next = (flow.snd_next + len(data)) & _M32
                offset += 1
        # close after responding, HTTP/1.0 style
        reply(TcpSegment(flow.dport, flow.sport, flow.snd_next, flow.rcv_next, frozenset({"FIN", "ACK"})), offset)
        flow.snd_next = (flow.snd_next + 1) & _M32
        flow.state = "closing"

    def _render_response(self, runtime: ServerRuntime, parsed, vantage_key: str) -> bytes:
        if not parsed.well_formed:
            return build_response(400, (("Content-Type", "text/html"),), b"<html><body>Bad Request</body></html>")
        page = runtime.cfg.pages.get(parsed.host or "")
        if page is None:
            return build_response(404, (("Content-Type", "text/html"),), b"<html><body>Not Found</body></html>")
        fields, body = page.render(parsed.host, vantage_key)
        return build_response(200, fields, body)

    def _resolver_rx(self, tick: int, walk: _Walk, node: Ipv4Addr, events: list[Event]) -> None:
        cfg = self.topology.resolvers[node]
        self._record(events, Event(tick, EventKind.SERVER_RX, node, walk.packet, origin=walk.origin))
        pkt = walk.packet
        back, _ = self._reply_path(walk)

        def reply(payload) -> None:
            out = Packet(node, pkt.src, 64, self.rng.randrange(0, 0x10000), payload)
            self._enqueue(tick + 1, _Walk(out, node, back, 0, walk.clean, f"resolver:{node}", walk.client))

        if isinstance(pkt.payload, IcmpMessage):
            if pkt.payload.kind is IcmpKind.ECHO_REQUEST:
                reply(IcmpMessage(IcmpKind.ECHO_REPLY, origin=node, probe_id=pkt.payload.probe_id))
            return
        if not isinstance(pkt.payload, DnsMessage) or pkt.payload.kind is not DnsKind.QUERY:
            return
        qname = pkt.payload.qname
        if not walk.clean and qname in cfg.poisoned_map:
            answers: tuple[Ipv4Addr, ...] = (cfg.poisoned_map[qname],)
        else:
            honest = cfg.honest_map.get(qname) or self.topology.authority.get(qname) or frozenset()
            answers = tuple(sorted(honest, key=int))
        reply(DnsMessage(DnsKind.RESPONSE, pkt.payload.txid, qname, answers))

    def _client_rx(self, tick: int, walk: _Walk, node: Ipv4Addr, events: list[Event]) -> None:
        name = self._addr_to_client[node]
        runtime = self.clients[name]
        pkt = walk.packet
        if isinstance(pkt.payload, IcmpMessage):
            if pkt.payload.kind is IcmpKind.ECHO_REQUEST:
                back, _ = self._reply_path(walk)
                out = Packet(node, pkt.src, 64, self.rng.randrange(0, 0x10000), IcmpMessage(IcmpKind.ECHO_REPLY, origin=node, probe_id=pkt.payload.probe_id))
                self._enqueue(tick + 1, _Walk(out, node, back, 0, walk.clean, f"client:{name}", walk.client))
                return
            self._record(events, Event(tick, EventKind.ICMP, node, pkt, origin=walk.origin))
            return
        seg = pkt.tcp
        if seg is not None:
            for rule in runtime.filters:
                if rule.matches(pkt):
                    self._record(events, Event(tick, EventKind.FILTERED, node, pkt, origin=walk.origin))
                    flow = runtime.flows.get(seg.dport)
                    if flow is not None and flow.peer == pkt.src:
                        flow.transcript.append((tick, "in", pkt, "filtered"))
                    return
            flow = runtime.flows.get(seg.dport)
            if flow is not None and flow.peer == pkt.src and flow.dport == seg.sport:
                note = flow.on_segment(seg)
                flow.transcript.append((tick, "in", pkt, note))
                self._record(events, Event(tick, EventKind.DELIVERY, node, pkt, origin=walk.origin, note=note))
                return
        self._record(events, Event(tick, EventKind.DELIVERY, node, pkt, origin=walk.origin, note="unmatched"))

    # -- introspection --------------------------------------------------------

    def server_receipts(self, addr: Ipv4Addr) -> list[Event]:
        return list(self.servers[addr].receipts)

    def client_runtime(self, name: str) -> ClientRuntime:
        return self.clients[name]


def _probe_id(pkt: Packet) -> int:
    payload = pkt.payload
    if isinstance(payload, TcpSegment):
        return payload.sport
    if isinstance(payload, DnsMessage):
        return payload.txid
    return payload.probe_id


# ---------------------------------------------------------------------------
# trace export


def _payload_json(payload) -> dict:
    if isinstance(payload, TcpSegment):
        return {
            "type": "tcp",
            "sport": payload.sport,
            "dport": payload.dport,
            "seq": payload.seq,
            "ack": payload.ack,
            "flags": sorted(payload.flags),
            "data_hex": payload.data.hex(),
        }
    if isinstance(payload, DnsMessage):
        return {
            "type": "dns",
            "kind": payload.kind.value,
            "txid": payload.txid,
            "qname": payload.qname,
            "answers": [str(a) for a in payload.answers],
        }
    return {
        "type": "icmp",
        "kind": payload.kind.value,
        "origin": str(payload.origin) if payload.origin else None,
        "probe_id": payload.probe_id,
    }


def event_to_json(ev: Event) -> dict:
    return {
        "tick": ev.tick,
        "kind": ev.kind.value,
        "at": str(ev.at) if ev.at is not None else None,
        "origin": ev.origin,
        "note": ev.note,
        "packet": None
        if ev.packet is None
        else {
            "src": str(ev.packet.src),
            "dst": str(ev.packet.dst),
            "ttl": ev.packet.ttl,
            "ip_id": ev.packet.ip_id,
            "payload": _payload_json(ev.packet.payload),
        },
    }


def events_to_jsonl(events) -> str:
    """One event per line, stable field order; diffable across runs."""
    return "\n".join(json.dumps(event_to_json(ev), sort_keys=True) for ev in events)
