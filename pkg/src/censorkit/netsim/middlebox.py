"""Middlebox configuration and per-flow inspection state machines.

Two censor designs are modeled.  An interceptive middlebox (IM) sits inline:
on a blocklist hit it answers the client itself, resets the server side and
drops every later client packet on that flow.  A wiretap middlebox (WM) sees
a copy of the traffic: it can only inject forged packets, so the genuine
server response still travels to the client and the two race.

A stateful middlebox only inspects flows whose full three-way handshake it
has observed, and it forgets a flow after ``state_timeout_ticks`` of silence;
any packet on the flow restarts that timer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from ipaddress import IPv4Network

from ..wire import (
    BLANK,
    DnsKind,
    DnsMessage,
    Ipv4Addr,
    MatcherConfig,
    Packet,
    PortScope,
    TcpSegment,
    addr_in_prefixes,
    build_response,
    parse_http_censor,
)

_REASSEMBLY_WINDOW = 4096


class MbKind(Enum):
    IM = "IM"
    WM = "WM"


class Inspect(Enum):
    REQUEST_ONLY = "request_only"
    RESPONSE_ONLY = "response_only"
    BOTH = "both"


@dataclass(frozen=True)
class IpIdPolicy:
    fixed: int | None = None  # None draws a fresh random identifier per packet

    def draw(self, rng) -> int:
        return self.fixed if self.fixed is not None else rng.randrange(0, 0x10000)


@dataclass(frozen=True)
class NotificationConfig:
    body_template: bytes  # full serialized HTTP response; empty for covert boxes
    flags: frozenset[str] = frozenset({"FIN", "PSH", "ACK"})
    ip_id_policy: IpIdPolicy = IpIdPolicy()
    fingerprint: str = ""


@dataclass(frozen=True)
class MiddleboxConfig:
    name: str
    kind: MbKind
    attach: Ipv4Addr
    blocklist: frozenset[str]
    matcher: MatcherConfig = MatcherConfig()
    inspect: Inspect = Inspect.REQUEST_ONLY
    stateful: bool = True
    state_timeout_ticks: int = 150
    notification: NotificationConfig = NotificationConfig(b"")
    send_rst_followup: bool = False
    covert: bool = False
    drop_flow_after_trigger: bool = False
    injection_win_probability: float = 0.7
    reassemble: bool = False
    source_prefixes: tuple[IPv4Network, ...] | None = None
    dns_forged_answer: Ipv4Addr | None = None

    def __post_init__(self) -> None:
        if self.kind is MbKind.IM and not self.drop_flow_after_trigger:
            raise ValueError(f"{self.name}: an IM always drops the flow after triggering")
        if self.kind is MbKind.WM and self.drop_flow_after_trigger:
            raise ValueError(f"{self.name}: a tap cannot drop packets")
        if self.covert and self.notification.body_template:
            raise ValueError(f"{self.name}: covert boxes send a bare RST, no notification body")
        if self.covert and self.kind is not MbKind.IM:
            raise ValueError(f"{self.name}: covert censorship is IM-only in this model")
        object.__setattr__(self, "blocklist", frozenset(d.lower() for d in self.blocklist))


@dataclass
class Injection:
    """A forged packet the middlebox wants on the wire."""

    packet: Packet
    toward_client: bool
    race: bool = False  # races the genuine response when one is coming
    extra_delay: int = 0


@dataclass
class MbDecision:
    consume: bool = False
    injections: list[Injection] = field(default_factory=list)
    triggered_domain: str | None = None


class _Flow:
    __slots__ = (
        "client_side",
        "server_side",
        "server_port",
        "saw_syn",
        "saw_synack",
        "saw_ack",
        "triggered",
        "last_activity",
        "req_buffer",
    )

    def __init__(self, tick: int):
        self.client_side: Ipv4Addr | None = None
        self.server_side: Ipv4Addr | None = None
        self.server_port = 0
        self.saw_syn = False
        self.saw_synack = False
        self.saw_ack = False
        self.triggered = False
        self.last_activity = tick
        self.req_buffer = b""

    @property
    def handshake_complete(self) -> bool:
        return self.saw_syn and self.saw_synack and self.saw_ack


def _flow_key(packet: Packet, seg: TcpSegment):
    ends = sorted(((int(packet.src), seg.sport), (int(packet.dst), seg.dport)))
    return (ends[0], ends[1])


class MiddleboxRuntime:
    """Mutable inspection state for one configured middlebox."""

    def __init__(self, config: MiddleboxConfig):
        self.config = config
        self.flows: dict[tuple, _Flow] = {}

    # -- flow bookkeeping ---------------------------------------------------

    def _flow_for(self, packet: Packet, seg: TcpSegment, tick: int) -> _Flow:
        key = _flow_key(packet, seg)
        flow = self.flows.get(key)
        if flow is not None and tick - flow.last_activity > self.config.state_timeout_ticks:
            flow = None  # state purged after the timeout elapsed
        if flow is None:
            flow = _Flow(tick)
            flow.client_side = packet.src
            flow.server_side = packet.dst
            flow.server_port = seg.dport
            self.flows[key] = flow
        flow.last_activity = tick
        return flow

    def _track_handshake(self, flow: _Flow, packet: Packet, seg: TcpSegment) -> None:
        if seg.has("SYN") and "ACK" not in seg.flags:
            # the pure SYN defines who the client is
            flow.client_side = packet.src
            flow.server_side = packet.dst
            flow.server_port = seg.dport
            flow.saw_syn = True
        elif seg.has("SYN", "ACK"):
            if flow.saw_syn and packet.src == flow.server_side:
                flow.saw_synack = True
        elif seg.has("ACK") and not seg.data:
            # only a bare ACK from the initiator completes the handshake
            if flow.saw_synack and packet.src == flow.client_side:
                flow.saw_ack = True

    # -- inspection ---------------------------------------------------------

    def process(self, packet: Packet, tick: int, rng) -> MbDecision:
        cfg = self.config
        payload = packet.payload
        if isinstance(payload, DnsMessage):
            return self._process_dns(packet, payload, rng)
        if not isinstance(payload, TcpSegment):
            return MbDecision()

        seg = payload
        flow = self._flow_for(packet, seg, tick)
        self._track_handshake(flow, packet, seg)

        if cfg.matcher.ports is PortScope.PORT_80_ONLY and flow.server_port != 80:
            return MbDecision()
        if cfg.source_prefixes is not None and not addr_in_prefixes(
            flow.client_side, cfg.source_prefixes
        ):
            return MbDecision()

        is_request = packet.src == flow.client_side
        decision = MbDecision()

        matched = None
        if is_request and seg.data and cfg.inspect in (Inspect.REQUEST_ONLY, Inspect.BOTH):
            matched = self._match_request(flow, seg.data)
        elif not is_request and seg.data and cfg.inspect in (Inspect.RESPONSE_ONLY, Inspect.BOTH):
            matched = self._match_response(seg.data)

        armed = not cfg.stateful or flow.handshake_complete

        if cfg.kind is MbKind.IM and flow.triggered and is_request:
            # flow is already being intercepted: answer matching requests,
            # silently eat everything else (FIN teardowns time out here)
            if matched and armed:
                decision.injections.extend(self._client_injections(packet, seg, rng))
                decision.triggered_domain = matched
            decision.consume = True
            return decision

        if matched and armed:
            decision.triggered_domain = matched
            decision.injections.extend(self._client_injections(packet, seg, rng, response_dir=not is_request))
            if cfg.kind is MbKind.IM:
                flow.triggered = True
                decision.consume = True
                if is_request:
                    decision.injections.append(self._server_rst(packet, seg, rng))
        return decision

    def _match_request(self, flow: _Flow, data: bytes) -> str | None:
        cfg = self.config
        if cfg.reassemble:
            flow.req_buffer = (flow.req_buffer + data)[-_REASSEMBLY_WINDOW:]
            scan = flow.req_buffer
        else:
            scan = data
        domain = parse_http_censor(scan, cfg.matcher)
        if domain is not None and domain in cfg.blocklist:
            return domain
        return None

    def _match_response(self, data: bytes) -> str | None:
        lowered = data.lower()
        for domain in self.config.blocklist:
            if domain.encode("ascii") in lowered:
                return domain
        return None

    # -- forged packets -----------------------------------------------------

    def _client_injections(self, packet: Packet, seg: TcpSegment, rng, response_dir: bool = False) -> list[Injection]:
        cfg = self.config
        out: list[Injection] = []
        if response_dir:
            # triggered by the server's own response: forge onward from it
            victim, forged_src = packet.dst, packet.src
            sport, dport = seg.sport, seg.dport
            seq, ack = seg.seq + len(seg.data), seg.ack
        else:
            victim, forged_src = packet.src, packet.dst
            sport, dport = seg.dport, seg.sport
            seq, ack = seg.ack, (seg.seq + len(seg.data)) & 0xFFFFFFFF
        race = not response_dir and cfg.kind is MbKind.WM
        if cfg.covert:
            rst = TcpSegment(sport, dport, seq, ack, frozenset({"RST"}))
            out.append(
                Injection(
                    Packet(forged_src, victim, 64, cfg.notification.ip_id_policy.draw(rng), rst),
                    toward_client=True,
                    race=race,
                )
            )
            return out
        body = cfg.notification.body_template
        notice = TcpSegment(sport, dport, seq, ack, cfg.notification.flags, body)
        out.append(
            Injection(
                Packet(forged_src, victim, 64, cfg.notification.ip_id_policy.draw(rng), notice),
                toward_client=True,
                race=race,
            )
        )
        if cfg.send_rst_followup:
            fin = 1 if "FIN" in cfg.notification.flags else 0
            rst = TcpSegment(sport, dport, (seq + len(body) + fin) & 0xFFFFFFFF, ack, frozenset({"RST"}))
            out.append(
                Injection(
                    Packet(forged_src, victim, 64, cfg.notification.ip_id_policy.draw(rng), rst),
                    toward_client=True,
                    race=race,
                    extra_delay=1,
                )
            )
        return out

    def _server_rst(self, packet: Packet, seg: TcpSegment, rng) -> Injection:
        # tears down the server side; its seq is deliberately unlike anything
        # the client sent, which is how the forgery shows up in receipt logs
        rst = TcpSegment(
            seg.sport,
            seg.dport,
            (seg.seq + 1_000_000) & 0xFFFFFFFF,
            seg.ack,
            frozenset({"RST"}),
        )
        return Injection(
            Packet(packet.src, packet.dst, 64, self.config.notification.ip_id_policy.draw(rng), rst),
            toward_client=False,
        )

    def _process_dns(self, packet: Packet, msg: DnsMessage, rng) -> MbDecision:
        cfg = self.config
        if cfg.dns_forged_answer is None or msg.kind is not DnsKind.QUERY:
            return MbDecision()
        if msg.qname not in cfg.blocklist:
            return MbDecision()
        forged = DnsMessage(DnsKind.RESPONSE, msg.txid, msg.qname, (cfg.dns_forged_answer,))
        inj = Injection(
            Packet(packet.dst, packet.src, 64, cfg.notification.ip_id_policy.draw(rng), forged),
            toward_client=True,
        )
        return MbDecision(consume=False, injections=[inj], triggered_domain=msg.qname)


# ---------------------------------------------------------------------------
# shipped archetypes

_STD_HEADERS = (("Content-Type", "text/html"), ("Server", "nginx"))


def _notice_body(html: bytes) -> bytes:
    return build_response(200, _STD_HEADERS, html)


AIRTEL_NOTICE_HTML = (
    b"<html><head></head><body>"
    b'<iframe src="http://www.airtel.com/dot/" width="100%" height="100%"></iframe>'
    b"</body></html>"
)
JIO_NOTICE_HTML = (
    b"<html><head></head><body>"
    b'<meta http-equiv="refresh" content="0;url=http://49.44.0.1/">'
    b'<a href="http://49.44.0.1/">Moved</a></body></html>'
)
IDEA_NOTICE_HTML = (
    b"<html><head></head><body>The website has been blocked as per the instructions "
    b"of a competent authority.</body></html>"
)


def airtel_wm(attach: Ipv4Addr, blocklist, **kw) -> MiddleboxConfig:
    return MiddleboxConfig(
        name="airtel_wm",
        kind=MbKind.WM,
        attach=attach,
        blocklist=frozenset(blocklist),
        matcher=MatcherConfig(keyword_case_sensitive=True),
        notification=NotificationConfig(
            _notice_body(AIRTEL_NOTICE_HTML),
            ip_id_policy=IpIdPolicy(fixed=242),
            fingerprint="airtel.com/dot",
        ),
        send_rst_followup=True,
        **kw,
    )


def jio_wm(attach: Ipv4Addr, blocklist, **kw) -> MiddleboxConfig:
    return MiddleboxConfig(
        name="jio_wm",
        kind=MbKind.WM,
        attach=attach,
        blocklist=frozenset(blocklist),
        matcher=MatcherConfig(keyword_case_sensitive=True),
        notification=NotificationConfig(
            _notice_body(JIO_NOTICE_HTML),
            fingerprint="jio.fixed-redirect",
        ),
        send_rst_followup=True,
        **kw,
    )


def idea_im(attach: Ipv4Addr, blocklist, **kw) -> MiddleboxConfig:
    return MiddleboxConfig(
        name="idea_im",
        kind=MbKind.IM,
        attach=attach,
        blocklist=frozenset(blocklist),
        matcher=MatcherConfig(
            require_single_space_after_colon=True,
            reject_trailing_whitespace=True,
        ),
        notification=NotificationConfig(
            _notice_body(IDEA_NOTICE_HTML),
            fingerprint="idea.dot-notice",
        ),
        drop_flow_after_trigger=True,
        **kw,
    )


def vodafone_im(attach: Ipv4Addr, blocklist, **kw) -> MiddleboxConfig:
    from ..wire import HostSelection

    return MiddleboxConfig(
        name="vodafone_im",
        kind=MbKind.IM,
        attach=attach,
        blocklist=frozenset(blocklist),
        matcher=MatcherConfig(
            host_selection=HostSelection.LAST,
            scan_trailing_bytes=True,
        ),
        notification=NotificationConfig(b"", flags=frozenset({"RST"})),
        covert=True,
        drop_flow_after_trigger=True,
        **kw,
    )


ARCHETYPES = {
    "airtel_wm": airtel_wm,
    "jio_wm": jio_wm,
    "idea_im": idea_im,
    "vodafone_im": vodafone_im,
}


def middlebox_from_config(raw: dict) -> MiddleboxConfig:
    """Build a middlebox from its JSON form.

    Either ``{"archetype": "airtel_wm", "attach": ..., "blocklist": [...]}``
    with optional keyword overrides, or a fully explicit spec (see README).
    """
    from ipaddress import IPv4Address, IPv4Network

    from ..wire import HostSelection, PortScope

    attach = IPv4Address(raw["attach"])
    blocklist = frozenset(raw.get("blocklist", ()))
    common = {}
    if "stateful" in raw:
        common["stateful"] = bool(raw["stateful"])
    if "state_timeout_ticks" in raw:
        common["state_timeout_ticks"] = int(raw["state_timeout_ticks"])
    if "injection_win_probability" in raw:
        common["injection_win_probability"] = float(raw["injection_win_probability"])
    if "reassemble" in raw:
        common["reassemble"] = bool(raw["reassemble"])
    if raw.get("source_prefixes") is not None:
        common["source_prefixes"] = tuple(IPv4Network(p) for p in raw["source_prefixes"])
    if raw.get("dns_forged_answer") is not None:
        common["dns_forged_answer"] = IPv4Address(raw["dns_forged_answer"])

    if "archetype" in raw:
        from dataclasses import replace as _replace

        factory = ARCHETYPES[raw["archetype"]]
        cfg = factory(attach, blocklist, **common)
        if "name" in raw:
            cfg = _replace(cfg, name=raw["name"])
        return cfg

    m = raw.get("matcher", {})
    matcher = MatcherConfig(
        keyword_case_sensitive=bool(m.get("keyword_case_sensitive", False)),
        require_single_space_after_colon=bool(m.get("require_single_space_after_colon", False)),
        reject_trailing_whitespace=bool(m.get("reject_trailing_whitespace", False)),
        host_selection=HostSelection(m.get("host_selection", "first")),
        scan_trailing_bytes=bool(m.get("scan_trailing_bytes", False)),
        ports=PortScope(m.get("ports", "port_80_only")),
    )
    n = raw.get("notification", {})
    html = n.get("html")
    covert = bool(raw.get("covert", False))
    notification = NotificationConfig(
        body_template=_notice_body(html.encode("utf-8")) if html else b"",
        flags=frozenset(n.get("flags", ("RST",) if covert else ("FIN", "PSH", "ACK"))),
        ip_id_policy=IpIdPolicy(fixed=n.get("fixed_ip_id")),
        fingerprint=n.get("fingerprint", ""),
    )
    kind = MbKind(raw["kind"])
    return MiddleboxConfig(
        name=raw["name"],
        kind=kind,
        attach=attach,
        blocklist=blocklist,
        matcher=matcher,
        inspect=Inspect(raw.get("inspect", "request_only")),
        notification=notification,
        send_rst_followup=bool(raw.get("send_rst_followup", False)),
        covert=covert,
        drop_flow_after_trigger=bool(raw.get("drop_flow_after_trigger", kind is MbKind.IM)),
        **common,
    )
