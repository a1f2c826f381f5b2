"""Byte-faithful protocol messages and the two HTTP parsers.

Everything here is an immutable value; instances can be shared freely.
The point of keeping HTTP requests as raw header lines (instead of parsed
name/value pairs) is that censoring middleboxes and real web servers
disagree on syntax, and that disagreement is exactly what the evasion
strategies exploit.  Each consumer parses the same bytes with its own
policy:

* ``parse_http_server`` is the lenient RFC-style parser a web server runs
  (case-insensitive names, whitespace tolerated, pipelined blocks split at
  the first blank line).
* ``parse_http_censor`` is the strict line matcher a middlebox runs, with
  its quirks expressed as :class:`MatcherConfig` flags.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from ipaddress import IPv4Address, IPv4Network

Ipv4Addr = IPv4Address

CRLF = b"\r\n"
BLANK = b"\r\n\r\n"

TCP_FLAGS = frozenset({"SYN", "ACK", "FIN", "RST", "PSH"})


class WireError(ValueError):
    """Malformed protocol value or unparseable input."""


def flags(*names: str) -> frozenset[str]:
    got = frozenset(names)
    bad = got - TCP_FLAGS
    if bad:
        raise WireError(f"unknown TCP flags: {sorted(bad)}")
    return got


def addr_in_prefixes(addr: Ipv4Addr, prefixes) -> bool:
    return any(addr in IPv4Network(p) if isinstance(p, str) else addr in p for p in prefixes)


# ---------------------------------------------------------------------------
# packet layer


@dataclass(frozen=True)
class TcpSegment:
    sport: int
    dport: int
    seq: int
    ack: int
    flags: frozenset[str]
    data: bytes = b""

    def __post_init__(self) -> None:
        for name, port in (("sport", self.sport), ("dport", self.dport)):
            if not 0 <= port <= 0xFFFF:
                raise WireError(f"{name} out of range: {port}")
        bad = self.flags - TCP_FLAGS
        if bad:
            raise WireError(f"unknown TCP flags: {sorted(bad)}")
        if "RST" in self.flags and self.data:
            raise WireError("RST segments carry no data in this model")
        # seq/ack arithmetic is modulo 2^32
        object.__setattr__(self, "seq", self.seq & 0xFFFFFFFF)
        object.__setattr__(self, "ack", self.ack & 0xFFFFFFFF)

    def has(self, *names: str) -> bool:
        return all(n in self.flags for n in names)


class DnsKind(Enum):
    QUERY = "query"
    RESPONSE = "response"


@dataclass(frozen=True)
class DnsMessage:
    kind: DnsKind
    txid: int
    qname: str
    answers: tuple[Ipv4Addr, ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= self.txid <= 0xFFFF:
            raise WireError(f"txid out of range: {self.txid}")
        if self.kind is DnsKind.QUERY and self.answers:
            raise WireError("DNS queries carry no answers")
        # qname is lowercase-normalized on comparison; store normalized
        object.__setattr__(self, "qname", self.qname.lower())


class IcmpKind(Enum):
    ECHO_REQUEST = "echo_request"
    ECHO_REPLY = "echo_reply"
    TIME_EXCEEDED = "time_exceeded"


@dataclass(frozen=True)
class IcmpMessage:
    kind: IcmpKind
    origin: Ipv4Addr | None = None  # router that expired the packet
    probe_id: int = 0


Payload = TcpSegment | DnsMessage | IcmpMessage


@dataclass(frozen=True)
class Packet:
    src: Ipv4Addr
    dst: Ipv4Addr
    ttl: int
    ip_id: int
    payload: Payload

    def __post_init__(self) -> None:
        if not 0 <= self.ttl <= 255:
            raise WireError(f"ttl out of range: {self.ttl}")
        if not 0 <= self.ip_id <= 0xFFFF:
            raise WireError(f"ip_id out of range: {self.ip_id}")

    @property
    def tcp(self) -> TcpSegment | None:
        return self.payload if isinstance(self.payload, TcpSegment) else None

    def hop(self) -> Packet:
        """Copy with TTL decremented by one router hop."""
        return replace(self, ttl=self.ttl - 1)


# ---------------------------------------------------------------------------
# raw HTTP requests


@dataclass(frozen=True)
class RawHttpRequest:
    """An HTTP request kept as exact bytes.

    ``header_lines`` preserve insertion order, case and spacing; nothing is
    normalized until a parser looks at the serialized form.  ``trailing_bytes``
    sit after the terminator and are invisible to parsers that stop at the
    first blank line.
    """

    request_line: bytes
    header_lines: tuple[bytes, ...]
    terminator: bytes = BLANK
    trailing_bytes: bytes = b""


def serialize_http(req: RawHttpRequest) -> bytes:
    parts = [req.request_line]
    parts.extend(req.header_lines)
    return CRLF.join(parts) + req.terminator + req.trailing_bytes


_REQUEST_LINE = re.compile(rb"^[A-Z]+ \S+ HTTP/\d(?:\.\d)?$")


@dataclass(frozen=True)
class ParsedRequest:
    host: str | None
    well_formed: bool


def _server_host(lines: list[bytes]) -> str | None:
    for line in lines:
        name, sep, value = line.partition(b":")
        if not sep or name.strip().lower() != b"host":
            continue
        value = value.strip(b" \t")
        try:
            return value.decode("ascii").lower() or None
        except UnicodeDecodeError:
            return None
    return None


def parse_http_server(data: bytes) -> list[ParsedRequest]:
    """Parse bytes the way a lenient RFC-style web server would.

    Header names match case-insensitively and surrounding whitespace in the
    value is trimmed.  Bytes after the first blank line are treated as a
    second, separate request; a bare header block without a request line is
    returned with ``well_formed=False`` (the server answers it with 400).
    """
    if not data:
        raise WireError("empty HTTP input")
    out: list[ParsedRequest] = []
    rest = data
    while rest:
        block, _, rest = rest.partition(BLANK)
        if not block:
            continue
        lines = block.split(CRLF)
        well_formed = bool(_REQUEST_LINE.match(lines[0]))
        header_lines = lines[1:] if well_formed else lines
        out.append(ParsedRequest(host=_server_host(header_lines), well_formed=well_formed))
    if not out:
        raise WireError("no request block found")
    return out


# ---------------------------------------------------------------------------
# censor-side matcher


class HostSelection(Enum):
    FIRST = "first"
    LAST = "last"


class PortScope(Enum):
    PORT_80_ONLY = "port_80_only"
    ALL_PORTS = "all_ports"


@dataclass(frozen=True)
class MatcherConfig:
    """One middlebox's parsing policy for the Host header."""

    keyword_case_sensitive: bool = False
    require_single_space_after_colon: bool = False
    reject_trailing_whitespace: bool = False
    host_selection: HostSelection = HostSelection.FIRST
    scan_trailing_bytes: bool = False
    ports: PortScope = PortScope.PORT_80_ONLY


def _censor_host_line(line: bytes, cfg: MatcherConfig) -> str | None:
    keyword = line[:4]
    if cfg.keyword_case_sensitive:
        if keyword != b"Host":
            return None
    elif keyword.lower() != b"host":
        return None
    if line[4:5] != b":":
        return None
    rest = line[5:]
    if cfg.require_single_space_after_colon:
        if not rest.startswith(b" "):
            return None
        value = rest[1:]
        if value[:1] in (b" ", b"\t"):
            return None
    else:
        value = rest.lstrip(b" \t")
    if cfg.reject_trailing_whitespace:
        if value != value.rstrip(b" \t"):
            return None
    else:
        value = value.rstrip(b" \t")
    if not value or b" " in value or b"\t" in value:
        return None
    try:
        return value.decode("ascii").lower()
    except UnicodeDecodeError:
        return None


def parse_http_censor(data: bytes, cfg: MatcherConfig) -> str | None:
    """Extract the domain a censor would match from raw payload bytes.

    Total and deterministic: anything the matcher cannot make sense of is
    simply no match.  Domains at arbitrary offsets outside a Host line never
    match, which is what the trigger-placement fuzzing relies on.
    """
    region = data if cfg.scan_trailing_bytes else data.partition(BLANK)[0]
    hosts = [h for line in region.split(CRLF) if (h := _censor_host_line(line, cfg))]
    if not hosts:
        return None
    return hosts[0] if cfg.host_selection is HostSelection.FIRST else hosts[-1]


# ---------------------------------------------------------------------------
# request construction


@dataclass(frozen=True)
class Canonical:
    pass


@dataclass(frozen=True)
class KeywordCase:
    keyword: str = "HOST"

    def __post_init__(self) -> None:
        if self.keyword.lower() != "host":
            raise WireError(f"keyword must be a case permutation of Host: {self.keyword!r}")


@dataclass(frozen=True)
class HostWhitespace:
    before: int = 2  # whitespace chars between the colon and the domain
    after: int = 0
    tabs: bool = False


@dataclass(frozen=True)
class DoubleHost:
    decoy: str  # uncensored domain placed in a second, trailing Host block


StrategyVariant = Canonical | KeywordCase | HostWhitespace | DoubleHost


def make_get(host: str, variant: StrategyVariant = Canonical()) -> RawHttpRequest:
    """Build a GET request for ``host`` mutated per the evasion variant."""
    if not host:
        raise WireError("host must be nonempty")
    line = b"GET / HTTP/1.1"
    hb = host.encode("ascii")
    if isinstance(variant, Canonical):
        return RawHttpRequest(line, (b"Host: " + hb,))
    if isinstance(variant, KeywordCase):
        return RawHttpRequest(line, (variant.keyword.encode("ascii") + b": " + hb,))
    if isinstance(variant, HostWhitespace):
        pad = b"\t" if variant.tabs else b" "
        header = b"Host:" + pad * variant.before + hb + pad * variant.after
        return RawHttpRequest(line, (header,))
    if isinstance(variant, DoubleHost):
        trailing = b"Host: " + variant.decoy.encode("ascii") + BLANK
        return RawHttpRequest(line, (b"Host: " + hb,), trailing_bytes=trailing)
    raise WireError(f"unknown request variant: {variant!r}")


def split_request(data: bytes, offsets: tuple[int, ...]) -> list[bytes]:
    """Split serialized request bytes at the given strictly increasing offsets."""
    if any(o <= 0 or o >= len(data) for o in offsets):
        raise WireError("split offsets must fall inside the request")
    if list(offsets) != sorted(set(offsets)):
        raise WireError("split offsets must be strictly increasing")
    parts, prev = [], 0
    for off in offsets:
        parts.append(data[prev:off])
        prev = off
    parts.append(data[prev:])
    return parts


# ---------------------------------------------------------------------------
# HTTP responses

_REASONS = {200: "OK", 302: "Found", 400: "Bad Request", 404: "Not Found"}

_TITLE = re.compile(rb"<title[^>]*>(.*?)</title>", re.IGNORECASE | re.DOTALL)


def extract_title(body: bytes) -> str | None:
    m = _TITLE.search(body)
    if not m:
        return None
    return m.group(1).strip().decode("ascii", errors="replace")


@dataclass(frozen=True)
class HttpResponse:
    status: int
    header_fields: tuple[tuple[str, str], ...]
    body: bytes
    title_tag: str | None = None

    @classmethod
    def make(cls, status: int, header_fields, body: bytes) -> HttpResponse:
        return cls(status, tuple((n, v) for n, v in header_fields), body, extract_title(body))

    def header_names(self) -> tuple[str, ...]:
        return tuple(n.lower() for n, _ in self.header_fields)


def build_response(status: int, header_fields, body: bytes) -> bytes:
    """Serialize a response, adding Content-Length so streams can be framed."""
    fields = list(header_fields)
    if not any(n.lower() == "content-length" for n, _ in fields):
        fields.append(("Content-Length", str(len(body))))
    reason = _REASONS.get(status, "Unknown")
    head = f"HTTP/1.1 {status} {reason}\r\n".encode("ascii")
    head += b"".join(f"{n}: {v}\r\n".encode("ascii") for n, v in fields)
    return head + CRLF + body


_STATUS_LINE = re.compile(rb"^HTTP/\d(?:\.\d)? (\d{3})[^\r\n]*$")


def parse_responses(stream: bytes) -> list[HttpResponse]:
    """Frame and parse one or more responses out of a delivered byte stream.

    Framing uses Content-Length; a trailing fragment that does not start with
    a status line ends the parse (middlebox injections are always whole).
    """
    out: list[HttpResponse] = []
    rest = stream
    while rest:
        head, sep, tail = rest.partition(BLANK)
        if not sep:
            break
        lines = head.split(CRLF)
        m = _STATUS_LINE.match(lines[0])
        if not m:
            break
        status = int(m.group(1))
        fields: list[tuple[str, str]] = []
        length = 0
        for line in lines[1:]:
            name, s, value = line.partition(b":")
            if not s:
                continue
            n = name.strip().decode("ascii", errors="replace")
            v = value.strip().decode("ascii", errors="replace")
            fields.append((n, v))
            if n.lower() == "content-length":
                try:
                    length = int(v)
                except ValueError:
                    length = 0
        body, rest = tail[:length], tail[length:]
        out.append(HttpResponse.make(status, fields, body))
    return out


def hexdump(data: bytes, width: int = 16) -> str:
    """Classic offset/hex/ascii rendering for debug reports."""
    rows = []
    for off in range(0, len(data), width):
        chunk = data[off : off + width]
        hexpart = " ".join(f"{b:02x}" for b in chunk).ljust(width * 3 - 1)
        text = "".join(chr(b) if 32 <= b < 127 else "." for b in chunk)
        rows.append(f"{off:08x}  {hexpart}  {text}")
    return "\n".join(rows)
