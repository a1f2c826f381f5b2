"""DNS censorship detection: screening heuristics and resolver discovery.

The pipeline mirrors field practice.  First a clean-vantage overlap check
discards CDN artifacts: a domain whose direct and clean answer sets share
even one address is not censored.  The survivors get scored by frequency
analysis and two decisive heuristics: an answer inside the client's own AS
(nobody hosts foreign content on the access ISP's address space), or an
answer from a bogon prefix.  Anything still ambiguous is confirmed by
fetching the remaining answers over the clean vantage.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from ipaddress import IPv4Network

from .netsim.client import ClientHandle
from .wire import Ipv4Addr, addr_in_prefixes

# Published bogon prefixes: unallocated, reserved or never-routable space.
BOGON_PREFIXES: tuple[IPv4Network, ...] = tuple(
    IPv4Network(p)
    for p in (
        "0.0.0.0/8",
        "10.0.0.0/8",
        "100.64.0.0/10",
        "127.0.0.0/8",
        "169.254.0.0/16",
        "172.16.0.0/12",
        "192.0.0.0/24",
        "192.0.2.0/24",
        "192.168.0.0/16",
        "198.18.0.0/15",
        "198.51.100.0/24",
        "203.0.113.0/24",
        "224.0.0.0/4",
        "240.0.0.0/4",
    )
)


class VantageKind(Enum):
    DIRECT = "direct"
    CLEAN = "clean"


@dataclass(frozen=True)
class ResolutionRecord:
    domain: str
    vantage: VantageKind
    answers: frozenset[Ipv4Addr]


class Overlap(Enum):
    OVERLAPPING = "overlapping"
    DISJOINT = "disjoint"


class DnsStatus(Enum):
    UNCENSORED = "uncensored"
    CENSORED = "censored"
    UNRESOLVED = "unresolved"


class CensorReason(Enum):
    SAME_AS = "same_as"
    BOGON = "bogon"
    FREQUENCY_CLUSTER = "frequency_cluster"


@dataclass(frozen=True)
class DnsVerdict:
    domain: str
    status: DnsStatus
    resolver: Ipv4Addr
    reason: CensorReason | None = None

    def __post_init__(self) -> None:
        if self.status is DnsStatus.CENSORED and self.reason is None:
            raise ValueError("a censored verdict carries exactly one primary reason")
        if self.status is not DnsStatus.CENSORED and self.reason is not None:
            raise ValueError("only censored verdicts carry a reason")


# ---------------------------------------------------------------------------
# heuristics


def overlap_filter(direct: ResolutionRecord, clean: ResolutionRecord) -> Overlap:
    """Shared answers mean hosting architecture, not censorship."""
    if direct.domain != clean.domain:
        raise ValueError(f"records disagree on domain: {direct.domain!r} vs {clean.domain!r}")
    return Overlap.OVERLAPPING if direct.answers & clean.answers else Overlap.DISJOINT


def frequency_analysis(records, shared_hosting_whitelist=frozenset()) -> dict[Ipv4Addr, set[str]]:
    """Addresses answered for two or more distinct domains, minus known co-hosting."""
    whitelist = frozenset(shared_hosting_whitelist)
    seen: dict[Ipv4Addr, set[str]] = {}
    for record in records:
        if record.vantage is not VantageKind.DIRECT:
            raise ValueError("frequency analysis runs on direct-vantage records only")
        for addr in record.answers:
            seen.setdefault(addr, set()).add(record.domain)
    return {a: doms for a, doms in seen.items() if len(doms) >= 2 and a not in whitelist}


def is_bogon(ip: Ipv4Addr) -> bool:
    return any(ip in p for p in BOGON_PREFIXES)


def same_as_heuristic(ip: Ipv4Addr, client_as_prefixes) -> bool:
    return addr_in_prefixes(ip, client_as_prefixes)


# ---------------------------------------------------------------------------
# active probing


def discover_resolvers(client: ClientHandle, address_range, probe_domain: str, known_answer) -> list[Ipv4Addr]:
    """Sweep an address range with a known-good query; answering hosts are open resolvers.

    Hosts answering with the wrong address are misconfigured, not open-and-
    correct, and are excluded.
    """
    known = frozenset(known_answer)
    if isinstance(address_range, (str, IPv4Network)):
        candidates = list(IPv4Network(str(address_range)).hosts())
    else:
        candidates = list(address_range)
    found = []
    for addr in candidates:
        answers = client.resolve(probe_domain, addr)
        if answers and answers & known:
            found.append(addr)
    return found


def _screen_answers(
    domain: str,
    answers: frozenset[Ipv4Addr],
    clean_answers: frozenset[Ipv4Addr],
    client: ClientHandle,
    cluster_addrs: frozenset[Ipv4Addr],
    resolver: Ipv4Addr,
) -> DnsVerdict:
    direct = ResolutionRecord(domain, VantageKind.DIRECT, answers)
    clean = ResolutionRecord(domain, VantageKind.CLEAN, clean_answers)
    if overlap_filter(direct, clean) is Overlap.OVERLAPPING:
        return DnsVerdict(domain, DnsStatus.UNCENSORED, resolver)
    for addr in sorted(answers, key=int):
        if same_as_heuristic(addr, client.as_prefixes):
            return DnsVerdict(domain, DnsStatus.CENSORED, resolver, CensorReason.SAME_AS)
    for addr in sorted(answers, key=int):
        if is_bogon(addr):
            return DnsVerdict(domain, DnsStatus.CENSORED, resolver, CensorReason.BOGON)
    for addr in sorted(answers, key=int):
        if addr in cluster_addrs:
            return DnsVerdict(domain, DnsStatus.CENSORED, resolver, CensorReason.FREQUENCY_CLUSTER)
    # confirmation step: the remaining answers must actually serve the site
    for addr in sorted(answers, key=int):
        try:
            result = client.clean().fetch(domain, dst=addr)
        except Exception:
            return DnsVerdict(domain, DnsStatus.UNRESOLVED, resolver)
        if not result.responses or result.responses[0].status != 200:
            return DnsVerdict(domain, DnsStatus.UNRESOLVED, resolver)
    return DnsVerdict(domain, DnsStatus.UNCENSORED, resolver)


def scan_resolver(
    client: ClientHandle,
    resolver: Ipv4Addr,
    pbw_list,
    shared_hosting_whitelist=frozenset(),
) -> list[DnsVerdict]:
    """Resolve every candidate domain through one resolver and screen the answers."""
    directs: dict[str, frozenset[Ipv4Addr] | None] = {}
    for domain in pbw_list:
        directs[domain] = client.resolve(domain, resolver)
    records = [
        ResolutionRecord(d, VantageKind.DIRECT, a) for d, a in directs.items() if a
    ]
    cluster = frozenset(frequency_analysis(records, shared_hosting_whitelist))
    verdicts = []
    for domain in pbw_list:
        answers = directs[domain]
        if not answers:
            verdicts.append(DnsVerdict(domain, DnsStatus.UNRESOLVED, resolver))
            continue
        clean_answers = client.resolve_clean(domain)
        verdicts.append(_screen_answers(domain, answers, clean_answers, client, cluster, resolver))
    return verdicts


def scan_many(
    client: ClientHandle,
    resolvers,
    pbw_list,
    shared_hosting_whitelist=frozenset(),
) -> list[DnsVerdict]:
    """Every (resolver, domain) verdict, resolver by resolver."""
    out: list[DnsVerdict] = []
    for resolver in resolvers:
        out.extend(scan_resolver(client, resolver, pbw_list, shared_hosting_whitelist))
    return out


def censorious_from_verdicts(verdicts) -> dict[Ipv4Addr, set[str]]:
    out: dict[Ipv4Addr, set[str]] = {}
    for v in verdicts:
        if v.status is DnsStatus.CENSORED:
            out.setdefault(v.resolver, set()).add(v.domain)
    return out


def find_censorious_resolvers(
    client: ClientHandle,
    resolvers,
    pbw_list,
    shared_hosting_whitelist=frozenset(),
) -> dict[Ipv4Addr, set[str]]:
    """Map each resolver that manipulated at least one answer to its blocked set."""
    return censorious_from_verdicts(scan_many(client, resolvers, pbw_list, shared_hosting_whitelist))


def verdicts_to_csv(verdicts) -> str:
    """CSV export: domain, resolver, status, reason."""
    import csv
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["domain", "resolver", "status", "reason"])
    for v in sorted(verdicts, key=lambda v: (v.domain, int(v.resolver))):
        writer.writerow([v.domain, str(v.resolver), v.status.value, v.reason.value if v.reason else ""])
    return buf.getvalue()


def trace_dns_mechanism(client: ClientHandle, resolver: Ipv4Addr, domain: str):
    """TTL-walk one poisoned (resolver, domain) pair and name the mechanism."""
    from .tracer import DnsQueryProbe, ProbeSpec, classify_dns_mechanism, iterative_trace

    reference = frozenset(client.resolve_clean(domain))
    hops = client.traceroute(resolver)
    spec = ProbeSpec(DnsQueryProbe(domain, resolver, reference), resolver, (1, max(len(hops), 1)))
    trace = iterative_trace(client, spec)
    return classify_dns_mechanism(trace, path_len=len(hops)), trace
