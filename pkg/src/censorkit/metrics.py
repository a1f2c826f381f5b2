"""Coverage, consistency, precision/recall and collateral-damage attribution.

All fractions are exact rationals rendered to three decimals, so reports are
bit-identical across runs and platforms.  Coverage is the fraction of units
(resolvers, or router-level paths) the censorship infrastructure touches;
consistency is the mean, over blocked domains, of the fraction of poisoned
units blocking each one.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from ipaddress import IPv4Network

from .fingerprints import DEFAULT_REGISTRY, FingerprintRegistry
from .http_detect import Evidence, _injections
from .netsim.client import ClientHandle
from .netsim.sim import TransportError
from .tracer import locate_middlebox
from .netsim.topology import ANONYMIZED
from .wire import Ipv4Addr, make_get


def render_fraction(value: Fraction, places: int = 3) -> str:
    """Exact decimal rendering, round-half-up, fixed width."""
    scale = 10**places
    num = value.numerator * scale
    q, r = divmod(num, value.denominator)
    if 2 * r >= value.denominator:
        q += 1
    whole, frac = divmod(q, scale)
    return f"{whole}.{frac:0{places}d}"


class Scope(Enum):
    DNS_RESOLVERS = "dns_resolvers"
    HTTP_PATHS_INTERNAL = "http_paths_internal"
    HTTP_PATHS_EXTERNAL = "http_paths_external"


@dataclass(frozen=True)
class CoverageReport:
    scope: Scope
    poisoned_count: int
    total_count: int
    coverage: Fraction

    @property
    def rendered(self) -> str:
        return render_fraction(self.coverage)

    def to_json(self) -> dict:
        return {
            "scope": self.scope.value,
            "poisoned_count": self.poisoned_count,
            "total_count": self.total_count,
            "coverage": self.rendered,
            "coverage_exact": [self.coverage.numerator, self.coverage.denominator],
        }


def coverage(poisoned, total, scope: Scope = Scope.DNS_RESOLVERS) -> CoverageReport:
    poisoned, total = set(poisoned), set(total)
    if not total:
        raise ValueError("coverage over an empty unit set is undefined")
    if not poisoned <= total:
        raise ValueError("poisoned units must be a subset of the total")
    return CoverageReport(scope, len(poisoned), len(total), Fraction(len(poisoned), len(total)))


@dataclass(frozen=True)
class ConsistencyReport:
    fractions: dict[str, Fraction]
    consistency: Fraction

    @property
    def rendered(self) -> str:
        return render_fraction(self.consistency)

    def to_json(self) -> dict:
        return {
            "consistency": self.rendered,
            "consistency_exact": [self.consistency.numerator, self.consistency.denominator],
            "per_domain": {d: render_fraction(f) for d, f in sorted(self.fractions.items())},
        }

    def to_tsv(self) -> str:
        """Plot-ready per-domain fractions; domains anonymized to integer ids."""
        rows = ["domain_id\tfraction"]
        for idx, domain in enumerate(sorted(self.fractions)):
            rows.append(f"{idx}\t{render_fraction(self.fractions[domain])}")
        return "\n".join(rows)


def consistency(blocking: dict, poisoned_units) -> ConsistencyReport:
    """Mean over blocked domains of (#units blocking it) / |poisoned units|."""
    poisoned_units = set(poisoned_units)
    if not poisoned_units:
        raise ValueError("consistency over an empty poisoned set is undefined")
    stray = set(blocking) - poisoned_units
    if stray:
        raise ValueError(f"blocking map mentions units outside the poisoned set: {sorted(map(str, stray))}")
    counts: dict[str, int] = {}
    for unit, domains in blocking.items():
        for domain in domains:
            counts[domain] = counts.get(domain, 0) + 1
    fractions = {d: Fraction(c, len(poisoned_units)) for d, c in counts.items()}
    if not fractions:
        return ConsistencyReport({}, Fraction(0))
    mean = sum(fractions.values(), Fraction(0)) / len(fractions)
    return ConsistencyReport(fractions, mean)


@dataclass(frozen=True)
class PrecisionRecall:
    reported: frozenset
    ground_truth: frozenset
    precision: Fraction
    recall: Fraction

    def to_json(self) -> dict:
        return {
            "reported": len(self.reported),
            "ground_truth": len(self.ground_truth),
            "true_positives": len(self.reported & self.ground_truth),
            "precision": render_fraction(self.precision),
            "recall": render_fraction(self.recall),
        }


def precision_recall(reported, ground_truth) -> PrecisionRecall:
    reported, ground_truth = frozenset(reported), frozenset(ground_truth)
    if not reported:
        raise ValueError("precision undefined for an empty reported set")
    if not ground_truth:
        raise ValueError("recall undefined for an empty ground-truth set")
    hits = len(reported & ground_truth)
    return PrecisionRecall(
        reported,
        ground_truth,
        Fraction(hits, len(reported)),
        Fraction(hits, len(ground_truth)),
    )


# ---------------------------------------------------------------------------
# path coverage sweeps


def _path_poisoned(client: ClientHandle, dst: Ipv4Addr, pbw_list, port: int = 80) -> bool:
    """One censor reply to any Host in the list poisons the path."""
    for domain in pbw_list:
        try:
            flow = client.open_flow(dst, port=port)
        except TransportError:
            continue
        flow.send_request(make_get(domain))
        if flow.censor_hits():
            return True
    return False


def http_coverage_internal(client: ClientHandle, targets, pbw_list) -> CoverageReport:
    """Per in-ISP target: TCP connect, sweep the Host list, mark poisoned paths."""
    poisoned = set()
    targets = list(targets)
    for dst in targets:
        if _path_poisoned(client, dst, pbw_list):
            poisoned.add(dst)
    return coverage(poisoned, targets, Scope.HTTP_PATHS_INTERNAL)


def _open_port80_hosts(client: ClientHandle, prefix: IPv4Network) -> list[Ipv4Addr]:
    hosts = []
    for addr in prefix.hosts():
        flow = client.script_flow(addr, 80)
        flow.emit({"SYN"})
        if flow.state == "synack":
            hosts.append(addr)
    return hosts


def http_coverage_external(vantages, prefixes, pbw_list, seed: int) -> CoverageReport:
    """Sample two port-80 hosts per prefix from each vantage and sweep them.

    Sampling is keyed to the experiment seed, so a rerun probes the same hosts.
    """
    prefixes = [IPv4Network(str(p)) for p in prefixes]
    if not prefixes:
        raise ValueError("no prefixes to scan")
    rng = random.Random(seed)
    total: set[tuple[str, Ipv4Addr]] = set()
    poisoned: set[tuple[str, Ipv4Addr]] = set()
    for vantage in vantages:
        for prefix in prefixes:
            hosts = _open_port80_hosts(vantage, prefix)
            sample = rng.sample(sorted(hosts, key=int), min(2, len(hosts)))
            for dst in sample:
                vantage.traceroute(dst)
                key = (vantage.name, dst)
                total.add(key)
                if _path_poisoned(vantage, dst, pbw_list):
                    poisoned.add(key)
    return coverage(poisoned, total, Scope.HTTP_PATHS_EXTERNAL)


# ---------------------------------------------------------------------------
# collateral-damage attribution


@dataclass
class CollateralAttribution:
    victim_as: str
    attributions: dict[str, int] = field(default_factory=dict)
    unattributed: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "victim_as": self.victim_as,
            "attributions": dict(sorted(self.attributions.items())),
            "unattributed": sorted(self.unattributed),
        }


def _as_of(addr, as_map) -> str | None:
    for net, label in as_map.items():
        if addr in net:
            return label
    return None


def attribute_collateral(
    victim_client: ClientHandle,
    blocked_evidence: list[Evidence],
    as_map: dict | None = None,
    registry: FingerprintRegistry = DEFAULT_REGISTRY,
) -> CollateralAttribution:
    """Pin each blocked domain on the AS running the censor that blocked it.

    Heuristics, in order: the AS of a visible censor hop; the AS of the
    visible routers flanking an anonymized censor hop, when they agree; a
    notification fingerprint from the registry.  The victim network must not
    run censors of its own.
    """
    topo = victim_client.sim.topology
    if as_map is None:
        as_map = {IPv4Network(str(net)): label for net, label in topo.as_map.items()}
    victim_as = _as_of(victim_client.addr, as_map) or "AS-UNKNOWN"
    for attach in victim_client.sim.middleboxes:
        if _as_of(attach, as_map) == victim_as:
            raise ValueError("victim network runs censors of its own; attribution is not collateral")
    result = CollateralAttribution(victim_as)
    for evidence in blocked_evidence:
        label = None
        located = locate_middlebox(evidence.trace)
        if located is not None:
            if located.addr is not ANONYMIZED:
                label = _as_of(located.addr, as_map)
            else:
                hops = evidence.trace.hops
                left = hops[located.hop - 2] if located.hop >= 2 else None
                right = hops[located.hop] if located.hop < len(hops) else None
                if left is not None and right is not None and left is not ANONYMIZED and right is not ANONYMIZED:
                    left_as, right_as = _as_of(left, as_map), _as_of(right, as_map)
                    if left_as is not None and left_as == right_as:
                        label = left_as
        if label is None:
            for transcript in evidence.transcripts:
                for pkt in _injections(transcript):
                    seg = pkt.tcp
                    fp = registry.match(seg.data) if seg is not None and seg.data else None
                    if fp is not None:
                        label = fp.as_label
                        break
                if label:
                    break
        if label is None:
            result.unattributed.append(evidence.domain)
        else:
            result.attributions[label] = result.attributions.get(label, 0) + 1
    return result
