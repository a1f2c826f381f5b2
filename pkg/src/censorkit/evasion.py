"""Anti-censorship strategies and their evaluator.

Two families: craft the request so the censor's matcher misses it while the
server still parses it (case permutation, padded whitespace, a decoy second
Host block, mid-keyword TCP fragmentation), or keep the request canonical and
firewall the censor's injected FIN/RST packets at the client.  DNS poisoning
falls to simply asking a resolver the censor does not control.

A strategy counts as a bypass only when the delivered content digest equals
the clean-vantage digest, byte for byte.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from enum import Enum

from .http_detect import MiddleboxClass, Visibility
from .netsim.client import ClientHandle, first_addr
from .netsim.middlebox import MbKind
from .netsim.sim import DropRule, TransportError
from .wire import (
    Canonical,
    DoubleHost,
    HostWhitespace,
    Ipv4Addr,
    KeywordCase,
    make_get,
    serialize_http,
)


class InapplicableStrategyError(RuntimeError):
    """The strategy does not address the censorship mechanism in play."""


# ---------------------------------------------------------------------------
# strategy catalog


@dataclass(frozen=True)
class KeywordCaseStrategy:
    keyword: str = "HOST"


@dataclass(frozen=True)
class DropFinRstStrategy:
    ip_id: int | None = None  # narrow the firewall rule to one IP identifier


@dataclass(frozen=True)
class HostWhitespaceStrategy:
    before: int = 2
    after: int = 0
    tabs: bool = False


@dataclass(frozen=True)
class DoubleHostStrategy:
    decoy: str


@dataclass(frozen=True)
class FragmentedGetStrategy:
    split_offsets: tuple[int, ...] | None = None  # None splits inside "Host"


@dataclass(frozen=True)
class AltResolverStrategy:
    resolver: Ipv4Addr


Strategy = (
    KeywordCaseStrategy
    | DropFinRstStrategy
    | HostWhitespaceStrategy
    | DoubleHostStrategy
    | FragmentedGetStrategy
    | AltResolverStrategy
)


def strategy_name(strategy: Strategy) -> str:
    return type(strategy).__name__.removesuffix("Strategy")


def full_catalog(decoy: str = "allowed.example", resolver: Ipv4Addr | None = None, ip_id: int | None = None) -> list[Strategy]:
    catalog: list[Strategy] = [
        KeywordCaseStrategy(),
        DropFinRstStrategy(ip_id),
        HostWhitespaceStrategy(),
        DoubleHostStrategy(decoy),
        FragmentedGetStrategy(),
    ]
    if resolver is not None:
        catalog.append(AltResolverStrategy(resolver))
    return catalog


class OutcomeStatus(Enum):
    BYPASSED = "bypassed"
    BLOCKED = "blocked"
    NOT_CENSORED = "not_censored"
    INAPPLICABLE = "inapplicable"
    ERROR = "error"


@dataclass
class StrategyOutcome:
    strategy: Strategy
    bypassed: bool
    status: OutcomeStatus
    content_digest: str | None = None
    side_effects: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "strategy": strategy_name(self.strategy),
            "params": {k: str(v) for k, v in vars(self.strategy).items()},
            "bypassed": self.bypassed,
            "status": self.status.value,
            "content_digest": self.content_digest,
            "side_effects": self.side_effects,
        }


# ---------------------------------------------------------------------------
# diagnosis


class CensorshipType(Enum):
    NONE = "none"
    DNS = "dns"
    HTTP = "http"
    TRANSPORT = "transport"


def diagnose(client: ClientHandle, domain: str, resolver: Ipv4Addr | None = None) -> CensorshipType:
    """Cheap mechanism triage for strategy applicability."""
    clean_answers = client.resolve_clean(domain)
    if resolver is not None:
        direct = client.resolve(domain, resolver)
        if direct and clean_answers and not (direct & clean_answers):
            return CensorshipType.DNS
    try:
        result = client.fetch(domain)
    except TransportError:
        return CensorshipType.TRANSPORT
    if result.censor_packets:
        return CensorshipType.HTTP
    clean_body = client.clean().fetch(domain).body
    if result.body != clean_body:
        return CensorshipType.HTTP
    return CensorshipType.NONE


def _digest(body: bytes | None) -> str:
    return hashlib.sha256(body or b"").hexdigest()


# ---------------------------------------------------------------------------
# application


def apply(
    strategy: Strategy,
    client: ClientHandle,
    domain: str,
    resolver: Ipv4Addr | None = None,
) -> StrategyOutcome:
    """Run one strategy on a fresh flow and compare against the clean vantage."""
    clean = client.clean().fetch(domain)
    clean_digest = _digest(clean.body)
    kind = diagnose(client, domain, resolver)
    if kind is CensorshipType.NONE:
        return StrategyOutcome(strategy, True, OutcomeStatus.NOT_CENSORED, clean_digest)

    if isinstance(strategy, AltResolverStrategy):
        if kind is not CensorshipType.DNS:
            raise InapplicableStrategyError("alternate resolvers only counter DNS manipulation")
        answers = client.resolve(domain, strategy.resolver)
        if answers is None:
            raise InapplicableStrategyError(f"resolver {strategy.resolver} did not answer")
        clean_answers = client.resolve_clean(domain)
        if clean_answers and not (answers & clean_answers):
            raise InapplicableStrategyError(f"resolver {strategy.resolver} is itself poisoned")
        result = client.fetch(domain, dst=first_addr(answers))
    elif kind is CensorshipType.DNS:
        raise InapplicableStrategyError("request crafting cannot fix a poisoned resolution")
    elif kind is CensorshipType.TRANSPORT:
        raise InapplicableStrategyError("the flow is dropped before any request is seen")
    elif isinstance(strategy, KeywordCaseStrategy):
        result = client.fetch(domain, variant=KeywordCase(strategy.keyword))
    elif isinstance(strategy, HostWhitespaceStrategy):
        result = client.fetch(domain, variant=HostWhitespace(strategy.before, strategy.after, strategy.tabs))
    elif isinstance(strategy, DoubleHostStrategy):
        result = client.fetch(domain, variant=DoubleHost(strategy.decoy))
    elif isinstance(strategy, FragmentedGetStrategy):
        offsets = strategy.split_offsets
        if offsets is None:
            data = serialize_http(make_get(domain))
            offsets = (data.index(b"Host:") + 2,)
        result = client.fetch(domain, split_offsets=offsets)
    elif isinstance(strategy, DropFinRstStrategy):
        client.set_filter([DropRule(frozenset({"FIN", "RST"}), strategy.ip_id)])
        try:
            result = client.fetch(domain)
        finally:
            client.clear_filter()
    else:
        raise InapplicableStrategyError(f"unknown strategy {strategy!r}")

    digest = _digest(result.body)
    side_effects = [f"http_{r.status}" for r in result.responses[1:]]
    bypassed = digest == clean_digest
    status = OutcomeStatus.BYPASSED if bypassed else OutcomeStatus.BLOCKED
    return StrategyOutcome(strategy, bypassed, status, digest, side_effects)


def evaluate_catalog(
    client: ClientHandle,
    domain: str,
    strategies,
    resolver: Ipv4Addr | None = None,
) -> list[StrategyOutcome]:
    """Apply every strategy on its own flow; per-strategy failures do not abort."""
    outcomes = []
    for strategy in strategies:
        try:
            outcomes.append(apply(strategy, client, domain, resolver))
        except InapplicableStrategyError as exc:
            outcomes.append(StrategyOutcome(strategy, False, OutcomeStatus.INAPPLICABLE, side_effects=[str(exc)]))
        except Exception as exc:  # aggregate, never abort the sweep
            outcomes.append(StrategyOutcome(strategy, False, OutcomeStatus.ERROR, side_effects=[f"{type(exc).__name__}: {exc}"]))
    return outcomes


# ---------------------------------------------------------------------------
# recommendations


DNS_CENSORSHIP = "dns"


def recommend(profile: MiddleboxClass | str | None, decoy: str = "allowed.example", resolver: Ipv4Addr | None = None) -> list[Strategy]:
    """Ranked strategies for a classified censor; the full catalog as fallback."""
    if profile == DNS_CENSORSHIP:
        if resolver is None:
            raise ValueError("recommending AltResolver needs a candidate resolver")
        return [AltResolverStrategy(resolver)]
    if profile is None:
        return full_catalog(decoy, resolver)
    if profile.kind is MbKind.WM:
        if profile.fixed_ip_id is not None:
            return [DropFinRstStrategy(profile.fixed_ip_id), KeywordCaseStrategy()]
        return [KeywordCaseStrategy(), DropFinRstStrategy()]
    if profile.visibility is Visibility.OVERT:
        return [HostWhitespaceStrategy()]
    return [DoubleHostStrategy(decoy)]
