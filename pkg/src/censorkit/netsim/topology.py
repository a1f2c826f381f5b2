"""Simulated network topology: routers, endpoints, links and the path table.

A topology is static data.  Paths are computed once per (source, destination)
pair with a deterministic breadth-first search (neighbor order = insertion
order in the config), so a given config always yields the same router-level
path; middlebox attachment never reroutes anything.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from ipaddress import IPv4Address, IPv4Network

from ..wire import Ipv4Addr


class ConfigError(ValueError):
    """Invalid topology/middlebox/resolver configuration."""

    def __init__(self, message: str, offenders=()):
        self.offenders = list(offenders)
        if self.offenders:
            message = f"{message}: {', '.join(map(str, self.offenders))}"
        super().__init__(message)


class _Anonymized:
    """Sentinel hop value for routers that stay silent on TTL expiry."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Anonymized"

    def __str__(self) -> str:
        return "*"


ANONYMIZED = _Anonymized()


@dataclass(frozen=True)
class Router:
    addr: Ipv4Addr
    as_label: str
    anonymized: bool = False


@dataclass(frozen=True)
class PageSpec:
    """Content served for one domain.

    ``dynamic`` pages render differently per vantage, the way ad-rotating or
    CDN-fronted sites do; the variation is deterministic in (domain, vantage).
    """

    body: bytes
    title: str | None = None
    header_fields: tuple[tuple[str, str], ...] = (
        ("Content-Type", "text/html"),
        ("Server", "nginx"),
    )
    dynamic: bool = False

    def render(self, domain: str, vantage_key: str) -> tuple[tuple[tuple[str, str], ...], bytes]:
        title = self.title or domain
        if not self.dynamic:
            body = b"<html><head><title>%s</title></head><body>%s</body></html>" % (
                title.encode("ascii"),
                self.body,
            )
            return self.header_fields, body
        seed = hashlib.sha256(f"{domain}|{vantage_key}".encode()).hexdigest()
        # per-vantage ad blob: bigger on direct paths so body lengths diverge
        blob_len = 80 if vantage_key == "clean" else 700
        blob = (seed * (blob_len // len(seed) + 1))[:blob_len].encode("ascii")
        dyn_title = f"{title} {seed[:6]}"
        body = (
            b"<html><head><title>%s</title></head><body>%s"
            b"<div class=ad>%s</div></body></html>"
            % (dyn_title.encode("ascii"), self.body, blob)
        )
        fields = self.header_fields + ((f"X-Cache-{seed[:4]}", "HIT"),)
        return fields, body


@dataclass(frozen=True)
class WebServerConfig:
    addr: Ipv4Addr
    pages: dict[str, PageSpec] = field(default_factory=dict)
    open_ports: tuple[int, ...] = (80,)
    controlled: bool = False  # a host we run ourselves; its receipt log is evidence
    down: bool = False


@dataclass(frozen=True)
class ResolverConfig:
    addr: Ipv4Addr
    poisoned_map: dict[str, Ipv4Addr] = field(default_factory=dict)
    # honest answers default to the topology-wide authority map
    honest_map: dict[str, frozenset[Ipv4Addr]] = field(default_factory=dict)


@dataclass(frozen=True)
class ClientConfig:
    name: str
    addr: Ipv4Addr
    as_prefixes: tuple[IPv4Network, ...] = ()


@dataclass(frozen=True)
class DropFilterConfig:
    """Router-level ACL dropping packets toward the given prefixes."""

    attach: Ipv4Addr
    dst_prefixes: tuple[IPv4Network, ...]


class Topology:
    def __init__(self, routers, clients, servers, resolvers, links, authority, as_map, drop_filters=()):
        self.routers: dict[Ipv4Addr, Router] = {r.addr: r for r in routers}
        self.clients: dict[str, ClientConfig] = {c.name: c for c in clients}
        self.servers: dict[Ipv4Addr, WebServerConfig] = {s.addr: s for s in servers}
        self.resolvers: dict[Ipv4Addr, ResolverConfig] = {r.addr: r for r in resolvers}
        self.authority: dict[str, frozenset[Ipv4Addr]] = {
            d.lower(): frozenset(a) for d, a in authority.items()
        }
        self.as_map: dict[IPv4Network, str] = dict(as_map)
        self.drop_filters: tuple[DropFilterConfig, ...] = tuple(drop_filters)
        self._adj: dict[Ipv4Addr, list[Ipv4Addr]] = {}
        self._paths: dict[tuple[Ipv4Addr, Ipv4Addr], tuple[Ipv4Addr, ...] | None] = {}
        self._client_addrs = {c.addr for c in clients}
        for a, b in links:
            self._adj.setdefault(a, [])
            self._adj.setdefault(b, [])
            if b not in self._adj[a]:
                self._adj[a].append(b)
            if a not in self._adj[b]:
                self._adj[b].append(a)
        self._validate()

    # -- queries ------------------------------------------------------------

    def endpoint_addrs(self) -> set[Ipv4Addr]:
        return set(self.servers) | set(self.resolvers) | self._client_addrs

    def is_router(self, addr: Ipv4Addr) -> bool:
        return addr in self.routers

    def path(self, src: Ipv4Addr, dst: Ipv4Addr) -> tuple[Ipv4Addr, ...] | None:
        """Hop list from src to dst, excluding src, including dst; None if unroutable."""
        key = (src, dst)
        if key not in self._paths:
            self._paths[key] = self._bfs(src, dst)
        return self._paths[key]

    def hop_count(self, src: Ipv4Addr, dst: Ipv4Addr) -> int:
        p = self.path(src, dst)
        if p is None:
            raise ConfigError("unroutable destination", [dst])
        return len(p)

    def as_of(self, addr: Ipv4Addr) -> str | None:
        for net, label in self.as_map.items():
            if addr in net:
                return label
        return None

    # -- internals ----------------------------------------------------------

    def _bfs(self, src: Ipv4Addr, dst: Ipv4Addr) -> tuple[Ipv4Addr, ...] | None:
        if src == dst:
            return ()
        if src not in self._adj or dst not in self._adj:
            return None
        parent: dict[Ipv4Addr, Ipv4Addr] = {src: src}
        queue = [src]
        endpoints = self.endpoint_addrs()
        while queue:
            nxt = []
            for node in queue:
                for nb in self._adj[node]:
                    if nb in parent:
                        continue
                    # endpoints do not forward traffic
                    if nb in endpoints and nb != dst:
                        continue
                    parent[nb] = node
                    if nb == dst:
                        hops = [nb]
                        while parent[hops[-1]] != src:
                            hops.append(parent[hops[-1]])
                        return tuple(reversed(hops))
                    nxt.append(nb)
            queue = nxt
        return None

    def _validate(self) -> None:
        seen: dict[Ipv4Addr, str] = {}
        dupes = []
        for addr, kind in [(r, "router") for r in self.routers] + [
            (s, "server") for s in self.servers
        ] + [(r, "resolver") for r in self.resolvers] + [
            (c.addr, "client") for c in self.clients.values()
        ]:
            if addr in seen:
                dupes.append(addr)
            seen[addr] = kind
        if dupes:
            raise ConfigError("duplicate addresses", dupes)

        used_routers: set[Ipv4Addr] = set()
        unreachable = []
        targets = list(self.servers) + list(self.resolvers)
        for client in self.clients.values():
            for dst in targets:
                p = self.path(client.addr, dst)
                if p is None:
                    unreachable.append(f"{client.name}->{dst}")
                else:
                    used_routers.update(h for h in p if h in self.routers)
        if unreachable:
            raise ConfigError("destinations unreachable", unreachable)
        idle = sorted(set(self.routers) - used_routers, key=int)
        if idle:
            raise ConfigError("routers on no client path", idle)
        for df in self.drop_filters:
            if df.attach not in self.routers:
                raise ConfigError("drop filter attached to non-router", [df.attach])


# ---------------------------------------------------------------------------
# JSON config ingestion


def _addr(value: str) -> Ipv4Addr:
    return IPv4Address(value)


def _pagespec(raw: dict) -> PageSpec:
    return PageSpec(
        body=raw.get("body", "").encode("utf-8"),
        title=raw.get("title"),
        header_fields=tuple(tuple(h) for h in raw.get("headers", (("Content-Type", "text/html"), ("Server", "nginx")))),
        dynamic=bool(raw.get("dynamic", False)),
    )


def build_topology(cfg: dict) -> Topology:
    """Build and validate a topology from its JSON-style config document.

    See README for the schema.  Raises :class:`ConfigError` listing offenders
    on duplicate addresses, disconnected graphs or routers on no path.
    """
    try:
        routers = [
            Router(_addr(r["addr"]), r.get("as", "AS-UNKNOWN"), bool(r.get("anonymized", False)))
            for r in cfg.get("routers", [])
        ]
        clients = [
            ClientConfig(
                c["name"],
                _addr(c["addr"]),
                tuple(IPv4Network(p) for p in c.get("as_prefixes", [])),
            )
            for c in cfg.get("clients", [])
        ]
        servers = [
            WebServerConfig(
                _addr(s["addr"]),
                {d.lower(): _pagespec(p) for d, p in s.get("pages", {}).items()},
                tuple(s.get("open_ports", (80,))),
                bool(s.get("controlled", False)),
                bool(s.get("down", False)),
            )
            for s in cfg.get("servers", [])
        ]
        resolvers = [
            ResolverConfig(
                _addr(r["addr"]),
                {d.lower(): _addr(a) for d, a in r.get("poisoned", {}).items()},
                {d.lower(): frozenset(_addr(a) for a in addrs) for d, addrs in r.get("honest", {}).items()},
            )
            for r in cfg.get("resolvers", [])
        ]
        links = [(_addr(a), _addr(b)) for a, b in cfg.get("links", [])]
        authority = {
            d: frozenset(_addr(a) for a in addrs) for d, addrs in cfg.get("authority", {}).items()
        }
        as_map = {IPv4Network(p): label for p, label in cfg.get("as_map", {}).items()}
        drop_filters = [
            DropFilterConfig(_addr(f["attach"]), tuple(IPv4Network(p) for p in f["dst_prefixes"]))
            for f in cfg.get("drop_filters", [])
        ]
    except (KeyError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"malformed topology config: {exc}") from exc
    return Topology(routers, clients, servers, resolvers, links, authority, as_map, drop_filters)


def config_digest(cfg: dict) -> str:
    """Stable digest of a config document, for report provenance."""
    canon = json.dumps(cfg, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()
