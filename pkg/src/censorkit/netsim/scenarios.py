"""Planted simulator scenarios with known ground truth.

Each builder returns a :class:`Scenario`: a JSON-able config document plus a
``meta`` dict recording what was planted (which resolvers are poisoned, where
the middlebox sits, which paths are covered).  Detectors must recover the
planted facts from observations alone; ``meta`` exists for tests and report
summaries.

The DNS grids are sized so the aggregate numbers work out exactly: the large
grid plants 448 resolvers with 383 poisoned and per-domain blocking counts
averaging 162.392/383, which makes the consistency metric exactly 0.424.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .middlebox import middlebox_from_config
from .sim import Simulator
from .topology import build_topology
from .client import ClientHandle


def simulator_from_config(cfg: dict) -> Simulator:
    topo = build_topology(cfg)
    mbs = [middlebox_from_config(m) for m in cfg.get("middleboxes", [])]
    return Simulator(topo, mbs, seed=int(cfg.get("seed", 0)))


@dataclass
class Scenario:
    name: str
    seed: int
    config: dict
    meta: dict = field(default_factory=dict)

    def build(self) -> Simulator:
        return simulator_from_config(self.config)

    def client(self, sim: Simulator, name: str | None = None) -> ClientHandle:
        return ClientHandle(sim, name or self.meta["client"])


class _Builder:
    def __init__(self, seed: int):
        self.cfg: dict = {
            "seed": seed,
            "routers": [],
            "clients": [],
            "servers": [],
            "resolvers": [],
            "links": [],
            "authority": {},
            "as_map": {},
            "middleboxes": [],
            "drop_filters": [],
        }

    def router(self, addr: str, as_label: str, anonymized: bool = False) -> str:
        self.cfg["routers"].append({"addr": addr, "as": as_label, "anonymized": anonymized})
        return addr

    def client(self, name: str, addr: str, prefixes) -> str:
        self.cfg["clients"].append({"name": name, "addr": addr, "as_prefixes": list(prefixes)})
        return addr

    def server(self, addr: str, pages: dict | None = None, **kw) -> str:
        entry = {"addr": addr, "pages": pages or {}}
        entry.update(kw)
        self.cfg["servers"].append(entry)
        return addr

    def host(self, domain: str, addr: str, body: str, **page_kw) -> str:
        self.server(addr, {domain: dict(body=body, **page_kw)})
        self.cfg["authority"][domain] = [addr]
        return addr

    def resolver(self, addr: str, poisoned: dict | None = None) -> str:
        self.cfg["resolvers"].append({"addr": addr, "poisoned": poisoned or {}})
        return addr

    def link(self, a: str, b: str) -> None:
        self.cfg["links"].append([a, b])

    def chain(self, *addrs: str) -> None:
        for a, b in zip(addrs, addrs[1:]):
            self.link(a, b)

    def asn(self, prefix: str, label: str) -> None:
        self.cfg["as_map"][prefix] = label

    def middlebox(self, **spec) -> None:
        self.cfg["middleboxes"].append(spec)


_ISP = {
    "airtel_wm": ("AS-AIRTEL", "125.16"),
    "jio_wm": ("AS-JIO", "49.44"),
    "idea_im": ("AS-IDEA", "106.67"),
    "vodafone_im": ("AS-VODAFONE", "203.89"),
}


# ---------------------------------------------------------------------------
# HTTP archetype paths


def http_archetype(
    archetype: str,
    seed: int = 0,
    routers: int = 5,
    attach_hop: int = 3,
    stateful: bool = True,
    anonymize_attach: bool = False,
    extra_blocked: tuple[str, ...] = (),
) -> Scenario:
    """One client, a linear router chain, one censor, and a few web hosts."""
    as_label, p16 = _ISP[archetype]
    b = _Builder(seed)
    b.asn(f"{p16}.0.0/16", as_label)
    b.asn("151.101.0.0/16", "AS-HOSTING")
    b.asn("93.184.216.0/24", "AS-CONTROLLED")
    client = b.client("c1", f"{p16}.1.10", [f"{p16}.0.0/16"])
    hops = [b.router(f"{p16}.0.{i}", as_label, anonymized=(anonymize_attach and i == attach_hop)) for i in range(1, routers + 1)]
    blocked = b.host("blocked.example", "151.101.1.10", "<p>forbidden knowledge page</p>")
    b.cfg["servers"][-1]["open_ports"] = [80, 8080]
    allowed = b.host("allowed.example", "151.101.1.11", "<p>cat pictures</p>")
    controlled = b.host("remote-probe.example", "93.184.216.34", "<p>our own box</p>")
    b.cfg["servers"][-1]["controlled"] = True
    b.cfg["servers"][-1]["open_ports"] = [80, 8080]
    b.chain(client, *hops)
    for srv in (blocked, allowed, controlled):
        b.link(hops[-1], srv)
    blocklist = ["blocked.example", *extra_blocked]
    b.middlebox(archetype=archetype, attach=hops[attach_hop - 1], blocklist=blocklist, stateful=stateful)
    meta = {
        "client": "c1",
        "blocked_domain": "blocked.example",
        "allowed_domain": "allowed.example",
        "blocked_dst": blocked,
        "allowed_dst": allowed,
        "controlled_dst": controlled,
        "attach_hop": attach_hop,
        "path_hops": routers + 1,
        "archetype": archetype,
        "as_label": as_label,
        "pbw": blocklist,
        "decoy_domain": "allowed.example",
        "expected": {
            "kind": "IM" if archetype.endswith("_im") else "WM",
            "covert": archetype == "vodafone_im",
            "fixed_ip_id": 242 if archetype == "airtel_wm" else None,
            "stateful": stateful,
        },
    }
    return Scenario(archetype if stateful else f"{archetype}_stateless", seed, b.cfg, meta)


def inspect_mode(mode: str, seed: int = 0, routers: int = 5, attach_hop: int = 3) -> Scenario:
    """Generic wiretap censor inspecting requests, responses, or both.

    The blocked page body mentions its own domain so response-side keyword
    matching has something to bite on.
    """
    b = _Builder(seed)
    b.asn("81.10.0.0/16", "AS-PROBE")
    b.asn("151.101.0.0/16", "AS-HOSTING")
    client = b.client("c1", "81.10.1.10", ["81.10.0.0/16"])
    hops = [b.router(f"81.10.0.{i}", "AS-PROBE") for i in range(1, routers + 1)]
    blocked = b.host("blocked.example", "151.101.2.10", "<p>latest from blocked.example newsroom</p>")
    allowed = b.host("allowed.example", "151.101.2.11", "<p>cat pictures</p>")
    b.chain(client, *hops)
    b.link(hops[-1], blocked)
    b.link(hops[-1], allowed)
    b.middlebox(
        name=f"probe_wm_{mode}",
        kind="WM",
        attach=hops[attach_hop - 1],
        blocklist=["blocked.example"],
        inspect=mode,
        notification={"html": "<p>Access restricted by the network operator.</p>"},
        send_rst_followup=True,
    )
    meta = {
        "client": "c1",
        "blocked_domain": "blocked.example",
        "blocked_dst": blocked,
        "attach_hop": attach_hop,
        "expected": {"inspect": mode},
    }
    return Scenario(f"inspect_{mode}", seed, b.cfg, meta)


# ---------------------------------------------------------------------------
# DNS grids


def _dns_grid(
    name: str,
    seed: int,
    as_label: str,
    p16: str,
    resolver_count: int,
    poisoned_count: int,
    domain_counts: list[int],
    offset_step: int,
) -> Scenario:
    rng = random.Random(seed)
    b = _Builder(seed)
    b.asn(f"{p16}.0.0/16", as_label)
    b.asn("151.101.0.0/16", "AS-HOSTING")
    b.asn("77.95.0.0/16", "AS-EXTERN")
    client = b.client("c1", f"{p16}.1.10", [f"{p16}.0.0/16"])
    r1 = b.router(f"{p16}.0.1", as_label)
    r2 = b.router(f"{p16}.0.2", as_label)
    r3 = b.router(f"{p16}.0.3", as_label)
    b.chain(client, r1, r2, r3)

    domains = [f"pbw-{i:03d}.example" for i in range(len(domain_counts))]
    for i, domain in enumerate(domains):
        addr = f"151.101.{10 + i // 250}.{1 + i % 250}"
        b.host(domain, addr, f"<p>genuine content of {domain}</p>")
        b.link(r3, addr)

    # two legitimately co-hosted sites: same address, not censorship
    shared_addr = "151.101.250.1"
    shared = ["shared-a.example", "shared-b.example"]
    b.server(shared_addr, {d: {"body": f"<p>{d} on shared hosting</p>"} for d in shared})
    for d in shared:
        b.cfg["authority"][d] = [shared_addr]
    b.link(r3, shared_addr)

    probe_domain = "well-known.example"
    probe_addr = b.host(probe_domain, "151.101.251.1", "<p>institutional homepage</p>")
    b.link(r3, probe_addr)

    blockpage = f"{p16}.255.10"
    b.server(blockpage)
    b.link(r3, blockpage)
    bogon = "100.64.0.9"

    poisoned_idx = sorted(rng.sample(range(resolver_count), poisoned_count))
    forged_answer = {d: (blockpage if j % 2 == 0 else bogon) for j, d in enumerate(domains)}
    blocked_by: dict[int, set[str]] = {i: set() for i in poisoned_idx}
    for j, count in enumerate(domain_counts):
        offset = (j * offset_step) % poisoned_count
        for i in range(count):
            idx = poisoned_idx[(offset + i) % poisoned_count]
            blocked_by[idx].add(domains[j])

    resolver_addrs = []
    base_third = 52
    for i in range(resolver_count):
        addr = f"{p16}.{base_third + (1 + i) // 256}.{(1 + i) % 256}"
        resolver_addrs.append(addr)
        poisoned_map = {d: forged_answer[d] for d in blocked_by.get(i, ())}
        b.resolver(addr, poisoned_map)
        b.link(r3, addr)

    alt_resolver = "77.95.53.53"
    b.resolver(alt_resolver)
    b.link(r3, alt_resolver)

    assert all(blocked_by[i] for i in poisoned_idx), "planted grid left a poisoned resolver empty"
    total_fraction_num = sum(domain_counts)
    meta = {
        "client": "c1",
        "pbw": domains + shared,
        "probe_domain": probe_domain,
        "known_answer": ["151.101.251.1"],
        "resolver_prefix": f"{p16}.{base_third}.0/23",
        "default_resolver": resolver_addrs[poisoned_idx[0]],
        "honest_resolver": resolver_addrs[next(i for i in range(resolver_count) if i not in blocked_by)]
        if poisoned_count < resolver_count
        else alt_resolver,
        "alt_resolver": alt_resolver,
        "whitelist": [shared_addr],
        "blockpage": blockpage,
        "path_hops": 4,
        "expected": {
            "resolver_count": resolver_count,
            "poisoned_count": poisoned_count,
            "poisoned_resolvers": [resolver_addrs[i] for i in poisoned_idx],
            "blocked_sets": {resolver_addrs[i]: sorted(blocked_by[i]) for i in poisoned_idx},
            "consistency_exact": [total_fraction_num, len(domain_counts) * poisoned_count],
            "mechanism": "poisoning",
        },
    }
    return Scenario(name, seed, b.cfg, meta)


def mtnl_dns(seed: int = 0) -> Scenario:
    # 76*162 + 49*163 = 20299 = 0.424 * 125 * 383 exactly
    counts = [162] * 76 + [163] * 49
    scenario = _dns_grid("mtnl_dns", seed, "AS-MTNL", "59.180", 448, 383, counts, offset_step=17)
    # the figure historically quoted for this grid's coverage disagrees with
    # 383/448; reports surface both, with the computed fraction authoritative
    scenario.meta["reference_coverage"] = "0.77"
    return scenario


def bsnl_dns(seed: int = 0) -> Scenario:
    # 29*1 + 11*2 = 51 = 0.075 * 40 * 17 exactly
    counts = [1] * 29 + [2] * 11
    return _dns_grid("bsnl_dns", seed, "AS-BSNL", "117.200", 182, 17, counts, offset_step=3)


def dns_injected(seed: int = 0) -> Scenario:
    """Honest resolvers, but an on-path injector forges answers at hop 2."""
    b = _Builder(seed)
    b.asn("61.8.0.0/16", "AS-INJ")
    b.asn("151.101.0.0/16", "AS-HOSTING")
    client = b.client("c1", "61.8.1.10", ["61.8.0.0/16"])
    r1, r2, r3 = (b.router(f"61.8.0.{i}", "AS-INJ") for i in (1, 2, 3))
    b.chain(client, r1, r2, r3)
    domains = [f"pbw-{i:03d}.example" for i in range(10)]
    for i, domain in enumerate(domains):
        addr = b.host(domain, f"151.101.30.{i + 1}", f"<p>content of {domain}</p>")
        b.link(r3, addr)
    resolvers = []
    for i in range(5):
        resolvers.append(b.resolver(f"61.8.53.{i + 1}"))
        b.link(r3, resolvers[-1])
    blockhole = b.server("61.8.255.10")
    b.link(r3, blockhole)
    b.middlebox(
        name="dns_injector",
        kind="WM",
        attach=r2,
        blocklist=domains,
        dns_forged_answer="61.8.255.10",
    )
    meta = {
        "client": "c1",
        "pbw": domains,
        "default_resolver": resolvers[0],
        "resolvers": resolvers,
        "path_hops": 4,
        "injector_hop": 2,
        "expected": {"mechanism": "injection"},
    }
    return Scenario("dns_injected", seed, b.cfg, meta)


# ---------------------------------------------------------------------------
# coverage plants


def _coverage_plant(name: str, seed: int, as_label: str, p16: str, total: int, poisoned: int, archetype: str) -> Scenario:
    b = _Builder(seed)
    b.asn(f"{p16}.0.0/16", as_label)
    b.asn("151.101.0.0/16", "AS-HOSTING")
    client = b.client("c1", f"{p16}.1.10", [f"{p16}.0.0/16"])
    r0 = b.router(f"{p16}.0.1", as_label)
    ra = b.router(f"{p16}.0.2", as_label)  # censored branch
    ra2 = b.router(f"{p16}.0.3", as_label)
    rb = b.router(f"{p16}.0.4", as_label)  # clean branch
    rb2 = b.router(f"{p16}.0.5", as_label)
    b.chain(client, r0)
    b.link(r0, ra)
    b.link(ra, ra2)
    b.link(r0, rb)
    b.link(rb, rb2)
    targets = []
    for i in range(total):
        domain = f"site-{i:04d}.example"
        addr = f"151.101.{32 + i // 250}.{1 + i % 250}"
        b.host(domain, addr, f"<p>{domain}</p>")
        targets.append(addr)
        b.link(ra2 if i < poisoned else rb2, addr)
    pbw = ["pbw-a.example", "pbw-b.example"]
    b.middlebox(archetype=archetype, name=f"{name}_mb", attach=ra, blocklist=pbw)
    meta = {
        "client": "c1",
        "targets": targets,
        "pbw": pbw,
        "expected": {"poisoned_paths": poisoned, "total_paths": total},
    }
    return Scenario(name, seed, b.cfg, meta)


def idea_internal(seed: int = 0) -> Scenario:
    return _coverage_plant("idea_internal", seed, "AS-IDEA", "106.67", 100, 92, "idea_im")


def jio_internal(seed: int = 0) -> Scenario:
    return _coverage_plant("jio_internal", seed, "AS-JIO", "49.44", 1000, 64, "jio_wm")


def vodafone_external(seed: int = 0) -> Scenario:
    """Forty /29 prefixes, two external vantages; one prefix sits behind the censor."""
    b = _Builder(seed)
    b.asn("203.89.0.0/16", "AS-VODAFONE")
    b.asn("77.95.0.0/16", "AS-EXTERN")
    v1 = b.client("v1", "77.95.1.10", ["77.95.0.0/16"])
    v2 = b.client("v2", "77.95.2.10", ["77.95.0.0/16"])
    e1 = b.router("77.95.0.1", "AS-EXTERN")
    core = b.router("203.89.0.1", "AS-VODAFONE")
    b.link(v1, e1)
    b.link(v2, e1)
    b.link(e1, core)
    prefixes = []
    pbw = ["pbw-a.example", "pbw-b.example"]
    censor_router = None
    for i in range(40):
        pr = b.router(f"203.89.{100 + i}.250", "AS-VODAFONE")
        b.link(core, pr)
        if i == 0:
            censor_router = pr
        prefixes.append(f"203.89.{100 + i}.0/29")
        for host_i in range(1, 5):
            addr = f"203.89.{100 + i}.{host_i}"
            b.server(addr, {f"host-{i}-{host_i}.example": {"body": "<p>ok</p>"}})
            b.link(pr, addr)
    b.middlebox(archetype="vodafone_im", attach=censor_router, blocklist=pbw)
    meta = {
        "client": "v1",
        "vantages": ["v1", "v2"],
        "prefixes": prefixes,
        "pbw": pbw,
        "expected": {"poisoned_paths": 4, "total_paths": 160, "coverage": "0.025"},
    }
    return Scenario("vodafone_external", seed, b.cfg, meta)


def jio_external(seed: int = 0) -> Scenario:
    """Censor on every path, but keyed to in-ISP source addresses only."""
    b = _Builder(seed)
    b.asn("49.44.0.0/16", "AS-JIO")
    b.asn("77.95.0.0/16", "AS-EXTERN")
    v1 = b.client("v1", "77.95.1.10", ["77.95.0.0/16"])
    cj = b.client("cj", "49.44.1.10", ["49.44.0.0/16"])
    e1 = b.router("77.95.0.1", "AS-EXTERN")
    core = b.router("49.44.0.1", "AS-JIO")
    core2 = b.router("49.44.0.2", "AS-JIO")
    b.link(v1, e1)
    b.link(e1, core)
    b.link(cj, core)
    b.link(core, core2)
    prefixes = []
    pbw = ["pbw-a.example", "pbw-b.example"]
    for i in range(8):
        pr = b.router(f"49.44.{100 + i}.250", "AS-JIO")
        b.link(core2, pr)
        prefixes.append(f"49.44.{100 + i}.0/29")
        for host_i in range(1, 5):
            addr = f"49.44.{100 + i}.{host_i}"
            b.server(addr, {f"host-{i}-{host_i}.example": {"body": "<p>ok</p>"}})
            b.link(pr, addr)
    b.middlebox(
        archetype="jio_wm",
        attach=core2,
        blocklist=pbw,
        source_prefixes=["49.44.0.0/16"],
    )
    meta = {
        "client": "v1",
        "vantages": ["v1"],
        "internal_client": "cj",
        "prefixes": prefixes,
        "pbw": pbw,
        "expected": {"external_coverage": "0.000"},
    }
    return Scenario("jio_external", seed, b.cfg, meta)


# ---------------------------------------------------------------------------
# collateral damage


def nkn_collateral(seed: int = 0, blocked_count: int = 69) -> Scenario:
    b = _Builder(seed)
    b.asn("14.139.0.0/16", "AS-NKN")
    b.asn("203.89.0.0/16", "AS-VODAFONE")
    b.asn("151.105.0.0/16", "AS-HOSTING")
    client = b.client("c1", "14.139.1.10", ["14.139.0.0/16"])
    n1 = b.router("14.139.0.1", "AS-NKN")
    n2 = b.router("14.139.0.2", "AS-NKN")
    t1 = b.router("203.89.0.1", "AS-VODAFONE")
    tx = b.router("203.89.0.2", "AS-VODAFONE", anonymized=True)
    t2 = b.router("203.89.0.3", "AS-VODAFONE")
    b.chain(client, n1, n2, t1, tx, t2)
    domains = [f"col-{i:03d}.example" for i in range(blocked_count)]
    for i, domain in enumerate(domains):
        addr = b.host(domain, f"151.105.{i // 250}.{1 + i % 250}", f"<p>{domain}</p>")
        b.link(t2, addr)
    safe = b.host("col-safe.example", "151.105.9.1", "<p>untouched</p>")
    b.link(t2, safe)
    b.middlebox(archetype="vodafone_im", attach=tx, blocklist=domains)
    meta = {
        "client": "c1",
        "victim_as": "AS-NKN",
        "pbw": domains,
        "safe_domain": "col-safe.example",
        "attach_hop": 4,
        "expected": {"attribution": {"AS-VODAFONE": blocked_count}},
    }
    return Scenario("nkn_collateral", seed, b.cfg, meta)


# ---------------------------------------------------------------------------
# detector-comparison corpus


def ooni_corpus(seed: int = 0, static_n: int = 120, dynamic_n: int = 50, censored_n: int = 30) -> Scenario:
    b = _Builder(seed)
    b.asn("106.67.0.0/16", "AS-IDEA")
    b.asn("151.106.0.0/16", "AS-HOSTING")
    client = b.client("c1", "106.67.1.10", ["106.67.0.0/16"])
    r1 = b.router("106.67.0.1", "AS-IDEA")
    r2 = b.router("106.67.0.2", "AS-IDEA")
    r3 = b.router("106.67.0.3", "AS-IDEA")
    b.chain(client, r1, r2, r3)
    static, dynamic, censored = [], [], []
    total = static_n + dynamic_n + censored_n
    for i in range(total):
        domain = f"site-{i:03d}.example"
        addr = f"151.106.{i // 250}.{1 + i % 250}"
        if i < static_n:
            b.host(domain, addr, f"<p>stable article body for {domain}</p>")
            static.append(domain)
        elif i < static_n + dynamic_n:
            b.host(domain, addr, f"<p>rolling front page of {domain}</p>", dynamic=True, title="Daily Briefing")
            dynamic.append(domain)
        else:
            b.host(domain, addr, f"<p>sensitive reporting from {domain}</p>")
            censored.append(domain)
        b.link(r3, addr)
    b.middlebox(archetype="idea_im", attach=r2, blocklist=censored)
    meta = {
        "client": "c1",
        "pbw": static + dynamic + censored,
        "static": static,
        "dynamic": dynamic,
        "censored": censored,
        "expected": {"censored_count": censored_n},
    }
    return Scenario("ooni_corpus", seed, b.cfg, meta)


# ---------------------------------------------------------------------------
# odds and ends


def transport_filter(seed: int = 0) -> Scenario:
    b = _Builder(seed)
    b.asn("62.40.0.0/16", "AS-TF")
    b.asn("151.103.0.0/16", "AS-HOSTING")
    client = b.client("c1", "62.40.1.10", ["62.40.0.0/16"])
    r1 = b.router("62.40.0.1", "AS-TF")
    r2 = b.router("62.40.0.2", "AS-TF")
    b.chain(client, r1, r2)
    filtered = b.host("filtered.example", "151.103.1.10", "<p>unreachable directly</p>")
    reachable = b.host("reachable.example", "151.103.1.11", "<p>fine</p>")
    dead = b.host("down.example", "151.103.1.12", "<p>gone</p>")
    b.cfg["servers"][-1]["down"] = True
    for srv in (filtered, reachable, dead):
        b.link(r2, srv)
    b.cfg["drop_filters"].append({"attach": r2, "dst_prefixes": ["151.103.1.10/32"]})
    meta = {
        "client": "c1",
        "filtered_domain": "filtered.example",
        "reachable_domain": "reachable.example",
        "down_domain": "down.example",
    }
    return Scenario("transport_filter", seed, b.cfg, meta)


def honest_path(seed: int = 0) -> Scenario:
    b = _Builder(seed)
    b.asn("81.20.0.0/16", "AS-PLAIN")
    b.asn("151.101.0.0/16", "AS-HOSTING")
    client = b.client("c1", "81.20.1.10", ["81.20.0.0/16"])
    r1 = b.router("81.20.0.1", "AS-PLAIN")
    r2 = b.router("81.20.0.2", "AS-PLAIN")
    b.chain(client, r1, r2)
    site = b.host("blocked.example", "151.101.40.10", "<p>nothing blocked here</p>")
    b.link(r2, site)
    resolver = b.resolver("81.20.53.1")
    b.link(r2, resolver)
    meta = {"client": "c1", "pbw": ["blocked.example"], "default_resolver": resolver}
    return Scenario("honest_path", seed, b.cfg, meta)


def random_localization(seed: int) -> Scenario:
    """Randomized chain length, attach hop and archetype, for localization sweeps."""
    rng = random.Random(seed)
    routers = rng.randint(5, 15)
    attach = rng.randint(1, routers)
    archetype = rng.choice(sorted(_ISP))
    scenario = http_archetype(archetype, seed=seed, routers=routers, attach_hop=attach)
    scenario.name = f"random_localization_{seed}"
    scenario.meta["expected"]["attach_hop"] = attach
    return scenario


SCENARIOS = {
    "airtel_wm": lambda seed=0: http_archetype("airtel_wm", seed),
    "jio_wm": lambda seed=0: http_archetype("jio_wm", seed),
    "idea_im": lambda seed=0: http_archetype("idea_im", seed),
    "vodafone_im": lambda seed=0: http_archetype("vodafone_im", seed),
    "inspect_request_only": lambda seed=0: inspect_mode("request_only", seed),
    "inspect_response_only": lambda seed=0: inspect_mode("response_only", seed),
    "inspect_both": lambda seed=0: inspect_mode("both", seed),
    "mtnl_dns": mtnl_dns,
    "bsnl_dns": bsnl_dns,
    "dns_injected": dns_injected,
    "idea_internal": idea_internal,
    "jio_internal": jio_internal,
    "vodafone_external": vodafone_external,
    "jio_external": jio_external,
    "nkn_collateral": nkn_collateral,
    "ooni_corpus": ooni_corpus,
    "transport_filter": transport_filter,
    "honest_path": honest_path,
}


def load_scenario(name: str, seed: int = 0) -> Scenario:
    try:
        return SCENARIOS[name](seed)
    except KeyError:
        raise KeyError(f"unknown scenario {name!r}; known: {', '.join(sorted(SCENARIOS))}") from None
