"""Campaign CLI: run scans over a scenario (or custom config) and emit reports.

Every subcommand writes one JSON artifact into the output directory plus a
human-readable summary on stdout.  Artifacts carry a provenance block (seed,
config digest, toolkit version) and contain no timestamps, so rerunning an
identical campaign produces byte-identical files.  ``report`` merges whatever
artifacts already exist into one document with plot-ready TSV data.

Exit codes: 0 success, 1 configuration error, 2 partial failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from ipaddress import IPv4Address
from pathlib import Path

from . import __version__
from .dns_detect import (
    censorious_from_verdicts,
    discover_resolvers,
    scan_many,
    trace_dns_mechanism,
    verdicts_to_csv,
)
from .evasion import evaluate_catalog, full_catalog, strategy_name
from .http_detect import (
    DiffStatus,
    DiffVerdict,
    TransportVerdict,
    baseline_classify,
    classify_middlebox,
    collect_evidence,
    scan_http_domain,
)
from .metrics import (
    Scope,
    attribute_collateral,
    consistency,
    coverage,
    http_coverage_external,
    http_coverage_internal,
    precision_recall,
    render_fraction,
)
from .netsim.client import ClientHandle
from .netsim.scenarios import SCENARIOS, Scenario, load_scenario, simulator_from_config
from .netsim.topology import ConfigError, config_digest
from .tracer import http_trace, render_trace
from .wire import Ipv4Addr

_SUBCOMMANDS = ("scan-dns", "scan-http", "trace", "classify", "evade", "metrics", "report")


class CampaignError(RuntimeError):
    def __init__(self, message: str, exit_code: int = 1):
        super().__init__(message)
        self.exit_code = exit_code


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="censorkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"censorkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", help="named scenario from the shipped library")
        p.add_argument("--config", help="path to a campaign config JSON document")
        p.add_argument("--seed", type=int, default=None, help="campaign seed (mandatory unless the config embeds one)")
        p.add_argument("--out", default=None, help="output directory (or set CENSORKIT_OUT)")
        p.add_argument("--jobs", type=int, default=1, help="concurrent campaign items")
        p.add_argument("--domain", default=None, help="override the domain under test")
        if name == "evade":
            p.add_argument("--matrix", action="store_true", help="run the catalog against all four archetypes")
    return parser


def _load_campaign(args) -> tuple[Scenario, int]:
    seed = args.seed
    if args.config:
        config_path = Path(args.config)
        doc = json.loads(config_path.read_text())
        if seed is None:
            seed = doc.get("seed")
        if seed is None:
            raise CampaignError("seed is mandatory: pass --seed or embed one in the config")
        seed = int(seed)
        if "scenario" in doc:
            scenario = load_scenario(doc["scenario"], seed)
        else:
            doc["seed"] = seed
            scenario = Scenario("custom", seed, doc, doc.get("meta", {}))
        pbw_file = doc.get("pbw_file")
        if pbw_file:
            pbw_path = Path(pbw_file)
            if not pbw_path.is_absolute():
                pbw_path = config_path.parent / pbw_path
            lines = [ln.strip().lower() for ln in pbw_path.read_text().splitlines()]
            scenario.meta["pbw"] = [ln for ln in lines if ln and not ln.startswith("#")]
        return scenario, seed
    if args.scenario:
        if args.scenario not in SCENARIOS:
            raise CampaignError(f"unknown scenario {args.scenario!r}; known: {', '.join(sorted(SCENARIOS))}")
        if seed is None:
            raise CampaignError("seed is mandatory: pass --seed")
        return load_scenario(args.scenario, int(seed)), int(seed)
    raise CampaignError("pass --scenario or --config")


def _outdir(args) -> Path:
    out = args.out or os.environ.get("CENSORKIT_OUT")
    if not out:
        raise CampaignError("pass --out or set CENSORKIT_OUT")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _provenance(scenario: Scenario, seed: int) -> dict:
    return {
        "toolkit_version": __version__,
        "scenario": scenario.name,
        "seed": seed,
        "config_digest": config_digest(scenario.config),
    }


def _write_json(outdir: Path, name: str, payload: dict) -> Path:
    path = outdir / name
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return path


def _chunks(items: list, jobs: int) -> list[list]:
    jobs = max(1, jobs)
    buckets = [items[i::jobs] for i in range(jobs)]
    return [b for b in buckets if b]


def _diff_verdict_json(verdict) -> dict:
    if isinstance(verdict, TransportVerdict):
        return {"status": verdict.value}
    return {
        "status": verdict.status.value,
        "difference": round(verdict.difference, 6),
        "fingerprint": verdict.fingerprint,
    }


# ---------------------------------------------------------------------------
# subcommands


def _cmd_scan_dns(scenario: Scenario, seed: int, outdir: Path, jobs: int, domain: str | None) -> int:
    meta = scenario.meta
    for key in ("resolver_prefix", "probe_domain", "known_answer", "pbw"):
        if key not in meta:
            raise CampaignError(f"scenario {scenario.name} has no DNS scan surface ({key} missing)")
    sim = scenario.build()
    client = scenario.client(sim)
    resolvers = discover_resolvers(
        client, meta["resolver_prefix"], meta["probe_domain"], {IPv4Address(a) for a in meta["known_answer"]}
    )
    whitelist = frozenset(IPv4Address(a) for a in meta.get("whitelist", ()))
    pbw = list(meta["pbw"])

    def scan_chunk(chunk):
        own_sim = scenario.build()
        own_client = scenario.client(own_sim)
        return scan_many(own_client, chunk, pbw, whitelist)

    verdicts = []
    for part in ThreadPoolExecutor(max_workers=max(1, jobs)).map(scan_chunk, _chunks(resolvers, jobs)):
        verdicts.extend(part)
    censorious = censorious_from_verdicts(verdicts)

    mechanisms = {}
    for resolver in sorted(censorious, key=int):
        probe_domain = sorted(censorious[resolver])[0]
        mechanism, _ = trace_dns_mechanism(client, resolver, probe_domain)
        mechanisms[str(resolver)] = mechanism.value

    cov = coverage(set(censorious), set(resolvers), Scope.DNS_RESOLVERS)
    cons = consistency(censorious, set(censorious)) if censorious else None
    payload = {
        "provenance": _provenance(scenario, seed),
        "open_resolvers": sorted(str(r) for r in resolvers),
        "censorious_resolvers": {str(r): sorted(ds) for r, ds in censorious.items()},
        "mechanism": mechanisms,
        "coverage": cov.to_json(),
        "consistency": cons.to_json() if cons else None,
    }
    if meta.get("reference_coverage"):
        payload["coverage_reference"] = {
            "computed": cov.rendered,
            "previously_reported": meta["reference_coverage"],
            "note": "computed fraction from counts differs from the previously reported figure; counts take precedence",
        }
    path = _write_json(outdir, "dns.json", payload)
    (outdir / "dns_verdicts.csv").write_text(verdicts_to_csv(verdicts), encoding="utf-8")
    print(f"scan-dns: {len(resolvers)} open resolvers, {len(censorious)} censorious, coverage {cov.rendered}")
    if cons:
        print(f"scan-dns: consistency {cons.rendered}")
    print(f"scan-dns: wrote {path}")
    return 0


def _cmd_scan_http(scenario: Scenario, seed: int, outdir: Path, jobs: int, domain: str | None) -> int:
    meta = scenario.meta
    domains = [domain] if domain else list(meta.get("pbw", ()))
    if not domains:
        raise CampaignError(f"scenario {scenario.name} lists no domains to scan")

    def scan_one(client, d):
        from censorkit.http_detect import classify_http, detect_transport_filtering
        from censorkit.netsim.sim import TransportError

        clean_result = client.clean().fetch(d)
        try:
            direct_result = client.fetch(d)
        except TransportError:
            direct_result = None
        if direct_result is None or direct_result.first is None:
            verdict = detect_transport_filtering(client, d)
            return _diff_verdict_json(verdict)
        verdict = classify_http(d, direct_result.first, clean_result.first)
        row = _diff_verdict_json(verdict)
        row["direct_digest"] = hashlib.sha256(direct_result.first.body).hexdigest()
        row["clean_digest"] = hashlib.sha256(clean_result.first.body).hexdigest()
        return row

    def scan_chunk(chunk):
        own_sim = scenario.build()
        own_client = scenario.client(own_sim)
        rows = []
        for d in chunk:
            try:
                rows.append((d, scan_one(own_client, d), None))
            except Exception as exc:
                rows.append((d, None, f"{type(exc).__name__}: {exc}"))
        return rows

    results: dict[str, dict] = {}
    failures: dict[str, str] = {}
    for part in ThreadPoolExecutor(max_workers=max(1, jobs)).map(scan_chunk, _chunks(domains, jobs)):
        for d, verdict, err in part:
            if err is None:
                results[d] = verdict
            else:
                failures[d] = err
    review = sorted(d for d, v in results.items() if v.get("status") == DiffStatus.NEEDS_REVIEW.value)
    queue_path = outdir / "review_queue.txt"
    queue_path.write_text(
        "".join(
            f"{d}\tdifference={results[d]['difference']:.6f}"
            f"\tdirect={results[d]['direct_digest'][:16]}\tclean={results[d]['clean_digest'][:16]}\n"
            for d in review
        ),
        encoding="utf-8",
    )
    payload = {
        "provenance": _provenance(scenario, seed),
        "verdicts": dict(sorted(results.items())),
        "failures": dict(sorted(failures.items())),
        "review_queue": review,
    }
    path = _write_json(outdir, "http.json", payload)
    counts: dict[str, int] = {}
    for v in results.values():
        counts[v["status"]] = counts.get(v["status"], 0) + 1
    print(f"scan-http: {len(results)} scanned {dict(sorted(counts.items()))}, {len(review)} queued for review")
    print(f"scan-http: wrote {path}")
    return 2 if failures else 0


def _cmd_trace(scenario: Scenario, seed: int, outdir: Path, jobs: int, domain: str | None) -> int:
    meta = scenario.meta
    sim = scenario.build()
    client = scenario.client(sim)
    target = domain or meta.get("blocked_domain") or (meta.get("pbw") or [None])[0]
    if target is None:
        raise CampaignError(f"scenario {scenario.name} offers nothing to trace")
    answers = client.resolve_clean(target)
    if not answers:
        raise CampaignError(f"no authoritative address for {target}")
    dst = sorted(answers, key=int)[0]
    trace = http_trace(client, target, dst)
    payload = {
        "provenance": _provenance(scenario, seed),
        "domain": target,
        "dst": str(dst),
        "hops": [str(h) for h in trace.hops],
        "records": [json.loads(line) for line in trace.to_jsonl().splitlines()],
    }
    path = _write_json(outdir, "trace.json", payload)
    print(render_trace(trace))
    print(f"trace: wrote {path}")
    return 0


def _cmd_classify(scenario: Scenario, seed: int, outdir: Path, jobs: int, domain: str | None) -> int:
    meta = scenario.meta
    sim = scenario.build()
    client = scenario.client(sim)
    target = domain or meta.get("blocked_domain")
    if target is None:
        raise CampaignError(f"scenario {scenario.name} names no blocked domain to classify against")
    dst = sorted(client.resolve_clean(target), key=int)[0]
    evidence = collect_evidence(client, dst, target)
    mc = classify_middlebox(evidence)
    payload = {
        "provenance": _provenance(scenario, seed),
        "domain": target,
        "middlebox": {
            "kind": mc.kind.value,
            "visibility": mc.visibility.value,
            "stateful": mc.stateful,
            "port_scope": mc.port_scope.value,
            "fingerprint": mc.fingerprint,
            "fixed_ip_id": mc.fixed_ip_id,
        },
        "located_hop": evidence.trace.censor_ttls()[0] if evidence.trace.censor_ttls() else None,
        "evidence": {
            "trace": [json.loads(line) for line in evidence.trace.to_jsonl().splitlines()],
            "triggered_flows": len(evidence.transcripts),
            "statefulness": evidence.statefulness.value if evidence.statefulness else None,
            "nonstandard_port_triggered": evidence.nonstandard_port_triggered,
            "server_receipt_datagrams": evidence.server_receipt_datagrams,
        },
    }
    path = _write_json(outdir, "classify.json", payload)
    print(
        f"classify: {mc.kind.value} {mc.visibility.value} stateful={mc.stateful} "
        f"port_scope={mc.port_scope.value} fingerprint={mc.fingerprint!r} fixed_ip_id={mc.fixed_ip_id}"
    )
    print(f"classify: wrote {path}")
    return 0


def _run_catalog(scenario: Scenario, domain: str | None):
    meta = scenario.meta
    sim = scenario.build()
    client = scenario.client(sim)
    target = domain or meta.get("blocked_domain") or (meta.get("pbw") or [None])[0]
    if target is None:
        raise CampaignError(f"scenario {scenario.name} names no domain to evade for")
    decoy = meta.get("decoy_domain", "allowed.example")
    alt = meta.get("alt_resolver")
    resolver = meta.get("default_resolver")
    catalog = full_catalog(decoy, IPv4Address(alt) if alt else None, ip_id=242)
    outcomes = evaluate_catalog(client, target, catalog, IPv4Address(resolver) if resolver else None)
    return target, outcomes


def _cmd_evade(scenario: Scenario, seed: int, outdir: Path, jobs: int, domain: str | None, matrix: bool = False) -> int:
    if matrix:
        rows: dict[str, dict[str, str]] = {}
        for archetype in ("airtel_wm", "jio_wm", "idea_im", "vodafone_im"):
            _, outcomes = _run_catalog(load_scenario(archetype, seed), domain)
            rows[archetype] = {strategy_name(o.strategy): o.status.value for o in outcomes}
        payload = {"provenance": _provenance(scenario, seed), "matrix": rows}
        path = _write_json(outdir, "evade.json", payload)
        strategies = list(next(iter(rows.values())))
        width = max(len(s) for s in strategies)
        header = " " * (width + 2) + "  ".join(f"{a:<12}" for a in rows)
        print(f"evade: {header}")
        for strategy in strategies:
            cells = "  ".join(f"{'pass' if rows[a][strategy] == 'bypassed' else 'fail':<12}" for a in rows)
            print(f"evade: {strategy:<{width}}  {cells}")
        print(f"evade: wrote {path}")
        return 0
    target, outcomes = _run_catalog(scenario, domain)
    payload = {
        "provenance": _provenance(scenario, seed),
        "domain": target,
        "outcomes": [o.to_json() for o in outcomes],
    }
    path = _write_json(outdir, "evade.json", payload)
    width = max(len(strategy_name(o.strategy)) for o in outcomes)
    for o in outcomes:
        print(f"evade: {strategy_name(o.strategy):<{width}}  {o.status.value}")
    print(f"evade: wrote {path}")
    return 0 if any(o.bypassed for o in outcomes) else 2


def _cmd_metrics(scenario: Scenario, seed: int, outdir: Path, jobs: int, domain: str | None) -> int:
    meta = scenario.meta
    payload: dict = {"provenance": _provenance(scenario, seed)}
    summaries = []
    sim = scenario.build()
    if "targets" in meta:
        client = scenario.client(sim)
        report = http_coverage_internal(client, [IPv4Address(a) for a in meta["targets"]], meta["pbw"])
        payload["http_coverage_internal"] = report.to_json()
        summaries.append(f"internal coverage {report.rendered}")
    if "prefixes" in meta and "vantages" in meta:
        vantages = [ClientHandle(sim, n) for n in meta["vantages"]]
        report = http_coverage_external(vantages, meta["prefixes"], meta["pbw"], seed)
        payload["http_coverage_external"] = report.to_json()
        summaries.append(f"external coverage {report.rendered}")
    if "censored" in meta:
        client = scenario.client(sim)
        clean = client.clean()
        baseline_flagged, ours_confirmed = set(), set()
        for d in meta["pbw"]:
            control = clean.fetch(d).first
            experiment = client.fetch(d).first
            if baseline_classify(control, experiment).blocked:
                baseline_flagged.add(d)
            verdict = scan_http_domain(client, d)
            if isinstance(verdict, DiffVerdict) and verdict.status is DiffStatus.CONFIRMED_BLOCKED:
                ours_confirmed.add(d)
        truth = set(meta["censored"])
        baseline_pr = precision_recall(baseline_flagged, truth) if baseline_flagged else None
        ours_pr = precision_recall(ours_confirmed, truth) if ours_confirmed else None
        payload["detector_comparison"] = {
            "baseline": baseline_pr.to_json() if baseline_pr else None,
            "toolkit_confirmed": ours_pr.to_json() if ours_pr else None,
        }
        if baseline_pr:
            summaries.append(
                f"baseline precision {render_fraction(baseline_pr.precision)} recall {render_fraction(baseline_pr.recall)}"
            )
        if ours_pr:
            summaries.append(
                f"toolkit precision {render_fraction(ours_pr.precision)} recall {render_fraction(ours_pr.recall)}"
            )
    if "victim_as" in meta:
        client = scenario.client(sim)
        evidence = []
        for d in meta["pbw"]:
            dst = sorted(client.resolve_clean(d), key=int)[0]
            evidence.append(collect_evidence(client, dst, d, trials=1, full=False))
        attribution = attribute_collateral(client, evidence)
        payload["collateral"] = attribution.to_json()
        summaries.append(f"collateral attributions {attribution.to_json()['attributions']}")
    if len(payload) == 1:
        raise CampaignError(f"scenario {scenario.name} offers no metric surface")
    path = _write_json(outdir, "metrics.json", payload)
    for s in summaries:
        print(f"metrics: {s}")
    print(f"metrics: wrote {path}")
    return 0


_MERGEABLE = ("dns.json", "http.json", "trace.json", "classify.json", "evade.json", "metrics.json")


def _cmd_report(scenario: Scenario, seed: int, outdir: Path, jobs: int, domain: str | None) -> int:
    merged: dict = {"provenance": _provenance(scenario, seed), "sections": {}}
    for name in _MERGEABLE:
        path = outdir / name
        if path.exists():
            merged["sections"][name.removesuffix(".json")] = json.loads(path.read_text())
    if not merged["sections"]:
        raise CampaignError("nothing to merge: run some scans into this output directory first")
    tsv_rows = None
    dns_section = merged["sections"].get("dns")
    if dns_section and dns_section.get("consistency"):
        per_domain = dns_section["consistency"]["per_domain"]
        tsv_rows = ["domain_id\tfraction"]
        for idx, d in enumerate(sorted(per_domain)):
            tsv_rows.append(f"{idx}\t{per_domain[d]}")
    path = _write_json(outdir, "report.json", merged)
    if tsv_rows:
        (outdir / "consistency.tsv").write_text("\n".join(tsv_rows) + "\n", encoding="utf-8")
        print(f"report: wrote {outdir / 'consistency.tsv'}")
    print(f"report: merged {sorted(merged['sections'])} into {path}")
    return 0


_HANDLERS = {
    "scan-dns": _cmd_scan_dns,
    "scan-http": _cmd_scan_http,
    "trace": _cmd_trace,
    "classify": _cmd_classify,
    "evade": _cmd_evade,
    "metrics": _cmd_metrics,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        scenario, seed = _load_campaign(args)
        outdir = _outdir(args)
        if args.command == "evade":
            return _cmd_evade(scenario, seed, outdir, args.jobs, args.domain, matrix=getattr(args, "matrix", False))
        return _HANDLERS[args.command](scenario, seed, outdir, args.jobs, args.domain)
    except CampaignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ConfigError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
