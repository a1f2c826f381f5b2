from __future__ import annotations

import json
from pathlib import Path

import pytest

from censorkit.cli import main
from censorkit.netsim.scenarios import load_scenario
from censorkit.netsim.topology import config_digest

from conftest import small_chain_config


def test_classify_subcommand_writes_artifact(tmp_path):
    rc = main(["classify", "--scenario", "airtel_wm", "--seed", "5", "--out", str(tmp_path)])
    assert rc == 0
    doc = json.loads((tmp_path / "classify.json").read_text())
    assert doc["middlebox"]["kind"] == "WM"
    assert doc["middlebox"]["fixed_ip_id"] == 242
    assert doc["middlebox"]["fingerprint"] == "airtel.com/dot"
    assert doc["located_hop"] == 3
    assert doc["provenance"]["seed"] == 5
    assert len(doc["provenance"]["config_digest"]) == 64


def test_scan_dns_subcommand_counts(tmp_path):
    rc = main(["scan-dns", "--scenario", "bsnl_dns", "--seed", "2", "--out", str(tmp_path)])
    assert rc == 0
    doc = json.loads((tmp_path / "dns.json").read_text())
    assert len(doc["open_resolvers"]) == 182
    assert len(doc["censorious_resolvers"]) == 17
    assert doc["coverage"]["coverage"] == "0.093"
    assert doc["consistency"]["consistency"] == "0.075"
    assert set(doc["mechanism"].values()) == {"poisoning"}


def test_evade_and_report_merge(tmp_path):
    assert main(["evade", "--scenario", "idea_im", "--seed", "3", "--out", str(tmp_path)]) == 0
    assert main(["trace", "--scenario", "idea_im", "--seed", "3", "--out", str(tmp_path)]) == 0
    assert main(["report", "--scenario", "idea_im", "--seed", "3", "--out", str(tmp_path)]) == 0
    doc = json.loads((tmp_path / "report.json").read_text())
    assert set(doc["sections"]) == {"evade", "trace"}
    outcomes = {o["strategy"]: o["status"] for o in doc["sections"]["evade"]["outcomes"]}
    assert outcomes["HostWhitespace"] == "bypassed"


def test_report_with_nothing_to_merge_fails(tmp_path):
    assert main(["report", "--scenario", "idea_im", "--seed", "3", "--out", str(tmp_path)]) == 1


def test_unknown_scenario_and_missing_seed_are_config_errors(tmp_path):
    assert main(["classify", "--scenario", "nope", "--seed", "1", "--out", str(tmp_path)]) == 1
    assert main(["classify", "--scenario", "airtel_wm", "--out", str(tmp_path)]) == 1
    assert main(["classify", "--seed", "1", "--out", str(tmp_path)]) == 1


def test_config_file_scenario_pointer(tmp_path):
    cfg = tmp_path / "campaign.json"
    cfg.write_text(json.dumps({"scenario": "airtel_wm", "seed": 7}))
    rc = main(["classify", "--config", str(cfg), "--out", str(tmp_path)])
    assert rc == 0
    doc = json.loads((tmp_path / "classify.json").read_text())
    assert doc["provenance"]["seed"] == 7


def test_config_file_full_topology_document(tmp_path):
    doc = small_chain_config()
    doc["middleboxes"] = [
        {"archetype": "jio_wm", "attach": "81.0.0.2", "blocklist": ["blocked.example"]}
    ]
    doc["meta"] = {"client": "c1", "blocked_domain": "blocked.example", "pbw": ["blocked.example"]}
    cfg = tmp_path / "custom.json"
    cfg.write_text(json.dumps(doc))
    rc = main(["classify", "--config", str(cfg), "--seed", "4", "--out", str(tmp_path)])
    assert rc == 0
    got = json.loads((tmp_path / "classify.json").read_text())
    assert got["middlebox"]["kind"] == "WM"
    assert got["middlebox"]["fingerprint"] == "jio.fixed-redirect"


def test_shipped_scenario_config_files_load(tmp_path):
    configs = sorted(Path("src/censorkit/scenario_configs").glob("*.json"))
    assert len(configs) >= 18
    pointer = configs[0]
    rc = main(["trace", "--config", str(pointer), "--out", str(tmp_path)])
    assert rc == 0


def test_out_dir_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("CENSORKIT_OUT", str(tmp_path / "envout"))
    rc = main(["classify", "--scenario", "vodafone_im", "--seed", "2"])
    assert rc == 0
    assert (tmp_path / "envout" / "classify.json").exists()


def test_rerun_campaign_is_byte_identical(tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    for out in (out_a, out_b):
        assert main(["scan-http", "--scenario", "ooni_corpus", "--seed", "6", "--out", str(out)]) == 0
        assert main(["metrics", "--scenario", "idea_internal", "--seed", "6", "--out", str(out)]) == 0
        assert main(["report", "--scenario", "idea_internal", "--seed", "6", "--out", str(out)]) == 0
    for name in ("http.json", "metrics.json", "report.json", "review_queue.txt"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def test_tampered_config_changes_digest():
    a = load_scenario("airtel_wm", 1).config
    b = load_scenario("airtel_wm", 1).config
    assert config_digest(a) == config_digest(b)
    b_mutated = json.loads(json.dumps(b))
    b_mutated["middleboxes"][0]["blocklist"] = ["other.example"]
    assert config_digest(a) != config_digest(b_mutated)


def test_jobs_flag_partitions_work(tmp_path):
    rc = main(["scan-http", "--scenario", "ooni_corpus", "--seed", "6", "--out", str(tmp_path), "--jobs", "4"])
    assert rc == 0
    doc = json.loads((tmp_path / "http.json").read_text())
    assert len(doc["verdicts"]) == 200
