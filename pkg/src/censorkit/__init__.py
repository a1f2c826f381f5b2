"""censorkit: censorship-mechanism analysis over a deterministic simulator.

The package splits into wire-level message types (:mod:`censorkit.wire`),
the simulated censoring network (:mod:`censorkit.netsim`), the TTL-walking
tracer (:mod:`censorkit.tracer`), detection pipelines
(:mod:`censorkit.dns_detect`, :mod:`censorkit.http_detect`), measurement
metrics (:mod:`censorkit.metrics`), the evasion catalog
(:mod:`censorkit.evasion`) and the campaign CLI (:mod:`censorkit.cli`).
"""

__version__ = "0.1.0"
