"""Deterministic censoring-network simulator: ground truth for the detectors."""

from .client import ClientHandle, FetchResult, FlowHandle, UnsupportedSchemeError, first_addr
from .middlebox import (
    ARCHETYPES,
    Injection,
    Inspect,
    IpIdPolicy,
    MbKind,
    MiddleboxConfig,
    MiddleboxRuntime,
    NotificationConfig,
    airtel_wm,
    idea_im,
    jio_wm,
    vodafone_im,
)
from .sim import (
    DropRule,
    Event,
    EventKind,
    Simulator,
    TransportError,
    UnroutableError,
    Vantage,
    event_to_json,
    events_to_jsonl,
)
from .topology import (
    ANONYMIZED,
    ClientConfig,
    ConfigError,
    DropFilterConfig,
    PageSpec,
    ResolverConfig,
    Router,
    Topology,
    WebServerConfig,
    build_topology,
    config_digest,
)

__all__ = [
    "ANONYMIZED",
    "ARCHETYPES",
    "ClientConfig",
    "ClientHandle",
    "ConfigError",
    "DropFilterConfig",
    "DropRule",
    "Event",
    "EventKind",
    "FetchResult",
    "FlowHandle",
    "Injection",
    "Inspect",
    "IpIdPolicy",
    "MbKind",
    "MiddleboxConfig",
    "MiddleboxRuntime",
    "NotificationConfig",
    "PageSpec",
    "ResolverConfig",
    "Router",
    "Simulator",
    "Topology",
    "TransportError",
    "UnroutableError",
    "UnsupportedSchemeError",
    "Vantage",
    "WebServerConfig",
    "airtel_wm",
    "build_topology",
    "config_digest",
    "event_to_json",
    "events_to_jsonl",
    "first_addr",
    "idea_im",
    "jio_wm",
    "vodafone_im",
]
