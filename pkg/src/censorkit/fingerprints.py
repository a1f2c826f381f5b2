"""Registry of known censorship-notification fingerprints.

Detectors never see middlebox configuration; they classify injected
responses by matching the delivered body against this registry, the same way
a field toolkit carries a database of known block-page signatures.  Each
entry ties a body pattern to the network operator believed to run it.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Fingerprint:
    name: str
    as_label: str
    body_pattern: bytes


class FingerprintRegistry:
    def __init__(self, entries=()):
        self._entries: list[Fingerprint] = list(entries)

    def add(self, fp: Fingerprint) -> None:
        self._entries.append(fp)

    def match(self, body: bytes) -> Fingerprint | None:
        for fp in self._entries:
            if fp.body_pattern and fp.body_pattern in body:
                return fp
        return None

    def by_name(self, name: str) -> Fingerprint | None:
        for fp in self._entries:
            if fp.name == name:
                return fp
        return None

    def __iter__(self):
        return iter(self._entries)


DEFAULT_REGISTRY = FingerprintRegistry(
    [
        Fingerprint("airtel.com/dot", "AS-AIRTEL", b"airtel.com/dot"),
        Fingerprint("jio.fixed-redirect", "AS-JIO", b"http://49.44.0.1/"),
        Fingerprint("idea.dot-notice", "AS-IDEA", b"blocked as per the instructions"),
        Fingerprint("vodafone.dot-notice", "AS-VODAFONE", b"blocked in compliance"),
    ]
)
