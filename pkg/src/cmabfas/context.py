"""SIP-header context space: header vectors, call classes and the header metric."""

from __future__ import annotations

from dataclasses import dataclass
from operator import eq
from typing import Sequence

N_ATTRIBUTES = 16

# Slot names follow the order in which attributes are pulled out of an INVITE.
ATTRIBUTE_NAMES = (
    "source_ip",
    "via_host",
    "from_user",
    "from_host",
    "contact_host",
    "contact_user",
    "to_host",
    "to_user",
    "request_host",
    "request_user",
    "user_agent",
    "via_received",
    "server_agent",
    "record_route_host",
    "source_port",
    "codec",
)

CLASS_LABELS = ("normal", "honeypot", "voipbot", "warvox", "spitter")


@dataclass(frozen=True, slots=True)
class SipHeader:
    """A call context: exactly 16 opaque attribute strings, compared byte-for-byte."""

    attributes: tuple[str, ...]

    def __post_init__(self) -> None:
        attrs = self.attributes
        if not isinstance(attrs, tuple):
            attrs = tuple(attrs)
            object.__setattr__(self, "attributes", attrs)
        if len(attrs) != N_ATTRIBUTES:
            raise ValueError(f"SipHeader needs {N_ATTRIBUTES} attributes, got {len(attrs)}")
        for value in attrs:
            if not isinstance(value, str):
                raise TypeError(f"header attributes must be str, got {type(value).__name__}")

    @classmethod
    def of(cls, values: Sequence[str]) -> SipHeader:
        return cls(tuple(values))


@dataclass(frozen=True, slots=True)
class CallClass:
    label: str

    def __post_init__(self) -> None:
        if self.label not in CLASS_LABELS:
            raise ValueError(f"unknown call class {self.label!r}")

    @property
    def is_spit(self) -> bool:
        return self.label != "normal"


@dataclass(frozen=True, slots=True)
class LabeledCall:
    """A header together with its ground-truth class.

    Only the environment and the metrics look at ``call_class``; learners are
    handed ``header`` alone.
    """

    header: SipHeader
    call_class: CallClass


def hamming_agreement(x: SipHeader, y: SipHeader) -> int:
    """Number of attribute positions where ``x`` and ``y`` hold identical strings."""
    return sum(1 for a, b in zip(x.attributes, y.attributes) if a == b)


def distance_from_agreement(agreement: int) -> float:
    if agreement >= N_ATTRIBUTES:
        return 0.0
    return 2.0 ** -agreement


def distance(x: SipHeader, y: SipHeader) -> float:
    """Header distance: 0 for identical headers, else 2**-(number of agreeing attributes).

    Symmetric and zero only on identical headers; the triangle inequality does
    not hold in general and nothing downstream relies on it.
    """
    return distance_from_agreement(hamming_agreement(x, y))


class HeaderIndex:
    """Interns headers to dense integer ids.

    Each header is also stored as a tuple of integer codes (one per slot), so
    agreement between two interned headers is a comparison of small ints.
    """

    def __init__(self) -> None:
        # Keyed by the attribute tuple: its hash runs in C, unlike the dataclass one.
        self._ids: dict[tuple[str, ...], int] = {}
        self.headers: list[SipHeader] = []
        self.codes: list[tuple[int, ...]] = []
        self._value_codes: dict[str, int] = {}

    def __len__(self) -> int:
        return len(self.headers)

    def intern(self, header: SipHeader) -> int:
        key = header.attributes
        hid = self._ids.get(key)
        if hid is None:
            hid = len(self.headers)
            self._ids[key] = hid
            self.headers.append(header)
            vc = self._value_codes
            self.codes.append(tuple(vc.setdefault(v, len(vc)) for v in header.attributes))
        return hid

    def agreement(self, i: int, j: int) -> int:
        if i == j:
            return N_ATTRIBUTES
        return sum(map(eq, self.codes[i], self.codes[j]))
