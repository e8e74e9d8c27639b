"""Radio link: NAS message shapes, deterministic delivery, taps, events.

Messages are immutable; the channel stamps a monotonically increasing step
on every send and delivers FIFO, so a run is a pure function of the
scenario and seed.  Taps see the same projection an over-the-air sniffer
would: cleartext fields in the visible projection, ciphered containers and
MACs only as opaque bytes on the captured envelope.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Union


class UnknownEndpoint(Exception):
    """Raised when sending to or from an unregistered entity."""


class NotObserved(Exception):
    """Raised when a tap query finds no matching capture."""


# --- NAS message union -------------------------------------------------


@dataclass(frozen=True)
class RegistrationRequestFast:
    guti: str
    ngksi: int
    ul_count: int
    container: bytes
    mac: bytes


@dataclass(frozen=True)
class RegistrationRequestInitial:
    identity: str
    sec_caps: tuple[str, ...]


@dataclass(frozen=True)
class IdentityRequest:
    pass


@dataclass(frozen=True)
class IdentityResponse:
    identity: str
    sec_caps: tuple[str, ...]


@dataclass(frozen=True)
class AuthRequest:
    rand: bytes
    autn: bytes


@dataclass(frozen=True)
class AuthResponse:
    res: bytes


@dataclass(frozen=True)
class SecurityModeCommand:
    selected_algs: tuple[str, ...]
    ngksi: int


@dataclass(frozen=True)
class SecurityModeComplete:
    mac: bytes


@dataclass(frozen=True)
class RegistrationAccept:
    ciphered: bytes


@dataclass(frozen=True)
class RegistrationReject:
    cause: str


@dataclass(frozen=True)
class Deregistration:
    guti: str


NasMessage = Union[
    RegistrationRequestFast,
    RegistrationRequestInitial,
    IdentityRequest,
    IdentityResponse,
    AuthRequest,
    AuthResponse,
    SecurityModeCommand,
    SecurityModeComplete,
    RegistrationAccept,
    RegistrationReject,
    Deregistration,
]

MSG_TYPE = {
    RegistrationRequestFast: "registration-request-fast",
    RegistrationRequestInitial: "registration-request-initial",
    IdentityRequest: "identity-request",
    IdentityResponse: "identity-response",
    AuthRequest: "authentication-request",
    AuthResponse: "authentication-response",
    SecurityModeCommand: "security-mode-command",
    SecurityModeComplete: "security-mode-complete",
    RegistrationAccept: "registration-accept",
    RegistrationReject: "registration-reject",
    Deregistration: "deregistration",
}


def observable_fields(msg: NasMessage) -> dict[str, str]:
    """Cleartext projection of a message, as a passive sniffer sees it.

    Ciphered containers and MAC tags are deliberately absent; replay works
    from the captured envelope, not from this projection.
    """
    if isinstance(msg, RegistrationRequestFast):
        return {"guti": msg.guti, "ngksi": str(msg.ngksi), "count": str(msg.ul_count)}
    if isinstance(msg, RegistrationRequestInitial):
        return {"identity": msg.identity, "caps": "+".join(msg.sec_caps)}
    if isinstance(msg, IdentityResponse):
        return {"identity": msg.identity, "caps": "+".join(msg.sec_caps)}
    if isinstance(msg, AuthRequest):
        return {"rand": msg.rand.hex(), "autn": msg.autn.hex()}
    if isinstance(msg, AuthResponse):
        return {"res": msg.res.hex()}
    if isinstance(msg, SecurityModeCommand):
        return {"algs": "+".join(msg.selected_algs), "ngksi": str(msg.ngksi)}
    if isinstance(msg, RegistrationReject):
        return {"cause": msg.cause}
    if isinstance(msg, Deregistration):
        return {"guti": msg.guti}
    return {}


# --- cleartext IE / payload codecs -------------------------------------


def encode_ies(guti: str, ngksi: int, ul_count: int) -> bytes:
    """Pack the fast-request cleartext IEs; also the container plaintext."""
    g = guti.encode("ascii")
    return len(g).to_bytes(2, "big") + g + bytes([ngksi]) + ul_count.to_bytes(4, "big")


def decode_ies(blob: bytes) -> tuple[str, int, int]:
    glen = int.from_bytes(blob[:2], "big")
    guti = blob[2 : 2 + glen].decode("ascii")
    ngksi = blob[2 + glen]
    ul_count = int.from_bytes(blob[3 + glen : 7 + glen], "big")
    return guti, ngksi, ul_count


def encode_accept_payload(guti: str, dl_count: int) -> bytes:
    g = guti.encode("ascii")
    return len(g).to_bytes(2, "big") + g + dl_count.to_bytes(4, "big")


def decode_accept_payload(blob: bytes) -> tuple[str, int]:
    glen = int.from_bytes(blob[:2], "big")
    guti = blob[2 : 2 + glen].decode("ascii")
    dl_count = int.from_bytes(blob[2 + glen : 6 + glen], "big")
    return guti, dl_count


# --- envelopes, taps, events -------------------------------------------


@dataclass(frozen=True)
class Envelope:
    step: int
    src: str
    dst: str
    bs: str
    flow: str
    msg: NasMessage


@dataclass(frozen=True)
class TapEntry:
    step: int
    src: str
    dst: str
    bs: str
    flow: str
    mtype: str
    fields: dict[str, str]
    envelope: Envelope

    def line(self) -> str:
        shown = " ".join("%s=%s" % kv for kv in self.fields.items())
        return ("%4d | %s->%s | %s | %s | %s" % (
            self.step,
            self.src,
            self.dst,
            self.bs,
            self.mtype,
            shown,
        )).rstrip()


class ChannelTap:
    """Passive capture of everything crossing the channel."""

    def __init__(self, name: str = "tap") -> None:
        self.name = name
        self.entries: list[TapEntry] = []

    def record(self, envelope: Envelope) -> None:
        self.entries.append(
            TapEntry(
                step=envelope.step,
                src=envelope.src,
                dst=envelope.dst,
                bs=envelope.bs,
                flow=envelope.flow,
                mtype=MSG_TYPE[type(envelope.msg)],
                fields=observable_fields(envelope.msg),
                envelope=envelope,
            )
        )

    def export_lines(self) -> list[str]:
        return [e.line() for e in self.entries]

    def fast_requests(self, src: str | None = None) -> list[TapEntry]:
        out = [e for e in self.entries if e.mtype == "registration-request-fast"]
        if src is not None:
            out = [e for e in out if e.src == src]
        return out

    def sniff_latest_guti(self, src: str) -> tuple[str, int]:
        """Latest (guti, ul_count) a given sender put on the air in clear."""
        for entry in reversed(self.fast_requests(src)):
            return entry.fields["guti"], int(entry.fields["count"])
        raise NotObserved("no fast registration seen from %s" % src)


@dataclass(frozen=True)
class Event:
    step: int
    entity: str
    name: str
    fields: dict[str, str]

    def line(self) -> str:
        shown = " ".join("%s=%s" % kv for kv in self.fields.items())
        return ("%4d %s %s %s" % (self.step, self.entity, self.name, shown)).rstrip()


class EventLog:
    """Ordered protocol-event record, stamped with the channel step."""

    def __init__(self, clock: "Channel") -> None:
        self._clock = clock
        self.entries: list[Event] = []

    def emit(self, entity: str, name: str, **fields: str) -> Event:
        event = Event(self._clock.step, entity, name, {k: str(v) for k, v in fields.items()})
        self.entries.append(event)
        return event

    def named(self, name: str) -> list[Event]:
        return [e for e in self.entries if e.name == name]

    def export_lines(self) -> list[str]:
        return [e.line() for e in self.entries]


class Channel:
    """FIFO radio link with a step clock; single ordered delivery."""

    def __init__(self) -> None:
        self.step = 0
        self.taps: list[ChannelTap] = []
        self.events = EventLog(self)
        self.drop_filter: Callable[[Envelope], bool] | None = None
        self._queue: deque[Envelope] = deque()
        self._handlers: dict[str, Callable[[Envelope], None]] = {}

    def register(self, name: str, handler: Callable[[Envelope], None]) -> None:
        self._handlers[name] = handler

    def send(self, src: str, dst: str, bs: str, flow: str, msg: NasMessage) -> Envelope:
        if src not in self._handlers:
            raise UnknownEndpoint("unknown sender %r" % src)
        if dst not in self._handlers:
            raise UnknownEndpoint("unknown receiver %r" % dst)
        self.step += 1
        envelope = Envelope(self.step, src, dst, bs, flow, msg)
        for tap in self.taps:
            tap.record(envelope)
        if self.drop_filter is not None and self.drop_filter(envelope):
            self.events.emit("channel", "dropped", dst=dst, mtype=MSG_TYPE[type(msg)])
            return envelope
        self._queue.append(envelope)
        return envelope

    def inject(self, captured: Envelope, bs: str | None = None) -> Envelope:
        """Replay a captured envelope byte-for-byte, at a fresh step.

        The attacker model allows recording and re-sending whole frames;
        src stays spoofed as the original sender.
        """
        return self.send(
            captured.src,
            captured.dst,
            bs if bs is not None else captured.bs,
            captured.flow,
            captured.msg,
        )

    def tick(self, steps: int = 1) -> None:
        """Advance the clock without traffic (idle air time)."""
        if steps < 0:
            raise ValueError("clock only moves forward")
        self.step += steps

    def pump(self) -> int:
        """Deliver until quiescent; returns the number of deliveries."""
        n = 0
        while self._queue:
            envelope = self._queue.popleft()
            self._handlers[envelope.dst](envelope)
            n += 1
        return n
