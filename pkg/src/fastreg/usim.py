"""USIM card emulation: elementary files, access conditions, PIN, AKA.

File layout mirrors the handful of files the registration procedure
touches:

    6F07  IMSI            subscriber permanent identity
    6FE3  EPSLOCI         4G location info (GUTI)
    6FE4  EPSNSC          4G NAS security context
    4F01  5GS3GPPLOCI     5G location info (only on 5G-capable cards)
    4F03  5GS3GPPNSC      5G NAS security context (only on 5G-capable cards)

Each file carries one read and one update condition (ALW / PIN / ADM /
NEV).  Card access happens through sessions: a baseband session holds the
card's ADM credential implicitly, a reader session never does.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from random import Random

from . import crypto
from .crypto import Key, KeyKind

EF_IMSI = 0x6F07
EF_EPSLOCI = 0x6FE3
EF_EPSNSC = 0x6FE4
EF_5GLOCI = 0x4F01
EF_5GNSC = 0x4F03

DEFAULT_RETRY_LIMIT = 3

LOCI_FILES = {"4G": EF_EPSLOCI, "5G": EF_5GLOCI}
NSC_FILES = {"4G": EF_EPSNSC, "5G": EF_5GNSC}


class UnsupportedGeneration(Exception):
    """Raised when 5G context files are requested from a card without them."""


class CardFormatError(ValueError):
    """Raised by card_from_text with the offending line number."""


class AccessLevel(Enum):
    ALW = "ALW"
    PIN = "PIN"
    ADM = "ADM"
    NEV = "NEV"


@dataclass
class AccessRule:
    read: AccessLevel
    update: AccessLevel


@dataclass
class PinState:
    value: str
    enabled: bool
    retries_left: int
    retry_limit: int = DEFAULT_RETRY_LIMIT
    locked: bool = False

    def __post_init__(self) -> None:
        if not (self.value.isdigit() and 4 <= len(self.value) <= 8):
            raise ValueError("PIN must be 4..8 digits")
        if self.retries_left > self.retry_limit:
            raise ValueError("retries_left above retry_limit")
        if self.locked != (self.retries_left == 0):
            raise ValueError("locked iff retries_left == 0")


class SessionOrigin(Enum):
    READER = "reader"
    BASEBAND = "baseband"


@dataclass
class CardSession:
    origin: SessionOrigin
    label: str = "reader"
    pin_verified: bool = False
    adm_secret: bytes | None = None
    selected: int | None = None


@dataclass
class CardImage:
    """One smart card: identity, permanent key, files, PIN state.

    A programmable card differs only in how it was built; once
    instantiated it enforces its access conditions like any other card.
    """

    iccid: str
    supi: str
    k_permanent: Key
    files: dict[int, tuple[AccessRule, bytes]]
    pin: PinState
    seq: int = 0
    supports_5g_context: bool = False
    programmable: bool = False
    _adm_secret: bytes = field(default=b"", repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.k_permanent.kind is not KeyKind.K_PERMANENT:
            raise ValueError("card key must be K_permanent kind")
        if self.supports_5g_context:
            if EF_5GLOCI not in self.files or EF_5GNSC not in self.files:
                raise ValueError("5G-capable card must carry 4F01 and 4F03")
        if not self._adm_secret:
            # Stand-in for the per-card ADM secret; never exposed over APDU
            # and never compared against attacker-supplied input anywhere.
            self._adm_secret = crypto.prf(b"card-adm", self.iccid.encode("ascii"))

    def open_session(self, label: str = "card-reader") -> CardSession:
        return CardSession(origin=SessionOrigin.READER, label=label)

    def open_baseband_session(self, label: str = "baseband") -> CardSession:
        return CardSession(
            origin=SessionOrigin.BASEBAND, label=label, adm_secret=self._adm_secret
        )

    def run_aka(self, rand: bytes, autn: bytes) -> crypto.AkaResult:
        """Card-side AKA; updates the stored sequence number on success."""
        result = crypto.check_autn(self.k_permanent, rand, autn)
        self.seq = max(self.seq, crypto.autn_seq(autn))
        return result


def standard_card(
    rng: Random,
    supi: str,
    k_permanent: Key,
    *,
    pin_value: str = "1234",
    pin_enabled: bool = False,
    retry_limit: int = DEFAULT_RETRY_LIMIT,
    hardened: bool = False,
    supports_5g_context: bool = False,
) -> CardImage:
    """Operator-issued card with the standard file set.

    hardened raises the read condition of the security-context files from
    PIN to ADM, which is the card-side countermeasure against reader
    extraction.
    """
    iccid = "8986" + "".join(str(rng.randrange(10)) for _ in range(15))
    nsc_read = AccessLevel.ADM if hardened else AccessLevel.PIN
    files: dict[int, tuple[AccessRule, bytes]] = {
        EF_IMSI: (AccessRule(AccessLevel.PIN, AccessLevel.ADM), supi.encode("ascii")),
        EF_EPSLOCI: (AccessRule(AccessLevel.PIN, AccessLevel.PIN), b""),
        EF_EPSNSC: (AccessRule(nsc_read, AccessLevel.PIN), b""),
    }
    if supports_5g_context:
        files[EF_5GLOCI] = (AccessRule(AccessLevel.PIN, AccessLevel.PIN), b"")
        files[EF_5GNSC] = (AccessRule(nsc_read, AccessLevel.PIN), b"")
    return CardImage(
        iccid=iccid,
        supi=supi,
        k_permanent=k_permanent,
        files=files,
        pin=PinState(pin_value, pin_enabled, retry_limit, retry_limit),
        supports_5g_context=supports_5g_context,
    )


def programmable_card(
    rng: Random,
    supi: str,
    files: dict[int, bytes],
    *,
    supports_5g_context: bool = False,
) -> CardImage:
    """Writable blank card: the given files are installed with ALW conditions."""
    iccid = "8999" + "".join(str(rng.randrange(10)) for _ in range(15))
    k = Key(rng.randbytes(crypto.KEY_LEN), KeyKind.K_PERMANENT)
    table = {
        fid: (AccessRule(AccessLevel.ALW, AccessLevel.ALW), bytes(body))
        for fid, body in files.items()
    }
    if supports_5g_context:
        table.setdefault(EF_5GLOCI, (AccessRule(AccessLevel.ALW, AccessLevel.ALW), b""))
        table.setdefault(EF_5GNSC, (AccessRule(AccessLevel.ALW, AccessLevel.ALW), b""))
    return CardImage(
        iccid=iccid,
        supi=supi,
        k_permanent=k,
        files=table,
        pin=PinState("0000", False, DEFAULT_RETRY_LIMIT, DEFAULT_RETRY_LIMIT),
        supports_5g_context=supports_5g_context,
        programmable=True,
    )


class ApduCommand(Enum):
    SELECT = "SELECT"
    VERIFY_PIN = "VERIFY_PIN"
    READ = "READ"
    UPDATE = "UPDATE"
    AUTHENTICATE = "AUTHENTICATE"


@dataclass
class Apdu:
    cmd: ApduCommand
    file_id: int | None = None
    payload: bytes = b""


class ApduStatus(Enum):
    OK = "OK"
    SECURITY_NOT_SATISFIED = "SECURITY_NOT_SATISFIED"
    FILE_NOT_FOUND = "FILE_NOT_FOUND"
    PIN_BLOCKED = "PIN_BLOCKED"
    AUTH_FAILURE = "AUTH_FAILURE"


@dataclass
class ApduResponse:
    status: ApduStatus
    payload: bytes = b""

    def __post_init__(self) -> None:
        if self.status is not ApduStatus.OK and self.payload:
            raise ValueError("payload only travels on OK")


def _access_granted(card: CardImage, session: CardSession, level: AccessLevel) -> bool:
    if level is AccessLevel.ALW:
        return True
    if level is AccessLevel.PIN:
        if not card.pin.enabled:
            return True
        return session.pin_verified and not card.pin.locked
    if level is AccessLevel.ADM:
        return bool(session.adm_secret) and session.adm_secret == card._adm_secret
    return False  # NEV


def verify_pin(card: CardImage, session: CardSession, candidate: str) -> ApduResponse:
    pin = card.pin
    if not pin.enabled:
        return ApduResponse(ApduStatus.OK)  # nothing to verify
    if pin.locked:
        return ApduResponse(ApduStatus.PIN_BLOCKED)
    if candidate == pin.value:
        session.pin_verified = True
        pin.retries_left = pin.retry_limit
        return ApduResponse(ApduStatus.OK)
    pin.retries_left -= 1
    if pin.retries_left == 0:
        pin.locked = True
        return ApduResponse(ApduStatus.PIN_BLOCKED)
    return ApduResponse(ApduStatus.SECURITY_NOT_SATISFIED)


def apdu_execute(card: CardImage, session: CardSession, apdu: Apdu) -> ApduResponse:
    """Single dispatch point for card commands; all checks happen here."""
    cmd = apdu.cmd
    if cmd is ApduCommand.VERIFY_PIN:
        return verify_pin(card, session, apdu.payload.decode("ascii", "replace"))
    if cmd is ApduCommand.AUTHENTICATE:
        rand, autn = apdu.payload[: crypto.KEY_LEN], apdu.payload[crypto.KEY_LEN :]
        try:
            result = card.run_aka(rand, autn)
        except crypto.MacFailure:
            return ApduResponse(ApduStatus.AUTH_FAILURE)
        return ApduResponse(ApduStatus.OK, result.res + result.ck.octets + result.ik.octets)
    if apdu.file_id is None or apdu.file_id not in card.files:
        return ApduResponse(ApduStatus.FILE_NOT_FOUND)
    rule, body = card.files[apdu.file_id]
    if cmd is ApduCommand.SELECT:
        session.selected = apdu.file_id
        return ApduResponse(ApduStatus.OK)
    if cmd is ApduCommand.READ:
        if not _access_granted(card, session, rule.read):
            if card.pin.locked and rule.read is AccessLevel.PIN:
                return ApduResponse(ApduStatus.PIN_BLOCKED)
            return ApduResponse(ApduStatus.SECURITY_NOT_SATISFIED)
        return ApduResponse(ApduStatus.OK, body)
    if cmd is ApduCommand.UPDATE:
        if not _access_granted(card, session, rule.update):
            if card.pin.locked and rule.update is AccessLevel.PIN:
                return ApduResponse(ApduStatus.PIN_BLOCKED)
            return ApduResponse(ApduStatus.SECURITY_NOT_SATISFIED)
        card.files[apdu.file_id] = (rule, bytes(apdu.payload))
        return ApduResponse(ApduStatus.OK)
    raise ValueError("unknown command %r" % cmd)


def store_context_files(card: CardImage, loci: bytes, nsc: bytes, generation: str) -> None:
    """ME-facing context write; bypasses APDU access conditions.

    The baseband talks to the card over its own session and always may
    update the context files; the APDU conditions govern external readers.
    """
    if generation == "5G" and not card.supports_5g_context:
        raise UnsupportedGeneration("card has no 5G context files")
    for fid, body in ((LOCI_FILES[generation], loci), (NSC_FILES[generation], nsc)):
        rule = card.files[fid][0] if fid in card.files else AccessRule(AccessLevel.PIN, AccessLevel.PIN)
        card.files[fid] = (rule, bytes(body))


def load_context_files(card: CardImage, generation: str) -> tuple[bytes, bytes]:
    """ME-facing context read; returns (loci, nsc) bodies."""
    if generation == "5G" and not card.supports_5g_context:
        raise UnsupportedGeneration("card has no 5G context files")
    loci = card.files.get(LOCI_FILES[generation], (None, b""))[1]
    nsc = card.files.get(NSC_FILES[generation], (None, b""))[1]
    return loci, nsc


def card_to_text(card: CardImage) -> str:
    """Serialize a card image to the line-oriented text format."""
    lines = [
        "iccid %s" % card.iccid,
        "supi %s" % card.supi,
        "k %s" % card.k_permanent.octets.hex(),
        "seq %d" % card.seq,
        "pin %s enabled=%d retries=%d limit=%d locked=%d"
        % (
            card.pin.value,
            card.pin.enabled,
            card.pin.retries_left,
            card.pin.retry_limit,
            card.pin.locked,
        ),
        "flags supports_5g=%d programmable=%d"
        % (card.supports_5g_context, card.programmable),
    ]
    for fid in sorted(card.files):
        rule, body = card.files[fid]
        entry = "%04x %s %s" % (fid, rule.read.value, rule.update.value)
        if body:
            entry += " " + body.hex()
        lines.append(entry)
    return "\n".join(lines) + "\n"


def _parse_kv(token: str, want: str) -> str:
    key, _, val = token.partition("=")
    if key != want or not val:
        raise CardFormatError("expected %s=<value>, got %r" % (want, token))
    return val


def card_from_text(text: str) -> CardImage:
    """Parse the text format; strict, errors carry the line number."""
    header: dict[str, list[str]] = {}
    files: dict[int, tuple[AccessRule, bytes]] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        first = tokens[0]
        if len(first) == 4 and all(c in "0123456789abcdefABCDEF" for c in first):
            if len(tokens) not in (3, 4):
                raise CardFormatError("line %d: file line wants <id> <read> <update> [body]" % n)
            try:
                read = AccessLevel[tokens[1]]
                update = AccessLevel[tokens[2]]
            except KeyError as exc:
                raise CardFormatError("line %d: unknown access condition %s" % (n, exc)) from None
            body = b""
            if len(tokens) == 4:
                try:
                    body = bytes.fromhex(tokens[3])
                except ValueError:
                    raise CardFormatError("line %d: bad body hex" % n) from None
            fid = int(first, 16)
            if fid in files:
                raise CardFormatError("line %d: duplicate file %04x" % (n, fid))
            files[fid] = (AccessRule(read, update), body)
        else:
            if first in header:
                raise CardFormatError("line %d: duplicate header key %r" % (n, first))
            header[first] = tokens[1:]
    for want in ("iccid", "supi", "k", "seq", "pin", "flags"):
        if want not in header:
            raise CardFormatError("missing header line %r" % want)
    try:
        key = Key(bytes.fromhex(header["k"][0]), KeyKind.K_PERMANENT)
    except (ValueError, IndexError):
        raise CardFormatError("bad k line") from None
    try:
        seq = int(header["seq"][0])
    except (ValueError, IndexError):
        raise CardFormatError("bad seq line") from None
    p = header["pin"]
    if len(p) != 5:
        raise CardFormatError("pin line wants value enabled= retries= limit= locked=")
    pin = PinState(
        value=p[0],
        enabled=_parse_kv(p[1], "enabled") == "1",
        retries_left=int(_parse_kv(p[2], "retries")),
        retry_limit=int(_parse_kv(p[3], "limit")),
        locked=_parse_kv(p[4], "locked") == "1",
    )
    f = header["flags"]
    if len(f) != 2:
        raise CardFormatError("flags line wants supports_5g= programmable=")
    return CardImage(
        iccid=header["iccid"][0],
        supi=header["supi"][0],
        k_permanent=key,
        files=files,
        pin=pin,
        seq=seq,
        supports_5g_context=_parse_kv(f[0], "supports_5g") == "1",
        programmable=_parse_kv(f[1], "programmable") == "1",
    )
