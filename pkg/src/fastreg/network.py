"""Network side: subscriber database, context table, registration checks.

The fast-path decision runs the checks in a fixed order and falls back to
a full AKA the moment one fails, without telling the handset which check
tripped: table lookup by (GUTI, ngKSI), NAS MAC, container/cleartext
equality, then the strictly-greater uplink count rule.

The context table behaves like an append-only map: a fast-path accept
adds the freshly allocated GUTI as another alias of the same context
object and the old alias stays valid, so byte-identical replays die on
the count check rather than the lookup.  Only a new AKA purges a
subscriber's old rows and installs a fresh context.
"""

from __future__ import annotations

from dataclasses import dataclass
from random import Random

from . import crypto
from .channel import (
    AuthRequest,
    AuthResponse,
    Deregistration,
    IdentityRequest,
    IdentityResponse,
    RegistrationAccept,
    RegistrationReject,
    RegistrationRequestFast,
    RegistrationRequestInitial,
    SecurityModeCommand,
    SecurityModeComplete,
    encode_accept_payload,
    encode_ies,
)
from .crypto import Key, KeyKind
from .equipment import SecurityContext
from .profiles import OperatorProfile


class UnknownSubscriber(Exception):
    pass


class NotRegistered(Exception):
    pass


@dataclass
class SubscriberRecord:
    supi: str
    k_permanent: Key
    seq: int = 0


@dataclass
class TableEntry:
    """One subscriber's live context; shared by all of its GUTI aliases."""

    supi: str
    context: SecurityContext


@dataclass
class Session:
    supi: str
    serving_bs: str
    guti: str
    state: str  # "Registered" | "Deregistered"
    via: str  # "fast" | "aka"
    flow: str


@dataclass(frozen=True)
class OneTapToken:
    """App-layer login token minted against the registered session."""

    supi: str
    nonce: str


@dataclass(frozen=True)
class Established:
    context: SecurityContext
    guti: str


@dataclass
class _PendingAka:
    flow: str
    peer: str
    bs: str
    supi: str
    vector: crypto.AuthVector
    caps: tuple[str, ...]
    stage: str  # "res" | "smc"
    k_amf: Key | None = None
    ngksi: int = 0


class Amf:
    """Core-network endpoint owning subscribers, contexts and sessions."""

    def __init__(self, profile: OperatorProfile, rng: Random, name: str = "amf") -> None:
        self.name = name
        self.profile = profile
        self.rng = rng
        self.env = None
        self.subscribers: dict[str, SubscriberRecord] = {}
        self.table: dict[tuple[str, int], TableEntry] = {}
        self.sessions: dict[str, Session] = {}
        self.pending: dict[str, _PendingAka] = {}
        self.last_aka_step: dict[str, int] = {}
        self._next_ngksi: dict[str, int] = {}
        self._guti_n = 0
        self._guti_salt = "%06x" % rng.getrandbits(24)
        self._conceal_key = rng.randbytes(crypto.KEY_LEN)

    # --- plumbing ------------------------------------------------------

    def _emit(self, event: str, **fields) -> None:
        if self.env is not None:
            self.env.events.emit(self.name, event, **fields)

    def _send(self, peer: str, bs: str, flow: str, msg) -> None:
        self.env.channel.send(self.name, peer, bs, flow, msg)

    def _step(self) -> int:
        return self.env.channel.step if self.env is not None else 0

    # --- subscriber management ----------------------------------------

    def add_subscriber(self, supi: str, k_permanent: Key) -> SubscriberRecord:
        record = SubscriberRecord(supi=supi, k_permanent=k_permanent)
        self.subscribers[supi] = record
        return record

    def conceal_supi(self, supi: str) -> str:
        return "suci-" + crypto.prf(self._conceal_key, supi.encode("ascii"))[:8].hex()

    def resolve_identity(self, identity: str) -> str:
        if identity in self.subscribers:
            return identity
        if identity.startswith("suci-"):
            for supi in self.subscribers:
                if self.conceal_supi(supi) == identity:
                    return supi
        raise UnknownSubscriber("cannot resolve %r" % identity)

    # --- allocators ----------------------------------------------------

    def _alloc_guti(self) -> str:
        self._guti_n += 1
        return "guti-%s-%04d" % (self._guti_salt, self._guti_n)

    def _alloc_ngksi(self, supi: str) -> int:
        n = self._next_ngksi.get(supi, 0)
        self._next_ngksi[supi] = (n + 1) % 7
        return n

    # --- fast-path decision -------------------------------------------

    def _fast_check(self, msg: RegistrationRequestFast) -> tuple[str | None, TableEntry | None]:
        """Returns (failure reason or None, table entry if looked up)."""
        entry = self.table.get((msg.guti, msg.ngksi))
        if not self.profile.fast_registration_enabled:
            return "disabled", entry
        if entry is None:
            return "lookup", None
        interval = self.profile.periodic_aka_interval
        if interval is not None:
            last = self.last_aka_step.get(entry.supi, -(10**9))
            if self._step() - last >= interval:
                return "periodic", entry
        ctx = entry.context
        k_enc, k_int = crypto.nas_keys(ctx.k_amf)
        ies = encode_ies(msg.guti, msg.ngksi, msg.ul_count)
        if not crypto.mac_verify(ies, msg.container, k_int, msg.mac):
            return "mac", entry
        try:
            plain = crypto.sdec(msg.container, k_enc)
        except crypto.DecryptFailure:
            plain = None
        if plain != ies:
            return "container", entry
        if msg.ul_count <= ctx.ul_count:
            return "count", entry
        return None, entry

    def _on_fast(self, envelope) -> None:
        msg: RegistrationRequestFast = envelope.msg
        reason, entry = self._fast_check(msg)
        if reason is None:
            ctx = entry.context
            ctx.ul_count = msg.ul_count
            self._emit(
                "amf_verify",
                ies=encode_ies(msg.guti, msg.ngksi, msg.ul_count).hex(),
                container=msg.container.hex(),
                mac=msg.mac.hex(),
            )
            new_guti = self._alloc_guti()
            # Alias: the new GUTI joins the old ones on the same context.
            self.table[(new_guti, msg.ngksi)] = entry
            ctx.dl_count += 1
            self.sessions[entry.supi] = Session(
                supi=entry.supi,
                serving_bs=envelope.bs,
                guti=new_guti,
                state="Registered",
                via="fast",
                flow=envelope.flow,
            )
            self._emit("registration_accept", supi=entry.supi, guti=new_guti, via="fast")
            k_enc, _ = crypto.nas_keys(ctx.k_amf)
            payload = crypto.senc(encode_accept_payload(new_guti, ctx.dl_count), k_enc)
            self._send(envelope.src, envelope.bs, envelope.flow, RegistrationAccept(payload))
            return
        self._emit("fast_fallback", reason=reason, guti=msg.guti)
        if entry is not None:
            self._begin_aka(
                entry.supi, envelope, caps=entry.context.ue_sec_caps
            )
        else:
            self._send(envelope.src, envelope.bs, envelope.flow, IdentityRequest())

    # --- AKA ----------------------------------------------------------

    def _begin_aka(self, supi: str, envelope, caps: tuple[str, ...]) -> None:
        sub = self.subscribers[supi]
        sub.seq += 1
        vector = crypto.gen_auth_vector(sub.k_permanent, sub.seq)
        self.pending[envelope.flow] = _PendingAka(
            flow=envelope.flow,
            peer=envelope.src,
            bs=envelope.bs,
            supi=supi,
            vector=vector,
            caps=caps,
            stage="res",
        )
        self._emit("aka_started", supi=supi)
        self._send(envelope.src, envelope.bs, envelope.flow, AuthRequest(vector.rand, vector.autn))

    def _on_identity(self, envelope, identity: str, caps: tuple[str, ...]) -> None:
        try:
            supi = self.resolve_identity(identity)
        except UnknownSubscriber:
            self._emit("unknown_identity", identity=identity)
            self._send(
                envelope.src, envelope.bs, envelope.flow, RegistrationReject("unknown-subscriber")
            )
            return
        self._begin_aka(supi, envelope, caps=caps)

    def _on_auth_response(self, envelope) -> None:
        state = self.pending.get(envelope.flow)
        if state is None or state.stage != "res":
            self._emit("stray_message", mtype="authentication-response")
            return
        msg: AuthResponse = envelope.msg
        if not msg.res or msg.res != state.vector.xres:
            self._emit("aka_reject", supi=state.supi)
            del self.pending[envelope.flow]
            self._send(
                envelope.src, envelope.bs, envelope.flow, RegistrationReject("authentication-failure")
            )
            return
        _, _, k_amf = crypto.derive_k_amf(state.vector.ck, state.vector.ik)
        state.k_amf = k_amf
        state.ngksi = self._alloc_ngksi(state.supi)
        state.stage = "smc"
        self._send(
            envelope.src,
            envelope.bs,
            envelope.flow,
            SecurityModeCommand(tuple(state.caps), state.ngksi),
        )

    def _purge_subscriber_rows(self, supi: str) -> None:
        for key in [k for k, e in self.table.items() if e.supi == supi]:
            del self.table[key]

    def _install_context(self, supi: str, k_amf: Key, ngksi: int, caps: tuple[str, ...], bs: str, flow: str) -> tuple[SecurityContext, str]:
        self._purge_subscriber_rows(supi)
        ctx = SecurityContext(
            k_amf=k_amf, ngksi=ngksi, ue_sec_caps=tuple(caps), ul_count=0, dl_count=1
        )
        guti = self._alloc_guti()
        self.table[(guti, ngksi)] = TableEntry(supi=supi, context=ctx)
        self.last_aka_step[supi] = self._step()
        self.sessions[supi] = Session(
            supi=supi, serving_bs=bs, guti=guti, state="Registered", via="aka", flow=flow
        )
        self._emit("aka_established", supi=supi, guti=guti)
        return ctx, guti

    def _on_smc_complete(self, envelope) -> None:
        state = self.pending.get(envelope.flow)
        if state is None or state.stage != "smc":
            self._emit("stray_message", mtype="security-mode-complete")
            return
        k_enc, k_int = crypto.nas_keys(state.k_amf)
        if not crypto.mac_verify(b"security-mode-complete", b"", k_int, envelope.msg.mac):
            self._emit("smc_failure", supi=state.supi)
            del self.pending[envelope.flow]
            self._send(
                envelope.src, envelope.bs, envelope.flow, RegistrationReject("security-mode-failure")
            )
            return
        ctx, guti = self._install_context(
            state.supi, state.k_amf, state.ngksi, state.caps, envelope.bs, envelope.flow
        )
        del self.pending[envelope.flow]
        self._emit("registration_accept", supi=state.supi, guti=guti, via="aka")
        payload = crypto.senc(encode_accept_payload(guti, ctx.dl_count), k_enc)
        self._send(envelope.src, envelope.bs, envelope.flow, RegistrationAccept(payload))

    def _on_dereg(self, envelope) -> None:
        msg: Deregistration = envelope.msg
        for (guti, _), entry in list(self.table.items()):
            if guti == msg.guti:
                session = self.sessions.get(entry.supi)
                if session is not None:
                    session.state = "Deregistered"
                self._emit("deregistered", supi=entry.supi)
                return
        self._emit("stray_message", mtype="deregistration")

    # --- channel entry point ------------------------------------------

    def handle(self, envelope) -> None:
        msg = envelope.msg
        if isinstance(msg, RegistrationRequestFast):
            self._on_fast(envelope)
        elif isinstance(msg, RegistrationRequestInitial):
            self._on_identity(envelope, msg.identity, msg.sec_caps)
        elif isinstance(msg, IdentityResponse):
            self._on_identity(envelope, msg.identity, msg.sec_caps)
        elif isinstance(msg, AuthResponse):
            self._on_auth_response(envelope)
        elif isinstance(msg, SecurityModeComplete):
            self._on_smc_complete(envelope)
        elif isinstance(msg, Deregistration):
            self._on_dereg(envelope)
        else:
            self._emit("stray_message", mtype=type(msg).__name__)

    # --- direct-drive AKA (no channel), used to seed test states -------

    def run_aka_network(self, identity: str, ue) -> Established | None:
        """Synchronous AKA against a UE object; None when the UE fails it."""
        supi = self.resolve_identity(identity)
        sub = self.subscribers[supi]
        sub.seq += 1
        vector = crypto.gen_auth_vector(sub.k_permanent, sub.seq)
        res = ue.answer_challenge(vector.rand, vector.autn)
        if not res or res != vector.xres:
            self._emit("aka_reject", supi=supi)
            return None
        _, _, k_amf = crypto.derive_k_amf(vector.ck, vector.ik)
        ngksi = self._alloc_ngksi(supi)
        caps = tuple(getattr(ue, "sec_caps", ()))
        ctx, guti = self._install_context(
            supi, k_amf, ngksi, caps, getattr(ue, "bs", "BS-A"), flow="direct"
        )
        return Established(context=ctx, guti=guti)

    # --- downstream service surface -----------------------------------

    def one_tap_token(self, session: Session) -> OneTapToken:
        """Mint an app login token for whoever holds the registered session."""
        if session.state != "Registered":
            raise NotRegistered("session for %s is %s" % (session.supi, session.state))
        return OneTapToken(supi=session.supi, nonce="%08x" % self.rng.getrandbits(32))

    def locate(self, supi: str) -> str:
        """Network-side paging view: the base station serving the subscriber."""
        session = self.sessions.get(supi)
        if session is None or session.state != "Registered":
            raise NotRegistered("%s has no registered session" % supi)
        return session.serving_bs
