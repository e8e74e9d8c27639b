"""Attack harness: impersonation scenarios, downstream effects, matrix.

Two base scenarios:

  S1  card-context impersonation (4G): read the victim card's context
      files in an off-the-shelf reader, copy them onto a programmable
      card, register from the attacker's own handset.
  S2  chip-context impersonation (5G): briefly swap the victim's card for
      a fake one carrying the same identity while the shared handset sits
      in airplane mode; the chip keeps the cached context and hands it to
      the fake card's owner.

On top of a successful base attack the harness evaluates the one-tap
login bypass and the location-spoofing effect, and a per-profile matrix
runs everything for the three operator presets.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .channel import ChannelTap
from .equipment import MobileEquipment, PowerState, SecurityContext
from .profiles import DEFAULT_PIN, Countermeasures, get_profile
from .sim import SimEnv
from .usim import (
    EF_EPSLOCI,
    EF_EPSNSC,
    EF_IMSI,
    Apdu,
    ApduCommand,
    ApduStatus,
    CardImage,
    apdu_execute,
    programmable_card,
    verify_pin,
)

VICTIM_SUPI = "460110123456789"
VICTIM_BS = "BS-A"
ATTACKER_BS = "BS-B"

S1_VARIANTS = ("default", "stale", "stale-recover", "reconnect")
S2_VARIANTS = ("default", "swap-powered-on", "reconnect")


class AccessDenied(Exception):
    """Card extraction stopped by PIN or file access conditions."""


class PrerequisiteFailed(Exception):
    """A downstream scenario was asked to build on a failed base attack."""


class UnknownScenario(Exception):
    pass


@dataclass
class AttackerKit:
    """What the attacker owns: a handset, a sniffer tap, public knowledge."""

    env: SimEnv
    own_me: MobileEquipment
    tap: ChannelTap
    known: dict[str, str]

    def learn_victim_supi(self) -> str | None:
        """Pull a cleartext permanent identity off the recorded air traffic."""
        for entry in self.tap.entries:
            if entry.mtype in ("registration-request-initial", "identity-response"):
                identity = entry.fields["identity"]
                if not identity.startswith("suci-"):
                    return identity
        return None


@dataclass
class AttackReport:
    scenario: str
    profile: str
    seed: int
    variant: str = "default"
    succeeded: bool = False
    evidence: dict[str, str] = field(default_factory=dict)
    window: tuple[int, int] = (0, 0)
    env: SimEnv | None = field(default=None, repr=False, compare=False)

    def note(self, key: str, value) -> None:
        if isinstance(value, bool):
            value = "true" if value else "false"
        self.evidence[key] = str(value)

    def to_lines(self) -> list[str]:
        lines = [
            "scenario %s" % self.scenario,
            "profile %s" % self.profile,
            "seed %d" % self.seed,
            "variant %s" % self.variant,
            "succeeded %s" % ("true" if self.succeeded else "false"),
            "window %d..%d" % self.window,
        ]
        lines.extend("evidence %s = %s" % (k, self.evidence[k]) for k in sorted(self.evidence))
        return lines


def build_environment(profile_name: str = "OP-I", seed: int = 0, cm: Countermeasures | None = None) -> SimEnv:
    """Victim subscriber and handset at BS-A, attacker kit at BS-B."""
    cm = cm or Countermeasures()
    profile = cm.apply(get_profile(profile_name))
    env = SimEnv(profile, seed)
    env.meta["cm"] = cm
    env.meta["victim_supi"] = VICTIM_SUPI
    env.meta["victim_bs"] = VICTIM_BS
    env.meta["attacker_bs"] = ATTACKER_BS
    _, card = env.provision_subscriber(VICTIM_SUPI)
    env.meta["victim_card"] = card
    env.add_me(
        "victim-me",
        bs=VICTIM_BS,
        custody="victim",
        user_pin=profile.default_pin,
        iccid_binding=cm.iccid_binding,
        detect_offline_swap=cm.offline_swap_detection,
    )
    attacker_me = env.add_me(
        "attacker-me", bs=ATTACKER_BS, custody="attacker", iccid_binding=cm.iccid_binding
    )
    tap = ChannelTap("attacker-tap")
    env.channel.taps.append(tap)
    env.meta["kit"] = AttackerKit(
        env=env, own_me=attacker_me, tap=tap, known={"default_pin": DEFAULT_PIN}
    )
    return env


# --- attacker toolbox --------------------------------------------------


def card_reader_extract(
    kit: AttackerKit,
    card: CardImage,
    fids: tuple[int, ...] = (EF_IMSI, EF_EPSLOCI, EF_EPSNSC),
    pin_candidates: list[str] | None = None,
) -> dict[int, bytes]:
    """Read card files over a reader session; AccessDenied on any refusal."""
    session = card.open_session("attacker-reader")
    if card.pin.enabled:
        candidates = list(pin_candidates) if pin_candidates else [kit.known["default_pin"]]
        granted = False
        last = None
        for candidate in candidates:
            resp = verify_pin(card, session, candidate)
            last = resp.status
            if resp.status is ApduStatus.OK:
                granted = True
                break
            if resp.status is ApduStatus.PIN_BLOCKED:
                break
        if not granted:
            raise AccessDenied("PIN gate: %s" % last.name)
    out: dict[int, bytes] = {}
    for fid in fids:
        resp = apdu_execute(card, session, Apdu(ApduCommand.READ, fid))
        if resp.status is not ApduStatus.OK:
            raise AccessDenied("read %04X: %s" % (fid, resp.status.name))
        out[fid] = resp.payload
    return out


def program_fake_card(kit: AttackerKit, supi: str, files: dict[int, bytes]) -> CardImage:
    return programmable_card(kit.env.rng, supi, dict(files))


def _rewrite_fake_context(fake: CardImage, guti: str, ul_count: int, nsc_blob: bytes) -> None:
    """Update a fake card's context files through plain reader commands."""
    ctx = SecurityContext.from_bytes(nsc_blob)
    ctx.ul_count = ul_count
    session = fake.open_session("attacker-writer")
    for fid, body in ((EF_EPSLOCI, guti.encode("ascii")), (EF_EPSNSC, ctx.to_bytes())):
        resp = apdu_execute(fake, session, Apdu(ApduCommand.UPDATE, fid, body))
        if resp.status is not ApduStatus.OK:
            raise AccessDenied("update %04X: %s" % (fid, resp.status.name))


# --- evaluation helpers ------------------------------------------------


def fast_agreement_pairs(events):
    """Pair each amf_verify with the ue_init events sharing its content.

    Agreement is keyed on the (ies, container, mac) triple, so a verify
    with no matching handset event, or one matched only by an attacker
    handset, is an injective-agreement violation against the victim.
    """
    inits: dict[tuple[str, str, str], list] = {}
    for e in events.named("ue_init"):
        key = (e.fields["ies"], e.fields["container"], e.fields["mac"])
        inits.setdefault(key, []).append(e)
    pairs = []
    for v in events.named("amf_verify"):
        key = (v.fields["ies"], v.fields["container"], v.fields["mac"])
        pairs.append((v, inits.get(key, [])))
    return pairs


def _summarize(outcome) -> str:
    verdict = "accept" if outcome.accepted else "reject:%s" % (outcome.reject_cause or "none")
    return "%s path=%s aka=%s" % (verdict, outcome.path, "yes" if outcome.aka_ran else "no")


def _evaluate_impersonation(report: AttackReport, env: SimEnv, outcome) -> None:
    """Fill the report from one attacker registration attempt."""
    window = (outcome.start_step, outcome.end_step or env.channel.step)
    report.window = window
    report.note("attacker_registration", _summarize(outcome))
    clean_fast = outcome.accepted and outcome.path == "fast" and not outcome.aka_ran
    report.note("accepted_without_aka", clean_fast)

    victim_names = set(env.custody_of("victim"))
    witness = False
    for v, inits in fast_agreement_pairs(env.events):
        if not (window[0] <= v.step <= window[1]):
            continue
        emitters = sorted({e.entity for e in inits})
        witness = not any(e in victim_names for e in emitters)
        report.note("amf_verify_step", v.step)
        report.note("ue_init_emitters", ",".join(emitters) if emitters else "none")
    report.note("agreement_violated", witness)

    victim_traffic = [
        t
        for t in env.monitor.entries
        if t.src in victim_names and window[0] <= t.step <= window[1]
    ]
    quiet = not victim_traffic
    report.note("victim_quiet_in_window", quiet)

    token_ok = location_ok = False
    if clean_fast:
        supi = env.meta["victim_supi"]
        session = env.amf.sessions.get(supi)
        if session is not None and session.state == "Registered":
            token = env.amf.one_tap_token(session)
            token_ok = token.supi == supi
            report.note("token_supi", token.supi)
            reading = env.amf.locate(supi)
            location_ok = reading == env.meta["attacker_bs"] and reading != env.meta["victim_bs"]
            report.note("network_location", reading)
    report.succeeded = clean_fast and witness and quiet and token_ok and location_ok


def _observe_reconnect(report: AttackReport, env: SimEnv, victim_me, attacker_me, generation: str) -> None:
    """Let the victim come back online and record what both sides see."""
    if victim_me.power is PowerState.AIRPLANE:
        victim_me.set_airplane(False)
    elif victim_me.power is PowerState.POWERED_OFF:
        victim_me.power_on()
    back = victim_me.register(generation)
    report.note("victim_reconnect", _summarize(back))
    retry = attacker_me.register(generation)
    report.note("attacker_retry_after_reconnect", _summarize(retry))


# --- base scenarios ----------------------------------------------------


def scenario_usim_impersonation(
    profile_name: str = "OP-I",
    seed: int = 0,
    cm: Countermeasures | None = None,
    variant: str = "default",
) -> AttackReport:
    """S1: copy the 4G context off the victim's card, register elsewhere."""
    if variant not in S1_VARIANTS:
        raise UnknownScenario("unknown S1 variant %r (have: %s)" % (variant, ", ".join(S1_VARIANTS)))
    env = build_environment(profile_name, seed, cm)
    kit: AttackerKit = env.meta["kit"]
    report = AttackReport("S1", profile_name, seed, variant, env=env)
    victim = env.mes["victim-me"]
    card: CardImage = env.meta["victim_card"]

    victim.insert_card(card)
    victim.power_on()
    first = victim.register("4G")
    report.note("victim_initial", _summarize(first))
    victim.set_airplane(True)
    real = victim.remove_card()

    try:
        files = card_reader_extract(kit, real)
    except AccessDenied as err:
        report.note("extraction", "denied: %s" % err)
        victim.insert_card(real)
        report.window = (env.channel.step, env.channel.step)
        return report
    report.note("extraction", "ok: %04X %04X %04X" % (EF_IMSI, EF_EPSLOCI, EF_EPSNSC))
    fake = program_fake_card(kit, files[EF_IMSI].decode("ascii"), files)
    victim.insert_card(real)

    if variant in ("stale", "stale-recover"):
        # Victim re-registers after the copy was taken, moving the stored
        # count and GUTI past what the fake card carries.
        victim.set_airplane(False)
        victim.register("4G")
        victim.set_airplane(True)

    kit.own_me.insert_card(fake)
    kit.own_me.power_on()
    outcome = kit.own_me.register("4G")

    if variant == "stale-recover" and not outcome.accepted:
        # Recovery: sniff the victim's latest cleartext GUTI and count off
        # the air, rewrite the fake card, try again one count ahead.
        guti, count = kit.tap.sniff_latest_guti("victim-me")
        report.note("sniffed_air", "%s count=%d" % (guti, count))
        kit.own_me.remove_card()
        _rewrite_fake_context(fake, guti, count, files[EF_EPSNSC])
        kit.own_me.insert_card(fake)
        outcome = kit.own_me.register("4G")

    _evaluate_impersonation(report, env, outcome)
    if variant == "reconnect" and report.succeeded:
        _observe_reconnect(report, env, victim, kit.own_me, "4G")
    return report


def scenario_baseband_impersonation(
    profile_name: str = "OP-I",
    seed: int = 0,
    cm: Countermeasures | None = None,
    variant: str = "default",
) -> AttackReport:
    """S2: swap a same-identity fake card into the victim's idle handset."""
    if variant not in S2_VARIANTS:
        raise UnknownScenario("unknown S2 variant %r (have: %s)" % (variant, ", ".join(S2_VARIANTS)))
    env = build_environment(profile_name, seed, cm)
    kit: AttackerKit = env.meta["kit"]
    cm = env.meta["cm"]
    report = AttackReport("S2", profile_name, seed, variant, env=env)
    card: CardImage = env.meta["victim_card"]

    shared = env.add_me(
        "shared-me",
        bs=VICTIM_BS,
        custody="victim",
        user_pin=env.profile.default_pin,
        iccid_binding=cm.iccid_binding,
        detect_offline_swap=cm.offline_swap_detection,
    )
    shared.insert_card(card)
    shared.power_on()
    first = shared.register("5G")
    report.note("victim_initial", _summarize(first))

    supi = kit.learn_victim_supi()
    if supi is None:
        report.note("identity", "never seen in clear; cannot build the fake card")
        report.window = (env.channel.step, env.channel.step)
        return report
    report.note("identity", supi)

    if variant == "swap-powered-on":
        # Phone stays fully on during the swap; rule (1) fires.
        env.set_custody("shared-me", "attacker")
        shared.bs = ATTACKER_BS
        real = shared.remove_card()
        fake = program_fake_card(kit, supi, {EF_IMSI: supi.encode("ascii")})
        shared.insert_card(fake)
    else:
        shared.set_airplane(True)
        env.set_custody("shared-me", "attacker")
        shared.bs = ATTACKER_BS
        real = shared.remove_card()
        fake = program_fake_card(kit, supi, {EF_IMSI: supi.encode("ascii")})
        shared.insert_card(fake)
        shared.set_airplane(False)
    report.note("baseband_entry_after_swap", shared.baseband.entry is not None)

    outcome = shared.register("5G")
    _evaluate_impersonation(report, env, outcome)
    if variant == "reconnect" and report.succeeded:
        victim_me = env.mes["victim-me"]
        victim_me.insert_card(real)
        victim_me.power_on()
        _observe_reconnect(report, env, victim_me, shared, "5G")
    return report


# --- downstream scenarios ----------------------------------------------


def scenario_one_tap_bypass(base: AttackReport) -> AttackReport:
    """One-tap login: the number-bound token lands in attacker hands."""
    if not base.succeeded:
        raise PrerequisiteFailed("base attack %s did not succeed" % base.scenario)
    env = base.env
    supi = env.meta["victim_supi"]
    report = AttackReport("one-tap-bypass", base.profile, base.seed, base.variant, env=env)
    report.window = base.window
    session = env.amf.sessions.get(supi)
    if session is None or session.state != "Registered":
        report.note("session", "absent")
        return report
    token = env.amf.one_tap_token(session)
    holder = session.flow.split("#")[0]
    attacker_holds = holder in env.custody_of("attacker")
    report.note("token_supi", token.supi)
    report.note("token_nonce", token.nonce)
    report.note("session_holder", holder)
    report.note("holder_custody", "attacker" if attacker_holds else "victim")
    report.succeeded = token.supi == supi and attacker_holds
    return report


def scenario_location_spoof(base: AttackReport) -> AttackReport:
    """The network now pages the victim at the attacker's base station."""
    if not base.succeeded:
        raise PrerequisiteFailed("base attack %s did not succeed" % base.scenario)
    env = base.env
    supi = env.meta["victim_supi"]
    report = AttackReport("location-spoofing", base.profile, base.seed, base.variant, env=env)
    report.window = base.window
    reading = env.amf.locate(supi)
    report.note("network_view", reading)
    report.note("victim_actual_bs", env.meta["victim_bs"])
    report.succeeded = reading == env.meta["attacker_bs"] and reading != env.meta["victim_bs"]
    return report


# --- dispatch and matrix -----------------------------------------------

BASE_SCENARIOS = {
    "S1": scenario_usim_impersonation,
    "S2": scenario_baseband_impersonation,
}

SCENARIO_NAMES = ("S1", "S2", "one-tap-bypass", "location-spoofing")


def run_scenario(
    attack: str,
    profile_name: str = "OP-I",
    seed: int = 0,
    cm: Countermeasures | None = None,
    variant: str = "default",
) -> AttackReport:
    if attack in BASE_SCENARIOS:
        return BASE_SCENARIOS[attack](profile_name, seed, cm, variant)
    if attack == "one-tap-bypass":
        base = scenario_baseband_impersonation(profile_name, seed, cm, "default")
        return scenario_one_tap_bypass(base)
    if attack == "location-spoofing":
        base = scenario_baseband_impersonation(profile_name, seed, cm, "default")
        return scenario_location_spoof(base)
    raise UnknownScenario("unknown attack %r (have: %s)" % (attack, ", ".join(SCENARIO_NAMES)))


PROFILE_ORDER = ("OP-I", "OP-II", "OP-III")
MATRIX_COLUMNS = (
    "usim_context",
    "baseband_context",
    "impersonation",
    "one_tap_bypass",
    "location_spoofing",
)


def run_table_matrix(seed: int = 0) -> dict[str, dict[str, bool]]:
    """Per-profile verdict matrix over both base attacks and both effects."""
    rows: dict[str, dict[str, bool]] = {}
    for i, name in enumerate(PROFILE_ORDER):
        s1 = scenario_usim_impersonation(name, seed=seed + 10 * i + 1)
        s2 = scenario_baseband_impersonation(name, seed=seed + 10 * i + 2)
        base = s2 if s2.succeeded else (s1 if s1.succeeded else None)
        one_tap = location = False
        if base is not None:
            one_tap = scenario_one_tap_bypass(base).succeeded
            location = scenario_location_spoof(base).succeeded
        rows[name] = {
            "usim_context": s1.succeeded,
            "baseband_context": s2.succeeded,
            "impersonation": s1.succeeded or s2.succeeded,
            "one_tap_bypass": one_tap,
            "location_spoofing": location,
        }
    return rows


def matrix_lines(rows: dict[str, dict[str, bool]]) -> list[str]:
    width = max(len(c) for c in MATRIX_COLUMNS)
    lines = [("profile  " + "  ".join(c.ljust(width) for c in MATRIX_COLUMNS)).rstrip()]
    for name in PROFILE_ORDER:
        cells = ["yes" if rows[name][c] else "no" for c in MATRIX_COLUMNS]
        lines.append((name.ljust(8) + "  " + "  ".join(c.ljust(width) for c in cells)).rstrip())
    return lines
