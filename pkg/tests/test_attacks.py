"""Scenario harness tests: both impersonations, variants, countermeasures."""

from __future__ import annotations

import pytest

from fastreg.attacks import (
    ATTACKER_BS,
    VICTIM_BS,
    VICTIM_SUPI,
    AttackReport,
    PrerequisiteFailed,
    UnknownScenario,
    build_environment,
    fast_agreement_pairs,
    matrix_lines,
    run_scenario,
    run_table_matrix,
    scenario_baseband_impersonation,
    scenario_one_tap_bypass,
    scenario_usim_impersonation,
)
from fastreg.profiles import ALL_PROTECTIVE, Countermeasures

EXPECTED_MATRIX = {
    "OP-I": {
        "usim_context": True,
        "baseband_context": True,
        "impersonation": True,
        "one_tap_bypass": True,
        "location_spoofing": True,
    },
    "OP-II": {
        "usim_context": False,
        "baseband_context": True,
        "impersonation": True,
        "one_tap_bypass": True,
        "location_spoofing": True,
    },
    "OP-III": {
        "usim_context": True,
        "baseband_context": True,
        "impersonation": True,
        "one_tap_bypass": True,
        "location_spoofing": True,
    },
}


# --- base scenarios --------------------------------------------------------


def test_s1_succeeds_where_cards_are_not_hardened():
    for profile in ("OP-I", "OP-III"):
        report = scenario_usim_impersonation(profile, seed=3)
        assert report.succeeded, report.evidence
        assert report.evidence["accepted_without_aka"] == "true"
        assert report.evidence["agreement_violated"] == "true"
        assert report.evidence["victim_quiet_in_window"] == "true"
        assert report.evidence["token_supi"] == VICTIM_SUPI
        assert report.evidence["network_location"] == ATTACKER_BS
        assert report.evidence["extraction"].startswith("ok:")


def test_s1_blocked_by_hardened_card_files():
    report = scenario_usim_impersonation("OP-II", seed=3)
    assert not report.succeeded
    assert report.evidence["extraction"].startswith("denied: read 6FE4")
    # The victim keeps the card; nothing about the attempt bricked it.
    assert report.env.mes["victim-me"].slot is not None


def test_s2_succeeds_on_every_builtin_profile():
    for profile in ("OP-I", "OP-II", "OP-III"):
        report = scenario_baseband_impersonation(profile, seed=4)
        assert report.succeeded, (profile, report.evidence)
        assert report.evidence["baseband_entry_after_swap"] == "true"
        assert report.evidence["accepted_without_aka"] == "true"


def test_agreement_violation_names_only_attacker_handsets():
    report = scenario_baseband_impersonation("OP-I", seed=5)
    assert report.succeeded
    emitters = report.evidence["ue_init_emitters"].split(",")
    victim_names = report.env.custody_of("victim")
    assert emitters and not set(emitters) & set(victim_names)


def test_victim_is_silent_inside_the_attack_window():
    report = scenario_baseband_impersonation("OP-I", seed=6)
    assert report.succeeded
    lo, hi = report.window
    victim_names = set(report.env.custody_of("victim"))
    assert not [
        t
        for t in report.env.monitor.entries
        if t.src in victim_names and lo <= t.step <= hi
    ]


def test_honest_traffic_pairs_every_verify_with_the_victim():
    env = build_environment("OP-I", seed=12, cm=ALL_PROTECTIVE)
    me = env.mes["victim-me"]
    me.insert_card(env.meta["victim_card"])
    me.power_on()
    assert me.register("4G").accepted
    for _ in range(3):
        me.set_airplane(True)
        me.set_airplane(False)
        assert me.register("4G").accepted
    pairs = fast_agreement_pairs(env.events)
    assert len(pairs) >= 3  # the claim is not vacuous
    for verify, inits in pairs:
        assert len(inits) == 1
        assert inits[0].entity == "victim-me"


# --- countermeasures, one toggle at a time ---------------------------------


def test_card_hardening_alone_stops_s1():
    report = scenario_usim_impersonation(
        "OP-I", seed=7, cm=Countermeasures(usim_hardening=True)
    )
    assert not report.succeeded
    assert report.evidence["extraction"].startswith("denied:")


def test_nondefault_pin_alone_stops_s1():
    report = scenario_usim_impersonation(
        "OP-I", seed=7, cm=Countermeasures(nondefault_pin=True)
    )
    assert not report.succeeded
    assert report.evidence["extraction"].startswith("denied: PIN gate")
    card = report.env.meta["victim_card"]
    assert card.pin.retries_left == 2  # one burned guess, card still usable
    assert not card.pin.locked


def test_disabling_fast_registration_stops_both():
    cm = Countermeasures(fast_registration=False)
    s1 = scenario_usim_impersonation("OP-I", seed=8, cm=cm)
    s2 = scenario_baseband_impersonation("OP-I", seed=8, cm=cm)
    for report in (s1, s2):
        assert not report.succeeded
        assert report.evidence["accepted_without_aka"] == "false"
        assert report.evidence["attacker_registration"].startswith("reject:")
    reasons = [e.fields["reason"] for e in s1.env.events.named("fast_fallback")]
    assert "disabled" in reasons


def test_iccid_binding_stops_the_card_swap():
    report = scenario_baseband_impersonation(
        "OP-I", seed=9, cm=Countermeasures(iccid_binding=True)
    )
    assert not report.succeeded
    assert report.evidence["baseband_entry_after_swap"] == "false"
    assert report.evidence["attacker_registration"].startswith(
        "reject:authentication-failure"
    )


def test_card_resident_5g_context_stops_the_swap():
    report = scenario_baseband_impersonation(
        "OP-I", seed=9, cm=Countermeasures(usim_5g_context=True)
    )
    assert not report.succeeded
    # Context rode along on the removed card, so the handset holds nothing.
    assert report.evidence["baseband_entry_after_swap"] == "false"


def test_offline_swap_detection_stops_the_swap():
    report = scenario_baseband_impersonation(
        "OP-I", seed=9, cm=Countermeasures(offline_swap_detection=True)
    )
    assert not report.succeeded
    assert report.evidence["baseband_entry_after_swap"] == "false"


def test_identity_concealment_starves_the_fake_card_builder():
    report = scenario_baseband_impersonation(
        "OP-I", seed=9, cm=Countermeasures(supi_concealment=True)
    )
    assert not report.succeeded
    assert report.evidence["identity"].startswith("never seen in clear")


def test_periodic_aka_bounds_the_stolen_context_lifetime():
    cm = Countermeasures(periodic_aka=True, periodic_aka_interval=25)
    report = scenario_baseband_impersonation("OP-I", seed=10, cm=cm)
    assert report.succeeded  # inside the window the theft still works
    env = report.env
    env.channel.tick(25)
    retry = env.mes["shared-me"].register("5G")
    assert not retry.accepted and retry.aka_ran
    reasons = [e.fields["reason"] for e in env.events.named("fast_fallback")]
    assert reasons[-1] == "periodic"


def test_protective_set_defeats_every_scenario():
    cm = ALL_PROTECTIVE
    for profile in ("OP-I", "OP-II", "OP-III"):
        s1 = scenario_usim_impersonation(profile, seed=11, cm=cm)
        s2 = scenario_baseband_impersonation(profile, seed=11, cm=cm)
        assert not s1.succeeded and not s2.succeeded
        for base in (s1, s2):
            with pytest.raises(PrerequisiteFailed):
                scenario_one_tap_bypass(base)


# --- variants --------------------------------------------------------------


def test_stale_copy_fails_on_the_count_rule():
    report = scenario_usim_impersonation("OP-I", seed=13, variant="stale")
    assert not report.succeeded
    assert report.evidence["attacker_registration"].startswith("reject:")
    reasons = [e.fields["reason"] for e in report.env.events.named("fast_fallback")]
    assert "count" in reasons


def test_stale_copy_recovers_by_sniffing_the_air():
    report = scenario_usim_impersonation("OP-I", seed=13, variant="stale-recover")
    assert report.succeeded, report.evidence
    assert "sniffed_air" in report.evidence
    assert report.evidence["sniffed_air"].startswith("guti-")


def test_powered_on_swap_trips_the_deletion_rule():
    report = scenario_baseband_impersonation("OP-I", seed=14, variant="swap-powered-on")
    assert not report.succeeded
    assert report.evidence["baseband_entry_after_swap"] == "false"


def test_reconnect_views_after_s1():
    report = scenario_usim_impersonation("OP-I", seed=15, variant="reconnect")
    assert report.succeeded
    assert report.evidence["victim_reconnect"].startswith("accept")
    assert report.evidence["attacker_retry_after_reconnect"].startswith("reject:")


def test_reconnect_views_after_s2():
    report = scenario_baseband_impersonation("OP-I", seed=15, variant="reconnect")
    assert report.succeeded
    assert report.evidence["victim_reconnect"].startswith("accept")
    assert report.evidence["attacker_retry_after_reconnect"].startswith("reject:")


def test_unknown_scenarios_and_variants_are_rejected():
    with pytest.raises(UnknownScenario):
        run_scenario("S3")
    with pytest.raises(UnknownScenario):
        scenario_usim_impersonation("OP-I", variant="nope")
    with pytest.raises(UnknownScenario):
        scenario_baseband_impersonation("OP-I", variant="stale")


# --- downstream consequences -----------------------------------------------


def test_one_tap_token_lands_in_attacker_custody():
    report = run_scenario("one-tap-bypass", "OP-I", seed=16)
    assert report.succeeded
    assert report.evidence["token_supi"] == VICTIM_SUPI
    assert report.evidence["holder_custody"] == "attacker"


def test_network_pages_the_wrong_base_station():
    report = run_scenario("location-spoofing", "OP-I", seed=16)
    assert report.succeeded
    assert report.evidence["network_view"] == ATTACKER_BS
    assert report.evidence["victim_actual_bs"] == VICTIM_BS


def test_downstream_scenarios_refuse_a_failed_base():
    base = scenario_baseband_impersonation(
        "OP-I", seed=17, cm=Countermeasures(iccid_binding=True)
    )
    with pytest.raises(PrerequisiteFailed):
        scenario_one_tap_bypass(base)


# --- matrix and reporting --------------------------------------------------


def test_matrix_matches_the_expected_verdicts():
    assert run_table_matrix(seed=0) == EXPECTED_MATRIX


def test_matrix_lines_are_plain_and_aligned():
    lines = matrix_lines(run_table_matrix(seed=0))
    assert lines[0].startswith("profile")
    assert len(lines) == 4
    assert lines[1].startswith("OP-I ") and " yes" in lines[1]
    assert lines[2].startswith("OP-II ") and " no" in lines[2]


def test_reports_and_traces_are_reproducible():
    a = scenario_baseband_impersonation("OP-I", seed=18)
    b = scenario_baseband_impersonation("OP-I", seed=18)
    assert a.to_lines() == b.to_lines()
    assert a.env.trace_lines() == b.env.trace_lines()
    assert a.env.event_lines() == b.env.event_lines()
    c = scenario_baseband_impersonation("OP-I", seed=19)
    assert c.env.trace_lines() != a.env.trace_lines()


def test_report_lines_carry_the_header_fields():
    report = scenario_usim_impersonation("OP-I", seed=20)
    lines = report.to_lines()
    assert lines[0] == "scenario S1"
    assert lines[1] == "profile OP-I"
    assert lines[2] == "seed 20"
    assert lines[3] == "variant default"
    assert lines[4] == "succeeded true"
    assert lines[5].startswith("window ")
    assert all(l.startswith("evidence ") for l in lines[6:])


def test_no_victim_key_material_reaches_the_air():
    report = scenario_baseband_impersonation("OP-I", seed=21)
    assert report.succeeded
    env = report.env
    card = env.meta["victim_card"]
    secrets = {card.k_permanent.octets.hex()}
    for entry in env.amf.table.values():
        if entry.supi == VICTIM_SUPI:
            secrets.add(entry.context.k_amf.octets.hex())
    blob = "\n".join(env.trace_lines())
    kit = env.meta["kit"]
    blob += "\n" + "\n".join(t.line() for t in kit.tap.entries)
    for secret in secrets:
        assert secret not in blob
    assert set(kit.known) == {"default_pin"}  # no oracle beyond public facts
