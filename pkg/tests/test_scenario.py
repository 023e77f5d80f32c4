from fractions import Fraction

import pytest

from ctipon.scenario import (ConfigError, default_scenario, dump_effective,
                             load_scenario, parse_scenario_text, resolve)


def write(tmp_path, text):
    path = tmp_path / "scenario.txt"
    path.write_text(text)
    return path


def test_minimal_file_applies_all_defaults(tmp_path):
    sc = load_scenario(write(tmp_path, "seed = 42\n"))
    assert sc.seed == 42
    assert sc.line_rate_bps == 9_953_280_000
    assert sc.capacity_bytes == 155_520
    assert sc.frame_ns == 125_000
    assert sc.slot_ns == 500_000
    assert sc.k2_slots == 2
    assert sc.background_onus == 3
    assert sc.duration_ns == 2_000_000_000
    assert sc.warmup_ns == 10_000_000


def test_no_file_means_defaults():
    sc = load_scenario(None)
    assert sc.seed == 1
    assert len(sc.sweep_fractions) == 7


def test_negative_line_rate_names_the_key(tmp_path):
    with pytest.raises(ConfigError, match="pon.line_rate_gbps"):
        load_scenario(write(tmp_path, "pon.line_rate_gbps = -1\n"))


def test_unknown_key_rejected_with_location(tmp_path):
    with pytest.raises(ConfigError, match="pon.colour"):
        load_scenario(write(tmp_path, "pon.colour = blue\n"))


def test_duplicate_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="duplicate"):
        load_scenario(write(tmp_path, "seed = 1\nseed = 2\n"))


def test_bad_number_names_key(tmp_path):
    with pytest.raises(ConfigError, match="ran.k2_slots"):
        load_scenario(write(tmp_path, "ran.k2_slots = soon\n"))


def test_default_sweep_has_seven_fractions(tmp_path):
    sc = load_scenario(write(tmp_path, "sweep.fractions = 0.5,0.6,0.7,0.8,0.9,1.0,1.1\n"))
    assert len(sc.sweep_fractions) == 7
    assert sc.sweep_fractions[0] == Fraction(1, 2)
    assert sc.sweep_fractions[-1] == Fraction(11, 10)


def test_warmup_must_be_shorter_than_duration(tmp_path):
    with pytest.raises(ConfigError, match="warmup_ms"):
        load_scenario(write(tmp_path, "duration_ms = 10\nwarmup_ms = 10\n"))


def test_packet_size_bounded_by_mtu(tmp_path):
    with pytest.raises(ConfigError, match="traffic.packet_bytes"):
        load_scenario(write(tmp_path, "traffic.packet_bytes = 2000\n"))


def test_loss_probability_range_checked(tmp_path):
    with pytest.raises(ConfigError, match="cti.loss_probability"):
        load_scenario(write(tmp_path, "cti.loss_probability = 1.5\n"))


def test_comments_and_blank_lines_ignored(tmp_path):
    sc = load_scenario(write(tmp_path, "# a comment\n\nseed = 9  # trailing note\n"))
    assert sc.seed == 9


def test_overrides_take_precedence(tmp_path):
    sc = load_scenario(write(tmp_path, "seed = 1\n"), overrides={"seed": "77"})
    assert sc.seed == 77


def test_effective_dump_round_trips(tmp_path):
    sc = load_scenario(write(tmp_path, "seed = 13\ntraffic.background_fraction = 0.9\n"))
    dumped = dump_effective(sc)
    again = resolve(parse_scenario_text(dumped))
    assert again == sc


def test_rates_parse_exactly():
    sc = default_scenario()
    assert sc.fronthaul_overhead_factor == Fraction(11, 10)
    assert sc.ue_fraction == Fraction(3, 20)
    # the backlogged transport block reproduces the offered fraction exactly
    assert sc.fronthaul_offered_bytes_per_slot() == 93_312
    assert sc.max_tbs_bytes == 84_829
