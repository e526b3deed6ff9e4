import subprocess
import sys

import pytest

from pptarp.core import (
    ConfigError,
    ContentionResource,
    SystemConfig,
    contention_space,
    hopping_pattern,
    parse_config_text,
    validate,
)


def test_table2_config_has_eight_partial_units():
    cfg = validate(SystemConfig(xi=5, nu=4, m_base=64, m_partial=8))
    assert cfg.n_partial_units == 8
    assert cfg.n_resources == 96


def test_full_length_partial_is_baseline():
    cfg = SystemConfig(m_base=16, m_partial=16)
    assert cfg.n_partial_units == 1


@pytest.mark.parametrize("m_p", [24, 3, 0, -4])
def test_rejects_non_power_of_two(m_p):
    with pytest.raises(ConfigError, match="power of two"):
        SystemConfig(m_base=64, m_partial=m_p)


def test_rejects_partial_longer_than_base():
    with pytest.raises(ConfigError, match="divide"):
        SystemConfig(m_base=16, m_partial=32)


def test_rejects_exponent_above_seven():
    with pytest.raises(ConfigError):
        SystemConfig(m_base=256, m_partial=256)


@pytest.mark.parametrize("field", ["xi", "nu", "n_preambles", "m_base"])
def test_rejects_nonpositive_counts(field):
    with pytest.raises(ConfigError):
        SystemConfig(**{field: 0})


def test_zero_devices_allowed():
    assert SystemConfig(n_devices=0).n_devices == 0
    with pytest.raises(ConfigError):
        SystemConfig(n_devices=-1)


def test_db_converted_once():
    cfg = SystemConfig(snr_db=-10.0, threshold_db=10.0)
    assert cfg.snr_linear == pytest.approx(0.1)
    assert cfg.threshold_linear == pytest.approx(10.0)
    assert SystemConfig().threshold_linear is None


@pytest.mark.parametrize("m_b", [1, 2, 4, 8, 16, 32, 64, 128])
def test_partition_geometry(m_b):
    for q in range(m_b.bit_length()):
        cfg = SystemConfig(m_base=m_b, m_partial=2**q)
        assert cfg.n_partial_units * cfg.m_partial == cfg.m_base
        assert cfg.partial_length == cfg.nu * cfg.m_partial
        assert cfg.base_length == cfg.n_partial_units * cfg.partial_length


def test_contention_space_size():
    cfg = SystemConfig(n_preambles=12, m_base=64, m_partial=16)
    space = contention_space(cfg)
    assert len(space) == len(set(space)) == 48
    for res in space:
        assert ContentionResource.from_flat(res.flat_index(4), 4) == res


def test_hopping_pattern_deterministic():
    a = hopping_pattern(0, 4, 12)
    assert len(a) == 4
    assert a == hopping_pattern(0, 4, 12)


def test_hopping_pattern_same_across_processes():
    code = "from pptarp.core import hopping_pattern; print(hopping_pattern(5, 32, 12))"
    out = subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True)
    assert out.stdout.strip() == str(hopping_pattern(5, 32, 12))


@pytest.mark.parametrize("n_sc", [12, 24, 48])
def test_hopping_pattern_orthogonal(n_sc):
    length = 8 * 4 * 64
    patterns = [hopping_pattern(i, length, n_sc) for i in range(n_sc)]
    for l in range(length):
        assert len({p[l] for p in patterns}) == n_sc


def test_hopping_pattern_range_checked():
    with pytest.raises(ValueError):
        hopping_pattern(12, 4, 12)
    with pytest.raises(ValueError):
        hopping_pattern(-1, 4, 12)


def test_config_text():
    text = """
    # Table I
    xi = 5
    nu = 4
    n_preambles = 12   # N_P
    m_base = 64
    m_partial = 8
    snr_db = -5
    n_devices = 5
    threshold_db = none
    seed = 42
    """
    cfg = SystemConfig(**parse_config_text(text))
    assert cfg.m_partial == 8 and cfg.snr_db == -5.0 and cfg.seed == 42
    assert cfg.threshold_db is None


@pytest.mark.parametrize("line", ["bogus = 1", "xi 5", "xi = five"])
def test_config_text_errors(line):
    with pytest.raises(ConfigError):
        parse_config_text(line)


def test_config_is_frozen():
    cfg = SystemConfig()
    with pytest.raises(AttributeError):
        cfg.m_partial = 8
