import math
import textwrap

import numpy as np
import pytest
from inline_snapshot import snapshot

from spatial_ssf.core import LinkGeometry
from spatial_ssf.lsf import (
    ConfigError,
    ParamDistribution,
    bs_is_rx,
    default_config_path,
    load_config,
    load_scenario,
    sample_lsf,
)

BS = (0.0, 0.0, 10.0)
MT = (80.0, 30.0, 1.5)

FLAT = textwrap.dedent(
    """\
    scenario = "flat"
    frequencies_ghz = [2.0, 28.0]

    [LOS]
    path_count = {path_count}
    ds = {{ mu = -7.0 }}
    asd = {{ mu = 1.0 }}
    asa = {{ mu = 1.5 }}
    esd = {{ mu = 0.5 }}
    esa = {{ mu = 0.8 }}
    kf = {{ mu = 6.0 }}
    """
)


def _write(tmp_path, text, name="scenario.toml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


@pytest.fixture(scope="module")
def umi():
    return load_scenario(default_config_path())


def test_shipped_config_loads(umi):
    assert sorted(umi) == ["LOS", "NLOS"]
    los, nlos = umi["LOS"], umi["NLOS"]
    assert los.frequencies_ghz == (1.0, 6.0, 60.0)
    assert los.scenario == "UMi"
    assert (los.path_count, nlos.path_count) == snapshot((12, 19))
    assert los.delay_acf.d_lambda == 12.0
    assert nlos.angle_acf.d_lambda == 15.0
    assert los.min_frequency_ghz == 2.0


def test_load_config_picks_condition():
    cfg = load_config(default_config_path(), "NLOS")
    assert cfg.condition == "NLOS"
    assert cfg.kf.mu == -30.0


def test_empty_file_is_rejected(tmp_path):
    with pytest.raises(ConfigError, match="empty"):
        load_config(_write(tmp_path, "  \n"))


def test_single_path_is_rejected(tmp_path):
    with pytest.raises(ConfigError) as err:
        load_config(_write(tmp_path, FLAT.format(path_count=1)))
    assert str(err.value) == snapshot("LOS.path_count: path_count must be ≥ 2")


def test_toml_syntax_error_is_reported_with_position(tmp_path):
    with pytest.raises(ConfigError, match="line 2"):
        load_config(_write(tmp_path, 'scenario = "x"\nfrequencies_ghz = [1.0,,]\n\n[LOS]\n'))


def test_unknown_keys_are_rejected(tmp_path):
    text = FLAT.format(path_count=4).replace("kf = {", "kf = { bogus = 1.0,")
    with pytest.raises(ConfigError, match="LOS.kf.bogus"):
        load_config(_write(tmp_path, text))
    with pytest.raises(ConfigError, match="unknown top-level keys"):
        load_config(_write(tmp_path, "colour = 1\n" + FLAT.format(path_count=4)))


def test_section_cannot_override_condition(tmp_path):
    text = FLAT.format(path_count=4).replace("[LOS]\n", '[LOS]\ncondition = "NLOS"\n')
    with pytest.raises(ConfigError, match="LOS.condition"):
        load_config(_write(tmp_path, text))


def test_missing_condition_section(tmp_path):
    path = _write(tmp_path, FLAT.format(path_count=4))
    with pytest.raises(ConfigError, match=r"no \[NLOS\] section"):
        load_config(path, "NLOS")


def test_unreadable_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.toml")


def test_negative_sigma_is_rejected():
    with pytest.raises(ValueError):
        ParamDistribution(mu=1.0, sigma=-0.1)


def test_duplicate_frequency_override_is_rejected(umi):
    with pytest.raises(ConfigError, match="distinct"):
        umi["LOS"].with_frequencies([6.0, 6.0])


def test_degenerate_distribution_returns_configured_means(tmp_path):
    cfg = load_config(_write(tmp_path, FLAT.format(path_count=4)))
    lsf = sample_lsf(cfg, LinkGeometry(BS, MT), rng_seed=123)
    assert lsf.ds == pytest.approx([10**-7.0] * 2, rel=1e-15)
    assert lsf.asd == pytest.approx([math.radians(10**1.0)] * 2, rel=1e-15)
    assert lsf.esa == pytest.approx([math.radians(10**0.8)] * 2, rel=1e-15)
    assert lsf.kf == pytest.approx([10**0.6] * 2, rel=1e-15)


def test_linear_spreads_are_capped(tmp_path):
    text = FLAT.format(path_count=4).replace(
        "asa = { mu = 1.5 }", "asa = { mu = 3.0, cap = 104.0 }"
    )
    cfg = load_config(_write(tmp_path, text))
    lsf = sample_lsf(cfg, LinkGeometry(BS, MT), rng_seed=0)
    assert lsf.asa == pytest.approx([math.radians(104.0)] * 2)


def test_los_kf_sample_mean(umi):
    cfg = umi["LOS"]
    geom = LinkGeometry(BS, MT)
    kf_db = np.array([sample_lsf(cfg, geom, s).kf_db[0] for s in range(10_000)])
    assert kf_db.mean() == pytest.approx(9.0, abs=0.2)
    assert kf_db.std() == pytest.approx(5.0, abs=0.2)


def test_nlos_kf_is_small_but_positive(umi):
    lsf = sample_lsf(umi["NLOS"], LinkGeometry(BS, MT), 4)
    assert lsf.kf_db == pytest.approx([-30.0] * 3)
    assert np.all(lsf.kf > 0)


def test_low_elevation_spread_median(tmp_path):
    text = FLAT.format(path_count=4).replace(
        "esd = { mu = 0.5 }", f"esd = {{ mu = {math.log10(0.6)!r}, sigma = 0.35 }}"
    )
    cfg = load_config(_write(tmp_path, text))
    geom = LinkGeometry(BS, MT)
    esd_deg = np.rad2deg([sample_lsf(cfg, geom, s).esd[0] for s in range(10_000)])
    assert np.median(esd_deg) == pytest.approx(0.6, rel=0.1)


def test_frequency_trend_survives_in_medians(umi):
    cfg = umi["NLOS"]
    geom = LinkGeometry(BS, MT)
    ds = np.array([sample_lsf(cfg, geom, s).ds for s in range(2000)])
    median = np.median(ds, axis=0)
    assert median[2] < median[1] < median[0]


def test_frequencies_below_floor_share_values(umi):
    cfg = umi["LOS"].with_frequencies([1.0, 2.0])
    lsf = sample_lsf(cfg, LinkGeometry(BS, MT), 9)
    for name in ("ds", "asd", "asa", "esd", "esa", "kf"):
        values = getattr(lsf, name)
        assert values[0] == values[1], name


def test_sampling_is_deterministic_per_seed(umi):
    cfg, geom = umi["LOS"], LinkGeometry(BS, MT)
    a, b, c = (sample_lsf(cfg, geom, s) for s in (5, 5, 6))
    assert np.array_equal(a.ds, b.ds) and np.array_equal(a.asa, b.asa)
    assert not np.array_equal(a.ds, c.ds)


def test_bs_side_follows_geometry():
    assert not bs_is_rx(LinkGeometry(BS, MT))
    assert bs_is_rx(LinkGeometry(MT, BS))
    # equal heights fall back to x, then y
    assert bs_is_rx(LinkGeometry((0.0, 0.0, 1.5), (1.0, 0.0, 1.5)))


def test_swapping_link_ends_swaps_spreads(umi):
    cfg = umi["LOS"]
    geom = LinkGeometry(BS, MT)
    fwd = sample_lsf(cfg, geom, 17)
    rev = sample_lsf(cfg, geom.swapped(), 17)
    assert np.array_equal(rev.ds, fwd.ds)
    assert np.array_equal(rev.kf, fwd.kf)
    assert np.array_equal(rev.asd, fwd.asa)
    assert np.array_equal(rev.asa, fwd.asd)
    assert np.array_equal(rev.esd, fwd.esa)
    assert np.array_equal(rev.esa, fwd.esd)
