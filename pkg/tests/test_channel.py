import numpy as np
import pytest

from edapnc.channel import (ChannelSet, DimensionError, FieldError, PowerConfig, RatePair, complex_to_real,
                            dumps_channel, generate_channel, load_channel, loads_channel, normalize_noise,
                            power_config, real_block, save_channel, snr_to_power, trial_seed, unit_noise_real)


def test_shapes_and_bit_identical_reruns():
    a = generate_channel(2, 2, "real", rng_seed=5)
    b = generate_channel(2, 2, "real", rng_seed=5)
    for name in ("h_ar", "h_br", "h_ra", "h_rb"):
        assert getattr(a, name).shape == (2, 2)
        assert getattr(a, name).tobytes() == getattr(b, name).tobytes()


def test_downlink_shapes_for_more_user_antennas():
    cs = generate_channel(4, 2, "complex", rng_seed=1)
    assert cs.h_ar.shape == (2, 4) and cs.h_ra.shape == (4, 2)
    assert np.iscomplexobj(cs.h_ar)


def test_different_seeds_differ():
    a = generate_channel(2, 2, rng_seed=1)
    b = generate_channel(2, 2, rng_seed=2)
    assert not np.array_equal(a.h_ar, b.h_ar)


@pytest.mark.parametrize("n_t,n_r", [(1, 2), (0, 0), (3, 0)])
def test_invalid_dimensions(n_t, n_r):
    with pytest.raises(DimensionError):
        generate_channel(n_t, n_r, rng_seed=0)


def test_unknown_field():
    with pytest.raises(FieldError):
        generate_channel(2, 2, "quaternion")


def test_reciprocal_downlink_is_transpose():
    cs = generate_channel(3, 2, reciprocal=True, rng_seed=4)
    assert np.array_equal(cs.h_ra, cs.h_ar.T)
    assert np.array_equal(cs.h_rb, cs.h_br.T)


def test_entry_statistics():
    # 10^5 draws of a 2x4 real channel set, 32 entries each
    n = 100_000
    ss = np.random.SeedSequence(77).spawn(n)
    x = np.concatenate([np.concatenate([m.ravel() for m in (c.h_ar, c.h_br, c.h_ra, c.h_rb)])
                        for c in (generate_channel(4, 2, rng_seed=s) for s in ss)])
    m = x.size
    assert abs(x.mean()) < 3 / np.sqrt(m)
    # var of the sample variance of N(0,1) is 2/m
    assert abs(x.var() - 1.0) < 3 * np.sqrt(2.0 / m)


def test_complex_entries_unit_variance():
    x = np.concatenate([generate_channel(4, 4, "complex", rng_seed=s).h_ar.ravel() for s in range(3000)])
    assert abs(np.mean(np.abs(x) ** 2) - 1.0) < 0.03
    assert abs(np.mean(x.real**2) - 0.5) < 0.02
    assert abs(np.mean(x.real * x.imag)) < 0.02


def test_rank_deficient_channelset_rejected():
    h = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(np.linalg.LinAlgError):
        ChannelSet(h, np.eye(2), np.eye(2), np.eye(2), 2, 2)


def test_channelset_shape_check():
    with pytest.raises(DimensionError):
        ChannelSet(np.eye(2), np.eye(2), np.eye(3), np.eye(2), 2, 2)


def test_real_block_scalars():
    assert np.array_equal(real_block(np.array([[1 + 0j]])), np.eye(2))
    assert np.array_equal(real_block(np.array([[1j]])), np.array([[0.0, -1.0], [1.0, 0.0]]))


def test_real_block_matches_complex_product(rng):
    h = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
    x = rng.standard_normal(2) + 1j * rng.standard_normal(2)
    y = h @ x
    got = real_block(h) @ np.concatenate([x.real, x.imag])
    assert np.max(np.abs(got - np.concatenate([y.real, y.imag]))) < 1e-12


def test_complex_to_real_dimensions_and_field():
    cs = generate_channel(3, 2, "complex", rng_seed=3)
    rs = complex_to_real(cs)
    assert (rs.n_t, rs.n_r, rs.field_tag) == (6, 4, "real")
    assert rs.h_ar.shape == (4, 6) and rs.h_ra.shape == (6, 4)
    with pytest.raises(FieldError):
        complex_to_real(rs)


def test_unit_noise_real_passthrough_and_scaling():
    rs = generate_channel(2, 2, rng_seed=3)
    assert unit_noise_real(rs) is rs
    cs = generate_channel(2, 2, "complex", rng_seed=3)
    assert np.allclose(unit_noise_real(cs).h_br, np.sqrt(2) * real_block(cs.h_br))


@pytest.mark.parametrize("snr,sigma,expected", [(0.0, 1.0, 2.0), (15.0, 1.0, 63.245553203367585), (10.0, 2.0, 40.0)])
def test_snr_to_power(snr, sigma, expected):
    assert snr_to_power(snr, sigma) == pytest.approx(expected, rel=1e-12)


def test_power_config_defaults():
    pc = power_config(20.0)
    assert pc.p_t == pytest.approx(200.0)
    assert pc.p_r == pytest.approx(100.0)
    assert pc.sigma_r2 == pc.sigma_a2 == pc.sigma_b2 == 1.0
    assert pc.snr_db == pytest.approx(20.0)
    assert power_config(10.0, 13.0).p_r == pytest.approx(10**1.3)


def test_power_config_positive():
    with pytest.raises(ValueError):
        PowerConfig(p_t=0.0, p_r=1.0)
    with pytest.raises(ValueError):
        PowerConfig(p_t=1.0, p_r=1.0, sigma_a2=-1.0)


def test_normalize_noise_scales_channels():
    cs = generate_channel(2, 2, rng_seed=8)
    pc = PowerConfig(1.0, 1.0, sigma_r2=4.0, sigma_a2=9.0, sigma_b2=1.0)
    ns = normalize_noise(cs, pc)
    assert np.allclose(ns.h_ar, cs.h_ar / 2) and np.allclose(ns.h_ra, cs.h_ra / 3)
    assert np.array_equal(ns.h_rb, cs.h_rb)


def test_rate_pair():
    r = RatePair(1.0, 3.0)
    assert r.total == 4.0
    assert r.weighted(0.25) == pytest.approx(2.5)
    assert tuple(r) == (1.0, 3.0)
    with pytest.raises(ValueError):
        RatePair(-0.1, 0.0)


@pytest.mark.parametrize("field", ["real", "complex"])
def test_text_round_trip(tmp_path, field):
    cs = generate_channel(3, 2, field, rng_seed=trial_seed(1, 2))
    back = loads_channel(dumps_channel(cs))
    for name in ("h_ar", "h_br", "h_ra", "h_rb"):
        assert np.array_equal(getattr(back, name), getattr(cs, name))
    path = tmp_path / "ch.txt"
    save_channel(cs, path)
    assert np.array_equal(load_channel(path).h_rb, cs.h_rb)


def test_text_format_rejects_garbage():
    with pytest.raises(ValueError):
        loads_channel("n_r 2\nn_t 2\nfield real\n")


def test_trial_seed_matches_spawn():
    a = np.random.default_rng(trial_seed(42, 3)).standard_normal(4)
    b = np.random.default_rng(np.random.SeedSequence(42).spawn(5)[3]).standard_normal(4)
    assert np.array_equal(a, b)
