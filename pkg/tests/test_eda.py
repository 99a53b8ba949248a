import numpy as np
import pytest

from edapnc.capacity import DownlinkFrontier, PointOffer
from edapnc.channel import PowerConfig, power_config
from edapnc.eda import (ConstraintError, PrecoderConfig, achievable_rate_pair, alignment_residual, downlink_rates,
                        eda_precoder, naive_precoder, normalize_rotation, precoders, stream_costs, transmit_power,
                        uplink_rates, validate_rotation)
from edapnc.linalg import SingularityError

from conftest import channel, orthonormal_rows, rotation


def _unit_row_k(rng, n):
    return normalize_rotation(rng.standard_normal((n, n)))


def test_naive_precoder_orthonormal_rows(rng):
    h = orthonormal_rows(rng, 2, 4)
    f = naive_precoder(h, np.eye(2))
    assert np.allclose(f, h.T) and np.allclose(h @ f, np.eye(2))
    assert np.all(naive_precoder(h, np.zeros((2, 2))) == 0)


def test_naive_precoder_residual(rng):
    for _ in range(20):
        h = rng.standard_normal((2, 4))
        psi = np.diag(rng.uniform(0, 3, 2))
        assert np.max(np.abs(h @ naive_precoder(h, psi) - psi)) < 1e-9


def test_naive_precoder_singular():
    with pytest.raises(SingularityError):
        naive_precoder(np.array([[1.0, 2.0, 0.0], [2.0, 4.0, 0.0]]), np.eye(2))


def test_eda_reduces_to_naive_bitwise(rng):
    for _ in range(10):
        h = rng.standard_normal((3, 5))
        psi = rng.uniform(0, 2, 3)
        assert np.array_equal(eda_precoder(h, np.eye(3), psi), naive_precoder(h, psi))


def test_eda_orthonormal_rows_rotation(rng):
    h = orthonormal_rows(rng, 2, 3)
    k = rotation(0.7)
    f = eda_precoder(h, k, np.eye(2))
    assert np.allclose(f, h.T @ k)
    assert np.allclose(np.linalg.solve(k, h @ f), np.eye(2))


def test_eda_alignment_residual_random(rng):
    for _ in range(50):
        n_r = int(rng.integers(2, 5))
        h = rng.standard_normal((n_r, n_r + int(rng.integers(0, 3))))
        k = _unit_row_k(rng, n_r)
        psi = rng.uniform(0, 5, n_r)
        assert alignment_residual(h, k, eda_precoder(h, k, psi), psi) < 1e-9


def test_eda_errors():
    h = np.eye(2)
    with pytest.raises(SingularityError):
        eda_precoder(h, np.array([[1.0, 1.0], [1.0, 1.0]]), np.eye(2))
    with pytest.raises(ConstraintError):
        eda_precoder(h, np.diag([2.0, 1.0]), np.eye(2))
    with pytest.raises(SingularityError):
        eda_precoder(np.array([[1.0, 1.0], [1.0, 1.0]]), np.eye(2), np.eye(2))


def test_validate_rotation_cases():
    assert validate_rotation(rotation(1.234))
    assert not validate_rotation(np.diag([2.0, 1.0]))
    assert not validate_rotation(np.zeros((2, 2)))
    t = np.deg2rad([0.0, 60.0])
    kinv = np.stack([np.cos(t), np.sin(t)], axis=1)
    assert validate_rotation(np.linalg.inv(kinv))


def test_normalize_rotation(rng):
    for _ in range(20):
        assert validate_rotation(_unit_row_k(rng, 3))


@pytest.mark.parametrize("pa,pb,ra,rb", [
    (1.0, 1.0, 0.5 * np.log2(1.5), 0.5 * np.log2(1.5)),
    (0.5, 1.0, 0.0, 0.5 * np.log2(0.8 + 1.0)),
    (10.0, 10.0, 0.5 * np.log2(100.5), 0.5 * np.log2(100.5)),
    (0.0, 0.0, 0.0, 0.0),
])
def test_uplink_rates_values(pa, pb, ra, rb):
    r = uplink_rates(np.diag([pa]), np.diag([pb]))
    assert r.r_a == pytest.approx(ra, abs=1e-12) and r.r_b == pytest.approx(rb, abs=1e-12)


def test_uplink_rates_clipping_case():
    # A's term log2(0.2 + 0.25) is negative and clipped
    assert uplink_rates([0.5], [1.0]).r_a == 0.0
    assert uplink_rates([0.5, 10.0], [1.0, 10.0]).r_a == pytest.approx(0.5 * np.log2(100.5), abs=1e-12)


def test_uplink_rates_negative_amplitude():
    with pytest.raises(ValueError):
        uplink_rates([-1.0], [1.0])


def test_downlink_rates(rng):
    assert tuple(downlink_rates(np.eye(2), np.eye(2), np.zeros((2, 2)))) == (0.0, 0.0)
    h = rng.standard_normal((3, 2))
    q = np.eye(2)
    r = downlink_rates(h, h, q)
    assert r.r_a == r.r_b
    # P_R = 2 n_R on identity channels: each (n_R / 2) log2 3
    r = downlink_rates(np.eye(3), np.eye(3), 2.0 * np.eye(3))
    assert r.r_a == pytest.approx(1.5 * np.log2(3))


def test_downlink_crossover(rng):
    h_ra = rng.standard_normal((2, 2))
    h_rb = 3 * rng.standard_normal((2, 2))
    r = downlink_rates(h_ra, h_rb, np.eye(2))
    assert r.r_a > r.r_b  # A's message travels over the stronger h_rb


def test_transmit_power_cases(rng):
    h = orthonormal_rows(rng, 2, 3)
    assert transmit_power(h, h, PrecoderConfig(np.eye(2), np.ones(2), np.ones(2))) == pytest.approx(4.0)
    assert transmit_power(h, h, PrecoderConfig(np.eye(2), np.zeros(2), np.zeros(2))) == 0.0


def test_transmit_power_two_routes(rng):
    for seed in range(50):
        cs = channel(seed, 3, 2)
        cfg = PrecoderConfig(_unit_row_k(rng, 2), rng.uniform(0, 3, 2), rng.uniform(0, 3, 2))
        pm = precoders(cs, cfg)
        direct = np.trace(pm.f_a @ pm.f_a.T) + np.trace(pm.f_b @ pm.f_b.T)
        assert abs(transmit_power(cs.h_ar, cs.h_br, cfg) - direct) <= 1e-9 * max(1.0, direct)


def test_stream_costs_identity_rotation():
    cs = channel(3)
    a, b = stream_costs(cs.h_ar, cs.h_br, np.eye(2))
    assert np.allclose(a, np.diag(np.linalg.inv(cs.h_ar @ cs.h_ar.T)))
    assert np.allclose(b, np.diag(np.linalg.inv(cs.h_br @ cs.h_br.T)))


def test_achievable_pair_cases():
    cs = channel(4)
    cfg = PrecoderConfig(np.eye(2), [0.3, 0.2], [0.1, 0.4])
    p = transmit_power(cs.h_ar, cs.h_br, cfg)
    huge = PowerConfig(p_t=p, p_r=1e9)
    q = 1e9 / 2 * np.eye(2)
    assert achievable_rate_pair(cs, huge, cfg, q) == uplink_rates(cfg.psi_a, cfg.psi_b)
    zero = PrecoderConfig(np.eye(2), [0, 0], [0, 0])
    assert tuple(achievable_rate_pair(cs, huge, zero, q)) == (0.0, 0.0)
    with pytest.raises(ConstraintError):
        achievable_rate_pair(cs, PowerConfig(p_t=0.5 * p, p_r=1.0), cfg, np.eye(2) * 0.5)
    with pytest.raises(ConstraintError):
        achievable_rate_pair(cs, huge, cfg, 1e10 * np.eye(2))


def test_achievable_pair_is_min_of_phases():
    cs = channel(5)
    pc = power_config(15.0)
    cfg = PrecoderConfig(np.eye(2), [0.5, 0.5], [0.5, 0.5])
    fr = DownlinkFrontier.from_channel(cs, pc)
    q = fr.match(PointOffer(10.0, 10.0), 0.5).q_r
    pair = achievable_rate_pair(cs, pc, cfg, q)
    ul = uplink_rates(cfg.psi_a, cfg.psi_b)
    dl = downlink_rates(cs.h_ra, cs.h_rb, q)
    assert pair.r_a == min(ul.r_a, dl.r_a) and pair.r_b == min(ul.r_b, dl.r_b)


def test_precoder_config_validation():
    cfg = PrecoderConfig(np.eye(2), np.diag([1.0, 2.0]), [3.0, 4.0])
    assert np.array_equal(cfg.psi_a, [1.0, 2.0]) and cfg.n_streams == 2
    with pytest.raises(ValueError):
        PrecoderConfig(np.eye(2), [1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        PrecoderConfig(np.eye(2), [1.0, -2.0], [1.0, 2.0])
