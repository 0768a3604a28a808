import numpy as np
import pytest

from cfmimo.channel import (
    assign_pilots, gamma_of_beta, pilot_book, sample_channels, simulate_pilot_estimation,
)
from cfmimo.config import SystemConfig, dbm_to_watt
from cfmimo.topology import drop_from_positions, gen_drop

from conftest import small_cfg


class TestPilots:
    def test_full_load(self):
        assert list(assign_pilots(20, 20).pilot_index) == list(range(1, 21))

    def test_single(self):
        assert list(assign_pilots(1, 20).pilot_index) == [1]

    def test_contamination_rejected(self):
        with pytest.raises(ValueError):
            assign_pilots(21, 20)

    def test_book_orthonormal(self):
        phi = pilot_book(7)
        assert np.allclose(phi.conj().T @ phi, np.eye(7), atol=1e-12)


class TestGamma:
    def test_plug_in(self):
        cfg = SystemConfig()
        assert cfg.sigma_p2 == pytest.approx(dbm_to_watt(-92))
        assert float(gamma_of_beta(1e-10, cfg)) == pytest.approx(9.969e-11, rel=1e-4)

    def test_zero_beta(self):
        assert float(gamma_of_beta(0.0, SystemConfig())) == 0.0

    def test_noiseless_limit(self):
        cfg = SystemConfig(sigma_p2=1e-30)
        assert float(gamma_of_beta(1e-10, cfg)) == pytest.approx(1e-10, rel=1e-9)

    def test_strictly_below_beta(self):
        beta = np.logspace(-16, -6, 50)
        g = gamma_of_beta(beta, SystemConfig())
        assert np.all((g > 0) & (g < beta))


class TestSampling:
    def test_moments_of_decomposition(self, rng):
        drop = gen_drop(small_cfg(M=3, K=2, N=2), 1)
        s = sample_channels(drop, rng, size=40_000)
        var_hat = np.mean(np.abs(s.g_hat) ** 2, axis=(0, 3))
        var_err = np.mean(np.abs(s.error) ** 2, axis=(0, 3))
        np.testing.assert_allclose(var_hat, drop.gamma, rtol=0.03)
        np.testing.assert_allclose(var_err, drop.beta - drop.gamma, rtol=0.03)

    def test_estimate_error_orthogonal(self, rng):
        drop = gen_drop(small_cfg(M=2, K=2), 1)
        S = 40_000
        s = sample_channels(drop, rng, size=S)
        a = s.g_hat[..., 0] / np.sqrt(drop.gamma)
        b = s.error[..., 0] / np.sqrt(drop.beta - drop.gamma)
        corr = np.abs(np.mean(a * b.conj(), axis=0))
        assert np.all(corr < 4 / np.sqrt(S))

    def test_zero_noise_exact_estimate(self, rng):
        cfg = small_cfg(M=1, K=1, N=2)
        drop = drop_from_positions(cfg, [[10.0, 10.0]], [[80.0, 50.0]])
        sim = simulate_pilot_estimation(drop, rng, size=10, sigma_p2=0.0)
        np.testing.assert_allclose(sim.g_hat, sim.g, atol=1e-12, rtol=0)

    def test_pilot_simulation_matches_gamma(self, rng):
        drop = gen_drop(small_cfg(M=3, K=3), 2)
        sim = simulate_pilot_estimation(drop, rng, size=10_000)
        emp = np.mean(np.abs(sim.g_hat[..., 0]) ** 2, axis=0)
        np.testing.assert_allclose(emp, drop.gamma, rtol=0.05)

    def test_distinct_pilots_independent(self, rng):
        drop = gen_drop(small_cfg(M=1, K=2), 2)
        S = 20_000
        sim = simulate_pilot_estimation(drop, rng, size=S)
        a = sim.g_hat[:, 0, 0, 0] / np.sqrt(drop.gamma[0, 0])
        b = sim.g[:, 0, 1, 0] / np.sqrt(drop.beta[0, 1])
        assert abs(np.mean(a * b.conj())) < 3 / np.sqrt(S)

    def test_simulation_and_decomposition_agree(self, rng):
        drop = gen_drop(small_cfg(M=2, K=2, N=2), 5)
        S = 30_000
        fast = sample_channels(drop, rng, size=S)
        slow = simulate_pilot_estimation(drop, rng, size=S)
        for x, y in ((fast.g_hat, slow.g_hat), (fast.g, slow.g)):
            vx = np.mean(np.abs(x) ** 2, axis=(0, 3))
            vy = np.mean(np.abs(y) ** 2, axis=(0, 3))
            np.testing.assert_allclose(vx, vy, rtol=0.05)
        cx = np.mean(fast.g_hat * fast.g.conj(), axis=(0, 3)).real
        cy = np.mean(slow.g_hat * slow.g.conj(), axis=(0, 3)).real
        np.testing.assert_allclose(cx, cy, rtol=0.05)

    def test_single_sample_shape(self, rng):
        drop = gen_drop(small_cfg(M=4, K=2, N=3), 0)
        s = sample_channels(drop, rng)
        assert s.g.shape == (4, 2, 3) and s.g_hat.shape == (4, 2, 3)
