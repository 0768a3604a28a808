import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfmimo.config import ConfigError, SystemConfig
from cfmimo.topology import (
    NetworkDrop, cost_hata_loss_db, drop_from_positions, gen_drop, gen_piazza_drop,
    gen_random_drop, path_loss_db, piazza_positions, wrap_distance,
)

from conftest import small_cfg

CFG = SystemConfig()


class TestConfig:
    def test_defaults_validate(self):
        CFG.validate()
        assert CFG.tau_c == CFG.tau_p + CFG.tau_d + CFG.tau_u

    def test_prelog(self):
        # B (1 - (tau_p + tau_d)/tau_c) with the default split
        assert CFG.bandwidth_hz * CFG.prelog == pytest.approx(9e6)

    @pytest.mark.parametrize("change", [
        {"tau_c": 201},
        {"K": 21},
        {"d0": 60.0},
        {"d1": 400.0},
        {"M": 0},
        {"rho_u": 0.0},
        {"distance_unit": "mile"},
    ])
    def test_invalid_rejected(self, change):
        with pytest.raises(ConfigError):
            CFG.replace(**change)

    def test_from_dict_rejects_unknown(self):
        with pytest.raises(ConfigError, match="unknown"):
            SystemConfig.from_dict({"M": 10, "bogus": 1})

    def test_round_trip(self):
        cfg = small_cfg()
        assert SystemConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


class TestPathLoss:
    def test_cost_hata_constant(self):
        # hand evaluation: 46.3 + 33.9*log10(1900) - 13.82*log10(10)
        #   - (1.1*log10(1900) - 0.7)*1.65 + 1.56*log10(1900) - 0.8
        lf = math.log10(1900)
        hand = 46.3 + 33.9 * lf - 13.82 - (1.1 * lf - 0.7) * 1.65 + 1.56 * lf - 0.8
        assert cost_hata_loss_db(CFG) == pytest.approx(hand, abs=1e-12)
        assert cost_hata_loss_db(CFG) == pytest.approx(143.15, abs=5e-3)

    @pytest.mark.parametrize("d", [0.0, 1.0, 5.0, 10.0])
    def test_plateau(self, d):
        plateau = -15 * math.log10(50) - 20 * math.log10(10)
        assert plateau == pytest.approx(-45.485, abs=1e-3)
        assert path_loss_db(d, CFG) == pytest.approx(-cost_hata_loss_db(CFG) + plateau, abs=1e-12)

    @pytest.mark.parametrize("unit", ["m", "km"])
    def test_continuity_at_breakpoints(self, unit):
        cfg = CFG.replace(distance_unit=unit)
        for x in (cfg.d0, cfg.d1):
            left = path_loss_db(x * (1 - 1e-12), cfg)
            right = path_loss_db(x * (1 + 1e-12), cfg)
            assert abs(left - right) < 1e-9

    def test_outer_branch_literal(self):
        assert path_loss_db(100.0, CFG) == pytest.approx(-cost_hata_loss_db(CFG) - 70.0, abs=1e-12)

    def test_km_unit_shifts_far_slope(self):
        km = CFG.replace(distance_unit="km")
        # -35 log10(0.1 km) = +35 dB
        assert path_loss_db(100.0, km) == pytest.approx(-cost_hata_loss_db(CFG) + 35.0, abs=1e-12)

    def test_monotone_beyond_d0(self):
        d = np.linspace(CFG.d0, 500.0, 2000)
        pl = path_loss_db(d, CFG)
        assert np.all(np.diff(pl) <= 1e-12)


class TestWrapDistance:
    def test_torus_neighbour(self):
        assert wrap_distance(np.array([0.0, 0.0]), np.array([299.0, 0.0]), 300.0) == pytest.approx(1.0)

    def test_identity(self):
        p = np.array([12.3, 45.6])
        assert wrap_distance(p, p, 300.0) == 0.0

    def test_diagonal(self):
        d = wrap_distance(np.array([0.0, 0.0]), np.array([150.0, 150.0]), 300.0)
        assert d == pytest.approx(150 * math.sqrt(2), abs=1e-9)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(0, 299.999), min_size=6, max_size=6))
    def test_symmetry_translation_bound(self, xs):
        D = 300.0
        p, q, s = np.array(xs[:2]), np.array(xs[2:4]), np.array(xs[4:])
        d = wrap_distance(p, q, D)
        assert d == pytest.approx(wrap_distance(q, p, D), abs=1e-9)
        assert d == pytest.approx(wrap_distance((p + s) % D, (q + s) % D, D), abs=1e-9)
        assert d <= D * math.sqrt(2) / 2 + 1e-9


class TestDrops:
    def test_random_shapes_and_range(self):
        drop = gen_random_drop(CFG, seed=7)
        assert drop.ap_pos.shape == (200, 2) and drop.user_pos.shape == (20, 2)
        assert drop.beta.shape == (200, 20)
        for pos in (drop.ap_pos, drop.user_pos):
            assert np.all((pos >= 0) & (pos < 300))

    def test_gamma_below_beta(self):
        drop = gen_random_drop(small_cfg(M=40, K=5), seed=2)
        assert np.all(drop.beta > 0) and np.all(np.isfinite(drop.beta))
        assert np.all((drop.gamma > 0) & (drop.gamma < drop.beta))

    def test_deterministic(self):
        a, b = gen_random_drop(CFG, 11), gen_random_drop(CFG, 11)
        for f in ("ap_pos", "user_pos", "beta", "gamma"):
            assert np.array_equal(getattr(a, f), getattr(b, f))

    def test_user_at_ap_is_plateau(self):
        cfg = small_cfg(M=1, K=1)
        drop = drop_from_positions(cfg, [[50.0, 50.0]], [[50.0, 50.0]])
        assert 10 * np.log10(drop.beta[0, 0]) == pytest.approx(path_loss_db(0.0, cfg), abs=1e-9)

    def test_piazza_corners(self):
        pts = piazza_positions(4, 300.0)
        assert np.allclose(pts, [[0, 0], [0, 300], [300, 300], [300, 0]])

    def test_piazza_spacing(self):
        pts = piazza_positions(200, 300.0)
        gaps = np.linalg.norm(np.diff(np.vstack([pts, pts[:1]]), axis=0), axis=1)
        assert np.allclose(gaps, 6.0)

    def test_piazza_remainder_on_last_side(self):
        pts = piazza_positions(6, 300.0)
        # one AP per side, the two leftovers share the bottom side with corner (300, 0)
        assert np.allclose(pts, [[0, 0], [0, 300], [300, 300], [300, 0], [200, 0], [100, 0]])

    def test_users_shared_across_topologies(self):
        a = gen_random_drop(CFG, 5)
        b = gen_piazza_drop(CFG, 5)
        assert np.array_equal(a.user_pos, b.user_pos)
        assert b.topology_kind == "piazza"

    def test_unknown_topology(self):
        with pytest.raises(ValueError):
            gen_drop(CFG, 0, "hexagonal")

    def test_json_round_trip(self, tmp_path):
        drop = gen_drop(small_cfg(), 4, "piazza")
        path = tmp_path / "d.json"
        drop.to_json(path)
        back = NetworkDrop.from_json(path)
        assert np.array_equal(back.beta, drop.beta) and back.cfg == drop.cfg
        assert back.topology_kind == "piazza"

    def test_immutable(self):
        drop = gen_drop(small_cfg(), 4)
        with pytest.raises(ValueError):
            drop.beta[0, 0] = 1.0
