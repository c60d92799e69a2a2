from dataclasses import replace

import numpy as np
from django.test import SimpleTestCase

from beamforming.channel import (
    ChannelModelConfig,
    Cluster,
    CsiErrorModel,
    Geometry,
    GeometryConfig,
    LinkType,
    PathlossModel,
    build_geometry,
    draw_channels,
    pathloss,
    perturb_csi,
)
from beamforming.exceptions import ConfigError, DegenerateInputError
from beamforming.system_model import SystemConfig

from .helpers import SMALL_SYSTEM, random_channels, small_config

MODEL = PathlossModel()


def single_link_geometry() -> Geometry:
    return Geometry(
        bs_positions=np.array([[0.0, 0.0, 5.0]]),
        ris_positions=np.array([[30.0, 40.0, 5.0]]),
        ue_positions=np.array([[60.0, 80.0, 5.0]]),
    )


class PathlossTestCase(SimpleTestCase):
    """Distance-dependent link gains"""

    def test_reference_distance_gives_pl0(self):
        """Test reference distance gives pl0"""
        for link in LinkType:
            self.assertAlmostEqual(pathloss(1.0, link, MODEL) / 1e-3, 1.0, places=12)

    def test_ris_ue_at_hundred_meters(self):
        """Test RIS UE at hundred meters"""
        self.assertAlmostEqual(pathloss(100.0, LinkType.RIS_UE, MODEL) / 10.0 ** -7.4, 1.0, places=10)

    def test_decreasing_in_distance(self):
        """Test decreasing in distance"""
        d = np.linspace(1.0, 500.0, 200)
        for link in ("bs_ue", "bs_ris", "ris_ue"):
            gains = pathloss(d, link, MODEL)
            self.assertTrue(np.all(np.diff(gains) < 0))

    def test_non_positive_distance_rejected(self):
        """Test non-positive distance rejected"""
        with self.assertRaises(DegenerateInputError):
            pathloss(0.0, LinkType.BS_UE, MODEL)
        with self.assertRaises(DegenerateInputError):
            pathloss(np.array([3.0, -1.0]), LinkType.BS_RIS, MODEL)

    def test_invalid_exponent_names_key(self):
        """Test invalid exponent names key"""
        with self.assertRaises(ConfigError) as ctx:
            PathlossModel(exp_bs_ris=0.0).validate()
        self.assertEqual(ctx.exception.key, "pathloss.exp_bs_ris")


class GeometryTestCase(SimpleTestCase):
    """Node placement"""

    def test_default_bs_positions(self):
        """Test default BS positions"""
        positions = GeometryConfig().resolved_bs_positions(4)
        np.testing.assert_array_equal(positions[:, 0], [0.0, 50.0, 100.0, 150.0])
        np.testing.assert_array_equal(positions[:, 1], 0.0)
        np.testing.assert_array_equal(positions[:, 2], 5.0)

    def test_zero_radius_places_users_at_centers(self):
        """Test zero radius places users at centers"""
        config = GeometryConfig(clusters=(Cluster((10.0, 20.0), 0.0, 2), Cluster((30.0, 40.0), 0.0, 2)))
        geometry = build_geometry(5, config, SystemConfig())
        np.testing.assert_allclose(geometry.ue_positions[:2, :2], [[10.0, 20.0]] * 2)
        np.testing.assert_allclose(geometry.ue_positions[2:, :2], [[30.0, 40.0]] * 2)
        np.testing.assert_array_equal(geometry.ue_positions[:, 2], 1.5)

    def test_users_stay_inside_their_disc(self):
        """Test users stay inside their disc"""
        config = GeometryConfig()
        for seed in range(20):
            geometry = build_geometry(seed, config, SystemConfig())
            start = 0
            for cluster in config.clusters:
                block = geometry.ue_positions[start : start + cluster.count, :2]
                offsets = np.linalg.norm(block - np.asarray(cluster.center), axis=1)
                self.assertTrue(np.all(offsets <= cluster.radius + 1e-12))
                start += cluster.count

    def test_same_seed_same_geometry(self):
        """Test same seed same geometry"""
        first = build_geometry(42, GeometryConfig(), SystemConfig())
        second = build_geometry(42, GeometryConfig(), SystemConfig())
        np.testing.assert_array_equal(first.ue_positions, second.ue_positions)

    def test_cluster_count_mismatch(self):
        """Test cluster count mismatch"""
        with self.assertRaises(ConfigError) as ctx:
            build_geometry(0, GeometryConfig(), SystemConfig(U=3))
        self.assertEqual(ctx.exception.key, "geometry.clusters")

    def test_ris_count_mismatch(self):
        """Test RIS count mismatch"""
        with self.assertRaises(ConfigError) as ctx:
            GeometryConfig().validate(SystemConfig(R=3))
        self.assertEqual(ctx.exception.key, "geometry.ris_positions")

    def test_co_located_nodes_rejected(self):
        """Test co-located nodes rejected"""
        config = GeometryConfig(bs_positions=((65.0, 60.0, 6.0),) * 4)
        with self.assertRaises(DegenerateInputError):
            build_geometry(0, config, SystemConfig())

    def test_distance_matrices(self):
        """Test distance matrices"""
        geometry = single_link_geometry()
        self.assertAlmostEqual(float(geometry.bs_ris_distances[0, 0]), 50.0)
        self.assertAlmostEqual(float(geometry.ris_ue_distances[0, 0]), 50.0)
        self.assertAlmostEqual(float(geometry.bs_ue_distances[0, 0]), 100.0)


class DrawChannelsTestCase(SimpleTestCase):
    """Wideband Rayleigh realizations"""

    def setUp(self):
        self.config = small_config()
        self.geometry = build_geometry(1, self.config.geometry, self.config.system)

    def test_shapes(self):
        """Test shapes"""
        system = self.config.system
        channels = draw_channels(2, self.geometry, MODEL, system)
        self.assertEqual(channels.h.shape, (system.B, system.U, system.K, system.N))
        self.assertEqual(channels.H.shape, (system.B, system.R, system.K, system.M, system.N))
        self.assertEqual(channels.g.shape, (system.R, system.U, system.K, system.M))
        self.assertTrue(channels.is_finite())
        self.assertEqual(channels.dims["M"], system.M)

    def test_deterministic_per_seed(self):
        """Test deterministic per seed"""
        first = draw_channels(9, self.geometry, MODEL, self.config.system)
        second = draw_channels(9, self.geometry, MODEL, self.config.system)
        other = draw_channels(10, self.geometry, MODEL, self.config.system)
        np.testing.assert_array_equal(first.h, second.h)
        np.testing.assert_array_equal(first.H, second.H)
        self.assertFalse(np.array_equal(first.g, other.g))

    def test_single_tap_is_frequency_flat(self):
        """Test single tap is frequency flat"""
        system = replace(SMALL_SYSTEM, K=8)
        channels = draw_channels(3, self.geometry, MODEL, system, ChannelModelConfig(taps=1))
        np.testing.assert_allclose(channels.h, np.repeat(channels.h[:, :, :1], 8, axis=2), rtol=1e-12)
        np.testing.assert_allclose(channels.g, np.repeat(channels.g[:, :, :1], 8, axis=2), rtol=1e-12)

    def test_taps_outside_grid_rejected(self):
        """Test taps outside grid rejected"""
        with self.assertRaises(ConfigError) as ctx:
            draw_channels(0, self.geometry, MODEL, SMALL_SYSTEM, ChannelModelConfig(taps=5))
        self.assertEqual(ctx.exception.key, "channel.taps")

    def test_entry_variance_equals_pathloss(self):
        """Test entry variance equals pathloss"""
        system = SystemConfig(B=1, N=20000, U=1, R=1, M=1, K=4)
        geometry = single_link_geometry()
        for model in (ChannelModelConfig(taps=4), ChannelModelConfig(taps=4, iid_subcarriers=True)):
            channels = draw_channels(4, geometry, MODEL, system, model)
            expected_h = pathloss(100.0, LinkType.BS_UE, MODEL)
            expected_H = pathloss(50.0, LinkType.BS_RIS, MODEL)
            for k in range(system.K):
                var_h = float(np.mean(np.abs(channels.h[0, 0, k]) ** 2))
                var_H = float(np.mean(np.abs(channels.H[0, 0, k, 0]) ** 2))
                self.assertLess(abs(var_h / expected_h - 1.0), 0.05)
                self.assertLess(abs(var_H / expected_H - 1.0), 0.05)

    def test_stacking_follows_ris_order(self):
        """Test stacking follows RIS order"""
        system = replace(SMALL_SYSTEM, R=2)
        channels = random_channels(5, system)
        M = system.M
        stacked_H = channels.stacked_H()
        stacked_g = channels.stacked_g()
        self.assertEqual(stacked_H.shape, (system.B, system.K, system.RM, system.N))
        self.assertEqual(stacked_g.shape, (system.U, system.K, system.RM))
        np.testing.assert_array_equal(stacked_H[1, 0, M + 2], channels.H[1, 1, 0, 2])
        np.testing.assert_array_equal(stacked_g[0, 1, M + 3], channels.g[1, 0, 1, 3])

    def test_for_bs_keeps_only_own_links(self):
        """Test for_bs keeps only own links"""
        channels = random_channels(6)
        local = channels.for_bs(1)
        self.assertEqual(local.h.shape[0], 1)
        self.assertEqual(local.H.shape[0], 1)
        np.testing.assert_array_equal(local.h[0], channels.h[1])
        np.testing.assert_array_equal(local.g, channels.g)


class PerturbCsiTestCase(SimpleTestCase):
    """CSI error injection"""

    def setUp(self):
        self.channels = random_channels(0, SystemConfig(B=1, N=5000, U=2, R=1, M=2, K=4))

    def test_zero_delta_is_exact(self):
        """Test zero delta is exact"""
        estimate = perturb_csi(1, self.channels, CsiErrorModel(delta=0.0))
        np.testing.assert_array_equal(estimate.h, self.channels.h)
        np.testing.assert_array_equal(estimate.H, self.channels.H)
        self.assertIsNot(estimate.h, self.channels.h)

    def test_error_power_is_relative(self):
        """Test error power is relative"""
        estimate = perturb_csi(1, self.channels, CsiErrorModel(delta=0.2))
        ratio = np.abs(estimate.h - self.channels.h) ** 2 / np.abs(self.channels.h) ** 2
        self.assertLess(abs(float(np.mean(ratio)) / 0.2 - 1.0), 0.05)

    def test_errors_are_uncorrelated(self):
        """Test errors are uncorrelated"""
        estimate = perturb_csi(2, self.channels, CsiErrorModel(delta=0.2))
        z = ((estimate.h - self.channels.h) / np.abs(self.channels.h)).ravel() / np.sqrt(0.2)
        correlation = abs(np.mean(z[:-1] * np.conj(z[1:])))
        self.assertLess(correlation, 4.0 / np.sqrt(z.size))

    def test_same_seed_is_bit_identical(self):
        """Test same seed is bit identical"""
        first = perturb_csi(3, self.channels, CsiErrorModel())
        second = perturb_csi(3, self.channels, CsiErrorModel())
        np.testing.assert_array_equal(first.h, second.h)
        np.testing.assert_array_equal(first.g, second.g)

    def test_negative_delta_rejected(self):
        """Test negative delta rejected"""
        with self.assertRaises(ConfigError):
            CsiErrorModel(delta=-0.1).validate()
