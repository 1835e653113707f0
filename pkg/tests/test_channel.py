import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jadce.channel import (
    ChannelError,
    ClusterSpec,
    build_dictionaries,
    load_channels,
    save_channels,
    steering_angle,
    steering_delay,
    synthesize_device,
    synthesize_device_physical,
    synthesize_population,
)


def numerical_rank(X, rel=1e-10):
    s = np.linalg.svd(X, compute_uv=False)
    return int(np.sum(s > rel * s[0])) if s[0] > 0 else 0


class TestSteering:
    def test_zero_angle_is_all_ones(self):
        np.testing.assert_allclose(steering_angle(0.0, 4), np.ones(4))

    def test_half_angle(self):
        np.testing.assert_allclose(steering_angle(0.5, 2), [1, -1], atol=1e-15)

    def test_quarter_angle(self):
        # exp(-j 2 pi m / 4) for m = 0..3, evaluated by hand
        np.testing.assert_allclose(steering_angle(0.25, 4), [1, -1j, -1, 1j], atol=1e-15)

    @pytest.mark.parametrize("tau,T_s,B,expected", [
        (0.0, 1.0, 3, [1, 1, 1]),
        (0.5, 1.0, 2, [1, -1]),
        (0.25, 1.0, 4, [1, -1j, -1, 1j]),
    ])
    def test_delay(self, tau, T_s, B, expected):
        np.testing.assert_allclose(steering_delay(tau, T_s, B), expected, atol=1e-15)

    def test_delay_depends_on_ratio_only(self):
        np.testing.assert_allclose(steering_delay(0.3, 1.0, 8), steering_delay(0.6, 2.0, 8))


class TestDictionaries:
    def test_two_antennas(self):
        d = build_dictionaries(2, 4, 1.0, 1.0)
        np.testing.assert_allclose(d.A_theta, [[1, 1], [1, -1]], atol=1e-15)
        assert d.D == 4

    def test_wide_delay_spread(self):
        assert build_dictionaries(4, 1300, 64 / 1300, 1.0).D == 64

    def test_scalar(self):
        d = build_dictionaries(1, 1, 1.0, 1.0)
        np.testing.assert_allclose(d.A_theta, [[1]])
        np.testing.assert_allclose(d.A_tau, [[1]])

    @pytest.mark.parametrize("gamma", [0.0, -0.1, 1.5])
    def test_rejects_bad_gamma(self, gamma):
        with pytest.raises(ChannelError):
            build_dictionaries(4, 8, gamma)

    def test_columns_are_steering_vectors(self):
        d = build_dictionaries(6, 10, 0.5, 2.0)
        for k in range(6):
            np.testing.assert_allclose(d.A_theta[:, k], steering_angle(k / 6, 6), atol=1e-12)
        for k in range(d.D):
            np.testing.assert_allclose(d.A_tau[:, k], steering_delay(k * 2.0 / 10, 2.0, 10), atol=1e-12)

    @pytest.mark.parametrize("M", [1, 3, 16, 32])
    def test_angle_dictionary_unitary_up_to_scale(self, M):
        d = build_dictionaries(M, 8)
        np.testing.assert_allclose(d.A_theta.conj().T @ d.A_theta, M * np.eye(M), atol=1e-10)


class TestBlockSynthesis:
    def test_three_cluster_example(self):
        rng = np.random.default_rng(1)
        ch = synthesize_device(rng, 19, 19, 3, 3, (1, 1))
        X = ch.delay_angular
        assert np.count_nonzero(X) == 27
        assert numerical_rank(X) <= 3
        # three disjoint 3x3 footprints
        mask = np.zeros_like(X, dtype=int)
        for cl in ch.clusters:
            r = int(round(cl.mean_angle * 19)) - 1
            c = int(round(cl.mean_delay)) - 1
            mask[r:r + 3, c:c + 3] += 1
        assert mask.max() == 1 and mask.sum() == 27
        np.testing.assert_array_equal(mask.astype(bool), X != 0)

    @pytest.mark.parametrize("seed", range(5))
    def test_single_entry(self, seed):
        X = synthesize_device(np.random.default_rng(seed), 4, 4, 1, 1).delay_angular
        assert np.count_nonzero(X) == 1
        assert numerical_rank(X) == 1

    def test_structure_seed7(self):
        X = synthesize_device(np.random.default_rng(7), 8, 8, 2, 2).delay_angular
        assert np.sum(np.any(X != 0, axis=1)) <= 4
        assert np.sum(np.any(X != 0, axis=0)) <= 4
        assert numerical_rank(X) <= 2
        assert abs(np.linalg.norm(X) - 1.0) < 1e-12

    def test_amplitude_range(self):
        rng = np.random.default_rng(3)
        norms = [np.linalg.norm(synthesize_device(rng, 8, 8, 1, 2, (0.5, 2.0)).delay_angular)
                 for _ in range(50)]
        assert 0.5 <= min(norms) and max(norms) <= 2.0

    def test_rejects_oversized(self):
        with pytest.raises(ChannelError):
            synthesize_device(np.random.default_rng(0), 4, 4, 3, 2)

    def test_physical_filled_with_dictionaries(self):
        d = build_dictionaries(8, 16, 0.5)
        ch = synthesize_device(np.random.default_rng(0), 8, 8, 2, 2, dicts=d)
        np.testing.assert_allclose(ch.physical, d.A_theta @ ch.delay_angular @ d.A_tau.conj().T)

    @settings(max_examples=40, deadline=None)
    @given(seed=st.integers(0, 2**31), L=st.integers(1, 3), p=st.integers(1, 4))
    def test_invariants(self, seed, L, p):
        M = D = 16
        X = synthesize_device(np.random.default_rng(seed), M, D, L, p).delay_angular
        assert np.sum(np.any(X != 0, axis=1)) <= p * L
        assert np.sum(np.any(X != 0, axis=0)) <= p * L
        assert numerical_rank(X) <= L
        assert np.count_nonzero(X) == p * p * L

    def test_population(self):
        rng = np.random.default_rng(0)
        pop = synthesize_population(rng, 20, 6, 16, 16, 2, 2)
        assert pop.active.sum() == 6
        assert len(pop.support) == 6 and min(pop.support) >= 1
        energy = np.linalg.norm(pop.blocks, axis=(1, 2))
        np.testing.assert_array_equal(energy > 0, pop.active)


class TestPhysicalSynthesis:
    def test_single_cluster_at_origin(self):
        d = build_dictionaries(4, 8, 0.5)
        ch = synthesize_device_physical(None, d, [ClusterSpec(0.0, 0.0, 1, 1, np.array([[1.0]]))])
        expected = np.zeros((4, 4))
        expected[0, 0] = 1
        np.testing.assert_allclose(ch.delay_angular, expected)
        np.testing.assert_allclose(ch.physical, np.outer(steering_angle(0, 4), steering_delay(0, 1, 8).conj()))
        assert not ch.clipped

    def test_two_disjoint_clusters_rank_two(self):
        d = build_dictionaries(16, 32, 0.5)
        rng = np.random.default_rng(4)
        ch = synthesize_device_physical(rng, d, [ClusterSpec(0.25, 4 / 32, 3, 2),
                                                 ClusterSpec(0.75, 10 / 32, 2, 3)])
        assert numerical_rank(ch.delay_angular) == 2

    def test_nearest_bin(self):
        d = build_dictionaries(2, 4, 1.0)
        ch = synthesize_device_physical(None, d, [ClusterSpec(0.5, 0.0, 1, 1, np.array([[2.0]]))])
        assert ch.delay_angular[1, 0] == 2.0
        assert np.count_nonzero(ch.delay_angular) == 1

    def test_clipping_flag(self):
        d = build_dictionaries(8, 8, 0.5)
        ch = synthesize_device_physical(np.random.default_rng(0), d, [ClusterSpec(0.0, 0.0, 3, 3)])
        assert ch.clipped
        assert np.count_nonzero(ch.delay_angular) == 4

    def test_consistency_with_dictionaries(self):
        d = build_dictionaries(8, 20, 0.5)
        ch = synthesize_device_physical(np.random.default_rng(2), d,
                                        [ClusterSpec(0.3, 0.1, 2, 2), ClusterSpec(0.6, 0.3, 1, 3)])
        H = ch.physical
        err = np.linalg.norm(H - d.A_theta @ ch.delay_angular @ d.A_tau.conj().T) / np.linalg.norm(H)
        assert err < 1e-10

    def test_rejects_degenerate_gains(self):
        with pytest.raises(ChannelError):
            ClusterSpec(0.0, 0.0, 2, 2, np.array([[1.0, 0.0], [0.0, 0.0]]))


def test_channel_file_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    blocks = synthesize_population(rng, 3, 2, 4, 5, 1, 1).blocks
    path = tmp_path / "ch.csv"
    save_channels(path, blocks, L_max=1)
    assert path.read_text().splitlines()[0] == "4,5,3,1"
    back, L_max = load_channels(path)
    assert L_max == 1
    np.testing.assert_array_equal(back, blocks)


def test_channel_file_rejects_truncated(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("2,2,1,1\n0,0,0,0\n")
    with pytest.raises(ChannelError):
        load_channels(path)
