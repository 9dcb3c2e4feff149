import numpy as np
import pytest

from gfdmdesign.channels import (
    PEDESTRIAN_B_DELAYS_NS,
    PEDESTRIAN_B_POWERS_DB,
    ChannelSpec,
    pedestrian_b,
    pedestrian_b_power_profile,
)
from gfdmdesign.errors import InvalidDimensionError, SingularChannelError
from gfdmdesign.model import dft_matrix
from helpers import circulant_from_taps, random_taps


class TestChannelSpec:
    def test_eigenvalues_diagonalize_the_circulant(self):
        h = random_taps(np.random.default_rng(0), 5)
        W = dft_matrix(16)
        lam = W @ circulant_from_taps(h, 16) @ W.conj().T
        np.testing.assert_allclose(ChannelSpec(h).eigenvalues(16), np.diag(lam), atol=1e-10)
        np.testing.assert_allclose(lam - np.diag(np.diag(lam)), 0, atol=1e-10)

    def test_awgn_is_identity(self):
        np.testing.assert_array_equal(ChannelSpec.awgn().eigenvalues(8), np.ones(8))
        np.testing.assert_array_equal(ChannelSpec.awgn().circulant(4), np.eye(4))

    def test_circulant_matches_loop(self):
        h = random_taps(np.random.default_rng(1), 3)
        np.testing.assert_allclose(ChannelSpec(h).circulant(7), circulant_from_taps(h, 7))

    def test_too_many_taps(self):
        with pytest.raises(InvalidDimensionError):
            ChannelSpec(np.ones(5)).eigenvalues(4)

    def test_empty(self):
        with pytest.raises(InvalidDimensionError):
            ChannelSpec(np.array([]))

    def test_spectral_null(self):
        with pytest.raises(SingularChannelError):
            ChannelSpec(np.array([1.0, -1.0])).checked_eigenvalues(4)

    def test_taps_are_read_only(self):
        ch = ChannelSpec(np.array([1.0, 0.5]))
        with pytest.raises(ValueError):
            ch.h[0] = 2


class TestPedestrianB:
    def test_profile_layout_at_chip_rate(self):
        p = pedestrian_b_power_profile()
        assert p.size == 15
        assert p.sum() == pytest.approx(1.0, rel=1e-14)
        # six paths, with the 200 ns and 0 ns delays on separate samples
        assert np.count_nonzero(p) == 6
        lin = 10 ** (np.array(PEDESTRIAN_B_POWERS_DB) / 10)
        np.testing.assert_allclose(p[p > 0], lin / lin.sum())

    def test_coarse_sampling_merges_paths(self):
        p = pedestrian_b_power_profile(1e6)
        assert p.size == round(PEDESTRIAN_B_DELAYS_NS[-1] * 1e-9 * 1e6) + 1
        assert p.sum() == pytest.approx(1.0)

    def test_average_power(self):
        rng = np.random.default_rng(2)
        e = np.mean([np.sum(np.abs(pedestrian_b(rng).h) ** 2) for _ in range(4000)])
        assert e == pytest.approx(1.0, abs=0.05)

    def test_seeded(self):
        a = pedestrian_b(np.random.default_rng(3)).h
        b = pedestrian_b(np.random.default_rng(3)).h
        assert a.tobytes() == b.tobytes()
