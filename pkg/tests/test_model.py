import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gfdmdesign.errors import DomainError, InvalidDimensionError, ConfigurationError
from gfdmdesign.model import (
    FilterSpec,
    GfdmConfig,
    add_cp_suffix,
    build_filter_dirichlet,
    build_filter_rrc,
    dft_matrix,
    modulate,
    modulation_matrix,
    remove_cp,
    time_domain_filter,
)
from helpers import dense_phi, modulate_loop, pulse_loop, random_filter

GOLDEN = json.loads((Path(__file__).parent / "data" / "golden.json").read_text())

# K=1 folds the reverse coefficients onto the forward bins, so the power
# identities below need K >= 2
dims = st.tuples(st.integers(2, 6), st.integers(1, 6))


class TestConfig:
    def test_derived_sizes(self):
        c = GfdmConfig(K=30, M=9, Ncp=30, Nw=3, Ts=2.0)
        assert (c.N, c.L, c.Tb) == (270, 2, 18.0)

    @pytest.mark.parametrize("kw", [
        dict(K=0, M=3), dict(K=3, M=0), dict(K=2, M=2, Ncp=5),
        dict(K=2, M=2, Ncp=2, Nw=2), dict(K=2, M=2, Ts=0.0),
    ])
    def test_rejects_bad_dimensions(self, kw):
        with pytest.raises((InvalidDimensionError, ConfigurationError, DomainError)):
            GfdmConfig(**kw)

    def test_digest_changes_with_fields(self):
        assert GfdmConfig(4, 3).digest() != GfdmConfig(4, 3, Ncp=1).digest()


class TestFilters:
    def test_dirichlet_m1(self):
        np.testing.assert_array_equal(build_filter_dirichlet(1).gamma, [1, 0])

    def test_dirichlet_m3(self):
        f = build_filter_dirichlet(3)
        np.testing.assert_array_equal(f.gamma, [1, 1, 1, 0, 0, 0])
        assert f.power == 3

    def test_dirichlet_rejects_m0(self):
        with pytest.raises(InvalidDimensionError):
            build_filter_dirichlet(0)

    @pytest.mark.parametrize("M", [1, 2, 5, 9])
    def test_rrc_alpha0_is_dirichlet(self, M):
        np.testing.assert_array_equal(build_filter_rrc(M, 0.0).gamma, build_filter_dirichlet(M).gamma)
        np.testing.assert_array_equal(build_filter_rrc(M, 0.0, sqrt_flag=False).gamma,
                                      build_filter_dirichlet(M).gamma)

    def test_rrc_power(self):
        assert abs(build_filter_rrc(9, 0.5).power - 9) <= 1e-12 * 9

    def test_rrc_golden(self):
        np.testing.assert_allclose(build_filter_rrc(9, 0.9).gamma.real, GOLDEN["rrc_M9_alpha0.9"],
                                   rtol=0, atol=1e-14)
        assert np.all(build_filter_rrc(9, 0.9).gamma.imag == 0)

    @pytest.mark.parametrize("alpha", [-0.1, 1.5, float("nan")])
    def test_rrc_domain(self, alpha):
        with pytest.raises(DomainError):
            build_filter_rrc(9, alpha)

    def test_filter_json_round_trip_is_bit_identical(self):
        f = random_filter(np.random.default_rng(3), 7)
        back = FilterSpec.from_dict(json.loads(json.dumps(f.to_dict())))
        assert back.gamma.tobytes() == f.gamma.tobytes()

    @given(st.integers(1, 12), st.floats(0, 1), st.booleans())
    def test_constructors_meet_power_constraint(self, M, alpha, sqrt_flag):
        f = build_filter_rrc(M, alpha, sqrt_flag)
        assert abs(np.sum(np.abs(f.gamma) ** 2) - M) <= 1e-12 * M


class TestModulationMatrix:
    def test_dft_is_unitary(self):
        W = dft_matrix(7)
        np.testing.assert_allclose(W @ W.conj().T, np.eye(7), atol=1e-14)
        assert W[1, 1] == pytest.approx(np.exp(-2j * np.pi / 7) / math.sqrt(7))

    def test_ofdm_case_is_orthonormal(self):
        Phi = modulation_matrix(GfdmConfig(8, 1), build_filter_dirichlet(1)).Phi
        np.testing.assert_allclose(Phi.conj().T @ Phi, np.eye(8), atol=1e-10)

    @pytest.mark.parametrize("K,M", [(4, 3), (30, 9), (1, 5)])
    def test_dirichlet_is_unitary(self, K, M):
        Phi = modulation_matrix(GfdmConfig(K, M), build_filter_dirichlet(M)).Phi
        np.testing.assert_allclose(Phi.conj().T @ Phi, np.eye(K * M), atol=1e-10)

    def test_rrc_gram_couples_only_adjacent_subcarriers(self):
        K, M = 4, 3
        Phi = modulation_matrix(GfdmConfig(K, M), build_filter_rrc(M, 0.5)).Phi
        G = Phi.conj().T @ Phi
        for i in range(K):
            for k in range(K):
                blk = G[i * M:(i + 1) * M, k * M:(k + 1) * M]
                if (i - k) % K in (1, K - 1):
                    assert np.abs(blk).max() > 1e-3
                elif i != k:
                    assert np.abs(blk).max() < 1e-12
        np.testing.assert_allclose(np.diag(G), 1.0, atol=1e-12)

    def test_columns_match_pulse_oracle(self):
        rng = np.random.default_rng(0)
        for K, M in [(3, 4), (5, 2), (2, 6)]:
            f = random_filter(rng, M)
            np.testing.assert_allclose(modulation_matrix(GfdmConfig(K, M), f).Phi, dense_phi(f.gamma, K, M),
                                       atol=1e-12)

    def test_mismatched_filter(self):
        with pytest.raises(InvalidDimensionError):
            modulation_matrix(GfdmConfig(4, 3), build_filter_dirichlet(4))

    @given(dims, st.integers(0, 2 ** 32 - 1))
    def test_total_power(self, km, seed):
        K, M = km
        Phi = modulation_matrix(GfdmConfig(K, M), random_filter(np.random.default_rng(seed), M)).Phi
        assert abs(np.trace(Phi @ Phi.conj().T).real - K * M) <= 1e-9
        assert abs(np.linalg.norm(Phi) ** 2 - K * M) <= 1e-9


class TestModulate:
    def test_unit_vector_selects_column(self):
        c, f = GfdmConfig(4, 3), build_filter_rrc(3, 0.5)
        s = np.zeros(12, complex)
        s[7] = 1
        np.testing.assert_allclose(modulate(c, f, s), modulation_matrix(c, f).Phi[:, 7], atol=1e-14)

    def test_dirichlet_preserves_energy(self):
        rng = np.random.default_rng(1)
        s = rng.standard_normal(270) + 1j * rng.standard_normal(270)
        x = modulate(GfdmConfig(30, 9), build_filter_dirichlet(9), s)
        assert np.linalg.norm(x) ** 2 == pytest.approx(np.linalg.norm(s) ** 2, rel=1e-12)

    def test_matches_scalar_sum_on_100_instances(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            K, M = rng.integers(1, 7, size=2)
            f = random_filter(rng, M)
            s = rng.standard_normal(K * M) + 1j * rng.standard_normal(K * M)
            np.testing.assert_allclose(modulate(GfdmConfig(K, M), f, s), modulate_loop(f.gamma, K, M, s),
                                       atol=1e-10)

    def test_wrong_length(self):
        with pytest.raises(InvalidDimensionError):
            modulate(GfdmConfig(4, 3), build_filter_dirichlet(3), np.ones(11))


class TestTimeDomainFilter:
    def test_dirichlet_first_sample(self):
        g = time_domain_filter(GfdmConfig(30, 9), build_filter_dirichlet(9))
        assert g[0] == pytest.approx(1 / math.sqrt(30), abs=1e-15)

    @pytest.mark.parametrize("K,M", [(30, 9), (4, 3), (2, 7)])
    def test_dirichlet_zero_at_k(self, K, M):
        assert abs(time_domain_filter(GfdmConfig(K, M), build_filter_dirichlet(M))[K]) < 1e-14

    def test_matches_closed_sum(self):
        f = random_filter(np.random.default_rng(4), 5)
        np.testing.assert_allclose(time_domain_filter(GfdmConfig(3, 5), f), pulse_loop(f.gamma, 3, 5), atol=1e-14)

    @given(dims, st.integers(0, 2 ** 32 - 1))
    def test_unit_energy(self, km, seed):
        K, M = km
        g = time_domain_filter(GfdmConfig(K, M), random_filter(np.random.default_rng(seed), M))
        assert abs(np.sum(np.abs(g) ** 2) - 1) <= 1e-12


class TestCyclicPrefix:
    def test_prefix_only(self):
        out = add_cp_suffix(np.array([1, 2, 3, 4]), GfdmConfig(2, 2, Ncp=2))
        np.testing.assert_array_equal(out, [3, 4, 1, 2, 3, 4])

    def test_prefix_and_suffix(self):
        out = add_cp_suffix(np.array([1, 2, 3, 4]), GfdmConfig(2, 2, Ncp=3, Nw=1))
        np.testing.assert_array_equal(out, [2, 3, 4, 1, 2, 3, 4, 1])

    @given(st.integers(0, 11), st.integers(0, 2 ** 32 - 1))
    def test_round_trip(self, Ncp, seed):
        c = GfdmConfig(4, 3, Ncp=Ncp, Nw=max(0, Ncp - 1) // 2)
        x = np.random.default_rng(seed).standard_normal(12)
        np.testing.assert_array_equal(remove_cp(add_cp_suffix(x, c), c), x)

    def test_length_checked(self):
        with pytest.raises(InvalidDimensionError):
            add_cp_suffix(np.ones(5), GfdmConfig(2, 2, Ncp=1))
