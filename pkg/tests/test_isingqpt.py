import numpy as np
import pytest
from scipy.sparse.linalg import eigsh

from spinmacro.errors import ValidationError
from spinmacro.isingqpt import (MajoranaCorrelation, block_rdm,
                                canonical_skew_form, exact_ground_state,
                                g_coefficient, gamma_matrix,
                                ground_state_vector, ising_hamiltonian,
                                max_variance_per_particle, scaling_exponent,
                                sweep_block, sweep_to_csv, xx_correlation)
from spinmacro.macromeasure import measure_I
from spinmacro.spincore import apply_site_right, partial_trace, purity

SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SZ = np.diag([1.0, -1.0]).astype(complex)


def site_mean(rho, site, local):
    out = apply_site_right(rho.entries, rho.descriptor, site, local)
    return float(np.trace(out).real)


def pair_mean(rho, i, j, a, b):
    out = apply_site_right(rho.entries, rho.descriptor, i, a)
    out = apply_site_right(out, rho.descriptor, j, b)
    return float(np.trace(out).real)


class TestGCoefficient:
    @pytest.mark.parametrize("l", [-3, -1, 0, 1, 2, 5])
    def test_critical_closed_form(self, l):
        assert abs(g_coefficient(1.0, l) - (-2 / (np.pi * (2 * l + 1)))) < 1e-10

    def test_small_coupling_limit(self):
        assert abs(g_coefficient(1e-9, 0) + 1.0) < 1e-8
        assert abs(g_coefficient(1e-9, 1)) < 1e-6
        assert abs(g_coefficient(1e-9, -1)) < 1e-6

    def test_large_coupling_limit(self):
        assert abs(g_coefficient(1e6, -1) - 1.0) < 1e-5
        assert abs(g_coefficient(1e6, 0)) < 1e-5

    @pytest.mark.parametrize("lam", [0.5, 2.0])
    def test_parseval_sum(self, lam):
        # the phase factor has unit modulus, so its Fourier coefficients
        # satisfy sum |g_l|^2 = 1; off criticality they decay exponentially
        total = sum(abs(g_coefficient(lam, l)) ** 2 for l in range(-40, 41))
        assert abs(total - 1.0) < 1e-8

    def test_real_valued(self):
        for lam in (0.3, 1.0, 3.0):
            assert abs(g_coefficient(lam, 2).imag) < 1e-12

    def test_rejects_nonpositive_coupling(self):
        with pytest.raises(ValidationError):
            g_coefficient(0.0, 0)


class TestGammaMatrix:
    def test_block_layout(self):
        lam = 0.7
        corr = gamma_matrix(lam, 3)
        g0 = g_coefficient(lam, 0).real
        g1 = g_coefficient(lam, 1).real
        gm1 = g_coefficient(lam, -1).real
        assert abs(corr.gamma[0, 1] - g0) < 1e-14
        assert abs(corr.gamma[0, 3] - g1) < 1e-14
        assert abs(corr.gamma[1, 2] + gm1) < 1e-14
        assert abs(corr.gamma[2, 1] - gm1) < 1e-14

    def test_skew_and_bounded(self):
        corr = gamma_matrix(1.0, 6)
        g = corr.gamma
        assert np.abs(g + g.T).max() < 1e-12
        assert np.linalg.svd(g, compute_uv=False)[0] <= 1 + 1e-10

    def test_rejects_non_toeplitz(self):
        bad = gamma_matrix(1.0, 2).gamma.copy()
        bad[0, 3] += 0.1
        bad[3, 0] -= 0.1
        with pytest.raises(ValidationError):
            MajoranaCorrelation(2, bad)

    def test_zero_length_rejected(self):
        with pytest.raises(ValidationError):
            gamma_matrix(1.0, 0)


class TestCanonicalSkewForm:
    def test_single_polarized_mode(self):
        corr = MajoranaCorrelation(1, np.array([[0.0, -1.0], [1.0, 0.0]]))
        form = canonical_skew_form(corr)
        assert abs(form.nu[0] - 1.0) < 1e-12
        target = form.nu[0] * np.array([[0.0, 1.0], [-1.0, 0.0]])
        assert np.abs(form.v @ corr.gamma @ form.v.T - target).max() < 1e-12

    @pytest.mark.parametrize("lam", [0.25, 0.5, 1.0, 2.0, 4.0])
    def test_invariants_physical(self, lam):
        for length in (2, 5, 8):
            form = canonical_skew_form(gamma_matrix(lam, length))
            assert np.all(form.nu >= -1e-12)
            assert np.all(form.nu <= 1 + 1e-10)
            assert np.all(np.diff(form.nu) <= 1e-12)

    def test_orthogonal_and_reconstructs(self):
        corr = gamma_matrix(1.0, 5)
        form = canonical_skew_form(corr)
        n = 2 * corr.length
        assert np.abs(form.v @ form.v.T - np.eye(n)).max() < 1e-10
        rebuilt = form.v @ corr.gamma @ form.v.T
        for m in range(corr.length):
            blk = rebuilt[2 * m:2 * m + 2, 2 * m:2 * m + 2]
            want = form.nu[m] * np.array([[0.0, 1.0], [-1.0, 0.0]])
            assert np.abs(blk - want).max() < 1e-10
        assert abs(abs(form.det_sign) - 1.0) < 1e-12

    def test_deterministic(self):
        a = canonical_skew_form(gamma_matrix(0.8, 4))
        b = canonical_skew_form(gamma_matrix(0.8, 4))
        assert np.array_equal(a.v, b.v) and np.array_equal(a.nu, b.nu)


class TestBlockRdm:
    def test_deep_paramagnet_is_polarized_product(self):
        rho = block_rdm(0.05, 2)
        assert purity(rho) > 0.995
        assert site_mean(rho, 0, SZ) > 0.995

    def test_purity_from_mode_invariants(self):
        # each fermionic mode contributes eigenvalues (1 +- nu)/2, so the
        # purity of the block factorizes as prod (1 + nu_m^2)/2
        lam, length = 1.0, 6
        rho = block_rdm(lam, length)
        nu = canonical_skew_form(gamma_matrix(lam, length)).nu
        assert abs(purity(rho) - np.prod((1 + nu**2) / 2)) < 1e-10

    def test_critical_block_is_mixed(self):
        assert purity(block_rdm(2.0, 2)) < 0.999

    def test_translation_invariance(self):
        rho = block_rdm(1.0, 3)
        for local in (SX, SZ):
            vals = [site_mean(rho, i, local) for i in range(3)]
            assert max(vals) - min(vals) < 1e-8

    def test_single_site_matches_long_finite_chain(self):
        blk = block_rdm(1.0, 1)
        psi = ground_state_vector(1.0, 14)
        t = psi.reshape(2, -1)
        marg = t @ t.conj().T
        assert np.abs(blk.entries - marg).max() < 5e-3

    @pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
    def test_pair_correlation_matches_finite_chain(self, lam):
        infinite = xx_correlation(lam, 1)
        rho = exact_ground_state(lam, 12)
        finite = (pair_mean(rho, 0, 1, SX, SX)
                  - site_mean(rho, 0, SX) * site_mean(rho, 1, SX))
        assert abs(infinite - finite) < 5e-3

    def test_length_bounds(self):
        with pytest.raises(ValidationError):
            block_rdm(1.0, 0)
        with pytest.raises(ValidationError):
            block_rdm(1.0, 13)


class TestFiniteChain:
    def test_field_dominated_energy(self):
        vals = eigsh(ising_hamiltonian(1e-12, 4), k=1, which="SA",
                     return_eigenvectors=False)
        assert abs(vals[0] + 4.0) < 1e-9

    def test_perturbative_energy(self):
        # second-order shift of the polarized state: -N - N lam^2 / 4
        vals = eigsh(ising_hamiltonian(0.1, 10), k=1, which="SA",
                     return_eigenvectors=False)
        assert abs(vals[0] - (-10 - 10 * 0.01 / 4)) < 2e-3

    def test_coupling_lowers_energy(self):
        vals = eigsh(ising_hamiltonian(0.5, 8), k=1, which="SA",
                     return_eigenvectors=False)
        assert vals[0] < -8.0

    def test_order_parameter_vanishes_in_even_sector(self):
        for lam, n in ((1.0, 12), (4.0, 8)):
            psi = ground_state_vector(lam, n)
            t = psi.reshape(2, -1)
            assert abs(np.vdot(t[0], t[1]).real * 2) < 1e-8

    def test_ferromagnet_near_degenerate(self):
        vals = eigsh(ising_hamiltonian(4.0, 8), k=2, which="SA",
                     return_eigenvectors=False)
        assert abs(vals[0] - vals[1]) < 1e-2

    def test_deterministic_vector(self):
        a = ground_state_vector(1.0, 9)
        b = ground_state_vector(1.0, 9)
        assert np.array_equal(a, b)

    def test_chain_length_bounds(self):
        with pytest.raises(ValidationError):
            ground_state_vector(1.0, 2)
        with pytest.raises(ValidationError):
            ground_state_vector(1.0, 15)
        with pytest.raises(ValidationError):
            exact_ground_state(1.0, 14)


class TestXxCorrelation:
    def test_nearest_neighbor_positive(self):
        assert xx_correlation(1.0, 1) > 0.1

    def test_critical_power_law_slope(self):
        rs = np.arange(2, 7)
        vals = [xx_correlation(1.0, int(r)) for r in rs]
        slope = np.polyfit(np.log(rs), np.log(vals), 1)[0]
        assert -0.40 < slope < -0.15

    def test_paramagnet_decays_fast(self):
        assert xx_correlation(0.25, 4) < xx_correlation(0.25, 1) / 10

    def test_rejects_bad_separation(self):
        with pytest.raises(ValidationError):
            xx_correlation(1.0, 0)
        with pytest.raises(ValidationError):
            xx_correlation(1.0, 3, rho=block_rdm(1.0, 2))


class TestScaling:
    def test_vector_path_matches_dense_measure(self):
        res = max_variance_per_particle(1.0, 8, restarts=30, seed=0)
        dense = measure_I(exact_ground_state(1.0, 8), restarts=30, seed=0)
        assert abs(res.value - dense.value) < 1e-6

    def test_critical_slope_window(self):
        slope, records = scaling_exponent([8, 10, 12], restarts=20)
        assert 0.5 < slope < 1.0
        assert all(v > 1 for _, v in records)

    def test_off_critical_slope_flat(self):
        slope, _ = scaling_exponent([8, 10, 12], lam=0.2, restarts=20)
        assert abs(slope) < 0.15


class TestSweep:
    def test_peak_exceeds_paramagnet(self):
        recs = sweep_block([0.05, 1.0], [2], restarts=20)
        by_lam = {r.lam: r for r in recs}
        assert by_lam[1.0].i_value > by_lam[0.05].i_value
        assert abs(by_lam[0.05].i_value - 1.0) < 0.1
        assert abs(by_lam[0.05].f_value - 1.0) < 0.1

    def test_f_capped_to_nan(self):
        recs = sweep_block([1.0], [2], restarts=10, f_dim_cap=2)
        assert np.isnan(recs[0].f_value)
        assert np.isfinite(recs[0].i_value)

    def test_csv_format(self, tmp_path):
        recs = sweep_block([1.0], [2], restarts=10)
        p = tmp_path / "sweep.csv"
        sweep_to_csv(recs, p)
        lines = p.read_text().splitlines()
        assert lines[0] == "lambda,L,I,F,purity"
        assert len(lines) == 2
        assert len(lines[1].split(",")) == 5


class TestPartialTraceConsistency:
    def test_nested_blocks_agree(self):
        big = block_rdm(1.0, 4)
        small = block_rdm(1.0, 2)
        reduced = partial_trace(big, [0, 1])
        assert np.abs(reduced.entries - small.entries).max() < 1e-8
