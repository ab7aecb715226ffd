import numpy as np
import pytest
from scipy.stats import poisson

from qeraser.gaussian import (
    QuadratureSelector,
    coherent,
    make_rng,
    marginal,
    squeezed_thermal,
    squeezed_vacuum,
    tensor,
    vacuum,
)
from qeraser.metrics import fidelity
from qeraser.qnd import QndGate, apply_qnd, erase_channel
from qeraser.tomography import (
    FockDensityMatrix,
    TomogramDataset,
    annihilation,
    fit_gaussian_moments,
    fock_fidelity,
    fock_mle,
    fock_wavefunctions,
    fock_wigner,
    gaussian_mle,
    gaussian_to_fock,
    scan_and_sample,
)

ALPHA = coherent(0.92, 0.90)
NOISY = QndGate.noisy(1.0, signal_x=0.045, signal_p=0.108)
PROBE = squeezed_thermal(0.096, 1.662)


class TestScanAndSample:
    def test_means_trace_sinusoid(self):
        ds = scan_and_sample(ALPHA, 64, 2000, make_rng(0))
        for th, x in ds.by_phase():
            expected = 0.92 * np.cos(th) + 0.90 * np.sin(th)
            assert abs(x.mean() - expected) < 5 * 0.5 / np.sqrt(x.size)

    def test_vacuum_variance_phase_independent(self):
        ds = scan_and_sample(vacuum(1), 16, 5000, make_rng(1))
        se = 0.25 * np.sqrt(2 / 4999)
        for _, x in ds.by_phase():
            assert abs(x.var(ddof=1) - 0.25) < 5 * se

    def test_fixed_seed_identical(self, tmp_path):
        a = scan_and_sample(ALPHA, 8, 100, 7)
        b = scan_and_sample(ALPHA, 8, 100, 7)
        a.to_csv(tmp_path / "a.csv")
        b.to_csv(tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_csv_round_trip(self, tmp_path):
        ds = scan_and_sample(ALPHA, 4, 10, 3)
        ds.to_csv(tmp_path / "t.csv")
        back = TomogramDataset.from_csv(tmp_path / "t.csv")
        np.testing.assert_array_equal(back.outcomes, ds.outcomes)
        np.testing.assert_array_equal(back.thetas, ds.thetas)

    def test_bad_header(self, tmp_path):
        (tmp_path / "t.csv").write_text("phase,value\n0,1\n")
        with pytest.raises(ValueError):
            TomogramDataset.from_csv(tmp_path / "t.csv")


class TestGaussianMle:
    def test_squeezed_variance(self):
        s = squeezed_vacuum(-5, 0)
        n_total = 100_000
        ds = scan_and_sample(s, 64, n_total // 64, make_rng(2))
        est = gaussian_mle(ds)
        # V_x is fixed mainly by the phases near 0 and pi; bootstrap the standard error
        rng = make_rng(3)
        boots = []
        for _ in range(40):
            idx = rng.integers(0, len(ds), len(ds))
            boots.append(gaussian_mle(TomogramDataset(ds.thetas[idx], ds.outcomes[idx])).cov[0, 0])
        se = np.std(boots)
        assert abs(est.cov[0, 0] - 0.25 * 10**-0.5) < 3 * se

    def test_exact_moments(self):
        s = squeezed_vacuum(-3, 0.4)
        th = np.linspace(0, np.pi, 7, endpoint=False)
        m = [marginal(s, QuadratureSelector(0, t)) for t in th]
        est = fit_gaussian_moments(th, [a for a, _ in m], [b for _, b in m])
        np.testing.assert_allclose(est.cov, s.cov, atol=1e-12)
        np.testing.assert_allclose(est.mean, s.mean, atol=1e-12)

    def test_two_phases_rejected(self):
        ds = TomogramDataset(np.array([0.0, 0.0, 1.0, 1.0]), np.zeros(4))
        with pytest.raises(ValueError):
            gaussian_mle(ds)

    def test_error_scales_inverse_sqrt_n(self):
        s = coherent(0.5, -0.3)
        ns = np.array([640, 2560, 10240, 40960])
        errs = []
        for n in ns:
            trials = []
            for seed in range(24):
                est = gaussian_mle(scan_and_sample(s, 64, n // 64, make_rng(1000 * int(n) + seed)))
                trials.append(np.sum((est.mean - s.mean) ** 2))
            errs.append(np.sqrt(np.mean(trials)))
        slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
        assert slope == pytest.approx(-0.5, abs=0.15)


class TestFockBasis:
    def test_wavefunctions_orthonormal(self):
        x = np.linspace(-9, 9, 3001)
        psi = fock_wavefunctions(30, x)
        gram = psi @ psi.T * (x[1] - x[0])
        np.testing.assert_allclose(gram, np.eye(31), atol=1e-10)

    def test_vacuum(self):
        rho = gaussian_to_fock(vacuum(1), 10).entries
        expected = np.zeros((11, 11))
        expected[0, 0] = 1
        np.testing.assert_allclose(rho, expected, atol=1e-10)

    def test_coherent_poisson(self):
        rho = gaussian_to_fock(ALPHA, 25)
        # with hbar = 1/2 the amplitude is alpha = x0 + i p0
        nbar = 0.92**2 + 0.90**2
        np.testing.assert_allclose(rho.entries.diagonal().real, poisson.pmf(np.arange(26), nbar), atol=1e-8)

    def test_squeezed_parity(self):
        diag = gaussian_to_fock(squeezed_vacuum(-5), 20).entries.diagonal().real
        assert np.max(np.abs(diag[1::2])) < 1e-12

    def test_moments_round_trip(self):
        s = squeezed_thermal(0.2, 0.5)
        mean, cov = gaussian_to_fock(coherent(0.3, 0.2), 20).moments()
        np.testing.assert_allclose(mean, [0.3, 0.2], atol=1e-8)
        np.testing.assert_allclose(cov, 0.25 * np.eye(2), atol=1e-8)
        _, cov = gaussian_to_fock(s, 30).moments()
        np.testing.assert_allclose(cov, s.cov, atol=1e-6)

    def test_truncation_too_small(self):
        with pytest.raises(ValueError):
            gaussian_to_fock(coherent(3, 3), 5)

    def test_annihilation_commutator(self):
        a = annihilation(6)
        comm = a @ a.conj().T - a.conj().T @ a
        np.testing.assert_allclose(comm[:-1, :-1], np.eye(5))

    def test_json_round_trip(self):
        rho = gaussian_to_fock(ALPHA, 8)
        back = FockDensityMatrix.from_json(rho.to_json())
        np.testing.assert_allclose(back.entries, rho.entries)

    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError):
            FockDensityMatrix(np.array([[0.5, 0.1], [0.0, 0.5]]))


class TestFockFidelity:
    def test_self(self):
        rho = gaussian_to_fock(squeezed_thermal(0.2, 0.5), 20)
        assert fock_fidelity(rho, rho) == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize(
        "ref, other",
        [
            (ALPHA, squeezed_thermal(0.3, 0.4)),
            (squeezed_vacuum(-5), coherent(0.5, 0.2)),
            (coherent(1.0, -0.5), coherent(0.9, -0.3)),
        ],
    )
    def test_matches_gaussian_formula(self, ref, other):
        f_fock = fock_fidelity(gaussian_to_fock(ref, 30), gaussian_to_fock(other, 30))
        assert f_fock == pytest.approx(fidelity(ref, other), abs=1e-3)

    def test_vacuum_vs_squeezed(self):
        f_fock = fock_fidelity(gaussian_to_fock(vacuum(1), 30), gaussian_to_fock(squeezed_vacuum(-5), 30))
        assert f_fock == pytest.approx(fidelity(vacuum(1), squeezed_vacuum(-5)), abs=1e-6)


class TestFockWigner:
    def test_vacuum_peak(self):
        w = fock_wigner(gaussian_to_fock(vacuum(1), 6), np.array([0.0]), np.array([0.0]))
        assert w[0, 0] == pytest.approx(2 / np.pi, abs=1e-6)


class TestFockMle:
    def test_vacuum(self):
        ds = scan_and_sample(vacuum(1), 32, 10_000 // 32, make_rng(4))
        res = fock_mle(ds, 10, 500)
        assert res.rho.entries[0, 0].real >= 0.99

    def test_post_erase_coherent_state(self):
        c = erase_channel(apply_qnd(NOISY, tensor(ALPHA, PROBE)))
        ds = scan_and_sample(c, 64, 100_000 // 64, make_rng(5))
        res = fock_mle(ds, 15, 500)
        assert res.iterations <= 500
        assert fock_fidelity(res.rho, gaussian_to_fock(c, 15)) >= 0.99
        assert np.all(np.diff(res.log_likelihoods) >= -1e-12)

    def test_decohered_signal_p_variance(self):
        b = apply_qnd(NOISY, tensor(ALPHA, PROBE)).reduced(0)
        assert b.cov[1, 1] == pytest.approx(2.02)
        ds = scan_and_sample(b, 64, 100_000 // 64, make_rng(6))
        res = fock_mle(ds, 25, 300, span=8.0)
        _, cov = res.rho.moments()
        # standard error of a variance from the ~1/4 of samples that weigh on p
        se = 2.02 * np.sqrt(2 / (len(ds) / 4))
        assert abs(cov[1, 1] - 2.02) < 3 * se

    def test_truncation_warning(self):
        ds = TomogramDataset(np.zeros(10), np.full(10, 9.0))
        with pytest.warns(RuntimeWarning):
            fock_mle(ds, 4, 2, span=10.0)
