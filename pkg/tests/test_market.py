import numpy as np
import pytest
from scipy.integrate import quad

from basketqmc.errors import DomainError, ValidationError
from basketqmc.market import (ConstantVolatility, ExpDecayVolatility, MarketSpec, TimeGrid,
                              correlation_matrix, covariance_blocks, drift_vector, integrated_variance)


def table3(rho=0.4):
    return MarketSpec(100.0, 0.02, correlation_matrix(2, rho), ConstantVolatility([0.3, 0.4]))


class TestTimeGrid:
    def test_equally_spaced(self):
        g = TimeGrid.equally_spaced(5, 1.0)
        assert np.allclose(g.times, [0.2, 0.4, 0.6, 0.8, 1.0])
        assert g.maturity == 1.0 and len(g) == 5
        assert np.allclose(g.increments, 0.2)

    @pytest.mark.parametrize("bad", [[0.0, 1.0], [1.0, 1.0], [2.0, 1.0], [], [1.0, np.inf]])
    def test_invalid(self, bad):
        with pytest.raises(ValidationError):
            TimeGrid(bad)

    def test_array_protocol(self):
        g = TimeGrid([0.5, 1.0])
        assert np.array_equal(np.asarray(g), [0.5, 1.0])


class TestCovarianceBlocks:
    def test_scalar_boomerang(self):
        spec = MarketSpec(1.0, 0.0, [[1.0]], ConstantVolatility([1.0]))
        cov = covariance_blocks(spec, TimeGrid([1.0, 2.0]))
        assert np.array_equal(cov.blocks[:, 0, 0], [1.0, 2.0])
        assert np.array_equal(cov.assemble(), [[1, 1], [1, 2]])

    def test_table3_block(self):
        cov = covariance_blocks(table3(), TimeGrid([1.0]))
        assert np.allclose(cov.blocks[0], [[0.09, 0.048], [0.048, 0.16]], rtol=1e-15, atol=0)

    def test_constant_scaling(self):
        g = TimeGrid.equally_spaced(7, 2.0)
        cov = covariance_blocks(table3(), g)
        for l in range(7):
            assert np.allclose(cov.blocks[l], g.times[l] * cov.blocks[0] / g.times[0], rtol=1e-15, atol=0)

    def test_expdecay_diagonal_quadrature(self):
        vol = ExpDecayVolatility([0.10], [0.09], [1.5])
        spec = MarketSpec(100.0, 0.0, [[1.0]], vol)
        value = covariance_blocks(spec, TimeGrid([1.0])).blocks[0, 0, 0]
        ref = quad(lambda s: (0.10 * np.exp(-s / 1.5) + 0.09) ** 2, 0, 1, epsabs=1e-14, epsrel=1e-14)[0]
        assert value == pytest.approx(ref, abs=1e-10)

    def test_expdecay_cross_terms_quadrature(self):
        # distinct decay constants separate the two mixed terms
        vol = ExpDecayVolatility([0.05, 0.2, 0.1], [0.09, 0.12, 0.03], [0.7, 1.5, 3.0])
        corr = np.array([[1.0, 0.4, -0.2], [0.4, 1.0, 0.3], [-0.2, 0.3, 1.0]])
        spec = MarketSpec(100.0, 0.0, corr, vol)
        times = [0.3, 1.0, 2.5]
        cov = covariance_blocks(spec, TimeGrid(times))
        for l, t in enumerate(times):
            for i in range(3):
                for k in range(3):
                    f = lambda s: vol.sigma(s)[i] * vol.sigma(s)[k] * corr[i, k]
                    ref = quad(f, 0, t, epsabs=1e-14, epsrel=1e-14)[0]
                    assert cov.blocks[l, i, k] == pytest.approx(ref, abs=1e-10)

    def test_expdecay_constant_limit(self):
        sig = np.array([0.2, 0.35])
        corr = correlation_matrix(2, 0.4)
        g = TimeGrid.equally_spaced(4, 1.0)
        slow = MarketSpec(100.0, 0.0, corr, ExpDecayVolatility([0.0, 0.0], sig, [1e9, 1e9]))
        const = MarketSpec(100.0, 0.0, corr, ConstantVolatility(sig))
        a = covariance_blocks(slow, g).blocks
        b = covariance_blocks(const, g).blocks
        assert np.max(np.abs(a - b) / np.abs(b)) < 1e-6
        # vanishing but nonzero decaying part
        tiny = MarketSpec(100.0, 0.0, corr, ExpDecayVolatility([1e-9, 1e-9], sig, [1e9, 1e9]))
        c = covariance_blocks(tiny, g).blocks
        assert np.max(np.abs(c - b) / np.abs(b)) < 1e-6

    def test_expdecay_initial_volatility(self):
        vol = ExpDecayVolatility.from_initial([0.1, 0.5], 0.09, 1.5)
        assert np.allclose(vol.initial(), [0.1, 0.5])
        assert np.allclose(vol.hat, [0.01, 0.41])

    @pytest.mark.parametrize("shipped", ["table6", "table11"])
    def test_psd_for_shipped_markets(self, shipped):
        sig = 0.1 + np.arange(10) / 9 * 0.4
        g = TimeGrid.equally_spaced(250, 1.0)
        for rho in (0.0, 0.4):
            vol = ConstantVolatility(sig) if shipped == "table6" else ExpDecayVolatility.from_initial(sig, 0.09, 1.5)
            cov = covariance_blocks(MarketSpec(100.0, 0.04, correlation_matrix(10, rho), vol), g)
            lam = np.linalg.eigvalsh(cov.assemble())
            assert lam[0] >= -1e-10 * lam[-1]


class TestMarketSpec:
    def test_bad_correlation(self):
        vol = ConstantVolatility([0.2, 0.3])
        with pytest.raises(ValidationError):
            MarketSpec(100.0, 0.0, [[1.0, 0.5], [0.4, 1.0]], vol)
        with pytest.raises(ValidationError):
            MarketSpec(100.0, 0.0, [[2.0, 0.0], [0.0, 1.0]], vol)
        with pytest.raises(ValidationError):
            MarketSpec(100.0, 0.0, correlation_matrix(3, 0.1), vol)

    def test_not_psd(self):
        corr = np.array([[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]])
        with pytest.raises(ValidationError):
            MarketSpec(100.0, 0.0, corr, ConstantVolatility([0.2, 0.2, 0.2]))

    def test_bad_volatility(self):
        with pytest.raises(ValidationError):
            ConstantVolatility([-0.1])
        with pytest.raises(ValidationError):
            ExpDecayVolatility([0.1], [0.1], [0.0])

    def test_equal_weights(self):
        w = table3().weight_matrix(TimeGrid.equally_spaced(5, 1.0))
        assert w.shape == (2, 5) and np.allclose(w, 0.1) and w.sum() == pytest.approx(1.0)


class TestDrift:
    def test_trivial(self):
        spec = MarketSpec(1.0, 0.0, [[1.0]], ConstantVolatility([0.0]))
        assert np.array_equal(drift_vector(spec, TimeGrid([1.0])), [0.0])

    def test_table3_first_entry(self):
        mu = drift_vector(table3(), TimeGrid.equally_spaced(5, 1.0))
        assert mu.shape == (10,)
        assert mu[0] == pytest.approx(np.log(10.0) + (0.02 - 0.045) * 0.2, abs=1e-14)
        # asset index runs fastest: entry 1 is asset 2 at the first date
        assert mu[1] == pytest.approx(np.log(10.0) + (0.02 - 0.08) * 0.2, abs=1e-14)
        assert mu[2] == pytest.approx(np.log(10.0) + (0.02 - 0.045) * 0.4, abs=1e-14)

    def test_expdecay_quadrature(self):
        vol = ExpDecayVolatility.from_initial([0.1, 0.3], 0.09, 1.5)
        spec = MarketSpec(100.0, 0.04, correlation_matrix(2, 0.4), vol)
        mu = drift_vector(spec, TimeGrid([0.5, 1.0]))
        var = quad(lambda s: (0.01 * np.exp(-s / 1.5) + 0.09) ** 2, 0, 1, epsabs=1e-14, epsrel=1e-14)[0]
        assert mu[2] == pytest.approx(np.log(0.25 * 100) + 0.04 - 0.5 * var, abs=1e-10)
        assert integrated_variance(spec, TimeGrid([1.0]))[0, 0] == pytest.approx(var, abs=1e-12)

    def test_zero_weight(self):
        spec = MarketSpec(100.0, 0.0, correlation_matrix(2, 0.0), ConstantVolatility([0.2, 0.2]),
                          weights=[1.0, 0.0])
        with pytest.raises(DomainError):
            drift_vector(spec, TimeGrid([1.0]))
