import numpy as np
import pytest

from basketqmc.errors import DomainError
from basketqmc.gauss import inverse_normal, transform_batch
from basketqmc.lowdisc import pseudorandom_points

from oracles import phi_cdf, quantile_error


def test_center():
    assert inverse_normal(0.5) == 0.0


def test_975_quantile():
    assert inverse_normal(0.975) == pytest.approx(1.959963984540054, abs=3e-9)


@pytest.mark.parametrize("u", [0.01, 0.3, 0.7, 2.0 ** -30, 0.4999])
def test_antisymmetry(u):
    assert inverse_normal(u) == pytest.approx(-inverse_normal(1 - u), abs=1e-12)


@pytest.mark.parametrize("bad", [0.0, 1.0, -0.1, 1.5, np.nan])
def test_domain(bad):
    with pytest.raises(DomainError):
        inverse_normal(bad)


def test_domain_in_array():
    with pytest.raises(DomainError):
        inverse_normal(np.array([0.2, 0.0]))


def test_scalar_and_array_types():
    assert isinstance(inverse_normal(0.3), float)
    out = inverse_normal(np.array([[0.1, 0.9]]))
    assert out.shape == (1, 2)


def test_monotone_across_branch_switch():
    u = np.linspace(1e-6, 1 - 1e-6, 200_001)
    x = inverse_normal(u)
    assert np.all(np.diff(x) > 0)


def test_accuracy_sampled_grid():
    # coarse version of the full acceptance scan, including both tails and the branch switch
    u = np.concatenate([np.logspace(-10, -1, 200), np.linspace(0.05, 0.95, 301), 1 - np.logspace(-10, -1, 200)])
    x = inverse_normal(u)
    err = max(abs(quantile_error(ui, xi)) for ui, xi in zip(u, x))
    assert err <= 3e-9


def test_tail_accuracy():
    assert abs(quantile_error(1e-7, inverse_normal(1e-7))) <= 1e-6


def test_round_trip():
    u = np.linspace(1e-6, 1 - 1e-6, 1001)
    x = inverse_normal(u)
    assert max(abs(float(phi_cdf(xi)) - ui) for ui, xi in zip(u, x)) <= 1e-8


class TestTransformBatch:
    def test_half_is_zero(self):
        assert np.array_equal(transform_batch(np.full((4, 3), 0.5)), np.zeros((4, 3)))

    def test_moments(self):
        z = transform_batch(pseudorandom_points(100_000, 1, seed=42))
        assert abs(z.mean()) < 0.02
        assert 0.98 <= z.var() <= 1.02

    def test_monotone_columns(self):
        u = np.sort(pseudorandom_points(500, 3, seed=1), axis=0)
        z = transform_batch(u)
        assert np.all(np.diff(z, axis=0) >= 0)

    def test_propagates_domain_error(self):
        with pytest.raises(DomainError):
            transform_batch(np.array([[0.5, 1.0]]))

    def test_does_not_alias_input(self):
        u = np.full((2, 2), 0.5)
        z = transform_batch(u)
        z[0, 0] = 7.0
        assert u[0, 0] == 0.5
