import numpy as np
import pytest
from scipy import integrate

from dualproj.mog import MoGSpec, make_spec, marginal_pdf, pdf, sample


def test_spec_layout():
    spec = make_spec(2)
    assert spec.means == (0.0, 2.0, 4.0)
    assert spec.stds == (1.0, 2.0, 3.0)
    assert spec.priors == pytest.approx((1 / 3,) * 3)
    assert make_spec(1).means == (0.0, 1.0, 2.0)


@pytest.mark.parametrize("d_m", [0, -1.0])
def test_non_positive_spacing_rejected(d_m):
    with pytest.raises(ValueError):
        make_spec(d_m)


@pytest.mark.parametrize("kwargs, msg", [
    (dict(means=(0, 1), stds=(1, 0), priors=(0.5, 0.5)), "positive"),
    (dict(means=(0, 1), stds=(1, 1), priors=(0.6, 0.5)), "sum to 1"),
    (dict(means=(1, 0), stds=(1, 1), priors=(0.5, 0.5)), "increasing"),
])
def test_spec_invariants(kwargs, msg):
    with pytest.raises(ValueError, match=msg):
        MoGSpec(**kwargs)


def test_large_sample_moments():
    spec = make_spec(3)
    n = 10**6
    batch = sample(spec, n, np.random.default_rng(0))
    freq = np.bincount(batch.ys, minlength=3) / n
    se = np.sqrt((1 / 3) * (2 / 3) / n)
    assert np.all(np.abs(freq - 1 / 3) < 3 * se)
    for y in range(3):
        xs = batch.xs[batch.ys == y]
        sd = spec.stds[y]
        assert abs(xs.mean() - spec.means[y]) < 3 * sd / np.sqrt(len(xs))
        assert abs(xs.std() - sd) < 4 * sd / np.sqrt(len(xs))


def test_sampling_is_reproducible():
    a = sample(make_spec(1), 100, np.random.default_rng(7))
    b = sample(make_spec(1), 100, np.random.default_rng(7))
    assert a.xs.tobytes() == b.xs.tobytes() and a.ys.tobytes() == b.ys.tobytes()


def test_pdf_values():
    spec = make_spec(1)
    assert pdf(spec, 0.0, 0) == pytest.approx(0.3989422804014327, abs=1e-15)
    assert pdf(spec, spec.means[2], 2) == pytest.approx(0.13298076013381091, abs=1e-15)
    with pytest.raises(ValueError):
        pdf(spec, 0.0, 3)


@pytest.mark.parametrize("y", [0, 1, 2])
def test_pdf_integrates_to_one(y):
    spec = make_spec(2)
    total, _ = integrate.quad(lambda x: pdf(spec, x, y), -60, 60, points=[spec.means[y]])
    assert total == pytest.approx(1.0, abs=1e-6)


def test_marginal_is_prior_weighted_sum():
    spec = make_spec(4)
    grid = np.linspace(-10, 25, 101)
    want = sum(p * pdf(spec, grid, y) for y, p in enumerate(spec.priors))
    np.testing.assert_allclose(marginal_pdf(spec, grid), want, rtol=0, atol=1e-15)
    assert np.all(marginal_pdf(spec, grid) >= 0)
