import math

import numpy as np
import pytest

from dualproj import diffcore as dc
from dualproj.divergences import (F_GENERATORS, FDivergenceKind, f_generator, f_of_exp,
                                  frechet_1d, jsd_categorical, kl_categorical, tv_categorical)

KINDS = list(FDivergenceKind)


def random_pair(rng, k=None):
    k = k or int(rng.integers(2, 8))
    return rng.dirichlet(np.full(k, 0.7)), rng.dirichlet(np.full(k, 0.7))


class TestGenerators:
    def test_table_values(self):
        assert f_generator("reverse-kl", 1.0) == 0.0
        assert f_generator("pearson", 2.0) == 1.0
        assert f_generator("gan", 1.0) == pytest.approx(-2 * math.log(2), abs=1e-15)

    @pytest.mark.parametrize("kind", KINDS)
    def test_value_at_one(self, kind):
        want = -math.log(4) if kind is FDivergenceKind.GAN else 0.0
        assert f_generator(kind, 1.0) == pytest.approx(want, abs=1e-15)

    @pytest.mark.parametrize("kind", KINDS)
    def test_midpoint_convexity(self, kind):
        u = np.linspace(0.01, 10.0, 200)
        a, b = np.meshgrid(u, u)
        mid = f_generator(kind, (a + b) / 2)
        assert np.all(mid <= (f_generator(kind, a) + f_generator(kind, b)) / 2 + 1e-10)

    def test_domain(self):
        with pytest.raises(ValueError):
            f_generator("kl", 0.0)
        with pytest.raises(ValueError):
            f_generator("not-a-divergence", 1.0)


class TestFOfExp:
    def test_examples(self):
        assert f_of_exp("reverse-kl", 0.0) == 0.0
        assert f_of_exp("reverse-kl", 2.5) == -2.5
        assert f_of_exp("hellinger", 0.0) == 0.0
        assert f_of_exp("pearson", math.log(2)) == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("kind", KINDS)
    def test_matches_generator(self, kind):
        t = np.linspace(-10, 10, 2001)
        a, b = f_of_exp(kind, t), f_generator(kind, np.exp(t))
        assert np.max(np.abs(a - b) / np.maximum(1.0, np.abs(b))) <= 1e-9

    @pytest.mark.parametrize("kind", KINDS)
    def test_tensor_path_is_differentiable(self, kind):
        t = dc.Tensor(np.linspace(-2, 2, 7), requires_grad=True)
        rep = dc.grad_check(dc.Graph(lambda p: dc.sum(f_of_exp(kind, p["t"])), {"t": t}))
        assert rep.passed

    def test_clamp_prevents_overflow(self):
        assert np.isfinite(f_of_exp("kl", 1e4))
        assert f_of_exp("kl", 1e4) == f_of_exp("kl", 30.0)
        assert f_of_exp("reverse-kl", -1e4) == 30.0

    def test_substituted_table(self):
        broken = dict(F_GENERATORS)
        broken[FDivergenceKind.KL] = lambda u: u * np.log(u) + 0.1
        assert f_generator("kl", 1.0, broken) == pytest.approx(0.1)


class TestCategorical:
    def test_kl_examples(self):
        assert kl_categorical([0.3, 0.7], [0.3, 0.7]) == 0.0
        assert kl_categorical([1, 0], [0.5, 0.5]) == pytest.approx(math.log(2), abs=1e-15)
        with pytest.raises(ValueError, match="continuous"):
            kl_categorical([0.5, 0.5], [1.0, 0.0])

    def test_jsd_examples(self):
        assert jsd_categorical([0.2, 0.8], [0.2, 0.8]) == 0.0
        assert jsd_categorical([1, 0], [0, 1]) == pytest.approx(math.log(2), abs=1e-15)

    def test_tv_examples(self):
        assert tv_categorical([0.2, 0.8], [0.2, 0.8]) == 0.0
        assert tv_categorical([1, 0], [0, 1]) == 1.0

    def test_not_a_distribution(self):
        with pytest.raises(ValueError):
            kl_categorical([0.5, 0.6], [0.5, 0.5])

    def test_random_properties(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            p, q = random_pair(rng)
            r = rng.dirichlet(np.ones(len(p)))
            kl, jsd, tv = kl_categorical(p, q), jsd_categorical(p, q), tv_categorical(p, q)
            assert kl >= 0
            assert 0 <= jsd <= math.log(2) + 1e-15
            assert abs(jsd - jsd_categorical(q, p)) <= 1e-12
            assert tv <= tv_categorical(p, r) + tv_categorical(r, q) + 1e-15
            assert tv <= math.sqrt(kl / 2) + 1e-15
            assert 0.5 * tv**2 <= jsd + 1e-15 and jsd <= 2 * tv + 1e-15


class TestFrechet:
    def test_examples(self):
        assert frechet_1d(1.5, 2.0, 1.5, 2.0) == 0.0
        assert frechet_1d(0, 1, 3, 1) == 9.0
        assert frechet_1d(0, 1, 0, 3) == 4.0

    def test_negative_sigma(self):
        with pytest.raises(ValueError):
            frechet_1d(0, -1, 0, 1)
