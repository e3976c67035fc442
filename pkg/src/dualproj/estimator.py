"""scikit-learn style wrapper around the trainer.

A conditional generator does not map inputs to outputs, so the fit /
transform / predict trio only partly applies: ``fit(X, y)`` trains on a
labelled 1-D sample, ``sample(y)`` draws conditional samples,
``predict_proba``/``predict`` use the real-side class posterior of the
discriminator, and ``score`` is the negative marginal MMD.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted
from threadpoolctl import threadpool_limits

from . import models as M
from .metrics import mmd2
from .mog import LabeledBatch
from .trainer import GANTrainer, TrainConfig


class ConditionalGAN(BaseEstimator):
    """Conditional GAN for labelled scalar data.

    Real minibatches are drawn with replacement from the training sample.
    """

    def __init__(self, variant="p2gan", activation="bce", iterations=2000, batch_size=128,
                 d_steps_per_g=1, lr=2e-4, beta1=0.5, beta2=0.999, hidden=16, noise_dim=2,
                 embed_dim=2, random_state=0):
        self.variant = variant
        self.activation = activation
        self.iterations = iterations
        self.batch_size = batch_size
        self.d_steps_per_g = d_steps_per_g
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.hidden = hidden
        self.noise_dim = noise_dim
        self.embed_dim = embed_dim
        self.random_state = random_state

    def _config(self) -> TrainConfig:
        return TrainConfig(
            variant=self.variant, activation=self.activation, iterations=self.iterations,
            eval_every=self.iterations, batch_size=self.batch_size,
            d_steps_per_g=self.d_steps_per_g, seed=int(self.random_state), lr=self.lr,
            beta1=self.beta1, beta2=self.beta2, hidden=self.hidden, noise_dim=self.noise_dim,
            embed_dim=self.embed_dim)

    @staticmethod
    def _check_X(X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 2 and X.shape[1] == 1:
            X = X[:, 0]
        if X.ndim != 1:
            raise ValueError("X must be 1-D or a single column")
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite values")
        return X

    def fit(self, X, y):
        X = self._check_X(X)
        self.classes_, y_idx = np.unique(np.asarray(y), return_inverse=True)
        if len(X) != len(y_idx):
            raise ValueError("X and y have different lengths")
        if len(self.classes_) < 2:
            raise ValueError("need at least two classes")

        def real_sampler(n, rng):
            idx = rng.integers(0, len(X), n)
            return LabeledBatch(X[idx], y_idx[idx])

        trainer = GANTrainer(self._config(), real_sampler, n_classes=len(self.classes_))
        with threadpool_limits(1):
            for _ in range(self.iterations):
                trainer.step()
        self.generator_, self.discriminator_ = trainer.gen, trainer.disc
        self.n_iter_ = trainer.iteration
        return self

    def _class_index(self, y):
        y = np.asarray(y)
        idx = np.searchsorted(self.classes_, y)
        idx = np.clip(idx, 0, len(self.classes_) - 1)
        if np.any(self.classes_[idx] != y):
            raise ValueError("labels not seen during fit")
        return idx

    def sample(self, y, random_state=None) -> np.ndarray:
        """One generated value per requested label."""
        check_is_fitted(self, "generator_")
        rng = np.random.default_rng(random_state)
        return M.sampler(self.generator_)(self._class_index(y), rng)

    def predict_proba(self, X) -> np.ndarray:
        check_is_fitted(self, "discriminator_")
        logp = M.log_posterior(self.discriminator_.frozen(), "p", self._check_X(X)).data
        return np.exp(logp)

    def predict(self, X) -> np.ndarray:
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def score(self, X, y) -> float:
        """Negative marginal MMD between ``X`` and samples drawn for the labels ``y``."""
        X = self._check_X(X)
        return -mmd2(X, self.sample(y, random_state=0))
