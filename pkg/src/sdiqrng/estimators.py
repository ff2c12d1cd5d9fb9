"""Scikit-learn style wrappers around the certification and extraction core.

Behaviors are passed as rows ``(f(0|0), f(1|0), f(0|1), f(1|1))``, i.e. a
2x2 ``[x][b]`` table flattened row-major, or as an ``(n, 2, 2)`` array.
"""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_behaviors, check_count, check_mean_photon
from .certify import (
    FiniteSizeParams,
    Grid,
    build_witness,
    evaluate_witness,
    finite_size_min_entropy,
    solve_entropy_bound,
)
from .extract import ToeplitzHasher, ToeplitzSeed
from .protocol import tune_threshold


def _expected_behavior(X):
    return check_behaviors(X).mean(axis=0)


class EntropyWitness(TransformerMixin, BaseEstimator):
    """Fit a linear entropy witness to the expected behavior of a device.

    Parameters
    ----------
    omega : float
        Energy bound (mean photons per pulse) the witness is valid for.
    n_grid : int
        Points per axis of the strategy grid.

    Attributes
    ----------
    witness_ : Witness
    expected_behavior_ : ndarray of shape (2, 2)
    entropy_bound_ : EntropyBound
        Certified entropy at the expected behavior.
    """

    def __init__(self, omega=0.005, n_grid=101):
        self.omega = omega
        self.n_grid = n_grid

    def fit(self, X, y=None):
        omega = check_mean_photon(self.omega)
        grid = Grid(self.n_grid, self.n_grid)
        self.expected_behavior_ = _expected_behavior(X)
        self.witness_ = build_witness(self.expected_behavior_, omega, grid)
        self.entropy_bound_ = solve_entropy_bound(self.expected_behavior_, omega, grid)
        return self

    def transform(self, X):
        """Witness value of every behavior, shape ``(n_samples, 1)``."""
        check_is_fitted(self, "witness_")
        F = check_behaviors(X)
        return np.array([[evaluate_witness(self.witness_, f)] for f in F])

    def score(self, X, y=None):
        return float(self.transform(X).mean())


class SemiDICertifier(ClassifierMixin, BaseEstimator):
    """Block pass/fail classifier: witness above threshold and energy within bound.

    ``fit`` builds the witness from calibration frequencies and, when
    ``threshold`` is None, places the threshold ``n_sigma`` block standard
    deviations below the expected witness value.
    """

    def __init__(self, omega=0.005, threshold=None, n_sigma=2.0, block_rounds=100_000,
                 epsilon=1e-9, c=None, d=1.0, n_grid=101):
        self.omega = omega
        self.threshold = threshold
        self.n_sigma = n_sigma
        self.block_rounds = block_rounds
        self.epsilon = epsilon
        self.c = c
        self.d = d
        self.n_grid = n_grid

    def fit(self, X, y=None):
        omega = check_mean_photon(self.omega)
        n = check_count(self.block_rounds, "block_rounds", min_val=1)
        p = _expected_behavior(X)
        self.witness_ = build_witness(p, omega, Grid(self.n_grid, self.n_grid))
        if self.threshold is None:
            self.threshold_ = tune_threshold(p, self.witness_, n, n_sigma=self.n_sigma)
        else:
            self.threshold_ = float(self.threshold)
        c = self.witness_.gamma_range if self.c is None else self.c
        self.finite_size_ = FiniteSizeParams(n, self.epsilon, c, self.d)
        self.classes_ = np.array([False, True])
        return self

    def decision_function(self, X):
        """Witness value minus threshold for each behavior."""
        check_is_fitted(self, "witness_")
        F = check_behaviors(X)
        return np.array([evaluate_witness(self.witness_, f) for f in F]) - self.threshold_

    def predict(self, X, measured_omega=None):
        passed = self.decision_function(X) >= 0.0
        if measured_omega is not None:
            measured = np.broadcast_to(np.asarray(measured_omega, dtype=float), passed.shape)
            passed &= measured <= self.omega
        return passed

    def certified_bits(self, X, measured_omega=None):
        per_block = math.floor(finite_size_min_entropy(self.threshold_, self.finite_size_))
        return np.where(self.predict(X, measured_omega), per_block, 0)


class ToeplitzExtractor(TransformerMixin, BaseEstimator):
    """Toeplitz hashing of fixed-length raw bit rows.

    ``fit`` fixes ``n_in`` from the width of ``X`` and draws a seed from
    ``random_state`` unless ``seed`` (a bit sequence of length
    ``n_in + m_out - 1``) is given. ``transform`` hashes each row.
    """

    def __init__(self, m_out=64, seed=None, random_state=None):
        self.m_out = m_out
        self.seed = seed
        self.random_state = random_state

    def fit(self, X, y=None):
        X = np.asarray(X)
        if X.ndim != 2:
            raise ValueError(f"X must be 2-D (n_samples, n_in), got shape {X.shape}")
        n_in = X.shape[1]
        m_out = check_count(self.m_out, "m_out", min_val=1)
        if m_out > n_in:
            raise ValueError(f"m_out={m_out} exceeds n_in={n_in}")
        if self.seed is None:
            self.seed_ = ToeplitzSeed.random(n_in, m_out, self.random_state)
        else:
            self.seed_ = ToeplitzSeed(np.asarray(self.seed), n_in, m_out)
        self.n_features_in_ = n_in
        self._hasher = ToeplitzHasher(self.seed_)
        return self

    def transform(self, X):
        check_is_fitted(self, "seed_")
        X = np.asarray(X)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(f"X must have shape (n_samples, {self.n_features_in_})")
        out = np.empty((X.shape[0], self.seed_.m_out), dtype=np.uint8)
        for i, row in enumerate(X):
            out[i] = self._hasher(row)
        return out
