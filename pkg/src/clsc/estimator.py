"""scikit-learn compatible wrapper around training and inference."""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .dataio import Dataset
from .encoder import encode
from .exceptions import ValidationError
from .hierarchy import MentionSample, TypeHierarchy, pack_samples
from .metrics import evaluate
from .model import classify
from .train import TrainConfig, train

__all__ = ["CLSCClassifier", "check_hierarchy", "check_samples", "check_labels"]


def check_hierarchy(hierarchy) -> TypeHierarchy:
    if not isinstance(hierarchy, TypeHierarchy):
        raise ValidationError(f"expected a TypeHierarchy, got {type(hierarchy).__name__}")
    return hierarchy


def check_samples(X, hierarchy: TypeHierarchy, min_samples: int = 1, dims=None) -> list:
    """Validate a sequence of :class:`MentionSample` against ``hierarchy``.

    Parameters
    ----------
    X : Dataset or sequence of MentionSample
    hierarchy : TypeHierarchy
    min_samples : int
    dims : tuple of int, optional
        Expected ``(d_w, d_h)``; defaults to the dimensions of the first sample.

    Returns
    -------
    list of MentionSample
    """
    if isinstance(X, Dataset):
        X = X.samples
    if isinstance(X, (str, bytes)) or not hasattr(X, "__len__"):
        raise ValidationError("X must be a sequence of MentionSample")
    X = list(X)
    if len(X) < min_samples:
        raise ValidationError(f"need at least {min_samples} samples, got {len(X)}")
    for i, s in enumerate(X):
        if not isinstance(s, MentionSample):
            raise ValidationError(f"X[{i}] is a {type(s).__name__}, expected MentionSample")
    if dims is None and X:
        dims = (X[0].d_w, X[0].d_h)
    for i, s in enumerate(X):
        if (s.d_w, s.d_h) != tuple(dims):
            raise ValidationError(f"X[{i}] has dimensions {(s.d_w, s.d_h)}, expected {tuple(dims)}")
        s.validate(hierarchy)
    return X


def check_labels(y, hierarchy: TypeHierarchy, n: int) -> np.ndarray:
    """Type indices from a sequence of type paths or indices."""
    y = list(y)
    if len(y) != n:
        raise ValidationError(f"{n} samples but {len(y)} labels")
    out = np.empty(n, dtype=int)
    for i, label in enumerate(y):
        if isinstance(label, str):
            out[i] = hierarchy.index(label)
        else:
            hierarchy.check_index(label)
            out[i] = label
    return out


class CLSCClassifier(ClassifierMixin, TransformerMixin, BaseEstimator):
    """Entity-type classifier trained on noisy candidate sets.

    Training uses each sample's candidate set: clean samples (one candidate
    path) are supervised directly, noisy ones contribute only through the
    latent clustering regularizer weighted by ``lambda_clsc``.

    Parameters
    ----------
    hierarchy : TypeHierarchy
        Type inventory. Predictions are type paths from ``hierarchy.types``.
    lambda_clsc : float
        Regularizer weight; 0 trains on clean samples alone.
    S_m, S_lp : int
        Longest Markov path and the label-propagation step budget.
    lr, batch_size, epochs, lambda_l2 : optimization settings.
    d_z, n_layers, hidden : latent size and projection network shape.
    zero_diagonal : bool
        Drop self-loops from the similarity graph.
    random_state : int
        Seed for initialization, shuffling and propagation.

    Attributes
    ----------
    params_ : ModelParams
    classes_ : ndarray of str
    n_features_in_ : int
        ``d_w + d_h``.
    history_ : list of dict
        Per-epoch loss (and dev metrics when ``dev`` is passed to ``fit``).
    """

    def __init__(
        self,
        hierarchy: Optional[TypeHierarchy] = None,
        lambda_clsc: float = 2.0,
        S_m: int = 8,
        S_lp: int = 200,
        lr: float = 0.01,
        batch_size: int = 64,
        epochs: int = 30,
        lambda_l2: float = 0.0,
        d_z: int = 16,
        n_layers: int = 1,
        hidden: int = 32,
        zero_diagonal: bool = False,
        random_state: int = 0,
    ):
        self.hierarchy = hierarchy
        self.lambda_clsc = lambda_clsc
        self.S_m = S_m
        self.S_lp = S_lp
        self.lr = lr
        self.batch_size = batch_size
        self.epochs = epochs
        self.lambda_l2 = lambda_l2
        self.d_z = d_z
        self.n_layers = n_layers
        self.hidden = hidden
        self.zero_diagonal = zero_diagonal
        self.random_state = random_state

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            lr=self.lr,
            batch_size=self.batch_size,
            S_lp=self.S_lp,
            S_m=self.S_m,
            lambda_clsc=self.lambda_clsc,
            lambda_l2=self.lambda_l2,
            epochs=self.epochs,
            seed=self.random_state,
            d_z=self.d_z,
            n_layers=self.n_layers,
            hidden=self.hidden,
            zero_diagonal=self.zero_diagonal,
        )

    def fit(self, X, y=None, dev=None):
        """Train on ``X``; ``y`` is ignored because labels come from candidate sets.

        When ``dev`` samples with gold types are given, the parameters from
        the epoch with the best dev strict accuracy are kept.
        """
        h = self.hierarchy
        if h is None and isinstance(X, Dataset):
            h = X.hierarchy
        h = check_hierarchy(h)
        X = check_samples(X, h, min_samples=2)
        if dev is not None:
            dev = check_samples(dev, h, dims=(X[0].d_w, X[0].d_h))
        report = train(X, h, self.train_config(), dev=dev)
        self.hierarchy_ = h
        self.params_ = report.best_params
        self.classes_ = np.array(h.types, dtype=object)
        self.n_features_in_ = X[0].d_w + X[0].d_h
        self.dims_ = (X[0].d_w, X[0].d_h)
        self.history_ = report.history()
        self.best_epoch_ = report.best_epoch
        return self

    def _pool(self, X):
        check_is_fitted(self, "params_")
        return pack_samples(self.hierarchy_, check_samples(X, self.hierarchy_, dims=self.dims_))

    def transform(self, X) -> np.ndarray:
        """Latent embeddings ``Z`` of shape ``(n_samples, d_z)``."""
        pool = self._pool(X)
        return encode(self.params_.encoder, pool).Z

    def predict_proba(self, X) -> np.ndarray:
        """Posterior over all types, shape ``(n_samples, K)``."""
        Z = self.transform(X)
        return classify(self.params_.classifier, Z)

    def predict(self, X) -> np.ndarray:
        """Predicted type path for each sample."""
        proba = self.predict_proba(X)
        return self.classes_[proba.argmax(axis=1)]

    def score(self, X, y=None, sample_weight=None) -> float:
        """Strict accuracy against ``y`` (paths or indices) or the samples' gold types."""
        if sample_weight is not None:
            raise ValidationError("sample_weight is not supported")
        pool = self._pool(X)
        gold = pool.gold if y is None else check_labels(y, self.hierarchy_, pool.B)
        if np.any(gold < 0):
            raise ValidationError("every sample needs a gold type when y is not given")
        pred = classify(self.params_.classifier, encode(self.params_.encoder, pool).Z).argmax(axis=1)
        return evaluate(self.hierarchy_, pred, gold).strict_acc
