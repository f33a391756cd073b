import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.model_selection import train_test_split
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_is_fitted

from .network import N_CLASSES, backward, forward, init_params, load_score, loss
from .optimizers import AdamState, adam_step
from ..utils.exceptions import ModelError

logger = logging.getLogger(__name__)

LABELS = ('low', 'optimal', 'high')


@dataclass(frozen=True)
class TrainConfig:
    """
        Training hyperparameters.

        Parameters
        ----------
        epochs : int
            Maximum number of passes over the training split; 0 returns the initial weights.
        batch_size : int
        seed : int
            Drives initialization, the validation split, shuffling and dropout masks.
        val_fraction : float
            Share of the data held out for early stopping, in (0, 1).
        patience : int
            Epochs without validation-loss improvement before stopping.
        min_per_class : int
            Minimum amount of samples of every class; 0 disables the check.
    """
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    val_fraction: float = .2
    patience: int = 10
    lr: float = 1e-3
    betas: tuple = field(default=(.9, .999))
    hidden: int = 64
    n_layers: int = 2
    dropout: float = .2
    min_per_class: int = 30

    def __post_init__(self):
        if not 0. < self.val_fraction < 1.:
            raise ValueError("val_fraction should be in (0, 1), %r was passed" % self.val_fraction)
        if self.epochs < 0 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("epochs >= 0, batch_size >= 1 and patience >= 1 are required, got %r, %r, %r"
                             % (self.epochs, self.batch_size, self.patience))
        if not 0. <= self.dropout < 1.:
            raise ValueError("dropout should be in [0, 1), %r was passed" % self.dropout)


def _check_dataset(X, y):
    X = np.asarray(getattr(X, 'frames', X), dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 3:
        raise ModelError('shape_mismatch', "Expected (n_samples, T, D) sequences, got %r" % (X.shape,))
    if y.shape != (X.shape[0],):
        raise ModelError('shape_mismatch', "Expected %d labels, got shape %r" % (X.shape[0], y.shape))
    if not np.all(np.isin(y, np.arange(N_CLASSES))):
        raise ValueError("Labels should be integers in [0, %d), %r was passed" % (N_CLASSES, np.unique(y)))
    return X, y.astype(int)


def _evaluate(X, y, params):
    if X.shape[0] == 0:
        return float('nan'), float('nan')
    probs = forward(X, params, mode='eval')
    return loss(probs, y), float(np.mean(probs.argmax(axis=1) == y))


def train(X, y, cfg=TrainConfig(), X_val=None, y_val=None, verbose=False):
    """
    Trains the LSTM classifier with mini-batch Adam and early stopping on validation loss.

        Parameters
        ----------
        X : array-like, shape (n_samples, T, D)
            Normalized feature sequences.
        y : array-like, shape (n_samples,)
            Class labels, 0 = low, 1 = optimal, 2 = high.
        cfg : TrainConfig
        X_val, y_val : array-like, optional
            Explicit validation set; when omitted a stratified ``cfg.val_fraction`` split of X is held out.
        verbose : bool
            Log epoch metrics at INFO instead of DEBUG.

        Returns
        -------
        (ModelParams with the lowest validation loss, history as a list of dicts with keys
        epoch, train_loss, train_acc, val_loss, val_acc)
    """
    X, y = _check_dataset(X, y)
    rng = check_random_state(cfg.seed)
    counts = np.bincount(y, minlength=N_CLASSES)
    if np.any(counts == 0):
        raise ModelError('class_missing', "Classes %r have no samples" % np.flatnonzero(counts == 0).tolist())
    if X_val is not None:
        X_val, y_val = _check_dataset(X_val, y_val)
        counts = counts + np.bincount(y_val, minlength=N_CLASSES)
    if np.any(counts < cfg.min_per_class):
        raise ModelError('too_few_samples', "At least %d samples per class are required, got %r"
                         % (cfg.min_per_class, counts.tolist()))
    if X_val is None:
        stratify = y if np.all(counts >= 2) else None
        X, X_val, y, y_val = train_test_split(X, y, test_size=cfg.val_fraction, random_state=cfg.seed,
                                              stratify=stratify)
    missing = np.setdiff1d(np.arange(N_CLASSES), y)
    if missing.size:
        raise ModelError('class_missing', "Classes %r are absent from the training split" % missing.tolist())

    params = init_params(X.shape[2], cfg.hidden, cfg.n_layers, N_CLASSES, cfg.dropout, rng)
    history = []
    if cfg.epochs == 0:
        return params, history
    state = AdamState.zeros(params)
    beta1, beta2 = cfg.betas
    level = logging.INFO if verbose else logging.DEBUG
    best, best_loss, stale = params, np.inf, 0
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(X.shape[0])
        for start in range(0, X.shape[0], cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            grads, _ = backward(X[batch], params, y[batch], rng_seed=rng.randint(np.iinfo(np.int32).max))
            params, state = adam_step(params, grads, state, cfg.lr, beta1, beta2)
        train_loss, train_acc = _evaluate(X, y, params)
        val_loss, val_acc = _evaluate(X_val, y_val, params)
        history.append({'epoch': epoch, 'train_loss': train_loss, 'train_acc': train_acc,
                        'val_loss': val_loss, 'val_acc': val_acc})
        logger.log(level, "epoch %d: train_loss=%.4f train_acc=%.3f val_loss=%.4f val_acc=%.3f",
                   epoch, train_loss, train_acc, val_loss, val_acc)
        if val_loss < best_loss or np.isnan(val_loss):
            best, best_loss, stale = params, val_loss, 0
        else:
            stale += 1
            if stale >= cfg.patience:
                logger.log(level, "Early stopping after epoch %d, best val_loss=%.4f", epoch, best_loss)
                break
    return best, history


class LSTMClassifier(BaseEstimator, ClassifierMixin):
    """
        Three-class cognitive load classifier: stacked LSTM layers with ReLU outputs and
        dropout, a dense softmax head, trained by backpropagation through time with Adam.

        Parameters
        ----------
        hidden : int
            Units per LSTM layer.
        n_layers : int
            Number of stacked LSTM layers.
        dropout : float
            Inverted-dropout rate after every LSTM layer during training.
        lr : float
            Adam learning rate.
        betas : tuple of float
            Adam moment decay rates.
        epochs : int
        batch_size : int
        val_fraction : float
        patience : int
        seed : int
        min_per_class : int
        verbose : bool

        See Also
        --------
        COGLOAD.lstm.train

        Examples
        --------
        >>> from COGLOAD.synthgen import make_load_classification
        >>> from COGLOAD.lstm import LSTMClassifier
        >>> X, y = make_load_classification(n_per_class=40, seed=0)
        >>> model = LSTMClassifier(epochs=3, min_per_class=0).fit(X, y)
        >>> model.predict_proba(X[:2]).shape
        (2, 3)
    """

    def __init__(self, hidden=64, n_layers=2, dropout=.2, lr=1e-3, betas=(.9, .999), epochs=100,
                 batch_size=32, val_fraction=.2, patience=10, seed=0, min_per_class=30, verbose=False):
        self.hidden = hidden
        self.n_layers = n_layers
        self.dropout = dropout
        self.lr = lr
        self.betas = betas
        self.epochs = epochs
        self.batch_size = batch_size
        self.val_fraction = val_fraction
        self.patience = patience
        self.seed = seed
        self.min_per_class = min_per_class
        self.verbose = verbose

    def train_config(self):
        return TrainConfig(epochs=self.epochs, batch_size=self.batch_size, seed=self.seed,
                           val_fraction=self.val_fraction, patience=self.patience, lr=self.lr,
                           betas=tuple(self.betas), hidden=self.hidden, n_layers=self.n_layers,
                           dropout=self.dropout, min_per_class=self.min_per_class)

    def fit(self, X, y, X_val=None, y_val=None):
        """
            Fits the network.

            Parameters
            ----------
            X : array-like, shape (n_samples, T, D)
            y : array-like, shape (n_samples,)
            X_val, y_val : array-like, optional

            Returns
            ------
            self
        """
        self.params_, self.history_ = train(X, y, self.train_config(), X_val, y_val, self.verbose)
        self.classes_ = np.arange(N_CLASSES)
        return self

    @classmethod
    def from_params(cls, params, **kwargs):
        """Wraps already trained weights, e.g. the ones read from a model file."""
        model = cls(hidden=params.dims[1], n_layers=params.dims[2], dropout=params.dropout_rate, **kwargs)
        model.params_, model.history_ = params, []
        model.classes_ = np.arange(N_CLASSES)
        return model

    def predict_proba(self, X):
        check_is_fitted(self, 'params_')
        return forward(np.asarray(getattr(X, 'frames', X), dtype=np.float64), self.params_, mode='eval')

    def predict(self, X):
        return self.classes_[np.argmax(np.atleast_2d(self.predict_proba(X)), axis=1)]

    def load_score(self, X):
        return load_score(self.predict_proba(X))
