from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
from scipy.special import expit, softmax
from sklearn.utils import check_random_state

from ..utils.exceptions import ModelError, SignalError
from ..utils.functions import one_hot

N_CLASSES = 3
PROB_FLOOR = 1e-12
LOAD_WEIGHTS = np.array([0., .5, 1.])


@dataclass(frozen=True, eq=False)
class LstmLayerParams:
    """
        Weights of one LSTM layer; gate blocks are stacked in input, forget,
        candidate, output order.

        W_x : array, shape (4H, D)
        W_h : array, shape (4H, H)
        b : array, shape (4H,)
    """
    W_x: np.ndarray
    W_h: np.ndarray
    b: np.ndarray

    @property
    def hidden(self):
        return self.W_h.shape[1]

    @property
    def input_dim(self):
        return self.W_x.shape[1]

    def check(self):
        H = self.hidden
        if self.W_x.shape[0] != 4 * H or self.W_h.shape != (4 * H, H) or self.b.shape != (4 * H,):
            raise ModelError('shape_mismatch', "Inconsistent LSTM layer shapes %r, %r, %r"
                             % (self.W_x.shape, self.W_h.shape, self.b.shape))
        return self


@dataclass(frozen=True, eq=False)
class ModelParams:
    """
        Stacked LSTM layers followed by a dense softmax head.

        layers : tuple of LstmLayerParams
        W_out : array, shape (3, H)
        b_out : array, shape (3,)
        dropout_rate : float
    """
    layers: Tuple[LstmLayerParams, ...]
    W_out: np.ndarray
    b_out: np.ndarray
    dropout_rate: float = field(default=.2)

    @property
    def layer1(self):
        return self.layers[0]

    @property
    def layer2(self):
        return self.layers[1]

    @property
    def dims(self):
        """(input, hidden, layers, classes)"""
        return self.layers[0].input_dim, self.layers[0].hidden, len(self.layers), self.W_out.shape[0]

    def arrays(self):
        """All weight arrays in file order: per layer W_x, W_h, b; then W_out, b_out."""
        result = []
        for layer in self.layers:
            result.extend((layer.W_x, layer.W_h, layer.b))
        result.extend((self.W_out, self.b_out))
        return result

    def with_arrays(self, arrays):
        arrays = list(arrays)
        layers = tuple(LstmLayerParams(*arrays[3 * i:3 * i + 3]) for i in range(len(self.layers)))
        return ModelParams(layers, arrays[-2], arrays[-1], self.dropout_rate)

    def copy(self):
        return self.with_arrays([a.copy() for a in self.arrays()])

    def zeros_like(self):
        return self.with_arrays([np.zeros_like(a) for a in self.arrays()])


def _xavier(rng, shape):
    limit = np.sqrt(6. / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


def init_params(input_dim=8, hidden=64, n_layers=2, n_classes=N_CLASSES, dropout_rate=.2, random_state=None):
    """
    Seeded initialization: Xavier-uniform gate blocks, forget-gate bias +1,
    Xavier dense head, zero output bias.
    """
    rng = check_random_state(random_state)
    layers = []
    d = input_dim
    for _ in range(n_layers):
        W_x = np.vstack([_xavier(rng, (hidden, d)) for _ in range(4)])
        W_h = np.vstack([_xavier(rng, (hidden, hidden)) for _ in range(4)])
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = 1.
        layers.append(LstmLayerParams(W_x, W_h, b))
        d = hidden
    return ModelParams(tuple(layers), _xavier(rng, (n_classes, hidden)), np.zeros(n_classes), dropout_rate)


def zero_params(input_dim=8, hidden=64, n_layers=2, n_classes=N_CLASSES, dropout_rate=.2):
    return init_params(input_dim, hidden, n_layers, n_classes, dropout_rate, 0).zeros_like()


def cell_forward(x, h, c, p):
    """
    One LSTM step: i, f, o logistic, candidate tanh, c' = f*c + i*g, h' = o*tanh(c').
    Works on single vectors (D,) or batches (B, D).

        Returns
        -------
        (h', c')

        Examples
        --------
        >>> import numpy as np
        >>> p = zero_params(input_dim=3, hidden=4, n_layers=1).layer1
        >>> h, c = cell_forward(np.ones(3), np.zeros(4), np.zeros(4), p)
        >>> h.tolist(), c.tolist()
        ([0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 0.0])
    """
    h_new, c_new, _ = _cell(np.asarray(x, dtype=np.float64), h, c, p)
    if not (np.all(np.isfinite(h_new)) and np.all(np.isfinite(c_new))):
        raise ModelError('non_finite', "Non-finite LSTM state (max |c| = %r)" % np.nanmax(np.abs(c_new)))
    return h_new, c_new


def _cell(x, h, c, p):
    H = p.hidden
    if x.shape[-1] != p.input_dim or np.shape(h)[-1] != H or np.shape(c)[-1] != H:
        raise ModelError('shape_mismatch', "Cell input %r / state %r does not match layer (D=%d, H=%d)"
                         % (x.shape, np.shape(h), p.input_dim, H))
    z = x @ p.W_x.T + h @ p.W_h.T + p.b
    i = expit(z[..., :H])
    f = expit(z[..., H:2 * H])
    g = np.tanh(z[..., 2 * H:3 * H])
    o = expit(z[..., 3 * H:])
    c_new = f * c + i * g
    tanh_c = np.tanh(c_new)
    h_new = o * tanh_c
    return h_new, c_new, (i, f, g, o, tanh_c)


def dropout_masks(params, shape, rate, rng):
    """Inverted-dropout masks, one (B, T, H) array per layer."""
    if rate <= 0:
        return [None] * len(params.layers)
    keep = 1. - rate
    return [(rng.uniform(size=shape + (layer.hidden,)) < keep) / keep for layer in params.layers]


def _as_batch(X):
    X = getattr(X, 'frames', X)
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 2
    if single:
        X = X[None]
    if X.ndim != 3:
        raise ModelError('shape_mismatch', "Expected (T, D) or (B, T, D) input, got %r" % (X.shape,))
    if not np.all(np.isfinite(X)):
        raise SignalError('non_finite', "Model input contains NaN or infinite values")
    return X, single


def _forward(X, params, masks):
    B, T, _ = X.shape
    caches = []
    inputs = X
    for layer, mask in zip(params.layers, masks):
        layer.check()
        H = layer.hidden
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        hs, cs, gates = [h], [c], []
        for t in range(T):
            h, c, g = _cell(inputs[:, t], h, c, layer)
            hs.append(h)
            cs.append(c)
            gates.append(g)
        h_seq = np.stack(hs[1:], axis=1)
        out = np.maximum(h_seq, 0.)
        if mask is not None:
            out = out * mask
        caches.append((inputs, hs, cs, gates, h_seq, mask))
        inputs = out
    last = inputs[:, -1]
    logits = last @ params.W_out.T + params.b_out
    probs = softmax(logits, axis=-1)
    if not np.all(np.isfinite(probs)):
        raise ModelError('non_finite', "Non-finite probabilities (max |logit| = %r)" % np.nanmax(np.abs(logits)))
    return probs, (caches, last)


def forward(seq, params, mode='eval', rng_seed=None):
    """
    Class probabilities [low, optimal, high] for a sequence or a batch of sequences.

        Parameters
        ----------
        seq : FeatureSequence or array, shape (T, D) or (B, T, D)
        params : ModelParams
        mode : 'train' or 'eval'
            Dropout is applied after each LSTM layer in train mode only (inverted scaling).
        rng_seed : int or RandomState, optional
            Seed of the dropout masks.

        Returns
        -------
        array, shape (3,) or (B, 3), rows summing to one

        Examples
        --------
        >>> import numpy as np
        >>> forward(np.ones((5, 8)), zero_params()).tolist() == [1 / 3.] * 3
        True
    """
    X, single = _as_batch(seq)
    if mode not in ('train', 'eval'):
        raise KeyError("mode should be 'train' or 'eval', %r was passed" % mode)
    if mode == 'train':
        masks = dropout_masks(params, X.shape[:2], params.dropout_rate, check_random_state(rng_seed))
    else:
        masks = [None] * len(params.layers)
    probs, _ = _forward(X, params, masks)
    return probs[0] if single else probs


def loss(probs, labels):
    """
    Categorical cross-entropy, averaged over rows; probabilities floored at 1e-12.

        Parameters
        ----------
        probs : array, shape (3,) or (B, 3)
        labels : int, array of int, or one-hot array

        Examples
        --------
        >>> round(float(loss([0.7, 0.2, 0.1], 1)), 4)
        1.6094
        >>> round(float(loss([0.7, 0.2, 0.1], [0, 1, 0])), 4)
        1.6094
    """
    probs = np.asarray(probs, dtype=np.float64)
    labels = np.asarray(labels)
    # labels shaped like probs are one-hot rows whatever their dtype
    if labels.ndim > 0 and labels.shape == probs.shape:
        Y = np.atleast_2d(labels).astype(np.float64)
    else:
        Y = one_hot(np.atleast_1d(labels).astype(int), probs.shape[-1])
    probs = np.atleast_2d(probs)
    return float(-(Y * np.log(np.maximum(probs, PROB_FLOOR))).sum(axis=-1).mean())


def _layer_backward(layer, cache, d_out):
    inputs, hs, cs, gates, h_seq, mask = cache
    B, T, _ = inputs.shape
    H = layer.hidden
    d_h_seq = d_out * mask if mask is not None else d_out
    d_h_seq = d_h_seq * (h_seq > 0)
    dW_x = np.zeros_like(layer.W_x)
    dW_h = np.zeros_like(layer.W_h)
    db = np.zeros_like(layer.b)
    d_inputs = np.zeros_like(inputs)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in reversed(range(T)):
        i, f, g, o, tanh_c = gates[t]
        dh = d_h_seq[:, t] + dh_next
        do = dh * tanh_c
        dc = dh * o * (1. - tanh_c ** 2) + dc_next
        di = dc * g
        dg = dc * i
        df = dc * cs[t]
        dc_next = dc * f
        dz = np.concatenate([di * i * (1. - i), df * f * (1. - f), dg * (1. - g ** 2), do * o * (1. - o)], axis=1)
        dW_x += dz.T @ inputs[:, t]
        dW_h += dz.T @ hs[t]
        db += dz.sum(axis=0)
        d_inputs[:, t] = dz @ layer.W_x
        dh_next = dz @ layer.W_h
    return LstmLayerParams(dW_x, dW_h, db), d_inputs


def backward(batch, params, labels, rng_seed=None, mode='train'):
    """
    Exact gradients of the mean batch cross-entropy by backpropagation through time.
    The dropout masks are drawn from rng_seed exactly as ``forward(..., mode='train',
    rng_seed=rng_seed)`` draws them.

        Parameters
        ----------
        batch : array, shape (B, T, D)
        params : ModelParams
        labels : array of int, shape (B,)
        rng_seed : int or RandomState, optional
        mode : 'train' or 'eval'

        Returns
        -------
        (gradients as ModelParams, mean loss)
    """
    X, _ = _as_batch(batch)
    labels = np.atleast_1d(np.asarray(labels, dtype=int))
    if labels.shape[0] != X.shape[0]:
        raise ModelError('shape_mismatch', "%d labels for %d sequences" % (labels.shape[0], X.shape[0]))
    if mode == 'train':
        masks = dropout_masks(params, X.shape[:2], params.dropout_rate, check_random_state(rng_seed))
    else:
        masks = [None] * len(params.layers)
    probs, (caches, last) = _forward(X, params, masks)
    B = X.shape[0]
    Y = one_hot(labels, probs.shape[-1])
    d_logits = (probs - Y) / B
    dW_out = d_logits.T @ last
    db_out = d_logits.sum(axis=0)
    d_out = np.zeros_like(caches[-1][4])
    d_out[:, -1] = d_logits @ params.W_out
    layer_grads = []
    for layer, cache in reversed(list(zip(params.layers, caches))):
        grads, d_out = _layer_backward(layer, cache, d_out)
        layer_grads.append(grads)
    gradients = ModelParams(tuple(reversed(layer_grads)), dW_out, db_out, params.dropout_rate)
    return gradients, loss(probs, labels)


def load_score(probs):
    """
    Expected severity of the class distribution: 0 * p_low + 0.5 * p_optimal + 1 * p_high.

        Examples
        --------
        >>> float(load_score([0., 0., 1.])), float(load_score([0., 1., 0.]))
        (1.0, 0.5)
    """
    return np.asarray(probs, dtype=np.float64) @ LOAD_WEIGHTS
