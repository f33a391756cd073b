import numpy as np
from scipy.special import xlogy


def elog(x):
    """x * log(x) with the 0 * log(0) = 0 convention, elementwise."""
    return xlogy(x, x)


def entropy(p, axis=-1):
    """
    Shannon entropy (nats) of distributions stored along ``axis``.
    Inputs are normalized to sum to one first.

        Examples
        --------
        >>> round(float(entropy([1., 1.])), 6)
        0.693147
        >>> float(entropy([0., 3.]))
        0.0
    """
    p = np.asarray(p, dtype=np.float64)
    p = p / p.sum(axis=axis, keepdims=True)
    return 0. - elog(p).sum(axis=axis)


def normalized_entropy(p, axis=-1):
    """Entropy divided by log(n_bins), so a uniform distribution scores 1."""
    p = np.asarray(p, dtype=np.float64)
    n = p.shape[axis]
    return entropy(p, axis=axis) / np.log(n)
