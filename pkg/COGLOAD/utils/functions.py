import numpy as np


def clamp(x, lo=0., hi=1.):
    return min(max(x, lo), hi)


def one_hot(y, n_classes=3):
    """
    One-hot encodes integer class labels.
        Parameters
        ----------
        y : array-like, shape (n_samples,)
            Integer labels in [0, n_classes).
        n_classes : int
            The amount of classes.
        Returns
        -------
        array-like, shape (n_samples, n_classes)

        Examples
        --------
        >>> one_hot([0, 2], 3)
        array([[1., 0., 0.],
               [0., 0., 1.]])
    """
    y = np.asarray(y, dtype=int)
    result = np.zeros((y.shape[0], n_classes))
    result[np.arange(y.shape[0]), y] = 1.
    return result


def latency_percentiles(latencies_ms):
    """
    Calculates the p50/p95/p99 latency summary used by the bench and replay reports.
        Parameters
        ----------
        latencies_ms : array-like, shape (n,)
            Latencies in milliseconds.
        Returns
        -------
        dict with keys p50, p95, p99, max, mean (all milliseconds)
    """
    lat = np.asarray(latencies_ms, dtype=np.float64)
    if lat.size == 0:
        return {'p50': None, 'p95': None, 'p99': None, 'max': None, 'mean': None}
    p50, p95, p99 = np.percentile(lat, [50, 95, 99])
    return {'p50': float(p50), 'p95': float(p95), 'p99': float(p99),
            'max': float(lat.max()), 'mean': float(lat.mean())}
