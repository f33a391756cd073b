import struct
from dataclasses import dataclass, field

import numpy as np

from .network import ModelParams, LstmLayerParams
from ..features.FeatureExtractor import NormStats, N_FEATURES
from ..utils.exceptions import ModelFileError

MAGIC = b'CLADVR01'
DEFAULT_DIMS = (N_FEATURES, 64, 2, 3)
_DIMS = struct.Struct('<4I')
_F8 = np.dtype('<f8')


@dataclass(frozen=True)
class Thresholds:
    """
        Per-subject cut points on the load score.

        Parameters
        ----------
        t_low, t_high : float
            Must satisfy 0 < t_low < t_high < 1.
        weak : bool
            True when calibration fell back to the default thresholds.

        Examples
        --------
        >>> Thresholds(0.33, 0.66).state(0.33)
        'low'
    """
    t_low: float = .33
    t_high: float = .66
    weak: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not 0. < self.t_low < self.t_high < 1.:
            raise ValueError("Thresholds should satisfy 0 < t_low < t_high < 1, (%r, %r) was passed"
                             % (self.t_low, self.t_high))

    def state(self, L):
        if L <= self.t_low:
            return 'low'
        if L >= self.t_high:
            return 'high'
        return 'optimal'

    def to_dict(self):
        return {'T_low': self.t_low, 'T_high': self.t_high, 'weak': self.weak}


@dataclass(frozen=True, eq=False)
class ModelBundle:
    """Everything a model file holds: weights, thresholds and normalization statistics."""
    params: ModelParams
    thresholds: Thresholds
    norms: NormStats


def save_model(params, thresholds, norms, path):
    """
    Writes the model file: 8-byte magic, four little-endian u32 dims (input, hidden,
    layers, classes), every weight array as little-endian f64 in ``ModelParams.arrays``
    order, then T_low, T_high, NormStats mean and std.
    """
    dims = params.dims
    if norms.mean.shape != (dims[0],):
        raise ValueError("NormStats have %d features while the model expects %d" % (norms.mean.shape[0], dims[0]))
    with open(path, 'wb') as f:
        f.write(MAGIC)
        f.write(_DIMS.pack(*dims))
        for array in params.arrays():
            f.write(np.ascontiguousarray(array, dtype=_F8).tobytes())
        f.write(np.array([thresholds.t_low, thresholds.t_high], dtype=_F8).tobytes())
        f.write(np.ascontiguousarray(norms.mean, dtype=_F8).tobytes())
        f.write(np.ascontiguousarray(norms.std, dtype=_F8).tobytes())


def _layout(dims):
    D, H, n_layers, C = dims
    shapes = []
    d = D
    for _ in range(n_layers):
        shapes.extend(((4 * H, d), (4 * H, H), (4 * H,)))
        d = H
    shapes.extend(((C, H), (C,)))
    return shapes


def load_model(path, expected_dims=DEFAULT_DIMS, dropout_rate=.2):
    """
    Reads a file written by ``save_model``.

        Parameters
        ----------
        path : str
        expected_dims : tuple of 4 ints or None
            Dims the file must declare; None accepts any architecture.
        dropout_rate : float
            Not stored in the file; attached to the returned params.

        Returns
        -------
        ModelBundle

        Raises
        ------
        ModelFileError
            With code bad_magic, dim_mismatch or truncated_file.
    """
    with open(path, 'rb') as f:
        data = f.read()
    if data[:len(MAGIC)] != MAGIC:
        raise ModelFileError('bad_magic', "%r is not a model file (magic %r)" % (path, data[:len(MAGIC)]))
    offset = len(MAGIC)
    if len(data) < offset + _DIMS.size:
        raise ModelFileError('truncated_file', "%r ends inside the header" % path)
    dims = _DIMS.unpack_from(data, offset)
    offset += _DIMS.size
    if expected_dims is not None and tuple(dims) != tuple(expected_dims):
        raise ModelFileError('dim_mismatch', "%r declares dims %r, expected %r" % (path, dims, tuple(expected_dims)))
    if min(dims) == 0:
        raise ModelFileError('dim_mismatch', "%r declares empty dims %r" % (path, dims))
    shapes = _layout(dims) + [(2,), (dims[0],), (dims[0],)]
    needed = sum(int(np.prod(s)) for s in shapes) * _F8.itemsize
    if len(data) - offset < needed:
        raise ModelFileError('truncated_file', "%r holds %d payload bytes, %d expected"
                             % (path, len(data) - offset, needed))
    if len(data) - offset > needed:
        raise ModelFileError('dim_mismatch', "%r has %d trailing bytes" % (path, len(data) - offset - needed))
    arrays = []
    for shape in shapes:
        n = int(np.prod(shape))
        arrays.append(np.frombuffer(data, dtype=_F8, count=n, offset=offset).astype(np.float64).reshape(shape))
        offset += n * _F8.itemsize
    weights, (t, mean, std) = arrays[:-3], arrays[-3:]
    n_layers = dims[2]
    layers = tuple(LstmLayerParams(*weights[3 * i:3 * i + 3]) for i in range(n_layers))
    params = ModelParams(layers, weights[-2], weights[-1], dropout_rate)
    try:
        thresholds = Thresholds(float(t[0]), float(t[1]))
    except ValueError as e:
        raise ModelFileError('bad_thresholds', str(e))
    return ModelBundle(params, thresholds, NormStats(mean, std))
