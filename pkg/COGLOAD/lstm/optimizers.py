from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class AdamState:
    """
        First and second moment estimates, one array per weight array, and the step counter.
    """
    m: tuple
    v: tuple
    t: int = 0

    @classmethod
    def zeros(cls, params):
        arrays = params.arrays()
        return cls(tuple(np.zeros_like(a) for a in arrays), tuple(np.zeros_like(a) for a in arrays), 0)


def adam_step(params, grads, state, lr=1e-3, beta1=.9, beta2=.999, eps=1e-8):
    """
    One bias-corrected Adam update.

        Parameters
        ----------
        params : ModelParams
        grads : ModelParams
            Gradients with the same shapes as params.
        state : AdamState
        lr, beta1, beta2, eps : float

        Returns
        -------
        (updated ModelParams, updated AdamState)

        Examples
        --------
        >>> import numpy as np
        >>> from COGLOAD.lstm.network import zero_params
        >>> p = zero_params(input_dim=1, hidden=1, n_layers=1)
        >>> g = p.with_arrays([np.ones_like(a) for a in p.arrays()])
        >>> p1, s1 = adam_step(p, g, AdamState.zeros(p), lr=0.1)
        >>> float(np.round(p1.b_out[0], 6)), s1.t
        (-0.1, 1)
    """
    t = state.t + 1
    new_arrays, new_m, new_v = [], [], []
    for w, g, m, v in zip(params.arrays(), grads.arrays(), state.m, state.v):
        m = beta1 * m + (1. - beta1) * g
        v = beta2 * v + (1. - beta2) * g * g
        m_hat = m / (1. - beta1 ** t)
        v_hat = v / (1. - beta2 ** t)
        new_arrays.append(w - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m)
        new_v.append(v)
    return params.with_arrays(new_arrays), AdamState(tuple(new_m), tuple(new_v), t)
