"""
Learnable parameters. V has m+1 rows; row 0 belongs to the padding
sentinel and stays exactly zero.
"""
import math
from dataclasses import dataclass

import numpy as np

from numerics.autodiff import Node


@dataclass
class ModelParams:
    V: np.ndarray
    P: np.ndarray
    q: np.ndarray
    Q: list
    K: list
    Wh: list
    W: np.ndarray

    @property
    def m(self):
        return self.V.shape[0] - 1

    @property
    def d(self):
        return self.V.shape[1]

    @property
    def b(self):
        return len(self.Q)

    def as_dict(self):
        """Name -> array, in checkpoint order: V, P, q, Q_1..b, K_1..b, W_1..b, W."""
        named = {'V': self.V, 'P': self.P, 'q': self.q}
        for prefix, arrays in (('Q', self.Q), ('K', self.K), ('W', self.Wh)):
            for i, array in enumerate(arrays, start=1):
                named[f'{prefix}_{i}'] = array
        named['W'] = self.W
        return named

    @classmethod
    def from_dict(cls, named, b):
        return cls(
            V=named['V'],
            P=named['P'],
            q=named['q'],
            Q=[named[f'Q_{i}'] for i in range(1, b + 1)],
            K=[named[f'K_{i}'] for i in range(1, b + 1)],
            Wh=[named[f'W_{i}'] for i in range(1, b + 1)],
            W=named['W'],
        )

    def leaves(self):
        return {name: Node(array) for name, array in self.as_dict().items()}

    def copy(self):
        return ModelParams.from_dict({k: v.copy() for k, v in self.as_dict().items()}, self.b)

    def zero_padding_row(self):
        self.V[0] = 0.0


def param_shapes(m, hp):
    shapes = {'V': (m + 1, hp.d), 'P': (hp.n, hp.d), 'q': (1, hp.d)}
    for prefix in ('Q', 'K', 'W'):
        for i in range(1, hp.b + 1):
            shapes[f'{prefix}_{i}'] = (hp.d, hp.head_width)
    shapes['W'] = (hp.d, hp.d)
    return shapes


def init_params(m, hp, seed=None):
    """Uniform in [-1/sqrt(d), 1/sqrt(d)], drawn in checkpoint order from one seeded generator."""
    rng = np.random.default_rng(hp.seed if seed is None else seed)
    bound = 1.0 / math.sqrt(hp.d)
    named = {
        name: rng.uniform(-bound, bound, size=shape)
        for name, shape in param_shapes(m, hp).items()
    }
    params = ModelParams.from_dict(named, hp.b)
    params.zero_padding_row()
    return params
