"""First-order optimizers updating parameter arrays in place."""

import numpy as np


def _check_finite(name, arr):
    if not np.all(np.isfinite(arr)):
        raise ArithmeticError(f"non-finite values in parameter {name!r} after update")


class Sgd:
    """Plain gradient descent: p <- p - lr * g."""

    def __init__(self, lr: float):
        self.lr = float(lr)

    def step(self, params, grads):
        for name, arr in params:
            g = grads.get(name)
            if g is None:
                continue
            arr -= self.lr * g
            _check_finite(name, arr)


class Adam:
    """Adam with bias correction; moment state is keyed by parameter name."""

    def __init__(self, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = float(lr)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}

    def step(self, params, grads):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        bias1 = 1.0 - b1**self.t
        bias2 = 1.0 - b2**self.t
        for name, arr in params:
            g = grads.get(name)
            if g is None:
                continue
            m = self._m.setdefault(name, np.zeros_like(arr))
            v = self._v.setdefault(name, np.zeros_like(arr))
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            arr -= self.lr * (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            _check_finite(name, arr)
