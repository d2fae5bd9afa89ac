"""First-order optimizers over lists of parameter tensors."""

from __future__ import annotations

import numpy as np



def global_grad_norm(params: list) -> float:
    total = 0.0
    for p in params:
        g = p.grad_or_zeros()
        total += float((g * g).sum())
    return float(np.sqrt(total))


def clip_gradients(params: list, max_norm: float) -> float:
    """Scale all gradients when the global norm exceeds max_norm."""
    norm = global_grad_norm(params)
    if norm > max_norm > 0.0:
        factor = max_norm / norm
        for p in params:
            if p.grad is not None:
                p.grad *= factor
    return norm


class SGD:
    def __init__(self, params: list, lr: float):
        self.params = params
        self.lr = lr

    def step(self) -> None:
        for p in self.params:
            p.data -= self.lr * p.grad_or_zeros()


class AdaGrad:
    def __init__(self, params: list, lr: float, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.eps = eps
        self._accum = [np.zeros_like(p.data) for p in params]

    def step(self) -> None:
        for p, acc in zip(self.params, self._accum):
            g = p.grad_or_zeros()
            acc += g * g
            p.data -= self.lr * g / (np.sqrt(acc) + self.eps)


class Adam:
    def __init__(self, params: list, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self._m = [np.zeros_like(p.data) for p in params]
        self._v = [np.zeros_like(p.data) for p in params]
        self._t = 0

    def step(self) -> None:
        self._t += 1
        b1, b2 = self.beta1, self.beta2
        for p, m, v in zip(self.params, self._m, self._v):
            g = p.grad_or_zeros()
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            m_hat = m / (1 - b1 ** self._t)
            v_hat = v / (1 - b2 ** self._t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
