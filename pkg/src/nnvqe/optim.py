"""Adam over a flat parameter vector, with optional per-index updates.

Grouped optimizers update disjoint index subsets in turn; bias correction
therefore tracks one step counter per parameter so that a single group
covering every index reproduces textbook Adam exactly.
"""

from __future__ import annotations

import numpy as np


class Adam:
    def __init__(self, n_params: int, lr: float = 0.05, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = np.zeros(n_params, dtype=np.int64)

    def step(self, params: np.ndarray, grad: np.ndarray, indices=None) -> np.ndarray:
        """One update in place; indices restricts it to a parameter subset.

        grad is always full length; entries outside indices are ignored.
        """
        if indices is None:
            indices = slice(None)
        g = grad[indices]
        self.t[indices] += 1
        t = self.t[indices]
        self.m[indices] = self.beta1 * self.m[indices] + (1.0 - self.beta1) * g
        self.v[indices] = self.beta2 * self.v[indices] + (1.0 - self.beta2) * g * g
        m_hat = self.m[indices] / (1.0 - self.beta1**t)
        v_hat = self.v[indices] / (1.0 - self.beta2**t)
        params[indices] -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return params
