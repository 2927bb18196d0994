"""Dormand-Prince 5(4) embedded Runge-Kutta step with a PI step-size controller."""

import numpy as np

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
E = B5 - B4


def step(f, y, k1, h):
    """One step from ``y`` with first stage ``k1``; returns ``(y5, err, k7)``.

    ``f`` may raise to signal that a stage point left the domain.
    """
    K = np.empty((7, y.size))
    K[0] = k1
    for s in range(1, 7):
        ys = y + h * (np.asarray(A[s]) @ K[:s])
        K[s] = f(ys)
    y5 = y + h * (B5 @ K)
    err = h * (E @ K)
    return y5, err, K[6]


class PIController:
    """Classic PI control on the scaled error norm (order 5 pair)."""

    def __init__(self, safety=0.9, alpha=0.7 / 5, beta=0.4 / 5, fmin=0.2, fmax=5.0):
        self.safety, self.alpha, self.beta = safety, alpha, beta
        self.fmin, self.fmax = fmin, fmax
        self.prev = 1e-4

    def factor(self, err, accepted):
        err = max(err, 1e-10)
        if accepted:
            fac = self.safety * err ** -self.alpha * self.prev ** self.beta
            self.prev = err
            return min(self.fmax, max(self.fmin, fac))
        return min(1.0, max(self.fmin, self.safety * err ** -0.2))
