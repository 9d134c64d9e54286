"""Product quadrature over a disk, used by the small-N oracles.

Gauss-Legendre in the radius times the trapezoidal rule in the angle.  For
integrands of the form polynomial times ``exp(-|z|^2)`` the angular rule is
exact once it has more nodes than the angular degree, and the radial rule
converges geometrically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_RADIUS = 8.0


@dataclass(frozen=True)
class DiskRule:
    nodes: np.ndarray  # complex
    weights: np.ndarray  # area weights, sum = pi R^2

    def integrate(self, values: np.ndarray) -> complex:
        return complex(np.sum(self.weights * values))

    def __len__(self) -> int:
        return len(self.nodes)


def disk_rule(n_radial: int = 48, n_angular: int = 24, radius: float = DEFAULT_RADIUS,
              center: complex = 0j) -> DiskRule:
    t, w = np.polynomial.legendre.leggauss(n_radial)
    r = radius * (t + 1) / 2
    wr = w * radius / 2 * r
    theta = 2 * np.pi * (np.arange(n_angular) + 0.5) / n_angular
    wt = 2 * np.pi / n_angular
    nodes = (r[:, None] * np.exp(1j * theta)[None, :]).ravel() + center
    weights = np.repeat(wr * wt, n_angular)
    return DiskRule(nodes, weights)
