"""Integration rules over the mediator.

Every sum-over-z appearing in an influence function is an expectation of some
g(z) under a conditional mediator law.  The rules below turn such a law into a
node grid plus weights so that ``sum(g(nodes) * weights, axis=-1)`` evaluates
the expectation.  Conditioning values may be scalars or 1-d arrays of per-row
values; row arrays are reshaped to broadcast against the node axis, so g must
do the same with any row-level quantities it closes over.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import MissingNuisance

__all__ = ["FiniteZRule", "GaussHermiteZRule", "expect_z"]


def _node_shape(x):
    """Reshape a conditioning value so it broadcasts against the node axis."""
    x = np.asarray(x)
    return x[..., None] if x.ndim else x


class FiniteZRule:
    """Exact summation over a finite mediator support."""

    def __init__(self, support):
        self.support = np.asarray(support, dtype=float)
        if self.support.ndim != 1 or self.support.size == 0:
            raise ValueError("mediator support must be a non-empty 1-d sequence")

    def grid(self, density, *cond):
        cond = tuple(_node_shape(x) for x in cond)
        weights = density(self.support, *cond)
        return self.support, np.asarray(weights, dtype=float)

    def __repr__(self):
        return f"FiniteZRule(support={self.support.tolist()})"


class GaussHermiteZRule:
    """Gauss-Hermite rule for Gaussian conditional mediator laws.

    The density object must expose ``location_scale(*cond) -> (mean, sd)``;
    nodes are placed at mean + sqrt(2)*sd*x_i with the usual weight rescaling
    so that the weights sum to one.
    """

    def __init__(self, n_nodes: int = 64):
        if n_nodes < 1:
            raise ValueError("n_nodes must be positive")
        self.n_nodes = n_nodes
        x, w = np.polynomial.hermite.hermgauss(n_nodes)
        self._x = x
        self._w = w / math.sqrt(math.pi)

    def grid(self, density, *cond):
        loc_scale = getattr(density, "location_scale", None)
        if loc_scale is None:
            raise MissingNuisance(
                "Gauss-Hermite integration needs a Gaussian conditional density "
                "exposing location_scale(); got %r" % (density,)
            )
        cond = tuple(_node_shape(x) for x in cond)
        mean, sd = loc_scale(*cond)
        nodes = mean + math.sqrt(2.0) * sd * self._x
        return nodes, self._w

    def __repr__(self):
        return f"GaussHermiteZRule(n_nodes={self.n_nodes})"


def expect_z(rule, density, g, *cond):
    """E[g(Z) | cond] under `density`, integrated with `rule`.

    Returns an array shaped like the (broadcast) conditioning rows, or a
    scalar when every input is scalar and g introduces no row axis.
    """
    nodes, weights = rule.grid(density, *cond)
    vals = np.asarray(g(nodes), dtype=float)
    weights = np.asarray(weights, dtype=float)
    if weights.ndim == 1 and vals.ndim >= 1 and vals.shape[-1] == weights.size:
        return vals @ weights
    return np.sum(vals * weights, axis=-1)
