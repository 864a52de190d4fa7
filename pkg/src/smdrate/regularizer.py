"""Simple convex regularizers r(x) >= 0 with exact proximal maps over feasible sets."""
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np


def soft_threshold(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


@dataclass(frozen=True)
class Regularizer:
    """Handle for the nonsmooth part r of a composite objective.

    ``kind`` is ``"zero"``, ``"l1"`` (r = weight * ||x||_1) or ``"custom"``.
    The kind doubles as the tag that lets :func:`smdrate.geometry.mirror_step`
    pick a closed-form branch. Custom regularizers supply ``value_fn`` and
    ``subgrad_fn`` and optionally ``prox_fn(v, t, feasible_set)``.
    """

    kind: str = "zero"
    weight: float = 0.0
    value_fn: Optional[Callable] = None
    subgrad_fn: Optional[Callable] = None
    prox_fn: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in ("zero", "l1", "custom"):
            raise ValueError(f"unknown regularizer kind {self.kind!r}")
        if self.kind == "l1" and self.weight < 0:
            raise ValueError("l1 weight must be nonnegative")
        if self.kind == "custom" and (self.value_fn is None or self.subgrad_fn is None):
            raise ValueError("custom regularizer needs value_fn and subgrad_fn")

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def l1(cls, weight):
        return cls("l1", float(weight))

    @property
    def is_zero(self):
        return self.kind == "zero" or (self.kind == "l1" and self.weight == 0.0)

    def value(self, x):
        if self.kind == "zero":
            return 0.0
        if self.kind == "l1":
            return self.weight * float(np.sum(np.abs(x)))
        return float(self.value_fn(x))

    def value_batch(self, X):
        """r evaluated on the rows of ``X``."""
        X = np.atleast_2d(X)
        if self.kind == "zero":
            return np.zeros(X.shape[0])
        if self.kind == "l1":
            return self.weight * np.abs(X).sum(axis=1)
        return np.array([self.value_fn(x) for x in X])

    def subgradient(self, x):
        if self.kind == "zero":
            return np.zeros_like(x, dtype=float)
        if self.kind == "l1":
            return self.weight * np.sign(x)
        return np.asarray(self.subgrad_fn(x), dtype=float)

    def prox(self, v, t, feasible_set):
        """Exact argmin_{x in X} { t*r(x) + 1/2 ||x - v||_2^2 }, or None.

        None means no closed form is known for this (r, X) pair.
        """
        kind = feasible_set.kind
        if self.is_zero:
            return feasible_set.project(v)
        if self.kind == "l1":
            if kind == "simplex":
                # ||x||_1 is constant on the simplex
                return feasible_set.project(v)
            if kind in ("whole", "box"):
                return feasible_set.project(soft_threshold(v, t * self.weight))
            if kind == "ball" and feasible_set.norm == "l2":
                # sign-symmetric separable r + l2 ball: x = soft(v) / (1 + nu)
                return feasible_set.project(soft_threshold(v, t * self.weight))
            return None
        if self.prox_fn is not None:
            return np.asarray(self.prox_fn(v, t, feasible_set), dtype=float)
        return None
