"""Backward differentiation formulas and solution-history management.

For a uniform step ``dt`` the BDF scheme of order ``sigma`` approximates
the time derivative at ``t_{n+1}`` as

    du/dt ~ (alpha * u_{n+1} - u_BDF) / dt,
    u_BDF = sum_k history_weights[k] * u_{n-k},

with the matching explicit extrapolation

    u_EXT = sum_k ext_weights[k] * u_{n-k}

accurate to the same order.  History vectors are stored newest first,
so ``weights[0]`` always multiplies ``u_n``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import HistoryTooShort, UnsupportedOrder

_ALPHA = {1: 1.0, 2: 1.5, 3: 11.0 / 6.0}
_HISTORY = {1: (1.0,), 2: (2.0, -0.5), 3: (3.0, -1.5, 1.0 / 3.0)}
_EXTRAPOLATION = {1: (1.0,), 2: (2.0, -1.0), 3: (3.0, -3.0, 1.0)}


@dataclass(frozen=True)
class BdfScheme:
    """Coefficients of a backward differentiation formula of given order."""

    order: int
    alpha: float
    history_weights: tuple
    ext_weights: tuple


def bdf_coefficients(order):
    """Return the :class:`BdfScheme` for ``order`` in {1, 2, 3}."""
    try:
        return BdfScheme(order, _ALPHA[order], _HISTORY[order], _EXTRAPOLATION[order])
    except (KeyError, TypeError):
        raise UnsupportedOrder(f"BDF order must be 1, 2 or 3, got {order!r}") from None


def startup_schedule(target_order, num_steps):
    """Per-step BDF orders used to prime a run from a single initial state.

    Step 0 runs at order 1, step 1 at ``min(2, target_order)``, and every
    later step at ``target_order``, so each step only ever consumes history
    produced by the steps before it.
    """
    bdf_coefficients(target_order)  # validate
    return [min(k + 1, target_order) for k in range(num_steps)]


class HistoryRing:
    """Fixed-capacity ring of the most recent solution vectors.

    Stores up to ``capacity`` (default 3) arrays of identical shape, newest
    first.  Works for nodal potential vectors and for per-node ionic-state
    arrays alike.
    """

    def __init__(self, capacity=3):
        if not 1 <= capacity <= 3:
            raise ValueError(f"capacity must be in [1, 3], got {capacity}")
        self.capacity = capacity
        self._slots = []

    @property
    def fill(self):
        return len(self._slots)

    def __getitem__(self, k):
        """k-th most recent vector; ``ring[0]`` is the newest."""
        return self._slots[k]

    def push(self, vector):
        vector = np.asarray(vector)
        if self._slots and vector.shape != self._slots[0].shape:
            raise ValueError(
                f"history vectors must share one shape: "
                f"{vector.shape} vs {self._slots[0].shape}"
            )
        self._slots.insert(0, vector)
        del self._slots[self.capacity:]

    def weighted_sum(self, weights):
        """Return ``sum_k weights[k] * vector_k`` over the newest vectors.

        Raises :class:`HistoryTooShort` when fewer vectors are stored than
        weights given.
        """
        if len(weights) > len(self._slots):
            raise HistoryTooShort(
                f"need {len(weights)} history vectors, have {len(self._slots)}"
            )
        acc = weights[0] * self._slots[0]
        for w, v in zip(weights[1:], self._slots[1:]):
            acc += w * v
        return acc

    def combination(self, scheme):
        """(u_BDF, u_EXT) for ``scheme`` from the stored history."""
        return (
            self.weighted_sum(scheme.history_weights),
            self.weighted_sum(scheme.ext_weights),
        )
