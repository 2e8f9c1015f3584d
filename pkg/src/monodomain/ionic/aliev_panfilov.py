"""Aliev-Panfilov two-variable phenomenological model.

Transcribed from R. Aliev and A. Panfilov, "A simple two-variable model of
cardiac excitation", Chaos, Solitons & Fractals 7(3):293-301, 1996,
Eqs. (1)-(2) with the epsilon(u, w) modification of Eq. (4), using the
common parameter set (k = 8, a = 0.01, b = 0.15, eps0 = 0.002, mu1 = 0.2,
mu2 = 0.3).  The model's dimensionless time is converted to seconds with
the paper's 12.9 ms unit, and potentials map to millivolts as 100 u - 80.

State: u (dimensionless, approximately [0, 1]) and one recovery variable w.
The recovery equation depends nonlinearly on w through epsilon(u, w), so w
is a non-gate: it advances explicitly from the extrapolated state.
"""

import numpy as np
from numba import njit, prange

from .base import CellState

NAME = "Aliev-Panfilov"
NUM_VARS = 1
VAR_NAMES = ("w",)
GATES = (False,)

MILLIVOLT_GAIN = 100.0
MILLIVOLT_OFFSET = -80.0
ACTIVATION_THRESHOLD = 0.6


def default_parameters():
    return {
        "a": 0.01,
        "b": 0.15,
        "k": 8.0,
        "eps0": 0.002,
        "mu1": 0.2,
        "mu2": 0.3,
        "Time constant": 12.9e-3,  # seconds per dimensionless time unit
    }


def default_initial_state():
    return CellState(0.0, np.zeros(1))


def default_initial_conditions():
    return {"Transmembrane potential": 0.0, "w": 0.0}


def pack(parameters, cell_type=None):
    p = parameters
    return np.array(
        [p["a"], p["b"], p["k"], p["eps0"], p["mu1"], p["mu2"], p["Time constant"]],
        dtype=np.float64,
    )


@njit(cache=True)
def _current(u, w, a, k, kappa):
    return kappa * (k * u * (u - a) * (u - 1.0) + u * w)


@njit(cache=True)
def point_rates(u, w, P):
    """Full right-hand side at one point: (I_ion [1/s], dw/dt [per s])."""
    a, b, k = P[0], P[1], P[2]
    eps0, mu1, mu2 = P[3], P[4], P[5]
    kappa = 1.0 / P[6]
    eps = eps0 + mu1 * w[0] / (mu2 + u)
    dw = np.empty(1)
    dw[0] = kappa * eps * (-w[0] - k * u * (u - b - 1.0))
    return _current(u, w[0], a, k, kappa), dw


@njit(parallel=True, cache=True)
def current_kernel(u, W, P, I_out):
    a, k, kappa = P[0], P[2], 1.0 / P[6]
    for i in prange(u.shape[0]):
        I_out[i] = _current(u[i], W[i, 0], a, k, kappa)


@njit(parallel=True, cache=True)
def advance_kernel(u_ext, W_ext, W_bdf, alpha, dt, P, W_out, I_out):
    a, b, k, eps0, mu1, mu2 = P[0], P[1], P[2], P[3], P[4], P[5]
    kappa = 1.0 / P[6]
    clamped = 0
    for i in prange(u_ext.shape[0]):
        u = u_ext[i]
        w = W_ext[i, 0]
        eps = eps0 + mu1 * w / (mu2 + u)
        dw = kappa * eps * (-w - k * u * (u - b - 1.0))
        w_new = (W_bdf[i, 0] + dt * dw) / alpha
        W_out[i, 0] = w_new
        I_out[i] = _current(u, w_new, a, k, kappa)
    return clamped
