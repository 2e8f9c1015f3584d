"""Bueno-Orovio minimal ventricular model (four variables).

Transcribed from A. Bueno-Orovio, E. M. Cherry and F. H. Fenton, "Minimal
model for human ventricular action potentials in tissue", J. Theor. Biol.
253:544-560, 2008: currents J_fi, J_so, J_si from Eqs. (4)-(6), gate
dynamics from Eqs. (7)-(9), voltage map u_mV = 85.7 u - 84 from Table 2.
Defaults are the EPI column of Table 1.  Native time constants are in
milliseconds; this module converts to SI seconds.

All three recovery variables (v, w, s) are linear in themselves once u is
frozen, i.e. they behave as generalized Hodgkin-Huxley gates and advance
implicitly in closed form.
"""

import numpy as np
from numba import njit, prange

from .base import CellState

NAME = "Bueno-Orovio"
NUM_VARS = 3
VAR_NAMES = ("v", "w", "s")
GATES = (True, True, True)

MILLIVOLT_GAIN = 85.7
MILLIVOLT_OFFSET = -84.0
ACTIVATION_THRESHOLD = 0.6


def default_parameters():
    # EPI parameter set, Table 1 of the 2008 publication.
    return {
        "u_o": 0.0,
        "u_u": 1.55,
        "theta_v": 0.3,
        "theta_w": 0.13,
        "theta_v_minus": 0.006,
        "theta_o": 0.006,
        "tau_v1_minus": 60.0,
        "tau_v2_minus": 1150.0,
        "tau_v_plus": 1.4506,
        "tau_w1_minus": 60.0,
        "tau_w2_minus": 15.0,
        "k_w_minus": 65.0,
        "u_w_minus": 0.03,
        "tau_w_plus": 200.0,
        "tau_fi": 0.11,
        "tau_o1": 400.0,
        "tau_o2": 6.0,
        "tau_so1": 30.0181,
        "tau_so2": 0.9957,
        "k_so": 2.0458,
        "u_so": 0.65,
        "tau_s1": 2.7342,
        "tau_s2": 16.0,
        "k_s": 2.0994,
        "u_s": 0.9087,
        "tau_si": 1.8875,
        "tau_w_inf": 0.07,
        "w_inf_star": 0.94,
    }


_ORDER = tuple(default_parameters())


def default_initial_state():
    return CellState(0.0, np.array([1.0, 1.0, 0.0]))


def default_initial_conditions():
    return {"Transmembrane potential": 0.0, "v": 1.0, "w": 1.0, "s": 0.0}


def pack(parameters, cell_type=None):
    return np.array([parameters[name] for name in _ORDER], dtype=np.float64)


@njit(cache=True)
def _current(u, v, w, s, P):
    # Native currents are per millisecond; scale to 1/s at the end.
    u_o, u_u, theta_v, theta_w = P[0], P[1], P[2], P[3]
    theta_o = P[5]
    tau_fi, tau_o1, tau_o2 = P[14], P[15], P[16]
    tau_so1, tau_so2, k_so, u_so = P[17], P[18], P[19], P[20]
    tau_si = P[25]

    h_v = 1.0 if u >= theta_v else 0.0
    h_w = 1.0 if u >= theta_w else 0.0
    h_o = 1.0 if u >= theta_o else 0.0

    tau_o = (1.0 - h_o) * tau_o1 + h_o * tau_o2
    tau_so = tau_so1 + (tau_so2 - tau_so1) * (1.0 + np.tanh(k_so * (u - u_so))) / 2.0

    j_fi = -v * h_v * (u - theta_v) * (u_u - u) / tau_fi
    j_so = (u - u_o) * (1.0 - h_w) / tau_o + h_w / tau_so
    j_si = -h_w * w * s / tau_si
    return 1.0e3 * (j_fi + j_so + j_si)


@njit(cache=True)
def _gate_pieces(u, P):
    """Source/decay-rate pairs (per ms) of the v, w, s gate equations."""
    theta_v, theta_w = P[2], P[3]
    theta_v_minus, theta_o = P[4], P[5]
    tau_v1_minus, tau_v2_minus, tau_v_plus = P[6], P[7], P[8]
    tau_w1_minus, tau_w2_minus, k_w_minus, u_w_minus = P[9], P[10], P[11], P[12]
    tau_w_plus = P[13]
    tau_s1, tau_s2, k_s, u_s = P[21], P[22], P[23], P[24]
    tau_w_inf, w_inf_star = P[26], P[27]

    h_v = 1.0 if u >= theta_v else 0.0
    h_vm = 1.0 if u >= theta_v_minus else 0.0
    h_w = 1.0 if u >= theta_w else 0.0
    h_o = 1.0 if u >= theta_o else 0.0

    tau_v_minus = (1.0 - h_vm) * tau_v1_minus + h_vm * tau_v2_minus
    v_inf = 1.0 if u < theta_v_minus else 0.0
    rate_v = (1.0 - h_v) / tau_v_minus + h_v / tau_v_plus
    src_v = (1.0 - h_v) * v_inf / tau_v_minus

    tau_w_minus = tau_w1_minus + (tau_w2_minus - tau_w1_minus) * (
        1.0 + np.tanh(k_w_minus * (u - u_w_minus))
    ) / 2.0
    w_inf = (1.0 - h_o) * (1.0 - u / tau_w_inf) + h_o * w_inf_star
    rate_w = (1.0 - h_w) / tau_w_minus + h_w / tau_w_plus
    src_w = (1.0 - h_w) * w_inf / tau_w_minus

    tau_s = (1.0 - h_w) * tau_s1 + h_w * tau_s2
    s_inf = (1.0 + np.tanh(k_s * (u - u_s))) / 2.0

    return src_v, rate_v, src_w, rate_w, s_inf / tau_s, 1.0 / tau_s


@njit(cache=True)
def point_rates(u, w, P):
    """Full right-hand side at one point: (I_ion [1/s], dw/dt [per s])."""
    src_v, rate_v, src_w, rate_w, src_s, rate_s = _gate_pieces(u, P)
    dw = np.empty(3)
    dw[0] = (src_v - rate_v * w[0]) * 1.0e3
    dw[1] = (src_w - rate_w * w[1]) * 1.0e3
    dw[2] = (src_s - rate_s * w[2]) * 1.0e3
    return _current(u, w[0], w[1], w[2], P), dw


@njit(parallel=True, cache=True)
def current_kernel(u, W, P, I_out):
    for i in prange(u.shape[0]):
        I_out[i] = _current(u[i], W[i, 0], W[i, 1], W[i, 2], P)


@njit(parallel=True, cache=True)
def advance_kernel(u_ext, W_ext, W_bdf, alpha, dt, P, W_out, I_out):
    dt_ms = dt * 1.0e3
    clamped = 0
    for i in prange(u_ext.shape[0]):
        u = u_ext[i]
        src_v, rate_v, src_w, rate_w, src_s, rate_s = _gate_pieces(u, P)
        v = (W_bdf[i, 0] + dt_ms * src_v) / (alpha + dt_ms * rate_v)
        w = (W_bdf[i, 1] + dt_ms * src_w) / (alpha + dt_ms * rate_w)
        s = (W_bdf[i, 2] + dt_ms * src_s) / (alpha + dt_ms * rate_s)

        if v < 0.0:
            v = 0.0
            clamped += 1
        elif v > 1.0:
            v = 1.0
            clamped += 1
        if w < 0.0:
            w = 0.0
            clamped += 1
        elif w > 1.0:
            w = 1.0
            clamped += 1
        if s < 0.0:
            s = 0.0
            clamped += 1
        elif s > 1.0:
            s = 1.0
            clamped += 1

        W_out[i, 0] = v
        W_out[i, 1] = w
        W_out[i, 2] = s
        I_out[i] = _current(u, v, w, s, P)
    return clamped
