"""Courtemanche-Ramirez-Nattel 1998 human atrial model (interface slot).

Parameter and state metadata follow M. Courtemanche, R. J. Ramirez and
S. Nattel, "Ionic mechanisms underlying human atrial action potential
properties: insights from a mathematical model", Am. J. Physiol. 275:
H301-H321, 1998.  The configurable conductances (including the fixed and
voltage-scaled parts of the ultrarapid K+ current g_Kur) are accepted and
validated so that parameter files referencing this model parse cleanly,
but the ionic kernels themselves are not implemented yet: advancing a
simulation with this model raises NotImplementedError.
"""

import numpy as np

from .base import CellState

NAME = "CRN"
NUM_VARS = 20
VAR_NAMES = (
    "m", "h", "j", "oa", "oi", "ua", "ui", "xr", "xs", "d", "f", "fCa",
    "u_rel", "v_rel", "w_rel", "Nai", "Ki", "Cai", "CaUp", "CaRel",
)
GATES = (True,) * 15 + (False,) * 5

MILLIVOLT_GAIN = 1.0e3
MILLIVOLT_OFFSET = 0.0
ACTIVATION_THRESHOLD = -0.020  # volts


def default_parameters():
    # Maximal conductances in nS/pF.  g_Kur(V) = gKur_fix
    # + gKur_var / (1 + exp(-(V - 15) / 13)).
    return {
        "gNa": 7.8,
        "gK1": 0.09,
        "gto": 0.1652,
        "gKur_fix": 0.005,
        "gKur_var": 0.05,
        "gKr": 0.029411765,
        "gKs": 0.12941176,
        "gCaL": 0.12375,
        "gbNa": 0.0006744375,
        "gbCa": 0.001131,
    }


def default_initial_state():
    # Resting state of the published model.
    w = np.array([
        2.91e-3,    # m
        9.65e-1,    # h
        9.78e-1,    # j
        3.04e-2,    # oa
        9.99e-1,    # oi
        4.96e-3,    # ua
        9.99e-1,    # ui
        3.29e-5,    # xr
        1.87e-2,    # xs
        1.37e-4,    # d
        9.99e-1,    # f
        7.75e-1,    # fCa
        0.0,        # u_rel
        1.0,        # v_rel
        9.99e-1,    # w_rel
        1.117e1,    # Nai
        1.39e2,     # Ki
        1.013e-4,   # Cai
        1.488,      # CaUp
        1.488,      # CaRel
    ])
    return CellState(-81.18e-3, w)


def default_initial_conditions():
    state = default_initial_state()
    out = {"Transmembrane potential": state.u}
    out.update(zip(VAR_NAMES, state.w))
    return out


def pack(parameters, cell_type=None):
    order = ("gNa", "gK1", "gto", "gKur_fix", "gKur_var", "gKr", "gKs",
             "gCaL", "gbNa", "gbCa")
    return np.array([parameters[name] for name in order], dtype=np.float64)


def current_kernel(u, W, P, I_out):
    raise NotImplementedError(
        "the Courtemanche-Ramirez-Nattel kernels are not implemented")


def advance_kernel(u_ext, W_ext, W_bdf, alpha, dt, P, W_out, I_out):
    raise NotImplementedError(
        "the Courtemanche-Ramirez-Nattel kernels are not implemented")
