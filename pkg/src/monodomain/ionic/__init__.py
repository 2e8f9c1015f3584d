"""Ionic membrane models and the 0D single-cell pacing integrator.

Four models register here: the phenomenological Aliev-Panfilov and
Bueno-Orovio models, the physiological ten Tusscher-Panfilov 2006
ventricular model, and a Courtemanche-Ramirez-Nattel atrial slot that
accepts parameters but has no kernels yet.  All expose one uniform
module-level interface (NUM_VARS, GATES, pack, current_kernel,
advance_kernel, point_rates) consumed both by the cell-level operations
in this module and by the tissue solver, which calls the numba kernels
directly on full nodal arrays.
"""

import numpy as np

from ..errors import NonFiniteState
from ..timestepping import HistoryRing, bdf_coefficients
from .base import (
    CellState,
    CellType,
    IonicModelSpec,
    ModelKind,
    PacingProtocol0D,
)

__all__ = [
    "CellState",
    "CellType",
    "IonicModelSpec",
    "ModelKind",
    "PacingProtocol0D",
    "advance_ionic",
    "ion_current",
    "model_module",
    "num_variables",
    "pace_single_cell",
    "to_millivolts",
]


def model_module(kind):
    """The implementation module behind a ModelKind."""
    from . import aliev_panfilov, bueno_orovio, courtemanche, ten_tusscher

    return {
        ModelKind.ALIEV_PANFILOV: aliev_panfilov,
        ModelKind.BUENO_OROVIO: bueno_orovio,
        ModelKind.TTP06: ten_tusscher,
        ModelKind.CRN_SLOT: courtemanche,
    }[kind]


def num_variables(kind):
    return model_module(kind).NUM_VARS


def to_millivolts(kind, u):
    """Map a model potential to millivolts (affine, model-specific)."""
    mod = model_module(kind)
    return mod.MILLIVOLT_GAIN * u + mod.MILLIVOLT_OFFSET


def _check_finite(u, w):
    if not (np.all(np.isfinite(u)) and np.all(np.isfinite(w))):
        raise NonFiniteState("membrane state contains non-finite entries")


def ion_current(spec, u, w):
    """Total ionic current I_ion(u, w) so that du/dt = -I_ion + I_app.

    Units match du/dt for the model: V/s for TTP06, 1/s for the
    dimensionless phenomenological models.
    """
    mod = model_module(spec.kind)
    w = np.asarray(w, dtype=np.float64)
    if w.shape != (mod.NUM_VARS,):
        raise ValueError(
            f"{spec.kind.value} expects {mod.NUM_VARS} ionic variables, "
            f"got shape {w.shape}"
        )
    _check_finite(u, w)
    P = mod.pack(spec.parameters, spec.cell_type)
    out = np.empty(1)
    mod.current_kernel(np.array([float(u)]), w.reshape(1, -1), P, out)
    return float(out[0])


def advance_ionic(spec, u_ext, w_ext, w_history, dt, scheme):
    """One implicit-explicit step of the ionic variables.

    Gates solve (alpha w - w_BDF)/dt = (w_inf(u_ext) - w)/tau(u_ext) in
    closed form; every other variable advances explicitly with its
    right-hand side frozen at (u_ext, w_ext).  ``w_history`` holds past
    states newest-first and must cover the scheme's order.
    """
    mod = model_module(spec.kind)
    w_ext = np.asarray(w_ext, dtype=np.float64)
    w_bdf = w_history.weighted_sum(scheme.history_weights)
    _check_finite(u_ext, w_ext)
    if dt <= 0:
        raise ValueError("dt must be positive")
    P = mod.pack(spec.parameters, spec.cell_type)
    w_out = np.empty((1, mod.NUM_VARS))
    i_out = np.empty(1)
    mod.advance_kernel(
        np.array([float(u_ext)]),
        w_ext.reshape(1, -1),
        w_bdf.reshape(1, -1),
        scheme.alpha,
        dt,
        P,
        w_out,
        i_out,
    )
    if not np.all(np.isfinite(w_out)):
        raise NonFiniteState("ionic update produced non-finite values")
    return w_out[0]


def pace_single_cell(spec, protocol, order=2, stride=1):
    """Integrate one cell under a pacing protocol; return (state, trace).

    Runs the same splitting as the tissue solver in zero dimensions: the
    ionic variables advance per ``advance_ionic`` and the potential by
    the BDF relation u_{n+1} = (u_BDF + dt (I_app - I_ion)) / alpha with
    I_ion at the extrapolated potential and the fresh ionic state.  The
    first steps ramp the BDF order up from 1.  The trace holds rows
    (t, u, w_1..w_N) every ``stride`` steps, starting at t = 0.
    """
    mod = model_module(spec.kind)
    state = spec.initial_state
    P = mod.pack(spec.parameters, spec.cell_type)
    dt = protocol.dt
    n_steps = int(round(protocol.total_time / dt))

    u = float(state.u)
    w = state.w.astype(np.float64).copy()
    u_hist = HistoryRing(3)
    w_hist = HistoryRing(3)
    u_hist.push(np.array([u]))
    w_hist.push(w.copy())

    rows = [np.concatenate(([0.0, u], w))]
    w_out = np.empty((1, mod.NUM_VARS))
    i_out = np.empty(1)
    for k in range(n_steps):
        scheme = bdf_coefficients(min(k + 1, order))
        u_bdf = u_hist.weighted_sum(scheme.history_weights)[0]
        u_ext = u_hist.weighted_sum(scheme.ext_weights)
        w_bdf = w_hist.weighted_sum(scheme.history_weights)
        w_ext = w_hist.weighted_sum(scheme.ext_weights)
        mod.advance_kernel(
            u_ext, w_ext.reshape(1, -1), w_bdf.reshape(1, -1),
            scheme.alpha, dt, P, w_out, i_out,
        )
        t_next = (k + 1) * dt
        u = (u_bdf + dt * (protocol.current_at(t_next) - i_out[0])) / scheme.alpha
        w = w_out[0]
        if not (np.isfinite(u) and np.all(np.isfinite(w))):
            raise NonFiniteState(
                f"0D integration lost finiteness at t = {t_next:.6g} s"
            )
        u_hist.push(np.array([u]))
        w_hist.push(w.copy())
        if (k + 1) % stride == 0:
            rows.append(np.concatenate(([t_next, u], w)))

    return CellState(u, w.copy()), np.vstack(rows)
