"""Fine-step explicit reference integrators for the ionic models.

The models expose their full right-hand side through ``point_rates``;
here that vector field is integrated with classical RK4 at a small step,
giving an integrator-independent reference against which the production
implicit-explicit scheme is checked.
"""

import numpy as np
from numba import njit

from monodomain.ionic import model_module


@njit(cache=True)
def _applied(t, t0s, durs, amps, period):
    total = 0.0
    for i in range(t0s.shape[0]):
        s = t - t0s[i]
        if s < 0.0:
            continue
        if period > 0.0:
            s -= period * np.floor(s / period)
        if s < durs[i]:
            total += amps[i]
    return total


def _make_runner(point_rates):
    # no cache=True: numba cannot persist closures
    @njit
    def run(u0, w0, P, dt, n_steps, t0s, durs, amps, period, stride):
        u = u0
        w = w0.copy()
        n_rows = n_steps // stride + 1
        out = np.empty((n_rows, 2 + w0.shape[0]))
        out[0, 0] = 0.0
        out[0, 1] = u
        out[0, 2:] = w
        row = 1
        for k in range(n_steps):
            t = k * dt
            i1, dw1 = point_rates(u, w, P)
            f1 = _applied(t, t0s, durs, amps, period) - i1
            i2, dw2 = point_rates(u + 0.5 * dt * f1, w + 0.5 * dt * dw1, P)
            f2 = _applied(t + 0.5 * dt, t0s, durs, amps, period) - i2
            i3, dw3 = point_rates(u + 0.5 * dt * f2, w + 0.5 * dt * dw2, P)
            f3 = _applied(t + 0.5 * dt, t0s, durs, amps, period) - i3
            i4, dw4 = point_rates(u + dt * f3, w + dt * dw3, P)
            f4 = _applied(t + dt, t0s, durs, amps, period) - i4
            u = u + dt * (f1 + 2.0 * f2 + 2.0 * f3 + f4) / 6.0
            w = w + dt * (dw1 + 2.0 * dw2 + 2.0 * dw3 + dw4) / 6.0
            if (k + 1) % stride == 0:
                out[row, 0] = (k + 1) * dt
                out[row, 1] = u
                out[row, 2:] = w
                row = row + 1
        return out[:row]

    return run


_RUNNERS = {}


def rk4_paced(spec, protocol, refine=100, stride=None):
    """Integrate ``spec`` under ``protocol`` with RK4 at dt/refine.

    Returns rows (t, u, w...) sampled on the protocol's own time grid
    (or every ``stride`` fine steps if given), so columns align with the
    trace of pace_single_cell for direct comparison.
    """
    mod = model_module(spec.kind)
    if spec.kind not in _RUNNERS:
        _RUNNERS[spec.kind] = _make_runner(mod.point_rates)
    run = _RUNNERS[spec.kind]
    P = mod.pack(spec.parameters, spec.cell_type)
    dt = protocol.dt / refine
    n_steps = int(round(protocol.total_time / dt))
    state = spec.initial_state
    return run(
        float(state.u),
        state.w.astype(np.float64),
        P,
        dt,
        n_steps,
        np.asarray(protocol.initial_times, dtype=np.float64),
        np.asarray(protocol.durations, dtype=np.float64),
        np.asarray(protocol.amplitudes, dtype=np.float64),
        protocol.period,
        refine if stride is None else stride,
    )
