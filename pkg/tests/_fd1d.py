"""Independent 1D finite-difference monodomain oracle.

Solves u_t + I_ion(u, w) = sigma u_xx + I_app on a line with
second-order centered differences, mirrored-ghost Neumann ends, and the
production solver's IMEX splitting (implicit diffusion on the BDF
left-hand side, ionic current at the extrapolated potential, gate
updates from the membrane model's own kernel).  The spatial operator
and the linear solve share nothing with the finite element path under
test: the system is tridiagonal and solved by banded LU, and the BDF
tables are spelled out locally rather than imported.
"""

import numpy as np
from scipy.linalg import solve_banded

from monodomain.ionic import model_module

# order -> (alpha, history weights, extrapolation weights)
_BDF = {
    1: (1.0, (1.0,), (1.0,)),
    2: (1.5, (2.0, -0.5), (2.0, -1.0)),
    3: (11.0 / 6.0, (3.0, -1.5, 1.0 / 3.0), (3.0, -3.0, 1.0)),
}


def conduction_velocity(activation, xs, x_from, x_to):
    """Wave speed between two sample stations [m/s]."""
    t_from = activation[np.argmin(np.abs(xs - x_from))]
    t_to = activation[np.argmin(np.abs(xs - x_to))]
    if t_from < 0 or t_to < 0 or t_to <= t_from:
        raise ValueError("wave did not traverse both stations")
    return (x_to - x_from) / (t_to - t_from)


def run_fd1d(spec, length, dx, dt, final_time, sigma,
             stim_end, stim_amplitude, stim_duration, order=2):
    """March the 1D monodomain and return (xs, activation_times).

    ``spec`` is an IonicModelSpec; the stimulus applies
    ``stim_amplitude`` (V/s) to every node with x <= ``stim_end`` during
    [0, ``stim_duration``).  Activation marks the argmax of du/dt,
    frozen when u crosses the model's activation threshold.
    """
    mod = model_module(spec.kind)
    packed = mod.pack(spec.parameters, spec.cell_type)
    threshold = mod.ACTIVATION_THRESHOLD

    n = int(round(length / dx))
    xs = np.arange(n + 1) * dx
    stim_mask = xs <= stim_end * (1 + 1e-12)

    u0 = float(spec.initial_state.u)
    w0 = np.asarray(spec.initial_state.w, dtype=np.float64)
    u_hist = [np.full(n + 1, u0)]
    w_hist = [np.tile(w0, (n + 1, 1))]

    # banded (ab) form of alpha/dt I - sigma L for each startup order
    def banded_matrix(alpha):
        r = sigma / (dx * dx)
        ab = np.zeros((3, n + 1))
        ab[0, 1:] = -r          # superdiagonal
        ab[1, :] = alpha / dt + 2.0 * r
        ab[2, :-1] = -r         # subdiagonal
        ab[0, 1] = -2.0 * r     # mirrored ghost at the left end
        ab[2, -2] = -2.0 * r    # mirrored ghost at the right end
        return ab

    matrices = {}
    activation = np.full(n + 1, -1.0)
    best_slope = np.full(n + 1, -np.inf)
    frozen = np.zeros(n + 1, dtype=bool)

    n_steps = int(round(final_time / dt))
    for step in range(n_steps):
        k = min(step + 1, order)
        alpha, hist_w, ext_w = _BDF[k]
        if k not in matrices:
            matrices[k] = banded_matrix(alpha)

        u_bdf = sum(c * u for c, u in zip(hist_w, u_hist))
        u_ext = sum(c * u for c, u in zip(ext_w, u_hist))
        w_bdf = sum(c * w for c, w in zip(hist_w, w_hist))
        w_ext = sum(c * w for c, w in zip(ext_w, w_hist))

        w_new = np.empty_like(w_ext)
        i_ion = np.empty(n + 1)
        mod.advance_kernel(u_ext, w_ext, w_bdf, alpha, dt, packed,
                           w_new, i_ion)

        t_next = (step + 1) * dt
        rhs = u_bdf / dt - i_ion
        if t_next < stim_duration:  # window [0, duration), sampled at t_next
            rhs = rhs + stim_amplitude * stim_mask
        u_new = solve_banded((1, 1), matrices[k], rhs)

        slope = (u_new - u_hist[0]) / dt
        better = ~frozen & (slope > best_slope)
        best_slope[better] = slope[better]
        activation[better] = t_next
        crossed = ~frozen & (u_hist[0] <= threshold) & (u_new > threshold)
        frozen[crossed] = True

        u_hist = [u_new] + u_hist[: order - 1]
        w_hist = [w_new] + w_hist[: order - 1]

    return xs, np.where(frozen, activation, -1.0)
