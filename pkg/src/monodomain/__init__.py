"""Monodomain cardiac electrophysiology solver.

The package couples pointwise ionic membrane models (Aliev-Panfilov,
Bueno-Orovio, ten Tusscher-Panfilov 2006) to the anisotropic monodomain
reaction-diffusion equation, discretized with linear finite elements in
space and an IMEX-BDF scheme in time.  All physical quantities are handled
internally in SI units (meters, seconds, volts).
"""

import os

# The data-parallel kernels (ionic updates, sparse matrix-vector products)
# are deterministic for any pool size, and the CLI exposes --threads up to
# at least 4.  Numba caps its pool at the value of NUMBA_NUM_THREADS frozen
# at import time, which defaults to the core count; raise the default so
# thread-count experiments work on small machines too.  Users who set the
# variable themselves are left alone.
os.environ.setdefault("NUMBA_NUM_THREADS", str(max(4, os.cpu_count() or 1)))

from . import errors  # noqa: E402,F401
from .timestepping import BdfScheme, HistoryRing, bdf_coefficients, startup_schedule  # noqa: E402,F401

__version__ = "0.1.0"
