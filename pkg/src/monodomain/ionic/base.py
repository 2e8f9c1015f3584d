"""Shared types for the ionic membrane models.

Every model presents the same picture to the tissue solver: a state made
of the transmembrane potential ``u`` plus ``N_w`` ionic variables ``w``,
a total ionic current ``I_ion(u, w)`` entering ``du/dt = -I_ion + I_app``,
and a per-variable split into Hodgkin-Huxley gates (advanced implicitly in
closed form) and remaining variables (advanced explicitly).
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class ModelKind(Enum):
    ALIEV_PANFILOV = "Aliev-Panfilov"
    BUENO_OROVIO = "Bueno-Orovio"
    TTP06 = "TTP06"
    CRN_SLOT = "CRN"

    @classmethod
    def from_name(cls, name):
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(
            f"unknown ionic model {name!r}; expected one of "
            f"{[k.value for k in cls]}"
        )


class CellType(Enum):
    ENDOCARDIUM = "Endocardium"
    MYOCARDIUM = "Myocardium"
    EPICARDIUM = "Epicardium"

    @classmethod
    def from_name(cls, name):
        for ct in cls:
            if ct.value == name:
                return ct
        raise ValueError(
            f"unknown cell type {name!r}; expected one of "
            f"{[c.value for c in cls]}"
        )


@dataclass
class CellState:
    """Pointwise membrane state: potential ``u`` and ionic variables ``w``.

    ``u`` is in volts for TTP06 and dimensionless (approximately [0, 1])
    for the phenomenological models; ``w`` units are model-specific.
    """

    u: float
    w: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=np.float64)

    def copy(self):
        return CellState(self.u, self.w.copy())


@dataclass
class PacingProtocol0D:
    """Train of rectangular current pulses for single-cell runs.

    Amplitudes are in the model's own units of ``du/dt`` (V/s for TTP06,
    1/s for the dimensionless models).  Pulse ``j`` of stimulus ``i`` is
    active on ``[t0_i + j*period, t0_i + j*period + duration_i)``; with
    ``period = 0`` each stimulus fires once.
    """

    initial_times: tuple = ()
    durations: tuple = ()
    amplitudes: tuple = ()
    period: float = 0.0
    total_time: float = 0.0
    dt: float = 1e-4

    def __post_init__(self):
        self.initial_times = tuple(float(t) for t in self.initial_times)
        self.durations = tuple(float(d) for d in self.durations)
        self.amplitudes = tuple(float(a) for a in self.amplitudes)
        n = len(self.initial_times)
        if not (len(self.durations) == len(self.amplitudes) == n):
            raise ValueError("initial times, durations and amplitudes must pair up")
        if any(d <= 0 for d in self.durations):
            raise ValueError("stimulus durations must be positive")
        if self.period != 0 and self.durations and self.period <= max(self.durations):
            raise ValueError("pacing period must exceed the longest stimulus")
        if self.dt <= 0:
            raise ValueError("0D time step must be positive")

    def current_at(self, t):
        """Total applied current at time ``t`` (model units of du/dt)."""
        total = 0.0
        for t0, dur, amp in zip(self.initial_times, self.durations, self.amplitudes):
            s = t - t0
            if s < 0.0:
                continue
            if self.period > 0.0:
                s -= self.period * np.floor(s / self.period)
            if s < dur:
                total += amp
        return total


@dataclass(frozen=True)
class IonicModelSpec:
    """A concrete, fully parameterized membrane model.

    ``parameters`` starts from the model's published defaults and may
    override any named constant individually; unknown names are rejected
    here so typos surface at construction, not mid-run.
    """

    kind: ModelKind
    cell_type: CellType = None
    parameters: dict = field(default_factory=dict)
    initial_state: CellState = None

    def __post_init__(self):
        from . import model_module  # late import to avoid a cycle

        mod = model_module(self.kind)
        if self.kind is ModelKind.TTP06 and self.cell_type is None:
            object.__setattr__(self, "cell_type", CellType.EPICARDIUM)
        defaults = mod.default_parameters()
        unknown = set(self.parameters) - set(defaults)
        if unknown:
            raise ValueError(
                f"unknown parameter(s) for {self.kind.value}: {sorted(unknown)}"
            )
        merged = dict(defaults)
        merged.update({k: float(v) for k, v in self.parameters.items()})
        object.__setattr__(self, "parameters", merged)
        if self.initial_state is None:
            object.__setattr__(self, "initial_state", mod.default_initial_state())
        if self.initial_state.w.shape != (mod.NUM_VARS,):
            raise ValueError(
                f"{self.kind.value} needs {mod.NUM_VARS} ionic variables, "
                f"got {self.initial_state.w.shape}"
            )
