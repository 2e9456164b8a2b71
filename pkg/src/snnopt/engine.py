"""Discrete-time optimal E/I balanced integrate-and-fire network.

One step applies, in order:

1. input drive   ``v += F x dt``, ``u += x dt``
2. leak          ``v *= 1 - tau dt``, ``u *= 1 - tau dt``
3. spike cascade ``s = spike_vector(v)``; ``u -= alpha F^T s``;
   ``v -= alpha F F^T s``; repeated until silent (``exhaustive``) or
   applied once (``once``).

Every update of ``v`` is ``F`` applied to the matching update of ``u``, so
``v = F u`` holds along the whole trajectory when it holds at the start.
The firing rate is ``alpha * cum_spikes / (step * dt)``.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import CascadeDivergence, LeakyNotSupported, StepLimitExceeded, ZeroSteps
from .linalg import GramFactor
from .problems import Instance, Mode

TRACE_HEADER = (
    "step",
    "time",
    "residual_l2",
    "l1_rate",
    "cum_spikes",
    "pinv_norm_v",
    "dual_violation",
    "conservation_defect",
)


class Cascade(str, enum.Enum):
    ONCE = "once"
    EXHAUSTIVE = "exhaustive"


@dataclass(frozen=True)
class SnnParams:
    dt: float
    tau: float = 0.0
    alpha: float = 1.0
    eta: float = 1.0
    mode: Mode = Mode.SIGNED
    cascade: Cascade = Cascade.EXHAUSTIVE
    t_max: int = 1000

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        object.__setattr__(self, "cascade", Cascade(self.cascade))
        for name in ("dt", "tau", "alpha", "eta"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.tau >= 0:
            raise ValueError("tau must be non-negative")
        if int(self.t_max) < 1:
            raise ValueError("t_max must be at least 1")
        if self.tau * self.dt >= 1.0:
            raise ValueError("tau * dt must stay below 1")
        object.__setattr__(self, "t_max", int(self.t_max))

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "alpha": self.alpha,
            "eta": self.eta,
            "dt": self.dt,
            "mode": self.mode.value,
            "cascade": self.cascade.value,
            "t_max": self.t_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SnnParams":
        return cls(**{k: d[k] for k in ("dt", "tau", "alpha", "eta", "mode", "cascade", "t_max") if k in d})


@dataclass
class SnnState:
    v: np.ndarray
    u: np.ndarray
    cum_spikes: np.ndarray
    step: int = 0
    spike_events: int = 0
    v0: np.ndarray | None = None

    def copy(self) -> "SnnState":
        return SnnState(
            self.v.copy(),
            self.u.copy(),
            self.cum_spikes.copy(),
            self.step,
            self.spike_events,
            None if self.v0 is None else self.v0.copy(),
        )


@dataclass(frozen=True)
class StepEvent:
    """Spikes emitted during one step.

    ``spikes`` sums the cascade; ``rounds`` keeps one vector per round.
    """

    spikes: np.ndarray
    rounds: tuple

    @property
    def cascade_rounds(self) -> int:
        return len(self.rounds)


def init(inst: Instance, params: SnnParams) -> SnnState:
    n, m = inst.F.shape
    return SnnState(np.zeros(n), np.zeros(m), np.zeros(n), 0, 0, np.zeros(n))


def spike_vector(v, eta: float, mode: Mode | str) -> np.ndarray:
    """Strict-threshold spike indicator (``sign(v_i)`` in signed mode)."""
    v = np.asarray(v, dtype=float)
    if Mode(mode) is Mode.SIGNED:
        return np.where(np.abs(v) > eta, np.sign(v), 0.0)
    return (v > eta).astype(float)


def _advance(state: SnnState, F: np.ndarray, Fx_dt: np.ndarray, x_dt: np.ndarray, params: SnnParams) -> StepEvent:
    # In-place update shared by step() and Simulator.
    v, u = state.v, state.u
    v += Fx_dt
    u += x_dt
    if params.tau > 0.0:
        keep = 1.0 - params.tau * params.dt
        v *= keep
        u *= keep
    eta, alpha = params.eta, params.alpha
    signed = params.mode is Mode.SIGNED
    exhaustive = params.cascade is Cascade.EXHAUSTIVE
    cap = 10 * F.shape[0]
    rounds = []
    while True:
        if signed:
            s = np.where(np.abs(v) > eta, np.sign(v), 0.0)
        else:
            s = (v > eta).astype(float)
        fired = np.count_nonzero(s)
        if not fired:
            break
        if len(rounds) >= cap:
            raise CascadeDivergence(
                f"cascade still active after {cap} rounds at step {state.step + 1}"
            )
        du = alpha * (F.T @ s)
        u -= du
        v -= F @ du
        state.cum_spikes += s
        state.spike_events += fired
        rounds.append(s)
        if not exhaustive:
            break
    state.step += 1
    return StepEvent(sum(rounds, np.zeros(F.shape[0])), tuple(rounds))


def step(state: SnnState, inst: Instance, params: SnnParams) -> tuple[SnnState, StepEvent]:
    """Return the successor state and the spikes fired; ``state`` is untouched."""
    if state.step >= params.t_max:
        raise StepLimitExceeded(f"already at t_max={params.t_max}")
    new = state.copy()
    event = _advance(new, inst.F, inst.F @ inst.x * params.dt, inst.x * params.dt, params)
    return new, event


def firing_rate(state: SnnState, params: SnnParams) -> np.ndarray:
    if state.step < 1:
        raise ZeroSteps("firing rate is undefined before the first step")
    return params.alpha * state.cum_spikes / (state.step * params.dt)


def conservation_defect(state: SnnState, inst: Instance, params: SnnParams) -> float:
    """Sup-norm miss of ``(v(t) - v(0)) / (t dt) = F x - F F^T r(t)``.

    The relation is exact for the non-leaky update, so anything above
    round-off means the state was not produced by ``step``.
    """
    if params.tau > 0:
        raise LeakyNotSupported("conservation only holds for tau = 0")
    if state.step < 1:
        raise ZeroSteps("conservation needs at least one step")
    F = inst.F
    T = state.step * params.dt
    v0 = np.zeros_like(state.v) if state.v0 is None else state.v0
    lhs = (state.v - v0) / T
    rhs = F @ inst.x - F @ (F.T @ firing_rate(state, params))
    return float(np.max(np.abs(lhs - rhs)))


@dataclass
class Trace:
    """Probed time series of a run.

    The CSV columns are ``TRACE_HEADER``; ``residual_xf`` (distance to the
    row-space projection of ``x``), ``coupling`` (``||v - F u||_inf``) and
    ``dual_value`` (``x^T u / eta``) are kept in memory only.
    """

    columns: dict = field(default_factory=lambda: {k: [] for k in TRACE_HEADER + ("residual_xf", "coupling", "dual_value")})
    final_state: SnnState | None = None
    rate: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.columns["step"])

    def __getitem__(self, key: str) -> np.ndarray:
        return np.asarray(self.columns[key], dtype=float)

    def append(self, **row) -> None:
        for k, col in self.columns.items():
            col.append(row.get(k, math.nan))

    def write_csv(self, path) -> None:
        with open(Path(path), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_HEADER)
            for i in range(len(self)):
                row = [str(int(self.columns["step"][i]))]
                row += [format(float(self.columns[k][i]), ".17g") for k in TRACE_HEADER[1:]]
                w.writerow(row)

    @classmethod
    def read_csv(cls, path) -> "Trace":
        tr = cls()
        with open(Path(path), newline="") as fh:
            rd = csv.reader(fh)
            header = tuple(next(rd))
            if header != TRACE_HEADER:
                raise ValueError(f"unexpected trace header {header}")
            for row in rd:
                tr.append(**{k: float(v) for k, v in zip(header, row)})
        return tr


class Simulator:
    """Stateful runner with the Gram quantities cached for fast probing."""

    def __init__(self, inst: Instance, params: SnnParams):
        self.inst = inst
        self.params = params
        self.gf = GramFactor(inst.F)
        self.F = np.ascontiguousarray(inst.F)
        self.Fx = self.F @ inst.x
        self._Fx_dt = self.Fx * params.dt
        self._x_dt = inst.x * params.dt
        self.x_F = self.gf.project_rowspace(inst.x)
        self.state = init(inst, params)

    def advance(self) -> StepEvent:
        if self.state.step >= self.params.t_max:
            raise StepLimitExceeded(f"already at t_max={self.params.t_max}")
        return _advance(self.state, self.F, self._Fx_dt, self._x_dt, self.params)

    def probe(self) -> dict:
        st, p, F = self.state, self.params, self.F
        T = st.step * p.dt
        r = p.alpha * st.cum_spikes / T
        Ftr = F.T @ r
        Fu = F @ st.u
        viol = np.abs(Fu) if p.mode is Mode.SIGNED else Fu
        if p.tau == 0.0:
            # (v - v0) - T F x + alpha F F^T cum, scaled by 1/T
            drift = st.v - st.v0 - T * self.Fx + F @ (p.alpha * (F.T @ st.cum_spikes))
            defect = float(np.max(np.abs(drift))) / T
        else:
            defect = math.nan
        return {
            "step": st.step,
            "time": T,
            "residual_l2": float(np.linalg.norm(self.inst.x - Ftr)),
            "l1_rate": float(np.abs(r).sum()),
            "cum_spikes": float(st.spike_events),
            "pinv_norm_v": self.gf.pinv_norm(st.v),
            "dual_violation": max(0.0, float(viol.max()) - p.eta),
            "conservation_defect": defect,
            "residual_xf": float(np.linalg.norm(self.x_F - Ftr)),
            "coupling": float(np.max(np.abs(st.v - Fu))),
            "dual_value": float(self.inst.x @ st.u) / p.eta,
        }


def run(
    inst: Instance,
    params: SnnParams,
    probe_every: int = 1,
    on_probe: Callable[[Simulator, dict], None] | None = None,
) -> Trace:
    """Step to ``t_max``, recording a trace row every ``probe_every`` steps.

    On an error raised mid-run the partially filled trace is attached to
    the exception as ``exc.trace``.
    """
    if probe_every < 1:
        raise ValueError("probe_every must be >= 1")
    sim = Simulator(inst, params)
    trace = Trace()
    try:
        for t in range(1, params.t_max + 1):
            sim.advance()
            if t % probe_every == 0:
                row = sim.probe()
                trace.append(**row)
                if on_probe is not None:
                    on_probe(sim, row)
    except Exception as exc:
        trace.final_state = sim.state
        exc.trace = trace
        raise
    trace.final_state = sim.state
    trace.rate = firing_rate(sim.state, params)
    return trace
