"""Instance generation, parameter selection, experiment runs and verification."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import engine
from .engine import SnnParams, Trace
from .errors import GammaZero, IncompatibleTrace
from .geometry import niceness
from .linalg import GramFactor
from .oracles import l1min_oracle, lasso_oracle, nnls_oracle
from .problems import Instance, Kind, Mode, ProblemKind, load_instance, save_instance

PRNG = "numpy.random.PCG64"
CONSERVATION_TOL = 1e-8
COUPLING_TOL = 1e-9
WEAK_DUALITY_TOL = 1e-6
NNLS_GAP_TOL = 0.05
L1_GAP_TOL = 0.10
LASSO_GAP_TOL = 0.10


def gen_rsm(n: int, m: int, seed: int) -> np.ndarray:
    """``n`` independent uniform points on the unit sphere of ``R^m``, as rows."""
    if not n >= m >= 1:
        raise ValueError("need n >= m >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    F = rng.standard_normal((n, m))
    return F / np.linalg.norm(F, axis=1, keepdims=True)


def gen_instance(n: int, m: int, seed: int, x_mode: str = "sparse", support: int | None = None) -> Instance:
    """RSM matrix plus a target.

    ``x_mode="sparse"`` sets ``x = F^T r0`` for a non-negative ``r0`` with
    ``support`` non-zeros (default ``max(1, m - 1)``), so every l1 program
    is feasible.  ``x_mode="gaussian"`` draws ``x`` as a standard normal.
    """
    F = gen_rsm(n, m, seed)
    rng = np.random.Generator(np.random.PCG64([seed, 1]))
    if x_mode == "gaussian":
        x = rng.standard_normal(m)
    elif x_mode == "sparse":
        k = max(1, m - 1) if support is None else support
        r0 = np.zeros(n)
        r0[rng.choice(n, size=k, replace=False)] = rng.uniform(0.5, 1.5, size=k)
        x = F.T @ r0
    else:
        raise ValueError(f"unknown x_mode {x_mode!r}")
    return Instance(F, x)


def least_squares_dt(inst: Instance, gf: GramFactor | None = None) -> float:
    """Largest step for which the least-squares residual bound holds."""
    gf = GramFactor(inst.F) if gf is None else gf
    xf = np.linalg.norm(gf.project_rowspace(inst.x))
    if xf == 0.0:
        raise ValueError("x has no component in the row space of F")
    return math.sqrt(gf.spectral.lambda_min_nz) / (24.0 * math.sqrt(inst.n) * xf)


def potential_bound(inst: Instance, eta: float, gf: GramFactor | None = None) -> float:
    """``2 sqrt(kappa eta n)``, the bound on ``||v||`` in the pseudo-inverse norm."""
    gf = GramFactor(inst.F) if gf is None else gf
    return 2.0 * math.sqrt(gf.spectral.kappa * eta * inst.n)


def l1_coupling_gap(inst: Instance, gamma: float, lambda_max: float) -> float:
    """``tau_cpl = gamma / (10 n^2 lambda_max^2)``."""
    return gamma / (10.0 * inst.n**2 * lambda_max**2)


def l1_alpha(inst: Instance, gamma: float, lambda_max: float) -> float:
    """Spike strength assembled from the worst-case l1 bounds, with a safety factor of 2."""
    tc = l1_coupling_gap(inst, gamma, lambda_max)
    return min(tc / inst.m, tc**2 * gamma**3) / 2.0


def l1_horizon(inst: Instance, opt: float, lambda_min: float, eps: float = 0.1) -> int:
    """``ceil(m^2 n ||x||^2 / (eps^2 lambda_min OPT))`` in time units."""
    return math.ceil(inst.m**2 * inst.n * float(inst.x @ inst.x) / (eps**2 * lambda_min * opt))


def auto_params(inst: Instance, kind: ProblemKind, t_max: int | None = None, gamma: float | None = None) -> SnnParams:
    """Parameters meeting the preconditions of the matching convergence bound.

    NNLS uses ``eta = lambda_max`` and ``alpha = 1``; its default ``t_max``
    is the first step where the residual bound drops below
    ``0.05 ||x_F||``.  The l1 and Lasso kinds use ``eta = 1`` with the
    spike strength from ``l1_alpha``; their default ``t_max`` covers the
    l1 horizon, which is astronomically long for the worst-case ``alpha``.

    Raises
    ------
    GammaZero
        l1 or Lasso parameters requested for a matrix with ``gamma = 0``.
    """
    gf = GramFactor(inst.F)
    sp = gf.spectral
    dt = least_squares_dt(inst, gf)
    if kind.kind is Kind.NNLS:
        eta = sp.lambda_max
        if t_max is None:
            t_max = math.ceil(potential_bound(inst, eta, gf) / (0.05 * dt))
        return SnnParams(dt=dt, tau=0.0, alpha=1.0, eta=eta, mode=Mode.SIGNED, t_max=t_max)
    if gamma is None:
        gamma = niceness(inst.F).gamma
    if not gamma > 0:
        raise GammaZero("the l1 spike strength needs gamma(F) > 0")
    alpha = l1_alpha(inst, gamma, sp.lambda_max)
    tau = kind.beta if kind.kind is Kind.LASSO else 0.0
    if t_max is None:
        opt = l1min_oracle(inst, kind.mode).opt_value
        t_max = math.ceil(l1_horizon(inst, opt, sp.lambda_min_nz) / dt)
    return SnnParams(dt=dt, tau=tau, alpha=alpha, eta=1.0, mode=kind.mode, t_max=t_max)


@dataclass
class ExperimentConfig:
    """One run: where the instance comes from, what to solve, where to write.

    Give either ``instance_path`` or the RSM triple ``(n, m, seed)``.
    ``params=None`` selects ``auto_params``; ``t_max`` then overrides its
    horizon.
    """

    kind: ProblemKind
    instance_path: str | None = None
    n: int | None = None
    m: int | None = None
    seed: int | None = None
    x_mode: str | None = None
    params: SnnParams | None = None
    t_max: int | None = None
    probe_every: int = 1
    out_dir: str | None = None
    run_oracle: bool = True
    verify: bool = True

    def resolved_x_mode(self) -> str:
        if self.x_mode is not None:
            return self.x_mode
        return "gaussian" if self.kind.kind is Kind.NNLS else "sparse"

    def load(self) -> Instance:
        if self.instance_path is not None:
            return load_instance(self.instance_path)
        if None in (self.n, self.m, self.seed):
            raise ValueError("config needs instance_path or n, m and seed")
        return gen_instance(self.n, self.m, self.seed, self.resolved_x_mode())

    def source(self) -> dict:
        if self.instance_path is not None:
            return {"path": str(self.instance_path)}
        return {"rsm": {"n": self.n, "m": self.m, "seed": self.seed, "x_mode": self.resolved_x_mode(), "prng": PRNG}}


def solve_oracle(inst: Instance, kind: ProblemKind):
    if kind.kind is Kind.NNLS:
        return nnls_oracle(inst)
    if kind.kind is Kind.LASSO:
        return lasso_oracle(inst, kind.beta)
    return l1min_oracle(inst, kind.mode)


def oracle_gaps(inst: Instance, kind: ProblemKind, r: np.ndarray, oracle) -> dict:
    """Distance of the network's rate from the reference optimum."""
    F, x = inst.F, inst.x
    if kind.kind is Kind.NNLS:
        return {"nnls_residual_gap": float(np.linalg.norm(x - F.T @ r)) - oracle.residual}
    if kind.kind is Kind.LASSO:
        return {"lasso_distance": float(np.linalg.norm(F.T @ (r - oracle.r_star)))}
    return {"l1_gap": float(np.abs(r).sum()) - oracle.opt_value}


@dataclass
class ExperimentResult:
    instance: Instance
    params: SnnParams
    trace: Trace
    summary: dict
    oracle: object = None
    report: "VerificationReport | None" = None
    wall_clock: float = 0.0
    error: BaseException | None = None


def _dump(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run the network, the matching oracle and the verifier; write artefacts.

    With ``out_dir`` set, writes ``instance.json``, ``trace.csv``,
    ``summary.json`` and ``timing.json``.  The first three are
    byte-identical across repeated runs; wall-clock time goes to the
    fourth.  A failing run still flushes its partial trace and a summary
    with ``status="failed"`` before the error propagates.
    """
    inst = cfg.load()
    params = cfg.params if cfg.params is not None else auto_params(inst, cfg.kind, cfg.t_max)
    out = Path(cfg.out_dir) if cfg.out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        save_instance(inst, out / "instance.json")
    summary = {
        "status": "ok",
        "kind": cfg.kind.kind.value,
        "beta": cfg.kind.beta,
        "params": params.to_dict(),
        "probe_every": cfg.probe_every,
        "source": cfg.source(),
    }
    start = time.perf_counter()
    try:
        trace = engine.run(inst, params, cfg.probe_every)
    except Exception as exc:
        wall = time.perf_counter() - start
        trace = getattr(exc, "trace", Trace())
        summary.update(status="failed", error=f"{type(exc).__name__}: {exc}", steps=_steps(trace))
        if out is not None:
            _flush(out, trace, summary, wall)
        raise
    wall = time.perf_counter() - start
    st = trace.final_state
    r = trace.rate
    summary.update(
        steps=st.step,
        final_residual=float(np.linalg.norm(inst.x - inst.F.T @ r)),
        final_residual_xf=float(trace["residual_xf"][-1]) if len(trace) else None,
        l1_norm=float(np.abs(r).sum()),
        spike_events=st.spike_events,
        rate=r.tolist(),
    )
    oracle = None
    if cfg.run_oracle:
        oracle = solve_oracle(inst, cfg.kind)
        summary["oracle"] = {"method": oracle.method_tag.value, "opt_value": oracle.opt_value}
        summary["oracle_gaps"] = oracle_gaps(inst, cfg.kind, r, oracle)
    report = None
    if cfg.verify:
        report = verify(trace, inst, params, cfg.kind, oracle)
        summary["verification"] = report.to_dict()
    if out is not None:
        _flush(out, trace, summary, wall)
    return ExperimentResult(inst, params, trace, summary, oracle, report, wall)


def _steps(trace: Trace) -> int:
    return trace.final_state.step if trace.final_state is not None else 0


def _flush(out: Path, trace: Trace, summary: dict, wall: float) -> None:
    trace.write_csv(out / "trace.csv")
    (out / "summary.json").write_text(_dump(summary))
    (out / "timing.json").write_text(_dump({"wall_clock_s": wall}))


@dataclass
class Check:
    """One verified property; ``status`` is pass, fail, not-applicable or unavailable."""

    name: str
    status: str
    observed: float | None = None
    tolerance: float | None = None
    note: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict:
        return {"status": self.status, "observed": self.observed, "tolerance": self.tolerance, "note": self.note}


def _check(name: str, observed: float, tolerance: float, note: str = "") -> Check:
    ok = bool(np.isfinite(observed)) and observed <= tolerance
    return Check(name, "pass" if ok else "fail", float(observed), float(tolerance), note)


@dataclass
class VerificationReport:
    checks: dict = field(default_factory=dict)

    def add(self, check: Check) -> None:
        self.checks[check.name] = check

    def __getitem__(self, name: str) -> Check:
        return self.checks[name]

    @property
    def ok(self) -> bool:
        return all(c.status != "fail" for c in self.checks.values())

    def to_dict(self) -> dict:
        return {name: c.to_dict() for name, c in self.checks.items()}

    def __str__(self) -> str:
        lines = []
        for c in self.checks.values():
            if c.observed is None:
                lines.append(f"{c.name:24s} {c.status:15s} {c.note}".rstrip())
            else:
                lines.append(f"{c.name:24s} {c.status:15s} observed={c.observed:.6g} tol={c.tolerance:.6g} {c.note}".rstrip())
        return "\n".join(lines)


def _validate_trace(trace: Trace, params: SnnParams) -> None:
    if len(trace) == 0:
        raise IncompatibleTrace("trace has no rows")
    steps = trace["step"]
    if np.any(np.diff(steps) <= 0) or steps[0] < 1 or steps[-1] > params.t_max:
        raise IncompatibleTrace("trace steps are not increasing within [1, t_max]")
    if not np.allclose(trace["time"], steps * params.dt, rtol=1e-9, atol=0.0):
        raise IncompatibleTrace("trace times do not match step * dt")


def verify(trace: Trace, inst: Instance, params: SnnParams, kind: ProblemKind | None = None, oracle=None) -> VerificationReport:
    """Evaluate every applicable invariant of a run against its tolerance.

    Checks whose preconditions fail are reported as ``not-applicable``;
    checks that need in-memory columns missing from a CSV trace are
    ``unavailable``.

    Raises
    ------
    IncompatibleTrace
        The trace cannot have come from ``params`` (steps, times).
    """
    _validate_trace(trace, params)
    gf = GramFactor(inst.F)
    sp = gf.spectral
    rep = VerificationReport()

    if params.tau > 0:
        rep.add(Check("conservation", "not-applicable", note="leaky run"))
    else:
        tol = CONSERVATION_TOL * (1.0 + float(np.abs(inst.F @ inst.x).max()))
        rep.add(_check("conservation", float(np.max(trace["conservation_defect"])), tol))

    coupling = trace["coupling"]
    if np.all(np.isnan(coupling)):
        rep.add(Check("coupling", "unavailable", note="not stored in CSV traces"))
    else:
        rep.add(_check("coupling", float(np.max(coupling)), COUPLING_TOL))

    ls_regime = params.tau == 0 and params.alpha == 1.0 and params.mode is Mode.SIGNED
    if not (ls_regime and params.eta >= sp.lambda_max * (1 - 1e-12)):
        rep.add(Check("potential_bound", "not-applicable", note="needs tau=0, alpha=1, signed, eta >= lambda_max"))
        rep.add(Check("theorem_residual_bound", "not-applicable", note="needs tau=0, alpha=1, signed, eta >= lambda_max"))
    else:
        bound = potential_bound(inst, params.eta, gf)
        rep.add(_check("potential_bound", float(np.max(trace["pinv_norm_v"])), bound))
        if params.dt > least_squares_dt(inst, gf) * (1 + 1e-12):
            rep.add(Check("theorem_residual_bound", "not-applicable", note="dt above the least-squares step"))
        else:
            res_xf = trace["residual_xf"]
            if np.all(np.isnan(res_xf)):
                off = float(np.linalg.norm(inst.x - gf.project_rowspace(inst.x)))
                res_xf = np.sqrt(np.maximum(trace["residual_l2"] ** 2 - off**2, 0.0))
            xf = float(np.linalg.norm(gf.project_rowspace(inst.x)))
            allowed = bound * xf / trace["time"]
            # worst ratio of measured residual to the time-dependent bound
            rep.add(_check("theorem_residual_bound", float(np.max(res_xf / allowed)), 1.0, "ratio to bound"))

    if kind is not None and kind.is_l1 and oracle is not None:
        dual = trace["dual_value"]
        if np.all(np.isnan(dual)):
            rep.add(Check("weak_duality", "unavailable", note="not stored in CSV traces"))
        else:
            opt = oracle.opt_value
            rep.add(_check("weak_duality", float(np.max(dual)) - opt, WEAK_DUALITY_TOL * (1 + opt), "max x.u/eta - OPT"))
    else:
        rep.add(Check("weak_duality", "not-applicable", note="l1 kinds with an oracle only"))

    if kind is None or oracle is None:
        rep.add(Check("oracle_gap", "not-applicable", note="no oracle"))
    elif trace.rate is None:
        rep.add(Check("oracle_gap", "unavailable", note="final rate not stored in CSV traces"))
    else:
        (name, gap), = oracle_gaps(inst, kind, trace.rate, oracle).items()
        xnorm = float(np.linalg.norm(inst.x))
        if kind.kind is Kind.NNLS:
            rep.add(_check("oracle_gap", gap, NNLS_GAP_TOL * xnorm, name))
        elif kind.kind is Kind.LASSO:
            rep.add(_check("oracle_gap", gap, LASSO_GAP_TOL * xnorm, name))
        else:
            rep.add(_check("oracle_gap", abs(gap), L1_GAP_TOL * oracle.opt_value, name))
    return rep
