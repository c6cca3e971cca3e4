"""Parameter sweeps, optimum and threshold searches, and their fits.

Every sweep returns a ``ResultTable`` whose rows carry a ``converged``
flag; per-row diagnostics (engine, phonon cutoff, integrator statistics,
trace drift, smallest eigenvalue) go into ``table.diagnostics`` and the
metadata. Two engines are available:

``exact``
    The closed-form reduced dynamics of ``dynamics.gaussian``. No phonon
    truncation, physical bath occupation, any ``m``. Requires ``w0 = 0``.
``lindblad``
    The truncated master-equation integrator, with the phonon cutoff
    raised in steps of 8 until the observable moves by less than 0.1%.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from pathlib import Path

import numpy as np
from scipy.optimize import bisect, minimize_scalar

from .dynamics import ModelParams, choose_phonon_dim, evolve_exact, evolve_lindblad, initial_state
from .dynamics.hamiltonians import twisting_state
from .exceptions import (
    FitError,
    InfeasibleTargetError,
    InvalidParameterError,
    MonotonicityError,
    NVSqueezeError,
    ProtocolConstraintError,
)
from .fitting import fit_power_law, fit_two_term_exp
from .observables import ghz_fidelity, optimal_theta_formula, squeezing_kitagawa, squeezing_record
from .opalg import operator_set
from .tables import ResultTable

ENGINES = ("exact", "lindblad")
KINDS = ("theta_sweep", "n_sweep", "m_sweep", "ghz_noise_sweep", "ghz_threshold", "optimal_phase")

DEFAULT_NOISE_LEVELS = (0.0, 0.01, 0.1, 0.5)
DEFAULT_N_GRID = tuple(range(10, 61, 5))
DEFAULT_M_GRID = (1, 3, 10, 30, 100, 300, 1000, 3000, 10000)
DEFAULT_GHZ_NOISE_GRID = tuple(sorted({0.0, 1e-4, 3e-4, 1e-3, 3e-3, *np.round(np.linspace(0.005, 0.1, 20), 6)}))
DEFAULT_Q = 1e6
POWER_LAW_PREFACTOR = 1.4

TRUNCATION_TOL = 1e-3
TRUNCATION_STEP = 8
MAX_REFINEMENTS = 4
DRIFT_LIMIT = 1e-8  # per period
EIGEN_FLOOR = -1e-7


@dataclass(frozen=True)
class SweepSpec:
    """A sweep request: ``kind``, its grid points, the base parameters and an output path."""

    kind: str
    grid: tuple
    base: ModelParams | None = None
    output: str | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown sweep kind {self.kind!r}; expected one of {KINDS}")
        if len(self.grid) == 0:
            raise InvalidParameterError("sweep grid must not be empty")


# -- single-point evaluation ------------------------------------------------

def _state_checks(rho, periods):
    drift = abs(float(np.trace(rho).real) - 1.0)
    min_eig = float(np.linalg.eigvalsh(rho)[0])
    return dict(trace_drift=drift, drift_per_period=drift / max(periods, 1.0), min_eig=min_eig)


def evaluate_spin_state(params: ModelParams, engine: str = "exact", observable=None,
                        rtol: float = 1e-8, atol: float = 1e-10):
    """Reduced spin state at ``t_m`` and a diagnostics dict.

    ``observable`` (spin density matrix -> float) drives the truncation
    refinement of the ``lindblad`` engine; it is ignored by ``exact``.
    """
    if engine not in ENGINES:
        raise InvalidParameterError(f"unknown engine {engine!r}; expected one of {ENGINES}")
    periods = float(params.m_periods)
    if engine == "exact":
        rho = evolve_exact(params)[0]
        diag = dict(engine=engine, phonon_dim=None, truncation_converged=True, **_state_checks(rho, periods))
        diag["integrator_converged"] = diag["drift_per_period"] < DRIFT_LIMIT and diag["min_eig"] >= EIGEN_FLOOR
        return rho, diag

    observable = observable or (lambda r: float(np.real(np.trace(r @ r))))
    dim = choose_phonon_dim(params)
    previous, shift, rho, result = None, math.inf, None, None
    for _ in range(MAX_REFINEMENTS + 1):
        ops = operator_set(params.N, dim)
        result = evolve_lindblad(initial_state(params, dim), params, ops, params.t_final, rtol=rtol, atol=atol)
        rho = result.final.spin_reduced()
        value = observable(rho)
        if previous is not None:
            shift = abs(value - previous) / max(abs(previous), 1e-300)
            if shift < TRUNCATION_TOL:
                break
        previous = value
        dim += TRUNCATION_STEP
    drift = result.drift_per_period
    diag = dict(
        engine=engine,
        phonon_dim=dim,
        truncation_shift=shift,
        truncation_converged=shift < TRUNCATION_TOL,
        trace_drift=result.trace_drift,
        drift_per_period=drift,
        min_eig=result.min_eig,
        steps=result.steps,
        rejected=result.rejected,
        nfev=result.nfev,
    )
    diag["integrator_converged"] = drift < DRIFT_LIMIT and result.min_eig >= EIGEN_FLOOR
    return rho, diag


def _failed(columns, exc):
    row = {c: math.nan for c in columns}
    row["converged"] = False
    return row, dict(error=f"{type(exc).__name__}: {exc}", truncation_converged=False, integrator_converged=False)


_SQUEEZE_COLUMNS = ("xi_R_sq", "xi_R_dB", "xi_s_sq", "xi_s_sq_paper", "converged")
_GHZ_COLUMNS = ("F", "optimal_phase", "converged")


def squeezing_point(params: ModelParams, engine: str = "exact"):
    """Squeezing observables at ``t_m`` as ``(row, diagnostics)``; failures give NaN rows."""
    try:
        rho, diag = evaluate_spin_state(params, engine, observable=lambda r: squeezing_record(r).xi_R_sq)
        rec = squeezing_record(rho)
    except NVSqueezeError as exc:
        return _failed(_SQUEEZE_COLUMNS, exc)
    row = dict(xi_R_sq=rec.xi_R_sq, xi_R_dB=rec.xi_R_dB, xi_s_sq=rec.xi_s_sq, xi_s_sq_paper=rec.xi_s_sq_paper,
               converged=diag["truncation_converged"] and diag["integrator_converged"])
    diag.update(rec.diagnostics, J_mean=list(rec.J_mean), n_a_mean=rec.n_a_mean)
    return row, diag


def ghz_point(params: ModelParams, engine: str = "exact"):
    """GHZ fidelity at ``t_m`` as ``(row, diagnostics)``."""
    if params.N % 2:
        raise ProtocolConstraintError(f"GHZ generation needs even N, got {params.N}")
    try:
        rho, diag = evaluate_spin_state(params, engine, observable=lambda r: ghz_fidelity(r).F)
        rec = ghz_fidelity(rho)
    except NVSqueezeError as exc:
        return _failed(_GHZ_COLUMNS, exc)
    row = dict(F=rec.F, optimal_phase=rec.optimal_phase,
               converged=diag["truncation_converged"] and diag["integrator_converged"])
    diag.update(p0=rec.p0, pN=rec.pN)
    return row, diag


def _map(func, items, workers: int = 1):
    """Evaluate ``func`` over ``items`` in order, optionally in worker processes."""
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))


def _finish(table: ResultTable, **metadata):
    table.metadata.update(metadata)
    table.metadata["convergence"] = [
        dict(truncation=bool(d.get("truncation_converged", False)), integrator=bool(d.get("integrator_converged", False)))
        for d in table.diagnostics
    ]
    table.metadata["phonon_dims"] = sorted({d["phonon_dim"] for d in table.diagnostics if d.get("phonon_dim")})
    table.metadata["max_drift_per_period"] = max((d.get("drift_per_period", 0.0) for d in table.diagnostics), default=0.0)
    table.metadata["min_eigenvalue"] = min((d.get("min_eig", 0.0) for d in table.diagnostics), default=0.0)
    # rows that did not converge are not final results
    table.metadata["final"] = bool(all(r["converged"] for r in table.records())) if "converged" in table.columns else True
    errors = [d["error"] for d in table.diagnostics if "error" in d]
    if errors:
        table.metadata["errors"] = errors
    return table


# -- sweeps -----------------------------------------------------------------

def default_theta_grid(N: int, n_points: int = 40):
    th = optimal_theta_formula(N)
    return tuple(np.geomspace(th / 10, 4 * th, n_points))


def sweep_theta(N: int = 50, noise_levels=DEFAULT_NOISE_LEVELS, theta_grid=None, Q_m: float = DEFAULT_Q,
                engine: str = "exact", workers: int = 1) -> ResultTable:
    """Squeezing at ``t_1`` versus twisting phase, for each ``n_bar / Q_m``."""
    theta_grid = default_theta_grid(N) if theta_grid is None else tuple(float(t) for t in theta_grid)
    points = [(float(x), th) for x in noise_levels for th in theta_grid]
    params = [ModelParams.for_noise(N, th, x, Q_m=Q_m) for x, th in points]
    results = _map(partial(squeezing_point, engine=engine), params, workers)
    table = ResultTable(columns=["theta_rad", "noise_nbar_over_Q", *_SQUEEZE_COLUMNS])
    for (x, th), (row, diag) in zip(points, results):
        table.append(dict(theta_rad=th, noise_nbar_over_Q=x, **row), diag)
    return _finish(table, kind="theta_sweep", N=N, Q_m=Q_m, engine=engine,
                   noise_levels=list(noise_levels), theta_grid=list(theta_grid))


def _power_law_fits(table, x_col, y_col, group_col, prefactor):
    fits = {}
    for key in sorted(set(table.column(group_col))):
        sel = [r for r in table.records() if r[group_col] == key and r["converged"]]
        pts = [(r[x_col], r[y_col]) for r in sel]
        try:
            pinned = fit_power_law(pts, prefactor=prefactor) if prefactor is not None else None
            free = fit_power_law(pts)
        except FitError as exc:
            fits[float(key)] = None
            table.metadata.setdefault("fit_errors", []).append(f"{group_col}={key}: {exc}")
            continue
        main = pinned or free
        main.extra["free_fit"] = dict(free.params, residual_norm=free.residual_norm)
        fits[float(key)] = main
    return fits


def sweep_N(N_list=DEFAULT_N_GRID, noise_levels=(0.0, 0.01, 0.1), Q_m: float = DEFAULT_Q,
            prefactor: float | None = POWER_LAW_PREFACTOR, engine: str = "exact", workers: int = 1):
    """Squeezing at ``theta_opt(N)`` versus ``N``, plus power-law fits per noise level.

    The fit holds the prefactor at ``prefactor`` (pass ``None`` to free it);
    the free two-parameter fit is always attached as ``extra['free_fit']``.
    Returns ``(table, {noise: FitResult})``.
    """
    points = [(float(x), int(N)) for x in noise_levels for N in N_list]
    params = [ModelParams.for_noise(N, optimal_theta_formula(N), x, Q_m=Q_m) for x, N in points]
    results = _map(partial(squeezing_point, engine=engine), params, workers)
    table = ResultTable(columns=["N", "theta_rad", "noise_nbar_over_Q", *_SQUEEZE_COLUMNS])
    for (x, N), (row, diag) in zip(points, results):
        table.append(dict(N=N, theta_rad=optimal_theta_formula(N), noise_nbar_over_Q=x, **row), diag)
    fits = _power_law_fits(table, "N", "xi_R_sq", "noise_nbar_over_Q", prefactor)
    return _finish(table, kind="n_sweep", Q_m=Q_m, engine=engine, prefactor=prefactor,
                   fits={str(k): v for k, v in fits.items()}), fits


def sweep_m(N: int = 10, Q_m: float = DEFAULT_Q, n_bar: float = 10.0, m_list=DEFAULT_M_GRID,
            target: str = "squeezing", theta: float | None = None, engine: str = "exact",
            workers: int = 1, time_budget: float | None = None) -> ResultTable:
    """Observable at fixed ``theta(t_m)`` as the number of periods ``m`` grows.

    ``target`` is ``"squeezing"`` (default phase ``theta_opt``) or ``"ghz"``
    (default phase ``pi/2``). With ``time_budget`` (seconds) the sweep stops
    once the budget is spent and flags the table as partial.
    """
    import time

    if target not in ("squeezing", "ghz"):
        raise InvalidParameterError(f"target must be 'squeezing' or 'ghz', got {target!r}")
    if theta is None:
        theta = optimal_theta_formula(N) if target == "squeezing" else math.pi / 2
    func = squeezing_point if target == "squeezing" else ghz_point
    cols = _SQUEEZE_COLUMNS if target == "squeezing" else _GHZ_COLUMNS
    params = [ModelParams.for_phase(N, theta, int(m), n_th=n_bar, Q_m=Q_m) for m in m_list]
    table = ResultTable(columns=["m", "g_over_wm", "theta_rad", *cols])
    partial_run = False
    if time_budget is None:
        results = _map(partial(func, engine=engine), params, workers)
    else:
        results, start = [], time.monotonic()
        for p in params:
            if time.monotonic() - start > time_budget:
                partial_run = True
                break
            results.append(func(p, engine=engine))
    for p, (row, diag) in zip(params, results):
        table.append(dict(m=p.m_periods, g_over_wm=p.g_over_wm, theta_rad=theta, **row), diag)
    return _finish(table, kind="m_sweep", N=N, Q_m=Q_m, n_bar=n_bar, target=target, theta=theta,
                   engine=engine, m_list=[int(m) for m in m_list], partial=partial_run)


def sweep_ghz_noise(N_list=(10, 20), noise_grid=DEFAULT_GHZ_NOISE_GRID, Q_m: float = DEFAULT_Q,
                    engine: str = "exact", workers: int = 1):
    """GHZ fidelity at ``t_1`` with ``theta = pi/2`` versus ``n_bar / Q_m``.

    Returns ``(table, {N: FitResult})`` with two-term exponential fits.
    """
    odd = [N for N in N_list if N % 2]
    if odd:
        raise ProtocolConstraintError(f"GHZ generation needs even N, got {odd}")
    points = [(int(N), float(x)) for N in N_list for x in noise_grid]
    params = [ModelParams.for_noise(N, math.pi / 2, x, Q_m=Q_m) for N, x in points]
    results = _map(partial(ghz_point, engine=engine), params, workers)
    table = ResultTable(columns=["N", "noise_nbar_over_Q", *_GHZ_COLUMNS])
    for (N, x), (row, diag) in zip(points, results):
        table.append(dict(N=N, noise_nbar_over_Q=x, **row), diag)
    fits = {}
    for N in N_list:
        pts = [(r["noise_nbar_over_Q"], r["F"]) for r in table.where(N=int(N)) if r["converged"]]
        try:
            fits[int(N)] = fit_two_term_exp(pts)
        except FitError as exc:
            fits[int(N)] = None
            table.metadata.setdefault("fit_errors", []).append(f"N={N}: {exc}")
    return _finish(table, kind="ghz_noise_sweep", Q_m=Q_m, engine=engine, N_list=list(N_list),
                   noise_grid=list(noise_grid), fits={str(k): v for k, v in fits.items()}), fits


def _ghz_F(N, x, Q_m, engine):
    row, diag = ghz_point(ModelParams.for_noise(N, math.pi / 2, x, Q_m=Q_m), engine)
    if not row["converged"]:
        raise InfeasibleTargetError(f"unconverged fidelity at N={N}, noise={x}: {diag.get('error', '')}")
    return row["F"]


def find_threshold(N: int, F_target: float, bracket=(1e-5, 1.0), rtol: float = 1e-3, Q_m: float = DEFAULT_Q,
                   engine: str = "exact", n_scan: int = 16):
    """Noise level ``n_bar / Q_m`` at which the GHZ fidelity drops to ``F_target``.

    ``F`` is first sampled on a log grid over the bracket and required to be
    non-increasing; bisection in ``log(noise)`` then runs between the two
    samples straddling the target. Returns ``(threshold, info)``.
    """
    lo, hi = (float(b) for b in bracket)
    if not 0 < lo < hi:
        raise InvalidParameterError(f"bad bracket {bracket}")
    xs = np.geomspace(lo, hi, n_scan)
    Fs = np.array([_ghz_F(N, x, Q_m, engine) for x in xs])
    curve = list(zip(xs.tolist(), Fs.tolist()))
    if np.any(np.diff(Fs) > 1e-9):
        raise MonotonicityError(f"fidelity not monotone in noise for N={N}", curve)
    if not Fs[0] >= F_target >= Fs[-1]:
        raise InfeasibleTargetError(
            f"F={F_target} not crossed on [{lo:g}, {hi:g}] for N={N} (F from {Fs[0]:.4g} to {Fs[-1]:.4g})")
    k = int(np.nonzero(Fs <= F_target)[0][0])
    if Fs[k] == F_target:
        return float(xs[k]), dict(iterations=0, curve=curve)
    u_lo, u_hi = math.log(xs[k - 1]), math.log(xs[k])
    root, res = bisect(lambda u: _ghz_F(N, math.exp(u), Q_m, engine) - F_target, u_lo, u_hi,
                       xtol=math.log1p(rtol), rtol=4 * np.finfo(float).eps, full_output=True)
    return math.exp(root), dict(iterations=int(res.iterations), curve=curve, converged=bool(res.converged))


def ghz_threshold(N_list=(10, 20), F_targets=(0.5, 0.9), bracket=(1e-5, 1.0), rtol: float = 1e-3,
                  Q_m: float = DEFAULT_Q, engine: str = "exact", workers: int = 1) -> ResultTable:
    """Noise thresholds for each ``(N, F_target)``.

    When five or more ``N`` values are given, the thresholds for each target
    are fitted to ``a e^{bN} + c e^{dN}`` and stored in the metadata.
    """
    odd = [N for N in N_list if N % 2]
    if odd:
        raise ProtocolConstraintError(f"GHZ generation needs even N, got {odd}")
    points = [(int(N), float(F)) for N in N_list for F in F_targets]
    results = _map(partial(_threshold_point, bracket=bracket, rtol=rtol, Q_m=Q_m, engine=engine), points, workers)
    table = ResultTable(columns=["N", "F_target", "threshold_nbar_over_Q", "iterations", "converged"])
    for (N, F), (row, diag) in zip(points, results):
        table.append(dict(N=N, F_target=F, **row), diag)
    fits = {}
    if len(N_list) >= 5:
        for F in F_targets:
            pts = [(r["N"], r["threshold_nbar_over_Q"]) for r in table.where(F_target=float(F)) if r["converged"]]
            try:
                fits[str(F)] = fit_two_term_exp(pts)
            except FitError as exc:
                fits[str(F)] = None
                table.metadata.setdefault("fit_errors", []).append(f"F={F}: {exc}")
    return _finish(table, kind="ghz_threshold", Q_m=Q_m, engine=engine, bracket=list(bracket), rtol=rtol,
                   N_list=list(N_list), F_targets=list(F_targets), fits=fits)


def _threshold_point(point, bracket, rtol, Q_m, engine):
    N, F = point
    try:
        x, info = find_threshold(N, F, bracket, rtol, Q_m, engine)
    except MonotonicityError as exc:
        row = dict(threshold_nbar_over_Q=math.nan, iterations=0, converged=False)
        return row, dict(error=str(exc), curve=exc.curve, truncation_converged=False, integrator_converged=False)
    except NVSqueezeError as exc:
        row = dict(threshold_nbar_over_Q=math.nan, iterations=0, converged=False)
        return row, dict(error=f"{type(exc).__name__}: {exc}", truncation_converged=False, integrator_converged=False)
    converged = info.get("converged", True)
    return (dict(threshold_nbar_over_Q=x, iterations=info["iterations"], converged=converged),
            dict(truncation_converged=True, integrator_converged=converged))


def _min_squeezing(N, upper, tol):
    res = minimize_scalar(lambda th: squeezing_kitagawa(twisting_state(N, th))[0], bounds=(0.0, upper),
                          method="bounded", options=dict(xatol=tol))
    return res


def optimal_phase_search(N_list=(10, 20, 40, 80), tol: float = 1e-5, workers: int = 1):
    """Locate the twisting phase minimizing ``xi_s^2`` for each ``N`` (closed system).

    The search is bounded on ``(0, 3 theta_formula]``; a minimum pinned at
    the upper edge triggers one retry on a doubled interval. Returns
    ``(table, {"theta_opt": FitResult, "min_xi_s_sq": FitResult})``; the fits
    are ``None`` with fewer than three ``N`` values.
    """
    rows = _map(partial(_phase_point, tol=tol), [int(N) for N in N_list], workers)
    table = ResultTable(columns=["N", "theta_opt_rad", "theta_formula_rad", "theta_ratio", "min_xi_s_sq",
                                 "iterations", "converged"])
    for row in rows:
        table.append(row, dict(truncation_converged=True, integrator_converged=row["converged"]))
    fits = dict(theta_opt=None, min_xi_s_sq=None)
    if len(N_list) >= 3:
        Ns = table.column("N").astype(float)
        fits["theta_opt"] = fit_power_law(np.c_[Ns, table.column("theta_opt_rad")])
        fits["min_xi_s_sq"] = fit_power_law(np.c_[Ns, table.column("min_xi_s_sq")])
    return _finish(table, kind="optimal_phase", tol=tol, N_list=list(N_list), fits=fits), fits


def _phase_point(N, tol):
    formula = optimal_theta_formula(N)
    upper = 3 * formula
    for _ in range(2):
        res = _min_squeezing(N, upper, tol)
        if res.x < upper - 10 * tol:
            break
        upper *= 2
    else:
        raise InfeasibleTargetError(f"no interior minimum of xi_s^2 below theta={upper / 2:g} for N={N}")
    return dict(N=N, theta_opt_rad=float(res.x), theta_formula_rad=formula, theta_ratio=float(res.x) / formula,
                min_xi_s_sq=float(res.fun), iterations=int(res.nfev), converged=bool(res.success))


def run_sweep(spec: SweepSpec, workers: int = 1):
    """Run a ``SweepSpec``; returns the table (fits, if any, are in its metadata).

    ``spec.grid`` holds the swept values: noise-phase pairs are taken from
    ``options`` for the kinds that sweep two axes.
    """
    opts = dict(spec.options)
    kind = spec.kind
    if kind == "theta_sweep":
        table = sweep_theta(theta_grid=spec.grid, workers=workers, **opts)
    elif kind == "n_sweep":
        table, _ = sweep_N(N_list=spec.grid, workers=workers, **opts)
    elif kind == "m_sweep":
        table = sweep_m(m_list=spec.grid, workers=workers, **opts)
    elif kind == "ghz_noise_sweep":
        table, _ = sweep_ghz_noise(noise_grid=spec.grid, workers=workers, **opts)
    elif kind == "ghz_threshold":
        table = ghz_threshold(N_list=spec.grid, workers=workers, **opts)
    else:
        table, _ = optimal_phase_search(N_list=spec.grid, workers=workers, **opts)
    if spec.output:
        from .tables import write_table

        write_table(table, Path(spec.output))
    return table


def validate(suite: str, **options) -> dict:
    """Run an oracle suite; see ``nvsqueeze.validation``."""
    from .validation import validate as _validate

    return _validate(suite, **options)
