"""Solver comparison and measurement harness.

Any two of the three solvers can be compared on a shared evaluation grid:
density differences use the symmetric percent form 200|a-b|/(a+b), while
signed fields (velocity, potential) are normalized by the reference
field's peak amplitude so near-zero crossings do not blow up the metric.
Growth rates and phase speeds are measured from trajectories the same
way one would measure them from observations, by fitting the log peak
amplitude and by cross-correlating density profiles.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .domain import CaseConfig, UnitSystem, default_units, preset_case
from .fd_solver import Trajectory, initial_state_for, lax_step, courant_dt, run_case, sample_state
from .linear_theory import evaluate_mode
from .pinn import LossEvaluator, TrainedModel, case_mode, network_spec_for, predict, train
from .domain import SEED_NETWORK, sample_collocation, seeded_rng
from .network import init_params

AMPLITUDE_FLOOR = 1e-12


def density_mismatch(a, b) -> np.ndarray:
    """Symmetric percent difference, safe for strictly positive fields."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return 200.0 * np.abs(a - b) / (a + b)


def signed_mismatch(a, b) -> np.ndarray:
    """Percent difference normalized by the reference's peak amplitude."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    scale = max(float(np.max(np.abs(b))), AMPLITUDE_FLOOR)
    return 100.0 * np.abs(a - b) / scale


def volume_average(values) -> float:
    return float(np.mean(np.asarray(values, dtype=float)))


def volume_stats(values) -> tuple[float, float]:
    """Mean and population standard deviation over the evaluation grid."""
    arr = np.asarray(values, dtype=float)
    return float(np.mean(arr)), float(np.std(arr))


def evaluation_points(config: CaseConfig, units: UnitSystem | None = None,
                      per_axis: int | None = None) -> np.ndarray:
    """Uniform spatial nodes matching the FD grid layout, flattened to (n, d)."""
    u = units or default_units()
    domain = config.domain(u)
    n = per_axis or config.grid_points
    axes = [np.arange(n) * (length / n) for length in domain.extent]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class FieldSample:
    """One solver's fields at one time on the shared evaluation points."""

    solver: str
    time: float
    rho: np.ndarray
    v: np.ndarray
    phi: np.ndarray


def solver_fields(solver: str, config: CaseConfig, times, points: np.ndarray,
                  units: UnitSystem | None = None,
                  artifact=None) -> list[FieldSample]:
    """Sample one solver at the given times and spatial points.

    `artifact` short-circuits the expensive part: a TrainedModel for the
    network solver or a Trajectory for the finite-difference one.  Without
    it the solver is run here with the config's own settings.
    """
    u = units or default_units()
    times = [float(t) for t in np.atleast_1d(times)]
    out: list[FieldSample] = []
    if solver == "lt":
        mode = case_mode(config, u)
        for t in times:
            f = evaluate_mode(mode, points, t)
            out.append(FieldSample("lt", t, f.rho, f.v, f.phi))
    elif solver == "fd":
        traj = artifact if artifact is not None else run_case(config, times, u)
        for t in times:
            state = traj.at_time(t)
            f = sample_state(state, points)
            out.append(FieldSample("fd", t, f["rho"], f["v"], f["phi"]))
    elif solver == "grinn":
        model = artifact if artifact is not None else train(config, u)
        for t in times:
            q = np.column_stack([points, np.full(points.shape[0], t)])
            p = predict(model, q)
            out.append(FieldSample("grinn", t, p.rho, p.v, p.phi))
    else:
        raise ValueError(f"unknown solver {solver!r}")
    return out


@dataclass(frozen=True)
class MismatchRecord:
    """Mismatch statistics for one field at one comparison time.

    kind says which definition produced the numbers: "density" for the
    symmetric percent difference, "signed" for the amplitude-normalized one.
    """

    time: float
    fieldname: str
    kind: str
    mean: float
    max: float


@dataclass(frozen=True)
class MismatchReport:
    """Pairwise solver comparison for one case over several times."""

    case: str
    solver_a: str
    solver_b: str
    records: tuple[MismatchRecord, ...]

    def for_field(self, fieldname: str) -> tuple[MismatchRecord, ...]:
        return tuple(r for r in self.records if r.fieldname == fieldname)

    def worst_mean(self, fieldname: str) -> float:
        recs = self.for_field(fieldname)
        return max(r.mean for r in recs) if recs else math.nan

    def worst_max(self, fieldname: str) -> float:
        recs = self.for_field(fieldname)
        return max(r.max for r in recs) if recs else math.nan


_AXIS_NAMES = ("v_x", "v_y", "v_z")


def compare_fields(a: FieldSample, b: FieldSample) -> list[MismatchRecord]:
    """b is the reference for the signed-field normalization."""
    if a.time != b.time:
        raise ValueError("samples compare at the same time")
    eps = density_mismatch(a.rho, b.rho)
    recs = [MismatchRecord(a.time, "rho", "density",
                           volume_average(eps), float(np.max(eps)))]
    for i in range(a.v.shape[1]):
        eps = signed_mismatch(a.v[:, i], b.v[:, i])
        recs.append(MismatchRecord(a.time, _AXIS_NAMES[i], "signed",
                                   volume_average(eps), float(np.max(eps))))
    eps = signed_mismatch(a.phi, b.phi)
    recs.append(MismatchRecord(a.time, "phi", "signed",
                               volume_average(eps), float(np.max(eps))))
    return recs


def compare_case(config: CaseConfig, solver_a: str, solver_b: str, times,
                 units: UnitSystem | None = None, per_axis: int | None = None,
                 artifacts: dict | None = None) -> MismatchReport:
    """Run (or reuse) two solvers on one case and tabulate their mismatch."""
    u = units or default_units()
    artifacts = artifacts or {}
    points = evaluation_points(config, u, per_axis)
    fa = solver_fields(solver_a, config, times, points, u, artifacts.get(solver_a))
    fb = solver_fields(solver_b, config, times, points, u, artifacts.get(solver_b))
    records: list[MismatchRecord] = []
    for sa, sb in zip(fa, fb):
        records.extend(compare_fields(sa, sb))
    return MismatchReport(case=config.case, solver_a=solver_a, solver_b=solver_b,
                          records=tuple(records))


# ---------------------------------------------------------------------------
# Trajectory measurements
# ---------------------------------------------------------------------------


class FitError(RuntimeError):
    """Raised when a trajectory does not support the requested fit."""


@dataclass(frozen=True)
class GrowthFit:
    """Least-squares fit of ln(peak overdensity) against time."""

    rate: float
    log_amplitude: float
    n_points: int
    times: tuple[float, ...]


def peak_overdensity(traj: Trajectory, units: UnitSystem | None = None):
    u = units or default_units()
    times = np.array([s.t for s in traj.states])
    peaks = np.array([float(np.max(s.rho)) - u.rho0 for s in traj.states])
    return times, peaks


def measure_growth_rate(traj: Trajectory, units: UnitSystem | None = None,
                        linear_fraction: float = 0.3) -> GrowthFit:
    """Fit the exponential growth of the density peak above background.

    Snapshots are used only while the overdensity is positive and below
    `linear_fraction` of the background, the window where linear theory
    should hold; fewer than two usable snapshots is an error.
    """
    u = units or default_units()
    times, peaks = peak_overdensity(traj, u)
    keep = (peaks > 0.0) & (peaks < linear_fraction * u.rho0)
    if int(keep.sum()) < 2:
        raise FitError("need at least two snapshots in the linear window")
    kept = peaks[keep]
    if not np.all(np.diff(kept) > 0.0):
        raise FitError("peak overdensity does not grow monotonically; "
                       "not an unstable trajectory")
    t, y = times[keep], np.log(kept)
    slope, intercept = np.polyfit(t, y, 1)
    return GrowthFit(rate=float(slope), log_amplitude=float(intercept),
                     n_points=int(keep.sum()), times=tuple(t))


@dataclass(frozen=True)
class PhaseSpeedFit:
    """Cross-correlation estimate of a 1D profile's propagation speed."""

    speed: float
    shifts: tuple[float, ...]
    times: tuple[float, ...]


def _correlation_shift(ref: np.ndarray, cur: np.ndarray) -> float:
    """Circular lag (in samples) that best maps ref onto cur, sub-sample
    refined with a parabola through the correlation peak."""
    fa = np.fft.rfft(ref - ref.mean())
    fb = np.fft.rfft(cur - cur.mean())
    corr = np.fft.irfft(fb * np.conj(fa), n=ref.size)
    peak = int(np.argmax(corr))
    prev_c = corr[(peak - 1) % ref.size]
    next_c = corr[(peak + 1) % ref.size]
    denom = prev_c - 2.0 * corr[peak] + next_c
    frac = 0.0 if denom == 0.0 else 0.5 * (prev_c - next_c) / denom
    lag = peak + frac
    if lag > ref.size / 2:
        lag -= ref.size
    return float(lag)


def measure_phase_speed(traj: Trajectory,
                        units: UnitSystem | None = None) -> PhaseSpeedFit:
    """Propagation speed of a 1D density pattern from profile shifts.

    Each snapshot's density is cross-correlated against the first one; the
    per-interval lags are chained so the total shift may exceed half the
    box, then a least-squares line through shift(t) gives the speed.
    Positive speed means motion toward +x.
    """
    states = traj.states
    if len(states) < 2:
        raise FitError("need at least two snapshots")
    if states[0].rho.ndim != 1:
        raise FitError("phase speed measurement expects a 1D trajectory")
    n = states[0].rho.size
    dx = states[0].spacing[0]
    times = [s.t for s in states]
    shifts = [0.0]
    for prev, cur in zip(states[:-1], states[1:]):
        step = _correlation_shift(prev.rho, cur.rho)
        shifts.append(shifts[-1] + step)
    shift_len = np.array(shifts) * dx
    slope, _ = np.polyfit(np.asarray(times), shift_len, 1)
    return PhaseSpeedFit(speed=float(slope), shifts=tuple(float(s) for s in shift_len),
                         times=tuple(float(t) for t in times))


# ---------------------------------------------------------------------------
# Scaling experiments: relative costs, never absolute hardware claims
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScalingRecord:
    """One timed measurement with enough context to be compared."""

    solver: str
    label: str
    quantity: str
    value: float
    repeats: int


@dataclass(frozen=True)
class ScalingReport:
    kind: str
    records: tuple[ScalingRecord, ...]

    def value(self, solver: str, label: str) -> float:
        for r in self.records:
            if r.solver == solver and r.label == label:
                return r.value
        raise KeyError(f"no record for {solver}/{label}")


def _best_of(fn, repeats: int) -> float:
    best = math.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def grinn_iteration_seconds(config: CaseConfig, units: UnitSystem | None = None,
                            evals: int = 3, repeats: int = 3) -> float:
    """Wall seconds for one full-batch loss-and-gradient evaluation, the
    unit of work both training phases repeat."""
    u = units or default_units()
    domain = config.domain(u)
    col = sample_collocation(domain, config.n_interior, config.n_boundary,
                             config.n_initial, config.seed)
    spec = network_spec_for(config, u)
    ev = LossEvaluator(config, spec, col, case_mode(config, u), u)
    params = init_params(spec, seeded_rng(config.seed, SEED_NETWORK))
    ev.value_and_grad(params)     # warm the caches before timing
    return _best_of(lambda: [ev.value_and_grad(params) for _ in range(evals)],
                    repeats) / evals


def fd_step_seconds(config: CaseConfig, units: UnitSystem | None = None,
                    steps: int = 5, repeats: int = 3) -> float:
    u = units or default_units()
    state = initial_state_for(config, u)
    dt = courant_dt(state, config.courant, u)

    def advance():
        s = state
        for _ in range(steps):
            s = lax_step(s, dt, u, config.gravity)

    advance()
    return _best_of(advance, repeats) / steps


def fd_wall_seconds(config: CaseConfig, units: UnitSystem | None = None,
                    repeats: int = 1) -> float:
    u = units or default_units()
    return _best_of(lambda: run_case(config, [config.t_end], u), repeats)


def dimension_scaling(units: UnitSystem | None = None, repeats: int = 3,
                      n_interior: int = 2000, n_boundary: int = 200,
                      n_initial: int = 200, grid_points: int = 64,
                      t_end: float = 0.5) -> ScalingReport:
    """Cost of one network iteration and one FD run, 1D against 3D.

    The network sees the same collocation budget in both dimensions; the
    grid solver sees the same per-axis resolution, Courant number, and end
    time, so the comparison isolates how each method's cost responds to
    dimensionality.
    """
    u = units or default_units()
    shared = dict(n_interior=n_interior, n_boundary=n_boundary,
                  n_initial=n_initial, adam_epochs=0, lbfgs_max_iters=0)
    g1 = preset_case("case1", **shared)
    g3 = preset_case("case1_oblique", **shared)
    f1 = preset_case("case1", grid_points=grid_points, t_end=t_end)
    f3 = preset_case("case1_oblique", grid_points=grid_points, t_end=t_end)
    records = (
        ScalingRecord("grinn", "d=1", "seconds_per_iteration",
                      grinn_iteration_seconds(g1, u, repeats=repeats), repeats),
        ScalingRecord("grinn", "d=3", "seconds_per_iteration",
                      grinn_iteration_seconds(g3, u, repeats=repeats), repeats),
        ScalingRecord("fd", "d=1", "wall_seconds",
                      fd_wall_seconds(f1, u, repeats=repeats), repeats),
        ScalingRecord("fd", "d=3", "wall_seconds",
                      fd_wall_seconds(f3, u, repeats=1), 1),
    )
    return ScalingReport(kind="dimension", records=records)


def time_scaling(units: UnitSystem | None = None, grid_points: int = 128,
                 t_ends=(1.0, 2.0, 4.0), repeats: int = 2) -> ScalingReport:
    """FD wall time against integration length at fixed resolution."""
    u = units or default_units()
    records = []
    for t_end in t_ends:
        cfg = preset_case("case1", grid_points=grid_points, t_end=float(t_end))
        records.append(ScalingRecord("fd", f"t={t_end:g}", "wall_seconds",
                                     fd_wall_seconds(cfg, u, repeats=repeats),
                                     repeats))
    return ScalingReport(kind="time", records=records)


def scaling_experiment(kind: str, units: UnitSystem | None = None,
                       **kw) -> ScalingReport:
    if kind == "dimension":
        return dimension_scaling(units, **kw)
    if kind == "time":
        return time_scaling(units, **kw)
    raise ValueError(f"unknown scaling experiment {kind!r}")
