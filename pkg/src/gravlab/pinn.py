"""Physics-informed network solver for the self-gravitating system.

One dense sine network maps (x_1..x_d, t) to (rho, v_1..v_d, phi).  Its
training loss is the unweighted sum of three mean-square terms: the PDE
residuals at interior collocation points, soft periodic boundary
conditions enforced on paired opposite-face points (values of every
field plus the normal potential gradient), and the linear-theory fields
on the initial slice.  Training runs full-batch Adam first, then L-BFGS
with a strong Wolfe line search; everything is deterministic per seed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .domain import (
    CaseConfig,
    CollocationSet,
    DomainSpec,
    SEED_NETWORK,
    UnitSystem,
    default_units,
    sample_collocation,
    seeded_rng,
)
from .linear_theory import WaveMode, evaluate_mode, make_mode
from .network import (
    Jet,
    JetAdjoint,
    LossTerm,
    NetworkSpec,
    forward,
    init_params,
    input_jet,
    loss_gradient,
)
from .optimizers import AdamState, adam_step, lbfgs_minimize


class TrainingError(RuntimeError):
    """Raised when training cannot proceed at all (bad inputs)."""


# Output column layout: density, velocity components, potential.
def output_columns(dimension: int) -> dict[str, object]:
    return {"rho": 0, "v": tuple(range(1, 1 + dimension)), "phi": dimension + 1}


@dataclass(frozen=True)
class ResidualBundle:
    """Pointwise PDE residuals: continuity, momentum per axis, Poisson."""

    continuity: np.ndarray          # (B,)
    momentum: np.ndarray            # (B, d)
    poisson: np.ndarray | None      # (B,) with gravity, else None


def residuals_from_jet(jet: Jet, dimension: int, units: UnitSystem,
                       gravity: bool, poisson_source: str = "contrast") -> ResidualBundle:
    """Assemble the governing-equation residuals from any field jet.

    Works for the trained network and for analytic test rigs alike; the jet
    must carry first derivatives along every axis and, with gravity on,
    second spatial derivatives of the potential column.
    """
    d = dimension
    t_ax = d
    rho = jet.value[:, 0]
    v = jet.value[:, 1:1 + d]

    cont = jet.d(t_ax)[:, 0].copy()
    for i in range(d):
        cont += jet.d(i)[:, 0] * v[:, i] + rho * jet.d(i)[:, 1 + i]

    mom = np.empty((rho.shape[0], d))
    for i in range(d):
        accel = jet.d(t_ax)[:, 1 + i].copy()
        for j in range(d):
            accel += v[:, j] * jet.d(j)[:, 1 + i]
        mom[:, i] = rho * accel + units.c_s**2 * jet.d(i)[:, 0]
        if gravity:
            mom[:, i] += rho * jet.d(i)[:, 1 + d]

    if gravity:
        if poisson_source not in ("contrast", "literal"):
            raise ValueError("poisson_source must be 'contrast' or 'literal'")
        background = units.rho0 if poisson_source == "contrast" else 0.0
        pois = -units.four_pi_g * (rho - background)
        for i in range(d):
            pois = pois + jet.d2(i)[:, 1 + d]
    else:
        pois = None
    return ResidualBundle(continuity=cont, momentum=mom, poisson=pois)


def mse_from_residuals(bundle: ResidualBundle) -> float:
    """Mean squared residual per equation, summed over equations."""
    total = float(np.mean(bundle.continuity**2))
    for i in range(bundle.momentum.shape[1]):
        total += float(np.mean(bundle.momentum[:, i]**2))
    if bundle.poisson is not None:
        total += float(np.mean(bundle.poisson**2))
    return total


def _pde_fn(dimension: int, units: UnitSystem, gravity: bool,
            poisson_source: str):
    d = dimension
    t_ax = d

    def fn(jet: Jet):
        bundle = residuals_from_jet(jet, d, units, gravity, poisson_source)
        b = jet.value.shape[0]
        rho = jet.value[:, 0]
        v = jet.value[:, 1:1 + d]
        sc = 2.0 * bundle.continuity / b
        sm = 2.0 * bundle.momentum / b

        bar_val = np.zeros_like(jet.value)
        bar_first = np.zeros_like(jet.first)
        bar_second = np.zeros_like(jet.second) if jet.second.size else None

        # continuity: R = rho_t + sum_i (rho_xi v_i + rho v_i,xi)
        bar_first[:, t_ax, 0] += sc
        for i in range(d):
            bar_val[:, 0] += sc * jet.d(i)[:, 1 + i]
            bar_val[:, 1 + i] += sc * jet.d(i)[:, 0]
            bar_first[:, i, 0] += sc * v[:, i]
            bar_first[:, i, 1 + i] += sc * rho

        # momentum i: R = rho (v_i,t + sum_j v_j v_i,xj) + c^2 rho_xi [+ rho phi_xi]
        for i in range(d):
            accel = jet.d(t_ax)[:, 1 + i].copy()
            for j in range(d):
                accel += v[:, j] * jet.d(j)[:, 1 + i]
            if gravity:
                accel += jet.d(i)[:, 1 + d]
            bar_val[:, 0] += sm[:, i] * accel
            bar_first[:, t_ax, 1 + i] += sm[:, i] * rho
            for j in range(d):
                bar_val[:, 1 + j] += sm[:, i] * rho * jet.d(j)[:, 1 + i]
                bar_first[:, j, 1 + i] += sm[:, i] * rho * v[:, j]
            bar_first[:, i, 0] += sm[:, i] * units.c_s**2
            if gravity:
                bar_first[:, i, 1 + d] += sm[:, i] * rho

        # Poisson: R = sum_i phi_xixi - 4 pi G (rho - rho0)
        if gravity:
            sp = 2.0 * bundle.poisson / b
            bar_val[:, 0] -= sp * units.four_pi_g
            for i in range(d):
                bar_second[:, i, 1 + d] += sp

        value = mse_from_residuals(bundle)
        return value, JetAdjoint(value=bar_val, first=bar_first,
                                 second=bar_second)

    return fn


def _boundary_fn(columns: tuple[int, ...], axis: int | None, phi_col: int | None,
                 n_pairs_total: int):
    """Match paired opposite-face points: field values, plus the potential's
    normal derivative when phi_col is given.  Points arrive lo-stacked-on-hi."""

    def fn(jet: Jet):
        n = jet.value.shape[0] // 2
        value = 0.0
        bar_val = np.zeros_like(jet.value)
        for col in columns:
            diff = jet.value[:n, col] - jet.value[n:, col]
            value += float(np.sum(diff**2) / n_pairs_total)
            seed = 2.0 * diff / n_pairs_total
            bar_val[:n, col] += seed
            bar_val[n:, col] -= seed
        bar_first = None
        if phi_col is not None:
            dphi = jet.d(axis)[:, phi_col]
            diff = dphi[:n] - dphi[n:]
            value += float(np.sum(diff**2) / n_pairs_total)
            seed = 2.0 * diff / n_pairs_total
            bar_first = np.zeros_like(jet.first)
            bar_first[:n, 0, phi_col] += seed
            bar_first[n:, 0, phi_col] -= seed
        return value, JetAdjoint(value=bar_val, first=bar_first)

    return fn


def _initial_fn(targets: np.ndarray, columns: tuple[int, ...]):
    def fn(jet: Jet):
        value = 0.0
        bar_val = np.zeros_like(jet.value)
        n = jet.value.shape[0]
        for pos, col in enumerate(columns):
            diff = jet.value[:, col] - targets[:, pos]
            value += float(np.mean(diff**2))
            bar_val[:, col] += 2.0 * diff / n
        return value, JetAdjoint(value=bar_val)

    return fn


@dataclass(frozen=True)
class LossReport:
    """One loss evaluation: the three mean-square terms and their plain sum."""

    pde: float
    boundary: float
    initial: float
    phase: str = ""
    epoch: int = 0

    @property
    def total(self) -> float:
        return self.pde + self.boundary + self.initial


class LossEvaluator:
    """Bundles the three loss terms for one case on one collocation set."""

    def __init__(self, config: CaseConfig, net_spec: NetworkSpec,
                 collocation: CollocationSet, mode: WaveMode,
                 units: UnitSystem, poisson_source: str = "contrast"):
        d = config.dimension
        self.net_spec = net_spec
        cols = output_columns(d)
        spatial = tuple(range(d))
        all_axes = tuple(range(d + 1))
        value_cols = (cols["rho"], *cols["v"]) + ((cols["phi"],) if config.gravity else ())

        terms = [LossTerm(points=collocation.interior,
                          fn=_pde_fn(d, units, config.gravity, poisson_source),
                          first_axes=all_axes,
                          second_axes=spatial if config.gravity else ())]
        self._n_pde_terms = 1

        n_pairs_total = sum(g.count for g in collocation.boundary)
        for group in collocation.boundary:
            stacked = np.vstack([group.lo, group.hi])
            phi_col = cols["phi"] if config.gravity else None
            terms.append(LossTerm(
                points=stacked,
                fn=_boundary_fn(value_cols, group.axis, phi_col, n_pairs_total),
                first_axes=(group.axis,) if config.gravity else ()))
        self._n_boundary_terms = len(collocation.boundary)

        t0 = float(collocation.initial[0, d]) if len(collocation.initial) else 0.0
        lt0 = evaluate_mode(mode, collocation.initial[:, :d], t0)
        target_list = [lt0.rho] + [lt0.v[:, i] for i in range(d)]
        if config.gravity:
            target_list.append(lt0.phi)
        targets = np.column_stack(target_list)
        terms.append(LossTerm(points=collocation.initial,
                              fn=_initial_fn(targets, value_cols)))
        self.terms = terms

    def _split(self, values: list[float], phase: str, epoch: int) -> LossReport:
        nb = self._n_boundary_terms
        return LossReport(pde=values[0],
                          boundary=float(sum(values[1:1 + nb])),
                          initial=values[1 + nb],
                          phase=phase, epoch=epoch)

    def value_and_grad(self, params: np.ndarray, phase: str = "",
                       epoch: int = 0) -> tuple[LossReport, np.ndarray]:
        values, grad = loss_gradient(self.net_spec, params, self.terms)
        return self._split(values, phase, epoch), grad

    def report(self, params: np.ndarray, phase: str = "",
               epoch: int = 0) -> LossReport:
        values = []
        for term in self.terms:
            jet = input_jet(self.net_spec, params, term.points,
                            first_axes=term.first_axes,
                            second_axes=term.second_axes)
            value, _ = term.fn(jet)
            values.append(value)
        return self._split(values, phase, epoch)


@dataclass(frozen=True)
class TrainedModel:
    """Trained network plus everything needed to evaluate and reproduce it."""

    config: CaseConfig
    units: UnitSystem
    net_spec: NetworkSpec
    params: np.ndarray
    mode: WaveMode
    domain: DomainSpec
    history: tuple[LossReport, ...]
    seed: int
    warning: str | None = None

    @property
    def final_loss(self) -> float:
        return self.history[-1].total if self.history else math.nan


def network_spec_for(config: CaseConfig, units: UnitSystem) -> NetworkSpec:
    domain = config.domain(units)
    lo = [0.0] * config.dimension + [domain.t_start]
    hi = list(domain.extent) + [domain.t_end]
    return NetworkSpec.for_box(lo, hi, hidden=config.hidden,
                               n_outputs=config.dimension + 2,
                               omega0=config.omega0)


def case_mode(config: CaseConfig, units: UnitSystem | None = None) -> WaveMode:
    u = units or default_units()
    return make_mode(config.amplitude, config.wavevector(u), u,
                     gravity=config.gravity)


def train(config: CaseConfig, units: UnitSystem | None = None,
          collocation: CollocationSet | None = None,
          poisson_source: str = "contrast", callback=None) -> TrainedModel:
    """Fit the network for one case: Adam warmup, then L-BFGS to tolerance.

    A non-finite loss aborts the current phase and falls back to the last
    finite iterate, recorded in TrainedModel.warning; budgets and seeds all
    come from the config.
    """
    u = units or default_units()
    domain = config.domain(u)
    if collocation is None:
        collocation = sample_collocation(domain, config.n_interior,
                                         config.n_boundary, config.n_initial,
                                         config.seed)
    mode = case_mode(config, u)
    net_spec = network_spec_for(config, u)
    evaluator = LossEvaluator(config, net_spec, collocation, mode, u,
                              poisson_source)
    params = init_params(net_spec, seeded_rng(config.seed, SEED_NETWORK))

    history: list[LossReport] = []
    warning: str | None = None

    state = AdamState.zero(params.size)
    good = params
    for epoch in range(config.adam_epochs):
        report, grad = evaluator.value_and_grad(params, "adam", epoch)
        if not math.isfinite(report.total):
            warning = f"non-finite loss at adam epoch {epoch}; kept last good iterate"
            params = good
            break
        history.append(report)
        good = params
        if callback is not None:
            callback(report)
        params, state = adam_step(params, grad, state, config.learning_rate)

    if warning is None and config.lbfgs_max_iters > 0:
        epoch_base = len(history)
        last_report = {}

        def objective(p):
            rep, grad = evaluator.value_and_grad(p, "lbfgs", 0)
            last_report["rep"] = rep
            return rep.total, grad

        def record(iteration, p, f, g):
            rep = last_report.get("rep")
            if rep is not None and rep.total == f:
                rep = replace(rep, phase="lbfgs", epoch=epoch_base + iteration - 1)
            else:
                rep = LossReport(pde=math.nan, boundary=math.nan,
                                 initial=math.nan, phase="lbfgs",
                                 epoch=epoch_base + iteration - 1)
            history.append(rep)
            if callback is not None:
                callback(rep)

        result = lbfgs_minimize(objective, params, memory=10,
                                max_iters=config.lbfgs_max_iters,
                                gtol=config.lbfgs_gtol, ftol=config.lbfgs_ftol,
                                callback=record)
        params = result.params
        if result.warning:
            warning = result.warning

    final = evaluator.report(params, "final", len(history))
    history.append(final)
    return TrainedModel(config=config, units=u, net_spec=net_spec,
                        params=params, mode=mode, domain=domain,
                        history=tuple(history), seed=config.seed,
                        warning=warning)


@dataclass(frozen=True)
class Prediction:
    """Network fields at query points, with per-point extrapolation flags."""

    rho: np.ndarray
    v: np.ndarray
    phi: np.ndarray
    g: np.ndarray
    extrapolated: np.ndarray


def predict(model: TrainedModel, points) -> Prediction:
    """Evaluate the trained fields at (x_1..x_d, t) query points.

    Queries must lie spatially inside the periodic box; times beyond the
    training window are allowed and flagged as extrapolation.  With
    gravity off the potential head is unconstrained by training and the
    gravitational field is identically zero.
    """
    x = np.atleast_2d(np.asarray(points, dtype=float))
    d = model.config.dimension
    if x.shape[1] != d + 1:
        raise ValueError(f"query points need {d + 1} columns")
    for i, length in enumerate(model.domain.extent):
        if np.any(x[:, i] < -1e-9) or np.any(x[:, i] > length + 1e-9):
            raise ValueError(f"query outside the domain on axis {i}")

    cols = output_columns(d)
    if model.config.gravity:
        jet = input_jet(model.net_spec, model.params, x,
                        first_axes=tuple(range(d)))
        value = jet.value
        g = np.stack([-jet.d(i)[:, cols["phi"]] for i in range(d)], axis=-1)
    else:
        value = forward(model.net_spec, model.params, x)
        g = np.zeros((x.shape[0], d))

    t = x[:, d]
    extrapolated = (t > model.domain.t_end + 1e-9) | (t < model.domain.t_start - 1e-9)
    return Prediction(rho=value[:, cols["rho"]],
                      v=value[:, list(cols["v"])],
                      phi=value[:, cols["phi"]],
                      g=g,
                      extrapolated=extrapolated)
