"""Full-batch optimizers for the network: Adam and two-loop L-BFGS.

Both are deterministic given the objective: Adam state is explicit and
functional, and the L-BFGS line search enforces the strong Wolfe
conditions with cubic interpolation, falling back to the best evaluated
point if no acceptable step exists.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class AdamState:
    """First and second moment accumulators plus the bias-correction step."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0

    @classmethod
    def zero(cls, n: int) -> "AdamState":
        return cls(m=np.zeros(n), v=np.zeros(n), step=0)


def adam_step(params: np.ndarray, grad: np.ndarray, state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> tuple[np.ndarray, AdamState]:
    """One bias-corrected Adam update; returns new parameters and state."""
    if params.shape != grad.shape or params.shape != state.m.shape:
        raise ValueError("params, grad, and state shapes must agree")
    step = state.step + 1
    m = beta1 * state.m + (1.0 - beta1) * grad
    v = beta2 * state.v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    new_params = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return new_params, AdamState(m=m, v=v, step=step)


@dataclass
class LbfgsResult:
    params: np.ndarray
    value: float
    grad_norm: float
    iterations: int
    evaluations: int
    converged: bool
    warning: str | None = None


def _cubic_min(a, fa, dfa, b, fb, dfb):
    """Minimizer of the cubic Hermite interpolant on [a, b]; None if ill-posed."""
    d1 = dfa + dfb - 3.0 * (fa - fb) / (a - b)
    rad = d1 * d1 - dfa * dfb
    if rad < 0.0:
        return None
    d2 = np.sqrt(rad) * np.sign(b - a)
    denom = dfb - dfa + 2.0 * d2
    if denom == 0.0:
        return None
    x = b - (b - a) * (dfb + d2 - d1) / denom
    return float(x)


def lbfgs_minimize(objective, x0: np.ndarray, memory: int = 10,
                   max_iters: int = 1000, gtol: float = 1e-10,
                   ftol: float = 0.0, c1: float = 1e-4, c2: float = 0.9,
                   max_line_evals: int = 25, callback=None) -> LbfgsResult:
    """Minimize objective(x) -> (value, gradient) from x0.

    Search directions come from the two-loop recursion over the last
    `memory` curvature pairs; steps must satisfy the strong Wolfe
    conditions (c1 sufficient decrease, c2 curvature).  Stops on the
    gradient infinity norm (gtol), on relative loss stagnation (ftol),
    on the iteration cap, or on line-search failure, in which case the
    best parameters seen so far come back with a warning set.
    """
    x = np.array(x0, dtype=float)
    evals = 0
    best = {"f": np.inf, "x": x.copy()}

    def evaluate(xv):
        nonlocal evals
        evals += 1
        f, g = objective(xv)
        f = float(f)
        if np.isfinite(f) and f < best["f"]:
            best["f"] = f
            best["x"] = xv.copy()
        return f, g

    f, g = evaluate(x)
    s_hist: list[np.ndarray] = []
    y_hist: list[np.ndarray] = []
    warning = None
    converged = False
    iterations = 0

    def two_loop(grad_vec):
        q = grad_vec.copy()
        alphas = []
        for s, y in zip(reversed(s_hist), reversed(y_hist)):
            rho = 1.0 / (y @ s)
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * y
        if s_hist:
            s, y = s_hist[-1], y_hist[-1]
            q *= (s @ y) / (y @ y)
        for (s, y), a in zip(zip(s_hist, y_hist), reversed(alphas)):
            rho = 1.0 / (y @ s)
            beta = rho * (y @ q)
            q += (a - beta) * s
        return -q

    def wolfe_search(xk, fk, gk, direction, alpha0):
        """Strong Wolfe bracket-and-zoom; returns (alpha, f, g, x) or None."""
        dphi0 = float(gk @ direction)
        if dphi0 >= 0.0:
            return None

        def phi(alpha):
            xt = xk + alpha * direction
            ft, gt = evaluate(xt)
            return ft, float(gt @ direction), xt, gt

        def zoom(lo, f_lo, d_lo, hi, f_hi, d_hi, budget):
            for _ in range(budget):
                trial = _cubic_min(lo, f_lo, d_lo, hi, f_hi, d_hi)
                span = abs(hi - lo)
                if (trial is None or not np.isfinite(trial)
                        or trial <= min(lo, hi) + 0.1 * span
                        or trial >= max(lo, hi) - 0.1 * span):
                    trial = 0.5 * (lo + hi)
                ft, dt, xt, gt = phi(trial)
                if ft > fk + c1 * trial * dphi0 or ft >= f_lo:
                    hi, f_hi, d_hi = trial, ft, dt
                else:
                    if abs(dt) <= -c2 * dphi0:
                        return trial, ft, gt, xt
                    if dt * (hi - lo) >= 0.0:
                        hi, f_hi, d_hi = lo, f_lo, d_lo
                    lo, f_lo, d_lo = trial, ft, dt
                if span < 1e-16:
                    break
            return None

        alpha_prev, f_prev, d_prev = 0.0, fk, dphi0
        alpha = alpha0
        for i in range(max_line_evals):
            ft, dt, xt, gt = phi(alpha)
            if not np.isfinite(ft):
                alpha = 0.5 * (alpha_prev + alpha)
                continue
            if ft > fk + c1 * alpha * dphi0 or (i > 0 and ft >= f_prev):
                return zoom(alpha_prev, f_prev, d_prev, alpha, ft, dt,
                            max_line_evals)
            if abs(dt) <= -c2 * dphi0:
                return alpha, ft, gt, xt
            if dt >= 0.0:
                return zoom(alpha, ft, dt, alpha_prev, f_prev, d_prev,
                            max_line_evals)
            alpha_prev, f_prev, d_prev = alpha, ft, dt
            alpha = 2.0 * alpha
        return None

    while iterations < max_iters:
        grad_norm = float(np.max(np.abs(g))) if g.size else 0.0
        if grad_norm <= gtol:
            converged = True
            break
        direction = two_loop(g)
        if float(g @ direction) >= 0.0:
            s_hist.clear()
            y_hist.clear()
            direction = -g
        if iterations == 0 and not s_hist:
            alpha0 = min(1.0, 1.0 / max(1.0, float(np.sum(np.abs(g)))))
        else:
            alpha0 = 1.0
        hit = wolfe_search(x, f, g, direction, alpha0)
        if hit is None and s_hist:
            # stale curvature can poison the direction; retry from scratch
            s_hist.clear()
            y_hist.clear()
            hit = wolfe_search(x, f, g, -g, 1.0 / max(1.0, grad_norm))
        if hit is None:
            warning = "line search failed; returning best parameters seen"
            break
        alpha, f_new, g_new, x_new = hit
        s = x_new - x
        y = g_new - g
        sy = float(s @ y)
        if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            s_hist.append(s)
            y_hist.append(y)
            if len(s_hist) > memory:
                s_hist.pop(0)
                y_hist.pop(0)
        f_drop = f - f_new
        x, f, g = x_new, f_new, g_new
        iterations += 1
        if callback is not None:
            callback(iterations, x, f, g)
        if ftol > 0.0 and abs(f_drop) <= ftol * max(1.0, abs(f)):
            converged = True
            break

    if best["f"] < f:
        x, f = best["x"], best["f"]
        _, g = objective(x)
    grad_norm = float(np.max(np.abs(g))) if g.size else 0.0
    return LbfgsResult(params=x, value=f, grad_norm=grad_norm,
                       iterations=iterations, evaluations=evals,
                       converged=converged, warning=warning)
