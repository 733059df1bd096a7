"""Stepping rules and the budgeted run harness.

Steppers are pure functions of (objective, state).  The multistep
implicit update keeps the ``tau`` most recent iterates in a
:class:`History`, forms the anchor ``sum_i xi_i x^{k+i}`` and applies
``prox_{alpha f}`` to it, either exactly (quadratics) or through a few
inner gradient-descent iterations.  The effective prox step is always
``alpha_bar * xi_bar``; order 1 reproduces the proximal point method.
"""

import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .problems import Objective, QuadraticProblem
from .schemes import bdf_scheme
from .util import NumericalFailure, StateError

DIVERGENCE_NORM = 1e12


def _check_finite(x, what):
    if not np.all(np.isfinite(x)):
        raise NumericalFailure(f"nonfinite {what}")
    return x


def normalize_gradient(g, eps=1e-12):
    """g / (||g|| + eps); returns 0 for g = 0."""
    g = np.asarray(g, dtype=float)
    norm = float(np.linalg.norm(g))
    if norm == 0.0:
        return np.zeros_like(g)
    return g / (norm + eps)


class NormalizedObjective(Objective):
    """View of an objective whose gradient field is ||.||-normalized.

    Running any stepper on this view discretizes the gradient norm flow
    dx/dt = -grad f / ||grad f||.  No smoothness constant is declared,
    so inner solves must be given an explicit step size.
    """

    def __init__(self, base, eps=1e-12):
        self.base = base
        self.eps = float(eps)
        self.dimension = base.dimension

    def value(self, x):
        return self.base.value(x)

    def gradient(self, x):
        return normalize_gradient(self.base.gradient(x), self.eps)


def gd_step(f, x, alpha):
    """Explicit Euler step x - alpha * grad f(x)."""
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    g = _check_finite(f.gradient(x), "gradient")
    return x - alpha * g


def rk4_step(f, x, alpha):
    """Classic fourth-order Runge-Kutta step on dx/dt = -grad f.

    On a quadratic with Hessian Q this equals p(alpha Q) x with
    p(z) = 1 - z + z^2/2 - z^3/6 + z^4/24.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    k1 = -f.gradient(x)
    k2 = -f.gradient(x + 0.5 * alpha * k1)
    k3 = -f.gradient(x + 0.5 * alpha * k2)
    k4 = -f.gradient(x + alpha * k3)
    _check_finite(k4, "RK4 stage")
    return x + (alpha / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def exact_prox_quadratic(q, anchor, alpha):
    """Closed-form prox of a quadratic: U (I + alpha D)^-1 U^T anchor."""
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    y = q.basis.T @ np.asarray(anchor, dtype=float)
    return q.basis @ (y / (1.0 + alpha * q.eigenvalues))


# Exact prox is reachable through wrappers that forward `prox`.
QuadraticProblem.prox = exact_prox_quadratic


@dataclass(frozen=True)
class InnerSolveSpec:
    """How to (approximately) evaluate the prox in implicit steps.

    m gradient-descent iterations with step ``beta`` on
    g(x) = f(x) + ||x - anchor||^2 / (2 alpha); ``beta="auto"`` resolves
    to alpha / (alpha L + 1), which keeps the solve contractive whenever
    f is L-smooth.  Mode ``exact_quadratic`` bypasses the loop and is
    only valid for quadratic objectives.
    """

    m: int = 8
    beta: object = "auto"
    mode: str = "inner_gd"

    def __post_init__(self):
        if self.mode not in ("inner_gd", "exact_quadratic"):
            raise ValueError(f"unknown inner mode: {self.mode!r}")
        if self.m < 0:
            raise ValueError(f"m must be >= 0, got {self.m}")
        if self.beta != "auto" and float(self.beta) <= 0:
            raise ValueError(f"beta must be > 0 or 'auto', got {self.beta!r}")


def resolve_inner_beta(f, alpha, spec):
    if spec.beta != "auto":
        return float(spec.beta)
    if f.L is None:
        raise ValueError("beta='auto' needs a declared smoothness constant L")
    return alpha / (alpha * f.L + 1.0)


def inner_gd_prox(f, anchor, alpha, spec, x0):
    """m inner GD steps toward prox_{alpha f}(anchor), starting at x0."""
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    anchor = np.asarray(anchor, dtype=float)
    x = np.array(x0, dtype=float, copy=True)
    if spec.m == 0:
        return x
    beta = resolve_inner_beta(f, alpha, spec)
    inv_alpha = 1.0 / alpha
    for _ in range(spec.m):
        x = x - beta * (f.gradient(x) + inv_alpha * (x - anchor))
    return _check_finite(x, "inner solve iterate")


class History:
    """Ring buffer of the tau most recent iterates, oldest first."""

    def __init__(self, tau):
        self.tau = int(tau)
        self._buf = deque(maxlen=self.tau)

    def push(self, x):
        self._buf.append(np.asarray(x, dtype=float))

    @property
    def full(self):
        return len(self._buf) == self.tau

    @property
    def last(self):
        return self._buf[-1]

    def __len__(self):
        return len(self._buf)

    def anchor(self, xi):
        """sum_i xi_i x^{k+i} with xi ordered oldest to newest."""
        if not self.full:
            raise StateError(f"history has {len(self)} of {self.tau} iterates")
        out = np.zeros_like(self._buf[-1])
        for coeff, x in zip(xi, self._buf):
            out += coeff * x
        return out


def bdm_step(f, hist, scheme, alpha_bar, spec):
    """One implicit multistep update prox_{alpha f}(sum_i xi_i x^{k+i}).

    alpha_bar is the raw discretization step; the prox uses the
    effective alpha = alpha_bar * xi_bar.  The inner solve is warm
    started at the anchor.
    """
    if alpha_bar <= 0:
        raise ValueError(f"alpha_bar must be > 0, got {alpha_bar}")
    if not hist.full:
        raise StateError(f"history has {len(hist)} of {scheme.tau} iterates")
    alpha = alpha_bar * scheme.xi_bar_float
    anchor = hist.anchor(scheme.xi_float)
    if spec.mode == "exact_quadratic":
        if not hasattr(f, "prox"):
            raise ValueError("exact_quadratic mode needs a quadratic objective")
        out = f.prox(anchor, alpha)
    else:
        out = inner_gd_prox(f, anchor, alpha, spec, x0=anchor)
    return _check_finite(out, "bdm iterate")


def measure_gamma(f, anchor, alpha, spec):
    """Empirical contraction ratio of the inner solve at one anchor.

    Returns ||prox(anchor) - x_tilde|| / ||prox(anchor) - anchor||
    against a high-accuracy prox (closed form for quadratics, a 10^4
    step inner GD otherwise); 0 when the displacement is negligible.
    """
    anchor = np.asarray(anchor, dtype=float)
    if spec.mode == "exact_quadratic":
        approx = f.prox(anchor, alpha)
    elif spec.m == 0:
        approx = anchor
    else:
        approx = inner_gd_prox(f, anchor, alpha, spec, x0=anchor)
    if hasattr(f, "prox"):
        exact = f.prox(anchor, alpha)
    else:
        oracle = InnerSolveSpec(m=10_000, beta=spec.beta if f.L is None else "auto")
        exact = inner_gd_prox(f, anchor, alpha, oracle, x0=anchor)
    denom = float(np.linalg.norm(exact - anchor))
    if denom < 1e-14:
        return 0.0
    return float(np.linalg.norm(exact - approx)) / denom


@dataclass(frozen=True)
class MethodSpec:
    """A named method together with its step and inner-solve parameters."""

    method: str
    alpha_bar: float
    tau: int = 1
    inner: InnerSolveSpec = field(default_factory=InnerSolveSpec)
    normalized: bool = False

    def __post_init__(self):
        if self.method not in ("gd", "rk4", "ppm", "bdm"):
            raise ValueError(f"unknown method: {self.method!r}")
        if self.method == "bdm" and not 1 <= self.tau <= 6:
            raise ValueError(f"tau must be in [1, 6], got {self.tau}")

    @property
    def effective_tau(self):
        return self.tau if self.method == "bdm" else 1

    @property
    def label(self):
        if self.method == "bdm":
            return f"bdm{self.tau}"
        return self.method

    def to_json(self):
        return {
            "method": self.method,
            "tau": self.effective_tau,
            "alpha_bar": self.alpha_bar,
            "inner_m": self.inner.m,
            "inner_beta": self.inner.beta,
            "normalized": self.normalized,
        }

    @staticmethod
    def from_json(obj):
        known = {"method", "tau", "alpha_bar", "inner_m", "inner_beta", "normalized"}
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown method spec keys: {sorted(extra)}")
        beta = obj.get("inner_beta", "auto")
        return MethodSpec(
            method=obj["method"],
            alpha_bar=float(obj["alpha_bar"]),
            tau=int(obj.get("tau", 1)),
            inner=InnerSolveSpec(m=int(obj.get("inner_m", 8)), beta=beta),
            normalized=bool(obj.get("normalized", False)),
        )


@dataclass
class RunTrace:
    """Per-iterate record of one optimizer run.

    grad_calls[i] is the cumulative number of gradient evaluations spent
    by the stepper up to and including iterate i (metric evaluations are
    not charged).  Its increments are exactly 1 per GD step, 4 per RK4
    step and m per inner-GD implicit step.
    """

    f_values: np.ndarray
    grad_norms: np.ndarray
    grad_calls: np.ndarray
    reason: str
    wall_time: float
    iterates: list | None = None
    method: MethodSpec | None = None

    @property
    def n_steps(self):
        return len(self.f_values) - 1

    @property
    def final_value(self):
        return float(self.f_values[-1])


class _CountingObjective(Objective):
    """Forwarding wrapper that charges gradient (and exact-prox) calls."""

    def __init__(self, base):
        self.base = base
        self.dimension = base.dimension
        self.calls = 0

    @property
    def L(self):
        return self.base.L

    @property
    def mu(self):
        return self.base.mu

    def value(self, x):
        return self.base.value(x)

    def gradient(self, x):
        self.calls += 1
        return self.base.gradient(x)

    def prox(self, anchor, alpha):
        # one implicit gradient at the new point
        self.calls += 1
        return self.base.prox(anchor, alpha)


def _step_cost(method):
    if method.method == "gd":
        return 1
    if method.method == "rk4":
        return 4
    if method.inner.mode == "exact_quadratic":
        return 1
    return method.inner.m


def run(method, f, x0, budget=None, max_iters=None, record_iterates=True,
        normalize_eps=1e-12):
    """Drive a stepper until its gradient-call budget (or an iteration
    cap) is exhausted and record per-iterate metrics.

    Multistep methods fill their history with order-1 (proximal point)
    warm-up steps using the same effective alpha and inner solve, and
    those steps are charged to the budget like any other.  Divergence
    (nonfinite iterate or norm above 1e12) and stepper failures stop the
    run with the corresponding reason instead of raising.
    """
    if budget is None and max_iters is None:
        raise ValueError("need a budget or an iteration cap")
    cost = _step_cost(method)
    if budget is not None and cost == 0:
        raise ValueError("a gradient-call budget needs a positive per-step cost (m >= 1)")

    counted = _CountingObjective(f)
    stepf = NormalizedObjective(counted, eps=normalize_eps) if method.normalized else counted
    if method.normalized and hasattr(counted, "prox") and method.inner.mode == "exact_quadratic":
        raise ValueError("exact prox solves do not apply to the normalized flow")

    x = np.asarray(x0, dtype=float).copy()
    tau = method.effective_tau
    implicit = method.method in ("ppm", "bdm")
    if implicit:
        scheme = bdf_scheme(tau)
        alpha = method.alpha_bar * scheme.xi_bar_float
        ppm = bdf_scheme(1)
        hist = History(tau)
        hist.push(x)

    f_values = [f.value(x)]
    grad_norms = [float(np.linalg.norm(f.gradient(x)))]
    grad_calls = [0]
    iterates = [x.copy()] if record_iterates else None
    reason = "budget" if budget is not None else "max_iters"
    start = time.perf_counter()
    n = 0

    while True:
        if budget is not None and counted.calls + cost > budget:
            reason = "budget"
            break
        if max_iters is not None and n >= max_iters:
            reason = "max_iters"
            break
        try:
            if method.method == "gd":
                x = gd_step(stepf, x, method.alpha_bar)
            elif method.method == "rk4":
                x = rk4_step(stepf, x, method.alpha_bar)
            elif not hist.full:
                # order-1 warm-up at the same effective prox step
                warm = History(1)
                warm.push(hist.last)
                x = bdm_step(stepf, warm, ppm, alpha, method.inner)
                hist.push(x)
            else:
                x = bdm_step(stepf, hist, scheme, method.alpha_bar, method.inner)
                hist.push(x)
        except NumericalFailure:
            reason = "numerical_failure"
            break
        n += 1
        f_values.append(f.value(x))
        grad_norms.append(float(np.linalg.norm(f.gradient(x))))
        grad_calls.append(counted.calls)
        if record_iterates:
            iterates.append(x.copy())
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > DIVERGENCE_NORM:
            reason = "diverged"
            break

    return RunTrace(
        f_values=np.asarray(f_values),
        grad_norms=np.asarray(grad_norms),
        grad_calls=np.asarray(grad_calls, dtype=int),
        reason=reason,
        wall_time=time.perf_counter() - start,
        iterates=iterates,
        method=method,
    )
