"""Radius-of-convergence analysis on quadratics.

For f(x) = 1/2 x^T Q x every method here contracts (or diverges)
eigenvalue by eigenvalue, so each rho is a maximum over the spectrum:

    rho_gd    max |1 - alpha d|
    rho_rk4   max |p(alpha d)|, p(z) = 1 - z + z^2/2 - z^3/6 + z^4/24
    rho_ppm   max 1/(1 + alpha d)
    rho_appm  max |a + b|,  a = (1 - beta/alpha - beta d)^m,
                            b = (beta/alpha) sum_{j=1}^m (1 - beta/alpha - beta d)^{j-1}

The multistep method couples the tau most recent iterates; per
eigenvalue its one-step matrix is a tau x tau companion block with
characteristic polynomial

    z^tau - (a + xi_tau b) z^{tau-1} - xi_{tau-1} b z^{tau-2} - ... - xi_1 b

whose max-modulus root plays the role of rho.  ``alpha`` throughout is
the effective prox step (the step actually entering the prox and the
inner solve); order-1 blocks reduce exactly to rho_appm.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .util import NumericalFailure

_RK4_COEFFS = np.array([1.0, -1.0, 0.5, -1.0 / 6.0, 1.0 / 24.0])

_DK_MAX_ITER = 500


def _rk4_poly(z):
    out = np.zeros_like(z)
    for c in _RK4_COEFFS[::-1]:
        out = out * z + c
    return out


def rho_gd(alpha, s):
    """Spectral norm of I - alpha Q."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return float(np.max(np.abs(1.0 - alpha * s.eigenvalues)))


def rho_rk4(alpha, s):
    """Spectral norm of the degree-4 Runge-Kutta update polynomial."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return float(np.max(np.abs(_rk4_poly(alpha * s.eigenvalues))))


def rho_ppm_exact(alpha, s):
    """Spectral norm of (I + alpha Q)^-1; below 1 for any alpha > 0."""
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    return float(np.max(1.0 / (1.0 + alpha * s.eigenvalues)))


def _appm_ab(alpha, beta, m, eigenvalues):
    q = 1.0 - beta / alpha - beta * eigenvalues
    a = q ** m
    near_one = np.abs(1.0 - q) < 1e-12
    denom = np.where(near_one, 1.0, 1.0 - q)
    geo = np.where(near_one, float(m), (1.0 - a) / denom)
    b = (beta / alpha) * geo
    return a, b


def rho_appm(alpha, beta, m, s):
    """Contraction factor of m inner GD steps approximating the prox."""
    if alpha <= 0 or beta <= 0 or m < 1:
        raise ValueError("need alpha > 0, beta > 0, m >= 1")
    a, b = _appm_ab(alpha, beta, m, s.eigenvalues)
    return float(np.max(np.abs(a + b)))


def poly_roots(coeffs, tol=1e-12):
    """All roots of a polynomial by simultaneous (Durand-Kerner) iteration.

    coeffs are complex, highest degree first, degree <= 8.  Each returned
    root r satisfies |p(r)| < tol * max|coeff|; failure to reach that
    within 500 sweeps raises NumericalFailure.
    """
    coeffs = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    roots = _durand_kerner(coeffs, tol)
    return list(roots[0])


def _durand_kerner(coeffs, tol=1e-12):
    """Batched Durand-Kerner: coeffs (B, d+1) -> roots (B, d)."""
    B, width = coeffs.shape
    degree = width - 1
    if degree < 1 or degree > 8:
        raise ValueError(f"degree must be in [1, 8], got {degree}")
    lead = coeffs[:, :1]
    if np.any(np.abs(lead) == 0):
        raise ValueError("leading coefficient must be nonzero")
    monic = coeffs / lead

    radius = 1.0 + np.max(np.abs(monic[:, 1:]), axis=1)
    angles = 2.0 * np.pi * np.arange(degree) / degree + 0.4
    z = radius[:, None] * np.exp(1j * angles)[None, :]

    scale = np.max(np.abs(coeffs), axis=1)
    for _ in range(_DK_MAX_ITER):
        p = np.zeros_like(z)
        for c in monic.T:
            p = p * z + c[:, None]
        if np.all(np.abs(p) * np.abs(lead) < tol * scale[:, None]):
            break
        diff = z[:, :, None] - z[:, None, :]
        diff[:, np.arange(degree), np.arange(degree)] = 1.0
        denom = np.prod(diff, axis=2)
        tiny = np.abs(denom) < 1e-30
        if np.any(tiny):
            denom = np.where(tiny, 1e-30, denom)
        step = p / denom
        z = z - step
        # clustered roots stall the sweep at the attainable precision
        if np.max(np.abs(step)) < 1e-15 * (1.0 + np.max(np.abs(z))):
            break
    else:
        raise NumericalFailure(
            f"root finder did not converge; max residual "
            f"{float(np.max(np.abs(p) / scale[:, None])):.3e}")
    return z


@dataclass(frozen=True)
class CompanionBlock:
    """Per-eigenvalue tau x tau block of the multistep one-step matrix.

    a is the inner-solve power term acting on the newest iterate, b the
    accumulated anchor weight; xi are the scheme coefficients, oldest
    first.
    """

    a: float
    b: float
    xi: tuple

    def char_poly(self):
        """Monic coefficients, highest degree first."""
        xi = np.asarray(self.xi, dtype=float)
        return np.concatenate((
            [1.0, -(self.a + xi[-1] * self.b)],
            -xi[:-1][::-1] * self.b,
        ))

    def max_root_modulus(self, tol=1e-12):
        roots = poly_roots(self.char_poly(), tol=tol)
        return float(np.max(np.abs(roots)))

    def dense(self):
        """The explicit companion matrix (oracle/debug path)."""
        tau = len(self.xi)
        M = np.zeros((tau, tau))
        xi = np.asarray(self.xi, dtype=float)
        M[0, :] = xi[::-1] * self.b
        M[0, 0] += self.a
        M[np.arange(1, tau), np.arange(tau - 1)] = 1.0
        return M


def _bdm_char_batch(alpha, beta, m, scheme, eigenvalues):
    a, b = _appm_ab(alpha, beta, m, np.asarray(eigenvalues, dtype=float))
    xi = scheme.xi_float
    tau = scheme.tau
    coeffs = np.zeros((len(a), tau + 1), dtype=complex)
    coeffs[:, 0] = 1.0
    coeffs[:, 1] = -(a + xi[-1] * b)
    for j in range(2, tau + 1):
        coeffs[:, j] = -xi[tau - j] * b
    return coeffs


def rho_bdm(alpha, beta, m, scheme, s, tol=1e-12):
    """Max-modulus companion root over the spectrum.

    Equals the spectral radius of the full block companion matrix by
    eigenbasis decoupling; the dense route is kept separately in
    :func:`gelfand_estimate` as a cross check.  For tau = 1 this is
    rho_appm exactly.
    """
    if alpha <= 0 or beta <= 0 or m < 1:
        raise ValueError("need alpha > 0, beta > 0, m >= 1")
    coeffs = _bdm_char_batch(alpha, beta, m, scheme, s.eigenvalues)
    roots = _durand_kerner(coeffs, tol)
    return float(np.max(np.abs(roots)))


def build_block_companion(alpha, beta, m, scheme, s):
    """Dense tau*n x tau*n one-step matrix in the eigenbasis of Q.

    Orthogonal changes of basis leave every norm used here invariant,
    so Q can be taken diagonal without loss.
    """
    d = s.eigenvalues
    n = d.size
    tau = scheme.tau
    a, b = _appm_ab(alpha, beta, m, d)
    xi = scheme.xi_float
    M = np.zeros((tau * n, tau * n))
    for i in range(tau):
        blk = np.diag(xi[tau - 1 - i] * b)
        if i == 0:
            blk += np.diag(a)
        M[:n, i * n:(i + 1) * n] = blk
    for i in range(1, tau):
        idx = np.arange(n)
        M[i * n + idx, (i - 1) * n + idx] = 1.0
    return M


def gelfand_estimate(alpha, beta, m, scheme, s, k=2000):
    """||M^k||^(1/k) by repeated application with log rescaling.

    Converges to the spectral radius of the block companion matrix as k
    grows; used as an independent oracle for :func:`rho_bdm`.  Rescaling
    after every multiply keeps the iteration finite for any rho.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    M = build_block_companion(alpha, beta, m, scheme, s)
    Z = np.eye(M.shape[0])
    log_scale = 0.0
    for _ in range(k):
        Z = M @ Z
        s_max = float(np.max(np.abs(Z)))
        if not np.isfinite(s_max):
            raise NumericalFailure("matrix power overflowed despite rescaling")
        if s_max == 0.0:
            return 0.0
        Z /= s_max
        log_scale += np.log(s_max)
    norm = float(np.linalg.norm(Z, 2))
    return float(np.exp((np.log(norm) + log_scale) / k))


def stability_limit(rho, lo, hi, n_scan=512, rel_tol=1e-4):
    """Largest step in [lo, hi] with rho <= 1.

    Forward scan finds the first upward crossing of 1, then bisection
    refines it to ``rel_tol`` relative resolution.  Returns hi when the
    whole range is stable and 0.0 when no scanned point is (the caller
    can treat 0.0 as the unstable-everywhere flag).
    """
    slack = 1.0 + 1e-12
    xs = np.linspace(lo, hi, n_scan)
    stable = np.array([rho(x) <= slack for x in xs])
    if not stable[0]:
        return 0.0
    if stable.all():
        return float(hi)
    first_bad = int(np.argmin(stable))
    a, b = xs[first_bad - 1], xs[first_bad]
    while b - a > rel_tol * max(abs(b), 1e-12):
        mid = 0.5 * (a + b)
        if rho(mid) <= slack:
            a = mid
        else:
            b = mid
    return float(a)


_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


def optimal_step(rho, lo, hi, n_grid=1000, refine_iters=80):
    """(argmin, min) of rho over [lo, hi].

    A 1000-point grid scan locates the best cell; golden-section search
    inside the surrounding bracket refines it.
    """
    xs = np.linspace(lo, hi, n_grid)
    vals = np.array([rho(x) for x in xs])
    i = int(np.argmin(vals))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, n_grid - 1)]

    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = rho(c), rho(d)
    for _ in range(refine_iters):
        if b - a < 1e-14 * max(abs(b), 1.0):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = rho(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = rho(d)
    best = min((vals[i], xs[i]), (fc, c), (fd, d))
    return float(best[1]), float(best[0])


def rho_curve(method, s, m=4, alpha=1.0, tau=2):
    """Callable step -> rho for one method on one spectrum.

    gd and rk4 sweep their own step alpha; ppm sweeps alpha of the exact
    prox; appm and bdm sweep the inner step beta at fixed (alpha, m).
    """
    if method == "gd":
        return lambda step: rho_gd(step, s)
    if method == "rk4":
        return lambda step: rho_rk4(step, s)
    if method == "ppm":
        return lambda step: rho_ppm_exact(step, s)
    if method == "appm":
        return lambda step: rho_appm(alpha, step, m, s)
    if method == "bdm":
        from .schemes import bdf_scheme
        scheme = bdf_scheme(tau)
        return lambda step: rho_bdm(alpha, step, m, scheme, s)
    raise ValueError(f"unknown method: {method!r}")


@dataclass
class StabilityReport:
    """Grid of rho values plus the derived limit and optimum."""

    method: str
    params: dict
    steps: np.ndarray
    rho: np.ndarray
    stability_limit: float
    optimal_step: float
    optimal_rho: float

    @property
    def stable_anywhere(self):
        return self.stability_limit > 0.0

    def to_json(self):
        return {
            "method": self.method,
            "params": self.params,
            "stability_limit": self.stability_limit,
            "optimal_step": self.optimal_step,
            "optimal_rho": self.optimal_rho,
            "stable_anywhere": self.stable_anywhere,
        }

    def rows(self):
        """CSV rows: (method, tau, m, alpha, beta, rho) per grid point."""
        tau = self.params.get("tau", "")
        m = self.params.get("m", "")
        fixed_alpha = self.params.get("alpha")
        out = []
        for step, r in zip(self.steps, self.rho):
            if self.method in ("gd", "rk4", "ppm"):
                alpha, beta = step, ""
            else:
                alpha, beta = fixed_alpha, step
            out.append((self.method, tau, m, alpha, beta, float(r)))
        return out


def stability_report(method, s, lo, hi, n_grid=400, m=4, alpha=1.0, tau=2):
    rho = rho_curve(method, s, m=m, alpha=alpha, tau=tau)
    steps = np.linspace(lo, hi, n_grid)
    vals = np.array([rho(x) for x in steps])
    limit = stability_limit(rho, lo, hi)
    best_step, best_rho = optimal_step(rho, lo, hi)
    params = {"m": m, "alpha": alpha, "tau": tau} if method in ("appm", "bdm") else {}
    if method == "bdm":
        params["tau"] = tau
    return StabilityReport(
        method=method, params=params, steps=steps, rho=vals,
        stability_limit=limit, optimal_step=best_step, optimal_rho=best_rho,
    )
