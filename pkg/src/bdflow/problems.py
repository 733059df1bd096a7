"""Objectives and quadratic test problems.

Every optimizer in this package sees an :class:`Objective`: a dimension,
a value, a gradient, and (optionally) a smoothness constant ``L`` and a
convexity level ``mu`` (negative for weakly convex functions).
"""

from dataclasses import dataclass, field

import numpy as np

from .util import rng


class Objective:
    """Base class for differentiable objectives.

    Subclasses implement :meth:`value` and :meth:`gradient` over flat
    float64 vectors of length :attr:`dimension`.  ``L`` and ``mu`` are
    declared constants, not estimates; leave them ``None`` when unknown.
    """

    dimension = None
    L = None
    mu = None

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError


class FunctionObjective(Objective):
    """Objective built from plain callables."""

    def __init__(self, dimension, value_fn, grad_fn, L=None, mu=None):
        self.dimension = int(dimension)
        self._value_fn = value_fn
        self._grad_fn = grad_fn
        self.L = L
        self.mu = mu

    def value(self, x):
        return float(self._value_fn(np.asarray(x, dtype=float)))

    def gradient(self, x):
        return np.asarray(self._grad_fn(np.asarray(x, dtype=float)), dtype=float)


def cosine_objective():
    """f(x) = cos(x) on R: smooth (L = 1) and weakly convex (mu = -1)."""
    return FunctionObjective(
        1,
        lambda x: np.cos(x[0]),
        lambda x: -np.sin(x),
        L=1.0,
        mu=-1.0,
    )


@dataclass(frozen=True)
class Spectrum:
    """Sorted nonnegative eigenvalues of a symmetric PSD quadratic."""

    eigenvalues: np.ndarray
    kind: str = "custom"
    seed: int | None = None

    def __post_init__(self):
        eig = np.asarray(self.eigenvalues, dtype=float)
        if eig.ndim != 1 or eig.size < 1:
            raise ValueError("spectrum needs at least one eigenvalue")
        if np.any(eig < 0):
            raise ValueError("eigenvalues must be nonnegative")
        if np.any(np.diff(eig) < 0):
            raise ValueError("eigenvalues must be sorted ascending")
        object.__setattr__(self, "eigenvalues", eig)

    @property
    def n(self):
        return self.eigenvalues.size

    @property
    def mu(self):
        return float(self.eigenvalues[0])

    @property
    def L(self):
        return float(self.eigenvalues[-1])

    def to_json(self):
        return {
            "eigenvalues": self.eigenvalues.tolist(),
            "seed": self.seed,
            "kind": self.kind,
        }


def spectrum_from_json(obj):
    return Spectrum(np.asarray(obj["eigenvalues"], dtype=float),
                    kind=obj.get("kind", "custom"), seed=obj.get("seed"))


def make_spectrum(kind, n, seed=0):
    """Generate one of the three benchmark spectra, sorted ascending.

    uniform12    i.i.d. uniform on [1, 2] (condition number <= 2)
    squared      d_i = i^2 / n^2 (badly conditioned)
    exponential  d_i = exp(-i), i = 1..n (very badly conditioned)
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if kind == "uniform12":
        eig = np.sort(rng(seed).uniform(1.0, 2.0, size=n))
    elif kind == "squared":
        i = np.arange(1, n + 1, dtype=float)
        eig = (i / n) ** 2
    elif kind == "exponential":
        eig = np.exp(-np.arange(n, 0, -1, dtype=float))
    else:
        raise ValueError(f"unknown spectrum kind: {kind!r}")
    return Spectrum(eig, kind=kind, seed=seed)


@dataclass(frozen=True)
class QuadraticProblem(Objective):
    """f(x) = 1/2 x^T Q x with Q = U diag(d) U^T, U orthonormal.

    The value and gradient are evaluated in the eigenbasis, so no dense
    Q is ever formed: gradient(x) = U diag(d) U^T x.
    """

    spectrum: Spectrum
    basis: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        U = np.asarray(self.basis, dtype=float)
        n = self.spectrum.n
        if U.shape != (n, n):
            raise ValueError(f"basis must be {n}x{n}, got {U.shape}")
        if np.max(np.abs(U.T @ U - np.eye(n))) > 1e-10:
            raise ValueError("basis is not orthonormal")
        object.__setattr__(self, "basis", U)

    @property
    def dimension(self):
        return self.spectrum.n

    @property
    def mu(self):
        return self.spectrum.mu

    @property
    def L(self):
        return self.spectrum.L

    @property
    def eigenvalues(self):
        return self.spectrum.eigenvalues

    def value(self, x):
        y = self.basis.T @ np.asarray(x, dtype=float)
        return float(0.5 * np.sum(self.eigenvalues * y * y))

    def gradient(self, x):
        y = self.basis.T @ np.asarray(x, dtype=float)
        return self.basis @ (self.eigenvalues * y)

    def dense_matrix(self):
        """Q as a dense array (test oracle; O(n^2) memory)."""
        return self.basis @ np.diag(self.eigenvalues) @ self.basis.T


def make_quadratic(spectrum, seed=0):
    """Random rotation of a spectrum into a full quadratic problem.

    The basis is the QR orthonormal factor of a seeded standard Gaussian
    matrix, with the sign convention that the triangular factor has a
    positive diagonal, so the same seed always yields the same basis.
    """
    n = spectrum.n
    g = rng(seed).standard_normal((n, n))
    q, r = np.linalg.qr(g)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    return QuadraticProblem(spectrum=spectrum, basis=q * signs, seed=seed)
