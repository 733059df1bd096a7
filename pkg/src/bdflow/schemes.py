"""Backwards-differentiation scheme constants.

Coefficients are stored as exact integer fractions and follow the
convention that ``xi[-1]`` (i.e. xi_tau) multiplies the most recent
iterate, so the multistep anchor is ``sum_i xi_i x^{k+i}`` with the
dominant weight (4/3, 18/11, 48/25, ...) on ``x^{k+tau}``.  Order 1
reduces to the proximal point method.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

# (xi_bar, (xi_1 .. xi_tau)), xi_tau = weight of the most recent iterate.
# Orders 4-6 are included for completeness only; their stability regions
# shrink and nothing here recommends them.
_BDF_TABLE = {
    1: (Fraction(1), (Fraction(1),)),
    2: (Fraction(2, 3), (Fraction(-1, 3), Fraction(4, 3))),
    3: (Fraction(6, 11), (Fraction(2, 11), Fraction(-9, 11), Fraction(18, 11))),
    4: (Fraction(12, 25),
        (Fraction(-3, 25), Fraction(16, 25), Fraction(-36, 25), Fraction(48, 25))),
    5: (Fraction(60, 137),
        (Fraction(12, 137), Fraction(-75, 137), Fraction(200, 137),
         Fraction(-300, 137), Fraction(300, 137))),
    6: (Fraction(60, 147),
        (Fraction(-10, 147), Fraction(72, 147), Fraction(-225, 147),
         Fraction(400, 147), Fraction(-450, 147), Fraction(360, 147))),
}


@dataclass(frozen=True)
class BdfScheme:
    """Constants of the order-``tau`` backwards differentiation scheme.

    Attributes
    ----------
    tau : int
        Number of past iterates combined per step (1..6).
    xi_bar : Fraction
        Gradient weight; the effective prox step is ``alpha_bar * xi_bar``.
    xi : tuple of Fraction
        Anchor coefficients, oldest first, summing to 1 exactly.
    delta : float
        Scheme constant ``(tau-1) * sum_j sum_{i<=j} (tau-i) xi_i^2``
        entering the nonconvex step-size window.
    """

    tau: int
    xi_bar: Fraction
    xi: tuple
    delta: float

    @property
    def xi_float(self):
        return np.array([float(c) for c in self.xi])

    @property
    def xi_bar_float(self):
        return float(self.xi_bar)

    @property
    def abs_xi_sum(self):
        """sum_i |xi_i| as a float (equals 1 only for tau = 1)."""
        return float(sum(abs(c) for c in self.xi))

    def to_json(self):
        return {
            "tau": self.tau,
            "xi_bar": float(self.xi_bar),
            "xi": [float(c) for c in self.xi],
            "delta": self.delta,
        }


def delta_exact(xi, variant="standard"):
    """Exact rational value of the scheme constant.

    standard:  (tau-1) * sum_{j=1}^{tau-1} sum_{i=1}^{j} (tau-i)   xi_i^2
    shifted:   (tau-1) * sum_{j=1}^{tau-1} sum_{i=1}^{j} (tau-1-i) xi_i^2

    The two weightings appear in the exact and approximate nonconvex
    rate statements respectively; both are exposed because printed
    reference values for orders 3 and 4 match neither exactly.
    """
    if variant not in ("standard", "shifted"):
        raise ValueError(f"unknown delta variant: {variant!r}")
    off = 0 if variant == "standard" else 1
    tau = len(xi)
    xi = [Fraction(c) for c in xi]
    total = Fraction(0)
    for j in range(1, tau):
        total += sum((tau - off - i) * xi[i - 1] ** 2 for i in range(1, j + 1))
    return (tau - 1) * total


def delta(scheme, variant="standard"):
    """Float value of :func:`delta_exact` for a built scheme."""
    return float(delta_exact(scheme.xi, variant=variant))


def bdf_scheme(tau):
    """Return the BDF scheme of order ``tau`` in [1, 6]."""
    if not isinstance(tau, (int, np.integer)) or isinstance(tau, bool):
        raise ValueError(f"tau must be an integer, got {tau!r}")
    if tau not in _BDF_TABLE:
        raise ValueError(f"tau must be in [1, 6], got {tau}")
    xi_bar, xi = _BDF_TABLE[tau]
    assert sum(xi) == 1
    return BdfScheme(tau=int(tau), xi_bar=xi_bar, xi=xi,
                     delta=float(delta_exact(xi)))


def scheme_from_json(obj):
    """Rebuild the exact scheme named by a serialized record."""
    scheme = bdf_scheme(int(obj["tau"]))
    ser = scheme.to_json()
    for key in ("xi_bar", "xi", "delta"):
        if key in obj and not np.allclose(obj[key], ser[key]):
            raise ValueError(f"serialized scheme field {key!r} does not match BDF{obj['tau']}")
    return scheme
