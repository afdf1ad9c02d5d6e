"""Polynomial double-well potentials and checks of the structural hypotheses."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.polynomial import Polynomial

from .errors import HypothesisViolated
from .grid import ScalarField

QUARTIC = (0.25, 0.0, -0.5, 0.0, 0.25)  # ¼(s² - 1)²


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """``F(s) = Σ c_k s^k`` with coefficients in ascending order.

    ``s_max`` bounds the range on which hypotheses are sampled and the
    runtime range monitor aborts. ``c0_override`` optionally lowers the
    positivity margin reported for (H2).
    """

    coefficients: tuple = QUARTIC
    s_max: float = 3.0
    c0_override: float | None = None
    name: str = "quartic"

    def __post_init__(self):
        if len(self.coefficients) < 3:
            raise ValueError("potential must be at least quadratic")
        if self.s_max <= 0:
            raise ValueError("s_max must be positive")

    @classmethod
    def quartic(cls, s_max=3.0):
        return cls(QUARTIC, s_max=s_max, name="quartic")

    @classmethod
    def polynomial(cls, coefficients, s_max=3.0):
        return cls(tuple(float(c) for c in coefficients), s_max=s_max, name="polynomial")

    @cached_property
    def F(self):
        return Polynomial(self.coefficients)

    @cached_property
    def dF(self):
        return self.F.deriv()

    @cached_property
    def d2F(self):
        return self.F.deriv(2)


def _eval(poly, s):
    if isinstance(s, ScalarField):
        return ScalarField(s.grid, poly(s.values))
    return poly(s)


def f_val(spec: PotentialSpec, s):
    return _eval(spec.F, s)


def f_prime(spec: PotentialSpec, s):
    return _eval(spec.dF, s)


def f_second(spec: PotentialSpec, s):
    return _eval(spec.d2F, s)


@dataclass
class HypothesisReport:
    c0: float
    a_min: float
    q: float
    h3_constant: float
    p: float
    p_raw: float
    h4_constant: float
    s_max: float

    def lines(self):
        yield f"(H2) c0 = min(F''(s) + a(x)) = {self.c0:.6g} on |s| <= {self.s_max:g}"
        yield f"(H3) fitted q = {self.q:.4f}, constant {self.h3_constant:.4g}"
        yield f"(H4) fitted p = {self.p:.4f} (raw {self.p_raw:.4f}), constant {self.h4_constant:.4g}"


def growth_exponent(poly, s):
    """Fit the algebraic growth degree of ``|poly|`` from samples ``s`` (all of one sign).

    The log-log slope ``σ(s) = s g'(s)/g(s)`` of a polynomial tends to its
    degree like a power series in ``1/s²``; a least-squares polynomial fit in
    ``1/s²`` on the tail of the sampled range, extrapolated to ``1/s² = 0``,
    recovers ``n``.
    """
    g = poly(s)
    keep = np.abs(g) > 1e-12 * np.max(np.abs(g))
    s, g = s[keep], g[keep]
    sigma = s * poly.deriv()(s) / g
    coef = np.polynomial.polynomial.polyfit(s**-2.0, sigma, 6)
    return float(coef[0])


def validate_hypotheses(spec: PotentialSpec, a, s_range=None, n_samples=10001):
    """Check (H2) hard, fit (H3)/(H4) exponents on the sampled range.

    ``a`` is the coefficient field (``ScalarField``, array or scalar).
    Raises ``HypothesisViolated('H2')`` when ``min(F'' + a) <= 0``.
    """
    if n_samples < 10_000:
        raise ValueError("hypothesis checks need at least 10^4 samples")
    s_max = spec.s_max if s_range is None else float(max(abs(s_range[0]), abs(s_range[1])))
    lo, hi = (-s_max, s_max) if s_range is None else s_range
    s = np.linspace(lo, hi, n_samples)
    a_vals = a.values if isinstance(a, ScalarField) else np.asarray(a, dtype=float)
    a_min = float(np.min(a_vals))
    d2 = spec.d2F(s)
    c0 = float(np.min(d2) + a_min)
    if c0 <= 0:
        raise HypothesisViolated("H2", f"min(F''+a) = {c0:.6g} <= 0")
    if spec.c0_override is not None:
        if spec.c0_override > c0:
            raise HypothesisViolated("H2", f"c0 override {spec.c0_override} exceeds measured {c0:.6g}")
        c0 = float(spec.c0_override)

    tail = np.linspace(s_max / 2, s_max, 2001)
    h3_poly = spec.d2F + a_min
    deg_h3 = min(growth_exponent(h3_poly, tail), growth_exponent(h3_poly, -tail))
    q = max(deg_h3 / 2, 0.0)
    big = np.abs(s) > 1
    if q > 0 and np.any(big):
        h3_c = float(np.min((d2[big] + a_min) / (np.abs(s[big]) ** (2 * q) - 1 + 1e-300)))
    else:
        h3_c = c0

    deg_F = min(growth_exponent(spec.F, tail), growth_exponent(spec.F, -tail))
    deg_dF = max(growth_exponent(spec.dF, tail), growth_exponent(spec.dF, -tail))
    p_raw = deg_F / deg_dF
    p = float(np.clip(p_raw, 1.0 + 1e-12, 2.0))
    h4_c = float(np.max(np.abs(spec.dF(s)) ** p / (np.abs(spec.F(s)) + 1)))
    return HypothesisReport(c0=c0, a_min=a_min, q=q, h3_constant=h3_c, p=p, p_raw=p_raw,
                            h4_constant=h4_c, s_max=s_max)


@dataclass(frozen=True)
class ConvexSplit:
    """``F = G - (a*/2) s²`` with ``G' = F' + a* s`` convex on the sampled range."""

    spec: PotentialSpec
    shift: float
    stabilization: float

    def g_prime(self, s):
        return self.spec.dF(s) + self.shift * s

    def g_second(self, s):
        return self.spec.d2F(s) + self.shift


def convex_split(spec: PotentialSpec, a_star: float, n_samples=10001) -> ConvexSplit:
    s = np.linspace(-spec.s_max, spec.s_max, n_samples)
    stabilization = max(a_star, float(np.max(-spec.d2F(s))))
    return ConvexSplit(spec, float(a_star), stabilization)
