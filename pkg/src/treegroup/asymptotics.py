"""Orbit-length measures and the growth constants alpha_p of element orders."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .errors import DomainError, ResourceError
from .treealg import PermGroupSpec, is_prime, p_valuation, prime_divisors

ENUMERATION_BUDGET = 10_000
GOLDEN = (math.sqrt(5) - 1) / 2


@dataclass(frozen=True)
class PAdicOrbitMeasure:
    """mu(k): expected number of orbits of a uniform h in H whose length has p-part p^k."""

    p: int
    coefficients: tuple    # Fractions, index k

    def mu_hat(self, z: float) -> float:
        return sum(float(c) * z**k for k, c in enumerate(self.coefficients))

    def log_mu_hat(self, lam: float) -> float:
        """f(lambda) = log mu_hat(e^lambda), evaluated stably for large lambda."""
        terms = [(math.log(c), k) for k, c in enumerate(self.coefficients) if c > 0]
        top = max(t + k * lam for t, k in terms)
        return top + math.log(sum(math.exp(t + k * lam - top) for t, k in terms))

    def d_log_mu_hat(self, lam: float) -> float:
        """f'(lambda): mean offset under the exponentially tilted measure."""
        weights = [(float(c), k) for k, c in enumerate(self.coefficients) if c > 0]
        shift = max(k for _, k in weights) * lam
        num = sum(c * k * math.exp(k * lam - shift) for c, k in weights)
        den = sum(c * math.exp(k * lam - shift) for c, k in weights)
        return num / den

    @property
    def total(self) -> Fraction:
        return sum(self.coefficients, Fraction(0))

    @property
    def max_offset(self) -> int:
        return max(k for k, c in enumerate(self.coefficients) if c > 0)


@dataclass(frozen=True)
class AlphaResult:
    alpha: float
    lambda_star: float
    method: str                 # closed_form_root or lambda_minimization
    residual: float = 0.0
    boundary: bool = False      # minimum reached at the lower end of the lambda bracket
    degenerate: bool = False    # no mass above k = 0
    discrete_check: float | None = None


def orbit_measure(H: PermGroupSpec, p: int) -> PAdicOrbitMeasure:
    if not is_prime(p):
        raise DomainError(f"{p} is not prime")
    if H.order > ENUMERATION_BUDGET:
        raise ResourceError(f"|H| = {H.order} exceeds the enumeration budget")
    counts: dict[int, int] = {}
    for h in range(H.order):
        for cyc in H.cycles(h):
            k = p_valuation(len(cyc), p)
            counts[k] = counts.get(k, 0) + 1
    top = max(counts)
    return PAdicOrbitMeasure(p, tuple(Fraction(counts.get(k, 0), H.order) for k in range(top + 1)))


def alpha_min(measure: PAdicOrbitMeasure, lo: float = 1e-6, hi: float = 50.0,
              tol: float = 1e-13) -> AlphaResult:
    """min over lambda > 0 of log(mu_hat(e^lambda)) / lambda by golden-section search."""
    if all(c == 0 for c in measure.coefficients[1:]):
        return AlphaResult(0.0, math.nan, "lambda_minimization", degenerate=True)

    def obj(lam):
        return measure.log_mu_hat(lam) / lam

    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = obj(x1), obj(x2)
    while b - a > tol * max(1.0, abs(a) + abs(b)):
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = obj(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = obj(x2)
    lam = (a + b) / 2
    # polish on the stationarity condition f(lambda) = lambda f'(lambda)
    lam = _polish_stationary(measure, lam, lo, hi)
    value = obj(lam)
    residual = abs(measure.log_mu_hat(lam) / lam - measure.d_log_mu_hat(lam))
    boundary = lam < 10 * lo
    return AlphaResult(value, lam, "lambda_minimization", residual, boundary)


def _polish_stationary(measure: PAdicOrbitMeasure, lam: float, lo: float, hi: float) -> float:
    def g(x):
        return measure.log_mu_hat(x) - x * measure.d_log_mu_hat(x)

    # g is decreasing (g' = -x f'' <= 0); bracket around the golden-section estimate
    a, b = max(lo, lam * 0.9), min(hi, lam * 1.1)
    if g(a) * g(b) > 0:
        return lam
    for _ in range(200):
        mid = (a + b) / 2
        if g(a) * g(mid) <= 0:
            b = mid
        else:
            a = mid
        if b - a < 1e-15 * max(1.0, mid):
            break
    return (a + b) / 2


def turan_residual(alpha: float, p: int) -> float:
    return alpha * (1 - alpha) ** (1 / alpha - 1) - (1 - 1 / p)


def discrete_alpha(p: int, n: int = 10**6) -> float:
    """k/n at the root of log C(n, k) = k log(p/(p-1)) over 0 < k < n."""
    target = math.log(p / (p - 1))

    def h(k):
        return (math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)) - k * target

    a, b = n / 2, n - 1.0
    for _ in range(200):
        mid = (a + b) / 2
        if h(mid) > 0:
            a = mid
        else:
            b = mid
    return (a + b) / 2 / n


def alpha_turan(p: int, tol: float = 1e-12) -> AlphaResult:
    """Root in (0, 1) of alpha (1 - alpha)^(1/alpha - 1) = 1 - 1/p."""
    if p < 2:
        raise DomainError("p must be at least 2")

    def f(a):
        return turan_residual(a, p)

    a, b = 1e-6, 1 - 1e-6
    # f(0+) = 0 - (1 - 1/p) < 0 and f(1-) = 1 - (1 - 1/p) > 0
    if f(a) >= 0 or f(b) <= 0:
        raise DomainError("bracket sign check failed")
    while b - a > tol:
        mid = (a + b) / 2
        if f(mid) < 0:
            a = mid
        else:
            b = mid
    x = (a + b) / 2
    for _ in range(3):
        h = 1e-7
        deriv = (f(x + h) - f(x - h)) / (2 * h)
        if deriv == 0:
            break
        step = f(x) / deriv
        if abs(step) > tol * 100:
            break
        x -= step
    lam = math.log(x * p / ((1 - x) * (p - 1)))
    return AlphaResult(x, lam, "closed_form_root", abs(f(x)), discrete_check=discrete_alpha(p))


def log_order_growth(H: PermGroupSpec) -> float:
    """Limit of log|g_n| / n for Haar random g: sum over primes p dividing |H| of alpha_p log p."""
    total = 0.0
    for p in prime_divisors(H.order):
        total += alpha_min(orbit_measure(H, p)).alpha * math.log(p)
    return total


def per_prime_growth(H: PermGroupSpec) -> dict:
    return {p: alpha_min(orbit_measure(H, p)).alpha * math.log(p) for p in prime_divisors(H.order)}
