import math
from fractions import Fraction

import pytest

from treegroup import DomainError
from treegroup.asymptotics import (PAdicOrbitMeasure, alpha_min, alpha_turan, discrete_alpha,
                                   log_order_growth, orbit_measure, per_prime_growth,
                                   turan_residual)
from treegroup.stochastic import RngConfig, turan_exact_moments, turan_experiment
from treegroup.treealg import PermGroupSpec


def test_cyclic_measure():
    for p in (2, 3, 5):
        m = orbit_measure(PermGroupSpec.cyclic(p), p)
        # the identity contributes p fixed points, each rotation one orbit of length p
        assert m.coefficients == (Fraction(1), Fraction(p - 1, p))
        assert m.mu_hat(2.0) == pytest.approx(1 + 2 * (p - 1) / p)


def test_trivial_measure():
    m = orbit_measure(PermGroupSpec.trivial(), 2)
    assert m.coefficients == (Fraction(1),)
    res = alpha_min(m)
    assert res.degenerate and res.alpha == 0


def test_measure_total_is_mean_orbit_count():
    for H in (PermGroupSpec.symmetric(3), PermGroupSpec.symmetric(4), PermGroupSpec.cyclic(5)):
        mean_orbits = Fraction(sum(len(H.cycles(h)) for h in range(H.order)), H.order)
        for p in (2, 3, 5):
            assert orbit_measure(H, p).total == mean_orbits


def test_sym3_measure_by_hand():
    H = PermGroupSpec.symmetric(3)
    # identity: 3 fixed points; 3 transpositions: 1+1 orbits; 2 three-cycles: one orbit of length 3
    assert orbit_measure(H, 3).coefficients == (Fraction(3 + 6, 6), Fraction(2, 6))
    assert orbit_measure(H, 2).coefficients == (Fraction(3 + 3 + 2, 6), Fraction(3, 6))


def test_non_prime_rejected():
    with pytest.raises(DomainError):
        orbit_measure(PermGroupSpec.cyclic(2), 4)


def test_turan_root():
    for p in (2, 3, 5, 7):
        res = alpha_turan(p)
        assert 0 < res.alpha < 1
        assert abs(turan_residual(res.alpha, p)) < 1e-10
        assert abs(res.residual) < 1e-10


def test_methods_agree():
    for p in (2, 3, 5):
        a = alpha_turan(p).alpha
        b = alpha_min(orbit_measure(PermGroupSpec.cyclic(p), p)).alpha
        assert abs(a - b) < 1e-9


def test_alpha_monotone_in_p():
    values = [alpha_turan(p).alpha for p in (2, 3, 5)]
    assert values == sorted(values) and len(set(values)) == 3


def test_deterministic_measure():
    res = alpha_min(PAdicOrbitMeasure(2, (Fraction(0), Fraction(1))))
    assert res.alpha == pytest.approx(1, abs=1e-9)


def test_stationarity():
    for H, p in ((PermGroupSpec.cyclic(2), 2), (PermGroupSpec.symmetric(3), 3),
                 (PermGroupSpec.symmetric(4), 2)):
        m = orbit_measure(H, p)
        res = alpha_min(m)
        lam = res.lambda_star
        assert m.log_mu_hat(lam) / lam == pytest.approx(m.d_log_mu_hat(lam), abs=1e-8)
        assert res.alpha == pytest.approx(m.log_mu_hat(lam) / lam, abs=1e-12)


def test_discrete_form_matches_root():
    assert discrete_alpha(2) == pytest.approx(alpha_turan(2).alpha, abs=1e-4)


def test_log_order_growth():
    for p in (2, 3):
        assert log_order_growth(PermGroupSpec.cyclic(p)) == \
            pytest.approx(alpha_turan(p).alpha * math.log(p), abs=1e-9)
    H = PermGroupSpec.symmetric(3)
    parts = per_prime_growth(H)
    assert set(parts) == {2, 3}
    assert log_order_growth(H) > max(parts.values())
    assert log_order_growth(H) == pytest.approx(sum(parts.values()))


def test_exact_mean_approaches_alpha_from_below():
    alpha = alpha_turan(2).alpha
    ratios = [turan_exact_moments(2, n)[0] / n for n in (8, 14, 32, 128)]
    assert ratios == sorted(ratios)
    assert all(r < alpha for r in ratios)
    assert alpha - ratios[-1] < 0.03


@pytest.mark.xfail(strict=True, reason="finite-n bias: E[K_14]/14 = 0.683 sits 11.6% below alpha_2")
def test_order_growth_within_ten_percent_at_14():
    rep = turan_experiment(2, 14, 20000, RngConfig(0))
    target = log_order_growth(PermGroupSpec.cyclic(2))
    measured = rep.estimates["mean_k_over_n"] * math.log(2)
    assert abs(measured - target) / target < 0.10
