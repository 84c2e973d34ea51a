import math

import numpy as np
import pytest

from holonorm.dynamics import ProjectiveEndomorphism, periodic_points, repelling_experiment, repelling_sum

LOG2 = math.log(2)
Z2 = ProjectiveEndomorphism.power_map(1)


def test_z2_period_three():
    count, rep, S, ok = repelling_sum(Z2, 3)
    assert ok and count == 8 and rep == 7
    assert S == pytest.approx(7 / 8 * LOG2, abs=1e-12)


def test_z2_closed_form_and_monotone():
    prev = math.inf
    for n in range(1, 11):
        count, rep, S, ok = repelling_sum(Z2, n)
        assert ok and count == 2 ** n
        assert S == pytest.approx((1 - 2.0 ** -n) * LOG2, abs=1e-9)
        gap = abs(S - LOG2)
        assert gap < prev
        prev = gap


def test_z2_periodic_points_are_roots_of_unity():
    z, mult, ok = periodic_points(Z2, 6)
    assert ok
    finite = z[np.abs(z) > 0.5]
    assert np.allclose(finite ** 63, 1, atol=1e-10)


@pytest.mark.parametrize("c", [-1.0, 0.3 + 0.5j, -0.12 + 0.75j])
def test_quadratic_family_counts(c):
    f = ProjectiveEndomorphism.polynomial([c, 0, 1])
    for n in (1, 5, 8):
        z, mult, ok = periodic_points(f, n)
        assert ok and len(z) == 2 ** n
        g = z.copy()
        for _ in range(n):
            g = g * g + c
        assert np.max(np.abs(g - z) / np.maximum(1, np.abs(z))) <= 1e-8


def test_z2_minus_1_matches_birkhoff():
    f = ProjectiveEndomorphism.polynomial([-1, 0, 1])
    exp = repelling_experiment(f, 12)
    last = exp.rows[-1]
    assert all(r.reliable for r in exp.rows)
    assert all(r.count == 2 ** r.n for r in exp.rows)
    assert last.gap <= 0.05


def test_csv_columns():
    exp = repelling_experiment(Z2, 3, samples=200)
    lines = exp.to_csv(["seed 0"]).splitlines()
    assert lines[0] == "# seed 0"
    assert lines[1] == "n,count,S_n,lambda_hat,gap"
    assert len(lines) == 5
