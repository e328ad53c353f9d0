import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from qhahn.distributions import RngStream, psi_log
from qhahn.errors import ParameterError, PoleError
from qhahn.kernel import (
    PushParams,
    gb_pmf,
    jumps_from_uniforms,
    kernel_geometric,
    kernel_nu0,
    kernel_q0,
    kernel_row,
    kernel_table,
    p_first,
    p_update,
    p_update_phi87,
    p_update_sum,
    phi87_parts,
    counterexample_numerator,
    counterexample_normalizer,
    sample_jump,
    support_start,
    sum_form_pole,
    tail_bound,
)
from qhahn.qspecial import qpoch, qpoch_inf

# mpmath oracle (40 digits) of the defining finite sum
ORACLE = {
    (0.5, 0.3, 0.2, 2, 3, 2): 0.10915790529948555609,
    (0.5, 0.3, 0.2, 4, 2, 3): 0.30339096031621665006,
    (0.5, 0.3, -0.4, 1, 0, 4): 0.1074215174746825128,
    (0.6, 0.5, 0.3, 3, 3, 1): 0.29069543455637496747,
}


@pytest.mark.parametrize("key", sorted(ORACLE))
def test_kernel_oracle_values(key):
    q, mu, nu, ell, g, L = key
    params = PushParams(q, mu, nu)
    assert p_update_sum(params, ell, g, L) == pytest.approx(ORACLE[key], rel=1e-13)
    assert p_update(params, ell, g, L) == pytest.approx(ORACLE[key], rel=1e-12)


def test_params_range():
    with pytest.raises(ParameterError):
        PushParams(0.5, 0.3, 0.4)  # nu > mu
    with pytest.raises(ParameterError):
        PushParams(0.25, 0.75, 0.6)  # nu > sqrt(q)
    with pytest.raises(ParameterError):
        PushParams(0.5, 0.3, -1.0)
    assert not PushParams.unchecked(0.25, 0.75, 2 / 3).in_range


def test_zero_push_reduces_to_psi():
    params = PushParams(0.5, 0.3, 0.2)
    for g in range(4):
        for L in range(6):
            psi = psi_log(0.5, 0.2 / 0.3, 0.2 * 0.5**g, 0.3, L).value
            assert p_update_sum(params, 0, g, L) == pytest.approx(psi, rel=1e-14)


def test_support_start():
    params = PushParams(0.5, 0.3, 0.2)
    assert support_start(3, 1) == 2
    assert p_update(params, 3, 1, 1) == 0.0
    assert p_update_sum(params, 3, 1, 1) == 0.0
    assert p_update_phi87(params, 3, 1, 1) == 0.0


def test_counterexample_value_is_negative():
    params = PushParams.unchecked(0.25, 0.75, 2 / 3)
    val = p_update(params, 1, 1, 1)
    assert val < 0
    assert counterexample_numerator(0.25, 0.75, 2 / 3) == pytest.approx(-1 / 32, abs=1e-15)
    # the kernel itself carries the positive normalizer in front of the displayed rational expression
    assert val == pytest.approx(counterexample_normalizer(0.25, 0.75, 2 / 3) * (-1 / 32), rel=1e-12)


def test_representations_agree_grid():
    params = PushParams(0.5, 0.3, 0.2)
    for ell in range(6):
        for g in range(6):
            for L in range(6):
                a, b = p_update_sum(params, ell, g, L), p_update_phi87(params, ell, g, L)
                assert abs(a - b) <= 1e-9 * max(abs(a), abs(b), 1e-300)


def test_equal_push_and_gap_uses_second_form():
    params = PushParams(0.5, 0.3, 0.2)
    assert p_update_phi87(params, 2, 2, 3) == pytest.approx(p_update_sum(params, 2, 2, 3), rel=1e-12)


def test_phi87_summands_nonnegative():
    params = PushParams(0.6, 0.6, 0.7 * math.sqrt(0.6))
    rng = np.random.default_rng(3)
    for _ in range(60):
        ell, g, L = (int(v) for v in rng.integers(0, 7, size=3))
        pre, terms = phi87_parts(params, ell, g, L)
        assert pre >= 0
        assert all(t >= 0 for t in terms)


def test_phi87_sign_needs_nu_below_mu():
    # with mu = 0.5 < nu = 0.7 sqrt(0.6) the pieces are no longer all nonnegative
    params = PushParams.unchecked(0.6, 0.5, 0.7 * math.sqrt(0.6))
    signs = []
    for ell in range(7):
        for g in range(7):
            for L in range(support_start(ell, g), 7):
                pre, terms = phi87_parts(params, ell, g, L)
                signs.append(pre >= 0 and all(t >= 0 for t in terms))
    assert not all(signs)


def test_row_sum_negative_nu():
    params = PushParams(0.5, 0.3, -0.4)
    table = kernel_table(params, 4, 2, tail=1e-13)
    assert table.tail_bound < 1e-12
    assert table.total() == pytest.approx(1.0, abs=1e-12)


def test_table_to_dict():
    table = kernel_table(PushParams(0.5, 0.3, 0.2), 3, 1)
    d = table.to_dict()
    assert set(d) == {"q", "mu", "nu", "ell", "g", "method", "values", "tail_bound"}
    assert d["values"][0][0] == 2
    assert abs(math.fsum(v for _, v in d["values"]) + d["tail_bound"] - 1) < 1e-10


def test_first_particle_law():
    params = PushParams(0.5, 0.3, 0.1)
    assert math.fsum(p_first(params, ell) for ell in range(80)) == pytest.approx(1.0, abs=1e-14)
    assert p_first(params, 0) == pytest.approx((qpoch_inf(0.3, 0.5) / qpoch_inf(0.1, 0.5)).value, rel=1e-14)
    geo = PushParams(0.5, 0.3, 0.0)
    for ell in range(6):
        expect = 0.3**ell * qpoch_inf(0.3, 0.5).value / qpoch(0.5, 0.5, ell).value
        assert p_first(geo, ell) == pytest.approx(expect, rel=1e-13)


def test_nu_zero_kernel():
    params = PushParams(0.5, 0.3, 0.0)
    for ell in range(6):
        for g in range(6):
            for L in range(6):
                assert kernel_nu0(params, ell, g, L) == pytest.approx(p_update(params, ell, g, L), rel=1e-11, abs=1e-15)
    for L in range(6):
        expect = 0.3**L * qpoch_inf(0.3, 0.5).value / qpoch(0.5, 0.5, L).value
        assert kernel_nu0(params, 0, 2, L) == pytest.approx(expect, rel=1e-13)
    assert math.fsum(kernel_nu0(params, 3, 1, L) for L in range(120)) == pytest.approx(1.0, abs=1e-13)


def test_geometric_kernel():
    mu = 0.4
    assert kernel_geometric(mu, 1, 3, 0) == pytest.approx(0.6)
    assert kernel_geometric(mu, 1, 3, 2) == pytest.approx(0.6 * 0.16)
    assert kernel_geometric(mu, 3, 1, 1) == 0.0
    assert kernel_geometric(mu, 3, 1, 2) == pytest.approx(0.6)
    assert math.fsum(kernel_geometric(mu, 3, 1, L) for L in range(200)) == pytest.approx(1.0, abs=1e-14)


def test_geometric_bernoulli_kernel():
    assert gb_pmf(0.4, 0.3, 0) == 0.3
    mu = 0.5
    for ell, g in ((0, 0), (1, 3), (3, 1), (2, 2)):
        assert kernel_q0(mu, 0.0, ell, g, support_start(ell, g) + 2) == pytest.approx(
            kernel_geometric(mu, ell, g, support_start(ell, g) + 2)
        )
        total = math.fsum(kernel_q0(mu, -0.3, ell, g, L) for L in range(200))
        assert total == pytest.approx(1.0, abs=1e-14)
    with pytest.raises(ParameterError):
        kernel_q0(0.1, 0.5, 1, 1, 1)


def test_q_to_zero_continuity():
    mu, nu = 0.5, -0.3
    params = PushParams(1e-6, mu, nu)
    for ell in range(5):
        for g in range(5):
            for L in range(5):
                assert abs(p_update(params, ell, g, L) - kernel_q0(mu, nu, ell, g, L)) < 1e-4


def test_sum_form_pole_detected():
    # mu nu = q^j with 1 <= j <= ell - g
    q = 0.5
    params = PushParams(q, 0.5, 0.5)  # mu nu = q^2
    assert sum_form_pole(params, 3, 0)
    with pytest.raises(PoleError):
        p_update_sum(params, 3, 0, 3)
    # the 8phi7 form is regular there and the row still sums to one
    row = kernel_row(params, 3, 0, 200)
    assert math.fsum(row) == pytest.approx(1.0, abs=1e-12)


def test_tail_bound_certifies():
    params = PushParams(0.5, 0.3, 0.2)
    for Lmax in (8, 15, 25):
        rest = 1 - math.fsum(kernel_row(params, 2, 1, Lmax))
        bound = tail_bound(params, 2, 1, Lmax)
        assert rest <= bound + 1e-15
        assert rest >= 0.5 * bound  # the bound is tight, not merely valid


def test_sample_jump_geometric_limit():
    params = PushParams(1e-9, 0.4, 0.0)
    rng = RngStream(21)
    draws = np.array([sample_jump(params, 0, 0, rng) for _ in range(20000)])
    pmf = np.array([0.6 * 0.4**k for k in range(12)])
    counts = np.bincount(np.minimum(draws, 11), minlength=12)
    pmf[-1] = 0.4**11
    assert stats.chisquare(counts, pmf * draws.size).pvalue > 1e-3


def test_vectorized_jumps_match_pmf():
    params = PushParams(0.5, 0.3, 0.2)
    ell, g = 3, 1
    u = RngStream(22).uniform(10**5)
    draws = jumps_from_uniforms(params, np.full(u.size, ell), np.full(u.size, g), u)
    assert draws.min() >= support_start(ell, g)
    row = kernel_row(params, ell, g, 30)
    counts = np.bincount(np.minimum(draws, 12), minlength=13)[2:]
    pmf = np.append(row[2:12], 1 - math.fsum(row[:12]))
    assert stats.chisquare(counts, pmf * draws.size).pvalue > 1e-3


@settings(max_examples=60, deadline=None)
@given(
    q=st.floats(0.1, 0.9),
    mu=st.floats(0.05, 0.9),
    frac=st.floats(-0.99, 1.0),
    ell=st.integers(0, 8),
    g=st.integers(0, 8),
)
def test_kernel_nonnegative_and_normalized(q, mu, frac, ell, g):
    cap = min(mu, math.sqrt(q))
    nu = frac * cap if frac > 0 else frac
    params = PushParams(q, mu, nu)
    table = kernel_table(params, ell, g)
    assert table.values.min() >= -1e-12
    assert abs(table.total() + table.tail_bound - 1) <= 1e-10
    assert np.all(table.values[: support_start(ell, g)] == 0)
