import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special, stats

from qhahn.distributions import (
    NBB1Params,
    QBetaBinomialParams,
    QHypergeomParams,
    RngStream,
    beta_sample,
    genbeta1_pdf,
    genbeta1_sample,
    inverse_draw,
    nb_pmf,
    nb_sample,
    nbb1_pdf,
    nbb1_sample,
    phi_params_valid,
    phi_pmf,
    phi_sample,
    phi_table,
    psi_pmf,
    psi_sample,
    psi_table,
)
from qhahn.duality import symmetry_check
from qhahn.errors import DomainError, ParameterError
from qhahn.qspecial import qpoch_inf

INF = math.inf


def _chi_square_ok(draws, pmf, min_expected=5.0, level=1e-3):
    n = draws.size
    counts = np.bincount(draws)
    support = max(counts.size, len(pmf))
    pmf = np.concatenate([pmf, np.zeros(max(0, support - len(pmf)))])
    counts = np.concatenate([counts, np.zeros(support - counts.size)])
    expected = n * pmf
    keep = expected >= min_expected
    obs = np.append(counts[keep], counts[~keep].sum())
    exp = np.append(expected[keep], n - expected[keep].sum())
    if exp[-1] < min_expected:
        obs[-2] += obs[-1]
        exp[-2] += exp[-1]
        obs, exp = obs[:-1], exp[:-1]
    return stats.chisquare(obs, exp).pvalue > level


def _grid_cdf(pdf, lo=0.0, hi=1.0, points=4001):
    xs = np.linspace(lo, hi, points)
    pieces = [integrate.quad(pdf, a, b, epsabs=1e-13)[0] for a, b in zip(xs[:-1], xs[1:])]
    cdf = np.concatenate([[0.0], np.cumsum(pieces)])
    return lambda x: np.interp(x, xs, cdf / cdf[-1])


# ---------------------------------------------------------------------------
# q-beta-binomial


def test_phi_trivial_cases():
    assert phi_pmf(QBetaBinomialParams(0.5, 0.4, 0.2, 0), 0) == 1.0
    same = QBetaBinomialParams(0.5, 0.4, 0.4, 5)
    assert phi_pmf(same, 0) == pytest.approx(1.0)
    assert all(phi_pmf(same, s) == 0.0 for s in range(1, 6))
    assert phi_pmf(QBetaBinomialParams(0.5, 0.4, 0.2, 3), 4) == 0.0


def test_phi_normalization_finite():
    p = QBetaBinomialParams(0.5, 0.4, 0.2, 5)
    assert math.fsum(phi_pmf(p, s) for s in range(6)) == pytest.approx(1.0, abs=1e-14)


@settings(max_examples=100, deadline=None)
@given(q=st.floats(0.05, 0.95), mu=st.floats(0.0, 0.95), frac=st.floats(-3, 1), y=st.integers(0, 15))
def test_phi_normalization_property(q, mu, frac, y):
    p = QBetaBinomialParams(q, mu, frac * mu if mu > 0 else -0.5 * abs(frac), y)
    vals = [phi_pmf(p, s) for s in range(y + 1)]
    assert math.fsum(vals) == pytest.approx(1.0, abs=1e-12)
    assert min(vals) >= -1e-15


def test_phi_infinite_normalization_and_first_term():
    q, mu, nu = 0.5, 0.3, 0.1
    tab = phi_table(QBetaBinomialParams(q, mu, nu))
    assert math.fsum(tab) == pytest.approx(1.0, abs=1e-13)
    assert tab[0] == pytest.approx((qpoch_inf(mu, q) / qpoch_inf(nu, q)).value, rel=1e-14)


def test_phi_q_greater_than_one_family():
    # q > 1 with mu = q^{-m}, nu = q^{-n}, m <= n, y <= n
    q = 2.0
    p = QBetaBinomialParams(q, q**-1, q**-3, 3)
    vals = [phi_pmf(p, s) for s in range(4)]
    assert math.fsum(vals) == pytest.approx(1.0, abs=1e-13)
    assert min(vals) >= 0
    assert not phi_params_valid(q, q**-1, q**-3, 4)
    assert not phi_params_valid(0.5, 0.4, 0.6, 3)
    with pytest.raises(ParameterError):
        QBetaBinomialParams(0.5, 0.4, 0.6, 3)


def test_phi_sample_degenerate():
    draws = phi_sample(QBetaBinomialParams(0.5, 0.4, 0.2, 0), RngStream(1), size=100)
    assert np.all(draws == 0)


def test_phi_sample_matches_pmf():
    p = QBetaBinomialParams(0.5, 0.4, 0.2, 4)
    draws = phi_sample(p, RngStream(100), size=10**6)
    pmf = np.array([phi_pmf(p, s) for s in range(5)])
    freq = np.bincount(draws, minlength=5) / draws.size
    se = np.sqrt(pmf * (1 - pmf) / draws.size)
    assert np.all(np.abs(freq - pmf) <= 4 * se + 1e-12)
    assert _chi_square_ok(draws, pmf)


def test_phi_sample_infinite_mean():
    p = QBetaBinomialParams(0.5, 0.3, 0.1)
    tab = phi_table(p)
    mean = float(np.dot(np.arange(tab.size), tab))
    draws = phi_sample(p, RngStream(3), size=2 * 10**5)
    assert abs(draws.mean() - mean) <= 3 * draws.std() / math.sqrt(draws.size)
    assert _chi_square_ok(draws, tab)


def test_phi_symmetry_full_grid():
    rng = np.random.default_rng(5)
    for _ in range(3):
        q = float(rng.uniform(0.2, 0.8))
        mu = float(rng.uniform(0.1, 0.9))
        nu = float(rng.uniform(-0.8, mu))
        for x in range(9):
            for y in range(9):
                rep = symmetry_check(x, y, q, mu, nu)
                assert rep.passed, rep


def test_beta_binomial_limit():
    eps, y, alpha, beta = 1e-4, 5, 1.3, 0.7
    p = QBetaBinomialParams(math.exp(-eps), math.exp(-alpha * eps), math.exp(-(alpha + beta) * eps), y)
    for s in range(y + 1):
        bb = math.exp(
            special.gammaln(y + 1) - special.gammaln(s + 1) - special.gammaln(y - s + 1)
            + special.betaln(s + beta, y - s + alpha) - special.betaln(alpha, beta)
        )
        assert abs(phi_pmf(p, s) - bb) < 1e-3


# ---------------------------------------------------------------------------
# q-hypergeometric


def test_psi_first_atom_and_normalization():
    q, a, b, c = 0.5, 0.3, 0.4, 0.06
    p = QHypergeomParams(q, a, b, c)
    z = c / (a * b)
    first = (qpoch_inf(c, q) * qpoch_inf(z, q) / (qpoch_inf(c / a, q) * qpoch_inf(c / b, q))).value
    assert psi_pmf(p, 0) == pytest.approx(first, rel=1e-14)
    tab = psi_table(p)
    assert math.fsum(tab) == pytest.approx(1.0, abs=1e-14)


def test_psi_a_zero_single_parameter_series():
    # a = 0 with c = z a b requires the ratio form; the law becomes z^p (b;q)_p/(q;q)_p (z;q)_inf/(zb;q)_inf
    p = QHypergeomParams.from_ratio(0.5, 0.0, 0.4, 0.5)
    tab = psi_table(p)
    assert math.fsum(tab) == pytest.approx(1.0, abs=1e-14)
    assert tab[0] == pytest.approx((qpoch_inf(0.5, 0.5) / qpoch_inf(0.2, 0.5)).value, rel=1e-13)


def test_psi_invalid():
    with pytest.raises(ParameterError):
        QHypergeomParams(0.5, 0.3, 0.4, 0.5)  # c/ab > 1


def test_psi_sampler():
    p = QHypergeomParams(0.5, 0.3, 0.4, 0.06)
    tab = psi_table(p)
    draws = psi_sample(p, RngStream(7), size=10**6)
    se0 = math.sqrt(tab[0] * (1 - tab[0]) / draws.size)
    assert abs((draws == 0).mean() - tab[0]) <= 4 * se0
    mean = float(np.dot(np.arange(tab.size), tab))
    assert abs(draws.mean() - mean) <= 3 * draws.std() / math.sqrt(draws.size)
    assert _chi_square_ok(draws, tab)


def test_psi_degenerate_ratio():
    p = QHypergeomParams.from_ratio(0.5, 0.3, 0.4, 1e-300)
    assert np.all(psi_sample(p, RngStream(8), size=100) == 0)


# ---------------------------------------------------------------------------
# negative binomial and beta laws


def test_nb_pmf():
    assert nb_pmf(1.7, 0.0, 0) == 1.0
    assert nb_pmf(2.0, 0.5, 1) == pytest.approx(0.25, rel=1e-15)
    assert math.fsum(nb_pmf(1.5, 0.6, k) for k in range(400)) == pytest.approx(1.0, abs=1e-13)


def test_nb_sampler_mean():
    draws = nb_sample(1.5, 0.6, RngStream(9), size=2 * 10**5)
    mean = 1.5 * 0.6 / 0.4
    assert abs(draws.mean() - mean) <= 3 * draws.std() / math.sqrt(draws.size)


def test_genbeta1_reduces_to_beta():
    for x in (0.1, 0.5, 0.9):
        assert genbeta1_pdf(0.0, 2.0, 3.0, x) == pytest.approx(stats.beta.pdf(x, 2.0, 3.0), rel=1e-13)


def test_genbeta1_normalization():
    val, err = integrate.quad(lambda x: genbeta1_pdf(0.5, 2.0, 3.0, x), 0, 1, epsabs=1e-12)
    assert abs(val - 1) < 1e-8


def test_genbeta1_domain():
    with pytest.raises(DomainError):
        genbeta1_pdf(0.5, 2.0, 3.0, 1.0)


def test_genbeta1_sampler_ks():
    c, m, n = 0.5, 2.0, 3.0
    draws = genbeta1_sample(c, m, n, RngStream(11), size=10**5)
    cdf = _grid_cdf(lambda x: genbeta1_pdf(c, m, n, x))
    assert stats.kstest(draws, cdf).pvalue > 0.01


def test_beta_sampler_moments():
    draws = beta_sample(2.0, 3.0, RngStream(12), size=10**5)
    assert abs(draws.mean() - 0.4) <= 3 * draws.std() / math.sqrt(draws.size)


MIX = NBB1Params(1.2, 0.4, 0.3, 1.5, 2.5)


def test_nbb1_reduces_to_genbeta1():
    p = NBB1Params(1.2, 0.0, 0.3, 1.5, 2.5)
    for x in (0.2, 0.7):
        assert nbb1_pdf(p, x) == pytest.approx(genbeta1_pdf(0.3, 1.5, 2.5, x), rel=1e-15)
    a = nbb1_sample(p, RngStream(13), size=10)
    b = genbeta1_sample(0.3, 1.5, 2.5, RngStream(13), size=10)
    np.testing.assert_array_equal(a, b)


def test_nbb1_normalization():
    val, _ = integrate.quad(lambda x: nbb1_pdf(MIX, x), 0, 1, epsabs=1e-12, limit=200)
    assert abs(val - 1) < 1e-7


def test_nbb1_mixture_identity():
    x = 0.37
    mix = math.fsum(nb_pmf(MIX.r, MIX.p, k) * genbeta1_pdf(MIX.c, MIX.m, MIX.n + k, x) for k in range(300))
    assert nbb1_pdf(MIX, x) == pytest.approx(mix, rel=1e-9)


def test_nbb1_sampler_ks():
    draws = nbb1_sample(MIX, RngStream(14), size=10**5)
    cdf = _grid_cdf(lambda x: nbb1_pdf(MIX, x))
    assert stats.kstest(draws, cdf).pvalue > 0.01


def test_nbb1_change_of_variables():
    c = MIX.c
    w = nbb1_sample(MIX, RngStream(15), size=10**5)
    v = (w - c * w) / (1 - c * w)
    plain = NBB1Params(MIX.r, MIX.p, 0.0, MIX.m, MIX.n)
    cdf = _grid_cdf(lambda x: nbb1_pdf(plain, x))
    assert stats.kstest(v, cdf).pvalue > 0.01


def test_inverse_draw():
    assert inverse_draw(1.0) == 1.0
    assert inverse_draw(0.5) == 2.0
    draws = inverse_draw(beta_sample(1.5, 2.0, RngStream(16), size=1000))
    assert np.all(draws >= 1)


# ---------------------------------------------------------------------------
# random streams


def test_rng_stream_reproducible():
    a = RngStream(42, 3).uniform(5)
    b = RngStream(42, 3).uniform(5)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(RngStream(42, 4).uniform(5), a)
    np.testing.assert_array_equal(RngStream(1).spawn(2).uniform(3), RngStream(1).spawn(2).uniform(3))
    assert not np.array_equal(RngStream(1).worker(0).uniform(3), RngStream(1).worker(1).uniform(3))
