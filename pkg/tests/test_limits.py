import math

import pytest

from qhahn.limits import (
    KERNEL_LIMIT_CASES,
    KERNEL_LIMIT_PARAMS,
    kernel_limit_check,
    kernel_limit_density,
    moment_bridge_check,
    qpoch_ratio_limit_check,
)
from qhahn.moments import MomentSpec
from qhahn.processes import BetaParams


@pytest.mark.parametrize("drop,gap,t", KERNEL_LIMIT_CASES)
def test_kernel_limit(drop, gap, t):
    rep = kernel_limit_check(drop, gap, t, KERNEL_LIMIT_PARAMS, eps=1e-3)
    assert rep.passed, rep.to_dict()


def test_kernel_limit_improves_with_eps():
    coarse = kernel_limit_check(1.0, 3.0, 1.0, KERNEL_LIMIT_PARAMS, eps=1e-2)
    fine = kernel_limit_check(1.0, 3.0, 1.0, KERNEL_LIMIT_PARAMS, eps=1e-3)
    assert fine.rel_err < coarse.rel_err


def test_limit_density_tie_undefined():
    with pytest.raises(ValueError):
        kernel_limit_density(1.0, 1.0, 0.5, 0.5, KERNEL_LIMIT_PARAMS)
    assert kernel_limit_density(0.0, 1.0, 0.2, 0.5, KERNEL_LIMIT_PARAMS) == 0.0


@pytest.mark.parametrize("Y,Z", [(0.05, 0.37), (0.37, 0.05)])
def test_limit_density_integrates_to_one(Y, Z):
    from scipy.integrate import quad

    total, _ = quad(lambda t: kernel_limit_density(t, 1.0, Y, Z, KERNEL_LIMIT_PARAMS), 0, math.inf, limit=200)
    assert total == pytest.approx(1.0, rel=1e-6)


def test_qpoch_ratio_limit():
    rep = qpoch_ratio_limit_check(0.5, 1.2, 0.4, 1 - 1e-4)
    assert rep.passed and rep.rel_err < 1e-4


@pytest.mark.parametrize("n,t", [((1,), 1), ((2,), 2), ((2, 1), 1)])
def test_moment_bridge(n, t):
    rep = moment_bridge_check(MomentSpec(n, t), BetaParams(3.0, 3.5), eps=1e-3)
    assert rep.passed, rep.to_dict()
