"""q -> 1 limits: rescaled PushTASEP kernel densities, the q-Pochhammer ratio
limit and the bridge from PushTASEP moments to beta-limit moments.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .kernel import kernel_row
from .moments import MomentSpec, beta_moment_integral, push_moment_integral
from .processes import BetaParams
from .qspecial import gauss_2f1, qpoch_inf

KERNEL_LIMIT_EPS = 1e-3
KERNEL_LIMIT_RTOL = 1e-2
QPOCH_LIMIT_RTOL = 1e-3
BRIDGE_EPS = 1e-3
BRIDGE_RTOL = 5e-3


@dataclass(frozen=True)
class LimitReport:
    check: str
    exact: float
    limit: float
    rel_err: float
    tolerance: float
    passed: bool
    instance: dict

    def to_dict(self) -> dict:
        return asdict(self)


def _report(check: str, exact: float, limit: float, tol: float, instance: dict) -> LimitReport:
    rel = abs(exact - limit) / abs(limit) if limit != 0 else abs(exact)
    return LimitReport(check, float(exact), float(limit), float(rel), tol, bool(rel <= tol), instance)


def kernel_limit_density(t: float, X: float, Y: float, Z: float, params: BetaParams) -> float:
    """Limit density in t of the rescaled jump of particle i.

    X = Z(i-1,t-1), Y = Z(i,t-1), Z = Z(i-1,t) with Y != Z.  For Y < Z the
    jump is measured from 0; for Y > Z it is measured from the forced push
    (the variable t is the jump minus (l - g), times eps).
    """
    mb, nb = params.mu_bar, params.nu_bar
    if t <= 0:
        return 0.0
    e = math.exp(-t)
    if Y < Z:
        mix = (1 / Z - 1 / X) / (1 / Y - 1 / X)
        arg = (X / Z - 1) / (X / Y - 1) * (1 - e) / (1 - e * Y / Z)
        return (
            math.exp(-t * mb) * (1 - e) ** (nb - mb - 1) / (1 - e * Y / Z) ** nb
            * (1 - Y / Z) ** mb * math.gamma(nb) / (math.gamma(mb) * math.gamma(nb - mb))
            * (1 - mix) ** (2 * nb - 1) * gauss_2f1(2 * nb - 1, nb, nb - mb, arg)
        )
    if Y > Z:
        mix = (1 / Y - 1 / X) / (1 / Z - 1 / X)
        arg = (X / Y - 1) / (X / Z - 1) * (1 - e) / (1 - e * Z / Y)
        return (
            math.exp(-t * mb) * (1 - e) ** (nb - 1) / (1 - e * Z / Y) ** (nb + mb)
            * (1 - Z / Y) ** mb * math.gamma(nb + mb) / (math.gamma(mb) * math.gamma(nb))
            * (1 - mix) ** (2 * nb - 1) * gauss_2f1(2 * nb - 1, nb + mb, nb, arg)
        )
    raise ValueError("Y == Z is a tie; the limit density is not defined there")


def kernel_limit_check(
    drop: float, gap: float, t: float, params: BetaParams, eps: float = KERNEL_LIMIT_EPS, tol: float = KERNEL_LIMIT_RTOL
) -> LimitReport:
    """Compare eps^{-1} P_{l,g}(L) with the limit density.

    The previous particle's jump is l = round(drop/eps) and the gap is
    g = round(gap/eps), so X = 1, Z = q^l, Y = q^g.  The kernel is read at
    L = ceil(t/eps) for l < g and at L = ceil(t/eps) + l - g for l > g.
    """
    push = params.scaled(eps)
    q = push.q
    ell, g = round(drop / eps), round(gap / eps)
    X, Z, Y = 1.0, q**ell, q**g
    L = math.ceil(t / eps) + max(ell - g, 0)
    exact = kernel_row(push, ell, g, L)[L] / eps
    limit = kernel_limit_density(t, X, Y, Z, params)
    inst = {"drop": drop, "gap": gap, "t": t, "eps": eps, "ell": ell, "g": g, "L": L, **params.as_dict()}
    return _report("kernel-limit", exact, limit, tol, inst)


def qpoch_ratio_limit_check(r: float, x: float, y: float, q: float, tol: float = QPOCH_LIMIT_RTOL) -> LimitReport:
    """(r q^y; q)_inf / (r q^x; q)_inf against its q -> 1 limit (1 - r)^{x - y}."""
    exact = (qpoch_inf(r * q**y, q) / qpoch_inf(r * q**x, q)).value
    limit = (1 - r) ** (x - y)
    return _report("qpoch-limit", exact, limit, tol, {"r": r, "x": x, "y": y, "q": q})


def moment_bridge_check(
    spec: MomentSpec, params: BetaParams, eps: float = BRIDGE_EPS, tol: float = BRIDGE_RTOL
) -> LimitReport:
    """PushTASEP q-moment at the scaled parameters against the beta moment."""
    exact = push_moment_integral(spec, params.scaled(eps))
    limit = beta_moment_integral(spec, params)
    return _report("moment-bridge", exact, limit, tol, {**spec.as_dict(), "eps": eps, **params.as_dict()})


KERNEL_LIMIT_CASES = tuple((a, b, t) for a, b in ((1.0, 3.0), (3.0, 1.0)) for t in (0.5, 1.0))
KERNEL_LIMIT_PARAMS = BetaParams(1.3, 2.1)
