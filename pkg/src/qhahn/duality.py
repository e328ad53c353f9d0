"""Numerical verification of the PushTASEP and TASEP dualities and of the
q-identities behind them.

Every check returns a :class:`DualityReport` comparing two independently
computed sides.  Infinite sums are truncated with an explicit bound on the
omitted part, and the bound is reported relative to the size of the sides.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .distributions import phi_inf_table, phi_log, q_binomial, scaled_qpoch
from .errors import DivergenceError, ParameterError, TruncationError
from .kernel import PushParams, kernel_logrow, push_weight, sum_form_pole, tail_bound
from .processes import BosonConfig, ParticleConfig, TasepParams, boson_moves
from .qspecial import SignedLogValue, incomplete_4phi3, qpoch

DUALITY_TOL = 1e-8
TASEP_TOL = 1e-10
IDENTITY_TOL = 1e-9
# largest displacement cutoff tried before giving up on a truncated sum
MAX_CUTOFF = 4096


@dataclass
class DualityReport:
    """Outcome of comparing two sides of an identity.

    ``rel_err`` is ``abs_err / max(|lhs|, |rhs|, scale)`` where ``scale`` is
    the size of the largest partial quantity summed (zero unless the sides
    cancel to much smaller values).  ``truncation_bound`` bounds the omitted
    tail relative to the same denominator.
    """

    check: str
    lhs: float
    rhs: float
    abs_err: float
    rel_err: float
    truncation_bound: float
    tolerance: float
    passed: bool
    instance: dict = field(default_factory=dict)
    scale: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, default=_json_default)


def _json_default(obj):
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj)}")


def make_report(check: str, lhs: float, rhs: float, tol: float, bound: float = 0.0, scale: float = 0.0, instance=None) -> DualityReport:
    """Build a report; ``bound`` is the absolute truncation bound."""
    abs_err = abs(lhs - rhs)
    denom = max(abs(lhs), abs(rhs), scale)
    if denom > 0:
        rel, rel_bound = abs_err / denom, bound / denom
    else:
        rel = 0.0 if abs_err == 0 else math.inf
        rel_bound = 0.0 if bound == 0 else math.inf
    passed = bool(rel <= tol and rel_bound <= tol / 10)
    return DualityReport(check, float(lhs), float(rhs), float(abs_err), float(rel), float(rel_bound), tol, passed, dict(instance or {}), float(scale))


# ---------------------------------------------------------------------------
# duality functional and Boson weights


def _positions(x) -> tuple[int, ...]:
    return x.positions if isinstance(x, ParticleConfig) else ParticleConfig(tuple(x)).positions


def _occupations(y) -> tuple[int, ...]:
    return y.occupations if isinstance(y, BosonConfig) else BosonConfig(tuple(y)).occupations


def duality_functional(x, y, q: float) -> float:
    """prod_{i=1}^N q^{y_i (x_i + i)} if y_0 = 0, else 0."""
    xs, ys = _positions(x), _occupations(y)
    if len(ys) != len(xs) + 1:
        raise ParameterError("x has N entries and y must have N + 1")
    if ys[0] > 0:
        return 0.0
    return q ** sum(yi * (xi + i) for i, (xi, yi) in enumerate(zip(xs, ys[1:]), start=1))


def scaled_boson_weight(q: float, a: float, nu: float, s: int, y: int) -> SignedLogValue:
    """a^y phi_{q, q/a, nu}(s | y), regular also at a = 0.

    a^y (q/a)^s (a nu/q;q)_s (q/a;q)_{y-s} = prod_{i<s} (q - a nu q^i) prod_{j<y-s} (a - q^{j+1}).
    """
    if s < 0 or s > y:
        return SignedLogValue(0, -math.inf)
    return scaled_qpoch(q, a * nu, q, s) * scaled_qpoch(a, q, q, y - s) / qpoch(nu, q, y) * q_binomial(q, y, s)


def scaled_boson_moves(y: tuple[int, ...], q: float, a: float, nu: float):
    """Yield (y', a^{y_1+...+y_N} P^Boson_{q,q/a,nu}(y, y'))."""
    N = len(y) - 1
    weights = [[scaled_boson_weight(q, a, nu, s, y[i]).value for s in range(y[i] + 1)] for i in range(1, N + 1)]
    for s in itertools.product(*[range(y[i] + 1) for i in range(1, N + 1)]):
        w = math.prod(weights[i][s[i]] for i in range(N))
        if w == 0.0:
            continue
        new = list(y)
        for i in range(1, N + 1):
            new[i] -= s[i - 1]
            new[i - 1] += s[i - 1]
        yield tuple(new), w


# ---------------------------------------------------------------------------
# TASEP duality


def _phi_inf_cutoff(q, mu, nu, log_weight):
    """phi(.|inf) prefix and a bound on sum_{v > V} phi(v) w^v, w = exp(log_weight)."""
    vals = phi_inf_table(q, mu, nu, tail=1e-300)
    V = vals.size - 1
    r = math.exp(log_weight) * (abs(mu) + max(0.0, -nu) * q**V) / (1 - q ** (V + 1))
    if r >= 1:
        return vals, math.inf
    if vals[V] == 0.0:
        return vals, 0.0
    return vals, math.exp(math.log(abs(vals[V])) + V * log_weight) * r / (1 - r)


def tasep_duality_check(x, y, params: TasepParams, tol: float = TASEP_TOL) -> DualityReport:
    """Compare P^TASEP H and H (P^Boson_{q,mu,nu})^T at (x, y).

    The left side is a direct sum over the next configuration x'; the first
    particle's unbounded jump is cut off with a geometric tail bound.
    """
    xs, ys = _positions(x), _occupations(y)
    q, mu, nu = params.q, params.mu, params.nu
    N = len(xs)
    if len(ys) != N + 1:
        raise ParameterError("x has N entries and y must have N + 1")
    first, tail_first = _phi_inf_cutoff(q, mu, nu, ys[1] * math.log(q))
    laws = [first]
    for i in range(1, N):
        gap = xs[i - 1] - xs[i] - 1
        laws.append(np.array([phi_log(q, mu, nu, v, gap).value for v in range(gap + 1)]))
    terms = []
    for v in itertools.product(*[range(len(law)) for law in laws]):
        w = math.prod(laws[i][v[i]] for i in range(N))
        if w != 0.0:
            xp = tuple(xi + vi for xi, vi in zip(xs, v))
            terms.append(w * duality_functional(xp, ys, q))
    lhs = math.fsum(terms)
    # omitted first-particle jumps times the largest factor the others can contribute
    bound = 0.0
    if ys[0] == 0:
        bound = tail_first * duality_functional(xs, ys, q)
    rhs = math.fsum(w * duality_functional(xs, yp, q) for yp, w in boson_moves(ys, q, mu, nu))
    inst = {"N": N, "k": sum(ys), "x": list(xs), "y": list(ys), "params": params.as_dict()}
    return make_report("tasep-duality", lhs, rhs, tol, bound, 0.0, inst)


# ---------------------------------------------------------------------------
# PushTASEP duality


class _RowCache:
    """Kernel rows P_{ell,g}(0..D) as float arrays."""

    def __init__(self, params: PushParams) -> None:
        self.params = params
        self.rows: dict = {}

    def matrix(self, g: int, D: int) -> np.ndarray:
        key = (g, D)
        if key not in self.rows:
            M = np.zeros((D + 1, D + 1))
            for ell in range(D + 1):
                s, lg = kernel_logrow(self.params, ell, g, D)
                with np.errstate(under="ignore"):
                    M[ell] = s * np.exp(lg)
            self.rows[key] = M
        return self.rows[key]


def _push_expectation(xs, yp, params: PushParams, D: int, rows: _RowCache, first: np.ndarray) -> float:
    """sum over x' with all displacements <= D of P^Push(x, x') H(x', y')."""
    q = params.q
    disp = np.arange(D + 1)
    # dp[l]: weight of paths whose current particle moved by l
    dp = first[: D + 1] * q ** (yp[1] * (xs[0] - disp + 1.0))
    for i in range(1, len(xs)):
        g = xs[i - 1] - xs[i] - 1
        M = rows.matrix(g, D)
        dp = (dp @ M) * q ** (yp[i + 1] * (xs[i] - disp + i + 1.0))
    return math.fsum(dp.tolist())


def push_duality_check(x, y, params: PushParams, tol: float = DUALITY_TOL) -> DualityReport:
    """Compare mu^k P^Push H_k (P^Boson_{q,q/mu,nu})^T with nu^k H_k (P^Boson_{q,q/nu,nu})^T at (x, y).

    The sum over x' is a dynamic program over particles with every
    displacement capped at D.  The omitted part is bounded by the shell of
    paths whose largest displacement equals D times rho/(1 - rho), where
    rho = mu q^{-k} (1 + max(0,-nu)/mu q^D)/(1 - q^{D+1}) dominates the
    growth of the summand per extra unit of displacement.
    """
    xs, ys = _positions(x), _occupations(y)
    q, mu, nu = params.q, params.mu, params.nu
    N, k = len(xs), sum(ys)
    if len(ys) != N + 1:
        raise ParameterError("x has N entries and y must have N + 1")
    if mu >= q**k:
        raise DivergenceError(f"mu={mu} >= q^k={q**k}: the sum over x' diverges")
    inst = {"N": N, "k": k, "x": list(xs), "y": list(ys), "params": params.as_dict()}
    rhs = math.fsum(w * duality_functional(xs, yp, q) for yp, w in scaled_boson_moves(ys, q, nu, nu))
    moves = [(yp, w) for yp, w in scaled_boson_moves(ys, q, mu, nu) if yp[0] == 0]
    if ys[0] > 0 or not moves:
        return make_report("push-duality", 0.0, rhs, tol, 0.0, 0.0, inst)
    rho_inf = mu / q**k
    max_gap = max([xs[i - 1] - xs[i] - 1 for i in range(1, N)] + [0])
    D = int(math.ceil(math.log(tol * 1e-3) / math.log(rho_inf))) + max_gap + 8
    rows = _RowCache(params)
    while True:
        first = phi_inf_table(q, mu, nu, tail=1e-300)
        first = np.concatenate([first, np.zeros(max(0, D + 1 - first.size))])
        total = [w * _push_expectation(xs, yp, params, D, rows, first) for yp, w in moves]
        inner = [abs(w) * _push_expectation(xs, yp, params, D - 1, rows, first) for yp, w in moves]
        shell = abs(math.fsum(abs(t) for t in total) - math.fsum(inner))
        rho = rho_inf * (1 + max(0.0, -nu) / mu * q**D) / (1 - q ** (D + 1))
        lhs = math.fsum(total)
        bound = shell * rho / (1 - rho) if rho < 1 else math.inf
        if bound <= tol / 10 * max(abs(lhs), abs(rhs)) or D >= MAX_CUTOFF:
            break
        D *= 2
    if not math.isfinite(bound):
        raise TruncationError("could not certify the x' truncation")
    return make_report("push-duality", lhs, rhs, tol, bound, 0.0, inst)


def induction_base_check(x1: int, y1: int, params: PushParams, tol: float = 1e-12) -> DualityReport:
    """N = 1 base case: mu^y phi_{q,q/mu,nu}(0|y) sum_d phi(d|inf) q^{y(x-d+1)} = nu^y phi_{q,q/nu,nu}(0|y) q^{y(x+1)}."""
    q, mu, nu = params.q, params.mu, params.nu
    if mu * q ** (-y1) >= 1:
        raise DivergenceError(f"mu q^-y = {mu * q**-y1} >= 1")
    vals, tail = _phi_inf_cutoff(q, mu, nu, -y1 * math.log(q))
    d = np.arange(vals.size)
    with np.errstate(divide="ignore"):
        terms = np.sign(vals) * np.exp(np.log(np.abs(vals)) + y1 * (x1 - d + 1.0) * math.log(q))
    lhs_sum = math.fsum(terms.tolist())
    left = scaled_boson_weight(q, mu, nu, 0, y1).value
    lhs = left * lhs_sum
    rhs = scaled_boson_weight(q, nu, nu, 0, y1).value * q ** (y1 * (x1 + 1))
    bound = abs(left) * tail * q ** (y1 * (x1 + 1))
    inst = {"x1": x1, "y1": y1, "params": params.as_dict()}
    return make_report("induction-base", lhs, rhs, tol, bound, 0.0, inst)


# ---------------------------------------------------------------------------
# main identity and its rational form


def _main_lhs_terms(ell: int, g: int, y: int, q: float, nu: float) -> list[float]:
    return [
        (q_binomial(q, y, t) * scaled_qpoch(nu, q, q, y - t) * qpoch(nu * nu / q, q, t)).value * q ** ((g + 1) * t)
        for t in range(y + 1)
    ]


def _s_prefactor(ell: int, g: int, y: int, s: int, q: float, mu: float, nu: float) -> float:
    """q-binomial(y,s) q^{(g+1-ell)s} mu^{y-s} (q/mu;q)_{y-s} (mu nu/q;q)_s."""
    return (q_binomial(q, y, s) * scaled_qpoch(mu, q, q, y - s) * qpoch(mu * nu / q, q, s)).value * q ** ((g + 1 - ell) * s)


def weighted_kernel_sum(params: PushParams, ell: int, g: int, j: int, rtol: float = 1e-15) -> tuple[float, float]:
    """sum_L q^{-L j} P_{ell,g}(L) and an absolute bound on its truncation error."""
    q, mu = params.q, params.mu
    w = q ** (-j)
    if mu * w >= 1:
        raise DivergenceError(f"mu q^-j = {mu * w} >= 1: the L-sum diverges")
    Lmax = max(ell, g) + int(math.ceil(math.log(rtol) / math.log(mu * w))) + 16
    singular = sum_form_pole(params, ell, g)
    while True:
        s, lg = kernel_logrow(params, ell, g, Lmax)
        L = np.arange(Lmax + 1)
        with np.errstate(under="ignore"):
            terms = s * np.exp(lg - j * L * math.log(q))
        value = math.fsum(terms.tolist())
        if singular:
            # no row bound at a pole of the sum form: use the geometric decay of the last terms
            last = abs(terms[-1])
            bound = last * (mu * w) / (1 - mu * w) * 4
        else:
            bound = tail_bound(params, ell, g, Lmax, w)
        if bound <= rtol * max(abs(value), 1e-300) or Lmax >= 64 * MAX_CUTOFF:
            return value, bound
        Lmax *= 2


def _check_main_params(y: int, params: PushParams) -> None:
    if params.mu >= params.q**y:
        raise DivergenceError(f"mu={params.mu} >= q^y={params.q**y}: the L-sum diverges")


def main_identity_check(ell: int, g: int, y: int, params: PushParams, tol: float = IDENTITY_TOL) -> DualityReport:
    """Both sides of the main identity with the L-sum evaluated from kernel rows."""
    _check_main_params(y, params)
    q, mu, nu = params.q, params.mu, params.nu
    lhs = math.fsum(_main_lhs_terms(ell, g, y, q, nu))
    parts, bound = [], 0.0
    for s in range(y + 1):
        pre = _s_prefactor(ell, g, y, s, q, mu, nu)
        val, b = weighted_kernel_sum(params, ell, g, y - s)
        parts.append(pre * val)
        bound += abs(pre) * b
    rhs = math.fsum(parts)
    scale = max(abs(p) for p in parts)
    inst = {"ell": ell, "g": g, "y": y, "params": params.as_dict()}
    return make_report("main-identity", lhs, rhs, tol, bound, scale, inst)


def heine_kernel_sum(params: PushParams, ell: int, g: int, y: int, s: int) -> float:
    """sum_L q^{-L(y-s)} P_{ell,g}(L) through the terminating Heine-transformed form."""
    q, mu, nu = params.q, params.mu, params.nu
    j = y - s
    terms = []
    for p in range(ell + 1):
        wp = push_weight(params, ell, g, p).value
        if wp == 0.0:
            continue
        outer = q ** (-p * j) * wp * (qpoch(nu * q ** (p - j), q, j) / qpoch(mu * q ** (-j), q, j)).value
        inner = math.fsum(
            (mu * nu * q**g) ** r
            * (qpoch(q ** (-j), q, r) * qpoch(nu * q**p / mu, q, r) / (qpoch(nu * q ** (p - j), q, r) * qpoch(q, q, r))).value
            for r in range(j + 1)
        )
        terms.append(outer * inner)
    return math.fsum(terms)


def heine_identity_check(ell: int, g: int, y: int, params: PushParams, tol: float = IDENTITY_TOL) -> DualityReport:
    """Right side of the main identity: infinite L-sum versus the Heine-transformed finite form."""
    _check_main_params(y, params)
    q, mu, nu = params.q, params.mu, params.nu
    direct, heine, bound = [], [], 0.0
    for s in range(y + 1):
        pre = _s_prefactor(ell, g, y, s, q, mu, nu)
        val, b = weighted_kernel_sum(params, ell, g, y - s)
        direct.append(pre * val)
        heine.append(pre * heine_kernel_sum(params, ell, g, y, s))
        bound += abs(pre) * b
    inst = {"ell": ell, "g": g, "y": y, "params": params.as_dict()}
    scale = max(abs(v) for v in direct + heine)
    return make_report("heine-form", math.fsum(direct), math.fsum(heine), tol, bound, scale, inst)


def rational_identity_terms(ell: int, g: int, y: int, params: PushParams) -> list[float]:
    """Summands (over s, r, p) of the finite triple-sum form of the main identity."""
    q, mu, nu = params.q, params.mu, params.nu
    if nu == 0:
        raise ParameterError("the rational form contains nu^{-1}; use nu != 0")
    out = []
    for s in range(y + 1):
        base = (q_binomial(q, y, s) * qpoch(q / mu, q, y - s) * qpoch(mu * nu / q, q, s)).value * q ** ((g + 1 - ell) * s)
        for p in range(ell + 1):
            wp = push_weight(params, ell, g, p).value
            if wp == 0.0:
                continue
            for r in range(y - s + 1):
                f = phi_log(q, nu * q**p / mu, q / mu, y - s - r, y - s).value
                out.append(base * wp * f * (mu * nu * q ** (g - p)) ** (y - s) * (q**-g / nu) ** (y - s - r))
    return out


def rational_identity_check(ell: int, g: int, y: int, params: PushParams, tol: float = IDENTITY_TOL) -> DualityReport:
    """The finite rational form: no infinite sums, so no truncation."""
    q, nu = params.q, params.nu
    lhs = math.fsum(_main_lhs_terms(ell, g, y, q, nu))
    terms = rational_identity_terms(ell, g, y, params)
    rhs = math.fsum(terms)
    scale = max([abs(t) for t in terms] + [0.0])
    inst = {"ell": ell, "g": g, "y": y, "params": params.as_dict()}
    return make_report("rational-identity", lhs, rhs, tol, 0.0, scale, inst)


# ---------------------------------------------------------------------------
# incomplete 4phi3 identity


def proof10_sides(p: int, ell: int, x: int, gamma: float, k: int, mu: float, q: float) -> tuple[list[float], float]:
    """The four incomplete-4phi3 terms (base 1/q, argument 1/q) and the closed form."""
    Q = 1 / q

    def phi(a, b, c, d, e, f, g):
        return incomplete_4phi3(a, b, c, d, e, f, g, Q, Q, p).value

    den = (mu - q ** (x + 1)) * (gamma - mu * q**k)
    t1 = q ** (k + 1) * (1 - gamma * q**ell) * (1 - mu * q**x) / den * phi(
        q ** (ell + 1), mu * q ** (-x - 1), q**x, gamma * q ** (x - k), mu * q**x, gamma * q**ell, q ** (-k - 1)
    )
    t2 = -q ** (k - x) * (1 - mu * q**x) * (mu - gamma * q ** (ell + x + 1)) / den * phi(
        q**ell, mu * q ** (-x - 1), q**x, gamma * q ** (x - k), mu * q**x, gamma * q ** (ell - 1), q ** (-k - 1)
    )
    t3 = -q ** (-x) * (1 - q ** (k + x + 1)) * (gamma * q**x - q**k) / ((1 - q ** (k + 1)) * (gamma - mu * q**k)) * phi(
        q**ell, mu * q ** (-x - 2), q**x, gamma * q ** (x - k - 1), mu * q ** (x - 1), gamma * q ** (ell - 1), q ** (-k - 2)
    )
    t4 = phi(q**ell, mu * q ** (-x - 2), q**x, gamma * q ** (x - k), mu * q ** (x - 1), gamma * q ** (ell - 1), q ** (-k - 1))
    num = qpoch(q**ell, Q, p) * qpoch(q**x, Q, p + 1) * qpoch(mu * q ** (-x - 1), Q, p + 1) * qpoch(gamma * q ** (x - k), Q, p + 1)
    dnm = qpoch(Q, Q, p) * qpoch(q ** (-k - 1), Q, p + 1) * qpoch(gamma * q ** (ell - 1), Q, p) * qpoch(mu * q ** (x - 1), Q, p)
    closed = q ** (k + 1) * (num / dnm).value / den
    return [t1, t2, t3, t4], closed


def proof10_check(p: int, ell: int, x: int, gamma: float, k: int, mu: float, q: float, tol: float = IDENTITY_TOL) -> DualityReport:
    """Four-term incomplete-4phi3 identity with its closed-form remainder.

    For p >= ell + 1 the closed form vanishes and the four terms cancel, so
    errors are measured against the largest of the four terms.
    """
    terms, closed = proof10_sides(p, ell, x, gamma, k, mu, q)
    lhs = math.fsum(terms)
    inst = {"p": p, "ell": ell, "x": x, "gamma": gamma, "k": k, "mu": mu, "q": q}
    return make_report("proof10", lhs, closed, tol, 0.0, max(abs(t) for t in terms), inst)


# ---------------------------------------------------------------------------
# q-beta-binomial symmetry


def symmetry_check(x: int, y: int, q: float, mu: float, nu: float, tol: float = 1e-11) -> DualityReport:
    """sum_s phi(s|y) q^{sx} = sum_t phi(t|x) q^{ty}."""
    lhs = math.fsum(phi_log(q, mu, nu, s, y).value * q ** (s * x) for s in range(y + 1))
    rhs = math.fsum(phi_log(q, mu, nu, t, x).value * q ** (t * y) for t in range(x + 1))
    return make_report("symmetry", lhs, rhs, tol, 0.0, 0.0, {"x": x, "y": y, "q": q, "mu": mu, "nu": nu})


# ---------------------------------------------------------------------------
# evolution equations of the contour integrals


def evolution_check(y, t: int, params: PushParams, tol: float = IDENTITY_TOL, M: int | None = None) -> DualityReport:
    """mu^k P^Boson_{q,q/mu,nu} v(t+1) = nu^k P^Boson_{q,q/nu,nu} v(t) at the Boson state y.

    v(t; .) is the contour-integral moment formula, read as a function of
    the Boson state through n <-> y.
    """
    from .moments import MomentSpec, boson_to_moment, push_moment_integral

    ys = _occupations(y)
    k = sum(ys)
    q, mu, nu = params.q, params.mu, params.nu
    if mu >= q**k:
        raise DivergenceError(f"mu={mu} >= q^k={q**k}")
    cache: dict = {}

    def v(state, time):
        key = (state, time)
        if key not in cache:
            n = boson_to_moment(state)
            cache[key] = 0.0 if n[-1] == 0 else push_moment_integral(MomentSpec(n, time), params, M=M)
        return cache[key]

    lhs_terms = [w * v(yp, t + 1) for yp, w in scaled_boson_moves(ys, q, mu, nu)]
    rhs_terms = [w * v(yp, t) for yp, w in scaled_boson_moves(ys, q, nu, nu)]
    if ys[0] > 0:
        # the weights carry a^{y_1+...+y_N}; restore the missing a^{y_0}
        lhs_terms = [val * mu ** ys[0] for val in lhs_terms]
        rhs_terms = [val * nu ** ys[0] for val in rhs_terms]
    lhs, rhs = math.fsum(lhs_terms), math.fsum(rhs_terms)
    scale = max(abs(a) for a in lhs_terms + rhs_terms)
    inst = {"y": list(ys), "t": t, "k": k, "params": params.as_dict()}
    return make_report("evolution", lhs, rhs, tol, 0.0, scale, inst)


def boundary_combination(n, i: int, t: int, params: PushParams, M: int | None = None) -> tuple[float, float]:
    """Two-body boundary combination at n_i = n_{i+1} (1-based i) and its largest term."""
    from .moments import MomentSpec, push_moment_integral

    n = tuple(int(v) for v in n)
    if n[i - 1] != n[i]:
        raise ParameterError("the boundary condition needs n_i = n_{i+1}")
    q, nu = params.q, params.nu

    def v(vec):
        if min(vec) < 0:
            return 0.0
        return push_moment_integral(MomentSpec(vec, t, ordered=False), params, M=M)

    def shift(di, dj):
        m = list(n)
        m[i - 1] -= di
        m[i] -= dj
        return tuple(m)

    terms = [
        nu * (1 - q) / (1 - q * nu) * v(shift(1, 1)),
        (q - nu) / (1 - q * nu) * v(shift(0, 1)),
        (1 - q) / (1 - q * nu) * v(shift(0, 0)),
        -v(shift(1, 0)),
    ]
    return math.fsum(terms), max(abs(a) for a in terms)


def boundary_check(n, i: int, t: int, params: PushParams, tol: float = IDENTITY_TOL, M: int | None = None) -> DualityReport:
    """The boundary combination must vanish; reported with lhs = combination, rhs = 0."""
    value, scale = boundary_combination(n, i, t, params, M)
    inst = {"n": list(n), "i": i, "t": t, "params": params.as_dict()}
    # absolute criterion: relative error is measured against a unit scale
    return make_report("boundary", value, 0.0, tol, 0.0, max(1.0, scale), inst)


# ---------------------------------------------------------------------------
# randomized suites


def _random_x(rng: np.random.Generator, N: int) -> tuple[int, ...]:
    xs = [int(rng.integers(-3, 3))]
    for _ in range(1, N):
        xs.append(xs[-1] - 1 - int(rng.integers(0, 4)))
    return tuple(xs)


def _random_y(rng: np.random.Generator, N: int, k: int) -> tuple[int, ...]:
    ys = [0] * (N + 1)
    for site in rng.integers(1, N + 1, size=k):
        ys[int(site)] += 1
    return tuple(ys)


def random_push_instance(rng: np.random.Generator):
    N = int(rng.integers(1, 4))
    k = int(rng.integers(1, 4))
    q = float(rng.uniform(0.3, 0.8))
    mu = 0.5 * q**k
    nu = float(rng.uniform(-0.5, mu))
    return _random_x(rng, N), _random_y(rng, N, k), PushParams(q, mu, nu)


def random_tasep_instance(rng: np.random.Generator):
    N = int(rng.integers(1, 4))
    k = int(rng.integers(1, 4))
    q = float(rng.uniform(0.2, 0.8))
    mu = float(rng.uniform(0.1, 0.9))
    nu = float(rng.uniform(0.0, mu))
    return _random_x(rng, N), _random_y(rng, N, k), TasepParams(q, mu, nu)


def random_identity_instance(rng: np.random.Generator):
    ell, g, y = (int(v) for v in rng.integers(0, 7, size=3))
    q = float(rng.uniform(0.4, 0.8))
    mu = float(rng.uniform(0.2, 0.8)) * q**y
    nu = float(rng.choice([-1, 1])) * float(rng.uniform(0.05, 0.95)) * mu
    return ell, g, y, PushParams(q, mu, nu)


def random_proof10_instance(rng: np.random.Generator):
    p, ell = (int(v) for v in rng.integers(0, 7, size=2))
    x = int(rng.integers(1, 7))
    k = int(rng.integers(0, 4))
    return p, ell, x, float(rng.uniform(0.5, 2.5)), k, float(rng.uniform(0.05, 0.6)), float(rng.uniform(0.3, 0.7))


def run_suite(check: str, count: int = 20, seed: int = 0) -> list[DualityReport]:
    """Randomized instances of one named check with a fixed seed."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        if check == "push-duality":
            x, y, prm = random_push_instance(rng)
            out.append(push_duality_check(x, y, prm))
        elif check == "tasep-duality":
            x, y, prm = random_tasep_instance(rng)
            out.append(tasep_duality_check(x, y, prm))
        elif check == "main-identity":
            out.append(main_identity_check(*random_identity_instance(rng)))
        elif check == "rational-identity":
            out.append(rational_identity_check(*random_identity_instance(rng)))
        elif check == "heine-form":
            out.append(heine_identity_check(*random_identity_instance(rng)))
        elif check == "proof10":
            out.append(proof10_check(*random_proof10_instance(rng)))
        elif check == "symmetry":
            x, y = (int(v) for v in rng.integers(0, 9, size=2))
            q = float(rng.uniform(0.1, 0.9))
            mu = float(rng.uniform(0.05, 0.95))
            nu = float(rng.uniform(-0.9, mu))
            out.append(symmetry_check(x, y, q, mu, nu))
        elif check == "evolution":
            q = float(rng.uniform(0.4, 0.7))
            k = int(rng.integers(1, 3))
            mu = 0.5 * q**k
            prm = PushParams(q, mu, float(rng.uniform(-0.3, mu)))
            N = int(rng.integers(1, 3))
            out.append(evolution_check(_random_y(rng, N, k), int(rng.integers(0, 3)), prm))
        else:
            raise ValueError(f"unknown check {check!r}")
    return out


CHECKS = ("push-duality", "tasep-duality", "main-identity", "rational-identity", "heine-form", "proof10", "evolution", "symmetry")
