"""Update probabilities of the q-Hahn PushTASEP and their degenerations.

``P_{ell,g}(L)`` is the probability that a particle moves left by ``L``
given that its right neighbour just moved by ``ell`` and the gap before the
move was ``g``.  Two exact representations are provided:

* the finite sum over ``p`` of a q-beta-binomial weight with base ``1/q``
  times a q-hypergeometric weight (defined for all parameters, but with
  signed summands when ``nu > 0``);
* very-well-poised 8phi7 forms, one for ``ell < g`` and one for
  ``ell >= g``, whose summands are all nonnegative in the admissible range.

Scalar evaluators work in :mod:`qhahn.qspecial` arithmetic and serve as
references; whole rows and samplers use the compiled engine.
"""

from __future__ import annotations

import json
import math
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import _fast
from .distributions import as_stream, phi_inf_table, phi_log, psi_log
from .errors import ParameterError, PoleError, TruncationError
from .qspecial import ONE, ZERO, SignedLogValue, qpoch, qpoch_inf

# relative distance of mu*nu to q^j below which the sum form is declared singular
POLE_TOL = 1e-8
# cumulative mass a kernel table must reach
TABLE_TAIL = 1e-12
# rounding floor for the normalization-deficit bound used at sum-form poles
DEFICIT_FLOOR = 1e-13
# tolerance of the cross-check between the two representations
CROSS_CHECK_RTOL = 1e-9


@dataclass(frozen=True)
class PushParams:
    """Parameters (q, mu, nu) with 0 < q < 1, 0 < mu < 1, -1 < nu <= min(mu, sqrt(q))."""

    q: float
    mu: float
    nu: float
    check: bool = field(default=True, compare=False)

    def __post_init__(self) -> None:
        if self.check:
            problem = push_params_problem(self.q, self.mu, self.nu)
            if problem:
                raise ParameterError(problem)

    @classmethod
    def unchecked(cls, q: float, mu: float, nu: float) -> "PushParams":
        """Skip range validation (e.g. to exhibit negative update probabilities)."""
        return cls(q, mu, nu, check=False)

    @property
    def in_range(self) -> bool:
        return push_params_problem(self.q, self.mu, self.nu) is None

    def as_dict(self) -> dict:
        return {"q": self.q, "mu": self.mu, "nu": self.nu}


def push_params_problem(q: float, mu: float, nu: float) -> str | None:
    """Description of the violated constraint, or None when admissible."""
    if not 0 < q < 1:
        return f"q={q} violates 0 < q < 1"
    if not 0 < mu < 1:
        return f"mu={mu} violates 0 < mu < 1"
    if not nu > -1:
        return f"nu={nu} violates nu > -1"
    if nu > mu:
        return f"nu={nu} violates nu <= mu (mu={mu})"
    if nu > math.sqrt(q) * (1 + 1e-15):
        return f"nu={nu} violates nu <= sqrt(q) = {math.sqrt(q)}"
    return None


def support_start(ell: int, g: int) -> int:
    """Smallest L with possibly nonzero P_{ell,g}(L)."""
    return max(0, ell - g)


def _check_indices(ell: int, g: int, L: int | None = None) -> None:
    if ell < 0 or g < 0 or (L is not None and L < 0):
        raise ValueError("ell, g and L must be nonnegative")


# ---------------------------------------------------------------------------
# sum representation


def sum_form_pole(params: PushParams, ell: int, g: int) -> bool:
    """True when mu*nu is within POLE_TOL of q^j, 1 <= j <= ell - g (phi denominator vanishes)."""
    mn = params.mu * params.nu
    if ell <= g or mn <= 0:
        return False
    for j in range(1, ell - g + 1):
        target = params.q**j
        if abs(mn - target) <= POLE_TOL * target:
            return True
    return False


def push_weight(params: PushParams, ell: int, g: int, p: int) -> SignedLogValue:
    """phi_{1/q, q^g, mu nu q^{g-1}}(p | ell): the push part of the update."""
    q, mu, nu = params.q, params.mu, params.nu
    return phi_log(1 / q, q**g, mu * nu * q ** (g - 1), p, ell)


def jump_weight(params: PushParams, g: int, p: int, m: int) -> SignedLogValue:
    """psi_{q, nu q^p/mu, nu q^g, nu^2 q^{g+p}}(m): the free part of the update."""
    q, mu, nu = params.q, params.mu, params.nu
    if nu == 0:
        # q-geometric law mu^m (mu;q)_inf/(q;q)_m
        if m < 0:
            return ZERO
        return SignedLogValue(1, m * math.log(mu)) * qpoch_inf(mu, q) / qpoch(q, q, m)
    return psi_log(q, nu * q**p / mu, nu * q**g, mu, m)


def p_update_sum(params: PushParams, ell: int, g: int, L: int) -> float:
    """P_{ell,g}(L) from the finite sum over the pushed distance p."""
    _check_indices(ell, g, L)
    if sum_form_pole(params, ell, g):
        raise PoleError(
            f"mu*nu={params.mu * params.nu} is at a pole of the sum form for ell={ell}, g={g}; use the 8phi7 form"
        )
    if L < support_start(ell, g):
        return 0.0
    terms = []
    for p in range(min(ell, L) + 1):
        w = push_weight(params, ell, g, p)
        if w.sign == 0:
            continue
        terms.append((w * jump_weight(params, g, p, L - p)).value)
    return math.fsum(terms)


# ---------------------------------------------------------------------------
# 8phi7 representation


def _vwp_terms(sigma: float, uppers: list[float], q: float, z: float, K: int) -> list[float]:
    """Summands k = 0..K of the very-well-poised 8W7 series.

    (sigma;q)_k (1 - sigma q^{2k})/(1 - sigma) is written as
    (sigma q;q)_{k-1} (1 - sigma q^{2k}) so that sigma = 1 is harmless.
    """
    out = []
    for k in range(K + 1):
        if k == 0:
            t = ONE
        else:
            t = qpoch(sigma * q, q, k - 1) * SignedLogValue.from_float(1 - sigma * q ** (2 * k))
        for b in uppers:
            t = t * qpoch(b, q, k) / qpoch(sigma * q / b, q, k)
        t = t / qpoch(q, q, k)
        out.append(t.value * z**k)
    return out


def phi87_parts(params: PushParams, ell: int, g: int, L: int) -> tuple[float, list[float]]:
    """Prefactor and list of 8W7 summands with P_{ell,g}(L) = prefactor * sum(summands)."""
    _check_indices(ell, g, L)
    q, mu, nu = params.q, params.mu, params.nu
    if nu == 0:
        raise ParameterError("the 8phi7 forms need nu != 0; use the sum form")
    if L < support_start(ell, g):
        return 0.0, []
    qp = qpoch
    try:
        pre = qpoch_inf(mu, q) * qpoch_inf(nu * nu * q**g, q) / (qpoch_inf(nu, q) * qpoch_inf(nu * mu * q**g, q))
        if ell < g:
            num = (
                qp(q**g, 1 / q, ell)
                * qp(nu / mu, q, L)
                * qp(nu * q**g, q, L)
                * qp(q ** (1 - g) / nu, q, ell)
                * qp(q ** (1 - g - L) / nu**2, q, ell)
            )
            den = (
                qp(mu * nu * q ** (g - 1), 1 / q, ell)
                * qp(q, q, L)
                * qp(nu * nu * q**g, q, L)
                * qp(q ** (1 - g - L) / nu, q, ell)
                * qp(q ** (1 - g) / nu**2, q, ell)
            )
            sigma = nu * nu * q ** (g - ell - 1)
            uppers = [nu * nu / q, mu * nu * q ** (g - ell), nu, q ** (-L), q ** (-ell)]
            power, K = L, min(ell, L)
        else:
            m = L - ell + g
            num = (
                qp(q**ell, 1 / q, g)
                * qp(nu * q ** (ell - g) / mu, q, m)
                * qp(nu, q, ell - g)
                * qp(nu * q**g, q, m)
                * qp(q ** (-L - g + 1) / nu**2, q, g)
                * qp(q ** (-g + 1) / nu, q, g)
            )
            den = (
                qp(mu * nu, q, g)
                * qp(q, q, m)
                * qp(nu * nu * q**g, q, L)
                * qp(q ** (-L + ell - 2 * g + 1) / nu, q, g)
                * qp(q ** (-ell + 1) / nu**2, q, g)
            )
            sigma = nu * nu * q ** (ell - g - 1)
            uppers = [nu * nu / q, mu * nu, nu * q ** (ell - g), q ** (-L + ell - g), q ** (-g)]
            power, K = m, min(g, m)
        prefactor = (pre * num / den).value * mu**power
    except ZeroDivisionError as exc:
        raise PoleError(f"8phi7 prefactor has a vanishing denominator at ell={ell}, g={g}, L={L}") from exc
    return prefactor, _vwp_terms(sigma, uppers, q, q ** (L + g + 1) / mu, K)


def p_update_phi87(params: PushParams, ell: int, g: int, L: int) -> float:
    """P_{ell,g}(L) from the 8phi7 form matching ``ell < g`` or ``ell >= g``."""
    prefactor, terms = phi87_parts(params, ell, g, L)
    if not terms:
        return 0.0
    return prefactor * math.fsum(terms)


def phi87_removable(params: PushParams, ell: int, g: int) -> bool:
    """True when nu/mu q^j = 1 makes the 8phi7 prefactor 0 and a summand denominator 0.

    This happens for nu = mu (and ell >= g also needs ell = g); the sum form is
    regular there and is used instead.
    """
    if ell > g:
        return False
    return abs(params.nu - params.mu) <= 1e-12 * params.mu


def p_update(params: PushParams, ell: int, g: int, L: int, cross_check: bool = True) -> float:
    """P_{ell,g}(L): sum form for nu <= 0, 8phi7 form (optionally cross-checked) for nu > 0."""
    if params.nu <= 0 or phi87_removable(params, ell, g):
        return p_update_sum(params, ell, g, L)
    value = p_update_phi87(params, ell, g, L)
    if cross_check and not sum_form_pole(params, ell, g):
        other = p_update_sum(params, ell, g, L)
        if abs(value - other) > CROSS_CHECK_RTOL * max(abs(value), abs(other)) + 1e-15:
            raise ArithmeticError(f"kernel representations disagree at ({ell},{g},{L}): {value} vs {other}")
    return value


def p_first(params: PushParams, ell: int) -> float:
    """Jump law phi_{q,mu,nu}(ell | inf) of the first particle."""
    return phi_log(params.q, params.mu, params.nu, ell, math.inf).value


def counterexample_numerator(q: float, mu: float, nu: float) -> float:
    """Rational part of P_{1,1}(1); it can be negative once nu exceeds sqrt(q)."""
    num = mu * (nu**2 - nu + 1) - nu + q * (1 + nu**2 - (mu + 1) * nu)
    return num / ((1 - mu * nu) * (1 - q * nu**2))


def counterexample_normalizer(q: float, mu: float, nu: float) -> float:
    """Positive factor (nu^2 q, mu;q)_inf / (nu mu q, nu;q)_inf relating the closed form to P_{1,1}(1)."""
    val = qpoch_inf(nu * nu * q, q) * qpoch_inf(mu, q) / (qpoch_inf(nu * mu * q, q) * qpoch_inf(nu, q))
    return val.value


# ---------------------------------------------------------------------------
# rows and tables


def kernel_row(params: PushParams, ell: int, g: int, Lmax: int, method: str = "auto") -> np.ndarray:
    """P_{ell,g}(L) for L = 0..Lmax via the compiled engine."""
    signs, logs = kernel_logrow(params, ell, g, Lmax, method)
    with np.errstate(under="ignore"):
        return signs * np.exp(logs)


def kernel_logrow(params: PushParams, ell: int, g: int, Lmax: int, method: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """Signs and log-magnitudes of P_{ell,g}(L), L = 0..Lmax."""
    _check_indices(ell, g, Lmax)
    method = _resolve_method(params, ell, g, method)
    q, mu, nu = float(params.q), float(params.mu), float(params.nu)
    if method == "sum":
        if sum_form_pole(params, ell, g):
            raise PoleError("sum form is singular at these parameters")
        s, lg, pole = _fast.sum_logrow(q, mu, nu, int(ell), int(g), int(Lmax))
    else:
        s, lg, pole = _fast.phi87_logrow(q, mu, nu, int(ell), int(g), int(Lmax))
    if pole:
        raise PoleError(f"{method} form has a vanishing denominator at ell={ell}, g={g}")
    return s, lg


def _resolve_method(params: PushParams, ell: int, g: int, method: str) -> str:
    if method not in ("auto", "sum", "phi87"):
        raise ValueError("method must be auto, sum or phi87")
    if method != "auto":
        if method == "phi87" and params.nu == 0:
            raise ParameterError("the 8phi7 forms need nu != 0")
        return method
    if params.nu <= 0 or phi87_removable(params, ell, g):
        return "sum"
    return "phi87"


def tail_bound(params: PushParams, ell: int, g: int, Lmax: int, weight: float = 1.0) -> float:
    """Upper bound on sum_{L > Lmax} |P_{ell,g}(L)| from the sum form.

    For each pushed distance p the jump weights psi(m) have term ratio
    mu (1 - a q^m)(1 - b q^m)/((1 - q^{m+1})(1 - c q^m)), which for all
    m' >= m is dominated by a constant R(m) < 1 once m is large; the tail
    after m is then at most psi(m) R/(1 - R).  Returns inf when no such
    bound is available (R >= 1, or mu nu at a pole of the sum form).
    With ``weight`` w the bound is on sum_{L > Lmax} w^L |P_{ell,g}(L)|.
    """
    if sum_form_pole(params, ell, g):
        return math.inf
    q, mu, nu = float(params.q), float(params.mu), float(params.nu)
    return float(_fast.row_tail_bound(q, mu, nu, int(ell), int(g), int(Lmax), math.log(weight)))


@dataclass(frozen=True)
class KernelTable:
    """Tabulated row of the update kernel with a certified tail bound."""

    q: float
    mu: float
    nu: float
    ell: int
    g: int
    values: np.ndarray
    method: str
    tail_bound: float

    @property
    def Lmax(self) -> int:
        return self.values.size - 1

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.values)

    def total(self) -> float:
        return math.fsum(self.values.tolist())

    def to_dict(self) -> dict:
        return {
            "q": self.q,
            "mu": self.mu,
            "nu": self.nu,
            "ell": self.ell,
            "g": self.g,
            "method": self.method,
            "values": [[int(L), float(v)] for L, v in enumerate(self.values) if L >= support_start(self.ell, self.g)],
            "tail_bound": self.tail_bound,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _initial_length(params: PushParams, ell: int, g: int, tail: float) -> int:
    # asymptotic decay is mu^L; start past the point where that reaches the tail
    steps = int(math.ceil(math.log(tail) / math.log(params.mu))) if params.mu > 0 else 1
    return support_start(ell, g) + max(ell, g) + steps + 16


def kernel_table(
    params: PushParams,
    ell: int,
    g: int,
    tail: float = TABLE_TAIL,
    method: str = "auto",
    max_length: int = 10**6,
) -> KernelTable:
    """Row of P_{ell,g} extended until the certified remaining mass is below ``tail``.

    ``method="cross-checked"`` evaluates both forms and requires agreement.
    """
    _check_indices(ell, g)
    cross = method == "cross-checked"
    base_method = "auto" if cross else method
    resolved = _resolve_method(params, ell, g, base_method)
    n = _initial_length(params, ell, g, tail)
    singular = sum_form_pole(params, ell, g)
    while True:
        values = kernel_row(params, ell, g, n, resolved)
        if singular:
            # at the measure-zero poles of the sum form no independent bound is
            # available; rely on the normalization and report the deficit
            bound = abs(1.0 - math.fsum(values.tolist()))
            if bound < max(tail, DEFICIT_FLOOR):
                break
        else:
            bound = tail_bound(params, ell, g, n)
        if bound < tail:
            break
        if n >= max_length:
            raise TruncationError(f"kernel tail for ell={ell}, g={g} not below {tail} within {max_length} terms")
        n = min(2 * n, max_length)
    label = resolved
    if cross:
        other = "sum" if resolved == "phi87" else "phi87"
        if not (other == "sum" and sum_form_pole(params, ell, g)) and not (other == "phi87" and params.nu == 0):
            alt = kernel_row(params, ell, g, n, other)
            scale = np.maximum(np.maximum(np.abs(values), np.abs(alt)), 1e-300)
            bad = np.abs(values - alt) > CROSS_CHECK_RTOL * scale + 1e-15
            if np.any(bad):
                L = int(np.argmax(bad))
                raise ArithmeticError(f"representations disagree at L={L}: {values[L]} vs {alt[L]}")
            label = "cross-checked"
    return KernelTable(params.q, params.mu, params.nu, ell, g, values, label, bound)


# ---------------------------------------------------------------------------
# sampling


class _TableCache:
    """Bounded cache of cumulative kernel rows for small (ell, g)."""

    def __init__(self, size: int = 4096) -> None:
        self.size = size
        self._data: OrderedDict = OrderedDict()

    def get(self, params: PushParams, ell: int, g: int) -> np.ndarray:
        key = (params.q, params.mu, params.nu, ell, g)
        hit = self._data.get(key)
        if hit is not None:
            self._data.move_to_end(key)
            return hit
        table = kernel_table(params, ell, g, tail=1e-15)
        cdf = np.cumsum(table.values)
        self._data[key] = cdf
        if len(self._data) > self.size:
            self._data.popitem(last=False)
        return cdf


_CACHE = _TableCache()
# rows with ell, g up to this size are tabulated; larger ones are walked
TABLE_LIMIT = 48


def jump_from_uniform(params: PushParams, ell: int, g: int, u: float) -> int:
    """Smallest L with cumulative P_{ell,g} mass >= u."""
    if params.nu > 0 and (ell > TABLE_LIMIT or g > TABLE_LIMIT) and not phi87_removable(params, ell, g):
        L = int(_fast.sample_phi87(params.q, params.mu, params.nu, int(ell), int(g), float(u)))
        if L >= 0:
            return L
        # 8phi7 prefactor pole (nu = mu q^j): the sum form is regular there
    cdf = _CACHE.get(params, ell, g)
    idx = int(np.searchsorted(cdf, u, side="left"))
    if idx < cdf.size:
        return idx
    # u beyond the tabulated mass (probability below the table tail)
    return cdf.size - 1


def jumps_from_uniforms(params: PushParams, ells: np.ndarray, gs: np.ndarray, us: np.ndarray) -> np.ndarray:
    """Vectorized :func:`jump_from_uniform`."""
    ells = np.asarray(ells, dtype=np.int64)
    gs = np.asarray(gs, dtype=np.int64)
    us = np.asarray(us, dtype=float)
    out = np.empty(ells.size, dtype=np.int64)
    big = (ells > TABLE_LIMIT) | (gs > TABLE_LIMIT)
    if abs(params.nu - params.mu) <= 1e-12 * params.mu:
        big &= ells > gs
    if params.nu > 0 and np.any(big):
        out[big] = _fast.sample_phi87_batch(params.q, params.mu, params.nu, ells[big], gs[big], us[big])
        # 8phi7 prefactor poles (nu = mu q^j) go through the sum-form tables
        big &= out >= 0
    else:
        big[:] = False
    small = np.nonzero(~big)[0]
    if small.size:
        keys = ells[small] * (int(gs[small].max()) + 1) + gs[small]
        uniq, inverse = np.unique(keys, return_inverse=True)
        order = np.argsort(inverse, kind="stable")
        bounds = np.searchsorted(inverse[order], np.arange(uniq.size + 1))
        for j in range(uniq.size):
            sel = small[order[bounds[j] : bounds[j + 1]]]
            cdf = _CACHE.get(params, int(ells[sel[0]]), int(gs[sel[0]]))
            idx = np.searchsorted(cdf, us[sel], side="left")
            out[sel] = np.minimum(idx, cdf.size - 1)
    return out


def sample_jump(params: PushParams, ell: int, g: int, rng) -> int:
    """Draw L from P_{ell,g} by sequential CDF inversion."""
    return jump_from_uniform(params, ell, g, float(as_stream(rng).uniform()))


def first_jump_cdf(params: PushParams) -> np.ndarray:
    return np.cumsum(phi_inf_table(params.q, params.mu, params.nu))


def sample_first(params: PushParams, rng, size=None):
    """Draw the first-particle jump from phi_{q,mu,nu}(.|inf)."""
    cdf = first_jump_cdf(params)
    u = as_stream(rng).uniform(size)
    idx = np.minimum(np.searchsorted(cdf, u, side="left"), cdf.size - 1)
    return int(idx) if size is None else idx.astype(np.int64)


# ---------------------------------------------------------------------------
# degenerations


def kernel_nu0(params: PushParams, ell: int, g: int, L: int) -> float:
    """P_{ell,g}(L) at nu = 0 (geometric q-PushTASEP), single-sum formula."""
    _check_indices(ell, g, L)
    q, mu = params.q, params.mu
    Q = 1 / q
    total = []
    for p in range(min(ell, L) + 1):
        t = (
            qpoch(q**g, Q, ell - p)
            * qpoch(Q, Q, ell)
            / (qpoch(q, q, L - p) * qpoch(Q, Q, p) * qpoch(Q, Q, ell - p))
        )
        if t.sign == 0:
            continue
        total.append(t.value * q ** (g * p) * mu ** (L - p))
    return qpoch_inf(mu, q).value * math.fsum(total)


def kernel_geometric(mu: float, ell: int, g: int, L: int) -> float:
    """P_{ell,g}(L) at q = nu = 0: push to order, then a geometric(mu) jump."""
    _check_indices(ell, g, L)
    start = support_start(ell, g)
    if L < start:
        return 0.0
    return (1 - mu) * mu ** (L - start)


def gb_pmf(alpha: float, beta: float, k: int) -> float:
    """Geometric-Bernoulli law: beta at 0, (1 - beta)(1 - alpha) alpha^{k-1} at k >= 1."""
    if k < 0:
        return 0.0
    if k == 0:
        return beta
    return (1 - beta) * (1 - alpha) * alpha ** (k - 1)


def q0_params_valid(mu: float, nu: float) -> bool:
    """Nonnegativity region of the q = 0 kernel."""
    if -1 <= nu <= 0 and 0 <= mu < 1:
        return True
    return 0 < nu < 1 and nu / (1 - nu + nu * nu) <= mu < 1


def q0_first_beta(mu: float, nu: float) -> float:
    """Zero-jump probability of the first particle at q = 0."""
    return (1 - mu) / (1 - nu)


def kernel_q0_case(mu: float, nu: float, ell: int, g: int) -> tuple[float, int]:
    """(beta, shift) with P_{ell,g}(L) = gB(mu, beta; L - shift) at q = 0."""
    if ell < g:
        return (1 - mu) / (1 - nu), 0
    if ell > g:
        return (1 - mu) / (1 - mu * nu), ell - g
    if ell > 0:
        return (1 - mu) / ((1 - nu) * (1 - mu * nu)), 0
    return (1 - mu) * (1 + nu) / (1 - mu * nu), 0


def kernel_q0(mu: float, nu: float, ell: int, g: int, L: int, check: bool = True) -> float:
    """P_{ell,g}(L) at q = 0 from the four-case geometric-Bernoulli table."""
    _check_indices(ell, g, L)
    if check and not q0_params_valid(mu, nu):
        raise ParameterError(
            f"(mu, nu) = ({mu}, {nu}) outside -1<=nu<=0, 0<=mu<1 or 0<nu<1, nu/(1-nu+nu^2)<=mu<1"
        )
    beta, shift = kernel_q0_case(mu, nu, ell, g)
    return gb_pmf(mu, beta, L - shift)


def gb_sample_from_uniform(alpha: float, beta: float, u):
    """Inverse CDF of gB(alpha, beta) at uniforms u."""
    u = np.asarray(u, dtype=float)
    out = np.zeros(u.shape, dtype=np.int64)
    move = u >= beta
    if alpha > 0:
        # conditional on moving, k - 1 is geometric: P(k - 1 >= j) = alpha^j
        w = (u[move] - beta) / (1 - beta)
        with np.errstate(divide="ignore"):
            extra = np.floor(np.log1p(-w) / math.log(alpha))
        out[move] = 1 + np.maximum(extra, 0).astype(np.int64)
    else:
        out[move] = 1
    return out
