"""q-Pochhammer symbols and basic hypergeometric series.

Products and series are accumulated as a sign together with the logarithm
of the magnitude, so that values spanning hundreds of orders of magnitude
can be combined without overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DivergenceError, DomainError, PoleError, SingularityError

# a factor |1 - a q^i| below this (relative) is treated as an exact zero
ZERO_TOL = 1e-14
# an upper parameter within this relative distance of q^{-y} terminates the series
TERMINATION_TOL = 1e-12

_CHUNK = 512


@dataclass(frozen=True)
class TruncationPolicy:
    """Truncation rule for infinite products and series."""

    tail_tol: float = 1e-17
    max_terms: int = 10**6

    def __post_init__(self) -> None:
        if not self.tail_tol > 0:
            raise ValueError("tail_tol must be positive")
        if self.max_terms < 1:
            raise ValueError("max_terms must be at least 1")


DEFAULT_POLICY = TruncationPolicy()


@dataclass(frozen=True)
class SignedLogValue:
    """A real number stored as ``sign * exp(log_magnitude)``.

    Values built by ``from_float`` remember the original float so that
    ``value`` round-trips exactly; arithmetic results do not carry it.
    """

    sign: int
    log_magnitude: float
    exact: float | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if self.sign not in (-1, 0, 1):
            raise ValueError("sign must be -1, 0 or 1")
        if (self.sign == 0) != (self.log_magnitude == -math.inf):
            raise ValueError("sign is 0 exactly when log_magnitude is -inf")

    @classmethod
    def from_float(cls, x: float) -> "SignedLogValue":
        if x == 0:
            return ZERO
        return cls(1 if x > 0 else -1, math.log(abs(x)), float(x))

    @property
    def value(self) -> float:
        if self.sign == 0:
            return 0.0
        if self.exact is not None:
            return self.exact
        return self.sign * math.exp(self.log_magnitude)

    def __float__(self) -> float:
        return self.value

    def __mul__(self, other: "SignedLogValue") -> "SignedLogValue":
        if self.sign == 0 or other.sign == 0:
            return ZERO
        return SignedLogValue(self.sign * other.sign, self.log_magnitude + other.log_magnitude)

    def __truediv__(self, other: "SignedLogValue") -> "SignedLogValue":
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero SignedLogValue")
        if self.sign == 0:
            return ZERO
        return SignedLogValue(self.sign * other.sign, self.log_magnitude - other.log_magnitude)

    def __neg__(self) -> "SignedLogValue":
        return SignedLogValue(-self.sign, self.log_magnitude, None if self.exact is None else -self.exact)

    def __pow__(self, k: int) -> "SignedLogValue":
        if k == 0:
            return ONE
        if self.sign == 0:
            if k < 0:
                raise ZeroDivisionError("negative power of zero")
            return ZERO
        return SignedLogValue(self.sign ** (k % 2) if self.sign < 0 else 1, k * self.log_magnitude)

    def reciprocal(self) -> "SignedLogValue":
        return ONE / self


ZERO = SignedLogValue(0, -math.inf)
ONE = SignedLogValue(1, 0.0)


def log_sum(signs: np.ndarray, logs: np.ndarray) -> SignedLogValue:
    """Sum of ``signs * exp(logs)`` with an exactly rounded inner sum."""
    signs = np.asarray(signs)
    logs = np.asarray(logs, dtype=float)
    keep = signs != 0
    if not np.any(keep):
        return ZERO
    s, lg = signs[keep], logs[keep]
    top = lg.max()
    total = math.fsum((s * np.exp(lg - top)).tolist())
    if total == 0:
        return ZERO
    return SignedLogValue(1 if total > 0 else -1, top + math.log(abs(total)))


def _log_factors(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Sign and log|.| of 1 - x, with near-zero values snapped to zero."""
    d = 1.0 - x
    small = np.abs(x) < 0.5
    logs = np.where(small, np.log1p(-np.where(small, x, 0.0)), 0.0)
    big = ~small
    if np.any(big):
        with np.errstate(divide="ignore"):
            logs[big] = np.log(np.abs(d[big]))
    signs = np.sign(d).astype(int)
    zero = np.abs(d) <= ZERO_TOL * np.maximum(1.0, np.abs(x))
    signs[zero] = 0
    logs[zero] = -np.inf
    return signs, logs


def qpoch(a: float, q: float, n: int) -> SignedLogValue:
    """(a;q)_n for any integer n.

    n >= 1 gives prod_{i=0}^{n-1} (1 - a q^i); n <= -1 gives
    prod_{i=n}^{-1} (1 - a q^i)^{-1}.
    """
    n = int(n)
    if n == 0:
        return ONE
    if n > 0:
        idx = np.arange(n, dtype=float)
    else:
        if q == 0:
            raise SingularityError("negative-index q-Pochhammer symbol needs q != 0")
        idx = np.arange(n, 0, dtype=float)
    with np.errstate(over="ignore"):
        x = a * np.power(float(q), idx) if a != 0 else np.zeros_like(idx)
    signs, logs = _log_factors(x)
    if n > 0:
        if np.any(signs == 0):
            return ZERO
        return SignedLogValue(int(np.prod(signs)), float(np.sum(logs)))
    if np.any(signs == 0):
        raise SingularityError(f"(a;q)_{n} has a vanishing denominator factor at a={a}, q={q}")
    return SignedLogValue(int(np.prod(signs)), -float(np.sum(logs)))


def qpoch_inf(a: float, q: float, policy: TruncationPolicy = DEFAULT_POLICY) -> SignedLogValue:
    """(a;q)_infinity, truncated once |a q^n| < tail_tol."""
    if not abs(q) < 1:
        raise DivergenceError(f"(a;q)_inf needs |q| < 1, got q={q}")
    if a == 0:
        return ONE
    if q == 0:
        return SignedLogValue.from_float(1.0 - a)
    # number of factors until |a q^n| drops below tail_tol
    need = math.log(policy.tail_tol / abs(a)) / math.log(abs(q))
    n = min(policy.max_terms, max(1, int(math.ceil(need)) + 1))
    x = a * np.power(float(q), np.arange(n, dtype=float))
    signs, logs = _log_factors(x)
    if np.any(signs == 0):
        return ZERO
    return SignedLogValue(int(np.prod(signs)), float(np.sum(logs)))


def termination_index(params: Sequence[float], q: float, max_terms: int = DEFAULT_POLICY.max_terms) -> int | None:
    """Smallest y >= 0 with some parameter equal to q^{-y}, or None."""
    best = None
    if q <= 0 or q == 1:
        return None
    lq = math.log(q)
    for a in params:
        if a <= 0:
            continue
        y = round(-math.log(a) / lq)
        if 0 <= y <= max_terms:
            target = q ** (-y)
            if abs(a - target) <= TERMINATION_TOL * target:
                best = y if best is None else min(best, y)
    return best


def _term_logs(upper, lower, q, z, start, stop):
    """Sign/log of the series terms t_n for n in [start, stop), relative to t_start."""
    n = np.arange(start, stop, dtype=float)
    qn = np.power(float(q), n)
    sgn = np.ones(n.size, dtype=int)
    lg = np.zeros(n.size)
    for a in upper:
        s, l = _log_factors(a * qn)
        sgn *= s
        lg += l
    for b in lower:
        s, l = _log_factors(b * qn)
        if np.any(s == 0):
            bad = int(n[np.argmax(s == 0)])
            raise PoleError(f"lower parameter {b} gives a vanishing factor at n={bad}")
        sgn *= s
        lg -= l
    s, l = _log_factors(qn * q)
    sgn *= s
    lg -= l
    if z == 0:
        sgn[:] = 0
        lg[:] = -np.inf
    else:
        sgn *= 1 if z > 0 else -1
        lg += math.log(abs(z))
    # ratios t_{n+1}/t_n -> cumulative terms t_{start+1}, ..., t_stop
    return sgn, lg


def basic_hyp(
    upper: Sequence[float],
    lower: Sequence[float],
    q: float,
    z: float,
    policy: TruncationPolicy = DEFAULT_POLICY,
) -> SignedLogValue:
    """The basic hypergeometric series r_phi_s with r = s + 1.

    Terminating series (an upper parameter equal to q^{-y}) are summed
    exactly through index y; otherwise |q| < 1 and |z| < 1 are required.
    """
    upper = [float(a) for a in upper]
    lower = [float(b) for b in lower]
    if z == 0:
        return ONE
    stop = termination_index(upper, q, policy.max_terms)
    if stop is None and not (abs(q) < 1 and abs(z) < 1):
        raise DivergenceError("series neither terminates nor has |q|, |z| < 1")

    signs = [np.array([1])]
    logs = [np.array([0.0])]
    cur_sign, cur_log = 1, 0.0
    done = 0  # terms t_0..t_done are stored
    peak = 0.0
    limit = stop if stop is not None else policy.max_terms
    while done < limit:
        hi = min(limit, done + _CHUNK)
        rs, rl = _term_logs(upper, lower, q, z, done, hi)
        cs = cur_sign * np.cumprod(rs)
        cl = cur_log + np.cumsum(rl)
        signs.append(cs)
        logs.append(cl)
        done = hi
        cur_sign, cur_log = int(cs[-1]), float(cl[-1])
        if cur_sign == 0:
            break
        finite = cl[cs != 0]
        if finite.size:
            peak = max(peak, float(finite.max()))
        if stop is None and cur_log < peak + math.log(policy.tail_tol) and rl[-1] < 0:
            break
    else:
        if stop is None:
            raise DivergenceError("max_terms reached before the series tail fell below tail_tol")
    return log_sum(np.concatenate(signs), np.concatenate(logs))


def incomplete_4phi3(a, b, c, d, e, f, g, q: float, z: float, p: int) -> SignedLogValue:
    """Partial sum through index p of the 4phi3 series."""
    if p < 0:
        raise ValueError("p must be nonnegative")
    if p == 0:
        return ONE
    rs, rl = _term_logs([a, b, c, d], [e, f, g], q, z, 0, p)
    cs = np.concatenate([[1], np.cumprod(rs)])
    cl = np.concatenate([[0.0], np.cumsum(rl)])
    return log_sum(cs, cl)


def _hyp2f1_series(a: float, b: float, c: float, z: float, max_terms: int = 10**6) -> float:
    terms = [1.0]
    t, running, quiet = 1.0, 1.0, 0
    for k in range(max_terms):
        t *= (a + k) * (b + k) / ((c + k) * (k + 1.0)) * z
        if t == 0.0:
            break
        terms.append(t)
        running += t
        quiet = quiet + 1 if abs(t) < 1e-17 * abs(running) else 0
        if quiet >= 3:
            break
    else:
        raise DivergenceError("2F1 power series did not converge")
    return math.fsum(terms)


def gauss_2f1(a: float, b: float, c: float, z: float) -> float:
    """Gauss hypergeometric function 2F1(a, b; c; z) for real z < 1."""
    if c <= 0 and float(c).is_integer():
        raise DomainError("c must not be a nonpositive integer")
    if z >= 1:
        raise DomainError(f"2F1 evaluated only for z < 1, got z={z}")
    if z == 0:
        return 1.0
    if abs(z) <= 0.8:
        return _hyp2f1_series(a, b, c, z)
    if z > 0:
        # Euler: 2F1(a,b;c;z) = (1-z)^{c-a-b} 2F1(c-a, c-b; c; z)
        return (1.0 - z) ** (c - a - b) * _hyp2f1_series(c - a, c - b, c, z)
    # Pfaff maps z < -0.8 into (0.44, 1)
    w = z / (z - 1.0)
    return (1.0 - z) ** (-a) * gauss_2f1(a, c - b, c, w)


def q_gamma(x: float, q: float) -> float:
    """q-Gamma function (q;q)_inf / (q^x;q)_inf * (1-q)^{1-x}."""
    if not 0 < q < 1:
        raise DomainError("q_gamma needs 0 < q < 1")
    if x <= 0 and float(x).is_integer():
        raise PoleError(f"q_gamma has a pole at x={x}")
    num = qpoch_inf(q, q)
    den = qpoch_inf(q**x, q)
    val = num / den
    return val.sign * math.exp(val.log_magnitude + (1.0 - x) * math.log1p(-q))
