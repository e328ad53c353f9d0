"""Discrete and continuous laws used by the particle systems, with samplers.

The q-beta-binomial law phi_{q,mu,nu}(s|y), the q-hypergeometric law
psi_{q,a,b,c}(p), negative binomial, generalized beta of the first kind and
its negative-binomial mixture.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .errors import DomainError, ParameterError, SingularityError, TruncationError
from .qspecial import ONE, ZERO, SignedLogValue, gauss_2f1, qpoch, qpoch_inf

INF = math.inf
# remaining mass below which a discrete inversion sampler stops
SAMPLER_TAIL = 1e-14


# ---------------------------------------------------------------------------
# random streams


def _stream_hash(seed: int, index: int) -> int:
    digest = hashlib.blake2b(f"{seed}:{index}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@dataclass
class RngStream:
    """Counter-based random stream identified by ``(seed, stream_id)``.

    Backed by the Philox generator; equal identifiers give equal draws.
    """

    seed: int
    stream_id: int = 0
    _gen: np.random.Generator | None = field(default=None, init=False, repr=False, compare=False)

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(entropy=int(self.seed) % 2**64, spawn_key=(int(self.stream_id) % 2**64,))
            self._gen = np.random.Generator(np.random.Philox(ss))
        return self._gen

    def spawn(self, index: int) -> "RngStream":
        """Child stream with ``stream_id = hash(seed, stream_id, index)``."""
        return RngStream(self.seed, _stream_hash(self.seed, self.stream_id * 1_000_003 + index))

    def worker(self, worker_index: int) -> "RngStream":
        return RngStream(self.seed, _stream_hash(self.seed, worker_index))

    def uniform(self, size=None):
        return self.generator.random(size)


def as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        return RngStream(0)
    return RngStream(int(rng))


# ---------------------------------------------------------------------------
# q-beta-binomial


@dataclass(frozen=True)
class QBetaBinomialParams:
    """Parameters of phi_{q,mu,nu}(.|y); ``y = math.inf`` for the infinite law."""

    q: float
    mu: float
    nu: float
    y: float = INF
    check: bool = True

    def __post_init__(self) -> None:
        if self.y != INF and (self.y < 0 or int(self.y) != self.y):
            raise ParameterError("y must be a nonnegative integer or inf")
        if self.check and not phi_params_valid(self.q, self.mu, self.nu, self.y):
            raise ParameterError(
                f"(q, mu, nu) = ({self.q}, {self.mu}, {self.nu}) is not an admissible q-beta-binomial family"
            )


def phi_params_valid(q: float, mu: float, nu: float, y: float) -> bool:
    """The two admissible families for phi to be a probability law."""
    if 0 <= q < 1 and 0 <= mu < 1 and nu <= mu:
        return True
    if q > 1 and y != INF:
        m = -math.log(mu) / math.log(q) if mu > 0 else None
        n = -math.log(nu) / math.log(q) if nu > 0 else None
        if m is None or n is None:
            return False
        if abs(m - round(m)) > 1e-9 or abs(n - round(n)) > 1e-9:
            return False
        return round(m) <= round(n) and y <= round(n)
    return False


def scaled_qpoch(c: float, a: float, q: float, n: int) -> SignedLogValue:
    """prod_{i<n} (c - a q^i), which is c^n (a/c;q)_n when c != 0."""
    if n == 0:
        return ONE
    if c != 0:
        return SignedLogValue.from_float(c) ** n * qpoch(a / c, q, n)
    if a == 0:
        return ZERO
    return SignedLogValue.from_float(-a) ** n * SignedLogValue(1, n * (n - 1) / 2 * math.log(q))


def q_binomial(q: float, y: int, s: int) -> SignedLogValue:
    """(q;q)_y / ((q;q)_s (q;q)_{y-s})."""
    return qpoch(q, q, y) / (qpoch(q, q, s) * qpoch(q, q, y - s))


def phi_log(q: float, mu: float, nu: float, s: int, y: float) -> SignedLogValue:
    """phi_{q,mu,nu}(s|y) as a signed log value, no range checks."""
    if s < 0 or (y != INF and s > y):
        return ZERO
    head = scaled_qpoch(mu, nu, q, s)
    if y == INF:
        norm = qpoch_inf(mu, q) / qpoch_inf(nu, q)
        return head / qpoch(q, q, s) * norm
    y = int(y)
    den = qpoch(nu, q, y)
    if den.sign == 0:
        raise SingularityError(f"(nu;q)_y vanishes at nu={nu}, q={q}, y={y}")
    return head * qpoch(mu, q, y - s) / den * q_binomial(q, y, s)


def phi_pmf(params: QBetaBinomialParams, s: int) -> float:
    """phi_{q,mu,nu}(s|y)."""
    return phi_log(params.q, params.mu, params.nu, s, params.y).value


def phi_weight(q: float, mu: float, nu: float, s: int, y: float) -> float:
    """phi_{q,mu,nu}(s|y) for arbitrary real parameters (used by Boson operators)."""
    return phi_log(q, mu, nu, s, y).value


def _phi_inf_logs(q: float, mu: float, nu: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Signs and logs of phi(s|inf) for s = 0..n-1 via term ratios."""
    s = np.arange(n - 1, dtype=float)
    qs = np.power(q, s)
    num = mu - nu * qs
    den = 1.0 - q * qs
    r_sign = np.sign(num) * np.sign(den)
    with np.errstate(divide="ignore"):
        r_log = np.log(np.abs(num)) - np.log(np.abs(den))
    base = qpoch_inf(mu, q) / qpoch_inf(nu, q)
    signs = np.concatenate([[base.sign], base.sign * np.cumprod(r_sign)]).astype(int)
    logs = np.concatenate([[base.log_magnitude], base.log_magnitude + np.cumsum(r_log)])
    logs[signs == 0] = -np.inf
    return signs, logs


def phi_inf_table(q: float, mu: float, nu: float, tail: float = SAMPLER_TAIL, max_terms: int = 10**6) -> np.ndarray:
    """phi(s|inf) for s = 0..S where the remaining mass is below ``tail``.

    The term ratio (mu - nu q^s)/(1 - q^{s+1}) decreases to mu, so once it
    is below one the remaining mass is bounded by a geometric series.
    """
    n = 64
    while True:
        signs, logs = _phi_inf_logs(q, mu, nu, n)
        vals = signs * np.exp(logs)
        s = n - 1
        ratio = abs(mu - nu * q**s) / (1 - q ** (s + 1))
        ratio = max(ratio, mu)
        if ratio < 1:
            bound = abs(vals[-1]) * ratio / (1 - ratio)
            if bound < tail:
                cut = np.nonzero(np.abs(vals) * ratio / (1 - ratio) >= tail)[0]
                stop = (cut[-1] + 2) if cut.size else 1
                return vals[: max(stop, 1)]
        if n >= max_terms:
            raise TruncationError("phi(.|inf) tail could not be certified within max_terms")
        n *= 2


def phi_table(params: QBetaBinomialParams) -> np.ndarray:
    """All atoms phi(0..y|y) (finite y) or a tail-certified prefix (y infinite)."""
    if params.y == INF:
        return phi_inf_table(params.q, params.mu, params.nu)
    return np.array([phi_pmf(params, s) for s in range(int(params.y) + 1)])


def _invert(cdf_vals: np.ndarray, u):
    """Smallest index with cumulative mass >= u (clipped to the table)."""
    cdf = np.cumsum(cdf_vals)
    idx = np.searchsorted(cdf, u, side="left")
    return np.minimum(idx, cdf.size - 1)


def phi_sample(params: QBetaBinomialParams, rng, size=None):
    """Draw from phi(.|y) by inversion of the tabulated CDF."""
    stream = as_stream(rng)
    if params.y == 0:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    table = phi_table(params)
    u = stream.uniform(size)
    out = _invert(table, u)
    return int(out) if size is None else out.astype(np.int64)


# ---------------------------------------------------------------------------
# q-hypergeometric


@dataclass(frozen=True)
class QHypergeomParams:
    """Parameters of psi_{q,a,b,c}; ``ratio`` is c/(ab) and may be given instead of c when a or b is 0."""

    q: float
    a: float
    b: float
    c: float
    ratio: float | None = None

    def __post_init__(self) -> None:
        if self.ratio is None:
            if self.a == 0 or self.b == 0:
                raise ParameterError("give ratio = c/(ab) explicitly when a or b is 0")
            object.__setattr__(self, "ratio", self.c / (self.a * self.b))
        if not (0 < self.q < 1):
            raise ParameterError("q must lie in (0,1)")
        if not (self.a < 1 and self.b < 1):
            raise ParameterError("a and b must be below 1")
        if not (0 < self.ratio < 1):
            raise ParameterError("c/(ab) must lie in (0,1)")
        if not (0 <= self.c < 1):
            raise ParameterError("c must lie in [0,1)")

    @classmethod
    def from_ratio(cls, q: float, a: float, b: float, ratio: float) -> "QHypergeomParams":
        return cls(q, a, b, ratio * a * b, ratio)


def psi_log(q: float, a: float, b: float, z: float, p: int) -> SignedLogValue:
    """psi term with c = z a b: z^p (a,b;q)_p/((q, zab;q)_p) times the normalizer."""
    if p < 0:
        return ZERO
    c = z * a * b
    norm = qpoch_inf(c, q) * qpoch_inf(z, q) / (qpoch_inf(z * b, q) * qpoch_inf(z * a, q))
    term = SignedLogValue(1, p * math.log(z)) * qpoch(a, q, p) * qpoch(b, q, p) / (qpoch(q, q, p) * qpoch(c, q, p))
    return term * norm


def psi_pmf(params: QHypergeomParams, p: int) -> float:
    return psi_log(params.q, params.a, params.b, params.ratio, p).value


def psi_table(params: QHypergeomParams, tail: float = SAMPLER_TAIL) -> np.ndarray:
    """psi(0..P) with certified remaining mass below ``tail``."""
    q, a, b, z = params.q, params.a, params.b, params.ratio
    c = z * a * b
    vals = [psi_pmf(params, 0)]
    m = 0
    while True:
        r = z * (1 - a * q**m) * (1 - b * q**m) / ((1 - q ** (m + 1)) * (1 - c * q**m))
        vals.append(vals[-1] * r)
        m += 1
        # for m large the ratio is monotone towards z; bound by the larger of the two
        rb = max(abs(r), z)
        if rb < 1 and abs(vals[-1]) * rb / (1 - rb) < tail and m > 2:
            return np.array(vals)
        if m > 10**6:
            raise TruncationError("psi tail could not be certified")


def psi_sample(params: QHypergeomParams, rng, size=None):
    stream = as_stream(rng)
    table = psi_table(params)
    out = _invert(table, stream.uniform(size))
    return int(out) if size is None else out.astype(np.int64)


# ---------------------------------------------------------------------------
# negative binomial, generalized beta


def nb_pmf(r: float, p: float, k: int) -> float:
    """(1-p)^r p^k (r)_k / k!."""
    if r < 0 or not (0 <= p < 1):
        raise ParameterError("NB needs r >= 0 and 0 <= p < 1")
    if k < 0:
        return 0.0
    if k == 0:
        return (1 - p) ** r
    if p == 0 or r == 0:
        return 0.0
    lg = r * math.log1p(-p) + k * math.log(p) + special.gammaln(r + k) - special.gammaln(r) - special.gammaln(k + 1)
    return math.exp(lg)


def nb_sample(r: float, p: float, rng, size=None):
    """Negative binomial draw as a gamma-Poisson mixture."""
    stream = as_stream(rng)
    if r == 0 or p == 0:
        return 0 if size is None else np.zeros(size, dtype=np.int64)
    return stream.generator.negative_binomial(r, 1 - p, size)


def genbeta1_pdf(c: float, m: float, n: float, x: float) -> float:
    """Density of the generalized beta law B1(c, m, n) on (0,1)."""
    if not (0 < x < 1):
        raise DomainError("B1 density is supported on (0,1)")
    if not (m > 0 and n > 0 and c < 1):
        raise ParameterError("B1 needs m, n > 0 and c < 1")
    lg = (
        m * math.log1p(-c)
        + special.gammaln(m + n)
        - special.gammaln(m)
        - special.gammaln(n)
        + (m - 1) * math.log(x)
        + (n - 1) * math.log1p(-x)
        - (m + n) * math.log1p(-c * x)
    )
    return math.exp(lg)


def beta_sample(m: float, n: float, rng, size=None):
    """Standard beta draw from two gamma variates."""
    g = as_stream(rng).generator
    a = g.standard_gamma(m, size)
    b = g.standard_gamma(n, size)
    return a / (a + b)


def genbeta1_sample(c: float, m: float, n: float, rng, size=None):
    y = beta_sample(m, n, rng, size)
    return y / (1 - c * (1 - y))


@dataclass(frozen=True)
class NBB1Params:
    r: float
    p: float
    c: float
    m: float
    n: float

    def __post_init__(self) -> None:
        if self.r < 0 or not (0 <= self.p < 1) or not self.c < 1 or self.m <= 0 or self.n <= 0:
            raise ParameterError("NBB1 needs r >= 0, 0 <= p < 1, c < 1, m > 0, n > 0")


def nbb1_pdf(params: NBB1Params, x: float) -> float:
    r, p, c, m, n = params.r, params.p, params.c, params.m, params.n
    base = genbeta1_pdf(c, m, n, x)
    if p == 0 or r == 0:
        return base
    return (1 - p) ** r * base * gauss_2f1(r, m + n, n, p * (1 - x) / (1 - c * x))


def nbb1_sample(params: NBB1Params, rng, size=None):
    """k from NB(r, p), then B1(c, m, n + k)."""
    k = nb_sample(params.r, params.p, rng, size)
    return genbeta1_sample(params.c, params.m, params.n + k, rng, size)


def inverse_draw(x):
    """X -> 1/X, the convention for inverse beta type laws."""
    return 1.0 / x
