"""Discrete-time particle systems: q-Hahn PushTASEP and TASEP, the q-Hahn
Boson operator, the q = 0 geometric-Bernoulli PushTASEP and the beta-limit
processes Z and its reciprocal.

Randomness is organised per particle: particle ``i`` of a run draws its
uniforms from ``stream.spawn(i)``, one per time step.  Runs with more
particles therefore reproduce the first particles of smaller runs exactly.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .distributions import (
    RngStream,
    as_stream,
    phi_inf_table,
    phi_log,
    phi_params_valid,
)
from .errors import ParameterError, TieError
from .kernel import (
    PushParams,
    gb_sample_from_uniform,
    jump_from_uniform,
    jumps_from_uniforms,
    kernel_q0_case,
    q0_first_beta,
    q0_params_valid,
)

# relative closeness of Z(i,t-1) and Z(i-1,t) treated as a tie
TIE_TOL = 1e-14
# full trajectories are stored up to this many (time, particle) cells
FULL_STORAGE_CELLS = 10**6


# ---------------------------------------------------------------------------
# configurations


@dataclass(frozen=True)
class ParticleConfig:
    """Positions x_1 > x_2 > ... > x_N, with an implicit x_0 = +inf."""

    positions: tuple[int, ...]

    def __post_init__(self) -> None:
        pos = tuple(int(x) for x in self.positions)
        object.__setattr__(self, "positions", pos)
        if any(a <= b for a, b in zip(pos, pos[1:])):
            raise ParameterError(f"positions must be strictly decreasing, got {pos}")

    @classmethod
    def step(cls, N: int) -> "ParticleConfig":
        """Step initial data x_i = -i."""
        return cls(tuple(-i for i in range(1, N + 1)))

    @property
    def N(self) -> int:
        return len(self.positions)

    def gaps(self) -> list[int]:
        """g_i = x_{i-1} - x_i - 1 for i >= 2 (None-free; the first gap is infinite)."""
        x = self.positions
        return [x[i - 1] - x[i] - 1 for i in range(1, len(x))]

    def __getitem__(self, i: int) -> int:
        """x_i with 1-based labels."""
        return self.positions[i - 1]


@dataclass(frozen=True)
class BosonConfig:
    """Occupations (y_0, ..., y_N) of the Boson sites."""

    occupations: tuple[int, ...]

    def __post_init__(self) -> None:
        occ = tuple(int(y) for y in self.occupations)
        object.__setattr__(self, "occupations", occ)
        if any(y < 0 for y in occ):
            raise ParameterError("occupations must be nonnegative")

    @property
    def N(self) -> int:
        return len(self.occupations) - 1

    @property
    def level(self) -> int:
        return sum(self.occupations)


def x_observable(config: ParticleConfig, i: int, q: float) -> float:
    """X(i,t) = q^{-(x_i + i)}."""
    return q ** (-(config[i] + i))


def _particle_streams(rng, N: int) -> list[RngStream]:
    base = as_stream(rng)
    return [base.spawn(i) for i in range(1, N + 1)]


# ---------------------------------------------------------------------------
# q-Hahn PushTASEP


def push_update(config: ParticleConfig, params: PushParams, uniforms) -> ParticleConfig:
    """One PushTASEP step driven by one uniform per particle."""
    x = list(config.positions)
    cdf = np.cumsum(phi_inf_table(params.q, params.mu, params.nu))
    ell = int(min(np.searchsorted(cdf, uniforms[0], side="left"), cdf.size - 1))
    new = [x[0] - ell]
    for i in range(1, len(x)):
        g = x[i - 1] - x[i] - 1
        L = jump_from_uniform(params, ell, g, float(uniforms[i]))
        new.append(x[i] - L)
        ell = L
    return ParticleConfig(tuple(new))


def push_step(config: ParticleConfig, params: PushParams, rng) -> ParticleConfig:
    """One step of the q-Hahn PushTASEP.

    The first particle jumps left by a draw from phi_{q,mu,nu}(.|inf); then,
    for i = 2, 3, ..., particle i jumps left by L ~ P_{ell,g} where ell is
    the displacement just made by particle i-1 and g the gap before it.
    """
    streams = _particle_streams(rng, config.N)
    return push_update(config, params, [s.uniform() for s in streams])


@dataclass
class Trajectory:
    """Recorded positions (or Z values) at the listed times."""

    times: np.ndarray
    values: np.ndarray  # shape (len(times), N)
    label: str = "x"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "i", self.label])
        for row, t in zip(self.values, self.times):
            for i, v in enumerate(row, start=1):
                w.writerow([int(t), i, v if self.label == "x" else repr(float(v))])
        return buf.getvalue()


def _record_stride(N: int, T: int, record_every: int | None) -> int:
    if record_every is not None:
        return max(1, int(record_every))
    cells = (T + 1) * max(N, 1)
    return 1 if cells <= FULL_STORAGE_CELLS else math.ceil(cells / FULL_STORAGE_CELLS)


def push_simulate(N: int, T: int, params: PushParams, seed, record_every: int | None = None) -> Trajectory:
    """Run the PushTASEP from step initial data x_i(0) = -i for T steps."""
    streams = _particle_streams(seed, N)
    uniforms = np.stack([s.uniform(T) for s in streams], axis=1) if T > 0 else np.zeros((0, N))
    stride = _record_stride(N, T, record_every)
    config = ParticleConfig.step(N)
    times, rows = [0], [config.positions]
    for t in range(1, T + 1):
        config = push_update(config, params, uniforms[t - 1])
        if t % stride == 0 or t == T:
            times.append(t)
            rows.append(config.positions)
    return Trajectory(np.array(times), np.array(rows, dtype=np.int64).reshape(len(times), N))


def push_simulate_batch(N: int, T: int, params: PushParams, paths: int, seed, start=None) -> np.ndarray:
    """Positions at times 0..T for many independent paths, shape (paths, T+1, N).

    Path ``p`` of particle ``i`` uses the ``p``-th row of uniforms from
    ``stream.spawn(i)``.
    """
    streams = _particle_streams(seed, N)
    U = [s.uniform((paths, T)) for s in streams]
    out = np.empty((paths, T + 1, N), dtype=np.int64)
    x0 = np.array(ParticleConfig.step(N).positions if start is None else start, dtype=np.int64)
    out[:, 0, :] = x0
    cdf = np.cumsum(phi_inf_table(params.q, params.mu, params.nu))
    for t in range(1, T + 1):
        prev = out[:, t - 1, :]
        ell = np.minimum(np.searchsorted(cdf, U[0][:, t - 1], side="left"), cdf.size - 1).astype(np.int64)
        out[:, t, 0] = prev[:, 0] - ell
        for i in range(1, N):
            g = prev[:, i - 1] - prev[:, i] - 1
            L = jumps_from_uniforms(params, ell, g, U[i][:, t - 1])
            out[:, t, i] = prev[:, i] - L
            ell = L
    return out


# ---------------------------------------------------------------------------
# q-Hahn TASEP


@dataclass(frozen=True)
class TasepParams:
    """Parameters of the q-Hahn TASEP: 0 < q < 1, 0 <= nu <= mu < 1."""

    q: float
    mu: float
    nu: float

    def __post_init__(self) -> None:
        if not 0 < self.q < 1:
            raise ParameterError(f"q={self.q} violates 0 < q < 1")
        if not 0 <= self.nu <= self.mu < 1:
            raise ParameterError(f"(mu, nu) = ({self.mu}, {self.nu}) violates 0 <= nu <= mu < 1")

    def as_dict(self) -> dict:
        return {"q": self.q, "mu": self.mu, "nu": self.nu}


@lru_cache(maxsize=4096)
def _phi_cdf(q: float, mu: float, nu: float, y: int) -> np.ndarray:
    if y < 0:
        return np.cumsum(phi_inf_table(q, mu, nu))
    return np.cumsum([phi_log(q, mu, nu, s, y).value for s in range(y + 1)])


def _phi_draw(q, mu, nu, y: int, u: float) -> int:
    cdf = _phi_cdf(q, mu, nu, y)
    return int(min(np.searchsorted(cdf, u, side="left"), cdf.size - 1))


def tasep_update(config: ParticleConfig, params: TasepParams, uniforms) -> ParticleConfig:
    """Parallel TASEP update: every gap is read from the pre-step configuration."""
    x = config.positions
    v = [_phi_draw(params.q, params.mu, params.nu, -1, uniforms[0])]
    for i in range(1, len(x)):
        v.append(_phi_draw(params.q, params.mu, params.nu, x[i - 1] - x[i] - 1, uniforms[i]))
    return ParticleConfig(tuple(xi + vi for xi, vi in zip(x, v)))


def tasep_step(config: ParticleConfig, params: TasepParams, rng) -> ParticleConfig:
    """One step of the q-Hahn TASEP: x_i moves right by v_i ~ phi(.|gap_i), in parallel."""
    streams = _particle_streams(rng, config.N)
    return tasep_update(config, params, [s.uniform() for s in streams])


def tasep_simulate(N: int, T: int, params: TasepParams, seed, record_every: int | None = None) -> Trajectory:
    streams = _particle_streams(seed, N)
    uniforms = np.stack([s.uniform(T) for s in streams], axis=1) if T > 0 else np.zeros((0, N))
    stride = _record_stride(N, T, record_every)
    config = ParticleConfig.step(N)
    times, rows = [0], [config.positions]
    for t in range(1, T + 1):
        config = tasep_update(config, params, uniforms[t - 1])
        if t % stride == 0 or t == T:
            times.append(t)
            rows.append(config.positions)
    return Trajectory(np.array(times), np.array(rows, dtype=np.int64).reshape(len(times), N))


def tasep_simulate_batch(N: int, T: int, params: TasepParams, paths: int, seed) -> np.ndarray:
    """TASEP positions at times 0..T, shape (paths, T+1, N)."""
    streams = _particle_streams(seed, N)
    U = [s.uniform((paths, T)) for s in streams]
    out = np.empty((paths, T + 1, N), dtype=np.int64)
    out[:, 0, :] = np.array(ParticleConfig.step(N).positions)
    q, mu, nu = params.q, params.mu, params.nu
    for t in range(1, T + 1):
        prev = out[:, t - 1, :]
        cdf = _phi_cdf(q, mu, nu, -1)
        v = np.minimum(np.searchsorted(cdf, U[0][:, t - 1], side="left"), cdf.size - 1)
        out[:, t, 0] = prev[:, 0] + v
        for i in range(1, N):
            gap = prev[:, i - 1] - prev[:, i] - 1
            v = np.zeros(paths, dtype=np.int64)
            for y in np.unique(gap):
                sel = gap == y
                cdf = _phi_cdf(q, mu, nu, int(y))
                v[sel] = np.minimum(np.searchsorted(cdf, U[i][sel, t - 1], side="left"), cdf.size - 1)
            out[:, t, i] = prev[:, i] + v
    return out


# ---------------------------------------------------------------------------
# q-Hahn Boson operator


def boson_states(N: int, k: int) -> list[tuple[int, ...]]:
    """All (y_0, ..., y_N) with nonnegative entries summing to k, in lexicographic order."""
    out = []
    for cut in itertools.combinations(range(k + N), N):
        prev, ys = -1, []
        for c in cut:
            ys.append(c - prev - 1)
            prev = c
        ys.append(k + N - 1 - prev)
        out.append(tuple(ys))
    return sorted(out)


def boson_moves(y: tuple[int, ...], q: float, alpha: float, nu: float):
    """Yield (y', weight) of the Boson operator from y.

    s_i ~ phi_{q,alpha,nu}(.|y_i) particles move from site i to i-1 for all
    i simultaneously, each law reading the occupation before the step.
    """
    N = len(y) - 1
    weights = []
    for i in range(1, N + 1):
        weights.append([phi_log(q, alpha, nu, s, y[i]).value for s in range(y[i] + 1)])
    for s in itertools.product(*[range(y[i] + 1) for i in range(1, N + 1)]):
        w = 1.0
        for i in range(N):
            w *= weights[i][s[i]]
        if w == 0.0:
            continue
        new = list(y)
        for i in range(1, N + 1):
            new[i] -= s[i - 1]
            new[i - 1] += s[i - 1]
        yield tuple(new), w


def boson_apply(f, y: tuple[int, ...], q: float, alpha: float, nu: float) -> float:
    """(P^Boson f)(y) for a function f on occupation tuples."""
    return math.fsum(w * f(yp) for yp, w in boson_moves(tuple(y), q, alpha, nu))


@dataclass
class BosonMatrix:
    """Dense q-Hahn Boson transition matrix on the level-k sector."""

    N: int
    k: int
    q: float
    alpha: float
    nu: float
    states: list[tuple[int, ...]]
    matrix: np.ndarray
    index: dict = field(default_factory=dict)

    def row_sums(self) -> np.ndarray:
        return self.matrix.sum(axis=1)

    def entry(self, y, y2) -> float:
        return float(self.matrix[self.index[tuple(y)], self.index[tuple(y2)]])


def boson_matrix(N: int, k: int, q: float, alpha: float, nu: float) -> BosonMatrix:
    """Matrix of the q-Hahn Boson operator on {y : y_0 + ... + y_N = k}; alpha is arbitrary."""
    states = boson_states(N, k)
    index = {s: j for j, s in enumerate(states)}
    M = np.zeros((len(states), len(states)))
    for j, y in enumerate(states):
        for yp, w in boson_moves(y, q, alpha, nu):
            M[j, index[yp]] += w
    return BosonMatrix(N, k, q, alpha, nu, states, M, index)


# ---------------------------------------------------------------------------
# q = 0 geometric-Bernoulli PushTASEP


def q0_push_update(config: ParticleConfig, mu: float, nu: float, uniforms) -> ParticleConfig:
    x = config.positions
    ell = int(gb_sample_from_uniform(mu, q0_first_beta(mu, nu), uniforms[0]))
    new = [x[0] - ell]
    for i in range(1, len(x)):
        g = x[i - 1] - x[i] - 1
        beta, shift = kernel_q0_case(mu, nu, ell, g)
        L = shift + int(gb_sample_from_uniform(mu, beta, uniforms[i]))
        new.append(x[i] - L)
        ell = L
    return ParticleConfig(tuple(new))


def q0_push_step(config: ParticleConfig, mu: float, nu: float, rng) -> ParticleConfig:
    """One step of the q = 0 PushTASEP with geometric-Bernoulli update laws."""
    if not q0_params_valid(mu, nu):
        raise ParameterError(f"(mu, nu) = ({mu}, {nu}) outside the q = 0 nonnegativity region")
    streams = _particle_streams(rng, config.N)
    return q0_push_update(config, mu, nu, [s.uniform() for s in streams])


# ---------------------------------------------------------------------------
# beta limit


@dataclass(frozen=True)
class BetaParams:
    """Parameters (mu_bar, nu_bar) with 0 < mu_bar < nu_bar and nu_bar >= 1/2."""

    mu_bar: float
    nu_bar: float

    def __post_init__(self) -> None:
        if not 0 < self.mu_bar < self.nu_bar:
            raise ParameterError(f"(mu_bar, nu_bar) = ({self.mu_bar}, {self.nu_bar}) violates 0 < mu_bar < nu_bar")
        if self.nu_bar < 0.5:
            raise ParameterError(f"nu_bar={self.nu_bar} violates nu_bar >= 1/2")

    def scaled(self, eps: float) -> PushParams:
        """q = e^{-eps}, mu = e^{-mu_bar eps}, nu = e^{-nu_bar eps}."""
        return PushParams(math.exp(-eps), math.exp(-self.mu_bar * eps), math.exp(-self.nu_bar * eps))

    def as_dict(self) -> dict:
        return {"mu_bar": self.mu_bar, "nu_bar": self.nu_bar}


@dataclass
class ZState:
    """Row Z(1..N, t) of the beta-limit process, possibly for many paths (last axis is i)."""

    values: np.ndarray
    t: int = 0
    reciprocal: bool = False

    @classmethod
    def initial(cls, N: int, paths: int | None = None, reciprocal: bool = False) -> "ZState":
        shape = (N,) if paths is None else (paths, N)
        return cls(np.ones(shape), 0, reciprocal)

    @property
    def N(self) -> int:
        return self.values.shape[-1]


def _nbb1_draw(gen: np.random.Generator, r: float, p, c, m: float, n, size):
    """NBB1(r, p, c, m, n) draws with a fixed number of variates per draw."""
    if r > 0:
        k = gen.negative_binomial(r, 1.0 - np.asarray(p, dtype=float), size)
    else:
        gen.random(size)  # keep the stream consumption independent of r
        k = np.zeros(size, dtype=np.int64)
    a = gen.standard_gamma(m, size)
    b = gen.standard_gamma(np.asarray(n, dtype=float) + k, size)
    y = a / (a + b)
    # B1 is supported on (0,1); c -> 1 can round the transform just above 1
    return np.minimum(y / (1.0 - np.asarray(c) * (1.0 - y)), 1.0)


def _check_ties(left, up, tie: str):
    close = np.abs(left - up) < TIE_TOL * np.maximum(np.abs(left), np.abs(up))
    if np.any(close) and tie != "limit":
        raise TieError("Z(i,t-1) and Z(i-1,t) coincide; pass tie='limit' to use the limiting law")
    return close


def z_step(state: ZState, params: BetaParams, rng, tie: str = "error") -> ZState:
    """Advance Z(., t-1) to Z(., t) by the NBB1 multiplicative recursion.

    Z(1,t) = Z(1,t-1) B1(0, mu_bar, nu_bar - mu_bar); for i > 1 the factor
    depends on which of Z(i,t-1) and Z(i-1,t) is smaller.
    """
    if state.reciprocal:
        raise ValueError("z_step expects a Z state, not its reciprocal")
    gen = as_stream(rng).generator
    mb, nb = params.mu_bar, params.nu_bar
    r = 2 * nb - 1
    prev = np.asarray(state.values, dtype=float)
    lead = prev.shape[:-1]
    new = np.empty_like(prev)
    a = gen.standard_gamma(mb, lead)
    b = gen.standard_gamma(nb - mb, lead)
    new[..., 0] = prev[..., 0] * (a / (a + b))
    for i in range(1, prev.shape[-1]):
        left = prev[..., i]  # Z(i, t-1)
        up = new[..., i - 1]  # Z(i-1, t)
        diag = prev[..., i - 1]  # Z(i-1, t-1)
        close = _check_ties(left, up, tie)
        case1 = left < up
        with np.errstate(divide="ignore", invalid="ignore"):
            p1 = (1 / up - 1 / diag) / (1 / left - 1 / diag)
            p2 = (1 / left - 1 / diag) / (1 / up - 1 / diag)
        p = np.where(case1, p1, p2)
        p = np.where(np.isfinite(p), np.clip(p, 0.0, 1.0 - 1e-16), 0.0)
        c = np.where(case1, left / up, up / left)
        n = np.where(case1, nb - mb, nb)
        base = np.where(case1, left, up)
        draw = _nbb1_draw(gen, r, p, np.where(close, 0.0, c), mb, n, lead)
        val = base * draw
        if np.any(close):
            # limiting law at a tie: Z(i-1,t) B1(Z(i-1,t)/Z(i-1,t-1), mu_bar, 2 nu_bar - 1)
            lim = up.copy() if np.ndim(up) else np.array(up)
            if r > 0:
                cc = up / diag
                a = gen.standard_gamma(mb, lead)
                b = gen.standard_gamma(r, lead)
                yy = a / (a + b)
                lim = up * np.minimum(yy / (1.0 - cc * (1.0 - yy)), 1.0)
            val = np.where(close, lim, val)
        new[..., i] = val
    return ZState(new, state.t + 1, False)



def ztilde_step(state: ZState, params: BetaParams, rng, tie: str = "error") -> ZState:
    """Advance the reciprocal process Z~ = 1/Z by its convex recursion.

    Z~(1,t) = Z~(1,t-1) / Beta(mu_bar, nu_bar - mu_bar); for i > 1,
    Z~(i,t) = Y Z~(big) + (1 - Y) Z~(small) with Y an inverse
    negative-binomial-beta draw, where "big" is the larger of Z~(i,t-1)
    and Z~(i-1,t).
    """
    if not state.reciprocal:
        raise ValueError("ztilde_step expects a reciprocal state")
    gen = as_stream(rng).generator
    mb, nb = params.mu_bar, params.nu_bar
    r = 2 * nb - 1
    prev = np.asarray(state.values, dtype=float)
    lead = prev.shape[:-1]
    new = np.empty_like(prev)
    a = gen.standard_gamma(mb, lead)
    b = gen.standard_gamma(nb - mb, lead)
    new[..., 0] = prev[..., 0] * ((a + b) / a)
    for i in range(1, prev.shape[-1]):
        left = prev[..., i]  # Z~(i, t-1)
        up = new[..., i - 1]  # Z~(i-1, t)
        diag = prev[..., i - 1]  # Z~(i-1, t-1)
        close = _check_ties(left, up, tie)
        case1 = left > up
        with np.errstate(divide="ignore", invalid="ignore"):
            p1 = (up - diag) / (left - diag)
            p2 = (left - diag) / (up - diag)
        p = np.where(case1, p1, p2)
        p = np.where(np.isfinite(p), np.clip(p, 0.0, 1.0 - 1e-16), 0.0)
        n = np.where(case1, nb - mb, nb)
        yv = _nbb1_draw(gen, r, p, 0.0, mb, n, lead)
        ytil = 1.0 / yv
        big = np.where(case1, left, up)
        small = np.where(case1, up, left)
        val = ytil * big + (1.0 - ytil) * small
        if np.any(close):
            lim = up.copy() if np.ndim(up) else np.array(up)
            if r > 0:
                cc = diag / up  # Z(i-1,t)/Z(i-1,t-1) in reciprocal variables
                aa = gen.standard_gamma(mb, lead)
                bb = gen.standard_gamma(r, lead)
                yy = aa / (aa + bb)
                lim = up * (1.0 - cc * (1.0 - yy)) / yy
            val = np.where(close, lim, val)
        new[..., i] = val
    return ZState(new, state.t + 1, True)


def z_simulate(N: int, T: int, params: BetaParams, seed, paths: int | None = None, tie: str = "error", reciprocal: bool = False) -> np.ndarray:
    """Z (or Z~) rows at times 0..T; shape (T+1, N) or (paths, T+1, N)."""
    stream = as_stream(seed)
    state = ZState.initial(N, paths, reciprocal)
    rows = [state.values.copy()]
    step = ztilde_step if reciprocal else z_step
    for t in range(1, T + 1):
        state = step(state, params, stream.spawn(t), tie)
        rows.append(state.values.copy())
    return np.stack(rows, axis=-2)


def phi_law_valid(q: float, mu: float, nu: float) -> bool:
    return phi_params_valid(q, mu, nu, math.inf)
