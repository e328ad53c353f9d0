"""Nested contour-integral q-moment formulas evaluated by trapezoid
quadrature on concentric circles, and the matching Monte Carlo estimators.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .distributions import as_stream
from .errors import ContourError, ParameterError
from .kernel import PushParams
from .processes import BetaParams, TasepParams, push_simulate_batch, tasep_simulate_batch, z_simulate

# successive quadrature refinements must agree to this relative tolerance
QUAD_RTOL = 1e-9
MAX_NODES = 2**14
# smallest admissible gap between a contour and a pole or its neighbour, in units
# of 1 - q (circles around 1) or 1 (circles around 0)
MIN_GAP = 0.05
# Monte Carlo paths simulated per batch
MC_CHUNK = 2**17


class MomentDivergenceWarning(UserWarning):
    """The requested PushTASEP q-moment is infinite (mu >= q^k)."""


@dataclass(frozen=True)
class MomentSpec:
    """Moment index n_1 >= ... >= n_k >= 0 at time t.

    ``ordered=False`` admits arbitrary nonnegative n (used by the boundary
    conditions, where the contour integrals are evaluated off the Weyl chamber).
    """

    n: tuple[int, ...]
    t: int
    ordered: bool = True

    def __post_init__(self) -> None:
        n = tuple(int(v) for v in self.n)
        object.__setattr__(self, "n", n)
        if not n:
            raise ParameterError("the moment order k must be at least 1")
        if any(v < 0 for v in n):
            raise ParameterError(f"moment labels must be nonnegative, got {n}")
        if self.ordered and any(a < b for a, b in zip(n, n[1:])):
            raise ParameterError(f"moment labels must be weakly decreasing, got {n}")
        if self.t < 0:
            raise ParameterError("time must be nonnegative")

    @property
    def k(self) -> int:
        return len(self.n)

    def as_dict(self) -> dict:
        return {"n": list(self.n), "t": self.t, "k": self.k}


def boson_to_moment(y) -> tuple[int, ...]:
    """(y_0, ..., y_N) -> n_1 >= ... >= n_k with y_m = #{i : n_i = m}."""
    out = []
    for m in range(len(y) - 1, -1, -1):
        out.extend([m] * int(y[m]))
    return tuple(out)


def moment_to_boson(n, N: int | None = None) -> tuple[int, ...]:
    """Inverse of :func:`boson_to_moment`; N defaults to max(n)."""
    n = tuple(int(v) for v in n)
    if any(a < b for a, b in zip(n, n[1:])) or (n and n[-1] < 0):
        raise ParameterError(f"labels must be weakly decreasing and nonnegative, got {n}")
    N = max(n, default=0) if N is None else N
    if n and n[0] > N:
        raise ParameterError(f"label {n[0]} exceeds N={N}")
    y = [0] * (N + 1)
    for v in n:
        y[v] += 1
    return tuple(y)


# ---------------------------------------------------------------------------
# contours


@dataclass(frozen=True)
class ContourSpec:
    """Concentric circles: ``center`` is 1 (push, tasep) or 0 (beta); radii[0] is outermost."""

    family: str
    center: float
    radii: tuple[float, ...]
    M: int = 256

    def as_dict(self) -> dict:
        return {"family": self.family, "center": self.center, "radii": list(self.radii), "M": self.M}


def _family(params) -> str:
    if isinstance(params, PushParams):
        return "push-around-1"
    if isinstance(params, TasepParams):
        return "tasep-around-1"
    if isinstance(params, BetaParams):
        return "beta-around-0"
    raise TypeError(f"unsupported parameter type {type(params).__name__}")


def contour_limits(k: int, params) -> tuple[float, str]:
    """Largest admissible outer radius and the constraint that sets it."""
    fam = _family(params)
    if fam == "beta-around-0":
        cands = [(params.mu_bar - 1, "mu_bar - 1"), (params.nu_bar, "-nu_bar")]
    else:
        cands = [(1.0, "0")]
        nu = params.nu
        if nu > 0:
            cands.append((1 / nu - 1, "1/nu"))
        if fam == "push-around-1":
            cands.append((1 - params.mu / params.q, "mu/q"))
    return min(cands)


def plan_contours(spec: MomentSpec, params, r_min: float | None = None, M: int = 256) -> ContourSpec:
    """Radii satisfying the nesting and exclusion constraints.

    Circles around 1 need r_A > (1 - q) + q r_B for A < B (so circle A
    contains q times circle B); circles around 0 need R_A > 1 + R_B.  The
    available slack is split into equal gaps between the innermost circle
    and its pole, between consecutive circles, and between the outermost
    circle and the nearest excluded point.  ``r_min`` pins the innermost radius.
    """
    k = spec.k
    fam = _family(params)
    limit, which = contour_limits(k, params)
    if fam == "beta-around-0":
        if params.mu_bar <= k:
            raise ContourError(f"beta moments need mu_bar > k; got mu_bar={params.mu_bar}, k={k}")
        step, unit, center = (lambda r, d: 1.0 + r + d), 1.0, 0.0
    else:
        q = params.q
        if fam == "push-around-1" and params.mu >= q**k:
            raise ContourError(f"push moments need mu < q^k; got mu={params.mu}, q^k={q**k}")
        step, unit, center = (lambda r, d: (1 - q) + q * r + d), 1 - q, 1.0

    def chain(delta: float) -> list[float]:
        radii = [delta if r_min is None else r_min]
        for _ in range(k - 1):
            radii.append(step(radii[-1], delta))
        return radii[::-1]

    # outer radius is affine in delta: r1 = a + b delta; the last gap needs r1 + delta <= limit
    a = chain(0.0)[0]
    b = chain(1.0)[0] - a
    delta = (limit - a) / (b + 1)
    if r_min is not None and r_min <= 0:
        raise ContourError("r_min must be positive")
    if delta < MIN_GAP * unit:
        raise ContourError(
            f"infeasible contours for k={k}: nesting needs an outer radius above {a:.6g} "
            f"but the pole at {which} caps it at {limit:.6g} (gap {delta:.3g} < {MIN_GAP * unit:.3g})"
        )
    radii = chain(delta)
    return ContourSpec(fam, center, tuple(radii), M)


# ---------------------------------------------------------------------------
# quadrature


def _nodes(center: float, radius: float, M: int) -> tuple[np.ndarray, np.ndarray]:
    """Trapezoid nodes z and weights dz/(2 pi i) on a circle."""
    e = np.exp(2j * np.pi * np.arange(M) / M)
    return center + radius * e, radius * e / M


def _nested_sum(ws: list[np.ndarray], zs: list[np.ndarray], cross) -> complex:
    """sum over node tuples of prod_j ws[j] prod_{A<B} cross(z_A, z_B)."""
    k = len(ws)
    if k == 1:
        return complex(ws[0].sum())
    if k == 2:
        return complex(ws[0] @ cross(zs[0][:, None], zs[1][None, :]) @ ws[1])
    if k == 3:
        c01 = cross(zs[0][:, None], zs[1][None, :])
        c02 = cross(zs[0][:, None], zs[2][None, :])
        c12 = cross(zs[1][:, None], zs[2][None, :])
        # Y[a, b] = sum_c w_c C02[a, c] C12[b, c]
        Y = (c02 * ws[2][None, :]) @ c12.T
        return complex(np.einsum("a,b,ab,ab->", ws[0], ws[1], c01, Y))
    total = 0j
    for a in range(ws[0].size):
        inner = [ws[j] * cross(zs[0][a], zs[j]) for j in range(1, k)]
        total += ws[0][a] * _nested_sum(inner, zs[1:], cross)
    return total


def _integrate(spec: MomentSpec, contours: ContourSpec, factor, cross, prefactor: float, M: int | None) -> float:
    """Adaptive tensor trapezoid rule: double M until two passes agree."""
    k = spec.k
    M = contours.M if M is None else M
    if M == contours.M and k >= 3:
        M = {3: 128}.get(k, 64)
    prev = None
    while True:
        zs, ws, abs_ws = [], [], []
        for j, r in enumerate(contours.radii):
            z, dz = _nodes(contours.center, r, M)
            w = factor(z, spec.n[j]) * dz
            zs.append(z)
            ws.append(w)
            abs_ws.append(np.abs(w))
        value = prefactor * _nested_sum(ws, zs, cross).real
        size = abs(prefactor) * _nested_sum(abs_ws, zs, lambda a, b: np.abs(cross(a, b))).real
        if prev is not None and abs(value - prev) <= max(QUAD_RTOL * abs(value), 1e3 * np.finfo(float).eps * size):
            return value
        if M >= MAX_NODES or M ** max(k - 1, 1) * M > 2**34:
            raise ContourError(f"quadrature did not converge by M={M} nodes per circle")
        prev = value
        M *= 2


def push_moment_integral(spec: MomentSpec, params: PushParams, contours: ContourSpec | None = None, M: int | None = None) -> float:
    """u(t; n) for the PushTASEP from step initial data, as a k-fold contour integral."""
    q, mu, nu, t = params.q, params.mu, params.nu, spec.t
    contours = plan_contours(spec, params) if contours is None else contours

    def factor(z, n):
        return ((1 - nu * z) / (1 - z)) ** n * ((1 - nu / (q * z)) / (1 - mu / (q * z))) ** t / ((1 - nu * z) * z)

    def cross(a, b):
        return (a - b) / (a - q * b)

    k = spec.k
    return _integrate(spec, contours, factor, cross, (-1) ** k * q ** (k * (k - 1) / 2), M)


def tasep_moment_integral(spec: MomentSpec, params: TasepParams, contours: ContourSpec | None = None, M: int | None = None) -> float:
    """E[prod q^{x_{n_j}(t) + n_j}] for the q-Hahn TASEP from step initial data."""
    q, mu, nu, t = params.q, params.mu, params.nu, spec.t
    contours = plan_contours(spec, params) if contours is None else contours

    def factor(z, n):
        return ((1 - nu * z) / (1 - z)) ** n * ((1 - mu * z) / (1 - nu * z)) ** t / ((1 - nu * z) * z)

    def cross(a, b):
        return (a - b) / (a - q * b)

    k = spec.k
    return _integrate(spec, contours, factor, cross, (-1) ** k * q ** (k * (k - 1) / 2), M)


def beta_moment_integral(spec: MomentSpec, params: BetaParams, contours: ContourSpec | None = None, M: int | None = None) -> float:
    """U(t; n) = E[prod Z(n_i, t)^{-1}] as a k-fold contour integral around 0."""
    mb, nb, t = params.mu_bar, params.nu_bar, spec.t
    contours = plan_contours(spec, params) if contours is None else contours

    def factor(w, n):
        return ((nb + w) / w) ** n * ((nb - 1 - w) / (mb - 1 - w)) ** t / (nb + w)

    def cross(a, b):
        return (a - b) / (a - b - 1)

    return _integrate(spec, contours, factor, cross, 1.0, M)


def first_particle_moment(k: int, q: float, mu: float, nu: float) -> float:
    """E[q^{k(x_1(1)+1)}] = (nu/q; 1/q)_k / (mu/q; 1/q)_k for the PushTASEP."""
    num = math.prod(1 - nu / q ** (j + 1) for j in range(k))
    den = math.prod(1 - mu / q ** (j + 1) for j in range(k))
    return num / den


# ---------------------------------------------------------------------------
# Monte Carlo


@dataclass(frozen=True)
class MCEstimate:
    estimate: float
    standard_error: float
    paths: int

    def z_score(self, exact: float) -> float:
        if self.standard_error == 0:
            return 0.0 if exact == self.estimate else math.inf
        return (exact - self.estimate) / self.standard_error


def _observable(positions: np.ndarray, n: tuple[int, ...], q: float) -> np.ndarray:
    """prod_j q^{x_{n_j} + n_j} per path; label 0 is the virtual particle at +inf (push) giving 0."""
    out = np.ones(positions.shape[0])
    for nj in n:
        if nj == 0:
            return np.zeros(positions.shape[0])
        out = out * q ** (positions[:, nj - 1] + nj).astype(float)
    return out


def _push_worker(args) -> tuple[float, float, int]:
    spec, params, paths, stream = args
    total, total_sq, done, chunk = 0.0, 0.0, 0, 0
    N = max(spec.n)
    while done < paths:
        m = min(MC_CHUNK, paths - done)
        X = push_simulate_batch(N, spec.t, params, m, stream.spawn(chunk))[:, spec.t, :]
        vals = _observable(X, spec.n, params.q)
        total += math.fsum(vals.tolist())
        total_sq += math.fsum((vals * vals).tolist())
        done += m
        chunk += 1
    return total, total_sq, paths


def _tasep_worker(args) -> tuple[float, float, int]:
    spec, params, paths, stream = args
    total, total_sq, done, chunk = 0.0, 0.0, 0, 0
    N = max(spec.n)
    while done < paths:
        m = min(MC_CHUNK, paths - done)
        X = tasep_simulate_batch(N, spec.t, params, m, stream.spawn(chunk))[:, spec.t, :]
        vals = _observable(X, spec.n, params.q)
        total += math.fsum(vals.tolist())
        total_sq += math.fsum((vals * vals).tolist())
        done += m
        chunk += 1
    return total, total_sq, paths


def _run_workers(fn, spec, params, paths: int, seed, workers: int) -> MCEstimate:
    base = as_stream(seed)
    workers = max(1, int(workers))
    shares = [paths // workers + (1 if w < paths % workers else 0) for w in range(workers)]
    jobs = [(spec, params, shares[w], base.worker(w)) for w in range(workers) if shares[w] > 0]
    if len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=len(jobs)) as pool:
            parts = list(pool.map(fn, jobs))
    else:
        parts = [fn(job) for job in jobs]
    # merge in worker order so the result does not depend on scheduling
    total = math.fsum(p[0] for p in parts)
    total_sq = math.fsum(p[1] for p in parts)
    n = sum(p[2] for p in parts)
    mean = total / n
    var = max(total_sq / n - mean * mean, 0.0) * n / max(n - 1, 1)
    return MCEstimate(mean, math.sqrt(var / n), n)


def mc_push_moment(spec: MomentSpec, params: PushParams, paths: int, seed, workers: int = 1) -> MCEstimate:
    """Monte Carlo estimate of u(t; n) from simulated PushTASEP paths."""
    if spec.t > 0 and params.mu >= params.q**spec.k:
        warnings.warn(
            f"mu q^-k = {params.mu / params.q**spec.k:.4g} >= 1: the q-moment is infinite and the estimate is meaningless",
            MomentDivergenceWarning,
            stacklevel=2,
        )
    if spec.t == 0:
        return MCEstimate(float(all(v > 0 for v in spec.n)), 0.0, paths)
    return _run_workers(_push_worker, spec, params, paths, seed, workers)


def mc_tasep_moment(spec: MomentSpec, params: TasepParams, paths: int, seed, workers: int = 1) -> MCEstimate:
    """Monte Carlo estimate of the TASEP q-moment."""
    if spec.t == 0:
        return MCEstimate(float(all(v > 0 for v in spec.n)), 0.0, paths)
    return _run_workers(_tasep_worker, spec, params, paths, seed, workers)


def beta_moment_samples(spec: MomentSpec, params: BetaParams, paths: int, seed, tie: str = "limit") -> tuple[np.ndarray, np.ndarray]:
    """Per-path prod Z(n_i,t)^{-1} and prod Z~(n_i,t) computed on the same Z paths.

    Ties created by rounding occur with positive probability over many
    paths, so the limiting law is used there by default.
    """
    if any(v == 0 for v in spec.n):
        zeros = np.zeros(paths)
        return zeros, zeros.copy()
    Z = z_simulate(max(spec.n), spec.t, params, seed, paths=paths, tie=tie)[:, spec.t, :]
    Ztilde = 1.0 / Z
    from_z = np.ones(paths)
    from_ztilde = np.ones(paths)
    for nj in spec.n:
        from_z = from_z * (1.0 / Z[:, nj - 1])
        from_ztilde = from_ztilde * Ztilde[:, nj - 1]
    return from_z, from_ztilde


def mc_beta_moment(spec: MomentSpec, params: BetaParams, paths: int, seed) -> MCEstimate:
    """Monte Carlo estimate of U(t; n) = E[prod Z(n_i,t)^{-1}]."""
    vals, _ = beta_moment_samples(spec, params, paths, seed)
    mean = math.fsum(vals.tolist()) / paths
    se = float(np.std(vals, ddof=1) / math.sqrt(paths)) if paths > 1 else 0.0
    return MCEstimate(mean, se, paths)


def scaled_push_params(params: BetaParams, eps: float) -> PushParams:
    """PushTASEP parameters q = e^{-eps}, mu = e^{-mu_bar eps}, nu = e^{-nu_bar eps}."""
    return params.scaled(eps)
