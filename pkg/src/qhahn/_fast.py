"""Compiled evaluation of kernel rows, used for tabulation and sampling.

Every quantity is carried as a sign and the log of its magnitude.  A
parameter ``a`` of a q-Pochhammer symbol is passed as ``(sign, log|a|)`` so
that huge arguments such as nu^-2 q^-L never overflow.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

NEG_INF = -np.inf
ZERO_TOL = 1e-14


@njit(cache=True)
def l1m(xs, xl):
    """Sign and log|1 - x| for x = xs * exp(xl)."""
    if xs == 0 or xl == NEG_INF:
        return 1, 0.0
    if xl > 0.0:
        inv = xs * math.exp(-xl)
        d = 1.0 - inv
        if abs(d) <= ZERO_TOL:
            return 0, NEG_INF
        # 1 - x = -x (1 - 1/x)
        s = -xs if d > 0 else xs
        return s, xl + math.log(abs(d))
    x = xs * math.exp(xl)
    if abs(x) < 0.5:
        return 1, math.log1p(-x)
    d = 1.0 - x
    if abs(d) <= ZERO_TOL * max(1.0, abs(x)):
        return 0, NEG_INF
    return (1 if d > 0 else -1), math.log(abs(d))


@njit(cache=True)
def slog(x):
    if x == 0.0:
        return 0, NEG_INF
    return (1 if x > 0 else -1), math.log(abs(x))


@njit(cache=True)
def lpoch(as_, al, logq, n):
    """(a;q)_n for n >= 0 with a = as_ * exp(al) and q = exp(logq)."""
    s = 1
    lg = 0.0
    for i in range(n):
        fs, fl = l1m(as_, al + i * logq)
        if fs == 0:
            return 0, NEG_INF
        s *= fs
        lg += fl
    return s, lg


@njit(cache=True)
def linf(as_, al, logq):
    """(a;q)_inf for 0 < q < 1."""
    s = 1
    lg = 0.0
    if as_ == 0:
        return s, lg
    cut = math.log(1e-18)
    i = 0
    while True:
        xl = al + i * logq
        if xl < cut:
            break
        fs, fl = l1m(as_, xl)
        if fs == 0:
            return 0, NEG_INF
        s *= fs
        lg += fl
        i += 1
        if i > 10_000_000:
            break
    return s, lg


# ---------------------------------------------------------------------------
# 8phi7 representation


@njit(cache=True)
def _w_sum(q, mu, nu, ell, g, L, K):
    """Very-well-poised 8W7 sum of either representation, as (sign, log)."""
    if ell < g:
        sig = nu * nu * q ** (g - ell - 1)
        b1 = nu * nu / q
        b2 = mu * nu * q ** (g - ell)
        b3 = nu
        b5 = q ** (-ell)
        c1 = q ** (g - ell + 1)
        c2 = nu / mu
        c3 = nu * q ** (g - ell)
        c4 = nu * nu * q ** (L + g - ell)
        c5 = nu * nu * q**g
        zf0 = q ** (L + g + 1)
        zf1 = q ** (g + 1)
    else:
        sig = nu * nu * q ** (ell - g - 1)
        b1 = nu * nu / q
        b2 = mu * nu
        b3 = nu * q ** (ell - g)
        b5 = q ** (-g)
        c1 = q ** (ell - g + 1)
        c2 = nu * q ** (ell - g) / mu
        c3 = nu
        c4 = nu * nu * q**L
        c5 = nu * nu * q**ell
        zf0 = q ** (L + g + 1)
        zf1 = q ** (ell + 1)
    t = 1.0
    total = 1.0
    scale = 0.0
    for k in range(K):
        qk = q**k
        if k == 0:
            v = 1.0 - sig * q * q
        else:
            v = (1.0 - sig * qk) / (1.0 - sig * qk * qk) * (1.0 - sig * qk * qk * q * q)
        num = v * (1.0 - b1 * qk) * (1.0 - b2 * qk) * (1.0 - b3 * qk) * (1.0 - b5 * qk) * (zf0 - zf1 * qk) / mu
        den = (
            (1.0 - c1 * qk)
            * (1.0 - c2 * qk)
            * (1.0 - c3 * qk)
            * (1.0 - c4 * qk)
            * (1.0 - c5 * qk)
            * (1.0 - q * qk)
        )
        t *= num / den
        total += t
        a = abs(t)
        if a > 1e200 or abs(total) > 1e200:
            t *= 1e-200
            total *= 1e-200
            scale += 200.0 * math.log(10.0)
    return slog_scaled(total, scale)


@njit(cache=True)
def slog_scaled(x, scale):
    s, l = slog(x)
    return s, l + scale


@njit(cache=True)
def _pre87_start(q, mu, nu, ell, g):
    """Log prefactor of the 8phi7 form at the first supported L; sign 2 flags a pole."""
    lq = math.log(q)
    ns, nl = slog(nu)
    ms, ml = slog(mu)
    s = 1
    lg = 0.0
    # (mu;q)_inf (nu^2 q^g;q)_inf / ((nu;q)_inf (nu mu q^g;q)_inf)
    inf_sgn = np.array([1, 1, -1, -1])
    inf_as = np.array([ms, 1, ns, ns * ms])
    inf_al = np.array([ml, 2 * nl + g * lq, nl, nl + ml + g * lq])
    for j in range(4):
        fs, fl = linf(inf_as[j], inf_al[j], lq)
        if fs == 0:
            return (2, 0.0) if inf_sgn[j] < 0 else (0, NEG_INF)
        s *= fs
        lg += inf_sgn[j] * fl
    if ell < g:
        # at L = 0 the (.;q)_L symbols are 1
        sgn = np.array([1, 1, -1, -1, 1, -1])
        a_s = np.array([1, ns, ns * ms, 1, 1, ns])
        a_l = np.array([g * lq, -nl + (1 - g) * lq, nl + ml + (g - 1) * lq,
                        -2 * nl + (1 - g) * lq, -2 * nl + (1 - g) * lq, -nl + (1 - g) * lq])
        base = np.array([-lq, lq, -lq, lq, lq, lq])
        cnt = np.array([ell, ell, ell, ell, ell, ell])
    else:
        L = ell - g
        sgn = np.array([1, 1, 1, -1, -1, -1, 1, -1])
        a_s = np.array([1, ns, ns, ms * ns, 1, 1, 1, ns])
        a_l = np.array([ell * lq, nl, -nl + (1 - g) * lq, ml + nl, -2 * nl + (1 - ell) * lq,
                        2 * nl + g * lq, -2 * nl + (1 - g - L) * lq, -nl + (ell - 2 * g + 1 - L) * lq])
        base = np.array([-lq, lq, lq, lq, lq, lq, lq, lq])
        cnt = np.array([g, ell - g, g, g, g, L, g, g])
    for j in range(sgn.size):
        fs, fl = lpoch(a_s[j], a_l[j], base[j], cnt[j])
        if fs == 0:
            return (2, 0.0) if sgn[j] < 0 else (0, NEG_INF)
        s *= fs
        lg += sgn[j] * fl
    return s, lg


@njit(cache=True)
def _pre87_step(q, mu, nu, ell, g, L):
    """Log of prefactor(L+1)/prefactor(L) for L in the support; sign 2 flags a pole."""
    lq = math.log(q)
    ns, nl = slog(nu)
    ml = math.log(mu)
    sgn = np.array([1, 1, -1, -1, 1, -1, -1, 1])
    a_s = np.array([ns, ns, 1, 1, 1, 1, ns, ns])
    if ell < g:
        m = L
        a_l = np.array([
            nl - ml + m * lq,
            nl + (g + m) * lq,
            (m + 1) * lq,
            2 * nl + (g + L) * lq,
            # (nu^-2 q^{1-g} q^-L;q)_ell
            -2 * nl + (-g - L) * lq,
            -2 * nl + (ell - g - L) * lq,
            # (nu^-1 q^{1-g} q^-L;q)_ell, a denominator
            -nl + (-g - L) * lq,
            -nl + (ell - g - L) * lq,
        ])
    else:
        m = L - ell + g
        a_l = np.array([
            nl - ml + (ell - g + m) * lq,
            nl + (g + m) * lq,
            (m + 1) * lq,
            2 * nl + (g + L) * lq,
            # (nu^-2 q^{1-g} q^-L;q)_g
            -2 * nl + (-g - L) * lq,
            -2 * nl + (-L) * lq,
            # (nu^-1 q^{ell-2g+1} q^-L;q)_g, a denominator
            -nl + (ell - 2 * g - L) * lq,
            -nl + (ell - g - L) * lq,
        ])
    s = 1
    lg = ml
    for j in range(8):
        fs, fl = l1m(a_s[j], a_l[j])
        if fs == 0:
            return (2, 0.0) if sgn[j] < 0 else (0, NEG_INF)
        s *= fs
        lg += sgn[j] * fl
    return s, lg


@njit(cache=True)
def phi87_logrow(q, mu, nu, ell, g, Lmax):
    """Signs and logs of P_{ell,g}(L), L = 0..Lmax, from the 8phi7 forms.

    Returns a pole flag as the third value when a prefactor denominator
    vanishes (measure-zero parameter coincidences).
    """
    signs = np.zeros(Lmax + 1, dtype=np.int64)
    logs = np.full(Lmax + 1, NEG_INF)
    start = max(0, ell - g)
    if start > Lmax:
        return signs, logs, False
    ps, pl = _pre87_start(q, mu, nu, ell, g)
    if ps == 2:
        return signs, logs, True
    for L in range(start, Lmax + 1):
        if L > start:
            ds, dl = _pre87_step(q, mu, nu, ell, g, L - 1)
            if ds == 2:
                return signs, logs, True
            ps *= ds
            pl += dl
        if ps == 0:
            # only nu = mu q^j makes a numerator vanish; the 8W7 sum then has a
            # matching vanishing denominator, so report it like a pole
            return signs, logs, True
        K = min(ell, L) if ell < g else min(g, L - ell + g)
        ws, wl = _w_sum(q, mu, nu, ell, g, L, K)
        signs[L] = ps * ws
        logs[L] = pl + wl if ws != 0 else NEG_INF
    return signs, logs, False


# ---------------------------------------------------------------------------
# sum representation


@njit(cache=True)
def phi_kernel_weights(q, mu, nu, ell, g):
    """Signs/logs of phi_{1/q, q^g, mu nu q^{g-1}}(p|ell), p = 0..ell, and a pole flag."""
    lq = math.log(q)
    lQ = -lq
    ws = np.zeros(ell + 1, dtype=np.int64)
    wl = np.full(ell + 1, NEG_INF)
    mns, mnl = slog(mu * nu)
    ds, dl = lpoch(mns, mnl + (g - 1) * lq, lQ, ell)
    if ds == 0:
        return ws, wl, True
    for p in range(ell + 1):
        if ell - p > g:
            continue
        # (q^g)^p (mu nu/q; 1/q)_p
        s1, l1 = lpoch(mns, mnl - lq, lQ, p)
        s2, l2 = lpoch(1, g * lq, lQ, ell - p)
        s3, l3 = lpoch(1, lQ, lQ, ell)
        s4, l4 = lpoch(1, lQ, lQ, p)
        s5, l5 = lpoch(1, lQ, lQ, ell - p)
        s = s1 * s2 * s3 * s4 * s5 * ds
        if s == 0:
            continue
        ws[p] = s
        wl[p] = g * p * lq + l1 + l2 + l3 - l4 - l5 - dl
    return ws, wl, False


@njit(cache=True)
def psi_kernel_logs(q, mu, nu, ell, g, p, mmax):
    """Signs/logs of psi_{q, nu q^p/mu, nu q^g, nu^2 q^{g+p}}(m), m = 0..mmax."""
    lq = math.log(q)
    ns, nl = slog(nu)
    ms, ml = slog(mu)
    out_s = np.zeros(mmax + 1, dtype=np.int64)
    out_l = np.full(mmax + 1, NEG_INF)
    sgn = np.array([1, 1, -1, -1])
    a_s = np.array([1, ms, ns, ns])
    a_l = np.array([2 * nl + (g + p) * lq, ml, nl + ml + g * lq, nl + p * lq])
    s = 1
    lg = 0.0
    for j in range(4):
        fs, fl = linf(a_s[j], a_l[j], lq)
        if fs == 0:
            return out_s, out_l
        s *= fs
        lg += sgn[j] * fl
    for m in range(mmax + 1):
        out_s[m] = s
        out_l[m] = lg
        f1s, f1l = l1m(ns, nl - ml + (p + m) * lq)
        f2s, f2l = l1m(ns, nl + (g + m) * lq)
        f3s, f3l = l1m(1, (m + 1) * lq)
        f4s, f4l = l1m(1, 2 * nl + (g + p + m) * lq)
        s = s * f1s * f2s * f3s * f4s
        if s == 0:
            break
        lg += ml + f1l + f2l - f3l - f4l
    return out_s, out_l


@njit(cache=True)
def sum_logrow(q, mu, nu, ell, g, Lmax):
    """Signs/logs of P_{ell,g}(L), L = 0..Lmax, from the sum form; third value flags a pole."""
    signs = np.zeros(Lmax + 1, dtype=np.int64)
    logs = np.full(Lmax + 1, NEG_INF)
    ws, wl, pole = phi_kernel_weights(q, mu, nu, ell, g)
    if pole:
        return signs, logs, True
    P = ell + 1
    tab_s = np.zeros((P, Lmax + 1), dtype=np.int64)
    tab_l = np.full((P, Lmax + 1), NEG_INF)
    for p in range(min(ell, Lmax) + 1):
        if ws[p] == 0:
            continue
        ps, pl = psi_kernel_logs(q, mu, nu, ell, g, p, Lmax - p)
        for m in range(Lmax - p + 1):
            if ps[m] != 0:
                tab_s[p, p + m] = ws[p] * ps[m]
                tab_l[p, p + m] = wl[p] + pl[m]
    for L in range(Lmax + 1):
        top = NEG_INF
        for p in range(P):
            if tab_s[p, L] != 0 and tab_l[p, L] > top:
                top = tab_l[p, L]
        if top == NEG_INF:
            continue
        acc = 0.0
        comp = 0.0
        for p in range(P):
            if tab_s[p, L] != 0:
                # Kahan summation of the scaled terms
                y = tab_s[p, L] * math.exp(tab_l[p, L] - top) - comp
                t = acc + y
                comp = (t - acc) - y
                acc = t
        if acc != 0.0:
            signs[L] = 1 if acc > 0 else -1
            logs[L] = top + math.log(abs(acc))
    return signs, logs, False


# ---------------------------------------------------------------------------
# sampling by inversion, walking L upward


@njit(cache=True)
def sample_phi87(q, mu, nu, ell, g, u):
    """Smallest L with cumulative P_{ell,g} mass >= u, walking the 8phi7 form."""
    start = max(0, ell - g)
    ps, pl = _pre87_start(q, mu, nu, ell, g)
    if ps == 2:
        return -1
    cum = 0.0
    L = start
    prev = -1.0
    while True:
        if L > start:
            ds, dl = _pre87_step(q, mu, nu, ell, g, L - 1)
            if ds == 2:
                return -1
            ps *= ds
            pl += dl
        K = min(ell, L) if ell < g else min(g, L - ell + g)
        ws, wl = _w_sum(q, mu, nu, ell, g, L, K)
        if ps == 0:
            return -1
        val = 0.0
        if ws != 0:
            val = ps * ws * math.exp(pl + wl)
        cum += val
        if cum >= u:
            return L
        # past the mode the terms decay at ratio close to mu; stop when the
        # remaining mass is negligible against the rounding of cum
        if prev > 0 and val < prev and val < 1e-17 and val * mu / (1 - mu) < 1e-17:
            return L
        prev = val
        L += 1
        if L > start + 100_000_000:
            return L


@njit(cache=True)
def sample_phi87_batch(q, mu, nu, ells, gs, us):
    out = np.empty(ells.size, dtype=np.int64)
    for i in range(ells.size):
        out[i] = sample_phi87(q, mu, nu, ells[i], gs[i], us[i])
    return out


@njit(cache=True)
def row_tail_bound(q, mu, nu, ell, g, Lmax, logw=0.0):
    """Bound on sum_{L > Lmax} |P_{ell,g}(L)| from the sum form; inf if unavailable.

    For m' >= m the psi term ratio mu (1-aq^m')(1-bq^m')/((1-q^{m'+1})(1-cq^m'))
    is at most R = mu (1+max(0,-a)q^m)(1+max(0,-b)q^m)/((1-q^{m+1})(1-cq^m)),
    so the tail after m is bounded by psi(m) R/(1-R).  With a weight w^L,
    w = exp(logw), the ratio becomes R w and every term carries w^Lmax.
    """
    w = math.exp(logw)
    ws, wl, pole = phi_kernel_weights(q, mu, nu, ell, g)
    if pole:
        return np.inf
    total = 0.0
    for p in range(min(ell, Lmax) + 1):
        if ws[p] == 0:
            continue
        m = Lmax - p
        a = nu * q**p / mu
        b = nu * q**g
        c = nu * nu * q ** (g + p)
        qm = q**m
        R = mu * (1.0 + max(0.0, -a) * qm) * (1.0 + max(0.0, -b) * qm)
        R *= w / ((1.0 - q * qm) * (1.0 - c * qm))
        if R >= 1.0:
            return np.inf
        ps, pl = psi_kernel_logs(q, mu, nu, ell, g, p, m)
        if ps[m] != 0:
            total += math.exp(wl[p] + pl[m] + logw * Lmax) * R / (1.0 - R)
    return total
