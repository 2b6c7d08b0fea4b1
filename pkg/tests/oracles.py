"""Independent reference computations used to freeze expected values.

Everything here recomputes a result by a route the library does not use:
polynomial expansion over an exponent-keyed ring, RK4 flow maps with
finite-difference Jacobians and Richardson extrapolation, and direct
Gauss-Legendre quadrature on explicit parametrizations.  Tests compare
library output against these oracles, never the other way around.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

import formflow.expr as ex

# ---------------------------------------------------------------------------
# Polynomial ring over exponent dictionaries
#
# A polynomial in n variables is {exponent tuple: coefficient}.  Expansion
# here is full distribution, so equal polynomials collapse to equal dicts
# regardless of how the library chose to leave products factored.

Poly = dict[tuple[int, ...], float]


def poly_const(value: float, nvars: int) -> Poly:
    if value == 0:
        return {}
    return {(0,) * nvars: float(value)}


def poly_var(index: int, nvars: int) -> Poly:
    exponent = [0] * nvars
    exponent[index] = 1
    return {tuple(exponent): 1.0}


def poly_add(a: Poly, b: Poly) -> Poly:
    out = dict(a)
    for k, v in b.items():
        s = out.get(k, 0.0) + v
        if s == 0.0:
            out.pop(k, None)
        else:
            out[k] = s
    return out


def poly_mul(a: Poly, b: Poly) -> Poly:
    out: Poly = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            k = tuple(x + y for x, y in zip(ka, kb))
            s = out.get(k, 0.0) + va * vb
            if s == 0.0:
                out.pop(k, None)
            else:
                out[k] = s
    return out


def poly_diff(a: Poly, index: int) -> Poly:
    out: Poly = {}
    for k, v in a.items():
        if k[index] == 0:
            continue
        nk = list(k)
        nk[index] -= 1
        out[tuple(nk)] = v * k[index]
    return out


def poly_is_zero(a: Poly, tol: float = 0.0) -> bool:
    return all(abs(v) <= tol for v in a.values())


def poly_from_expr(e, nvars: int, param_order: tuple[str, ...] = ()) -> Poly | None:
    """Expand a library expression into the ring; None when not polynomial.

    Parameters become extra trailing variables in param_order, so symbolic
    identities in the parameters are checked exactly as well.
    """
    total = nvars + len(param_order)

    def rec(node) -> Poly | None:
        if isinstance(node, ex.Const):
            return poly_const(float(node.value), total)
        if isinstance(node, ex.Coord):
            return poly_var(node.index, total)
        if isinstance(node, ex.Param):
            if node.name not in param_order:
                return None
            return poly_var(nvars + param_order.index(node.name), total)
        if isinstance(node, ex.Sum):
            acc: Poly = {}
            for t in node.terms:
                p = rec(t)
                if p is None:
                    return None
                acc = poly_add(acc, p)
            return acc
        if isinstance(node, ex.Product):
            acc = poly_const(1.0, total)
            for f in node.factors:
                p = rec(f)
                if p is None:
                    return None
                acc = poly_mul(acc, p)
            return acc
        if isinstance(node, ex.Pow):
            if node.exponent < 0:
                return None
            p = rec(node.base)
            if p is None:
                return None
            acc = poly_const(1.0, total)
            for _ in range(node.exponent):
                acc = poly_mul(acc, p)
            return acc
        return None  # Quotient, Func: not polynomial

    return rec(e)


# ---------------------------------------------------------------------------
# Numeric bridges: evaluate forms and fields at points

def eval_vector(V, point, params=None) -> np.ndarray:
    comps = V.effective_components()
    return np.array([ex.eval_at(c, tuple(point), params) for c in comps])


def eval_form(w, point, params=None) -> dict[tuple[int, ...], float]:
    return {
        idx: ex.eval_at(c, tuple(point), params) for idx, c in w.coeffs.items()
    }


# ---------------------------------------------------------------------------
# Flow-pullback Lie derivative
#
# L(V)w at p is the t-derivative of the pullback (Phi_t^* w)(p) where Phi_t
# is the time-t flow of V.  The flow is advanced by classical RK4, the flow
# Jacobian by central finite differences, the t-derivative by a central
# difference Richardson-extrapolated over step halving.  The library never
# computes flows for its Lie derivative, so agreement is a genuine check of
# the algebraic route.


def rk4_flow(V, point, t: float, steps: int = 2, params=None) -> np.ndarray:
    x = np.array(point, dtype=float)
    dt = t / steps
    for _ in range(steps):
        k1 = eval_vector(V, x, params)
        k2 = eval_vector(V, x + 0.5 * dt * k1, params)
        k3 = eval_vector(V, x + 0.5 * dt * k2, params)
        k4 = eval_vector(V, x + dt * k3, params)
        x = x + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return x


def flow_jacobian(V, point, t: float, delta: float = 1e-5, params=None) -> np.ndarray:
    n = len(point)
    J = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = delta
        plus = rk4_flow(V, np.array(point) + e, t, params=params)
        minus = rk4_flow(V, np.array(point) - e, t, params=params)
        J[:, j] = (plus - minus) / (2 * delta)
    return J


def pullback_values(w, V, point, t: float, params=None) -> dict[tuple[int, ...], float]:
    """(Phi_t^* w) at point, one number per strictly increasing index tuple."""
    image = rk4_flow(V, point, t, params=params)
    wvals = eval_form(w, image, params)
    if w.degree == 0:
        return wvals
    J = flow_jacobian(V, point, t, params=params)
    n = len(point)
    out: dict[tuple[int, ...], float] = {}
    for I in itertools.combinations(range(n), w.degree):
        total = 0.0
        for K, val in wvals.items():
            minor = J[np.ix_(K, I)]
            total += val * np.linalg.det(minor)
        out[I] = total
    return out


def lie_oracle(w, V, point, eps: float = 1e-2, params=None) -> dict[tuple[int, ...], float]:
    """t-derivative of the pullback at t = 0, Richardson-extrapolated."""

    def central(h: float) -> dict[tuple[int, ...], float]:
        plus = pullback_values(w, V, point, h, params=params)
        minus = pullback_values(w, V, point, -h, params=params)
        return {k: (plus[k] - minus[k]) / (2 * h) for k in plus}

    full = central(eps)
    half = central(eps / 2)
    return {k: (4 * half[k] - full[k]) / 3.0 for k in full}


# ---------------------------------------------------------------------------
# Quadrature on explicit parametrizations


def gauss_rule(n: int, lo: float = 0.0, hi: float = 1.0):
    x, w = np.polynomial.legendre.leggauss(n)
    mid, half = (hi + lo) / 2.0, (hi - lo) / 2.0
    return mid + half * x, half * w


def line_integral(w, gamma, dgamma, n: int = 64, params=None) -> float:
    """Integral of a 1-form over u in [0, 1] along gamma with velocity dgamma."""
    us, wts = gauss_rule(n)
    total = 0.0
    for u, wt in zip(us, wts):
        p = gamma(u)
        v = dgamma(u)
        vals = eval_form(w, p, params)
        total += wt * sum(val * v[idx[0]] for idx, val in vals.items())
    return total


def surface_integral(w, sigma, d_du, d_dv, n: int = 32, params=None) -> float:
    """Integral of a 2-form over [0,1]^2 under the map sigma."""
    us, wts = gauss_rule(n)
    total = 0.0
    for u, wu in zip(us, wts):
        for v, wv in zip(us, wts):
            p = sigma(u, v)
            tu = np.array(d_du(u, v))
            tv = np.array(d_dv(u, v))
            vals = eval_form(w, p, params)
            acc = 0.0
            for (i, j), val in vals.items():
                acc += val * (tu[i] * tv[j] - tu[j] * tv[i])
            total += wu * wv * acc
    return total


def circle_path(radius: float = 1.0, center=(0.0, 0.0), plane=(0, 1), dim: int = 4,
                fixed: dict[int, float] | None = None, turns: int = 1):
    """Parametrized circle and its velocity, for line_integral."""
    fixed = fixed or {}
    i, j = plane

    def gamma(u):
        p = [0.0] * dim
        for k, val in fixed.items():
            p[k] = val
        ang = 2 * math.pi * turns * u
        p[i] = center[0] + radius * math.cos(ang)
        p[j] = center[1] + radius * math.sin(ang)
        return tuple(p)

    def dgamma(u):
        v = [0.0] * dim
        ang = 2 * math.pi * turns * u
        rate = 2 * math.pi * turns * radius
        v[i] = -rate * math.sin(ang)
        v[j] = rate * math.cos(ang)
        return tuple(v)

    return gamma, dgamma
