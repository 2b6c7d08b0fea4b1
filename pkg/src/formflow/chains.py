"""Integration of p-forms over parametrized chains, chain advection, and
instantaneous integral-invariance checks.

A chain is a weighted list of cells, each a smooth map from the unit
p-cube into the chart.  Cells come in two flavours: ExprCell holds the map
symbolically (components are expressions in the cube parameters u0..u_{p-1});
InterpCell holds it numerically as tensor-product Chebyshev-Lobatto node
values with barycentric evaluation, which is how advected cells are
re-fitted after their nodes are pushed along a flow.

Integration pulls the form back through each cell map and applies
Gauss-Legendre quadrature; the reported error estimate comes from doubling
the order.  Invariance of an integral under a flow is tested as the
t-derivative at t = 0 of the integral over the advected chain (fourth-order
central stencil), cross-checked against the integral of the Lie derivative
over the original chain, which is the identity the theorem checks rest on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import expr as ex
from . import forms as fm
from .expr import Chart, ScalarExpr, SingularityError
from .forms import DifferentialForm, VectorField

__all__ = [
    "ChainError",
    "AdvectionError",
    "ExprCell",
    "InterpCell",
    "Chain",
    "IntegralResult",
    "InvarianceResult",
    "PeriodSpectrum",
    "param_chart",
    "integrate",
    "advect",
    "invariance_check",
    "period_spectrum",
    "spot_check_closed",
    "circle_cell",
    "disk_cell",
    "box_cell",
    "DEFAULT_QUAD_ORDER",
    "DEFAULT_FIT_NODES",
]


class ChainError(Exception):
    pass


class AdvectionError(ChainError):
    pass


DEFAULT_QUAD_ORDER = {1: 16, 2: 12, 3: 8, 4: 6}
DEFAULT_FIT_NODES = {1: 24, 2: 10, 3: 7, 4: 5}
_BLOWUP = 1e8


def param_chart(p: int) -> Chart:
    return Chart(tuple(f"u{i}" for i in range(p)))


# ---------------------------------------------------------------------------
# Cells


@dataclass(frozen=True)
class ExprCell:
    """Map from the unit p-cube given by expressions in u0..u_{p-1}."""

    chart: Chart
    degree: int
    components: tuple[ScalarExpr, ...]
    params: dict[str, float] = field(default_factory=dict)
    name: str = ""

    def __post_init__(self):
        if len(self.components) != self.chart.dim:
            raise ChainError(
                f"cell map needs {self.chart.dim} components, got {len(self.components)}"
            )
        comps = tuple(ex.simplify(ex.as_expr(c)) for c in self.components)
        for c in comps:
            top = ex.max_coord_index(c)
            if top >= self.degree:
                raise ChainError(
                    f"cell map uses parameter u{top} but the cell has degree {self.degree}"
                )
        object.__setattr__(self, "components", comps)

    def _bound(self, params: Mapping[str, float] | None) -> dict[str, float]:
        merged = dict(self.params)
        merged.update(params or {})
        return merged

    def eval_grid(
        self, axes: Sequence[np.ndarray], params: Mapping[str, float] | None = None
    ) -> np.ndarray:
        U = _grid_points(axes)
        bound = self._bound(params)
        cols = [ex.eval_many(c, U, bound) for c in self.components]
        out = np.stack(cols, axis=-1)
        return out.reshape(tuple(len(a) for a in axes) + (self.chart.dim,))

    def jacobian_grid(
        self, axes: Sequence[np.ndarray], params: Mapping[str, float] | None = None
    ) -> np.ndarray:
        U = _grid_points(axes)
        bound = self._bound(params)
        n, p = self.chart.dim, self.degree
        J = np.empty((U.shape[0], n, p))
        for i, c in enumerate(self.components):
            for j in range(p):
                J[:, i, j] = ex.eval_many(ex.differentiate(c, j), U, bound)
        return J.reshape(tuple(len(a) for a in axes) + (n, p))


def _grid_points(axes: Sequence[np.ndarray]) -> np.ndarray:
    """Cartesian product of 1-d axes as an (m, p) array, C order."""
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def _lobatto_nodes(n: int) -> np.ndarray:
    # Chebyshev points of the second kind mapped to [0, 1]
    if n < 2:
        raise ChainError("interpolation needs at least 2 nodes per axis")
    return (1.0 - np.cos(np.pi * np.arange(n) / (n - 1))) / 2.0


def _barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    n = len(nodes)
    w = np.ones(n)
    for j in range(n):
        diff = nodes[j] - np.delete(nodes, j)
        w[j] = 1.0 / np.prod(diff)
    return w


def _interp_matrix(nodes: np.ndarray, weights: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Barycentric interpolation matrix taking node values to query values."""
    L = np.zeros((len(query), len(nodes)))
    for qi, q in enumerate(query):
        diff = q - nodes
        hit = np.where(np.abs(diff) < 1e-14)[0]
        if hit.size:
            L[qi, hit[0]] = 1.0
            continue
        terms = weights / diff
        L[qi] = terms / terms.sum()
    return L


def _diff_matrix(nodes: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Spectral differentiation matrix at the interpolation nodes."""
    n = len(nodes)
    D = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            if i != j:
                D[i, j] = (weights[j] / weights[i]) / (nodes[i] - nodes[j])
        D[i, i] = -np.sum(D[i, np.arange(n) != i])
    return D


def _apply_axis(op: np.ndarray, values: np.ndarray, axis: int) -> np.ndarray:
    moved = np.tensordot(op, values, axes=(1, axis))
    return np.moveaxis(moved, 0, axis)


@dataclass(frozen=True, eq=False)
class InterpCell:
    """Tensor-product polynomial fit of a cell map, stored as node values.

    Node axes are Chebyshev-Lobatto grids; evaluation anywhere on the cube
    goes through barycentric interpolation, derivatives through the spectral
    differentiation matrices, so integrating over an advected cell needs no
    symbolic form of the flow map.
    """

    chart: Chart
    degree: int
    node_axes: tuple[np.ndarray, ...]
    values: np.ndarray  # shape (len(axis0), ..., chart.dim)
    name: str = ""

    def __post_init__(self):
        expected = tuple(len(a) for a in self.node_axes) + (self.chart.dim,)
        if self.values.shape != expected:
            raise ChainError(f"node values shaped {self.values.shape}, expected {expected}")
        weights = tuple(_barycentric_weights(a) for a in self.node_axes)
        object.__setattr__(self, "_weights", weights)

    def _operators(self, axes: Sequence[np.ndarray], derivative_axis: int | None):
        ops = []
        for k, q in enumerate(axes):
            L = _interp_matrix(self.node_axes[k], self._weights[k], np.asarray(q))
            if derivative_axis == k:
                D = _diff_matrix(self.node_axes[k], self._weights[k])
                L = L @ D
            ops.append(L)
        return ops

    def eval_grid(
        self, axes: Sequence[np.ndarray], params: Mapping[str, float] | None = None
    ) -> np.ndarray:
        out = self.values
        for k, op in enumerate(self._operators(axes, None)):
            out = _apply_axis(op, out, k)
        return out

    def jacobian_grid(
        self, axes: Sequence[np.ndarray], params: Mapping[str, float] | None = None
    ) -> np.ndarray:
        cols = []
        for j in range(self.degree):
            out = self.values
            for k, op in enumerate(self._operators(axes, j)):
                out = _apply_axis(op, out, k)
            cols.append(out)
        return np.stack(cols, axis=-1)


Cell = ExprCell | InterpCell


@dataclass(frozen=True)
class Chain:
    """Oriented formal sum of cells of one degree."""

    degree: int
    cells: tuple[Cell, ...]
    orientations: tuple[int, ...] = ()
    closed: bool = False
    name: str = ""

    def __post_init__(self):
        if not self.cells:
            raise ChainError("chain needs at least one cell")
        if not self.orientations:
            object.__setattr__(self, "orientations", (1,) * len(self.cells))
        if len(self.orientations) != len(self.cells):
            raise ChainError("one orientation per cell required")
        if any(o not in (1, -1) for o in self.orientations):
            raise ChainError("orientations must be +1 or -1")
        for c in self.cells:
            if c.degree != self.degree:
                raise ChainError(
                    f"cell of degree {c.degree} in a degree-{self.degree} chain"
                )
        if not 1 <= self.degree <= 4:
            raise ChainError("chain degree must be between 1 and 4")


# ---------------------------------------------------------------------------
# Quadrature


def _gl_axis(order: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(order)
    return (x + 1.0) / 2.0, w / 2.0


def _pullback_values(
    w: DifferentialForm, cell: Cell, axes, params: Mapping[str, float]
) -> tuple[np.ndarray, np.ndarray]:
    """(integrand, |integrand|) of the pulled-back form at the grid points."""
    p = cell.degree
    X = cell.eval_grid(axes, params)
    J = cell.jacobian_grid(axes, params)
    flatX = X.reshape(-1, w.chart.dim)
    flatJ = J.reshape(-1, w.chart.dim, p)
    total = np.zeros(flatX.shape[0])
    for idx, c in w.coeffs.items():
        try:
            coeff_vals = ex.eval_many(c, flatX, params)
        except SingularityError as err:
            raise SingularityError(
                f"integrand singular on cell {cell.name or '?'}: {err}",
                err.subexpression,
                err.point,
            ) from err
        minors = flatJ[:, list(idx), :]
        total += coeff_vals * np.linalg.det(minors)
    return total, np.abs(total)


def integrate(
    w: DifferentialForm,
    chain: Chain,
    order: int | None = None,
    params: Mapping[str, float] | None = None,
) -> "IntegralResult":
    """Quadrature of a p-form over a p-chain with an order-doubling error
    estimate; `scale` is the integral of the absolute pulled-back integrand,
    the natural yardstick for zero tests on the result."""
    if w.degree != chain.degree:
        raise ChainError(f"cannot integrate a {w.degree}-form over a {chain.degree}-chain")
    order = order or DEFAULT_QUAD_ORDER[chain.degree]
    params = dict(params or {})

    def run(o: int) -> tuple[float, float]:
        nodes, wts = _gl_axis(o)
        axes = [nodes] * chain.degree
        total = 0.0
        scale = 0.0
        for cell, ori in zip(chain.cells, chain.orientations):
            bound = dict(getattr(cell, "params", {}) or {})
            bound.update(params)
            vals, avals = _pullback_values(w, cell, axes, bound)
            weight = wts
            for _ in range(chain.degree - 1):
                weight = np.multiply.outer(weight, wts)
            weight = weight.ravel()
            total += ori * float(vals @ weight)
            scale += float(avals @ weight)
        return total, scale

    coarse, _ = run(order)
    fine, scale = run(2 * order)
    return IntegralResult(fine, abs(fine - coarse), scale, order)


@dataclass(frozen=True)
class IntegralResult:
    value: float
    error_estimate: float
    scale: float
    order: int


# ---------------------------------------------------------------------------
# Advection


def _flow_function(
    V: VectorField, params: Mapping[str, float] | None
) -> Callable[[np.ndarray], np.ndarray]:
    comps = V.effective_components()
    bound = dict(params or {})

    def f(X: np.ndarray) -> np.ndarray:
        return np.stack([ex.eval_many(c, X, bound) for c in comps], axis=-1)

    return f


def rk4_flow(
    V: VectorField,
    X0: np.ndarray,
    dt: float,
    steps: int,
    params: Mapping[str, float] | None = None,
) -> np.ndarray:
    """Push points along the flow of V for time dt with classical RK4."""
    f = _flow_function(V, params)
    X = np.array(X0, dtype=float)
    h = dt / steps
    for _ in range(steps):
        k1 = f(X)
        k2 = f(X + 0.5 * h * k1)
        k3 = f(X + 0.5 * h * k2)
        k4 = f(X + h * k3)
        X = X + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(X)) or np.max(np.abs(X)) > _BLOWUP:
            raise AdvectionError("flow left the computational domain (blow-up)")
    return X


def _default_steps(dt: float) -> int:
    return max(8, int(math.ceil(abs(dt) / 0.02)))


def advect(
    chain: Chain,
    V: VectorField,
    dt: float,
    steps: int | None = None,
    fit_nodes: int | None = None,
    params: Mapping[str, float] | None = None,
) -> Chain:
    """Advect every cell node grid along V and re-fit polynomial cells."""
    if dt == 0.0:
        return chain
    steps = steps or _default_steps(dt)
    new_cells = []
    for cell in chain.cells:
        if isinstance(cell, InterpCell):
            axes = cell.node_axes
        else:
            n = fit_nodes or DEFAULT_FIT_NODES[cell.degree]
            axes = tuple(_lobatto_nodes(n) for _ in range(cell.degree))
        X = cell.eval_grid(axes, params)
        shape = X.shape
        moved = rk4_flow(V, X.reshape(-1, cell.chart.dim), dt, steps, params)
        new_cells.append(
            InterpCell(cell.chart, cell.degree, tuple(axes), moved.reshape(shape), cell.name)
        )
    return Chain(chain.degree, tuple(new_cells), chain.orientations, chain.closed, chain.name)


# ---------------------------------------------------------------------------
# Invariance checks


@dataclass(frozen=True)
class InvarianceResult:
    derivative_estimate: float
    lie_integral: float
    scale: float
    tolerance: float
    mode: str
    passed: bool
    identity_gap: float  # |derivative - lie integral|


def invariance_check(
    w: DifferentialForm,
    chain: Chain,
    V: VectorField,
    mode: str = "invariant",
    h: float = 0.02,
    tol: float = 1e-6,
    order: int | None = None,
    steps: int | None = None,
    drift_factor: float = 100.0,
    params: Mapping[str, float] | None = None,
) -> InvarianceResult:
    """(d/dt) at t=0 of the integral over the advected chain, vs the
    integral of the Lie derivative.

    mode "invariant": pass when the derivative vanishes within tol*scale.
    mode "drift": pass when it exceeds drift_factor*tol*scale (the
    counterexample direction).
    mode "identity": pass when derivative and Lie integral agree.
    """
    if mode not in ("invariant", "drift", "identity"):
        raise ChainError(f"unknown invariance mode {mode!r}")

    def at(t: float) -> float:
        moved = advect(chain, V, t, steps=steps, params=params)
        return integrate(w, moved, order=order, params=params).value

    i_ph, i_mh = at(h), at(-h)
    i_p2, i_m2 = at(2 * h), at(-2 * h)
    derivative = (8.0 * (i_ph - i_mh) - (i_p2 - i_m2)) / (12.0 * h)

    base = integrate(w, chain, order=order, params=params)
    lie = integrate(fm.lie_derivative(V, w), chain, order=order, params=params)
    scale = 1.0 + base.scale + lie.scale
    gap = abs(derivative - lie.value)

    if mode == "invariant":
        passed = abs(derivative) <= tol * scale
    elif mode == "drift":
        passed = abs(derivative) >= drift_factor * tol * scale
    else:
        passed = gap <= tol * scale
    return InvarianceResult(derivative, lie.value, scale, tol, mode, passed, gap)


# ---------------------------------------------------------------------------
# Periods


@dataclass(frozen=True)
class PeriodSpectrum:
    periods: tuple[float, ...]
    base: float | None  # smallest nonzero |period|
    ratios: tuple[float, ...]  # period / base (0 where below the floor)
    integer_deviation: tuple[float, ...]  # |ratio - nearest integer|


def period_spectrum(
    w: DifferentialForm,
    cycles: Sequence[Chain],
    box: ex.Box | None = None,
    order: int | None = None,
    floor: float = 1e-9,
    params: Mapping[str, float] | None = None,
) -> PeriodSpectrum:
    """Periods of a closed 1-form over cycles, with ratio-to-smallest report.

    Raises ChainError when w is not closed: periods of non-closed forms are
    path-dependent numbers, not topological ones.
    """
    dw = fm.exterior_derivative(w)
    if not dw.is_syntactically_zero:
        tester = ex.ZeroTester(box if box is not None else ex.default_box(w.chart.dim))
        for c in dw.coeffs.values():
            if not tester.test(c):
                raise ChainError("period spectrum requires a closed form")
    results = [integrate(w, c, order=order, params=params) for c in cycles]
    periods = tuple(r.value for r in results)
    scale = max((r.scale for r in results), default=0.0)
    cut = floor * (1.0 + scale)
    nonzero = [abs(p) for p in periods if abs(p) > cut]
    base = min(nonzero) if nonzero else None
    ratios = tuple((p / base if base else 0.0) for p in periods)
    deviation = tuple(abs(r - round(r)) for r in ratios)
    return PeriodSpectrum(periods, base, ratios, deviation)


def spot_check_closed(
    chain: Chain, seed: int = 20180425, n_funcs: int = 3, tol: float = 1e-7
) -> bool:
    """Evidence that a declared-closed chain really is closed: the integral
    of d(phi) over it must vanish for smooth test functions phi."""
    if chain.degree != 1:
        raise ChainError("closedness spot check implemented for 1-chains")
    chart = chain.cells[0].chart
    rng = np.random.default_rng(seed)
    for _ in range(n_funcs):
        phi = _random_smooth_scalar(chart, rng)
        res = integrate(fm.exterior_derivative(fm.scalar_form(chart, phi)), chain)
        if abs(res.value) > tol * (1.0 + res.scale):
            return False
    return True


def _random_smooth_scalar(chart: Chart, rng: np.random.Generator) -> ScalarExpr:
    terms = []
    for i in range(chart.dim):
        c1, c2, c3 = rng.uniform(-1, 1, size=3)
        xi = ex.Coord(i)
        terms.append(ex.mul(ex.Const(float(c1)), xi))
        terms.append(ex.mul(ex.Const(float(c2)), xi, xi))
        terms.append(ex.mul(ex.Const(float(c3)), ex.sin(xi)))
    i, j = rng.integers(0, chart.dim, size=2)
    terms.append(ex.mul(ex.Const(float(rng.uniform(-1, 1))), ex.Coord(int(i)), ex.Coord(int(j))))
    return ex.add(*terms)


# ---------------------------------------------------------------------------
# Cell builders for common shapes


def circle_cell(
    chart: Chart,
    plane: tuple[int, int] = (0, 1),
    center: Sequence[float] = (0.0, 0.0),
    radius: float = 1.0,
    fixed: Mapping[int, float] | None = None,
    name: str = "circle",
) -> ExprCell:
    """Counterclockwise circle in a coordinate plane, parametrized by u0."""
    comps: list[ScalarExpr] = [ex.ZERO] * chart.dim
    i, j = plane
    theta = ex.mul(ex.Const(2.0 * math.pi), ex.Coord(0))
    comps[i] = ex.add(ex.Const(float(center[0])), ex.mul(ex.Const(float(radius)), ex.cos(theta)))
    comps[j] = ex.add(ex.Const(float(center[1])), ex.mul(ex.Const(float(radius)), ex.sin(theta)))
    for k, v in (fixed or {}).items():
        comps[k] = ex.Const(float(v))
    return ExprCell(chart, 1, tuple(comps), name=name)


def disk_cell(
    chart: Chart,
    plane: tuple[int, int] = (0, 1),
    center: Sequence[float] = (0.0, 0.0),
    radius: float = 1.0,
    fixed: Mapping[int, float] | None = None,
    name: str = "disk",
) -> ExprCell:
    """Disk in a coordinate plane: u0 radial, u1 angular; boundary is the
    matching circle_cell with the same orientation."""
    comps: list[ScalarExpr] = [ex.ZERO] * chart.dim
    i, j = plane
    r = ex.mul(ex.Const(float(radius)), ex.Coord(0))
    theta = ex.mul(ex.Const(2.0 * math.pi), ex.Coord(1))
    comps[i] = ex.add(ex.Const(float(center[0])), ex.mul(r, ex.cos(theta)))
    comps[j] = ex.add(ex.Const(float(center[1])), ex.mul(r, ex.sin(theta)))
    for k, v in (fixed or {}).items():
        comps[k] = ex.Const(float(v))
    return ExprCell(chart, 2, tuple(comps), name=name)


def box_cell(
    chart: Chart,
    spans: Mapping[int, tuple[float, float]],
    fixed: Mapping[int, float] | None = None,
    name: str = "box",
) -> ExprCell:
    """Axis-aligned p-cube: each mapped axis k sweeps spans[k] linearly in
    its own parameter, in ascending coordinate order."""
    comps: list[ScalarExpr] = [ex.ZERO] * chart.dim
    for slot, (k, (lo, hi)) in enumerate(sorted(spans.items())):
        comps[k] = ex.add(
            ex.Const(float(lo)), ex.mul(ex.Const(float(hi - lo)), ex.Coord(slot))
        )
    for k, v in (fixed or {}).items():
        comps[k] = ex.Const(float(v))
    return ExprCell(chart, len(spans), tuple(comps), name=name)
