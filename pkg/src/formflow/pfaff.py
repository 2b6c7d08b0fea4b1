"""Topological anatomy of a single action 1-form.

Given a 1-form A on an n-chart this module builds the Pfaff sequence
{A, dA, A^dA, dA^dA, ...}, reports its global and pointwise dimension,
tests Frobenius integrability, assembles the Cartan topological base, and
on 4-charts extracts the torsion vector T solving i(T)Omega = A^dA, the
dissipation coefficient Gamma with i(T)dA = Gamma*A, the parity 4-form
K = dA^dA, characteristic/extremal vector spaces at points, the genus
dichotomy, and the projectivized action used by the Euler-index integrand.

Orientation convention: Omega = dx^dy^dz^dt, so
    i(T)Omega = T1 dy^dz^dt - T2 dx^dz^dt + T3 dx^dy^dt - T4 dx^dy^dz.
All signs downstream (torsion current, helicity density, Gamma, parity)
follow from this single choice; see docs/conventions.md for the table
relating it to the component lists common in the fluids literature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import expr as ex
from . import forms as fm
from .expr import Box, InconclusiveError, ScalarExpr, SingularityError, ZeroTester, ZeroVerdict
from .forms import DifferentialForm, VectorField

__all__ = [
    "PfaffSequence",
    "TopologicalBase",
    "TorsionData",
    "GenusReport",
    "InternalConsistencyError",
    "pfaff_sequence",
    "frobenius_integrable",
    "cartan_topological_base",
    "torsion_data",
    "parity",
    "characteristic_space",
    "extremal_space",
    "genus_diagnostic",
    "projectivize",
    "euler_integrand",
    "euler_index_raw",
    "form_is_zero",
]


class InternalConsistencyError(Exception):
    """An identity that must hold by construction failed its check."""


def _tester(chart, box: Box | None, seed: int = 20180425) -> ZeroTester:
    return ZeroTester(box if box is not None else ex.default_box(chart.dim), seed=seed)


def form_is_zero(w: DifferentialForm, tester: ZeroTester) -> ZeroVerdict:
    """Zero verdict for a form: every coefficient must pass the zero test."""
    for idx, c in w.coeffs.items():
        v = tester.test(c)
        if not v:
            return v
    return ZeroVerdict(zero=True, syntactic=w.is_syntactically_zero)


# ---------------------------------------------------------------------------
# Pfaff sequence


@dataclass(frozen=True)
class PfaffSequence:
    """The alternating sequence {A, dA, A^dA, dA^dA, ...} up to top degree."""

    elements: tuple[DifferentialForm, ...]
    verdicts: tuple[ZeroVerdict, ...]
    dimension: int
    pointwise: tuple[tuple[tuple[float, ...], int], ...] = ()

    @property
    def labels(self) -> tuple[str, ...]:
        return _SEQUENCE_LABELS[: len(self.elements)]


_SEQUENCE_LABELS = ("A", "dA", "A^dA", "dA^dA", "A^dA^dA", "dA^dA^dA")


def _build_sequence(A: DifferentialForm) -> list[DifferentialForm]:
    n = A.chart.dim
    dA = fm.exterior_derivative(A)
    out = [A]
    if n >= 2:
        out.append(dA)
    # alternation: element 2k+1 = A ^ dA^k, element 2k+2 = dA^(k+1)
    odd, even = A, dA
    while True:
        odd = fm.wedge(odd, dA) if out[-1].degree + 1 <= n else None
        if odd is None or odd.degree > n or out[-1].degree >= n:
            break
        out.append(odd)
        if odd.degree == n:
            break
        even = fm.wedge(even, dA)
        if even.degree > n:
            break
        out.append(even)
        if even.degree == n:
            break
    return out


def pfaff_sequence(
    A: DifferentialForm,
    box: Box | None = None,
    points: Iterable[Sequence[float]] = (),
    params: Mapping[str, float] | None = None,
    point_tol: float = 1e-9,
) -> PfaffSequence:
    """Pfaff sequence with zero verdicts, global and pointwise dimension.

    The global dimension counts leading nonzero elements over the sampling
    box; the pointwise dimension repeats the count using the element
    coefficients evaluated at each supplied point.
    """
    if A.degree != 1:
        raise fm.FormError("pfaff sequence is defined for 1-forms")
    elements = _build_sequence(A)
    tester = _tester(A.chart, box)
    verdicts = [form_is_zero(w, tester) for w in elements]
    dimension = 0
    for v in verdicts:
        if v.zero:
            break
        dimension += 1

    pointwise = []
    for p in points:
        p = tuple(float(c) for c in p)
        dim_at = 0
        for w in elements:
            if _nonzero_at(w, p, params, point_tol):
                dim_at += 1
            else:
                break
        pointwise.append((p, dim_at))
    return PfaffSequence(tuple(elements), tuple(verdicts), dimension, tuple(pointwise))


def _nonzero_at(w: DifferentialForm, point, params, tol: float) -> bool:
    for c in w.coeffs.values():
        try:
            v, scale = ex.eval_with_scale(c, point, params)
        except SingularityError:
            continue
        if abs(v) > tol * (1.0 + scale):
            return True
    return False


def frobenius_integrable(A: DifferentialForm, box: Box | None = None) -> bool:
    """True when A^dA vanishes, i.e. A admits integral surfaces."""
    if A.degree != 1:
        raise fm.FormError("frobenius test is defined for 1-forms")
    H = fm.wedge(A, fm.exterior_derivative(A))
    return bool(form_is_zero(H, _tester(A.chart, box)))


# ---------------------------------------------------------------------------
# Cartan topological base


@dataclass(frozen=True)
class TopologicalBase:
    """Base elements {A, A u F, H, H u K} with closures; F = dA, K = dH."""

    elements: tuple[tuple[str, tuple[DifferentialForm, ...]], ...]
    disconnected: bool


def cartan_topological_base(A: DifferentialForm, box: Box | None = None) -> TopologicalBase:
    """Assemble the base from the odd Pfaff elements and their closures.

    The closure of a form adjoins its exterior derivative, so the base reads
    {A} -> {A, F}, {H} -> {H, K}.  The induced topology is disconnected
    exactly when H = A^dA does not vanish.
    """
    F = fm.exterior_derivative(A)
    H = fm.wedge(A, F)
    K = fm.exterior_derivative(H)
    elements = (
        ("A", (A,)),
        ("A u F", (A, F)),
        ("H", (H,)),
        ("H u K", (H, K)),
    )
    disconnected = not form_is_zero(H, _tester(A.chart, box))
    return TopologicalBase(elements, disconnected)


# ---------------------------------------------------------------------------
# Torsion and parity on the 4-chart


@dataclass(frozen=True)
class TorsionData:
    """Torsion 3-form and its vector counterpart on a 4-chart."""

    torsion_form: DifferentialForm  # H = A^dA
    parity_form: DifferentialForm  # K = dA^dA
    parity_coefficient: ScalarExpr  # K = k * Omega
    vector: VectorField  # T with i(T)Omega = H
    gamma: ScalarExpr  # i(T)dA = Gamma * A
    spatial_current: tuple[ScalarExpr, ScalarExpr, ScalarExpr]
    helicity_density: ScalarExpr


def _require_4chart(A: DifferentialForm):
    if A.chart.dim != 4:
        raise fm.FormError("torsion extraction needs a 4-chart")
    if A.degree != 1:
        raise fm.FormError("torsion extraction needs a 1-form")


def _extract_torsion_vector(H: DifferentialForm) -> tuple[ScalarExpr, ...]:
    # i(T)Omega = T1 dy^dz^dt - T2 dx^dz^dt + T3 dx^dy^dt - T4 dx^dy^dz
    return (
        H.coeff((1, 2, 3)),
        ex.negate(H.coeff((0, 2, 3))),
        H.coeff((0, 1, 3)),
        ex.negate(H.coeff((0, 1, 2))),
    )


def torsion_data(A: DifferentialForm, box: Box | None = None) -> TorsionData:
    """Extract T, Gamma, and the parity coefficient, verifying the identities
    i(T)Omega = A^dA, i(T)A = 0, and i(T)dA = Gamma*A before returning.

    A failure of any identity raises InternalConsistencyError: these are
    theorems for every smooth 1-form, so a failure can only mean a broken
    implementation or an unusable tolerance, never bad input.
    """
    _require_4chart(A)
    chart = A.chart
    dA = fm.exterior_derivative(A)
    H = fm.wedge(A, dA)
    K = fm.exterior_derivative(H)
    k = K.coeff((0, 1, 2, 3))

    comps = _extract_torsion_vector(H)
    T = VectorField(chart, comps)

    # reconstruction check is exact: i(T)Omega must reproduce H syntactically
    recon = fm.interior(T, fm.volume_form(chart))
    if not fm.sub_forms(recon, H).is_syntactically_zero:
        raise InternalConsistencyError("i(T)Omega does not reproduce A^dA")

    tester = _tester(chart, box)

    contraction = fm.interior(T, A)  # 0-form, must vanish
    v = tester.test(contraction.coeff(()))
    if not v:
        raise InternalConsistencyError(
            f"i(T)A failed the zero test at {v.witness} (value {v.witness_value})"
        )

    gamma = _extract_gamma(A, dA, T, tester)

    spatial = (comps[0], comps[1], comps[2])
    return TorsionData(H, K, k, T, gamma, spatial, comps[3])


def _extract_gamma(
    A: DifferentialForm,
    dA: DifferentialForm,
    T: VectorField,
    tester: ZeroTester,
) -> ScalarExpr:
    """Solve i(T)dA = Gamma*A componentwise and cross-check every component."""
    M = fm.interior(T, dA)
    candidates: list[tuple[int, ScalarExpr]] = []
    for mu in range(A.chart.dim):
        a_mu = A.coeff((mu,))
        if ex.is_syntactic_zero(a_mu):
            continue
        candidates.append((mu, ex.simplify(ex.quotient(M.coeff((mu,)), a_mu))))

    if not candidates:
        # A is the zero form; proportionality is vacuous
        return ex.ZERO

    mu0, gamma = candidates[0]
    guard0 = A.coeff((mu0,))
    for mu, g in candidates[1:]:
        guarded = tester.with_guards(guard0, A.coeff((mu,)))
        v = guarded.test(gamma - g)
        if not v:
            raise InternalConsistencyError(
                f"Gamma candidates from components {mu0} and {mu} disagree "
                f"at {v.witness} (value {v.witness_value})"
            )

    guarded = tester.with_guards(guard0)
    for mu in range(A.chart.dim):
        residual = M.coeff((mu,)) - ex.mul(gamma, A.coeff((mu,)))
        v = guarded.test(residual)
        if not v:
            raise InternalConsistencyError(
                f"i(T)dA - Gamma*A nonzero in component {mu} at {v.witness}"
            )
    return gamma


def parity(A: DifferentialForm) -> tuple[DifferentialForm, ScalarExpr]:
    """Parity 4-form K = dA^dA and its lone coefficient; checks dH = K."""
    _require_4chart(A)
    dA = fm.exterior_derivative(A)
    K = fm.wedge(dA, dA)
    H = fm.wedge(A, dA)
    defect = fm.sub_forms(fm.exterior_derivative(H), K)
    if not defect.is_syntactically_zero:
        tester = _tester(A.chart, None)
        if not form_is_zero(defect, tester):
            raise InternalConsistencyError("d(A^dA) differs from dA^dA")
    return K, K.coeff((0, 1, 2, 3))


# ---------------------------------------------------------------------------
# Characteristic and extremal spaces at a point


def _field_matrix(A: DifferentialForm, point, params) -> np.ndarray:
    n = A.chart.dim
    dA = fm.exterior_derivative(A)
    F = np.zeros((n, n))
    for (mu, nu), c in dA.coeffs.items():
        val = ex.eval_at(c, point, params)
        F[mu, nu] = val
        F[nu, mu] = -val
    return F


def _null_space(rows: np.ndarray, tol: float) -> np.ndarray:
    if rows.size == 0:
        raise ValueError("empty matrix")
    u, s, vt = np.linalg.svd(rows)
    cutoff = tol * max(1.0, s[0] if s.size else 0.0)
    rank = int(np.sum(s > cutoff))
    return vt[rank:].T


def extremal_space(
    A: DifferentialForm,
    point: Sequence[float],
    params: Mapping[str, float] | None = None,
    tol: float = 1e-9,
) -> np.ndarray:
    """Orthonormal basis of {V : i(V)dA = 0} at the point (null space of F)."""
    F = _field_matrix(A, tuple(point), params)
    return _null_space(F, tol)


def characteristic_space(
    A: DifferentialForm,
    point: Sequence[float],
    params: Mapping[str, float] | None = None,
    tol: float = 1e-9,
) -> np.ndarray:
    """Orthonormal basis of {V : i(V)A = 0 and i(V)dA = 0} at the point.

    Vectors here annihilate both the action and its field 2-form; flows of
    such fields leave every element of the topological base untouched.  On
    symplectic points (nonvanishing parity) the space is empty.
    """
    point = tuple(point)
    F = _field_matrix(A, point, params)
    a = np.array([ex.eval_at(A.coeff((mu,)), point, params) for mu in range(A.chart.dim)])
    rows = np.vstack([F, a[None, :]])
    return _null_space(rows, tol)


# ---------------------------------------------------------------------------
# Genus dichotomy


@dataclass(frozen=True)
class GenusReport:
    genus: int  # 3 when the spatial torsion current vanishes, else 2
    torsion_current_zero: bool
    torsion_two_form: DifferentialForm  # spatial flux 2-form of the current


def genus_diagnostic(A: DifferentialForm, box: Box | None = None) -> GenusReport:
    """Genus of the exterior system {A = 0, dA = 0}: 3 without a torsion
    current, 2 with one.

    The discriminating object is the dt-free 2-form obtained by eliminating
    dt between the two equations; its coefficients are the components of the
    spatial torsion current, so the verdict reduces to a zero test on them.
    """
    data = torsion_data(A, box)
    t1, t2, t3 = data.spatial_current
    two_form = DifferentialForm(
        A.chart, 2, {(1, 2): t1, (0, 2): ex.negate(t2), (0, 1): t3}
    )
    tester = _tester(A.chart, box)
    current_zero = bool(form_is_zero(two_form, tester))
    return GenusReport(3 if current_zero else 2, current_zero, two_form)


# ---------------------------------------------------------------------------
# Projectivization and the Euler-index integrand


def projectivize(
    A: DifferentialForm, box: Box | None = None, n_samples: int = 64, seed: int = 20180425
) -> tuple[DifferentialForm, ScalarExpr]:
    """Normalize A to unit coefficient length: A' = A / lambda.

    lambda = sqrt(sum of squared coefficients).  Zeros of lambda are the
    singular points of the covector section; if sampling the box hits one
    (or gets within the zero-test tolerance of one), the normalization is
    undefined there and a SingularityError is raised.
    """
    if A.degree != 1:
        raise fm.FormError("projectivization is defined for 1-forms")
    chart = A.chart
    lam_sq = ex.add(*(ex.power(A.coeff((mu,)), 2) for mu in range(chart.dim)))
    box = box if box is not None else ex.default_box(chart.dim)
    verdict_rng = np.random.default_rng(seed)
    lows = np.asarray(box.lows)
    highs = np.asarray(box.highs)
    names = sorted(ex.collect_params(lam_sq))
    for _ in range(n_samples):
        point = tuple(verdict_rng.uniform(lows, highs))
        params = {
            name: verdict_rng.uniform(*box.param_ranges.get(name, ex.DEFAULT_PARAM_RANGE))
            for name in names
        }
        try:
            val, scale = ex.eval_with_scale(lam_sq, point, params)
        except SingularityError:
            continue
        if val <= 1e-12 * (1.0 + scale):
            raise SingularityError(
                "projectivization undefined: the coefficient length vanishes",
                lam_sq,
                point,
            )
    lam = ex.sqrt(lam_sq)
    primed = DifferentialForm(
        chart, 1, {idx: ex.quotient(c, lam) for idx, c in A.coeffs.items()}
    )
    return primed, lam


def euler_integrand(A: DifferentialForm, box: Box | None = None) -> tuple[DifferentialForm, ScalarExpr]:
    """Parity 4-form of the projectivized action and its coefficient."""
    primed, _ = projectivize(A, box)
    return parity(primed)


def euler_index_raw(A: DifferentialForm, chain, box: Box | None = None) -> float:
    """Integral of the projectivized parity over a 4-chain.

    Returned without any normalization constant: the conventional Euler
    index differs from this by a factor that depends on the variety, so the
    raw number is the honest output.
    """
    from . import chains as ch

    K_primed, _ = euler_integrand(A, box)
    return ch.integrate(K_primed, chain).value
