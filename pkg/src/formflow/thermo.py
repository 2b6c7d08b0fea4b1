"""Process analysis for action 1-forms: first law, classification, reversibility.

Everything here hangs off one split.  Propagating an action 1-form A along
a flow J decomposes as

    L(J)A = i(J)dA + d(i(J)A) = W + dU = Q,

which casts the Lie derivative as a first law: heat = work + change of
internal energy.  The split is exact by construction; what varies between
processes is how much structure Q retains.  dQ = 0 marks a closed flow,
Q^dQ = 0 marks a reversible one (an integrating factor exists), W = 0 marks
a Hamiltonian one, and the periods of a closed W over registered test
cycles separate exact work forms from merely-closed ones.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

from . import chains as ch
from . import expr as ex
from . import forms as fm
from . import pfaff as pf
from .expr import Box, InconclusiveError, ZeroTester, ZeroVerdict
from .forms import DifferentialForm, VectorField
from .pfaff import InternalConsistencyError

__all__ = [
    "AnalysisContext",
    "ProcessFlags",
    "ProcessReport",
    "SecondVariation",
    "ThermoError",
    "classify",
    "first_law",
    "irreversibility",
    "second_variation",
    "CATEGORY_HAMILTONIAN",
    "CATEGORY_BERNOULLI",
    "CATEGORY_STOKES",
    "CATEGORY_OPEN",
    "CATEGORY_CLOSED_UNDETERMINED",
    "CATEGORY_UNCLASSIFIED",
]


class ThermoError(Exception):
    """Misuse of the process-analysis API."""


CATEGORY_HAMILTONIAN = "Hamiltonian"
CATEGORY_BERNOULLI = "Euler-Bernoulli"
CATEGORY_STOKES = "Stokes"
CATEGORY_OPEN = "open/Navier-Stokes-like"
CATEGORY_CLOSED_UNDETERMINED = "closed (exactness undetermined)"
CATEGORY_UNCLASSIFIED = "unclassified"


@dataclass(frozen=True)
class AnalysisContext:
    """Numeric context for verdicts that need sampling or integration.

    cycles: registered 1-cycles used as period probes (exactness evidence).
    points: chart points for the pointwise Pfaff dimension report.
    """

    box: Box | None = None
    cycles: tuple[ch.Chain, ...] = ()
    points: tuple[tuple[float, ...], ...] = ()
    params: dict[str, float] | None = None
    period_tol: float = 1e-7
    seed: int = 20180425

    def tester(self, chart: ex.Chart) -> ZeroTester:
        box = self.box if self.box is not None else ex.default_box(chart.dim)
        return ZeroTester(box, seed=self.seed)


def first_law(
    A: DifferentialForm, J: VectorField
) -> tuple[DifferentialForm, DifferentialForm, DifferentialForm]:
    """Split L(J)A into (Q, W, U): heat, work, internal energy.

    W = i(J)dA, U = i(J)A, Q = W + dU.  The sum is checked against the
    directly computed Lie derivative before returning.
    """
    if A.degree != 1:
        raise ThermoError("first law operates on action 1-forms")
    W = fm.interior(J, fm.exterior_derivative(A))
    U = fm.interior(J, A)
    Q = fm.add_forms(W, fm.exterior_derivative(U))
    direct = fm.lie_derivative(J, A)
    gap = fm.sub_forms(Q, direct)
    if not gap.is_syntactically_zero:
        tester = ZeroTester(ex.default_box(A.chart.dim))
        if not pf.form_is_zero(gap, tester).zero:
            raise InternalConsistencyError("W + dU disagrees with L(J)A")
    return Q, W, U


def irreversibility(
    A: DifferentialForm, J: VectorField, box: Box | None = None
) -> tuple[DifferentialForm, ZeroVerdict]:
    """Q^dQ and its zero verdict; zero means an integrating factor exists
    and the process is reversible."""
    Q, _, _ = first_law(A, J)
    QdQ = fm.wedge(Q, fm.exterior_derivative(Q))
    tester = ZeroTester(box if box is not None else ex.default_box(A.chart.dim))
    return QdQ, pf.form_is_zero(QdQ, tester)


@dataclass(frozen=True)
class SecondVariation:
    """Second propagation R = L(J)Q and its exactness evidence.

    For closed flows (dQ = 0) the transversality i(J)W = 0 forces
    R = d(i(J)Q): exact, so dR = 0 and every period of R vanishes.  The
    same mechanism gives L(J)(Q^F) = d(potential * F).  Open flows get the
    same residuals reported without any claim.
    """

    radiation: DifferentialForm
    potential: DifferentialForm  # 0-form i(J)Q
    closed_flow: bool
    dR_zero: bool
    exactness_residual_zero: bool  # R - d(potential)
    wedge_comparison_zero: bool  # L(J)(Q^F) - d(potential * F)
    periods: tuple[float, ...]
    periods_vanish: bool | None  # None when no cycles are registered


def second_variation(
    A: DifferentialForm,
    J: VectorField,
    cycles: tuple[ch.Chain, ...] = (),
    box: Box | None = None,
    params: dict[str, float] | None = None,
    period_tol: float = 1e-7,
) -> SecondVariation:
    """Propagate the heat form once more: R = L(J)Q, with exactness evidence."""
    Q, W, U = first_law(A, J)
    F = fm.exterior_derivative(A)
    dQ = fm.exterior_derivative(Q)
    R = fm.lie_derivative(J, Q)
    potential = fm.interior(J, Q)

    tester = ZeroTester(box if box is not None else ex.default_box(A.chart.dim))
    closed_flow = pf.form_is_zero(dQ, tester).zero

    dR = fm.exterior_derivative(R)
    dR_zero = pf.form_is_zero(dR, tester).zero
    residual = fm.sub_forms(R, fm.exterior_derivative(potential))
    residual_zero = pf.form_is_zero(residual, tester).zero

    wedge_diff = fm.sub_forms(
        fm.lie_derivative(J, fm.wedge(Q, F)),
        fm.exterior_derivative(fm.wedge(potential, F)),
    )
    wedge_zero = pf.form_is_zero(wedge_diff, tester).zero

    if closed_flow and not dR_zero:
        raise InternalConsistencyError(
            "closed flow produced a non-closed radiation form"
        )
    if closed_flow and not residual_zero:
        raise InternalConsistencyError(
            "closed flow radiation differs from d(i(J)Q)"
        )

    periods = tuple(
        ch.integrate(R, c, params=params).value for c in cycles
    )
    if not cycles:
        vanish = None
    else:
        scales = tuple(ch.integrate(R, c, params=params).scale for c in cycles)
        vanish = all(
            abs(p) <= period_tol * (1.0 + s) for p, s in zip(periods, scales)
        )
    return SecondVariation(
        R, potential, closed_flow, dR_zero, residual_zero, wedge_zero, periods, vanish
    )


@dataclass(frozen=True)
class ProcessFlags:
    adiabatic: bool  # Q = 0
    closed_flow: bool  # dQ = 0
    open_flow: bool
    reversible: bool  # Q^dQ = 0
    irreversible: bool
    associated: bool  # i(J)A = 0
    extremal: bool  # i(J)dA = 0
    characteristic: bool  # both
    hamiltonian: bool  # W = 0 (same test as extremal; named per category)
    radiative: bool  # L(J)Q != 0

    def as_dict(self) -> dict[str, bool]:
        return asdict(self)


@dataclass(frozen=True)
class ProcessReport:
    Q: DifferentialForm
    W: DifferentialForm
    U: DifferentialForm
    dQ: DifferentialForm
    QdQ: DifferentialForm
    pfaff: pf.PfaffSequence  # Pfaff sequence of Q
    flags: ProcessFlags
    category: str
    second: SecondVariation
    work_periods: tuple[float, ...]


def classify(
    A: DifferentialForm, J: VectorField, domain: AnalysisContext | None = None
) -> ProcessReport:
    """Full process report: first-law split, flags, category, second variation.

    Category logic: W = 0 is Hamiltonian; dW = 0 splits into Euler-Bernoulli
    (all registered periods of W vanish) and Stokes (some period survives),
    or stays undetermined without registered cycles; anything else is open.
    """
    domain = domain if domain is not None else AnalysisContext()
    Q, W, U = first_law(A, J)
    dQ = fm.exterior_derivative(Q)
    dW = fm.exterior_derivative(W)
    QdQ = fm.wedge(Q, dQ)

    tester = domain.tester(A.chart)
    dd_gap = fm.sub_forms(dQ, dW)
    if not dd_gap.is_syntactically_zero and not pf.form_is_zero(dd_gap, tester).zero:
        raise InternalConsistencyError("dQ and dW must agree (dd = 0)")
    q_zero = pf.form_is_zero(Q, tester).zero
    w_zero = pf.form_is_zero(W, tester).zero
    dq_zero = pf.form_is_zero(dQ, tester).zero
    qdq_zero = pf.form_is_zero(QdQ, tester).zero
    u_zero = pf.form_is_zero(U, tester).zero

    second = second_variation(
        A,
        J,
        cycles=domain.cycles,
        box=domain.box,
        params=domain.params,
        period_tol=domain.period_tol,
    )
    r_zero = pf.form_is_zero(second.radiation, tester).zero

    flags = ProcessFlags(
        adiabatic=q_zero,
        closed_flow=dq_zero,
        open_flow=not dq_zero,
        reversible=qdq_zero,
        irreversible=not qdq_zero,
        associated=u_zero,
        extremal=w_zero,
        characteristic=u_zero and w_zero,
        hamiltonian=w_zero,
        radiative=not r_zero,
    )

    work_periods: tuple[float, ...] = ()
    try:
        if w_zero:
            category = CATEGORY_HAMILTONIAN
        elif dq_zero:
            if not domain.cycles:
                category = CATEGORY_CLOSED_UNDETERMINED
            else:
                results = [
                    ch.integrate(W, c, params=domain.params) for c in domain.cycles
                ]
                work_periods = tuple(r.value for r in results)
                exact = all(
                    abs(r.value) <= domain.period_tol * (1.0 + r.scale)
                    for r in results
                )
                category = CATEGORY_BERNOULLI if exact else CATEGORY_STOKES
        else:
            category = CATEGORY_OPEN
    except InconclusiveError:
        category = CATEGORY_UNCLASSIFIED

    sequence = pf.pfaff_sequence(
        Q, box=domain.box, points=domain.points, params=domain.params
    )
    return ProcessReport(
        Q=Q,
        W=W,
        U=U,
        dQ=dQ,
        QdQ=QdQ,
        pfaff=sequence,
        flags=flags,
        category=category,
        second=second,
        work_periods=work_periods,
    )
