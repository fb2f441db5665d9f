"""Moment series of an IFS, membership flags, and the entropy/Lyapunov bounds.

For an infinite family the five series are summed up to some index ``n`` and
the remainder is bounded through the declared envelopes: if ``|q_i| <= A + B i``
for ``i >= start``, then ``sum_{i>n} p_i |q_i| <= A T(n) + B T1(n)`` where
``T(n)`` is the tail mass and ``T1(n) = sum_{i>n} i p_i``.  ``n`` is doubled
until that remainder falls below the requested tolerance.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .model import Envelope, IfsSystem

EPS = 2.0**-52
MAX_TERMS = 1 << 20


class MomentError(ValueError):
    """The series cannot be controlled (missing envelope, divergence)."""


class MissingEnvelope(MomentError):
    pass


class DivergentSeries(MomentError):
    def __init__(self, series: str, condition: str, detail: str):
        super().__init__(f"{series} series diverges (condition {condition}): {detail}")
        self.series = series
        self.condition = condition


class HypothesisViolated(ValueError):
    def __init__(self, failed: list[str]):
        super().__init__("hypotheses not satisfied: " + ", ".join(failed))
        self.failed = failed


SERIES_CONDITION = {
    "mean_Gamma": "(i) sum p_i Gamma_i < inf",
    "displacement": "(ii) sum p_i |w_i(x0) - x0| < inf",
    "log_Gamma": "(iii) sum p_i log Gamma_i < 0",
    "entropy": "entropy sum p_i log p_i > -inf",
    "log_gamma": "sum p_i log gamma_i > -inf",
}


def _log(v) -> float:
    # big rationals (e.g. 2**(i-1)/3**i for large i) would underflow as floats
    if isinstance(v, Fraction):
        return math.log(v.numerator) - math.log(v.denominator)
    return math.log(v)


@dataclass(frozen=True)
class Estimate:
    value: float
    error: float

    @property
    def lo(self) -> float:
        return self.value - self.error

    @property
    def hi(self) -> float:
        return self.value + self.error


@dataclass(frozen=True)
class MomentReport:
    displacement: Estimate
    mean_Gamma: Estimate
    log_Gamma: Estimate
    log_gamma: Estimate
    entropy: Estimate
    x0: tuple
    terms_used: int | None  # None for a finite index set

    def to_dict(self) -> dict:
        out = {k: asdict(getattr(self, k)) for k in SERIES_CONDITION}
        out["x0"] = list(self.x0)
        out["terms_used"] = self.terms_used
        return out


def _terms(sys: IfsSystem, x0: np.ndarray, lo: int, hi: int):
    """Rows ``(i, p_i, Gamma_i, log Gamma_i, log gamma_i, |w_i(x0) - x0|, log p_i)``."""
    rows = []
    for i in range(lo, hi + 1):
        p = sys.probabilities.p(i)
        m = sys.map(i)
        disp = float(np.linalg.norm(m.apply(x0) - x0))
        rows.append((i, float(p), float(m.Gamma), _log(m.Gamma), _log(m.gamma), disp, _log(p)))
    return rows


_COLUMNS = ("mean_Gamma", "log_Gamma", "log_gamma", "displacement", "entropy")
_ENVELOPE_OF = {"mean_Gamma": "Gamma", "log_Gamma": "log_Gamma", "log_gamma": "log_gamma",
                "entropy": "log_p"}


def _displacement_envelope(sys: IfsSystem, x0: np.ndarray) -> Envelope:
    # |w_i(x0) - x0| <= Gamma_i |x0| + |w_i(0)| + |x0|
    g, off = sys.envelopes["Gamma"], sys.envelopes["offset"]
    r = float(np.linalg.norm(x0))
    return Envelope(max(g.start, off.start), g.const * r + r + off.const, g.slope * r + off.slope)


def moment_sums(sys: IfsSystem, x0=None, tol: float = 1e-9, strict: bool = True) -> MomentReport:
    """The five series with additive error bounds at most ``tol``.

    Finite systems are summed exactly (up to rounding) with zero error bound.
    Raises :class:`MissingEnvelope` for infinite families without tail
    control.  A term exceeding its declared envelope raises
    :class:`DivergentSeries`; with ``strict=False`` that series is reported as
    infinite instead, so that :func:`check_membership` can flag it.
    """
    x0 = np.zeros(sys.dim) if x0 is None else np.asarray(x0, dtype=float)
    if sys.finite:
        rows = _terms(sys, x0, 1, sys.n_maps)
        sums = {}
        for col, k in zip(_COLUMNS, (2, 3, 4, 5, 6)):
            sums[col] = Estimate(math.fsum(r[1] * r[k] for r in rows), 0.0)
        return MomentReport(x0=tuple(x0.tolist()), terms_used=None, **sums)

    pv = sys.probabilities
    if pv.tail is None or pv.tail_moment is None:
        raise MissingEnvelope("parametric probabilities need tail(n) and tail_moment(n)")
    missing = [k for k in ("Gamma", "log_Gamma", "log_gamma", "offset", "log_p") if k not in sys.envelopes]
    if missing:
        raise MissingEnvelope(f"no envelope declared for {', '.join(missing)}")
    env = {col: sys.envelopes[key] for col, key in _ENVELOPE_OF.items()}
    env["displacement"] = _displacement_envelope(sys, x0)
    start = max(e.start for e in env.values())

    rows: list = []
    n = max(16, start)
    while True:
        if n > MAX_TERMS:
            raise DivergentSeries("all", "tail control", f"tail bound above {tol} after {MAX_TERMS} terms")
        rows.extend(_terms(sys, x0, len(rows) + 1, n))
        tail_mass = float(pv.tail(n))
        tail_moment = float(pv.tail_moment(n))
        bounds = {col: e.const * tail_mass + e.slope * tail_moment for col, e in env.items()}
        if max(bounds.values()) <= 0.5 * tol:
            break
        n *= 2

    sums = {}
    for col, k in zip(_COLUMNS, (2, 3, 4, 5, 6)):
        e = env[col]
        bad = next((r for r in rows if r[0] >= e.start and abs(r[k]) > e(r[0]) * (1 + 1e-12)), None)
        if bad is not None:
            if strict:
                raise DivergentSeries(
                    col, SERIES_CONDITION[col],
                    f"term {bad[0]} has |q| = {abs(bad[k]):.6g} above its envelope {e(bad[0]):.6g}",
                )
            sign = -1.0 if col in ("entropy", "log_gamma") else 1.0
            sums[col] = Estimate(sign * math.inf, math.inf)
            continue
        terms = [r[1] * r[k] for r in rows]
        value = math.fsum(terms)
        # each term carries a few ulps from log/multiply; fsum itself is exact-rounded
        rounding = 8 * EPS * math.fsum(abs(t) for t in terms) + EPS * abs(value)
        sums[col] = Estimate(value, bounds[col] + rounding)
    return MomentReport(x0=tuple(x0.tolist()), terms_used=n, **sums)


@dataclass(frozen=True)
class MembershipFlags:
    mean_Gamma_finite: bool
    displacement_finite: bool
    log_Gamma_negative: bool
    entropy_finite: bool
    log_gamma_finite: bool
    log_gamma_negative: bool  # warning only; implied when the other flags hold

    @property
    def accepted(self) -> bool:
        return not self.failed()

    def failed(self) -> list[str]:
        names = ("mean_Gamma_finite", "displacement_finite", "log_Gamma_negative",
                 "entropy_finite", "log_gamma_finite")
        return [n for n in names if not getattr(self, n)]

    def to_dict(self) -> dict:
        out = asdict(self)
        out["accepted"] = self.accepted
        return out


def check_membership(report: MomentReport) -> MembershipFlags:
    fin = lambda e: math.isfinite(e.value) and math.isfinite(e.error)
    return MembershipFlags(
        mean_Gamma_finite=fin(report.mean_Gamma),
        displacement_finite=fin(report.displacement),
        log_Gamma_negative=fin(report.log_Gamma) and report.log_Gamma.hi < 0,
        entropy_finite=fin(report.entropy),
        log_gamma_finite=fin(report.log_gamma),
        log_gamma_negative=fin(report.log_gamma) and report.log_gamma.hi < 0,
    )


def quotient(num: Estimate, den: Estimate) -> Estimate:
    """Enclosure of ``num / den`` for ``den`` bounded away from zero (outward rounded)."""
    if den.lo <= 0 <= den.hi:
        raise ZeroDivisionError("denominator enclosure contains zero")
    cands = [a / b for a in (num.lo, num.hi) for b in (den.lo, den.hi)]
    lo = math.nextafter(min(cands), -math.inf)
    hi = math.nextafter(max(cands), math.inf)
    value = num.value / den.value
    return Estimate(value, max(value - lo, hi - value) if (num.error or den.error) else 0.0)


@dataclass
class BoundsReport:
    s_lower: Estimate
    s_upper: Estimate
    flags: MembershipFlags
    moments: MomentReport
    notes: list[str] = field(default_factory=list)
    system: str = ""

    def to_dict(self) -> dict:
        return {
            "schema": "ifsdim.bounds/1",
            "system": self.system,
            "s_lower": asdict(self.s_lower),
            "s_upper": asdict(self.s_upper),
            "conditions": self.flags.to_dict(),
            "moments": self.moments.to_dict(),
            "notes": list(self.notes),
        }


def _printed_notes(sys: IfsSystem, values: dict[str, float]) -> list[str]:
    notes = []
    for key, text in sys.printed.items():
        if key not in values:
            continue
        printed = float(text)
        decimals = len(text.split(".")[1]) if "." in text else 0
        unit = 10.0**-decimals
        got = values[key]
        if abs(got - printed) > unit:
            notes.append(
                f"{key}: computed {got:.6g} differs from the printed value {text} "
                f"by more than one unit in its last place"
            )
    return notes


def dimension_bounds(sys: IfsSystem, tol: float = 1e-6, x0=None) -> BoundsReport:
    """``s_lower = H / sum p log gamma`` and ``s_upper = H / sum p log Gamma``.

    ``H = sum p log p``.  The sums are tightened until both quotient
    enclosures have radius at most ``tol``.  Raises :class:`HypothesisViolated`
    when a membership condition fails.
    """
    sum_tol = tol
    while True:
        rep = moment_sums(sys, x0, sum_tol, strict=False)
        flags = check_membership(rep)
        if not flags.accepted:
            raise HypothesisViolated(flags.failed())
        if not flags.log_gamma_negative:
            raise HypothesisViolated(["log_gamma_negative"])
        lower = quotient(rep.entropy, rep.log_gamma)
        upper = quotient(rep.entropy, rep.log_Gamma)
        if max(lower.error, upper.error) <= tol or sys.finite or sum_tol < 1e-15:
            break
        sum_tol /= 10
    values = {k: getattr(rep, k).value for k in SERIES_CONDITION}
    values.update(s_lower=lower.value, s_upper=upper.value)
    return BoundsReport(lower, upper, flags, rep, _printed_notes(sys, values), sys.name)
