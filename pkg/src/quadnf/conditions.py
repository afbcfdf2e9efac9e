"""Exact membership tests for the normal-form spaces.

Every check returns a ``ConditionReport`` holding named residual series.
A condition passes exactly when its residual is the zero series; there
are no tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .coeffs import I
from .gseries import BigradedSeries, SeriesError
from .quadric import HermitianFamily, Kstar_apply, cm_trace, delta_apply, deltastar_apply

__all__ = [
    "ConditionReport",
    "check_N0",
    "check_N1",
    "check_Nd",
    "check_Noff",
    "check_CM",
    "check_space",
]


@dataclass
class ConditionReport:
    """Named residuals; ``passed`` iff all of them vanish."""

    residuals: dict = field(default_factory=dict)
    checked_range: str = ""

    @property
    def passed(self) -> bool:
        return all(not r for r in self.residuals.values())

    def failures(self):
        return [name for name, r in self.residuals.items() if r]

    def merge(self, other: "ConditionReport") -> "ConditionReport":
        res = dict(self.residuals)
        res.update(other.residuals)
        rng = "; ".join(x for x in (self.checked_range, other.checked_range) if x)
        return ConditionReport(res, rng)

    def to_json(self):
        return {
            "passed": self.passed,
            "checked_range": self.checked_range,
            "conditions": {name: {"passed": not r, "residual_terms": len(r)}
                           for name, r in self.residuals.items()},
        }


def _require_real(phi: BigradedSeries):
    if not phi.is_real_valued():
        raise SeriesError("normal-form checks need a real-valued series")


def check_N0(phi: BigradedSeries) -> ConditionReport:
    """``Phi(z, 0, u) = Phi(0, zbar, u) = 0``: residual is the sum of all
    ``Phi_{p,0}`` and ``Phi_{0,p}`` (``p >= 0``)."""
    _require_real(phi)
    n = phi.n
    res = phi._like({k: v for k, v in phi.terms.items()
                     if not any(k[:n]) or not any(k[n:2 * n])})
    return ConditionReport({"N0": res}, "all (p,0) and (0,p)")


def check_N1(phi: BigradedSeries, family: HermitianFamily, k_max=None) -> ConditionReport:
    """``K* Phi_{p,1} = Kbar* Phi_{1,p} = 0`` for ``1 < p <= min(k_max, cap)``."""
    _require_real(phi)
    top = phi.cap if k_max is None else min(k_max, phi.cap)
    res = {}
    for p in range(2, top + 1):
        res[f"N1 K*Phi[{p},1]"] = Kstar_apply(phi.extract_pq(p, 1), family)
        res[f"N1 Kbar*Phi[1,{p}]"] = Kstar_apply(phi.extract_pq(1, p), family, conjugated=True)
    return ConditionReport(res, f"N1 for 1 < p <= {top}")


def nd_residuals(phi: BigradedSeries, family: HermitianFamily):
    p11 = phi.extract_pq(1, 1)
    p22 = phi.extract_pq(2, 2)
    p33 = phi.extract_pq(3, 3)
    ds = lambda x: deltastar_apply(x, family)  # noqa: E731
    d33 = ds(p33)
    dd33 = ds(d33)
    r1 = ds(p11).scale(-6) + ds(dd33)
    r2 = Kstar_apply(p11 - ds(p22).scale(I) - dd33, family)
    return r1, r2


def check_Nd(phi: BigradedSeries, family: HermitianFamily) -> ConditionReport:
    """The two diagonal conditions on ``Phi_{1,1}, Phi_{2,2}, Phi_{3,3}``."""
    _require_real(phi)
    r1, r2 = nd_residuals(phi, family)
    return ConditionReport({"Nd trace": r1, "Nd K*": r2}, "diagonal (1,1),(2,2),(3,3)")


def noff_residuals(phi: BigradedSeries, family: HermitianFamily):
    ds = lambda x: deltastar_apply(x, family)  # noqa: E731
    a = phi.extract_pq(2, 3) + delta_apply(phi.extract_pq(1, 2), family).scale(I)
    b = phi.extract_pq(3, 2) - delta_apply(phi.extract_pq(2, 1), family).scale(I)
    r1 = Kstar_apply(ds(ds(a)), family)
    r2 = Kstar_apply(ds(ds(b)), family, conjugated=True)
    return r1, r2


def check_Noff(phi: BigradedSeries, family: HermitianFamily) -> ConditionReport:
    """Off-diagonal conditions on ``(2,3)`` and ``(3,2)`` corrected by ``Delta``."""
    _require_real(phi)
    r1, r2 = noff_residuals(phi, family)
    return ConditionReport({"Noff (2,3)": r1, "Noff (3,2)": r2}, "off-diagonal (2,3),(3,2)")


def check_CM(phi: BigradedSeries, family: HermitianFamily) -> ConditionReport:
    """Chern-Moser conditions for ``d = 1``."""
    if family.d != 1 or phi.d != 1:
        raise SeriesError("Chern-Moser conditions need d = 1")
    _require_real(phi)
    n = phi.n
    low = phi._like({k: v for k, v in phi.terms.items()
                     if min(sum(k[:n]), sum(k[n:2 * n])) <= 1})
    res = {
        "CM (p,0),(p,1)": low,
        "CM T Phi22": cm_trace(phi.extract_pq(2, 2), family, 1),
        "CM T^2 Phi23": cm_trace(phi.extract_pq(2, 3), family, 2),
        "CM T^3 Phi33": cm_trace(phi.extract_pq(3, 3), family, 3),
    }
    return ConditionReport(res, "Chern-Moser through the series cap")


def check_space(phi: BigradedSeries, family: HermitianFamily, space: str, k_max=None) -> ConditionReport:
    """All conditions of ``space`` in {"full", "weak", "cm"}."""
    if space == "cm":
        return check_CM(phi, family)
    rep = check_N0(phi).merge(check_N1(phi, family, k_max)).merge(check_Nd(phi, family))
    if space == "full":
        rep = rep.merge(check_Noff(phi, family))
    elif space != "weak":
        raise ValueError(f"unknown normal-form space {space!r}")
    return rep
