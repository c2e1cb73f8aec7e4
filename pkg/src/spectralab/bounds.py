"""Universal eigenvalue inequalities, evaluated with quantified slack.

Every check takes a computed spectrum plus the geometric constants and
evaluates one inequality exactly as stated, reporting lhs, rhs, slack =
rhs - lhs, tightness = lhs/rhs, and pass/fail against a relative
tolerance.  Checks whose hypotheses fail (divergence-free tensor,
identity tensor, flat domain, Gaussian drift on an annulus) return a
not-applicable status instead of being skipped silently.

Writing s_i = lambda_i + (n^2 H0^2 + 4 C0)/(4 delta), the inequalities
are, with d = delta/(n epsilon) and the bracket
B_i = (sqrt(lambda_i) + T0/(2 sqrt(delta)))^2
      + (n^2 H0^2 + 4 C0 + 2 delta T0 eta0)/(4 delta):

    quadratic:      sum (l_{k+1}-l_i)^2 <= 4d sum (l_{k+1}-l_i) B_i
    low order:      sum_{i<=n} (l_{i+1}-l_1) <= (4 delta/eps) B_1
    divergence-free quadratic:  sum (s_{k+1}-s_i)^2 <= 4d sum (s_{k+1}-s_i) s_i
    power growth:   s_{k+1} <= (1+4d) k^{2d} s_1
    mean growth:    s_{k+1} <= (1+4d) mean_k(s)
    solved quadratic upper/gap bounds with discriminant
        D = (2d mean)^2 - (1+4d) var
    ratio:          (s_2+...+s_{n+1})/s_1 <= 4 delta/eps + n
    mean lower bound (identity tensor, flat):
        mean_k(s) >= n/sqrt((n+2)(n+4)) * 4 pi^2/(omega_n vol)^{2/n} * k^{2/n}
    Gaussian annulus forms with the additive constant n/4 - inf|x|^2/16
    sum bound with per-index bracket
        l_i + (T0/sqrt(delta)+eta0 sqrt(delta)) sqrt(l_i)
            + (n^2 H0^2 + (T0+delta eta0)^2)/(4 delta)

plus two asymptotic diagnostics: monotonicity of F_k/k^{4/n} with
F_k = (1+2/n) mean_k(s)^2 - mean_k(s^2), and the Weyl-limit ratio of
mean_k(s)/k^{2/n}.

All sums run in a fixed ascending order using numpy's pairwise summation,
so slack values are reproducible bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .coeffs import GeometricConstants
from .eigen import Spectrum

__all__ = [
    "BoundInput",
    "BoundReport",
    "NonpositiveSigmaError",
    "sigma_transform",
    "check_thm_1_1",
    "check_thm_1_2",
    "check_cor_1_3",
    "check_cor_1_4",
    "check_eq_1_6",
    "check_cor_1_5",
    "check_cor_1_6",
    "check_cor_1_7",
    "check_cor_1_8",
    "check_thm_5_1",
    "check_recursion_monotonicity",
    "weyl_diagnostic",
    "run_all",
    "CHECK_IDS",
]

DEFAULT_TOL_REL = 1e-9

CHECK_IDS = (
    "thm_1_1",
    "thm_1_2",
    "cor_1_3",
    "cor_1_4",
    "eq_1_6",
    "cor_1_5_upper",
    "cor_1_5_gap",
    "cor_1_5_vs_eq_1_6",
    "cor_1_6",
    "cor_1_7",
    "cor_1_8_general",
    "cor_1_8_c0free",
    "thm_5_1",
    "cor_5_2",
    "recursion_f_k",
    "weyl_diagnostic",
)


class NonpositiveSigmaError(ValueError):
    """The shifted spectrum lost positivity, signalling bad constants."""


@dataclass(frozen=True)
class BoundInput:
    """Everything a check needs: spectrum, constants, and domain facts.

    ``flat`` marks flat Euclidean domains (everything but the circle arc);
    ``t_identity`` marks the identity-tensor path; ``gaussian`` marks the
    |x|^2/4 drift, with ``inf_sq_radius`` the squared inner radius when the
    domain is an annulus.
    """

    spectrum: Spectrum
    constants: GeometricConstants
    n: int
    volume: float
    omega_n: float
    k: int = 1
    flat: bool = True
    t_identity: bool = False
    gaussian: bool = False
    inf_sq_radius: Optional[float] = None
    tol_rel: float = DEFAULT_TOL_REL

    def eigenvalues(self, count: int) -> np.ndarray:
        """First ``count`` converged eigenvalues, ascending."""
        lam = self.spectrum.eigenvalues[self.spectrum.converged]
        if lam.size < count:
            raise ValueError(
                f"need {count} converged eigenvalues, have {lam.size}"
            )
        return lam[:count]

    @property
    def converged_count(self) -> int:
        return int(np.count_nonzero(self.spectrum.converged))


@dataclass(frozen=True)
class BoundReport:
    """One inequality evaluation.

    ``lhs`` and ``rhs`` are the two sides as the inequality is stated;
    ``direction`` records its sense ("le" for lhs <= rhs, "ge" for the
    lower bounds, lhs >= rhs).  ``slack`` is always the margin to
    violation, so pass means slack >= -tol_rel * |rhs| in either case.
    ``status`` is "checked", "not-applicable", "diagnostic", or "error";
    ``passed`` is None unless status is "checked".
    """

    id: str
    k: int
    lhs: float = math.nan
    rhs: float = math.nan
    status: str = "checked"
    passed: Optional[bool] = None
    direction: str = "le"
    tol_rel: float = DEFAULT_TOL_REL
    constants_used: Optional[GeometricConstants] = None
    detail: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        if self.direction == "ge":
            return self.lhs - self.rhs
        return self.rhs - self.lhs

    @property
    def tightness(self) -> Optional[float]:
        if math.isnan(self.rhs) or math.isnan(self.lhs):
            return None
        if self.direction == "ge":
            return None if self.lhs <= 0.0 else self.rhs / self.lhs
        return None if self.rhs <= 0.0 else self.lhs / self.rhs

    def to_dict(self) -> dict:
        def clean(x):
            return None if (isinstance(x, float) and math.isnan(x)) else x

        return {
            "id": self.id,
            "k": self.k,
            "lhs": clean(self.lhs),
            "rhs": clean(self.rhs),
            "slack": clean(self.slack),
            "tightness": self.tightness,
            "pass": self.passed,
            "status": self.status,
            "direction": self.direction,
            "tol_rel": self.tol_rel,
            "constants": self.constants_used.to_dict() if self.constants_used else None,
            "detail": self.detail or None,
        }


def _checked(inp: BoundInput, check_id: str, k: int, lhs: float, rhs: float,
             detail: dict | None = None, direction: str = "le") -> BoundReport:
    slack = (lhs - rhs) if direction == "ge" else (rhs - lhs)
    passed = slack >= -inp.tol_rel * abs(rhs)
    return BoundReport(
        id=check_id,
        k=k,
        lhs=float(lhs),
        rhs=float(rhs),
        status="checked",
        passed=bool(passed),
        direction=direction,
        tol_rel=inp.tol_rel,
        constants_used=inp.constants,
        detail=detail or {},
    )


def _not_applicable(inp: BoundInput, check_id: str, k: int, reason: str) -> BoundReport:
    return BoundReport(
        id=check_id,
        k=k,
        status="not-applicable",
        tol_rel=inp.tol_rel,
        constants_used=inp.constants,
        detail={"reason": reason},
    )


def sigma_shift(inp: BoundInput) -> float:
    c = inp.constants
    return (inp.n**2 * c.H0**2 + 4.0 * c.C0) / (4.0 * c.delta)


def sigma_transform(inp: BoundInput) -> np.ndarray:
    """Shifted eigenvalues s_i = lambda_i + (n^2 H0^2 + 4 C0)/(4 delta).

    The divergence-free corollaries need s_1 > 0; losing that indicates
    constants inconsistent with the operator.
    """
    lam = inp.spectrum.eigenvalues[inp.spectrum.converged]
    sig = lam + sigma_shift(inp)
    if sig.size and sig[0] <= 0.0:
        raise NonpositiveSigmaError(
            f"sigma_1 = {sig[0]} <= 0 with C0 = {inp.constants.C0}; "
            "the shifted spectrum must stay positive"
        )
    return sig


def _divergence_free(inp: BoundInput) -> bool:
    return inp.constants.T0 == 0.0


def _quadratic_bracket(inp: BoundInput, lam: np.ndarray) -> np.ndarray:
    c = inp.constants
    extra = (inp.n**2 * c.H0**2 + 4.0 * c.C0 + 2.0 * c.delta * c.T0 * c.eta0) / (4.0 * c.delta)
    return (np.sqrt(lam) + c.T0 / (2.0 * math.sqrt(c.delta))) ** 2 + extra


def check_thm_1_1(inp: BoundInput) -> BoundReport:
    """Quadratic bound: sum of squared gaps against bracketed sum."""
    k = inp.k
    lam = inp.eigenvalues(k + 1)
    c = inp.constants
    gaps = lam[k] - lam[:k]
    lhs = np.sum(gaps**2)
    rhs = (4.0 * c.delta / (inp.n * c.epsilon)) * np.sum(gaps * _quadratic_bracket(inp, lam[:k]))
    return _checked(inp, "thm_1_1", k, lhs, rhs)


def check_thm_1_2(inp: BoundInput) -> BoundReport:
    """Sum of the n lowest gaps above lambda_1 against the bracket at lambda_1."""
    lam = inp.eigenvalues(inp.n + 1)
    c = inp.constants
    lhs = np.sum(lam[1 : inp.n + 1] - lam[0])
    rhs = (4.0 * c.delta / c.epsilon) * _quadratic_bracket(inp, lam[:1])[0]
    return _checked(inp, "thm_1_2", 0, lhs, rhs)


def check_cor_1_3(inp: BoundInput) -> BoundReport:
    """Divergence-free quadratic bound on the shifted spectrum."""
    k = inp.k
    if not _divergence_free(inp):
        return _not_applicable(inp, "cor_1_3", k, "requires divergence-free T (T0 = 0)")
    inp.eigenvalues(k + 1)
    sig = sigma_transform(inp)
    c = inp.constants
    gaps = sig[k] - sig[:k]
    lhs = np.sum(gaps**2)
    rhs = (4.0 * c.delta / (inp.n * c.epsilon)) * np.sum(gaps * sig[:k])
    return _checked(inp, "cor_1_3", k, lhs, rhs)


def check_cor_1_4(inp: BoundInput) -> BoundReport:
    """Power-of-k growth bound on the shifted spectrum."""
    k = inp.k
    if not _divergence_free(inp):
        return _not_applicable(inp, "cor_1_4", k, "requires divergence-free T (T0 = 0)")
    inp.eigenvalues(k + 1)
    sig = sigma_transform(inp)
    c = inp.constants
    d = c.delta / (inp.n * c.epsilon)
    lhs = sig[k]
    rhs = (1.0 + 4.0 * d) * k ** (2.0 * d) * sig[0]
    return _checked(inp, "cor_1_4", k, lhs, rhs)


def _eq_1_6_rhs(inp: BoundInput, sig: np.ndarray, k: int) -> float:
    c = inp.constants
    d = c.delta / (inp.n * c.epsilon)
    return (1.0 + 4.0 * d) * np.sum(sig[:k]) / k


def check_eq_1_6(inp: BoundInput) -> BoundReport:
    """Mean growth bound on the shifted spectrum."""
    k = inp.k
    if not _divergence_free(inp):
        return _not_applicable(inp, "eq_1_6", k, "requires divergence-free T (T0 = 0)")
    inp.eigenvalues(k + 1)
    sig = sigma_transform(inp)
    return _checked(inp, "eq_1_6", k, sig[k], _eq_1_6_rhs(inp, sig, k))


def check_cor_1_5(inp: BoundInput) -> list[BoundReport]:
    """Solved quadratic: upper bound, consecutive-gap bound, and the
    comparison against the mean growth bound.

    The discriminant is mathematically nonnegative whenever the quadratic
    inequality holds; a small negative value is clamped to zero (roundoff
    near the degenerate k = 1 case), a large one is reported as an error.
    """
    k = inp.k
    ids = ("cor_1_5_upper", "cor_1_5_gap", "cor_1_5_vs_eq_1_6")
    if not _divergence_free(inp):
        return [_not_applicable(inp, i, k, "requires divergence-free T (T0 = 0)") for i in ids]
    inp.eigenvalues(k + 1)
    sig = sigma_transform(inp)
    c = inp.constants
    d = c.delta / (inp.n * c.epsilon)

    avg = np.sum(sig[:k]) / k
    var = np.sum((sig[:k] - avg) ** 2) / k
    disc = (2.0 * d * avg) ** 2 - (1.0 + 4.0 * d) * var
    tol_disc = 1e-9 * (2.0 * d * avg) ** 2
    clamped = False
    if -tol_disc <= disc < 0.0:
        disc = 0.0
        clamped = True
    detail = {"discriminant": float(disc), "clamped": clamped, "mean": float(avg),
              "variance": float(var)}
    if disc < 0.0:
        err = BoundReport(
            id="cor_1_5_upper", k=k, status="error", tol_rel=inp.tol_rel,
            constants_used=inp.constants,
            detail={**detail, "reason": "discriminant negative beyond roundoff window"},
        )
        return [err, replace(err, id="cor_1_5_gap"), replace(err, id="cor_1_5_vs_eq_1_6")]

    root = math.sqrt(disc)
    upper = (1.0 + 2.0 * d) * avg + root
    reports = [
        _checked(inp, "cor_1_5_upper", k, sig[k], upper, detail),
        _checked(inp, "cor_1_5_gap", k, sig[k] - sig[k - 1], 2.0 * root, detail),
        # the solved bound must improve on the mean growth bound
        _checked(inp, "cor_1_5_vs_eq_1_6", k, upper, _eq_1_6_rhs(inp, sig, k), detail),
    ]
    return reports


def check_cor_1_6(inp: BoundInput) -> BoundReport:
    """Mean lower bound in the spirit of the Polya conjecture.

    Applies on the identity-tensor path over flat Euclidean domains, where
    epsilon = delta = 1 and the shift uses the plain drift constants.
    """
    k = inp.k
    if not (inp.t_identity and _divergence_free(inp)):
        return _not_applicable(inp, "cor_1_6", k, "requires T = I (drifted Laplacian)")
    if not inp.flat:
        return _not_applicable(inp, "cor_1_6", k, "requires a flat Euclidean domain")
    inp.eigenvalues(k)
    sig = sigma_transform(inp)
    n = inp.n
    mean = np.sum(sig[:k]) / k
    bound = (
        n / math.sqrt((n + 2.0) * (n + 4.0))
        * 4.0 * math.pi**2 / (inp.omega_n * inp.volume) ** (2.0 / n)
        * k ** (2.0 / n)
    )
    return _checked(inp, "cor_1_6", k, mean, bound, direction="ge")


def check_cor_1_7(inp: BoundInput) -> BoundReport:
    """Ratio bound (s_2 + ... + s_{n+1}) / s_1 <= 4 delta/eps + n."""
    if not _divergence_free(inp):
        return _not_applicable(inp, "cor_1_7", 0, "requires divergence-free T (T0 = 0)")
    inp.eigenvalues(inp.n + 1)
    sig = sigma_transform(inp)
    c = inp.constants
    lhs = np.sum(sig[1 : inp.n + 1]) / sig[0]
    rhs = 4.0 * c.delta / c.epsilon + inp.n
    return _checked(inp, "cor_1_7", 0, lhs, rhs)


def check_cor_1_8(inp: BoundInput) -> list[BoundReport]:
    """Gaussian-drift annulus bounds.

    The general form carries the additive constant n/4 - inf|x|^2/16; when
    the inner radius satisfies r^2 = 4n that constant vanishes and the
    bound takes the same shape as the plain Laplacian one.
    """
    k = inp.k
    if not (inp.gaussian and inp.t_identity):
        na = _not_applicable(inp, "cor_1_8_general", k, "requires the Gaussian drift |x|^2/4 with T = I")
        return [na, replace(na, id="cor_1_8_c0free")]
    if inp.inf_sq_radius is None:
        na = _not_applicable(inp, "cor_1_8_general", k, "requires an annulus domain")
        return [na, replace(na, id="cor_1_8_c0free")]

    lam = inp.eigenvalues(k + 1)
    n = inp.n
    gaps = lam[k] - lam[:k]
    lhs = np.sum(gaps**2)
    shift = n / 4.0 - inp.inf_sq_radius / 16.0
    rhs_general = (4.0 / n) * np.sum(gaps * (lam[:k] + shift))
    reports = [_checked(inp, "cor_1_8_general", k, lhs, rhs_general,
                        {"additive_constant": float(shift)})]

    if math.isclose(inp.inf_sq_radius, 4.0 * n, rel_tol=1e-12):
        rhs_free = (4.0 / n) * np.sum(gaps * lam[:k])
        reports.append(_checked(inp, "cor_1_8_c0free", k, lhs, rhs_free))
    else:
        reports.append(_not_applicable(
            inp, "cor_1_8_c0free", k,
            f"inner radius squared {inp.inf_sq_radius} != 4n = {4 * n}",
        ))
    return reports


def _sum_bound_bracket(inp: BoundInput, lam: np.ndarray) -> np.ndarray:
    c = inp.constants
    lin = (c.T0 / math.sqrt(c.delta) + c.eta0 * math.sqrt(c.delta)) * np.sqrt(lam)
    return lam + lin + (inp.n**2 * c.H0**2 + (c.T0 + c.delta * c.eta0) ** 2) / (4.0 * c.delta)


def check_thm_5_1(inp: BoundInput) -> list[BoundReport]:
    """Alternative quadratic bound with sqrt(lambda) cross terms, plus its
    divergence-free specialization."""
    k = inp.k
    lam = inp.eigenvalues(k + 1)
    c = inp.constants
    gaps = lam[k] - lam[:k]
    lhs = np.sum(gaps**2)
    factor = 4.0 * c.delta / (inp.n * c.epsilon)
    rhs = factor * np.sum(gaps * _sum_bound_bracket(inp, lam[:k]))
    reports = [_checked(inp, "thm_5_1", k, lhs, rhs)]

    if _divergence_free(inp):
        bracket = (
            lam[:k]
            + c.eta0 * math.sqrt(c.delta) * np.sqrt(lam[:k])
            + (inp.n**2 * c.H0**2 + c.delta**2 * c.eta0**2) / (4.0 * c.delta)
        )
        rhs52 = factor * np.sum(gaps * bracket)
        reports.append(_checked(inp, "cor_5_2", k, lhs, rhs52))
    else:
        reports.append(_not_applicable(inp, "cor_5_2", k, "requires divergence-free T (T0 = 0)"))
    return reports


def _f_sequence(inp: BoundInput, upto: int) -> tuple[np.ndarray, np.ndarray]:
    sig = sigma_transform(inp)
    ks = np.arange(1, upto + 1)
    means = np.cumsum(sig[:upto]) / ks
    mean_sq = np.cumsum(sig[:upto] ** 2) / ks
    f = (1.0 + 2.0 / inp.n) * means**2 - mean_sq
    return ks, f


def check_recursion_monotonicity(inp: BoundInput) -> BoundReport:
    """Nonincreasing normalized recursion sequence F_k / k^{4/n}.

    Checked through the evaluation index k: the value at k must not exceed
    the minimum over earlier indices.  Indices with F <= 0 are skipped and
    listed; F_1 = (2/n) s_1^2 is always positive.
    """
    k = inp.k
    if not inp.t_identity:
        return _not_applicable(inp, "recursion_f_k", k, "requires T = I (drifted Laplacian)")
    if inp.converged_count < 3:
        return _not_applicable(inp, "recursion_f_k", k, "needs at least 3 converged eigenvalues")
    inp.eigenvalues(k)
    ks, f = _f_sequence(inp, k)
    g = f / ks ** (4.0 / inp.n)
    valid = f > 0.0
    skipped = ks[~valid].tolist()
    detail = {"F": f.tolist(), "normalized": g.tolist(), "skipped_ks": skipped}
    if not valid[k - 1]:
        return BoundReport(
            id="recursion_f_k", k=k, status="not-applicable", tol_rel=inp.tol_rel,
            constants_used=inp.constants, detail={**detail, "reason": f"F_{k} <= 0"},
        )
    lhs = g[k - 1]
    earlier = g[: k - 1][valid[: k - 1]]
    rhs = float(np.min(earlier)) if earlier.size else float(lhs)
    return _checked(inp, "recursion_f_k", k, lhs, rhs, detail)


def weyl_diagnostic(inp: BoundInput) -> BoundReport:
    """Empirical Weyl ratio mean_k(s)/k^{2/n} against its asymptotic limit.

    Diagnostic only: convergence in k is slow, so no pass/fail; ratios at
    k < 5 are flagged low-confidence, and k >= 20 is recommended.
    """
    k = inp.k
    if not inp.t_identity:
        return _not_applicable(inp, "weyl_diagnostic", k, "requires T = I (drifted Laplacian)")
    inp.eigenvalues(k)
    sig = sigma_transform(inp)
    n = inp.n
    empirical = np.sum(sig[:k]) / k / k ** (2.0 / n)
    limit = n / (n + 2.0) * 4.0 * math.pi**2 / (inp.omega_n * inp.volume) ** (2.0 / n)
    deviation = abs(empirical - limit) / limit
    return BoundReport(
        id="weyl_diagnostic", k=k, lhs=float(empirical), rhs=float(limit),
        status="diagnostic", tol_rel=inp.tol_rel, constants_used=inp.constants,
        detail={
            "relative_deviation": float(deviation),
            "low_confidence": bool(k < 5),
        },
    )


def run_all(inp: BoundInput, k_max: int, checks: Optional[set[str]] = None) -> list[BoundReport]:
    """Every applicable check for k = 1..k_max, the once-only checks, and
    the Weyl diagnostic at the largest k; deterministic (id, k) order.

    ``checks`` restricts to a subset of CHECK_IDS; not-applicable statuses
    are reported, never silently dropped.
    """
    if inp.converged_count < k_max + 1:
        raise ValueError(
            f"need {k_max + 1} converged eigenvalues for k_max = {k_max}, "
            f"have {inp.converged_count}"
        )
    if checks is not None:
        unknown = checks - set(CHECK_IDS)
        if unknown:
            raise ValueError(f"unknown check ids: {sorted(unknown)}")

    reports: list[BoundReport] = []
    for k in range(1, k_max + 1):
        at_k = replace(inp, k=k)
        reports.append(check_thm_1_1(at_k))
        reports.append(check_cor_1_3(at_k))
        reports.append(check_cor_1_4(at_k))
        reports.append(check_eq_1_6(at_k))
        reports.extend(check_cor_1_5(at_k))
        reports.append(check_cor_1_6(at_k))
        reports.extend(check_cor_1_8(at_k))
        reports.extend(check_thm_5_1(at_k))
        reports.append(check_recursion_monotonicity(at_k))
    reports.append(check_thm_1_2(inp))
    reports.append(check_cor_1_7(inp))
    reports.append(weyl_diagnostic(replace(inp, k=k_max)))

    if checks is not None:
        reports = [r for r in reports if r.id in checks]
    reports.sort(key=lambda r: (r.id, r.k))
    return reports
