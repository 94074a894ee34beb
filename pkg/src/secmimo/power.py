"""Signal/AN power allocation for the large-system secrecy rate.

Substituting q = (1 - K p)/(N_t - K) turns (1 + SINR_user)/(1 + SINR_eve) into a
ratio of quadratics (a1 p^2 + b1 p + c1)/(a2 p^2 + b2 p + c2) with c1 = c2.
Stationary points, the positivity condition and the optimal split follow from
these six coefficients.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .asymptotic import ThetaSet, rate_pq
from .errors import ValidationError

DEGENERATE_RTOL = 1e-12


@dataclass(frozen=True)
class QuadraticCoefficients:
    a1: float
    b1: float
    c1: float
    a2: float
    b2: float
    c2: float


def quadratic_coefficients(
    thetas: ThetaSet, gamma: float, N_t: int, K: int, printed: bool = False
) -> QuadraticCoefficients:
    """Numerator (a1, b1, c1) and denominator (a2, b2, c2) coefficients in p.

    ``printed=True`` reproduces two typeset variants found in the literature:
    a1 with -(N_t-K) theta_bp and b1 with ((N_t-K) theta_eq - K theta_eq) as the
    last factor. The default is the form obtained by direct substitution, for
    which log2(num/den) equals the secrecy rate before clamping.
    """
    n = N_t - K
    if n <= 0:
        raise ValidationError("need N_t > K")
    tm, bp, bq, ee, eq = thetas.theta_m, thetas.theta_bp, thetas.theta_bq, thetas.theta_ee, thetas.theta_eq
    Bq = gamma * bq + n
    Be = gamma * eq + n
    D_u = n * bp - K * bq
    A_e = n * ee - K * eq
    A_u = n * tm + n * bp - K * bq
    c = Bq * Be
    if printed:
        a1 = -(gamma**2) * (n * tm - n * bp - K * bq) * K * eq
        b1 = gamma * A_u * Be + gamma * Bq * (n * eq - K * eq)
    else:
        a1 = -(gamma**2) * A_u * K * eq
        b1 = gamma * A_u * Be - gamma * Bq * K * eq
    a2 = gamma**2 * D_u * A_e
    b2 = gamma * Bq * A_e + gamma * D_u * Be
    return QuadraticCoefficients(a1, b1, c, a2, b2, c)


def _degenerate(x: float, *scale: float) -> bool:
    return abs(x) <= DEGENERATE_RTOL * max(abs(s) for s in scale) if any(scale) else x == 0


def stationary_points(coeffs: QuadraticCoefficients) -> tuple[float | None, float | None]:
    """Roots of (a1 b2 - a2 b1) p^2 + 2 (a1 c2 - a2 c1) p + (b1 - b2) c1 = 0.

    Returns (p1, p2) with p1 taking the minus sign, or (None, None) when the
    leading coefficient vanishes or the discriminant is negative.
    """
    a1, b1, c1, a2, b2, c2 = coeffs.a1, coeffs.b1, coeffs.c1, coeffs.a2, coeffs.b2, coeffs.c2
    den = a1 * b2 - a2 * b1
    if _degenerate(den, a1 * b2, a2 * b1):
        return None, None
    h = a1 * c2 - a2 * c1
    disc = h * h - den * (b1 - b2) * c1
    if disc < 0:
        return None, None
    r = math.sqrt(disc)
    return (-h - r) / den, (-h + r) / den


class Domain(str, enum.Enum):
    COROLLARY_LITERAL = "COROLLARY_LITERAL"
    FEASIBLE_Q = "FEASIBLE_Q"


@dataclass(frozen=True)
class AllocationResult:
    p_star: float
    q_star: float
    rate_at_star: float
    candidates: list = field(default_factory=list)


def _rate(thetas: ThetaSet, p: float, gamma: float, N_t: int, K: int) -> float:
    q = (1.0 - K * p) / (N_t - K)
    with np.errstate(invalid="ignore", divide="ignore"):
        return float(rate_pq(thetas, p, q, gamma))


def _best(candidates: list, N_t: int, K: int) -> AllocationResult:
    best_p, best_r = candidates[0]
    for p, r in candidates[1:]:
        if not math.isnan(r) and (math.isnan(best_r) or r > best_r):
            best_p, best_r = p, r
    return AllocationResult(best_p, (1.0 - K * best_p) / (N_t - K), best_r, list(candidates))


def optimal_power(
    thetas: ThetaSet,
    gamma: float,
    N_t: int,
    K: int,
    domain: Domain | str = Domain.FEASIBLE_Q,
    printed: bool = False,
) -> AllocationResult:
    """Best p among the boundary point and the in-domain stationary points.

    COROLLARY_LITERAL searches [0, 1] with boundary candidate 1 (q may be
    negative there); FEASIBLE_Q searches [0, 1/K] with boundary candidate 1/K.
    When the quadratic term of the stationarity condition vanishes, its single
    linear root is also tried.
    """
    domain = Domain(domain)
    coeffs = quadratic_coefficients(thetas, gamma, N_t, K, printed=printed)
    hi = 1.0 if domain is Domain.COROLLARY_LITERAL else 1.0 / K
    roots = [r for r in stationary_points(coeffs) if r is not None]
    den = coeffs.a1 * coeffs.b2 - coeffs.a2 * coeffs.b1
    if not roots and _degenerate(den, coeffs.a1 * coeffs.b2, coeffs.a2 * coeffs.b1):
        da = coeffs.a1 - coeffs.a2
        if da != 0:
            roots.append(-(coeffs.b1 - coeffs.b2) / (2.0 * da))
    ps = [hi] + [r for r in roots if 0.0 <= r <= hi]
    return _best([(p, _rate(thetas, p, gamma, N_t, K)) for p in ps], N_t, K)


class ThresholdKind(str, enum.Enum):
    P_ABOVE = "P_ABOVE"
    P_BELOW = "P_BELOW"
    ALWAYS = "ALWAYS"
    NEVER = "NEVER"


@dataclass(frozen=True)
class FeasibilityThreshold:
    kind: ThresholdKind
    threshold: float | None

    def admits(self, p) -> np.ndarray | bool:
        """Whether a positive secrecy rate is possible at signal share p > 0."""
        p = np.asarray(p, dtype=float)
        if self.kind is ThresholdKind.P_ABOVE:
            out = p > self.threshold
        elif self.kind is ThresholdKind.P_BELOW:
            out = p < self.threshold
        else:
            out = np.full(p.shape, self.kind is ThresholdKind.ALWAYS)
        return out if out.ndim else bool(out)


def feasibility_threshold(coeffs: QuadraticCoefficients) -> FeasibilityThreshold:
    """For p > 0: rate > 0 iff (a1 - a2) p + (b1 - b2) > 0."""
    da = coeffs.a1 - coeffs.a2
    db = coeffs.b1 - coeffs.b2
    if _degenerate(da, coeffs.a1, coeffs.a2):
        return FeasibilityThreshold(ThresholdKind.ALWAYS if db > 0 else ThresholdKind.NEVER, None)
    kind = ThresholdKind.P_ABOVE if da > 0 else ThresholdKind.P_BELOW
    return FeasibilityThreshold(kind, -db / da)


def _check_iid_args(P01, beta_B, P_E, beta_E, tau, N0):
    if min(P01, P_E, tau, N0, beta_E) < 0 or beta_B <= 0 or P01 <= 0:
        raise ValidationError("powers and gains must be nonnegative, with P01 > 0 and beta_B > 0")


def iid_single_cell_threshold(P01, beta_B, P_E, beta_E, tau, N0, gamma) -> float:
    """p_th,1: secure transmission needs p < p_th,1 (single cell, single user, i.i.d. fading)."""
    _check_iid_args(P01, beta_B, P_E, beta_E, tau, N0)
    if gamma <= 0:
        raise ValidationError("gamma must be positive")
    mid = (N0 + tau * (P01 * beta_B + P_E * beta_E)) * (P01 * beta_B**2 - P_E * beta_E**2)
    mid /= P01 * beta_B**2 * gamma * beta_E * (N0 + tau * P01 * beta_B)
    return 1.0 + mid - _iid_last(P01, beta_B, P_E, beta_E, tau, N0)


def _iid_last(P01, beta_B, P_E, beta_E, tau, N0) -> float:
    return P_E * beta_E * (N0 + tau * P_E * beta_E) / (P01 * beta_B * (N0 + tau * P01 * beta_B))


def iid_threshold_high_snr(P01, beta_B, P_E, beta_E, tau, N0) -> float:
    _check_iid_args(P01, beta_B, P_E, beta_E, tau, N0)
    return 1.0 - _iid_last(P01, beta_B, P_E, beta_E, tau, N0)


def grid_search_rate(
    thetas: ThetaSet, gamma: float, N_t: int, K: int, p_grid_step: float = 1e-4
) -> AllocationResult:
    """Exhaustive search of the secrecy rate over p in {0, step, 2 step, ...} and 1/K."""
    if not 0 < p_grid_step <= 1e-2:
        raise ValidationError("grid step must lie in (0, 1e-2]")
    hi = 1.0 / K
    grid = np.arange(0.0, hi, p_grid_step)
    grid = np.append(grid, hi)
    q = (1.0 - K * grid) / (N_t - K)
    q[-1] = 0.0
    rates = rate_pq(thetas, grid, q, gamma)
    i = int(np.argmax(rates))
    return AllocationResult(float(grid[i]), float(q[i]), float(rates[i]), list(zip(grid.tolist(), rates.tolist())))
