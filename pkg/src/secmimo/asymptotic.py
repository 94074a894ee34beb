"""Deterministic equivalents of the user and eavesdropper SINRs, and their convergence diagnostics.

All theta terms are unnormalized traces (they grow like N_t) combined with the
constant "+1" noise term, exactly as in the large-system secrecy rate formula.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .channel import CorrelationSet, SystemConfig, build_scenario, sample_channel_draw
from .downlink import PowerSplit, _apply_an, matched_filter_precoders
from .errors import DegenerateError, PreconditionError, ValidationError
from .linalg import solve_hermitian, trace_product
from .rng import substream
from .training import EstimatorBank, estimator_bank, simulate_despread_all

ORTH_RTOL = 1e-8


@dataclass(frozen=True)
class CellTerms:
    """Contributions of base station l to the theta terms of user m in cell 0."""

    cell: int
    tr_R0m: float  # tr(R^l_0m)
    tr_RE: float  # tr(R^l_E)
    interf_0m: float  # sum_{k != m} tr(R^l_0m R_hat_lk) / tr(R_hat_lk)
    interf_E: float  # sum_{k != m} tr(R^l_E R_hat_lk) / tr(R_hat_lk)
    lambda_0m: float
    lambda_E: float
    tr_hat_m: float  # tr(R_hat^l_lm)


@dataclass(frozen=True)
class ThetaSet:
    theta_m: float
    theta_bp: float
    theta_bq: float
    theta_ee: float
    theta_eq: float
    lambda_0m: np.ndarray
    lambda_E: np.ndarray
    C: np.ndarray | None = None
    N_t: int | None = None

    def replace(self, **changes) -> "ThetaSet":
        from dataclasses import replace

        return replace(self, **changes)


def _real_trace(A, B) -> float:
    return float(np.real(trace_product(A, B)))


def cell_terms(
    corr: CorrelationSet,
    config: SystemConfig,
    bank: EstimatorBank,
    l: int,
    P_E: float | None = None,
) -> CellTerms:
    """Trace terms contributed by base station l (must be an observer of ``corr``).

    ``P_E`` defaults to config.P_E when the bank is attacked and 0 otherwise.
    """
    if P_E is None:
        P_E = config.P_E if bank.attacked else 0.0
    i = corr.obs(l)
    m = config.target
    P = config.powers
    tau, N0 = config.tau, config.N0_ul
    R0m = corr.user(0, m, l)
    RE = corr.eve(l)
    tr_hat = bank.tr_hat[i]
    if np.any(tr_hat <= 0):
        raise DegenerateError(f"zero estimate covariance trace in cell {l}")
    interf_0m = interf_E = 0.0
    for k in range(config.K):
        if k == m:
            continue
        interf_0m += _real_trace(R0m, bank.R_hat[i, k]) / tr_hat[k]
        interf_E += _real_trace(RE, bank.R_hat[i, k]) / tr_hat[k]
    C = bank.filters[i, m]
    Ch = C.conj().T
    CCh = C @ Ch

    lam_0m = tau**2 * P[0, m] * abs(trace_product(C, R0m)) ** 2
    lam_0m += tau * N0 * _real_trace(R0m, CCh)
    R0mC = R0m @ C
    for t in range(1, config.L + 1):
        lam_0m += tau**2 * P[t, m] * _real_trace(R0mC, corr.user(t, m, l) @ Ch)
    lam_0m += tau**2 * P_E * _real_trace(R0mC, RE @ Ch)

    lam_E = tau**2 * P_E * abs(trace_product(C, RE)) ** 2
    lam_E += tau * N0 * _real_trace(RE, CCh)
    REC = RE @ C
    for t in range(config.L + 1):
        lam_E += tau**2 * P[t, m] * _real_trace(REC, corr.user(t, m, l) @ Ch)

    return CellTerms(
        cell=l,
        tr_R0m=float(np.real(np.trace(R0m))),
        tr_RE=float(np.real(np.trace(RE))),
        interf_0m=interf_0m,
        interf_E=interf_E,
        lambda_0m=float(lam_0m),
        lambda_E=float(lam_E),
        tr_hat_m=float(tr_hat[m]),
    )


def theta_m_value(R: np.ndarray, R_hat: np.ndarray) -> float:
    """tr(R_hat) + tr((R - R_hat) R_hat) / tr(R_hat)."""
    t = float(np.real(np.trace(R_hat)))
    if t <= 0:
        raise DegenerateError("zero estimate covariance trace")
    return t + _real_trace(R - R_hat, R_hat) / t


def assemble_thetas(terms: list[CellTerms], theta_m: float) -> tuple[float, float, float, float]:
    """(theta_bp, theta_bq, theta_ee, theta_eq) from per-cell terms; terms[0] must be cell 0."""
    if terms[0].cell != 0:
        raise ValidationError("first cell term must belong to the reference cell")
    X = sum(c.interf_0m for c in terms)
    theta_bp = X + sum(c.lambda_0m / c.tr_hat_m for c in terms[1:])
    theta_bq = sum(c.tr_R0m for c in terms) - X - sum(c.lambda_0m / c.tr_hat_m for c in terms)
    theta_ee = terms[0].lambda_E / terms[0].tr_hat_m
    theta_eq = (
        sum(c.tr_RE for c in terms)
        - sum(c.interf_E for c in terms)
        - sum(c.lambda_E / c.tr_hat_m for c in terms)
    )
    return float(theta_bp), float(theta_bq), float(theta_ee), float(theta_eq)


def compute_theta_set(
    corr: CorrelationSet,
    config: SystemConfig,
    attacked: bool = True,
    bank: EstimatorBank | None = None,
) -> ThetaSet:
    """Theta terms of the large-system SINRs; ``attacked=False`` sets P_E = 0 throughout."""
    if not corr.complete:
        raise ValidationError("theta terms need correlation matrices at every base station")
    if bank is None:
        bank = estimator_bank(corr, config, attacked)
    elif bank.attacked != attacked:
        raise ValidationError("estimator bank attack flag does not match")
    m = config.target
    terms = [cell_terms(corr, config, bank, l) for l in range(config.L + 1)]
    theta_m = theta_m_value(corr.user(0, m, 0), bank.R_hat[0, m])
    bp, bq, ee, eq = assemble_thetas(terms, theta_m)
    return ThetaSet(
        theta_m=theta_m,
        theta_bp=bp,
        theta_bq=bq,
        theta_ee=ee,
        theta_eq=eq,
        lambda_0m=np.array([c.lambda_0m for c in terms]),
        lambda_E=np.array([c.lambda_E for c in terms]),
        C=bank.filters[:, m].copy(),
        N_t=corr.N_t,
    )


def sinr_user_asymptotic(thetas: ThetaSet, split: PowerSplit, gamma: float) -> float:
    p, q = split.p, split.q
    return p * gamma * thetas.theta_m / (p * gamma * thetas.theta_bp + q * gamma * thetas.theta_bq + 1.0)


def sinr_eve_asymptotic(thetas: ThetaSet, split: PowerSplit, gamma: float) -> float:
    p, q = split.p, split.q
    return p * gamma * thetas.theta_ee / (q * gamma * thetas.theta_eq + 1.0)


def secrecy_rate_asymptotic(thetas: ThetaSet, split: PowerSplit, gamma: float) -> float:
    r = math.log2(1.0 + sinr_user_asymptotic(thetas, split, gamma)) - math.log2(
        1.0 + sinr_eve_asymptotic(thetas, split, gamma)
    )
    return max(0.0, r)


def rate_pq(thetas: ThetaSet, p, q, gamma):
    """Vectorized secrecy rate for raw (p, q) values; no feasibility check."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    su = p * gamma * thetas.theta_m / (p * gamma * thetas.theta_bp + q * gamma * thetas.theta_bq + 1.0)
    se = p * gamma * thetas.theta_ee / (q * gamma * thetas.theta_eq + 1.0)
    return np.maximum(0.0, np.log2(1.0 + su) - np.log2(1.0 + se))


# -- orthogonal eavesdropper ----------------------------------------------------


def check_orthogonality(corr: CorrelationSet, config: SystemConfig) -> None:
    """Require sum_t P_tm tr(R^l_tm R^l_E) = 0 at every base station (within 1e-8 N_t^2)."""
    P = config.powers
    m = config.target
    tol = ORTH_RTOL * corr.N_t**2
    worst, where = 0.0, None
    for l in corr.observers:
        RE = corr.eve(l)
        v = abs(sum(P[t, m] * trace_product(corr.user(t, m, l), RE) for t in range(config.L + 1)))
        if v > worst:
            worst, where = v, l
    if worst > tol:
        raise PreconditionError(
            f"eavesdropper not orthogonal to pilot-{config.m} users: "
            f"sum_t P_tm tr(R_tm R_E) = {worst:.3e} at base station {where} (tolerance {tol:.3e})"
        )


def orthogonal_case_rate(corr: CorrelationSet, config: SystemConfig, split: PowerSplit, gamma: float) -> float:
    """Secrecy rate when the eavesdropper's subspace is orthogonal to the pilot-m users.

    Independent code path: estimates are built from the attack-free training
    covariance and no eavesdropper term is evaluated at all.
    """
    if not corr.complete:
        raise ValidationError("need correlation matrices at every base station")
    check_orthogonality(corr, config)
    m = config.target
    P = config.powers
    tau, N0, N = config.tau, config.N0_ul, corr.N_t
    I = np.eye(N)
    X = lam_sum_all = lam_sum_inter = tr_sum = 0.0
    theta_m = None
    for l in range(config.L + 1):
        R0m = corr.user(0, m, l)
        tr_sum += float(np.real(np.trace(R0m)))
        for k in range(config.K):
            Rlk = corr.user(l, k, l)
            Q = N0 * I + tau * sum(P[t, k] * corr.user(t, k, l) for t in range(config.L + 1))
            R_hat = P[l, k] * tau * Rlk @ solve_hermitian(Q, Rlk)
            t_hat = float(np.real(np.trace(R_hat)))
            if t_hat <= 0:
                raise DegenerateError(f"zero estimate covariance trace for user {k} in cell {l}")
            if k != m:
                X += _real_trace(R0m, R_hat) / t_hat
                continue
            C = math.sqrt(P[l, m]) * solve_hermitian(Q, Rlk).conj().T
            Ch = C.conj().T
            lam = tau**2 * P[0, m] * abs(trace_product(C, R0m)) ** 2
            lam += sum(
                tau**2 * P[t, m] * _real_trace(R0m @ C, corr.user(t, m, l) @ Ch) for t in range(1, config.L + 1)
            )
            lam += tau * N0 * _real_trace(R0m, C @ Ch)
            lam_sum_all += lam / t_hat
            if l >= 1:
                lam_sum_inter += lam / t_hat
            if l == 0:
                theta_m = theta_m_value(R0m, R_hat)
    theta_bp = X + lam_sum_inter
    theta_bq = tr_sum - X - lam_sum_all
    p, q = split.p, split.q
    sinr = p * gamma * theta_m / (p * gamma * theta_bp + q * gamma * theta_bq + 1.0)
    return math.log2(1.0 + sinr)


# -- convergence diagnostics ----------------------------------------------------

DIAGNOSTICS = (
    "h0m_w0m",
    "h0m_w0k",
    "h0m_hhat_hhat_h0m",
    "hE_hhat_hhat_hE",
    "h0m_Unull",
    "hE_Unull",
)


@dataclass(frozen=True)
class DiagnosticRow:
    n_t: int
    quantity: str
    empirical: float
    closed_form: float

    @property
    def rel_gap(self) -> float:
        if self.closed_form == 0.0:
            return 0.0 if self.empirical == 0.0 else math.inf
        return abs(self.empirical - self.closed_form) / abs(self.closed_form)


def diagnostic_limits(corr: CorrelationSet, config: SystemConfig, bank: EstimatorBank) -> dict:
    """Closed-form limits (already divided by N_t) of the reference-cell quadratic forms."""
    m = config.target
    N = corr.N_t
    c = cell_terms(corr, config, bank, 0)
    tr_hat = bank.tr_hat[corr.obs(0)]
    R0m = corr.user(0, m, 0)
    others = [k for k in range(config.K) if k != m]
    w0k = (
        float(np.mean([_real_trace(R0m, bank.R_hat[corr.obs(0), k]) / tr_hat[k] for k in others]))
        if others
        else 0.0
    )
    return {
        "h0m_w0m": theta_m_value(R0m, bank.R_hat[corr.obs(0), m]) / N,
        "h0m_w0k": w0k / N,
        "h0m_hhat_hhat_h0m": c.lambda_0m / N,
        "hE_hhat_hhat_hE": c.lambda_E / N,
        "h0m_Unull": (c.tr_R0m - c.interf_0m - c.lambda_0m / c.tr_hat_m) / N,
        "hE_Unull": (c.tr_RE - c.interf_E - c.lambda_E / c.tr_hat_m) / N,
    }


def diagnostic_samples(
    corr: CorrelationSet, config: SystemConfig, bank: EstimatorBank, trials: int, seed: int
) -> dict:
    """Monte Carlo means (divided by N_t) of the reference-cell quadratic forms."""
    m = config.target
    N = corr.N_t
    i0 = corr.obs(0)
    acc = dict.fromkeys(DIAGNOSTICS, 0.0)
    others = [k for k in range(config.K) if k != m]
    for j in range(trials):
        rng = substream(seed, "diagnostics", j)
        draw = sample_channel_draw(corr, rng)
        Y = simulate_despread_all(draw, config, bank.attacked, rng)
        H = np.einsum("kij,kj->ki", bank.filters[i0], Y[i0])
        if np.all(H == 0):
            continue
        W = matched_filter_precoders(H)
        h = draw.h_user[0, m, i0]
        hE = draw.h_eve[i0]
        acc["h0m_w0m"] += abs(np.vdot(h, W[m])) ** 2
        if others:
            acc["h0m_w0k"] += np.mean([abs(np.vdot(h, W[k])) ** 2 for k in others])
        acc["h0m_hhat_hhat_h0m"] += abs(np.vdot(h, H[m])) ** 2
        acc["hE_hhat_hhat_hE"] += abs(np.vdot(hE, H[m])) ** 2
        acc["h0m_Unull"] += np.linalg.norm(_apply_an(H, bank.tr_hat[i0], h)) ** 2
        acc["hE_Unull"] += np.linalg.norm(_apply_an(H, bank.tr_hat[i0], hE)) ** 2
    return {k: float(v) / (trials * N) for k, v in acc.items()}


def convergence_diagnostics(
    config: SystemConfig,
    N_t_list,
    trials: int,
    seed: int | None = None,
    attacked: bool = True,
) -> list[DiagnosticRow]:
    """Monte Carlo versus closed-form limits of the appendix quadratic forms over an N_t ladder.

    Only the reference base station's matrices are built, so large N_t stays
    affordable. The angle geometry is shared across the ladder.
    """
    N_t_list = [int(n) for n in N_t_list]
    if not N_t_list or any(b <= a for a, b in zip(N_t_list, N_t_list[1:])):
        raise ValidationError("N_t_list must be non-empty and strictly ascending")
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    seed = config.seed if seed is None else seed
    rows = []
    for n in N_t_list:
        cfg = config.replace(N_t=n)
        corr = build_scenario(cfg, observers=(0,))
        bank = estimator_bank(corr, cfg, attacked)
        limits = diagnostic_limits(corr, cfg, bank)
        emp = diagnostic_samples(corr, cfg, bank, trials, seed)
        rows.extend(DiagnosticRow(n, q, emp[q], limits[q]) for q in DIAGNOSTICS)
        del corr, bank
    return rows


def diagnostics_csv(rows: list[DiagnosticRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n_t", "quantity", "empirical", "closed_form", "rel_gap"])
    for r in rows:
        w.writerow([r.n_t, r.quantity, f"{r.empirical:.10g}", f"{r.closed_form:.10g}", f"{r.rel_gap:.10g}"])
    return buf.getvalue()
