"""Null-space countermeasure: train, estimate and precode user m outside the eavesdropper's support.

V spans the eigenvectors of R^0_E whose eigenvalues are at most rel_tol times
the largest one. The reference base station projects the despread pilot-m
observation onto V, estimates the M-dimensional channel with a filter that
ignores the eavesdropper, and precodes along V h_hat_null / ||h_hat_null||.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .asymptotic import compute_theta_set, theta_m_value
from .channel import ChannelDraw, CorrelationSet, SystemConfig
from .errors import DegenerateError, NotApplicableError
from .linalg import hermitize, null_space_basis, solve_hermitian
from .rng import complex_normal
from .training import ChannelEstimate

DEFAULT_REL_TOL = 1e-6


@dataclass(frozen=True)
class NullSpaceContext:
    V: np.ndarray  # (N_t, M)
    M: int
    R_null: np.ndarray  # (L+1, M, M): V^H R^0_tm V
    R_hat_null: np.ndarray  # (M, M)
    filter: np.ndarray  # (M, M): h_hat_null = filter @ y_null
    rel_tol: float


def build_nullspace_context(
    corr: CorrelationSet, config: SystemConfig, rel_tol: float = DEFAULT_REL_TOL
) -> NullSpaceContext:
    R_E = corr.eve(0)
    V = null_space_basis(R_E, rel_tol)
    N, M = V.shape
    if M == 0:
        raise NotApplicableError(
            f"eavesdropper correlation at the reference base station has full rank {N} "
            f"at relative tolerance {rel_tol:g}; the null-space design is not applicable"
        )
    m = config.target
    P = config.powers
    Vh = V.conj().T
    R_null = np.stack([hermitize(Vh @ corr.user(t, m, 0) @ V) for t in range(config.L + 1)])
    Q = config.N0_ul * np.eye(M) + config.tau * np.einsum("t,tij->ij", P[:, m], R_null)
    R0 = R_null[0]
    filt = math.sqrt(P[0, m]) * solve_hermitian(Q, R0).conj().T
    R_hat = hermitize(config.tau * math.sqrt(P[0, m]) * filt @ R0)
    return NullSpaceContext(V, M, R_null, R_hat, filt, rel_tol)


def project_estimate(ctx: NullSpaceContext, y_0m: np.ndarray) -> np.ndarray:
    """h_hat_null from the full-dimensional despread pilot-m observation at the reference BS."""
    return ctx.filter @ (ctx.V.conj().T @ y_0m)


def nullspace_mmse_estimate(
    ctx: NullSpaceContext, draw: ChannelDraw, config: SystemConfig, rng: np.random.Generator
) -> ChannelEstimate:
    """Simulate the projected training observation and estimate h_null.

    The eavesdropper term V^H h^0_E is kept in the observation even though the
    filter ignores it.
    """
    m = config.target
    P = config.powers
    tau = config.tau
    Vh = ctx.V.conj().T
    y = sum(math.sqrt(P[t, m]) * tau * (Vh @ draw.user(t, m, 0)) for t in range(config.L + 1))
    y = y + math.sqrt(config.P_E) * tau * (Vh @ draw.eve(0))
    y = y + math.sqrt(tau * config.N0_ul) * complex_normal(rng, (ctx.M,))
    return ChannelEstimate(ctx.filter @ y, ctx.R_hat_null, hermitize(ctx.R_null[0] - ctx.R_hat_null))


def nullspace_precoder(estimate, ctx: NullSpaceContext) -> np.ndarray:
    """w = V h_hat_null / ||h_hat_null||; accepts a ChannelEstimate or a bare vector."""
    h = estimate.h_hat if isinstance(estimate, ChannelEstimate) else np.asarray(estimate)
    nrm = np.linalg.norm(h)
    if nrm == 0:
        raise DegenerateError("zero null-space channel estimate")
    return ctx.V @ (h / nrm)


def nullspace_theta_m(ctx: NullSpaceContext) -> float:
    return theta_m_value(ctx.R_null[0], ctx.R_hat_null)


def nullspace_asymptotic_rate(
    corr: CorrelationSet,
    config: SystemConfig,
    gamma: float | None = None,
    rel_tol: float = DEFAULT_REL_TOL,
    ctx: NullSpaceContext | None = None,
) -> float:
    """Large-system rate of the null-space design at p = 1/K, q = 0.

    theta_m uses the projected covariances, the reference-cell eavesdropper
    terms vanish (R^0_E -> 0) so the eavesdropper SINR is zero with q = 0, and
    the interference terms are those of the attacked multi-cell system.
    """
    gamma = config.gamma if gamma is None else gamma
    if ctx is None:
        ctx = build_nullspace_context(corr, config, rel_tol)
    thetas = compute_theta_set(corr, config, attacked=True)
    p = 1.0 / config.K
    theta_m = nullspace_theta_m(ctx)
    sinr = p * gamma * theta_m / (p * gamma * thetas.theta_bp + 1.0)
    return math.log2(1.0 + sinr)
