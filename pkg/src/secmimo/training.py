"""Uplink training under the pilot-contamination attack, and MMSE channel estimation.

The tau*N_t received pilot block is never formed. Each base station's despread
observation for pilot k is simulated directly:

    y_lk = tau * sum_t sqrt(P_tk) h^l_tk  [+ tau sqrt(P_E) h^l_E  if k == m]  + n',
    n' ~ CN(0, tau N0 I),

which is the exact law of (omega_k kron I)^H y when ||omega_k||^2 = tau.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import ChannelDraw, CorrelationSet, SystemConfig
from .errors import NumericalError, ValidationError
from .linalg import hermitian_eig, hermitize, solve_hermitian
from .rng import complex_normal

PSD_CONSISTENCY_RTOL = 1e-8


@dataclass(frozen=True)
class PilotBook:
    tau: int
    pilots: np.ndarray  # (K, tau); row k is omega_k

    def gram(self) -> np.ndarray:
        return self.pilots.conj() @ self.pilots.T


@dataclass(frozen=True)
class DespreadObservation:
    y: np.ndarray
    cell: int
    user: int


@dataclass(frozen=True)
class ChannelEstimate:
    h_hat: np.ndarray
    R_hat: np.ndarray
    R_err: np.ndarray


def pilot_book(K: int, tau: int) -> PilotBook:
    """First K columns of the tau-point DFT matrix (unnormalized, so omega^H omega = tau)."""
    if tau < K:
        raise ValidationError(f"tau={tau} < K={K}: cannot build {K} orthogonal pilots")
    n = np.arange(tau)
    F = np.exp(-2j * np.pi * np.outer(np.arange(K), n) / tau)
    return PilotBook(tau, F)


def _attacked_pilot(k: int, config: SystemConfig, attacked: bool) -> bool:
    return attacked and k == config.target


def simulate_despread(
    target: tuple[int, int],
    draw: ChannelDraw,
    config: SystemConfig,
    attack_active: bool,
    rng: np.random.Generator,
) -> DespreadObservation:
    l, k = target
    P = config.powers
    tau = config.tau
    y = sum(np.sqrt(P[t, k]) * tau * draw.user(t, k, l) for t in range(config.L + 1))
    if _attacked_pilot(k, config, attack_active):
        y = y + np.sqrt(config.P_E) * tau * draw.eve(l)
    y = y + np.sqrt(tau * config.N0_ul) * complex_normal(rng, (y.shape[0],))
    return DespreadObservation(y, l, k)


def simulate_despread_all(
    draw: ChannelDraw,
    config: SystemConfig,
    attack_active: bool,
    rng: np.random.Generator,
) -> np.ndarray:
    """Despread observations for every observed cell and pilot, shape (n_observers, K, N_t)."""
    P = config.powers
    tau = config.tau
    # h_user is (L+1, K, n_obs, N); sum over the transmitting cell t
    y = tau * np.einsum("tk,tkpn->pkn", np.sqrt(P), draw.h_user)
    if attack_active:
        y[:, config.target] += np.sqrt(config.P_E) * tau * draw.h_eve
    y += np.sqrt(tau * config.N0_ul) * complex_normal(rng, y.shape)
    return y


def training_covariance(
    target: tuple[int, int], corr: CorrelationSet, config: SystemConfig, attacked: bool
) -> np.ndarray:
    """N0 I + tau (sum_t P_tk R^l_tk [+ P_E R^l_E]); equals Cov(y_lk) / tau."""
    l, k = target
    P = config.powers
    Q = sum(P[t, k] * corr.user(t, k, l) for t in range(config.L + 1))
    if _attacked_pilot(k, config, attacked):
        Q = Q + config.P_E * corr.eve(l)
    return config.N0_ul * np.eye(corr.N_t) + config.tau * Q


def mmse_filter(
    target: tuple[int, int], corr: CorrelationSet, config: SystemConfig, attacked: bool
) -> np.ndarray:
    """C = sqrt(P_lk) R^l_lk (N0 I + tau(...))^{-1}, so that h_hat = C @ y."""
    l, k = target
    Q = training_covariance(target, corr, config, attacked)
    R = corr.user(l, k, l)
    # R Q^{-1} = (Q^{-1} R)^H for Hermitian R, Q
    return np.sqrt(config.powers[l, k]) * solve_hermitian(Q, R).conj().T


def estimate_covariance(
    target: tuple[int, int], filt: np.ndarray, corr: CorrelationSet, config: SystemConfig
) -> np.ndarray:
    """R_hat = P tau R Q^{-1} R, written as tau sqrt(P) C R."""
    l, k = target
    return hermitize(config.tau * np.sqrt(config.powers[l, k]) * filt @ corr.user(l, k, l))


def _check_psd(A: np.ndarray, scale: float, what: str) -> None:
    lam = hermitian_eig(A).eigenvalues
    if lam.size and lam[-1] < -PSD_CONSISTENCY_RTOL * max(scale, 1.0):
        raise NumericalError(
            f"{what} is not PSD (min eigenvalue {lam[-1]:.3e}); filter and attack flag probably mismatched"
        )


def mmse_estimate(
    obs: DespreadObservation,
    filt: np.ndarray,
    corr: CorrelationSet,
    config: SystemConfig,
    attacked: bool,
) -> ChannelEstimate:
    target = (obs.cell, obs.user)
    R = corr.user(obs.cell, obs.user, obs.cell)
    R_hat = estimate_covariance(target, filt, corr, config)
    R_err = hermitize(R - R_hat)
    scale = float(np.real(np.trace(R)))
    _check_psd(R_hat, scale, "estimate covariance")
    _check_psd(R_err, scale, "error covariance")
    return ChannelEstimate(filt @ obs.y, R_hat, R_err)


@dataclass(frozen=True)
class EstimatorBank:
    """MMSE filters and estimate covariances for every observed cell's own users.

    ``filters[i, k]`` and ``R_hat[i, k]`` belong to user k of cell ``observers[i]``
    observed by its own base station.
    """

    observers: tuple
    filters: np.ndarray
    R_hat: np.ndarray
    tr_hat: np.ndarray
    attacked: bool


def estimator_bank(corr: CorrelationSet, config: SystemConfig, attacked: bool) -> EstimatorBank:
    n_obs, K, N = len(corr.observers), config.K, corr.N_t
    filters = np.empty((n_obs, K, N, N), dtype=complex)
    R_hat = np.empty_like(filters)
    for i, l in enumerate(corr.observers):
        for k in range(K):
            C = mmse_filter((l, k), corr, config, attacked)
            filters[i, k] = C
            R_hat[i, k] = estimate_covariance((l, k), C, corr, config)
    tr_hat = np.real(np.einsum("pkii->pk", R_hat))
    return EstimatorBank(corr.observers, filters, R_hat, tr_hat, attacked)


def estimate_eavesdropper_covariance(
    samples: list[DespreadObservation],
    corr: CorrelationSet,
    config: SystemConfig,
) -> np.ndarray:
    """Estimate P_E * R^l_E from despread observations of the attacked pilot over many slots.

    The known user and noise contributions are subtracted from the sample
    covariance; the remainder is symmetrized and projected onto the PSD cone.
    """
    if len(samples) < 2:
        raise ValidationError("need at least two observations")
    cells = {s.cell for s in samples}
    users = {s.user for s in samples}
    if len(cells) != 1 or users != {config.target}:
        raise ValidationError("all observations must be of the attacked pilot in one cell")
    l = cells.pop()
    Y = np.stack([s.y for s in samples])
    S = Y.T @ Y.conj() / len(samples)
    P = config.powers
    tau = config.tau
    known = tau**2 * sum(P[t, config.target] * corr.user(t, config.target, l) for t in range(config.L + 1))
    known = known + tau * config.N0_ul * np.eye(corr.N_t)
    est = hermitize((S - known) / tau**2)
    dec = hermitian_eig(est)
    lam = np.clip(dec.eigenvalues, 0.0, None)
    V = dec.eigenvectors
    return hermitize((V * lam) @ V.conj().T)
