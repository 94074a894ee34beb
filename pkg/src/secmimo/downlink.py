"""Matched-filter precoding with artificial noise, exact SINRs and Monte Carlo ergodic rates.

The SINR expressions only involve second moments of the data symbols and AN
vectors, so a trial reduces to a handful of channel-dependent quadratic forms:

    S   = |h0^H w_0m|^2                              (desired signal)
    Ip  = sum_{(l,k) != (0,m)} |h^l_0m^H w_lk|^2      (interference via signal precoders)
    Iq  = sum_l ||U_l h^l_0m||^2                      (AN leaking to the user)
    E   = |h^0_E^H w_0m|^2                            (eavesdropper's signal)
    Eq  = sum_l ||U_l h^l_E||^2                        (AN received by the eavesdropper)

Rates for any (gamma, p, q) follow from these without redrawing channels.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import ChannelDraw, CorrelationSet, SystemConfig, sample_channel_draw
from .errors import DegenerateError, InfeasibleSplitError, ValidationError
from .rng import substream
from .training import EstimatorBank, estimator_bank, simulate_despread_all

SPLIT_ATOL = 1e-12
CHUNK = 25


class Scheme(str, enum.Enum):
    MF_AN = "MF_AN"
    NAIVE_MF = "NAIVE_MF"
    NULLSPACE = "NULLSPACE"


@dataclass(frozen=True)
class PowerSplit:
    """Signal share p per user and AN share q per AN dimension: K p + (N_t - K) q = 1."""

    p: float
    q: float
    N_t: int
    K: int

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise InfeasibleSplitError(f"negative power share (p={self.p}, q={self.q})")
        total = self.K * self.p + (self.N_t - self.K) * self.q
        if abs(total - 1.0) > SPLIT_ATOL:
            raise InfeasibleSplitError(f"K p + (N_t - K) q = {total!r} != 1")


def power_split(p: float, N_t: int, K: int) -> PowerSplit:
    if N_t <= K:
        raise ValidationError(f"need N_t > K for an AN subspace (N_t={N_t}, K={K})")
    if not 0.0 <= p <= 1.0 / K:
        raise InfeasibleSplitError(f"p={p} outside [0, 1/K]; q would be negative")
    q = (1.0 - K * p) / (N_t - K)
    if K * p == 1.0:
        q = 0.0
    return PowerSplit(float(p), float(q), N_t, K)


def no_an_split(N_t: int, K: int) -> PowerSplit:
    return PowerSplit(1.0 / K, 0.0, N_t, K)


@dataclass(frozen=True)
class PrecoderSet:
    """``w[i, k]`` is the unit-norm precoder of user k in cell ``observers[i]``; ``U_null[i]`` its AN matrix."""

    w: np.ndarray
    U_null: np.ndarray | None = None


def matched_filter_precoders(h_hat: np.ndarray) -> np.ndarray:
    """w = h_hat / ||h_hat|| along the last axis."""
    h_hat = np.asarray(h_hat)
    norms = np.linalg.norm(h_hat, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise DegenerateError("zero channel estimate: matched filter undefined")
    return h_hat / norms


def an_shaping_matrix(h_hat_cell: np.ndarray, tr_hat: np.ndarray) -> np.ndarray:
    """U = I - H diag(1/tr(R_hat_k)) H^H with H = [h_hat_1, ..., h_hat_K] (rows of ``h_hat_cell``)."""
    h_hat_cell = np.asarray(h_hat_cell)
    tr_hat = np.asarray(tr_hat, dtype=float)
    if np.any(tr_hat <= 0):
        raise ValidationError("estimate covariance traces must be positive")
    H = h_hat_cell.T
    return np.eye(H.shape[0]) - (H / tr_hat) @ H.conj().T


def _apply_an(h_hat_cell: np.ndarray, tr_hat: np.ndarray, x: np.ndarray) -> np.ndarray:
    """U @ x without forming U (U is Hermitian, so this is also U^H x)."""
    return x - h_hat_cell.T @ ((h_hat_cell.conj() @ x) / tr_hat)


def build_precoders(h_hat: np.ndarray, tr_hat: np.ndarray) -> PrecoderSet:
    """Matched filters and AN matrices for every cell, from estimates of shape (cells, K, N_t)."""
    w = matched_filter_precoders(h_hat)
    U = np.stack([an_shaping_matrix(h_hat[i], tr_hat[i]) for i in range(h_hat.shape[0])])
    return PrecoderSet(w, U)


def instantaneous_sinr_user(
    draw: ChannelDraw, precoders: PrecoderSet, split: PowerSplit, gamma: float, m: int
) -> float:
    """SINR of user m (0-based) in cell 0 for one channel/estimate realization."""
    h = draw.h_user[0, m]  # (cells, N): h^l_0m
    gains = np.abs(np.einsum("pn,pkn->pk", h.conj(), precoders.w)) ** 2
    signal = gains[0, m]
    interference = gains.sum() - signal
    an = sum(np.linalg.norm(h[i].conj() @ precoders.U_null[i]) ** 2 for i in range(h.shape[0]))
    A = split.p * gamma * interference + split.q * gamma * an + 1.0
    return float(split.p * gamma * signal / A)


def instantaneous_sinr_eve(
    draw: ChannelDraw, precoders: PrecoderSet, split: PowerSplit, gamma: float, m: int
) -> float:
    """Worst-case eavesdropper SINR: all other users' signals already cancelled."""
    hE = draw.h_eve
    signal = abs(np.vdot(hE[0], precoders.w[0, m])) ** 2
    an = sum(np.linalg.norm(hE[i].conj() @ precoders.U_null[i]) ** 2 for i in range(hE.shape[0]))
    B = split.q * gamma * an + 1.0
    return float(split.p * gamma * signal / B)


# -- Monte Carlo ---------------------------------------------------------------

FORM_NAMES = ("S", "Ip", "Iq", "E", "Eq", "S_null", "E_null")


@dataclass(frozen=True)
class TrialForms:
    """Per-trial quadratic forms, each an array over trials (trial index order)."""

    S: np.ndarray
    Ip: np.ndarray
    Iq: np.ndarray
    E: np.ndarray
    Eq: np.ndarray
    S_null: np.ndarray | None = None
    E_null: np.ndarray | None = None

    @property
    def trials(self) -> int:
        return self.S.shape[0]


def trial_forms(
    corr: CorrelationSet,
    config: SystemConfig,
    bank: EstimatorBank,
    rng: np.random.Generator,
    attack: bool = True,
    null_ctx=None,
) -> np.ndarray:
    """One trial: fresh channels, training, estimates, precoders -> the quadratic forms.

    Returns a vector ordered as :data:`FORM_NAMES` (null-space entries NaN when
    ``null_ctx`` is None).
    """
    m = config.target
    draw = sample_channel_draw(corr, rng)
    Y = simulate_despread_all(draw, config, attack, rng)
    H_hat = np.einsum("pkij,pkj->pki", bank.filters, Y)
    W = matched_filter_precoders(H_hat)
    h0 = draw.h_user[0, m]
    hE = draw.h_eve
    gains = np.abs(np.einsum("pn,pkn->pk", h0.conj(), W)) ** 2
    S = gains[0, m]
    Ip = gains.sum() - S
    Iq = Eq = 0.0
    for i in range(len(corr.observers)):
        Iq += np.linalg.norm(_apply_an(H_hat[i], bank.tr_hat[i], h0[i])) ** 2
        Eq += np.linalg.norm(_apply_an(H_hat[i], bank.tr_hat[i], hE[i])) ** 2
    E = abs(np.vdot(hE[0], W[0, m])) ** 2
    S_null = E_null = math.nan
    if null_ctx is not None:
        from .nullspace import nullspace_precoder, project_estimate

        est = project_estimate(null_ctx, Y[0, m])
        w_null = nullspace_precoder(est, null_ctx)
        S_null = abs(np.vdot(h0[0], w_null)) ** 2
        E_null = abs(np.vdot(hE[0], w_null)) ** 2
    return np.array([S, Ip, Iq, E, Eq, S_null, E_null])


def _threads() -> int:
    try:
        n = int(os.environ.get("SECMIMO_THREADS", "1"))
    except ValueError:
        n = 1
    return max(1, min(n, os.cpu_count() or 1))


def monte_carlo_forms(
    corr: CorrelationSet,
    config: SystemConfig,
    trials: int,
    seed: int | None = None,
    attack: bool = True,
    null_ctx=None,
    bank: EstimatorBank | None = None,
    first_trial: int = 0,
) -> TrialForms:
    """Run ``trials`` independent trials on substreams (seed, "trial", i).

    Trials are evaluated in fixed-size chunks, possibly on several threads
    (``SECMIMO_THREADS``), and reassembled in trial order, so the result does
    not depend on scheduling.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    if not corr.complete:
        raise ValidationError("Monte Carlo needs correlation matrices at every base station")
    seed = config.seed if seed is None else seed
    if bank is None:
        bank = estimator_bank(corr, config, attack)
    corr.sqrt_user, corr.sqrt_eve  # factor once before any worker starts

    def run(start: int) -> np.ndarray:
        stop = min(trials, start + CHUNK)
        return np.stack([
            trial_forms(corr, config, bank, substream(seed, "trial", first_trial + i), attack, null_ctx)
            for i in range(start, stop)
        ])

    starts = range(0, trials, CHUNK)
    n_threads = _threads()
    if n_threads > 1:
        with ThreadPoolExecutor(n_threads) as pool:
            chunks = list(pool.map(run, starts))
    else:
        chunks = [run(s) for s in starts]
    F = np.concatenate(chunks)
    null = null_ctx is not None
    return TrialForms(
        *(F[:, i] for i in range(5)),
        S_null=F[:, 5] if null else None,
        E_null=F[:, 6] if null else None,
    )


def sinr_from_forms(forms: TrialForms, p: float, q: float, gamma: float, nullspace: bool = False):
    """Per-trial (SINR_user, SINR_eve) arrays."""
    S, E = (forms.S_null, forms.E_null) if nullspace else (forms.S, forms.E)
    if S is None:
        raise ValidationError("trial forms were computed without a null-space context")
    sinr_u = p * gamma * S / (p * gamma * forms.Ip + q * gamma * forms.Iq + 1.0)
    sinr_e = p * gamma * E / (q * gamma * forms.Eq + 1.0)
    return sinr_u, sinr_e


@dataclass(frozen=True)
class MonteCarloResult:
    rate_user: float
    rate_eve: float
    secrecy: float
    trials: int
    diff_stderr: float

    def secrecy_upper_bound(self, z: float = 1.6448536269514722) -> float:
        """One-sided upper confidence bound on rate_user - rate_eve (default 95%)."""
        return self.rate_user - self.rate_eve + z * self.diff_stderr


def rates_from_forms(
    forms: TrialForms, p: float, q: float, gamma: float, nullspace: bool = False
) -> MonteCarloResult:
    sinr_u, sinr_e = sinr_from_forms(forms, p, q, gamma, nullspace)
    ru = np.log2(1.0 + sinr_u)
    re = np.log2(1.0 + sinr_e)
    n = ru.shape[0]
    d = ru - re
    stderr = float(np.std(d, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    rate_user = float(np.mean(ru))
    rate_eve = float(np.mean(re))
    return MonteCarloResult(rate_user, rate_eve, max(0.0, rate_user - rate_eve), n, stderr)


def monte_carlo_secrecy_rate(
    corr: CorrelationSet,
    config: SystemConfig,
    split: PowerSplit,
    scheme: Scheme | str = Scheme.MF_AN,
    trials: int = 500,
    seed: int | None = None,
    attack: bool = True,
    rank_tol: float = 1e-6,
) -> MonteCarloResult:
    """Ergodic rates E[log2(1+SINR_0m)], E[log2(1+SINR_eve)] and their clamped difference at config.gamma.

    NAIVE_MF and NULLSPACE ignore ``split`` and use p = 1/K, q = 0.
    """
    scheme = Scheme(scheme)
    null_ctx = None
    if scheme is Scheme.NULLSPACE:
        from .nullspace import build_nullspace_context

        null_ctx = build_nullspace_context(corr, config, rank_tol)
    forms = monte_carlo_forms(corr, config, trials, seed, attack, null_ctx)
    if scheme is Scheme.MF_AN:
        p, q = split.p, split.q
    else:
        p, q = 1.0 / config.K, 0.0
    return rates_from_forms(forms, p, q, config.gamma, nullspace=scheme is Scheme.NULLSPACE)
