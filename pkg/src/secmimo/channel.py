"""Spatial correlation model and correlated channel sampling.

A uniform linear array with half-wavelength spacing observes each terminal
through a truncated Laplacian power angle spectrum. Path loss is folded into the
trace of each correlation matrix: ``N_t`` towards the serving base station and
``rho * N_t`` towards every other one.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property, lru_cache
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.special

from .errors import ValidationError
from .linalg import hermitian_sqrt
from .rng import complex_normal, substream

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class SystemConfig:
    """Scalar parameters of the multi-cell scenario.

    ``m`` is 1-based (as in configuration files); code indexes users from 0 and
    uses :attr:`target` for the attacked user.
    """

    L: int = 3
    K: int = 5
    N_t: int = 128
    tau: int = 10
    m: int = 1
    P_ul: tuple = 1.0
    P_E: float = 1.0
    N0_ul: float = 1.0
    gamma: float = 1.0
    rho: float = 0.1
    sigma_as: float = math.pi / 2
    seed: int = 0
    eve_cross_gain: float | None = None
    aoa_interval: tuple = (-math.pi / 2, math.pi / 2)
    quad_points: int | None = None

    def __post_init__(self):
        for name in ("L", "K", "N_t", "tau", "m", "seed"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ValidationError(f"{name} must be an integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if self.L < 0:
            raise ValidationError("L must be >= 0")
        if self.K < 1 or self.N_t < 1 or self.tau < 1:
            raise ValidationError("K, N_t and tau must be positive")
        if self.tau < self.K:
            raise ValidationError(f"tau={self.tau} < K={self.K}: orthogonal pilots do not exist")
        if not 1 <= self.m <= self.K:
            raise ValidationError(f"m={self.m} outside 1..K={self.K}")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must lie in [0, 2**64)")

        P = np.asarray(self.P_ul, dtype=float)
        if P.ndim == 0:
            P = np.full((self.L + 1, self.K), float(P))
        if P.shape != (self.L + 1, self.K):
            raise ValidationError(f"P_ul must be a scalar or an (L+1) x K table, got shape {P.shape}")
        if np.any(~np.isfinite(P)) or np.any(P <= 0):
            raise ValidationError("uplink training powers P_ul must be > 0")
        object.__setattr__(self, "P_ul", tuple(tuple(float(x) for x in row) for row in P))

        for name in ("P_E", "N0_ul", "gamma", "rho", "sigma_as"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValidationError(f"{name} must be finite")
            object.__setattr__(self, name, v)
        if self.P_E < 0:
            raise ValidationError("P_E must be >= 0")
        if self.N0_ul <= 0:
            raise ValidationError("N0_ul must be > 0")
        if self.gamma < 0:
            raise ValidationError("gamma must be >= 0")
        if not 0 < self.rho <= 1:
            raise ValidationError("rho must lie in (0, 1]")
        if self.sigma_as <= 0:
            raise ValidationError("sigma_as must be > 0")
        if self.eve_cross_gain is not None:
            g = float(self.eve_cross_gain)
            if not 0 < g <= 1:
                raise ValidationError("eve_cross_gain must lie in (0, 1]")
            object.__setattr__(self, "eve_cross_gain", g)
        lo, hi = (float(x) for x in self.aoa_interval)
        if not lo <= hi:
            raise ValidationError("aoa_interval must be (low, high) with low <= high")
        object.__setattr__(self, "aoa_interval", (lo, hi))
        if self.quad_points is not None:
            if int(self.quad_points) < 256:
                raise ValidationError("quad_points must be >= 256")
            object.__setattr__(self, "quad_points", int(self.quad_points))

    @property
    def target(self) -> int:
        return self.m - 1

    @property
    def powers(self) -> np.ndarray:
        return np.asarray(self.P_ul, dtype=float)

    @property
    def eve_gain(self) -> float:
        return self.rho if self.eve_cross_gain is None else self.eve_cross_gain

    def replace(self, **changes) -> "SystemConfig":
        d = asdict(self)
        d.update(changes)
        return SystemConfig(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["P_ul"] = [list(row) for row in self.P_ul]
        d["aoa_interval"] = list(self.aoa_interval)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SystemConfig":
        d = dict(d)
        if "aoa_interval" in d:
            d["aoa_interval"] = tuple(d["aoa_interval"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown config key(s): {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class AngularProfile:
    mean_aoa: float
    spread: float

    def __post_init__(self):
        if not self.spread > 0:
            raise ValidationError(f"angular spread must be > 0, got {self.spread}")


def laplacian_pas(theta, profile: AngularProfile):
    """Truncated Laplacian power angle spectrum, supported on mean +/- pi (0 outside)."""
    s = profile.spread
    d = np.abs(np.asarray(theta, dtype=float) - profile.mean_aoa)
    norm = SQRT2 * s * (-math.expm1(-SQRT2 * math.pi / s))
    val = np.exp(-SQRT2 * d / s) / norm
    out = np.where(d <= math.pi, val, 0.0)
    return out if out.ndim else float(out)


def steering_vector(theta: float, N_t: int) -> np.ndarray:
    """Half-wavelength ULA response, entry n = exp(-j pi n sin(theta))."""
    return np.exp(-1j * math.pi * np.arange(N_t) * math.sin(theta))


def default_quad_points(N_t: int) -> int:
    return max(4096, 16 * N_t)


@lru_cache(maxsize=16)
def _gauss_legendre(n: int):
    x, w = scipy.special.roots_legendre(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def _pas_nodes(profile: AngularProfile, quad_points: int):
    """Gauss-Legendre nodes/weights for the PAS integral.

    The support is split at the kink (the mean AoA) into two halves, and each
    half into [0, u_c] and [u_c, pi] in the offset u = |theta - mean|, with
    u_c = min(pi/2, 30 sigma). Each panel's integrand is analytic, so the rule
    converges spectrally; the inner panel keeps narrow spreads resolved.
    """
    n = max(quad_points // 4, 1)
    x, w = _gauss_legendre(n)
    s = profile.spread
    u_c = min(math.pi / 2, 30.0 * s)
    us, ws = [], []
    for a, b in ((0.0, u_c), (u_c, math.pi)):
        half = 0.5 * (b - a)
        us.append(a + half * (x + 1.0))
        ws.append(half * w)
    u = np.concatenate(us)
    wu = np.concatenate(ws)
    theta = np.concatenate([profile.mean_aoa + u, profile.mean_aoa - u])
    weight = np.concatenate([wu, wu]) * np.tile(laplacian_pas(profile.mean_aoa + u, profile), 2)
    return theta, weight


def correlation_matrix(
    profile: AngularProfile,
    N_t: int,
    trace_target: float,
    quad_points: int | None = None,
) -> np.ndarray:
    """R = integral of p(theta) a(theta) a(theta)^H over mean +/- pi, rescaled to the given trace.

    The matrix is Hermitian Toeplitz, so only its first column is integrated.
    """
    if not trace_target > 0:
        raise ValidationError(f"trace_target must be > 0, got {trace_target}")
    if quad_points is None:
        quad_points = default_quad_points(N_t)
    if quad_points < 256:
        raise ValidationError("quad_points must be >= 256")
    theta, weight = _pas_nodes(profile, quad_points)
    phase = -math.pi * np.sin(theta)
    step = np.exp(1j * phase)
    col = np.empty(N_t, dtype=complex)
    # powers of exp(-j pi sin), re-anchored every 64 lags to bound rounding drift
    for d in range(N_t):
        if d % 64 == 0:
            v = weight * np.exp(1j * d * phase)
        else:
            v *= step
        col[d] = v.sum()
    col[0] = col[0].real
    R = scipy.linalg.toeplitz(col, col.conj())
    return R * (trace_target / (N_t * col[0].real))


@dataclass(eq=False)
class CorrelationSet:
    """Correlation matrices of every user and of the eavesdropper.

    ``R_user[l, k, i]`` is the matrix of user k of cell l seen by base station
    ``observers[i]``; ``R_eve[i]`` likewise for the eavesdropper. Use
    :meth:`user` / :meth:`eve` to index by base-station number.
    """

    R_user: np.ndarray
    R_eve: np.ndarray
    observers: tuple = None
    aoa_user: np.ndarray | None = None
    aoa_eve: np.ndarray | None = None
    _obs_index: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.R_user = np.asarray(self.R_user, dtype=complex)
        self.R_eve = np.asarray(self.R_eve, dtype=complex)
        if self.R_user.ndim != 5 or self.R_eve.ndim != 3:
            raise ValidationError("R_user must be 5-D (L+1, K, P, N, N) and R_eve 3-D (P, N, N)")
        n_obs = self.R_user.shape[2]
        if self.observers is None:
            self.observers = tuple(range(n_obs))
        self.observers = tuple(int(p) for p in self.observers)
        if len(self.observers) != n_obs or self.R_eve.shape[0] != n_obs:
            raise ValidationError("observer list does not match array shapes")
        self._obs_index = {p: i for i, p in enumerate(self.observers)}

    @property
    def L(self) -> int:
        return self.R_user.shape[0] - 1

    @property
    def K(self) -> int:
        return self.R_user.shape[1]

    @property
    def N_t(self) -> int:
        return self.R_user.shape[-1]

    @property
    def complete(self) -> bool:
        return self.observers == tuple(range(self.L + 1))

    def obs(self, p: int) -> int:
        try:
            return self._obs_index[p]
        except KeyError:
            raise ValidationError(f"base station {p} is not among the built observers {self.observers}") from None

    def user(self, l: int, k: int, p: int) -> np.ndarray:
        return self.R_user[l, k, self.obs(p)]

    def eve(self, p: int) -> np.ndarray:
        return self.R_eve[self.obs(p)]

    @cached_property
    def sqrt_user(self) -> np.ndarray:
        out = np.empty_like(self.R_user)
        for idx in np.ndindex(self.R_user.shape[:3]):
            out[idx] = hermitian_sqrt(self.R_user[idx])
        return out

    @cached_property
    def sqrt_eve(self) -> np.ndarray:
        return np.stack([hermitian_sqrt(R) for R in self.R_eve])

    def with_eve(self, R_eve: np.ndarray) -> "CorrelationSet":
        return CorrelationSet(self.R_user, R_eve, self.observers, self.aoa_user, self.aoa_eve)


@dataclass(eq=False)
class ChannelDraw:
    """One channel realization. ``h_user[l, k, i]`` / ``h_eve[i]`` follow the observer layout."""

    h_user: np.ndarray
    h_eve: np.ndarray
    observers: tuple

    def user(self, l: int, k: int, p: int) -> np.ndarray:
        return self.h_user[l, k, self.observers.index(p)]

    def eve(self, p: int) -> np.ndarray:
        return self.h_eve[self.observers.index(p)]


def draw_mean_aoas(config: SystemConfig, repetition: int = 0):
    """Mean AoAs per (user, observing BS) and per eavesdropper observation, uniform on the AoA interval."""
    rng = substream(config.seed, "scenario", repetition)
    lo, hi = config.aoa_interval
    aoa_user = rng.uniform(lo, hi, size=(config.L + 1, config.K, config.L + 1))
    aoa_eve = rng.uniform(lo, hi, size=config.L + 1)
    return aoa_user, aoa_eve


def build_scenario(
    config: SystemConfig,
    observers: Sequence[int] | None = None,
    repetition: int = 0,
) -> CorrelationSet:
    """Draw mean AoAs and build every correlation matrix of the scenario.

    The AoA draw depends only on ``(seed, repetition)``; ``N_t`` and
    ``observers`` change which matrices get built, not the geometry.
    """
    aoa_user, aoa_eve = draw_mean_aoas(config, repetition)
    if observers is None:
        observers = range(config.L + 1)
    observers = tuple(int(p) for p in observers)
    for p in observers:
        if not 0 <= p <= config.L:
            raise ValidationError(f"observer {p} outside 0..L")
    N, s, qp = config.N_t, config.sigma_as, config.quad_points
    R_user = np.empty((config.L + 1, config.K, len(observers), N, N), dtype=complex)
    R_eve = np.empty((len(observers), N, N), dtype=complex)
    for i, p in enumerate(observers):
        for l in range(config.L + 1):
            target = N if l == p else config.rho * N
            for k in range(config.K):
                R_user[l, k, i] = correlation_matrix(AngularProfile(aoa_user[l, k, p], s), N, target, qp)
        target = N if p == 0 else config.eve_gain * N
        R_eve[i] = correlation_matrix(AngularProfile(aoa_eve[p], s), N, target, qp)
    return CorrelationSet(R_user, R_eve, observers, aoa_user, aoa_eve)


def sample_channel_draw(corr: CorrelationSet, rng: np.random.Generator) -> ChannelDraw:
    """h = R^{1/2} g with g i.i.d. CN(0, I); user vectors are drawn before the eavesdropper's."""
    g_user = complex_normal(rng, corr.R_user.shape[:-1])
    g_eve = complex_normal(rng, corr.R_eve.shape[:-1])
    h_user = np.einsum("...ij,...j->...i", corr.sqrt_user, g_user)
    h_eve = np.einsum("...ij,...j->...i", corr.sqrt_eve, g_eve)
    return ChannelDraw(h_user, h_eve, corr.observers)


# -- serialization -----------------------------------------------------------

SCENARIO_FORMAT = "secmimo-scenario"


def _pack(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a)
    dt = a.dtype.newbyteorder("<")
    return {
        "shape": list(a.shape),
        "dtype": dt.str,
        "data": base64.b64encode(a.astype(dt).tobytes()).decode("ascii"),
    }


def _unpack(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype=np.dtype(d["dtype"])).reshape(d["shape"]).copy()


def save_scenario(path, corr: CorrelationSet, config: SystemConfig) -> None:
    doc = {
        "format": SCENARIO_FORMAT,
        "version": 1,
        "config": config.to_dict(),
        "observers": list(corr.observers),
        "arrays": {
            "R_user": _pack(corr.R_user),
            "R_eve": _pack(corr.R_eve),
        },
    }
    if corr.aoa_user is not None:
        doc["arrays"]["aoa_user"] = _pack(corr.aoa_user)
        doc["arrays"]["aoa_eve"] = _pack(corr.aoa_eve)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_scenario(path) -> tuple[CorrelationSet, SystemConfig]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != SCENARIO_FORMAT:
        raise ValidationError(f"{path}: not a scenario file")
    arrays = doc["arrays"]
    corr = CorrelationSet(
        _unpack(arrays["R_user"]),
        _unpack(arrays["R_eve"]),
        tuple(doc["observers"]),
        _unpack(arrays["aoa_user"]) if "aoa_user" in arrays else None,
        _unpack(arrays["aoa_eve"]) if "aoa_eve" in arrays else None,
    )
    return corr, SystemConfig.from_dict(doc["config"])
