import numpy as np
import pytest

from secmimo.channel import CorrelationSet, SystemConfig, build_scenario
from secmimo.experiment import reference_config


@pytest.fixture(scope="session")
def ref_config() -> SystemConfig:
    return reference_config()


@pytest.fixture(scope="session")
def ref_corr(ref_config) -> CorrelationSet:
    return build_scenario(ref_config)


@pytest.fixture(scope="session")
def small_config() -> SystemConfig:
    return SystemConfig(L=1, K=2, N_t=8, tau=2, seed=4)


@pytest.fixture(scope="session")
def small_corr(small_config) -> CorrelationSet:
    return build_scenario(small_config)


def random_psd(rng, n, rank=None, scale=1.0):
    rank = n if rank is None else rank
    B = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    return scale * B @ B.conj().T


def random_hermitian(rng, n):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return 0.5 * (A + A.conj().T)


def block_scenario(L, K, N, n_user, P_E=1.0, seed=0, tau=None, eve_everywhere=True):
    """Users supported on the first n_user coordinates, eavesdropper on the rest."""
    rng = np.random.default_rng(seed)
    R_user = np.zeros((L + 1, K, L + 1, N, N), dtype=complex)
    R_eve = np.zeros((L + 1, N, N), dtype=complex)
    for l in range(L + 1):
        for k in range(K):
            for p in range(L + 1):
                A = random_psd(rng, n_user)
                target = N if l == p else 0.1 * N
                R_user[l, k, p, :n_user, :n_user] = A * target / np.trace(A).real
    for p in range(L + 1):
        if p == 0 or eve_everywhere:
            A = random_psd(rng, N - n_user)
            target = N if p == 0 else 0.1 * N
            R_eve[p, n_user:, n_user:] = A * target / np.trace(A).real
    corr = CorrelationSet(R_user, R_eve)
    cfg = SystemConfig(L=L, K=K, N_t=N, tau=tau or max(K, 2), P_E=P_E, seed=seed)
    return corr, cfg


@pytest.fixture(scope="session")
def ref_forms(ref_config, ref_corr):
    """Per-trial forms of the reference scenario (500 trials), keyed by P_E, with common random numbers."""
    from secmimo.downlink import monte_carlo_forms

    cache = {}

    def get(P_E=1.0):
        if P_E not in cache:
            cache[P_E] = monte_carlo_forms(ref_corr, ref_config.replace(P_E=P_E), 500)
        return cache[P_E]

    return get


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion."""
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            name = getattr(rep, "nodeid", "")
            if "test_acceptance.py::test_criterion_" not in name or rep.when not in ("call", "setup"):
                continue
            if rep.when == "setup" and outcome == "passed":
                continue
            crit = name.split("test_criterion_")[1]
            num, _, label = crit.partition("_")
            detail = dict(rep.user_properties).get("detail", "")
            lines.append((int(num), f"criterion {num} [{label}]: {'PASS' if outcome == 'passed' else 'FAIL'}"
                          + (f" - {detail}" if detail else "")))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
