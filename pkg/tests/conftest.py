import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "knet", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("knet")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_stiefel(rng, n, c):
    Q, R = np.linalg.qr(rng.normal(size=(n, c)))
    return Q * np.sign(np.diag(R))


def random_symmetric(rng, n):
    A = rng.normal(size=(n, n))
    return 0.5 * (A + A.T)


def max_fd_error(theta, theta_prime, batch, X, Z, Gamma, sigma, lam, h=1e-5):
    """Largest relative gap between analytic and central-difference gradients."""
    from knet.network import loss_and_grad

    def loss():
        return loss_and_grad(theta, theta_prime, batch, X, Z, Gamma, sigma, lam)[0]

    _, g_enc, g_dec = loss_and_grad(theta, theta_prime, batch, X, Z, Gamma, sigma, lam)
    worst = 0.0
    for params, grads in ((theta, g_enc), (theta_prime, g_dec)):
        for a, g in zip(params.arrays(), grads.arrays()):
            for idx in np.ndindex(a.shape):
                orig = a[idx]
                a[idx] = orig + h
                lp = loss()
                a[idx] = orig - h
                lm = loss()
                a[idx] = orig
                fd = (lp - lm) / (2 * h)
                scale = max(abs(fd), abs(g[idx]))
                if scale > 1e-7:
                    worst = max(worst, abs(fd - g[idx]) / scale)
    return worst


# acceptance outcomes, keyed by criterion number; printed after the run
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(str(k).rstrip("ab")), str(k))):
        for line in ACCEPTANCE[key]:
            terminalreporter.write_line(line)
