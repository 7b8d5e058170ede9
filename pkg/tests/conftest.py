import itertools

import numpy as np
import pytest

from bardina import spectral
from bardina.certificates import TestFunction
from bardina.spectral import SpectralField

TestFunction.__test__ = False  # name matches pytest's collection pattern


def shear_spectral(n: int, amplitude: float = 1.0) -> SpectralField:
    """u = (0, A sin(x1), 0) assembled directly; single mode pair k = (+-1,0,0)."""
    f = SpectralField.zeros(n)
    f.coeffs[1, 1, 0, 0] = -0.5j * amplitude
    f.coeffs[1, n - 1, 0, 0] = 0.5j * amplitude
    return f


def convolution_advect_oracle(field: SpectralField) -> np.ndarray:
    """Brute-force (u.grad)u followed by Leray projection on the full cube.

    out_hat(k) = Pi_k sum_{p+q=k} i (q . u_hat(p)) u_hat(q), with output modes
    outside the resolved band (any |k_i| >= n/2) and the mean zeroed, matching
    the band convention of the fast path.
    """
    n = field.n
    full = field.full_coeffs()
    ks = np.fft.fftfreq(n, 1.0 / n).astype(int)
    kgrid = np.stack(np.meshgrid(ks, ks, ks, indexing="ij"), axis=-1)  # (n,n,n,3)
    out = np.zeros_like(full)
    for i, j, l in itertools.product(range(n), repeat=3):
        k = np.array([ks[i], ks[j], ks[l]])
        q = k[None, None, None, :] - kgrid           # q = k - p over all p
        qi, qj, ql = (q[..., 0] % n, q[..., 1] % n, q[..., 2] % n)
        # representable modes have components in [-n/2, n/2-1]; q outside
        # that range would wrap the gather onto the wrong mode
        in_band = np.all((q >= -n // 2) & (q <= n // 2 - 1), axis=-1)
        uq = full[:, qi, qj, ql]                     # (3, n,n,n)
        qdotup = np.einsum("cxyz,xyzc->xyz", full, q.astype(float))
        acc = 1j * np.sum(np.where(in_band, qdotup * uq, 0.0), axis=(1, 2, 3))
        out[:, i, j, l] = acc
    for i, j, l in itertools.product(range(n), repeat=3):
        k = np.array([ks[i], ks[j], ks[l]], dtype=float)
        k2 = k @ k
        if k2 == 0 or np.max(np.abs(k)) >= n // 2:
            out[:, i, j, l] = 0.0
            continue
        out[:, i, j, l] -= k * (k @ out[:, i, j, l]) / k2
    return out


def taylor_green_grid(n: int, amplitude: float = 1.0) -> SpectralField:
    """Taylor-Green data assembled on the collocation grid (independent of the
    spectral-space construction in the scenario library)."""
    x = -np.pi + 2.0 * np.pi * np.arange(n) / n
    X, Y, Z = np.meshgrid(x, x, x, indexing="ij")
    vals = amplitude * np.stack([np.sin(X) * np.cos(Y) * np.cos(Z),
                                 -np.cos(X) * np.sin(Y) * np.cos(Z),
                                 np.zeros_like(X)])
    f = spectral.from_physical(spectral.PhysicalField(vals), n)
    return SpectralField(spectral.leray_project(f).coeffs)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240801)


ACCEPTANCE_LINES = []


def record_acceptance(number: int, title: str, ok: bool, detail: str = "") -> str:
    """One pass/fail line per acceptance criterion, echoed in the summary."""
    line = f"ACCEPTANCE {number}: {title}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
