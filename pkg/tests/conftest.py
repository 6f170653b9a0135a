import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20061)


def phase_space_machine(N, M, T, g1, alpha, shots, rng, r=None, g2=None):
    """Brute-force Wigner sampling of the N+N->M machine, written out by hand.

    Returns ``(clone_x, clone_p, anti_x, anti_p)`` sample arrays of one clone
    and one anti-clone (``None`` without EPR). Independent of the library:
    every relation below is the textbook quadrature algebra of the setup.
    """
    x0, p0 = 2 * alpha.real, 2 * alpha.imag
    # N copies of |alpha> and N of |alpha*>, vacuum noise on each
    xa = x0 + rng.standard_normal((N, shots))
    pa = p0 + rng.standard_normal((N, shots))
    xb = x0 + rng.standard_normal((N, shots))
    pb = -p0 + rng.standard_normal((N, shots))
    xc1, pc1 = xa.sum(0) / np.sqrt(N), pa.sum(0) / np.sqrt(N)
    xc2, pc2 = xb.sum(0) / np.sqrt(N), pb.sum(0) / np.sqrt(N)
    if r is None:
        xv, pv = rng.standard_normal(shots), rng.standard_normal(shots)
    else:
        u = rng.standard_normal((4, shots))
        c, s = np.cosh(r), np.sinh(r)
        xv, pv = c * u[0] + s * u[2], c * u[1] - s * u[3]
        xe, pe = s * u[0] + c * u[2], -s * u[1] + c * u[3]
    # splitter: transmitted keeps sqrt(T) of the signal, reflected sqrt(1-T)
    xt = np.sqrt(T) * xc1 + np.sqrt(1 - T) * xv
    pt = np.sqrt(T) * pc1 + np.sqrt(1 - T) * pv
    xr = np.sqrt(1 - T) * xc1 - np.sqrt(T) * xv
    pr = np.sqrt(1 - T) * pc1 - np.sqrt(T) * pv
    x_sum = (xr + xc2) / np.sqrt(2)
    p_diff = (pr - pc2) / np.sqrt(2)
    xo, po = xt + g1 * x_sum, pt + g1 * p_diff
    # one M-splitter output: 1/M of the power plus vacuum
    k = 1 / np.sqrt(M)
    q = np.sqrt(1 - 1 / M)
    cx = k * xo + q * rng.standard_normal(shots)
    cp = k * po + q * rng.standard_normal(shots)
    if r is None:
        return cx, cp, None, None
    ax = k * (xe + g2[0] * x_sum) + q * rng.standard_normal(shots)
    ap = k * (pe + g2[1] * p_diff) + q * rng.standard_normal(shots)
    return cx, cp, ax, ap


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion, echoed in the summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(line)
        lines.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria summary")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
