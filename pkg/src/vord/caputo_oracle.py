"""Independent reference solutions.

Two oracles that share nothing with the contour solver:

* an implicit L1 time-marching scheme for the variable-order Caputo
  derivative, with the order entering the weights pointwise in x;
* the Mittag-Leffler function ``E_a(z)`` for ``z <= 0``, giving the exact
  constant-order solution ``E_a(-|xi|^2 t^a)`` mode by mode.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla
from scipy import integrate, special

from .grid import Domain, GridFunction, fft, ifft, laplacian_symbol

__all__ = [
    "L1Weights", "l1_weights", "caputo_l1_march", "L1Trajectory", "InstabilityError",
    "mittag_leffler", "MittagLefflerError", "caputo_pointwise_check", "SERIES_SWITCH",
]

SERIES_SWITCH = 5.0


class InstabilityError(RuntimeError):
    pass


class MittagLefflerError(ArithmeticError):
    pass


@dataclass(frozen=True)
class L1Weights:
    alpha: float
    tau: float
    coefficients: np.ndarray


def l1_weights(alpha: float, tau: float, n: int) -> L1Weights:
    """``b_j = (j+1)^{1-a} - j^{1-a}`` for ``j = 0..n-1``."""
    j = np.arange(n, dtype=float)
    b = (j + 1) ** (1 - alpha) - j ** (1 - alpha)
    return L1Weights(alpha, tau, b)


@dataclass
class L1Trajectory:
    times: np.ndarray
    states: np.ndarray  # (n_steps + 1, *grid shape)
    domain: Domain
    iterations: int = 0

    def at(self, t: float) -> GridFunction:
        k = int(round(t / (self.times[1] - self.times[0])))
        if abs(self.times[k] - t) > 1e-9 * max(1.0, t):
            raise ValueError(f"t={t} is not on the time grid")
        return GridFunction(self.states[k], self.domain)


def _spd_solve(lam, c, rhs, c_ref, x0, tol):
    """CG for ``(-Delta + c(x)) u = rhs`` with c > 0, preconditioned by the
    constant-shift resolvent."""
    shape = rhs.shape
    n = rhs.size
    denom = lam + c_ref

    def A(v):
        v = v.reshape(shape)
        return (ifft(lam * fft(v)).real + c * v).ravel()

    def M(v):
        return ifft(fft(v.reshape(shape)) / denom).real.ravel()

    count = [0]

    def cb(_):
        count[0] += 1

    op = spla.LinearOperator((n, n), matvec=A, dtype=float)
    pre = spla.LinearOperator((n, n), matvec=M, dtype=float)
    u, info = spla.cg(op, rhs.ravel(), x0=None if x0 is None else x0.ravel(), rtol=tol, atol=0.0,
                      M=pre, maxiter=500, callback=cb)
    if info != 0:
        raise RuntimeError(f"CG did not converge (info={info})")
    return u.reshape(shape), count[0]


def caputo_l1_march(domain: Domain, fld, u0: GridFunction, T: float, n_steps: int,
                    tol: float = 1e-12, keep: str = "all") -> L1Trajectory:
    """Implicit L1 scheme for ``d_t^{alpha(x)} u - Delta u = 0`` on ``[0, T]``.

    Step n solves ``(c - Delta) u^n = c (u^{n-1} - sum_{j>=1} b_j(x) (u^{n-j} - u^{n-j-1}))``
    with ``c(x) = tau^{-alpha(x)} / Gamma(2 - alpha(x))``. The history is kept
    densely. Real and imaginary parts of ``u0`` are marched together as two
    real problems.
    """
    if n_steps < 16:
        raise ValueError("n_steps must be at least 16")
    if not T > 0:
        raise ValueError("T must be positive")
    u0v = np.asarray(u0.values)
    if np.iscomplexobj(u0v) and np.any(u0v.imag):
        re = caputo_l1_march(domain, fld, GridFunction(u0v.real, domain), T, n_steps, tol, keep)
        im = caputo_l1_march(domain, fld, GridFunction(u0v.imag, domain), T, n_steps, tol, keep)
        return L1Trajectory(re.times, re.states + 1j * im.states, domain, re.iterations + im.iterations)
    u0v = u0v.real.astype(float)

    tau = T / n_steps
    lam = laplacian_symbol(domain).eigenvalues
    alpha = np.asarray(fld.values, dtype=float).ravel()
    N = alpha.size
    c = (tau ** (-alpha) / special.gamma(2 - alpha)).reshape(domain.shape)
    c_ref = 0.5 * (c.min() + c.max())

    # one contiguous history array per distinct order, so the history sum
    # is a BLAS matrix-vector product per order with no copies
    orders, inverse = np.unique(alpha, return_inverse=True)
    grouped = len(orders) <= 64
    if grouped:
        groups = [np.flatnonzero(inverse == g) for g in range(len(orders))]
        weights = [l1_weights(a, tau, n_steps).coefficients for a in orders]
    else:
        groups = [np.arange(N)]
        j = np.arange(n_steps, dtype=float)[:, None]
        wmat = (j + 1) ** (1 - alpha[None, :]) - j ** (1 - alpha[None, :])
    diffs = [np.empty((n_steps, idx.size)) for idx in groups]  # u^{m+1} - u^m

    c_flat = c.ravel()
    states = np.empty((n_steps + 1, N))
    states[0] = u0v.ravel()
    prev_norm = np.linalg.norm(states[0])
    iters = 0
    hist = np.zeros(N)
    for n in range(1, n_steps + 1):
        hist[:] = 0.0
        if n > 1:
            # sum_{j=1}^{n-1} b_j d[n-1-j] = sum_{m=0}^{n-2} b_{n-1-m} d[m]
            if grouped:
                for idx, b, d in zip(groups, weights, diffs):
                    hist[idx] = b[n - 1:0:-1] @ d[: n - 1]
            else:
                hist = np.einsum("jx,jx->x", wmat[n - 1:0:-1], diffs[0][: n - 1])
        rhs = (c_flat * (states[n - 1] - hist)).reshape(domain.shape)
        u, k = _spd_solve(lam, c, rhs, c_ref, states[n - 1].reshape(domain.shape), tol)
        iters += k
        states[n] = u.ravel()
        step = states[n] - states[n - 1]
        for idx, d in zip(groups, diffs):
            d[n - 1] = step[idx]
        cur = np.linalg.norm(states[n])
        if not np.isfinite(cur) or (prev_norm > 0 and cur > 10 * prev_norm):
            raise InstabilityError(f"norm grew from {prev_norm:.3g} to {cur:.3g} at step {n}")
        prev_norm = cur
    times = tau * np.arange(n_steps + 1)
    return L1Trajectory(times, states.reshape((n_steps + 1,) + domain.shape), domain, iters)


def _ml_term(k: int, x: float, alpha: float, lx: float) -> float:
    g = alpha * k + 1
    if g < 170:
        try:
            # pow and gamma are each correctly rounded to an ulp or so; the
            # exp-of-logs form loses ~|log term| ulps
            return math.pow(x, k) / math.gamma(g)
        except OverflowError:
            pass
    try:
        return math.exp(k * lx - math.lgamma(g))
    except OverflowError:
        raise MittagLefflerError(f"series terms overflow for |z|={x}") from None


def _ml_series(alpha: float, z: float, tol: float) -> float:
    x = abs(z)
    if x == 0:
        return 1.0
    terms = []
    lx = math.log(x)
    k = 0
    peak = x ** (1.0 / alpha)
    while True:
        mag = _ml_term(k, x, alpha, lx)
        terms.append(mag if k % 2 == 0 else -mag)
        if k > peak and mag < 1e-3 * min(tol, 1e-16):
            break
        k += 1
        if k > 10000:
            raise MittagLefflerError("series did not terminate")
    value = math.fsum(terms)
    # rounding of each term is the error floor
    err = 4 * np.finfo(float).eps * max(abs(t) for t in terms)
    if err > tol:
        raise MittagLefflerError(
            f"series for E_{alpha}({z}) accurate only to ~{err:.1e} > tol={tol:.1e}"
        )
    return value


def _ml_integral(alpha: float, z: float, tol: float) -> float:
    # E_a(-x) = sin(a pi)/(a pi) * int_0^inf exp(-(x u)^{1/a}) / (u^2 + 2u cos(a pi) + 1) du
    x = -z
    ca = math.cos(alpha * math.pi)
    upper = 50.0 ** alpha / x  # exp(-(x u)^{1/a}) < e^{-50} beyond

    def f(u):
        return math.exp(-((x * u) ** (1.0 / alpha))) / (u * u + 2 * u * ca + 1)

    pts = [upper * q for q in (1e-3, 1e-2, 0.1, 0.5) if upper * q < upper]
    val, err = integrate.quad(f, 0.0, upper, points=pts, epsabs=0.1 * tol, epsrel=1e-13, limit=400)
    val *= math.sin(alpha * math.pi) / (alpha * math.pi)
    if err > tol:
        raise MittagLefflerError(f"quadrature error {err:.1e} exceeds tol={tol:.1e}")
    return val


def mittag_leffler(alpha: float, z: float, tol: float = 1e-12, method: str = "auto") -> float:
    """``E_alpha(z)`` for real ``z <= 0`` and ``alpha`` in (0, 1].

    Uses the power series for ``|z| <= 5`` and the nonnegative spectral
    density representation beyond; below the switch the integral is also
    used when the series cannot reach ``tol`` (small ``alpha``). ``method`` may force ``"series"`` or
    ``"integral"``. Raises :class:`MittagLefflerError` when the chosen
    representation cannot meet ``tol``.
    """
    if z > 0:
        raise ValueError("only z <= 0 is supported")
    if not 0 < alpha <= 1:
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if z == 0:
        return 1.0
    if method == "auto":
        if alpha == 1:
            # E_1 = exp; the series is kept below the switch as a self-check
            return _ml_series(alpha, z, tol) if abs(z) <= SERIES_SWITCH else math.exp(z)
        if abs(z) <= SERIES_SWITCH:
            try:
                return _ml_series(alpha, z, tol)
            except MittagLefflerError:
                # small alpha: the series cancels badly even below the switch
                return _ml_integral(alpha, z, tol)
        return _ml_integral(alpha, z, tol)
    if method == "series":
        return _ml_series(alpha, z, tol)
    if method == "integral":
        if alpha == 1:
            raise MittagLefflerError("integral representation degenerates at alpha = 1")
        return _ml_integral(alpha, z, tol)
    raise ValueError(f"unknown method {method!r}")


def caputo_pointwise_check(alpha: float, t: float, slope: float = 1.0) -> float:
    """Caputo derivative at ``t`` of ``f(s) = slope * s`` by adaptive quadrature.

    The ``(t-s)^{-alpha}`` endpoint singularity is handled by an algebraic
    weight; the exact value is ``slope * t^{1-alpha} / Gamma(2-alpha)``.
    """
    if t <= 0:
        return 0.0
    if slope == 0:
        return 0.0
    val, _ = integrate.quad(lambda s: slope, 0.0, t, weight="alg", wvar=(0.0, -alpha),
                            epsabs=0.0, epsrel=1e-13)
    return val / special.gamma(1 - alpha)
