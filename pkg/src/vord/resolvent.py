"""Laplace-domain solves and the operator norms around them.

Everything is built from one fast kernel: the constant-shift resolvent
``(-Delta + c)^{-1}``, which is a pointwise division in frequency space.
Variable-order problems ``(-Delta + q(x)) U = f`` are treated as a diagonal
perturbation of it, first by fixed-point (Neumann) iteration and, when that
contracts too slowly, by GMRES right-preconditioned with the same resolvent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
import scipy.fft as sfft
import scipy.sparse.linalg as spla

from .complex_power import PolarPoint, polar_power, power_field
from .grid import Domain, GridFunction, fft, ifft, laplacian_symbol

__all__ = [
    "SolveReport", "SolverError", "NormEstimate", "solve_constant_order",
    "solve_variable_order", "solve_shifted", "laplace_rhs", "perturbation_norm",
    "resolvent_norm", "composed_norm", "composed_symbol_max", "schatten_norm",
    "schatten_spectrum", "dense_resolvent", "empirical_r0", "resolvent_bound",
    "power_iteration", "masked_resolvent_norm",
]

NEUMANN_SWITCH = 0.9
NEUMANN_MAX_ITER = 60


class SolverError(RuntimeError):
    pass


@dataclass
class SolveReport:
    method: str
    iterations: int
    relative_residual: float
    contraction_estimate: Optional[float] = None


@dataclass
class NormEstimate:
    value: float
    iterations: int
    converged: bool

    def __float__(self):
        return self.value


def _apply_resolvent(lam, c, values):
    return ifft(fft(values) / (lam + c))


def _apply_operator(lam, q, values):
    return ifft(lam * fft(values)) + q * values


def _norm(v) -> float:
    return float(np.linalg.norm(v.ravel()))


def solve_constant_order(domain: Domain, alpha_star: float, p: PolarPoint, rhs: GridFunction) -> GridFunction:
    lam = laplacian_symbol(domain).eigenvalues
    c = polar_power(p, alpha_star)
    return GridFunction(_apply_resolvent(lam, c, rhs.values), domain)


def solve_shifted(
    domain: Domain,
    q: np.ndarray,
    rhs: np.ndarray,
    q_ref: complex,
    tol: float = 1e-10,
    method: str = "auto",
    x0: np.ndarray | None = None,
    max_neumann: int = NEUMANN_MAX_ITER,
    switch: float = NEUMANN_SWITCH,
) -> tuple[np.ndarray, SolveReport]:
    """Solve ``(-Delta + q(x)) u = rhs`` on raw grid arrays.

    ``q_ref`` is the constant shift of the preconditioning resolvent. With
    ``method="auto"`` the Neumann iteration runs first and hands over to a
    Krylov solve (warm-started) once the observed contraction exceeds
    ``switch`` or ``max_neumann`` iterations pass.
    """
    lam = laplacian_symbol(domain).eigenvalues
    rhs = np.asarray(rhs, dtype=complex).reshape(domain.shape)
    q = np.broadcast_to(np.asarray(q, dtype=complex), domain.shape)
    bnorm = _norm(rhs)
    if bnorm == 0:
        return np.zeros(domain.shape, dtype=complex), SolveReport("constant_diagonal", 0, 0.0)
    pert = q_ref - q
    if not np.any(pert):
        u = _apply_resolvent(lam, q_ref, rhs)
        res = _norm(rhs - _apply_operator(lam, q, u)) / bnorm
        return u, SolveReport("constant_diagonal", 1, res)

    total_iters = 0
    u = x0
    if method in ("auto", "neumann"):
        u, rel, iters, rho, ok = _neumann(lam, pert, q_ref, rhs, bnorm, tol, x0, max_neumann, switch)
        total_iters += iters
        if ok:
            return u, SolveReport("neumann", iters, rel, rho)
        if method == "neumann":
            raise SolverError(f"Neumann iteration stalled (contraction {rho:.3g}, residual {rel:.3g})")
    elif method != "krylov":
        raise ValueError(f"unknown method {method!r}")

    u, rel, iters = _krylov(lam, q, q_ref, rhs, bnorm, tol, u)
    total_iters += iters
    if not rel <= tol:
        raise SolverError(f"Krylov solve did not reach tol={tol:.1e} (residual {rel:.3g})")
    return u, SolveReport("direct_krylov", total_iters, rel)


def _neumann(lam, pert, q_ref, rhs, bnorm, tol, x0, max_iter, switch):
    denom = lam + q_ref
    if x0 is None:
        u_prev = np.zeros_like(rhs)
        u = ifft(fft(rhs) / denom)
    else:
        u_prev = np.asarray(x0, dtype=complex).reshape(rhs.shape)
        u = ifft(fft(rhs + pert * u_prev) / denom)
    du = u - u_prev
    rel = _norm(pert * du) / bnorm
    iters = 1
    steps = [_norm(du)]
    rho = 0.0
    while rel > tol:
        if iters >= max_iter:
            return u, rel, iters, rho, False
        u_new = ifft(fft(rhs + pert * u) / denom)
        du = u_new - u
        u = u_new
        iters += 1
        steps.append(_norm(du))
        rel = _norm(pert * du) / bnorm
        if len(steps) >= 3 and steps[-3] > 0:
            rho = math.sqrt(steps[-1] / steps[-3])
            if rho > switch and rel > tol:
                return u, rel, iters, rho, False
    if len(steps) >= 2 and steps[-2] > 0 and len(steps) < 3:
        rho = steps[-1] / steps[-2]
    return u, rel, iters, rho, True


def _krylov(lam, q, q_ref, rhs, bnorm, tol, x0):
    shape = rhs.shape
    n = rhs.size
    denom = lam + q_ref

    # right preconditioning: A R* y = rhs, u = R* y; GMRES then tracks the
    # true residual of u.
    def matvec(y):
        y = y.reshape(shape)
        u = ifft(fft(y) / denom)
        return (ifft(lam * fft(u)) + q * u).ravel()

    op = spla.LinearOperator((n, n), matvec=matvec, dtype=complex)
    y0 = None if x0 is None else ifft(denom * fft(np.asarray(x0).reshape(shape))).ravel()
    count = [0]

    def cb(_):
        count[0] += 1

    y = y0
    rel = np.inf
    for attempt in range(4):
        y, info = spla.gmres(op, rhs.ravel(), x0=y, rtol=tol * 0.5 ** attempt, atol=0.0,
                             restart=60, maxiter=40, callback=cb, callback_type="pr_norm")
        u = ifft(fft(y.reshape(shape)) / denom)
        rel = _norm(rhs - _apply_operator(lam, q, u)) / bnorm
        if rel <= tol:
            break
    return u, rel, count[0]


def solve_variable_order(domain: Domain, fld, p: PolarPoint, rhs: GridFunction, tol: float = 1e-10,
                         method: str = "auto") -> tuple[GridFunction, SolveReport]:
    q = power_field(p, fld)
    q_ref = polar_power(p, fld.alpha_star)
    u, rep = solve_shifted(domain, q, rhs.values, complex(q_ref), tol=tol, method=method)
    return GridFunction(u, domain), rep


def laplace_rhs(fld, p: PolarPoint, u0: GridFunction) -> GridFunction:
    return GridFunction(power_field(p, fld, -1.0) * u0.values, u0.domain)


def power_iteration(apply: Callable, apply_adj: Callable, shape, rtol: float = 1e-6,
                    maxiter: int = 2000, seed: int = 0, min_iter: int = 10) -> NormEstimate:
    """Largest singular value of a linear map via power iteration on M^H M.

    Stops when the estimate changes by less than ``rtol`` (relative) over
    five consecutive sweeps. A second random start is tried if the first
    stagnates; the larger estimate wins.
    """
    best = NormEstimate(0.0, 0, False)
    total = 0
    for attempt in range(2):
        rng = np.random.default_rng(seed + 7919 * attempt)
        v = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
        v /= _norm(v)
        hist = []
        converged = False
        for it in range(1, maxiter + 1):
            w = apply(v)
            sigma = _norm(w)
            if sigma == 0:
                return NormEstimate(0.0, total + it, True)
            z = apply_adj(w)
            zn = _norm(z)
            v = z / zn
            # ||M^H M v|| / ||M v|| is a lower bound on the norm, sharper than ||M v||
            hist.append(zn / sigma)
            if it >= min_iter and len(hist) > 5 and abs(hist[-1] - hist[-6]) <= rtol * hist[-1]:
                converged = True
                break
        total += it
        value = max(best.value, hist[-1])
        best = NormEstimate(float(value), total, converged or best.converged)
        if converged:
            break
    return best


def perturbation_norm(domain: Domain, fld, p: PolarPoint, rtol: float = 1e-6, seed: int = 0) -> NormEstimate:
    """``|| (p^alpha_star - p^alpha(x)) (-Delta + p^alpha_star)^{-1} ||``."""
    lam = laplacian_symbol(domain).eigenvalues
    c = complex(polar_power(p, fld.alpha_star))
    gap = c - power_field(p, fld)
    if not np.any(gap):
        return NormEstimate(0.0, 0, True)
    inv = 1.0 / (lam + c)

    def apply(v):
        return gap * ifft(inv * fft(v))

    def apply_adj(v):
        return ifft(np.conj(inv) * fft(np.conj(gap) * v))

    return power_iteration(apply, apply_adj, domain.shape, rtol=rtol, seed=seed)


def resolvent_norm(domain: Domain, fld, p: PolarPoint, rtol: float = 1e-6, tol: float = 1e-11,
                   seed: int = 0) -> NormEstimate:
    """``|| (-Delta + p^alpha(x))^{-1} ||`` by power iteration with inner solves."""
    q = power_field(p, fld)
    q_ref = complex(polar_power(p, fld.alpha_star))
    qc = np.conj(q)

    def apply(v):
        return solve_shifted(domain, q, v, q_ref, tol=tol)[0]

    def apply_adj(v):
        return solve_shifted(domain, qc, v, np.conj(q_ref), tol=tol)[0]

    return power_iteration(apply, apply_adj, domain.shape, rtol=rtol, seed=seed)


def resolvent_bound(fld, p: PolarPoint) -> float:
    """``C_beta * max_j r^{-alpha_j}`` over ``alpha_j in {alpha_m, alpha_M}``;
    for a constant field only ``alpha_star`` enters."""
    alphas = (fld.alpha_star,) if fld.is_constant else (fld.alpha_m, fld.alpha_M)
    if p.beta == 0:
        c_beta = 1.0
    else:
        c_beta = max(1.0 / abs(math.sin(a * p.beta)) for a in alphas)
    return c_beta * max(p.r ** (-a) for a in alphas)


def composed_norm(domain: Domain, alpha_star: float, p: PolarPoint, rtol: float = 1e-8,
                  seed: int = 0) -> NormEstimate:
    """``|| (-Delta + r^a)(-Delta + p^a)^{-1} ||`` by power iteration."""
    lam = laplacian_symbol(domain).eigenvalues
    mult = (lam + p.r ** alpha_star) / (lam + complex(polar_power(p, alpha_star)))

    def apply(v):
        return ifft(mult * fft(v))

    def apply_adj(v):
        return ifft(np.conj(mult) * fft(v))

    return power_iteration(apply, apply_adj, domain.shape, rtol=rtol, seed=seed)


def composed_symbol_max(domain: Domain, alpha_star: float, p: PolarPoint) -> float:
    """Exact value of :func:`composed_norm`: the operator is diagonal in
    frequency space, so its norm is the largest multiplier modulus."""
    lam = laplacian_symbol(domain).eigenvalues
    mult = (lam + p.r ** alpha_star) / (lam + complex(polar_power(p, alpha_star)))
    return float(np.abs(mult).max())


def dense_resolvent(domain: Domain, shift: float) -> np.ndarray:
    """Dense real matrix of ``(-Delta_h + shift)^{-1}`` (shift > 0)."""
    N = domain.size
    if N > 4096:
        raise ValueError(f"grid of {N} points too large for a dense resolvent (limit 4096)")
    lam = laplacian_symbol(domain).eigenvalues
    eye = np.eye(N).reshape((N,) + domain.shape)
    axes = tuple(range(1, domain.d + 1))
    cols = sfft.ifftn(sfft.fftn(eye, axes=axes) / (lam + shift), axes=axes)
    # column j of the matrix is R applied to e_j; R is real symmetric
    return np.ascontiguousarray(cols.real.reshape(N, N).T)


def schatten_spectrum(domain: Domain, K_mask: np.ndarray, r: float, alpha_star: float) -> np.ndarray:
    """Singular values of ``1_K (-Delta_h + r^alpha_star)^{-1}``."""
    mask = np.asarray(K_mask, dtype=bool).ravel()
    if not mask.any():
        return np.zeros(0)
    R = dense_resolvent(domain, r ** alpha_star)
    return np.linalg.svd(R[mask, :], compute_uv=False)


def schatten_norm(domain: Domain, K_mask: np.ndarray, r: float, alpha_star: float, order: float) -> float:
    if order < 2:
        raise ValueError(f"Schatten order must be >= 2, got {order}")
    sv = schatten_spectrum(domain, K_mask, r, alpha_star)
    if sv.size == 0:
        return 0.0
    top = sv.max()
    return float(top * np.sum((sv / top) ** order) ** (1.0 / order))


def masked_resolvent_norm(domain: Domain, K_mask: np.ndarray, r: float, alpha_star: float,
                          rtol: float = 1e-8, seed: int = 0) -> NormEstimate:
    """Operator norm of ``1_K (-Delta_h + r^alpha_star)^{-1}`` by power iteration."""
    lam = laplacian_symbol(domain).eigenvalues
    mask = np.asarray(K_mask, dtype=float)
    if not mask.any():
        return NormEstimate(0.0, 0, True)
    inv = 1.0 / (lam + r ** alpha_star)

    def apply(v):
        return mask * ifft(inv * fft(v))

    def apply_adj(v):
        return ifft(inv * fft(mask * v))

    return power_iteration(apply, apply_adj, domain.shape, rtol=rtol, seed=seed)


def _beta_samples(theta: float, n_beta: int) -> np.ndarray:
    if n_beta < 9:
        raise ValueError("at least 9 beta samples are required")
    if n_beta % 2 == 0:
        n_beta += 1
    return np.linspace(-theta, theta, n_beta)


def _max_perturbation(domain, fld, r, betas, rtol):
    # beta and -beta give the same norm (complex conjugation), so only
    # beta >= 0 is evaluated
    return max(perturbation_norm(domain, fld, PolarPoint(r, b), rtol=rtol).value
               for b in betas if b >= 0)


def empirical_r0(domain: Domain, fld, theta: float, n_beta: int = 9, rel: float = 1e-3,
                 r_floor: float = 1e-8, rtol: float = 1e-6) -> float:
    """Largest ``r <= 1`` with perturbation norm <= 1/2 on ``[-theta, theta]``.

    Bisection in ``log r`` to relative accuracy ``rel``, assuming a single
    crossing.
    """
    if fld.is_constant:
        return 1.0
    betas = _beta_samples(theta, n_beta)

    def ok(r):
        return _max_perturbation(domain, fld, r, betas, rtol) <= 0.5

    if ok(1.0):
        return 1.0
    if not ok(r_floor):
        raise SolverError(f"perturbation norm exceeds 1/2 even at r={r_floor:g}")
    lo, hi = math.log(r_floor), 0.0
    while hi - lo > math.log1p(rel):
        mid = 0.5 * (lo + hi)
        if ok(math.exp(mid)):
            lo = mid
        else:
            hi = mid
    return math.exp(lo)
