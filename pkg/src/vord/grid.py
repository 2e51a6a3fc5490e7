"""Periodic box discretization, grid functions and the spectral Laplacian.

The box is ``[-L, L)^d`` sampled with ``n`` points per axis, ``h = 2L/n``.
Transforms use the unitary DFT (``norm="ortho"``), so the discrete L2 norm
``sqrt(h^d * sum |f|^2)`` is preserved exactly between physical and
frequency space.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Domain", "GridFunction", "SpectralSymbol", "Box", "Ball", "Tabulated",
    "laplacian_symbol", "forward_transform", "inverse_transform", "l2_norm",
    "apply_laplacian", "indicator_mask", "support_margin", "write_grid_csv",
    "read_grid_csv", "fft", "ifft",
]


@dataclass(frozen=True)
class Domain:
    d: int
    L: float
    n: int

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {self.d}")
        if not self.L > 0:
            raise ValueError(f"half-length L must be positive, got {self.L}")
        n = int(self.n)
        if n < 8 or n & (n - 1):
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")

    @property
    def h(self) -> float:
        return 2.0 * self.L / self.n

    @property
    def cell_volume(self) -> float:
        return self.h ** self.d

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def size(self) -> int:
        return self.n ** self.d

    def axis(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.n)

    def coords(self) -> list:
        """Coordinate arrays, one per axis, each of shape ``self.shape``."""
        ax = self.axis()
        return np.meshgrid(*([ax] * self.d), indexing="ij")

    def radius(self, center=None) -> np.ndarray:
        xs = self.coords()
        c = np.zeros(self.d) if center is None else np.asarray(center, float)
        return np.sqrt(sum((x - ci) ** 2 for x, ci in zip(xs, c)))

    def wavenumbers(self) -> np.ndarray:
        """Integer frequencies k in FFT order, covering [-n/2, n/2)."""
        return sfft.fftfreq(self.n, d=1.0 / self.n)

    def manifest(self) -> str:
        return f"d={self.d},n={self.n},L={self.L!r}"


@dataclass
class GridFunction:
    values: np.ndarray
    domain: Domain
    spectral: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex).reshape(self.domain.shape)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function has non-finite entries")

    def norm(self) -> float:
        return l2_norm(self)

    def copy(self) -> "GridFunction":
        return GridFunction(self.values.copy(), self.domain, self.spectral)


@dataclass(frozen=True)
class SpectralSymbol:
    """Eigenvalues |xi_k|^2 of -Delta on the periodic box, in FFT layout."""

    eigenvalues: np.ndarray = field(repr=False)

    @property
    def max(self) -> float:
        return float(self.eigenvalues.max())


@dataclass(frozen=True)
class Box:
    center: Sequence[float]
    half_widths: Sequence[float]


@dataclass(frozen=True)
class Ball:
    center: Sequence[float]
    radius: float


@dataclass(frozen=True)
class Tabulated:
    mask: np.ndarray


Region = Union[Box, Ball, Tabulated]


_symbol_cache: dict = {}


def laplacian_symbol(domain: Domain) -> SpectralSymbol:
    cached = _symbol_cache.get(domain)
    if cached is not None:
        return cached
    lam1 = (np.pi * domain.wavenumbers() / domain.L) ** 2
    lam = np.zeros(domain.shape)
    for axis in range(domain.d):
        shape = [1] * domain.d
        shape[axis] = domain.n
        lam = lam + lam1.reshape(shape)
    lam.setflags(write=False)
    sym = SpectralSymbol(lam)
    _symbol_cache[domain] = sym
    return sym


def fft(values: np.ndarray) -> np.ndarray:
    return sfft.fftn(values, norm="ortho")


def ifft(values: np.ndarray) -> np.ndarray:
    return sfft.ifftn(values, norm="ortho")


def forward_transform(f: GridFunction) -> GridFunction:
    if f.spectral:
        raise ValueError("grid function is already in frequency space")
    return GridFunction(fft(f.values), f.domain, spectral=True)


def inverse_transform(f: GridFunction) -> GridFunction:
    if not f.spectral:
        raise ValueError("grid function is not in frequency space")
    return GridFunction(ifft(f.values), f.domain, spectral=False)


def l2_norm(f) -> float:
    if isinstance(f, GridFunction):
        return float(np.sqrt(f.domain.cell_volume) * np.linalg.norm(f.values.ravel()))
    raise TypeError("l2_norm expects a GridFunction")


def apply_laplacian(f: GridFunction) -> GridFunction:
    lam = laplacian_symbol(f.domain).eigenvalues
    if f.spectral:
        return GridFunction(-lam * f.values, f.domain, spectral=True)
    return GridFunction(ifft(-lam * fft(f.values)), f.domain)


def indicator_mask(domain: Domain, region: Region) -> np.ndarray:
    if isinstance(region, Tabulated):
        mask = np.asarray(region.mask, dtype=bool)
        if mask.shape != domain.shape:
            raise ValueError(f"tabulated mask shape {mask.shape} != grid {domain.shape}")
        return mask.copy()
    xs = domain.coords()
    if isinstance(region, Ball):
        if region.radius <= 0:
            return np.zeros(domain.shape, dtype=bool)
        return domain.radius(region.center) <= region.radius
    if isinstance(region, Box):
        mask = np.ones(domain.shape, dtype=bool)
        for x, c, w in zip(xs, region.center, region.half_widths):
            mask &= np.abs(x - c) <= w
        return mask
    raise TypeError(f"unknown region descriptor {region!r}")


def support_margin(domain: Domain, values: np.ndarray, rel: float = 1e-10) -> float:
    """Distance from the numerical support of ``values`` to the box boundary.

    The support is where ``|values| > rel * max|values|``; an empty support
    returns ``L``.
    """
    a = np.abs(np.asarray(values))
    if a.dtype == bool:
        supp = a
    else:
        top = a.max() if a.size else 0.0
        if top == 0:
            return float(domain.L)
        supp = a > rel * top
    if not supp.any():
        return float(domain.L)
    margin = np.inf
    for x in domain.coords():
        xi = x[supp]
        margin = min(margin, domain.L - xi.max(), xi.min() + domain.L)
    return float(margin)


def write_grid_csv(path, f: GridFunction) -> None:
    vals = f.values.ravel()
    with open(path, "w") as fh:
        fh.write(f"# {f.domain.manifest()}\n")
        fh.write("index,re,im\n")
        for i, v in enumerate(vals):
            fh.write(f"{i},{v.real:.17g},{v.imag:.17g}\n")


def read_grid_csv(path) -> GridFunction:
    with open(path) as fh:
        head = fh.readline().lstrip("#").strip()
        meta = dict(kv.split("=") for kv in head.split(","))
        domain = Domain(int(meta["d"]), float(meta["L"]), int(meta["n"]))
        data = np.loadtxt(fh, delimiter=",", skiprows=1, ndmin=2)
    vals = np.zeros(domain.size, dtype=complex)
    idx = data[:, 0].astype(int)
    vals[idx] = data[:, 1] + 1j * data[:, 2]
    return GridFunction(vals, domain)
