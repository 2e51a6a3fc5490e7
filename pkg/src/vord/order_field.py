"""Space-dependent fractional order alpha(x) on a grid.

alpha equals a baseline ``alpha_star`` outside a compact region K and a
profile kappa inside it, with ``0 < alpha_m <= alpha <= alpha_M < 1``.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .grid import Ball, Box, Domain, Region, Tabulated, indicator_mask

__all__ = [
    "OrderField", "OrderFieldError", "Bump", "build_order_field",
    "validate_theorem_condition", "order_extrema", "read_kappa_csv",
]


class OrderFieldError(ValueError):
    pass


@dataclass(frozen=True)
class Bump:
    """Smooth radial bump ``base + amplitude * exp(1 - 1/(1 - |x-c|^2/rho^2))``.

    Only valid together with a :class:`~vord.grid.Ball` region, whose centre
    and radius give ``c`` and ``rho``.
    """

    base: float
    amplitude: float


KappaProfile = Union[float, Bump, np.ndarray]


@dataclass(frozen=True, eq=False)
class OrderField:
    domain: Domain
    alpha_star: float
    alpha_m: float
    alpha_M: float
    K_mask: np.ndarray = field(repr=False)
    kappa_values: np.ndarray = field(repr=False)
    s: float = 8.0

    @property
    def d(self) -> int:
        return self.domain.d

    @property
    def values(self) -> np.ndarray:
        """alpha over the full grid."""
        return _cached_values(self)

    @property
    def is_constant(self) -> bool:
        return bool(np.all(self.values == self.alpha_star))


def _cached_values(fld: OrderField) -> np.ndarray:
    vals = fld.__dict__.get("_values")
    if vals is None:
        vals = np.full(fld.domain.shape, float(fld.alpha_star))
        vals[fld.K_mask] = fld.kappa_values
        vals.setflags(write=False)
        object.__setattr__(fld, "_values", vals)
    return vals


def _bump_profile(domain: Domain, ball: Ball, bump: Bump) -> np.ndarray:
    rr = (domain.radius(ball.center) / ball.radius) ** 2
    out = np.zeros(domain.shape)
    inside = rr < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - rr[inside]))
    return bump.base + bump.amplitude * out


def build_order_field(
    domain: Domain,
    alpha_star: float,
    alpha_m: float,
    alpha_M: float,
    region: Region | None = None,
    kappa: KappaProfile | None = None,
    s: float = 8.0,
) -> OrderField:
    """Build and validate an order field.

    ``kappa`` is a constant, a :class:`Bump`, or an array over the full grid
    (only its entries on K are used). Invalid input raises
    :class:`OrderFieldError`; nothing is clamped.
    """
    if not 0 < alpha_m <= alpha_M < 1:
        raise OrderFieldError(f"bounds must satisfy 0 < alpha_m <= alpha_M < 1, got ({alpha_m}, {alpha_M})")
    if not alpha_m <= alpha_star <= alpha_M:
        raise OrderFieldError(f"alpha_star={alpha_star} outside [{alpha_m}, {alpha_M}]")
    if region is None:
        mask = np.zeros(domain.shape, dtype=bool)
    else:
        mask = indicator_mask(domain, region)
    if mask.any() and _touches_boundary(mask):
        raise OrderFieldError("region K touches the boundary of the box")

    if kappa is None:
        kappa = alpha_star
    if isinstance(kappa, Bump):
        if not isinstance(region, Ball):
            raise OrderFieldError("bump profile requires a ball region")
        full = _bump_profile(domain, region, kappa)
    elif np.isscalar(kappa):
        full = np.full(domain.shape, float(kappa))
    else:
        full = np.asarray(kappa, dtype=float)
        if full.shape != domain.shape:
            raise OrderFieldError(f"tabulated kappa shape {full.shape} != grid {domain.shape}")
    kv = full[mask]
    if kv.size and not np.all(np.isfinite(kv)):
        raise OrderFieldError("kappa has non-finite values on K")
    if kv.size and (kv.min() < alpha_m or kv.max() > alpha_M):
        raise OrderFieldError(
            f"kappa range [{kv.min():.6g}, {kv.max():.6g}] violates bounds [{alpha_m}, {alpha_M}]"
        )
    kv = kv.copy()
    kv.setflags(write=False)
    mask = mask.copy()
    mask.setflags(write=False)
    return OrderField(domain, float(alpha_star), float(alpha_m), float(alpha_M), mask, kv, float(s))


def _touches_boundary(mask: np.ndarray) -> bool:
    for axis in range(mask.ndim):
        edge = np.take(mask, [0, mask.shape[axis] - 1], axis=axis)
        if edge.any():
            return True
    return False


def validate_theorem_condition(fld: OrderField, s: float | None = None) -> tuple[bool, float]:
    """Check ``alpha_star * (1 - d/s) < alpha_m``; returns (holds, margin)."""
    s = fld.s if s is None else s
    d = fld.d
    if not s > max(d, 4):
        raise OrderFieldError(f"s={s} must exceed max(d, 4)={max(d, 4)}")
    margin = fld.alpha_m - fld.alpha_star * (1.0 - d / s)
    return margin > 0, margin


def order_extrema(fld: OrderField) -> tuple[float, float]:
    v = fld.values
    return float(v.min()), float(v.max())


def read_kappa_csv(path, domain: Domain) -> tuple[np.ndarray, np.ndarray]:
    """Read a tabulated kappa CSV (header ``i,j,kappa``; ``i,kappa`` in 1-d,
    ``i,j,k,kappa`` in 3-d). Listed cells form K.

    Returns ``(mask, kappa_full)`` with NaN off K.
    """
    mask = np.zeros(domain.shape, dtype=bool)
    kappa = np.full(domain.shape, np.nan)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        idx_keys = ["i", "j", "k"][: domain.d]
        missing = [k for k in idx_keys + ["kappa"] if k not in (reader.fieldnames or [])]
        if missing:
            raise OrderFieldError(f"kappa CSV missing columns {missing}")
        for row in reader:
            idx = tuple(int(row[k]) for k in idx_keys)
            mask[idx] = True
            kappa[idx] = float(row["kappa"])
    return mask, kappa


def tabulated_region(mask: np.ndarray) -> Tabulated:
    return Tabulated(np.asarray(mask, dtype=bool))


def region_from_spec(kind: str, center, size) -> Region:
    """Small helper for config parsing: ``ball`` (size = radius) or ``box``
    (size = half-widths, scalar broadcast)."""
    if kind == "ball":
        return Ball(tuple(center), float(size))
    if kind == "box":
        hw = np.broadcast_to(np.asarray(size, float), (len(center),))
        return Box(tuple(center), tuple(hw))
    raise OrderFieldError(f"unknown region kind {kind!r}")
