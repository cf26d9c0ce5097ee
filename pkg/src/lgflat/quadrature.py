"""Polar-plane quadrature for overlap integrals.

Radial direction: Gauss-Legendre on ``[0, r_max]`` (optionally composite, split
at breakpoints where the integrand has kinks or jumps), with the polar Jacobian
``r`` folded into the weights. Azimuthal direction: uniform trapezoid rule,
exact for trigonometric polynomials of degree below ``n_azimuthal / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Union

import numpy as np

from .errors import NonConverged

Field = Union[Callable, np.ndarray]


@dataclass(frozen=True)
class GridSpec:
    n_radial: int = 256
    n_azimuthal: int = 64
    r_max: float = 8.0

    def __post_init__(self):
        if self.n_radial < 16:
            raise ValueError(f"n_radial must be >= 16, got {self.n_radial}")
        if self.n_azimuthal < 8:
            raise ValueError(f"n_azimuthal must be >= 8, got {self.n_azimuthal}")
        if self.n_azimuthal % 2:
            raise ValueError(f"n_azimuthal must be even, got {self.n_azimuthal}")
        if not self.r_max > 0:
            raise ValueError(f"r_max must be positive, got {self.r_max}")

    def refined(self) -> "GridSpec":
        return GridSpec(2 * self.n_radial, 2 * self.n_azimuthal, self.r_max)


def default_n_azimuthal(max_abs_ell: int) -> int:
    n = 4 * (2 * max_abs_ell + 1)
    return max(8, n + (n % 2))


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    spec: GridSpec
    r: np.ndarray  # (n_r,)
    w_r: np.ndarray  # (n_r,), includes the Jacobian r
    phi: np.ndarray  # (n_phi,)
    w_phi: float

    @property
    def shape(self) -> tuple[int, int]:
        return (self.r.size, self.phi.size)

    @property
    def weights(self) -> np.ndarray:
        """2D weight array matching :attr:`shape`."""
        return self.w_r[:, None] * self.w_phi * np.ones(self.phi.size)[None, :]

    @property
    def rr(self) -> np.ndarray:
        return self.r[:, None]

    @property
    def pp(self) -> np.ndarray:
        return self.phi[None, :]

    def integrate(self, values) -> complex:
        return complex(np.sum(np.broadcast_to(values, self.shape) * self.weights))


@lru_cache(maxsize=64)
def _gauss_legendre(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def build_grid(spec: GridSpec, breakpoints=()) -> QuadratureGrid:
    """Precompute nodes and weights for ``spec``.

    ``breakpoints`` inside ``(0, r_max)`` split the radial rule into panels;
    each panel gets at least 16 nodes and otherwise a share of
    ``n_radial`` proportional to its length.
    """
    if spec.n_azimuthal % 2:
        raise ValueError("n_azimuthal must be even")
    cuts = sorted({float(b) for b in breakpoints if 0.0 < b < spec.r_max})
    edges = [0.0, *cuts, spec.r_max]
    rs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        if len(edges) == 2:
            n = spec.n_radial
        else:
            n = max(16, math.ceil(spec.n_radial * (b - a) / spec.r_max))
        x, w = _gauss_legendre(n)
        half = 0.5 * (b - a)
        r = half * x + 0.5 * (a + b)
        rs.append(r)
        ws.append(half * w * r)
    r = np.concatenate(rs)
    w_r = np.concatenate(ws)
    phi = 2.0 * np.pi * np.arange(spec.n_azimuthal) / spec.n_azimuthal
    for arr in (r, w_r, phi):
        arr.setflags(write=False)
    return QuadratureGrid(spec, r, w_r, phi, 2.0 * np.pi / spec.n_azimuthal)


def _on_grid(f: Field, grid: QuadratureGrid) -> np.ndarray:
    if callable(f):
        f = f(grid.rr, grid.pp)
    return np.broadcast_to(np.asarray(f, dtype=complex), grid.shape)


def overlap(field_a: Field, field_b: Field, weight, grid: QuadratureGrid) -> complex:
    """``integral conj(A) B weight r dr dphi`` on ``grid``.

    Fields are callables ``f(r, phi)`` that broadcast over arrays, or arrays
    already sampled on the grid. ``weight`` is a callable of ``r`` or None.
    """
    a = _on_grid(field_a, grid)
    b = _on_grid(field_b, grid)
    wt = grid.weights
    if weight is not None:
        wt = wt * np.asarray(weight(grid.r), dtype=float)[:, None]
    return complex(np.sum((np.conj(a) * b) * wt))


def _tail_grid(spec: GridSpec, breakpoints=()) -> QuadratureGrid:
    """Grid over the annulus ``[r_max, 2 r_max]`` just outside the aperture."""
    a, b = spec.r_max, 2.0 * spec.r_max
    cuts = sorted({float(x) for x in breakpoints if a < x < b})
    edges = [a, *cuts, b]
    rs, ws = [], []
    for lo, hi in zip(edges[:-1], edges[1:]):
        x, w = _gauss_legendre(max(16, math.ceil(spec.n_radial * (hi - lo) / (b - a))))
        half = 0.5 * (hi - lo)
        r = half * x + 0.5 * (lo + hi)
        rs.append(r)
        ws.append(half * w * r)
    phi = 2.0 * np.pi * np.arange(spec.n_azimuthal) / spec.n_azimuthal
    return QuadratureGrid(spec, np.concatenate(rs), np.concatenate(ws), phi, 2.0 * np.pi / spec.n_azimuthal)


def converged_overlap(field_a, field_b, weight, spec: GridSpec, rel_tol: float, breakpoints=()) -> complex:
    """Overlap on ``spec`` and on a grid refined 2x in both directions.

    Returns the refined value. Raises :class:`NonConverged` when the two
    disagree by more than ``rel_tol * max(1, |value|)``, or when the integrand
    still carries that much weight just outside the aperture (clipping).
    """
    if not rel_tol > 0:
        raise ValueError("rel_tol must be positive")
    if not callable(field_a) or not callable(field_b):
        raise TypeError("converged_overlap needs callable fields")
    coarse = overlap(field_a, field_b, weight, build_grid(spec, breakpoints))
    fine = overlap(field_a, field_b, weight, build_grid(spec.refined(), breakpoints))
    scale = max(1.0, abs(fine))
    diff = abs(fine - coarse)
    if diff > rel_tol * scale:
        raise NonConverged(
            f"overlap changed by {diff:.3e} under refinement "
            f"(n_radial={spec.n_radial}, n_azimuthal={spec.n_azimuthal}, r_max={spec.r_max})"
        )
    tail = abs(overlap(field_a, field_b, weight, _tail_grid(spec.refined(), breakpoints)))
    if tail > rel_tol * scale:
        raise NonConverged(f"aperture r_max={spec.r_max} clips the integrand (outside contribution {tail:.3e})")
    return fine
