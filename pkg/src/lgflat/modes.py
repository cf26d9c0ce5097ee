"""Laguerre-Gauss modes at the beam-waist plane.

Fields follow the helical convention: a positive azimuthal index carries
``exp(+i l phi)``. Everything is evaluated at the waist, so there is no Gouy
phase and no wavefront curvature.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

_TOKEN = re.compile(r"^l(-?\d+)p(\d+)$")


@dataclass(frozen=True, order=True)
class ModeIndex:
    """Label ``(l, p)`` of one LG mode."""

    ell: int
    p: int

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 0:
            raise ValueError(f"radial index must be a nonnegative integer, got {self.p!r}")
        if int(self.ell) != self.ell:
            raise ValueError(f"azimuthal index must be an integer, got {self.ell!r}")
        object.__setattr__(self, "ell", int(self.ell))
        object.__setattr__(self, "p", int(self.p))

    @property
    def order(self) -> int:
        return mode_order(self)

    @property
    def token(self) -> str:
        return f"l{self.ell}p{self.p}"

    @classmethod
    def from_token(cls, token: str) -> "ModeIndex":
        m = _TOKEN.match(token.strip())
        if m is None:
            raise ValueError(f"bad mode token {token!r}, expected e.g. 'l-2p1'")
        return cls(int(m.group(1)), int(m.group(2)))

    def __str__(self):
        return self.token


def mode_order(mode: ModeIndex) -> int:
    return 2 * mode.p + abs(mode.ell) + 1


def enumerate_modes(max_order: int) -> list[ModeIndex]:
    """All modes with ``2p + |l| + 1 <= max_order``, sorted by (N, l, p)."""
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    out = []
    for n in range(1, max_order + 1):
        for ell in range(-(n - 1), n):
            rest = n - 1 - abs(ell)
            if rest % 2 == 0:
                out.append(ModeIndex(ell, rest // 2))
    return out


def laguerre_assoc(p: int, alpha: int, x):
    """Associated Laguerre polynomial ``L_p^alpha(x)`` by upward recurrence.

    Accepts scalars or arrays for ``x``; returns a float for scalar input.
    """
    if p < 0 or alpha < 0:
        raise ValueError("p and alpha must be nonnegative")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if p == 0:
        out = prev
    else:
        cur = 1.0 + alpha - x
        for k in range(1, p):
            prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
        out = cur
    return float(out) if out.ndim == 0 else out


def _log_norm(mode: ModeIndex) -> float:
    a = abs(mode.ell)
    return 0.5 * (math.log(2.0) + math.lgamma(mode.p + 1) - math.log(math.pi) - math.lgamma(mode.p + a + 1))


def lg_radial(mode: ModeIndex, waist: float, r):
    """Real radial profile of ``LG_{l,p}``; the full field is this times ``exp(i l phi)``."""
    if waist <= 0:
        raise ValueError("waist must be positive")
    r = np.asarray(r, dtype=float)
    a = abs(mode.ell)
    s = r / waist
    u = 2.0 * s * s
    radial = (math.sqrt(2.0) * s) ** a * laguerre_assoc(mode.p, a, u) * np.exp(-s * s)
    return math.exp(_log_norm(mode)) / waist * radial


def lg_field(mode: ModeIndex, waist: float, r, phi):
    """Complex waist-plane field of ``LG_{l,p}``, unit L2 norm over the plane."""
    r = np.asarray(r, dtype=float)
    phi = np.asarray(phi, dtype=float)
    out = lg_radial(mode, waist, r) * np.exp(1j * mode.ell * phi)
    return complex(out) if np.ndim(out) == 0 else out


def radial_zeros(mode: ModeIndex, waist: float) -> np.ndarray:
    """Radii (r > 0) where the radial profile changes sign."""
    if mode.p == 0:
        return np.empty(0)
    from scipy.special import roots_genlaguerre

    x, _ = roots_genlaguerre(mode.p, abs(mode.ell))
    return np.sort(waist * np.sqrt(x / 2.0))


@dataclass(frozen=True, eq=False)
class SpatialState:
    """Normalized pure superposition of LG modes sharing one waist."""

    modes: tuple[ModeIndex, ...]
    coeffs: np.ndarray
    waist: float = 1.0
    label: str | None = field(default=None)

    def __post_init__(self):
        modes = tuple(self.modes)
        coeffs = np.array(self.coeffs, dtype=complex).reshape(-1)
        if len(modes) == 0:
            raise ValueError("state needs at least one mode")
        if len(modes) != coeffs.size:
            raise ValueError("modes and coeffs differ in length")
        if len(set(modes)) != len(modes):
            raise ValueError("duplicate modes in state")
        if not self.waist > 0:
            raise ValueError("waist must be positive")
        norm = float(np.sum(np.abs(coeffs) ** 2))
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"coefficients not normalized (sum |c|^2 = {norm!r})")
        coeffs.setflags(write=False)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "waist", float(self.waist))

    @classmethod
    def from_coeffs(cls, modes: Sequence[ModeIndex], coeffs, waist: float = 1.0, label=None):
        """Build a state, rescaling ``coeffs`` to unit norm."""
        c = np.asarray(coeffs, dtype=complex).reshape(-1)
        n = np.linalg.norm(c)
        if n == 0:
            raise ValueError("zero coefficient vector")
        return cls(tuple(modes), c / n, waist, label)

    @classmethod
    def single(cls, mode: ModeIndex, waist: float = 1.0) -> "SpatialState":
        return cls((mode,), np.ones(1, dtype=complex), waist)

    @property
    def name(self) -> str:
        if self.label is not None:
            return self.label
        if len(self.modes) == 1 and self.coeffs[0] == 1:
            return self.modes[0].token
        return "+".join(m.token for m in self.modes)

    @property
    def is_single_mode(self) -> bool:
        return len(self.modes) == 1

    @property
    def max_order(self) -> int:
        return max(mode_order(m) for m in self.modes)

    @property
    def max_abs_ell(self) -> int:
        return max(abs(m.ell) for m in self.modes)

    def field(self, r, phi):
        """Evaluate the superposition; ``r`` and ``phi`` broadcast."""
        r = np.asarray(r, dtype=float)
        phi = np.asarray(phi, dtype=float)
        out = np.zeros(np.broadcast(r, phi).shape, dtype=complex)
        for m, c in zip(self.modes, self.coeffs):
            if c != 0:
                out = out + c * lg_radial(m, self.waist, r) * np.exp(1j * m.ell * phi)
        return out

    def peak_amplitude(self) -> float:
        """Global maximum of ``|psi|`` over the plane."""
        return _peak_amplitude(self)

    def radial_breakpoints(self) -> np.ndarray:
        """Sign-change radii for single-mode states, empty otherwise."""
        if not self.is_single_mode:
            return np.empty(0)
        return radial_zeros(self.modes[0], self.waist)

    def __eq__(self, other):
        if not isinstance(other, SpatialState):
            return NotImplemented
        return (
            self.modes == other.modes
            and self.waist == other.waist
            and np.array_equal(self.coeffs, other.coeffs)
        )

    def __hash__(self):
        return hash((self.modes, self.waist, self.coeffs.tobytes()))


def mode_states(modes: Iterable[ModeIndex], waist: float = 1.0) -> list[SpatialState]:
    return [SpatialState.single(m, waist) for m in modes]


def extent_radius(max_order: int, waist: float = 1.0) -> float:
    """Radius beyond which modes up to ``max_order`` carry negligible power."""
    return waist * max(8.0, math.sqrt(max_order) + 6.0)


def _peak_amplitude(state: SpatialState) -> float:
    from scipy.optimize import minimize, minimize_scalar

    w = state.waist
    rmax = extent_radius(state.max_order, w)
    if state.is_single_mode:
        mode = state.modes[0]
        c = abs(state.coeffs[0])
        rs = np.linspace(0.0, rmax, 4001)
        vals = np.abs(lg_radial(mode, w, rs))
        k = int(np.argmax(vals))
        best = float(vals[k])
        lo, hi = rs[max(k - 1, 0)], rs[min(k + 1, rs.size - 1)]
        if hi > lo:
            res = minimize_scalar(
                lambda t: -abs(float(lg_radial(mode, w, t))),
                bounds=(lo, hi),
                method="bounded",
                options={"xatol": 1e-12 * w},
            )
            best = max(best, -float(res.fun))
        return c * best

    n_phi = max(64, 8 * (2 * state.max_abs_ell + 1))
    rs = np.linspace(0.0, rmax, 801)
    phis = 2 * np.pi * np.arange(n_phi) / n_phi
    amp = np.abs(state.field(rs[:, None], phis[None, :]))
    order = np.argsort(amp, axis=None)[::-1][:8]
    best = float(amp.flat[order[0]])

    def neg(xy):
        x, y = xy
        return -float(np.abs(state.field(math.hypot(x, y), math.atan2(y, x))))

    for flat in order:
        i, j = np.unravel_index(flat, amp.shape)
        x0 = rs[i] * math.cos(phis[j])
        y0 = rs[i] * math.sin(phis[j])
        res = minimize(neg, [x0, y0], method="Nelder-Mead", options={"xatol": 1e-10 * w, "fatol": 1e-14})
        best = max(best, -float(res.fun))
    return best
