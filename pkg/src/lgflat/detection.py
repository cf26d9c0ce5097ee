"""Single-hologram projective measurement coupled into a Gaussian fibre mode.

A detector state is displayed on the hologram as a transmission mask; the
light after the mask is projected onto the backward-propagating fibre mode,
a unit-norm Gaussian of waist ``W = beta * w``. Three schemes are modeled:

* intensity flattening (``if``): amplitude-and-phase mask, enlarged ``W``;
* phase flattening (``pf``): phase-only mask, ``W = w``;
* phase flattening with amplitude masking (``pf-am``): amplitude-and-phase
  mask, ``W = w``.

How the *input* light is prepared is a separate choice. ``exact`` sends the
ideal LG superposition (what an amplitude-masked generation hologram produces).
``phase_only`` sends a Gaussian of waist ``w`` carrying only the phase of the
state, which is what a phase-only generation hologram produces.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .modes import SpatialState, extent_radius
from .quadrature import GridSpec, QuadratureGrid, build_grid, default_n_azimuthal


class Method(str, enum.Enum):
    INTENSITY_FLATTENING = "if"
    PHASE_FLATTENING = "pf"
    PHASE_FLATTENING_AM = "pf-am"


class MaskKind(str, enum.Enum):
    AMPLITUDE_AND_PHASE = "amplitude_and_phase"
    PHASE_ONLY = "phase_only"


class Preparation(str, enum.Enum):
    EXACT = "exact"
    PHASE_ONLY = "phase_only"


@dataclass(frozen=True)
class DetectionModel:
    method: Method = Method.INTENSITY_FLATTENING
    beta: float = 1.0
    grid: GridSpec | None = None
    preparation: Preparation | None = None

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if self.preparation is not None:
            object.__setattr__(self, "preparation", Preparation(self.preparation))
        beta = float(self.beta)
        if not beta > 0:
            raise ValueError("beta must be positive")
        if self.method is Method.INTENSITY_FLATTENING and beta < 1:
            raise ValueError(f"intensity flattening needs beta >= 1, got {beta}")
        if self.method is not Method.INTENSITY_FLATTENING and beta != 1.0:
            raise ValueError(f"{self.method.value} fixes beta = 1, got {beta}")
        object.__setattr__(self, "beta", beta)

    @classmethod
    def intensity_flattening(cls, beta: float, grid: GridSpec | None = None) -> "DetectionModel":
        return cls(Method.INTENSITY_FLATTENING, beta, grid)

    @classmethod
    def phase_flattening(cls, grid: GridSpec | None = None, preparation=None) -> "DetectionModel":
        return cls(Method.PHASE_FLATTENING, 1.0, grid, preparation)

    @classmethod
    def phase_flattening_am(cls, grid: GridSpec | None = None) -> "DetectionModel":
        return cls(Method.PHASE_FLATTENING_AM, 1.0, grid)

    @property
    def mask_kind(self) -> MaskKind:
        if self.method is Method.PHASE_FLATTENING:
            return MaskKind.PHASE_ONLY
        return MaskKind.AMPLITUDE_AND_PHASE

    @property
    def resolved_preparation(self) -> Preparation:
        if self.preparation is not None:
            return self.preparation
        if self.method is Method.PHASE_FLATTENING:
            return Preparation.PHASE_ONLY
        return Preparation.EXACT

    def with_beta(self, beta: float) -> "DetectionModel":
        return DetectionModel(self.method, beta, self.grid, self.preparation)

    def to_dict(self) -> dict:
        return {
            "method": self.method.value,
            "beta": self.beta,
            "preparation": self.resolved_preparation.value,
            "grid": None if self.grid is None else {
                "n_radial": self.grid.n_radial,
                "n_azimuthal": self.grid.n_azimuthal,
                "r_max": self.grid.r_max,
            },
        }


@lru_cache(maxsize=4096)
def _peak(state: SpatialState) -> float:
    return state.peak_amplitude()


def _phase_factor(psi: np.ndarray) -> np.ndarray:
    mag = np.abs(psi)
    out = np.ones_like(psi)
    nz = mag > 0
    out[nz] = psi[nz] / mag[nz]
    return out


@dataclass(frozen=True)
class MaskFunction:
    """Hologram transmission displaying the conjugate of ``target``."""

    target: SpatialState
    kind: MaskKind = MaskKind.AMPLITUDE_AND_PHASE

    def __post_init__(self):
        object.__setattr__(self, "kind", MaskKind(self.kind))

    @property
    def peak(self) -> float:
        return _peak(self.target)

    def __call__(self, r, phi):
        psi = np.asarray(self.target.field(r, phi), dtype=complex)
        if self.kind is MaskKind.PHASE_ONLY:
            return np.conj(_phase_factor(psi))
        return np.conj(psi) / self.peak


def mask_value(mask: MaskFunction, r, phi):
    out = mask(r, phi)
    return complex(out) if np.ndim(out) == 0 else out


def gaussian_mode(waist: float, r):
    """Unit-norm fundamental Gaussian (real) at the waist."""
    r = np.asarray(r, dtype=float)
    return math.sqrt(2.0 / math.pi) / waist * np.exp(-(r / waist) ** 2)


def prepared_field(state: SpatialState, preparation: Preparation):
    """Callable ``f(r, phi)`` for the light that reaches the measurement hologram."""
    preparation = Preparation(preparation)
    if preparation is Preparation.EXACT:
        return state.field

    def field(r, phi):
        return gaussian_mode(state.waist, r) * _phase_factor(np.asarray(state.field(r, phi), dtype=complex))

    return field


def _needs_breakpoints(model: DetectionModel) -> bool:
    return model.mask_kind is MaskKind.PHASE_ONLY or model.resolved_preparation is Preparation.PHASE_ONLY


def grid_for(states, model: DetectionModel) -> QuadratureGrid:
    """Common quadrature grid adequate for every state in ``states``.

    Uses ``model.grid`` when given, otherwise sizes the aperture and the
    azimuthal sampling from the highest mode order and ``|l|`` present.
    """
    states = list(states)
    if model.grid is not None:
        spec = model.grid
    else:
        w = states[0].waist
        n_max = max(s.max_order for s in states)
        ell_max = max(s.max_abs_ell for s in states)
        n_phi = default_n_azimuthal(ell_max)
        if _needs_breakpoints(model) and any(not s.is_single_mode for s in states):
            n_phi = max(n_phi, 128)
        spec = GridSpec(256, n_phi, extent_radius(n_max, w))
    breaks = ()
    if _needs_breakpoints(model):
        breaks = np.unique(np.concatenate([np.empty(0), *(s.radial_breakpoints() for s in states)]))
    return build_grid(spec, breaks)


class Sampler:
    """Input fields and detector kernels sampled once on a shared grid.

    ``coupling(i_fields, d_kernels)`` sums ``kernel * input`` over the grid
    in a fixed order, so each entry is bit-reproducible no matter how the
    work is split.
    """

    def __init__(self, model: DetectionModel, grid: QuadratureGrid):
        self.model = model
        self.grid = grid

    def inputs(self, states) -> np.ndarray:
        prep = self.model.resolved_preparation
        g = self.grid
        return np.stack([np.broadcast_to(prepared_field(s, prep)(g.rr, g.pp), g.shape) for s in states])

    def kernels(self, states) -> np.ndarray:
        """``G_W * mask * weights`` per detector state."""
        g = self.grid
        out = []
        for s in states:
            back = gaussian_mode(self.model.beta * s.waist, g.r)[:, None]
            m = MaskFunction(s, self.model.mask_kind)(g.rr, g.pp)
            out.append(back * m * g.weights)
        return np.stack(out)

    @staticmethod
    def coupling(inputs: np.ndarray, kernels: np.ndarray) -> np.ndarray:
        """Matrix ``c[i, j]`` of amplitudes for input ``i`` on detector ``j``."""
        d_in, d_det = inputs.shape[0], kernels.shape[0]
        flat_k = kernels.reshape(d_det, -1)
        c = np.empty((d_in, d_det), dtype=complex)
        for i in range(d_in):
            c[i] = np.sum(flat_k * inputs[i].reshape(1, -1), axis=1)
        return c


def _check_pair(inp: SpatialState, det: SpatialState):
    if inp.waist != det.waist:
        raise ValueError(f"input waist {inp.waist} differs from detector waist {det.waist}")


def coupling_amplitude(input: SpatialState, detector: SpatialState, model: DetectionModel) -> complex:
    """Amplitude coupled into the fibre for ``input`` measured as ``detector``."""
    _check_pair(input, detector)
    sampler = Sampler(model, grid_for([input, detector], model))
    return complex(sampler.coupling(sampler.inputs([input]), sampler.kernels([detector]))[0, 0])


def detection_probability(input: SpatialState, detector: SpatialState, model: DetectionModel) -> float:
    return abs(coupling_amplitude(input, detector, model)) ** 2
