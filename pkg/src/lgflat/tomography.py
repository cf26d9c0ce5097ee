"""MUB state tomography by direct inversion, simulated through a detection model."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .detection import DetectionModel, MaskFunction, MaskKind, Sampler, grid_for
from .errors import DegenerateBasis, NotPrime
from .modes import ModeIndex, SpatialState


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True, eq=False)
class MubSet:
    """``vectors[alpha, m]`` is the coefficient vector of ``|psi_m^(alpha)>`` over ``support``."""

    dimension: int
    support: tuple[ModeIndex, ...]
    vectors: np.ndarray  # (d + 1, d, d)
    waist: float = 1.0

    def state(self, alpha: int, m: int) -> SpatialState:
        return SpatialState(self.support, self.vectors[alpha, m], self.waist, label=f"mub{alpha}.{m}")

    def states(self) -> list[SpatialState]:
        return [self.state(a, m) for a in range(self.dimension + 1) for m in range(self.dimension)]

    def projectors(self) -> np.ndarray:
        """``(d+1, d, d, d)`` array of ``|psi><psi|``."""
        v = self.vectors
        return v[..., :, None] * np.conj(v[..., None, :])


def mub_bases(d: int, support: Sequence[ModeIndex] | None = None, waist: float = 1.0) -> MubSet:
    """Complete set of d+1 mutually unbiased bases for prime ``d``.

    Basis 0 is computational. For odd ``d``, basis ``alpha = 1..d`` has
    components ``omega**(alpha k^2 + m k) / sqrt(d)`` with
    ``omega = exp(2 pi i / d)``. For ``d = 2`` the Pauli X and Y eigenbases
    are used.
    """
    if not is_prime(d):
        raise NotPrime(f"{d} is not prime; only prime dimensions are supported")
    if support is None:
        support = [ModeIndex(0, p) for p in range(d)]
    support = tuple(support)
    if len(support) != d or len(set(support)) != d:
        raise ValueError(f"support must list {d} distinct modes")
    vecs = np.zeros((d + 1, d, d), dtype=complex)
    vecs[0] = np.eye(d)
    if d == 2:
        s = 1 / np.sqrt(2)
        vecs[1] = s * np.array([[1, 1], [1, -1]])
        vecs[2] = s * np.array([[1, 1j], [1, -1j]])
    else:
        k = np.arange(d)
        for alpha in range(1, d + 1):
            for m in range(d):
                # reduce the exponent mod d before exponentiating to keep phases exact
                expo = (alpha * k * k + m * k) % d
                vecs[alpha, m] = np.exp(2j * np.pi * expo / d) / np.sqrt(d)
    vecs.setflags(write=False)
    return MubSet(d, support, vecs, float(waist))


@dataclass(frozen=True, eq=False)
class TomographyRecord:
    probs: np.ndarray  # (d + 1, d)
    mubs: MubSet
    model: DetectionModel | None = None
    raw: np.ndarray | None = None


def exact_probabilities(truth: SpatialState, mubs: MubSet) -> np.ndarray:
    """``|<psi_m^(alpha)|truth>|^2`` from coefficient inner products."""
    c = _coeffs_on_support(truth, mubs)
    return np.abs(np.einsum("amk,k->am", np.conj(mubs.vectors), c)) ** 2


def _coeffs_on_support(truth: SpatialState, mubs: MubSet) -> np.ndarray:
    where = {m: i for i, m in enumerate(mubs.support)}
    c = np.zeros(mubs.dimension, dtype=complex)
    for m, a in zip(truth.modes, truth.coeffs):
        if m not in where:
            raise ValueError(f"truth state uses mode {m} outside the MUB support")
        c[where[m]] = a
    return c


def simulate_tomography(
    truth: SpatialState,
    mubs: MubSet,
    model: DetectionModel | None = None,
    compensate_mask_loss: bool = True,
) -> TomographyRecord:
    """Measure every MUB projector and renormalize each basis to unit sum.

    ``model=None`` gives ideal projectors (exact inner products). Amplitude
    masks are peak-normalized per projector, so each one transmits a
    different known fraction; with ``compensate_mask_loss`` the raw
    probabilities are divided by that fraction (``1 / peak**2``) before the
    per-basis renormalization.
    """
    d = mubs.dimension
    if model is None:
        raw = exact_probabilities(truth, mubs)
    else:
        _coeffs_on_support(truth, mubs)
        if truth.waist != mubs.waist:
            raise ValueError("truth state and MUB states must share a waist")
        detectors = mubs.states()
        sampler = Sampler(model, grid_for([truth, *detectors], model))
        c = sampler.coupling(sampler.inputs([truth]), sampler.kernels(detectors))[0]
        raw = (np.abs(c) ** 2).reshape(d + 1, d)
    counts = raw
    if model is not None and compensate_mask_loss and model.mask_kind is MaskKind.AMPLITUDE_AND_PHASE:
        peaks = np.array([MaskFunction(s).peak for s in detectors]).reshape(d + 1, d)
        counts = raw * peaks**2
    sums = counts.sum(axis=1)
    if np.any(sums <= 0):
        bad = int(np.flatnonzero(sums <= 0)[0])
        raise DegenerateBasis(f"all outcomes of basis {bad} vanished")
    return TomographyRecord(counts / sums[:, None], mubs, model, raw)


def direct_inversion(rec: TomographyRecord) -> np.ndarray:
    """``rho = sum P_m^(alpha) Pi_m^(alpha) - 1``."""
    d = rec.mubs.dimension
    rho = np.einsum("am,amij->ij", rec.probs, rec.mubs.projectors()) - np.eye(d)
    return 0.5 * (rho + rho.conj().T)


def fidelity(rho: np.ndarray, truth: SpatialState | np.ndarray, mubs: MubSet | None = None) -> float:
    """``<psi|rho|psi>`` for a pure target, reported unclipped."""
    if isinstance(truth, SpatialState):
        psi = truth.coeffs if mubs is None else _coeffs_on_support(truth, mubs)
    else:
        psi = np.asarray(truth, dtype=complex)
    return float(np.real(np.conj(psi) @ rho @ psi))


def random_state(support: Sequence[ModeIndex], rng: np.random.Generator, waist: float = 1.0) -> SpatialState:
    """Haar-random pure state over ``support``."""
    z = rng.normal(size=len(support)) + 1j * rng.normal(size=len(support))
    return SpatialState.from_coeffs(support, z, waist)


def load_state(path) -> SpatialState:
    """Read ``{"support": [tokens], "coeffs": [[re, im], ...], "waist": w}``."""
    doc = json.loads(Path(path).read_text())
    try:
        support = [ModeIndex.from_token(t) for t in doc["support"]]
        coeffs = [complex(re, im) for re, im in doc["coeffs"]]
        waist = float(doc.get("waist", 1.0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: malformed state file ({exc})") from exc
    return SpatialState.from_coeffs(support, coeffs, waist)


def dump_state(state: SpatialState, path) -> None:
    doc = {
        "support": [m.token for m in state.modes],
        "coeffs": [[float(c.real), float(c.imag)] for c in state.coeffs],
        "waist": state.waist,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def dump_density(rho: np.ndarray, support: Sequence[ModeIndex], path) -> None:
    doc = {
        "support": [m.token for m in support],
        "rho": [[[float(z.real), float(z.imag)] for z in row] for row in rho],
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")
