"""Crosstalk matrices, visibility/efficiency, and the beta trade-off scan."""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .detection import DetectionModel, Method, Sampler, grid_for
from .errors import DegenerateMatrix, NonConverged, NonMonotone, Unachievable
from .modes import ModeIndex, SpatialState, mode_states
from .quadrature import GridSpec


@dataclass(frozen=True, eq=False)
class CrosstalkMatrix:
    """``C[i, j]``: probability of detecting state ``j`` when ``i`` is sent."""

    labels: tuple[str, ...]
    C: np.ndarray
    model: DetectionModel | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        C = np.array(self.C, dtype=float)
        if C.ndim != 2 or C.shape[0] != C.shape[1]:
            raise ValueError(f"crosstalk matrix must be square, got shape {C.shape}")
        if len(self.labels) != C.shape[0]:
            raise ValueError("label count does not match matrix size")
        if not np.all(np.isfinite(C)) or C.min(initial=0.0) < 0:
            raise ValueError("crosstalk entries must be finite and nonnegative")
        C.setflags(write=False)
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "C", C)

    @property
    def dimension(self) -> int:
        return self.C.shape[0]

    def submatrix(self, subset: Sequence[int]) -> "CrosstalkMatrix":
        idx = list(subset)
        return CrosstalkMatrix(tuple(self.labels[i] for i in idx), self.C[np.ix_(idx, idx)], self.model)

    def normalized_for_display(self) -> np.ndarray:
        """Matrix scaled so its largest entry is 1 (display only)."""
        top = self.C.max()
        return self.C / top if top > 0 else self.C.copy()


def visibility(m: CrosstalkMatrix | np.ndarray) -> float:
    C = m.C if isinstance(m, CrosstalkMatrix) else np.asarray(m, dtype=float)
    total = float(C.sum())
    if total <= 0:
        raise DegenerateMatrix("crosstalk matrix sums to zero")
    return float(np.trace(C)) / total


def mean_efficiency(m: CrosstalkMatrix | np.ndarray) -> float:
    C = m.C if isinstance(m, CrosstalkMatrix) else np.asarray(m, dtype=float)
    return float(np.mean(np.diag(C)))


def _amplitudes(states, model, grid, workers: int) -> np.ndarray:
    sampler = Sampler(model, grid)
    kernels = sampler.kernels(states)
    chunks = np.array_split(np.arange(len(states)), max(1, min(workers, len(states))))

    def run(rows):
        return sampler.coupling(sampler.inputs([states[i] for i in rows]), kernels)

    if workers <= 1:
        return run(np.arange(len(states)))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        parts = list(pool.map(run, chunks))
    return np.concatenate(parts, axis=0)


def crosstalk_matrix(
    states: Sequence[SpatialState],
    model: DetectionModel,
    *,
    workers: int = 1,
    rel_tol: float | None = None,
) -> CrosstalkMatrix:
    """Detection probabilities for every (input, detector) pair.

    With ``rel_tol`` set, the matrix is recomputed on a grid refined 2x in
    both directions whose aperture is also doubled (at the same radial node
    density), and :class:`NonConverged` is raised when any entry moves by
    more than ``rel_tol``. The refined matrix is returned.
    """
    states = list(states)
    if len(set(states)) != len(states):
        raise ValueError("states must be pairwise distinct")
    if len({s.waist for s in states}) > 1:
        raise ValueError("all states must share one waist")
    grid = grid_for(states, model)
    C = np.abs(_amplitudes(states, model, grid, workers)) ** 2
    meta = {"grid": {"n_radial": grid.spec.n_radial, "n_azimuthal": grid.spec.n_azimuthal, "r_max": grid.spec.r_max}}
    if rel_tol is not None:
        sp = grid.spec
        fine_spec = GridSpec(4 * sp.n_radial, 2 * sp.n_azimuthal, 2 * sp.r_max)
        fine_model = DetectionModel(model.method, model.beta, fine_spec, model.preparation)
        fine = np.abs(_amplitudes(states, fine_model, grid_for(states, fine_model), workers)) ** 2
        worst = float(np.max(np.abs(fine - C)))
        if worst > rel_tol:
            raise NonConverged(f"crosstalk entries moved by {worst:.3e} under grid refinement")
        C = fine
        meta["refinement_change"] = worst
    return CrosstalkMatrix(tuple(s.name for s in states), C, model, meta)


def radial_states(d: int, ell: int = 0, waist: float = 1.0) -> list[SpatialState]:
    return mode_states([ModeIndex(ell, p) for p in range(d)], waist)


@dataclass(frozen=True)
class TradeoffPoint:
    dimension: int
    target_visibility: float
    beta_min: float
    mean_efficiency: float
    visibility: float


def _if_matrix(states, beta, grid):
    return crosstalk_matrix(states, DetectionModel(Method.INTENSITY_FLATTENING, beta, grid)).C


def min_beta_for_visibility(
    states: Sequence[SpatialState],
    target: float,
    beta_range: tuple[float, float] = (1.0, 32.0),
    *,
    grid: GridSpec | None = None,
    n_coarse: int = 12,
    rel_width: float = 1e-3,
) -> TradeoffPoint:
    """Smallest intensity-flattening beta whose visibility reaches ``target``.

    A coarse geometric pre-scan checks that visibility does not decrease
    with beta, then bisection narrows the bracket to ``rel_width``.
    """
    if not 0 < target < 1:
        raise ValueError("target visibility must lie in (0, 1)")
    lo, hi = map(float, beta_range)
    if not 1.0 <= lo < hi:
        raise ValueError("beta range must satisfy 1 <= lo < hi")
    states = list(states)
    d = len(states)

    def vis(beta):
        C = _if_matrix(states, beta, grid)
        return visibility(C), C

    v_lo, C_lo = vis(lo)
    if v_lo >= target:
        return TradeoffPoint(d, target, lo, mean_efficiency(C_lo), v_lo)

    betas = np.geomspace(lo, hi, n_coarse)
    vals = [v_lo] + [vis(b)[0] for b in betas[1:]]
    if any(b < a - 1e-12 for a, b in zip(vals, vals[1:])):
        raise NonMonotone(f"visibility not monotone in beta over [{lo}, {hi}]")
    if vals[-1] < target:
        raise Unachievable(f"visibility {vals[-1]:.4f} at beta={hi} is below target {target}")
    k = next(i for i, v in enumerate(vals) if v >= target)
    a, b = float(betas[k - 1]), float(betas[k])
    while (b - a) > rel_width * b:
        mid = 0.5 * (a + b)
        v_mid, _ = vis(mid)
        if v_mid >= target:
            b = mid
        else:
            a = mid
    v_b, C_b = vis(b)
    if v_b < target:
        raise NonMonotone("bisection endpoint lost the target visibility")
    return TradeoffPoint(d, target, b, mean_efficiency(C_b), v_b)


def efficiency_vs_dimension_scan(
    d_max: int,
    targets: Sequence[float],
    beta_range: tuple[float, float] = (1.0, 32.0),
    *,
    d_min: int = 2,
    waist: float = 1.0,
    grid: GridSpec | None = None,
) -> list[TradeoffPoint]:
    """Minimal-beta trade-off points for radial families ``p = 0..d-1``."""
    if d_max < 2:
        raise ValueError("d_max must be >= 2")
    targets = list(targets)
    if not targets:
        raise ValueError("need at least one target visibility")
    points = []
    for d in range(d_min, d_max + 1):
        states = radial_states(d, waist=waist)
        for t in targets:
            points.append(min_beta_for_visibility(states, t, beta_range, grid=grid))
    return points


def write_tradeoff_csv(points: Sequence[TradeoffPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["d", "target_visibility", "beta_min", "visibility", "mean_efficiency"])
        for pt in points:
            w.writerow([pt.dimension, repr(pt.target_visibility), repr(pt.beta_min), repr(pt.visibility), repr(pt.mean_efficiency)])


def write_crosstalk(m: CrosstalkMatrix, csv_path, json_path=None) -> None:
    """CSV with a label header row; optional JSON sidecar with summary stats."""
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", *m.labels])
        for lab, row in zip(m.labels, m.C):
            w.writerow([lab, *(repr(float(x)) for x in row)])
    if json_path is not None:
        side = {
            "labels": list(m.labels),
            "dimension": m.dimension,
            "model": None if m.model is None else m.model.to_dict(),
            "visibility": visibility(m),
            "mean_efficiency": mean_efficiency(m),
            **m.meta,
        }
        Path(json_path).write_text(json.dumps(side, indent=2) + "\n")


def read_crosstalk(csv_path) -> CrosstalkMatrix:
    """Read the CSV schema written by :func:`write_crosstalk`."""
    with open(csv_path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{csv_path}: empty crosstalk file")
    labels = rows[0][1:]
    body = rows[1:]
    if len(body) != len(labels):
        raise ValueError(f"{csv_path}: {len(labels)} column labels but {len(body)} rows")
    C = []
    for k, r in enumerate(body, start=2):
        if len(r) != len(labels) + 1:
            raise ValueError(f"{csv_path}:{k}: expected {len(labels) + 1} fields, got {len(r)}")
        if r[0] != labels[k - 2]:
            raise ValueError(f"{csv_path}:{k}: row label {r[0]!r} does not match column label {labels[k - 2]!r}")
        C.append([float(x) for x in r[1:]])
    return CrosstalkMatrix(tuple(labels), np.array(C))


__all__ = [
    "CrosstalkMatrix",
    "TradeoffPoint",
    "crosstalk_matrix",
    "efficiency_vs_dimension_scan",
    "mean_efficiency",
    "min_beta_for_visibility",
    "radial_states",
    "read_crosstalk",
    "visibility",
    "write_crosstalk",
    "write_tradeoff_csv",
]
