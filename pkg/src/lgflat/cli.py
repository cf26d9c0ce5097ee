"""Command-line front end.

Every subcommand reads an INI config (``--config``), writes its results to
``--out`` and drops a ``manifest.json`` echoing the resolved configuration.
Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence,
1 any other numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, Section
from .crosstalk import (
    crosstalk_matrix,
    efficiency_vs_dimension_scan,
    mean_efficiency,
    read_crosstalk,
    visibility,
    write_crosstalk,
    write_tradeoff_csv,
)
from .detection import DetectionModel, Method
from .errors import LGFlatError, NonConverged, NotPrime
from .modes import ModeIndex, enumerate_modes, mode_states
from .optimizer import GAParams, ga_optimize, random_subset_stats
from .quadrature import GridSpec
from .tomography import (
    direct_inversion,
    dump_density,
    dump_state,
    fidelity,
    load_state,
    mub_bases,
    random_state,
    simulate_tomography,
)

METHODS = ("if", "pf", "pf-am")
ALLOWED = {
    "run": {"rng_seed", "output_dir", "workers"},
    "grid": {"n_radial", "n_azimuthal", "r_max_factor"},
    "model": {"method", "beta", "preparation", "waist"},
    "crosstalk": {"family", "p_max", "ell", "ell_max", "p", "max_order", "modes", "rel_tol"},
    "tradeoff": {"d_min", "d_max", "targets", "beta_lo", "beta_hi"},
    "subspace": {
        "matrix", "d_min", "d_max", "n_samples", "distinct",
        "population", "generations", "mutation_rate", "elite_count",
    },
    "qst": {"state", "support", "method", "beta", "compensate_mask_loss"},
    "mub-check": {"dims"},
}


def derive_seed(seed: int, *keys: int) -> int:
    """64-bit seed for a sub-task, independent of scheduling."""
    state = np.random.SeedSequence([seed, *keys]).generate_state(2, np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


class Run:
    def __init__(self, command: str, cfg: RunConfig, args):
        self.command = command
        self.cfg = cfg
        run = cfg.section("run")
        self.seed = args.seed if args.seed is not None else run.int("rng_seed", 0, minimum=0)
        self.workers = args.workers if args.workers is not None else run.int("workers", 1, minimum=1)
        out = args.out if args.out is not None else run.str("output_dir", "out")
        self.out = Path(out)
        self.timings: dict[str, float] = {}
        self._t0 = time.perf_counter()
        self.started = time.strftime("%Y-%m-%dT%H:%M:%S%z")
        if self.workers < 1:
            raise ConfigError("--workers must be >= 1")

    def mkdir(self):
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise ConfigError(f"cannot create output directory {self.out}: {exc}") from None

    def tick(self, name: str, since: float):
        self.timings[name] = time.perf_counter() - since

    def manifest(self, extra: dict | None = None):
        doc = {
            "command": self.command,
            "version": __version__,
            "seed": self.seed,
            "workers": self.workers,
            "config_file": None if self.cfg.path is None else str(self.cfg.path),
            "config": self.cfg.resolved(),
            "started": self.started,
            "timings_s": {**self.timings, "total": time.perf_counter() - self._t0},
        }
        if extra:
            doc.update(extra)
        (self.out / "manifest.json").write_text(json.dumps(doc, indent=2, default=str) + "\n")


def _grid(cfg: RunConfig, waist: float) -> GridSpec | None:
    g = cfg.section("grid")
    if not any(g.has(k) for k in ("n_radial", "n_azimuthal", "r_max_factor")):
        return None
    n_r = g.int("n_radial", 256, minimum=16)
    n_phi = g.int("n_azimuthal", 64, minimum=8)
    if n_phi % 2:
        raise g.error("n_azimuthal", f"must be even, got {n_phi}")
    factor = g.float("r_max_factor", 8.0, positive=True)
    return GridSpec(n_r, n_phi, factor * waist)


def _model(cfg: RunConfig, section: Section | None = None) -> tuple[DetectionModel, float]:
    m = cfg.section("model")
    waist = m.float("waist", 1.0, positive=True)
    src = section if section is not None and section.has("method") else m
    method = src.choice("method", METHODS, "if")
    bsrc = section if section is not None and section.has("beta") else m
    beta = bsrc.float("beta", 8.4 if method == "if" else 1.0, positive=True)
    prep = m.choice("preparation", ("exact", "phase_only"), None)
    try:
        model = DetectionModel(Method(method), beta, _grid(cfg, waist), prep)
    except ValueError as exc:
        raise bsrc.error("beta", str(exc)) from None
    return model, waist


def _family(sec: Section, waist: float):
    family = sec.choice("family", ("radial", "azimuthal", "full", "modes"), "radial")
    if family == "radial":
        ell = sec.int("ell", 0)
        modes = [ModeIndex(ell, p) for p in range(sec.int("p_max", 7, minimum=0) + 1)]
    elif family == "azimuthal":
        lm = sec.int("ell_max", 3, minimum=0)
        p = sec.int("p", 0, minimum=0)
        modes = [ModeIndex(ell, p) for ell in range(-lm, lm + 1)]
    elif family == "full":
        modes = enumerate_modes(sec.int("max_order", 10, minimum=1))
    else:
        modes = sec.list("modes", ModeIndex.from_token, [])
        if not modes:
            raise sec.error("modes", "family=modes needs a non-empty token list")
        if len(set(modes)) != len(modes):
            raise sec.error("modes", "duplicate mode tokens")
    if len(modes) < 1:
        raise sec.error("family", "empty mode family")
    return family, mode_states(modes, waist)


def cmd_crosstalk(run: Run) -> int:
    cfg = run.cfg
    sec = cfg.section("crosstalk")
    model, waist = _model(cfg)
    _, states = _family(sec, waist)
    rel_tol = sec.float("rel_tol", None, positive=True)
    run.mkdir()
    t = time.perf_counter()
    m = crosstalk_matrix(states, model, workers=run.workers, rel_tol=rel_tol)
    run.tick("crosstalk", t)
    write_crosstalk(m, run.out / "crosstalk.csv", run.out / "crosstalk.json")
    run.manifest({"visibility": visibility(m), "mean_efficiency": mean_efficiency(m)})
    print(f"d={m.dimension} visibility={visibility(m):.6f} mean_efficiency={mean_efficiency(m):.6f}")
    return 0


def cmd_tradeoff(run: Run) -> int:
    sec = run.cfg.section("tradeoff")
    waist = run.cfg.section("model").float("waist", 1.0, positive=True)
    d_min = sec.int("d_min", 2, minimum=1)
    d_max = sec.int("d_max", 10, minimum=2)
    if d_max < d_min:
        raise sec.error("d_max", f"must be >= d_min ({d_min})")
    targets = sec.list("targets", float, [0.90, 0.95, 0.99])
    if not targets:
        raise sec.error("targets", "empty target list")
    if any(not 0 < x < 1 for x in targets):
        raise sec.error("targets", "every target must lie in (0, 1)")
    lo = sec.float("beta_lo", 1.0, positive=True)
    hi = sec.float("beta_hi", 32.0, positive=True)
    if not 1.0 <= lo < hi:
        raise sec.error("beta_hi", f"need 1 <= beta_lo < beta_hi, got [{lo}, {hi}]")
    run.mkdir()
    t = time.perf_counter()
    pts = efficiency_vs_dimension_scan(d_max, targets, (lo, hi), d_min=d_min, waist=waist, grid=_grid(run.cfg, waist))
    run.tick("scan", t)
    write_tradeoff_csv(pts, run.out / "tradeoff.csv")
    run.manifest()
    for p in pts:
        print(f"d={p.dimension} V>={p.target_visibility:.2f} beta={p.beta_min:.4f} eff={p.mean_efficiency:.5f}")
    return 0


def _subspace_job(args):
    C, d, n_samples, distinct, ga_kw, seed = args
    stats = random_subset_stats(C, d, n_samples, derive_seed(seed, d, 1), distinct)
    ga = ga_optimize(C, d, GAParams(rng_seed=derive_seed(seed, d, 2), **ga_kw))
    return stats, ga


def cmd_subspace(run: Run) -> int:
    sec = run.cfg.section("subspace")
    path = sec.str("matrix", None)
    if path is None:
        raise sec.error("matrix", "path to a crosstalk CSV is required")
    try:
        m = read_crosstalk(path)
    except (OSError, ValueError) as exc:
        raise sec.error("matrix", str(exc)) from None
    n = m.dimension
    d_min = sec.int("d_min", 2, minimum=2)
    d_max = sec.int("d_max", n, minimum=2)
    if d_max > n:
        raise sec.error("d_max", f"exceeds matrix dimension {n}")
    if d_min > d_max:
        raise sec.error("d_min", f"must be <= d_max ({d_max})")
    n_samples = sec.int("n_samples", 1000, minimum=1)
    distinct = sec.bool("distinct", False)
    ga_kw = dict(
        population=sec.int("population", 50, minimum=2),
        generations=sec.int("generations", 200, minimum=1),
        mutation_rate=sec.float("mutation_rate", 0.3, positive=True),
        elite_count=sec.int("elite_count", 2, minimum=0),
    )
    try:
        GAParams(**ga_kw)
    except ValueError as exc:
        raise sec.error("population", str(exc)) from None
    run.mkdir()
    jobs = [(m.C, d, n_samples, distinct, ga_kw, run.seed) for d in range(d_min, d_max + 1)]
    t = time.perf_counter()
    if run.workers > 1:
        with ProcessPoolExecutor(max_workers=run.workers) as pool:
            results = list(pool.map(_subspace_job, jobs))
    else:
        results = [_subspace_job(j) for j in jobs]
    run.tick("search", t)

    with open(run.out / "subspace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["d", "mean", "std", "random_max", "ga_best", "log2_d", "n_duplicates"])
        for (stats, ga) in results:
            w.writerow([stats.d, repr(stats.mean), repr(stats.std), repr(stats.max), repr(ga.rate), repr(math.log2(stats.d)), stats.n_duplicates])
    with open(run.out / "best_subsets.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["d", "subset", "qber", "rate_bits"])
        for (stats, ga) in results:
            sub = m.submatrix(ga.subset)
            qber = 1.0 - visibility(sub)
            w.writerow([stats.d, " ".join(sub.labels), repr(qber), repr(ga.rate)])
    with open(run.out / "ga_trace.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["d", "generation", "best", "mean"])
        for (stats, ga) in results:
            for g, best, mean in ga.trace:
                w.writerow([stats.d, g, repr(best), repr(mean)])
    best = {str(stats.d): [m.labels[i] for i in ga.subset] for stats, ga in results}
    (run.out / "best_subsets.json").write_text(json.dumps(best, indent=2) + "\n")
    run.manifest({"matrix": str(path), "dimension": n})
    top = max(results, key=lambda r: r[1].rate)
    print(f"best rate {top[1].rate:.4f} bits at d={top[0].d}")
    return 0


def _support(spec: str, sec: Section) -> list[ModeIndex]:
    kind, _, arg = spec.partition(":")
    try:
        if kind == "radial":
            return [ModeIndex(0, p) for p in range(int(arg))]
        if kind == "azimuthal":
            lm = int(arg)
            return [ModeIndex(ell, 0) for ell in range(-lm, lm + 1)]
        if kind == "modes":
            return [ModeIndex.from_token(t) for t in arg.split()]
    except ValueError:
        pass
    raise sec.error("support", f"expected radial:<d>, azimuthal:<l_max> or 'modes:<tokens>', got {spec!r}")


def cmd_qst(run: Run) -> int:
    sec = run.cfg.section("qst")
    waist = run.cfg.section("model").float("waist", 1.0, positive=True)
    state_path = sec.str("state", None)
    if state_path is not None:
        try:
            truth = load_state(state_path)
        except (OSError, ValueError) as exc:
            raise sec.error("state", str(exc)) from None
        support = list(truth.modes)
    else:
        support = _support(sec.str("support", "radial:5"), sec)
        truth = random_state(support, np.random.default_rng(derive_seed(run.seed, 7)), waist)
    d = len(support)
    try:
        mubs = mub_bases(d, support, truth.waist)
    except NotPrime as exc:
        raise sec.error("support" if state_path is None else "state", str(exc)) from None
    method = sec.choice("method", ("exact", *METHODS), "if")
    model = None
    if method != "exact":
        model, _ = _model(run.cfg, sec)
    compensate = sec.bool("compensate_mask_loss", True)
    run.mkdir()
    t = time.perf_counter()
    rec = simulate_tomography(truth, mubs, model, compensate)
    rho = direct_inversion(rec)
    f = fidelity(rho, truth, mubs)
    run.tick("tomography", t)

    with open(run.out / "probabilities.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["basis", "outcome", "probability", "raw"])
        for a in range(d + 1):
            for k in range(d):
                w.writerow([a, k, repr(float(rec.probs[a, k])), repr(float(rec.raw[a, k]))])
    dump_density(rho, support, run.out / "rho.json")
    with open(run.out / "rho_abs.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label", *(s.token for s in support)])
        for s, row in zip(support, np.abs(rho)):
            w.writerow([s.token, *(repr(float(x)) for x in row)])
    dump_state(truth, run.out / "truth_state.json")
    report = {
        "dimension": d,
        "method": method,
        "model": None if model is None else model.to_dict(),
        "fidelity": f,
        "trace": float(np.real(np.trace(rho))),
        "min_eigenvalue": float(np.linalg.eigvalsh(rho)[0]),
    }
    (run.out / "fidelity.json").write_text(json.dumps(report, indent=2) + "\n")
    run.manifest({"fidelity": f})
    print(f"d={d} method={method} fidelity={f:.6f}")
    return 0


def cmd_mub_check(run: Run) -> int:
    sec = run.cfg.section("mub-check")
    dims = sec.list("dims", int, [2, 3, 5, 7, 11, 13, 17, 19])
    run.mkdir()
    rows = []
    ok_all = True
    for d in dims:
        try:
            mubs = mub_bases(d)
        except NotPrime as exc:
            raise sec.error("dims", str(exc)) from None
        v = mubs.vectors.reshape(d * (d + 1), d)
        G = np.abs(np.conj(v) @ v.T) ** 2
        same = np.kron(np.eye(d + 1), np.ones((d, d))).astype(bool)
        ortho = float(np.max(np.abs(G[same] - np.eye(d * (d + 1))[same])))
        unbiased = float(np.max(np.abs(G[~same] - 1.0 / d))) if d > 1 else 0.0
        total = mubs.projectors().sum(axis=(0, 1))
        complete = float(np.max(np.abs(total - (d + 1) * np.eye(d))))
        ok = ortho <= 1e-12 and unbiased <= 1e-12 and complete <= 1e-10
        ok_all &= ok
        rows.append([d, repr(ortho), repr(unbiased), repr(complete), "pass" if ok else "FAIL"])
        print(f"d={d}: orthonormality {ortho:.2e}, unbiasedness {unbiased:.2e}, completeness {complete:.2e} -> {'pass' if ok else 'FAIL'}")
    with open(run.out / "mub_check.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["d", "orthonormality_err", "unbiasedness_err", "completeness_err", "status"])
        w.writerows(rows)
    run.manifest()
    return 0 if ok_all else 1


COMMANDS = {
    "crosstalk": cmd_crosstalk,
    "tradeoff": cmd_tradeoff,
    "subspace": cmd_subspace,
    "qst": cmd_qst,
    "mub-check": cmd_mub_check,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lgflat", description="Intensity-flattening LG mode measurement simulator")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI config file")
    common.add_argument("--seed", type=int, help="64-bit RNG seed (overrides [run] rng_seed)")
    common.add_argument("--workers", type=int, help="worker pool size")
    common.add_argument("--out", help="output directory (overrides [run] output_dir)")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(args.config) if args.config else RunConfig()
        cfg.check_unknown(ALLOWED)
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("--seed must be a 64-bit unsigned integer")
        run = Run(args.command, cfg, args)
        return COMMANDS[args.command](run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NonConverged as exc:
        print(f"non-convergence: {exc}", file=sys.stderr)
        return 3
    except LGFlatError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
