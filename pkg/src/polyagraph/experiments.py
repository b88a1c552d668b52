"""Monte Carlo ensembles of urn trajectories and the statistics computed on them."""

from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import urn
from .equilibria import OmegaDescriptor
from .fieldspec import FieldSpec
from .graph_model import Graph, Hypergraph

QUANTILES = (0.05, 0.25, 0.5, 0.75, 0.95)


def distance_to_omega(x, od: OmegaDescriptor) -> float:
    """Euclidean distance from ``x`` to the segment ``Omega``."""
    x = np.asarray(x, dtype=float)
    return float(np.linalg.norm(x - od.point(od.nearest_parameter(x))))


def sup_distance(x, y) -> float:
    return float(np.max(np.abs(np.asarray(x, dtype=float) - np.asarray(y, dtype=float))))


@dataclass(frozen=True)
class Target:
    """What the trials are expected to approach.

    ``kind`` is ``point`` (sup-norm distance to one point), ``equilibria``
    (sup-norm distance to the nearest of several labelled points),
    ``omega`` (Euclidean distance to the Omega segment) or ``none``.
    """

    kind: str
    points: tuple[tuple[str, tuple[float, ...]], ...] = ()
    omega: OmegaDescriptor | None = None

    @classmethod
    def point(cls, x, label: str = "target") -> "Target":
        return cls("point", ((label, tuple(float(c) for c in x)),))

    @classmethod
    def equilibria(cls, labelled: Sequence[tuple[str, Sequence[float]]]) -> "Target":
        return cls("equilibria", tuple((lab, tuple(float(c) for c in p)) for lab, p in labelled))

    @classmethod
    def omega_set(cls, od: OmegaDescriptor) -> "Target":
        return cls("omega", omega=od)

    @classmethod
    def none(cls) -> "Target":
        return cls("none")

    def distance(self, x) -> float:
        if self.kind == "omega":
            return distance_to_omega(x, self.omega)
        if self.kind in ("point", "equilibria"):
            return min(sup_distance(x, p) for _, p in self.points)
        return float("nan")

    def describe(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.points:
            out["points"] = [[lab, list(p)] for lab, p in self.points]
        if self.omega is not None:
            out["omega"] = {"part_a": [i + 1 for i in self.omega.part_a],
                            "part_b": [i + 1 for i in self.omega.part_b]}
        return out


@dataclass(frozen=True)
class ExperimentSpec:
    graph: Graph | Hypergraph
    field: FieldSpec
    n_steps: int
    n_trials: int
    master_seed: int
    target: Target = Target("none")
    initial_counts: tuple[int, ...] | None = None
    checkpoints: tuple[int, ...] | None = None
    labels: tuple[tuple[str, tuple[float, ...]], ...] | None = None
    tol: float = 0.05

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        self.field.check(self.graph)
        for _, p in self.target.points + (self.labels or ()):
            if len(p) != self.graph.m:
                raise ValueError("target dimension does not match the graph")

    @property
    def schedule(self) -> list[int]:
        if self.checkpoints is not None:
            return sorted(set(self.checkpoints))
        return urn.geometric_checkpoints(self.n_steps, first_power=8, include_zero=False)

    @property
    def label_points(self) -> tuple[tuple[str, tuple[float, ...]], ...]:
        if self.labels is not None:
            return self.labels
        return self.target.points if self.target.kind == "equilibria" else ()

    def describe(self) -> dict:
        g = self.graph
        if isinstance(g, Hypergraph):
            topo = {"m": g.m, "hyperedges": [[v + 1 for v in e] for e in g.hyperedges]}
        else:
            topo = {"m": g.m, "edges": [[i + 1, j + 1] for i, j in g.edges]}
        return {
            "graph": topo,
            "field": self.field.describe(),
            "n_steps": self.n_steps,
            "n_trials": self.n_trials,
            "master_seed": self.master_seed,
            "initial_counts": list(self.initial_counts) if self.initial_counts else None,
            "checkpoints": self.schedule,
            "target": self.target.describe(),
            "labels": [[lab, list(p)] for lab, p in self.label_points],
            "tol": self.tol,
        }

    def hash(self) -> str:
        blob = json.dumps(_clean(self.describe()), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


@dataclass
class TrialResult:
    trial: int
    checkpoints: np.ndarray
    final: np.ndarray | None = None
    distances: np.ndarray | None = None
    noise_sums: np.ndarray | None = None
    noise_tail: np.ndarray | None = None
    nearest_label: str = ""
    omega_p: np.ndarray | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def noise_tail(noise_sums: np.ndarray) -> np.ndarray:
    """``max_{k >= n} |M_k - M_n|_inf`` over the recorded checkpoints."""
    k = len(noise_sums)
    out = np.zeros(k)
    for n in range(k):
        out[n] = np.max(np.abs(noise_sums[n:] - noise_sums[n]))
    return out


def nearest_label(x, labelled) -> str:
    """Euclidean nearest; ties go to the lexicographically smaller point."""
    x = np.asarray(x, dtype=float)
    best = min(labelled, key=lambda lp: (float(np.linalg.norm(x - np.asarray(lp[1]))), tuple(lp[1])))
    return best[0]


def run_trial(spec: ExperimentSpec, trial: int) -> TrialResult:
    marks = spec.schedule
    res = TrialResult(trial, np.array(marks, dtype=np.int64))
    try:
        traj = urn.simulate(spec.graph, spec.field, spec.initial_counts, spec.n_steps,
                            urn.RngSpec(spec.master_seed, trial).generator(), checkpoints=marks)
    except (OverflowError, ValueError) as exc:
        res.error = f"{type(exc).__name__}: {exc}"
        return res
    res.final = traj.final_proportions
    res.distances = np.array([spec.target.distance(x) for x in traj.x])
    res.noise_sums = traj.noise_sums
    res.noise_tail = noise_tail(traj.noise_sums)
    if spec.label_points:
        res.nearest_label = nearest_label(res.final, spec.label_points)
    if spec.target.kind == "omega":
        res.omega_p = np.array([spec.target.omega.nearest_parameter(x) for x in traj.x])
    return res


def worker_count(requested: int | None = None) -> int:
    cap = os.environ.get("POLYAGRAPH_THREADS")
    n = requested or os.cpu_count() or 1
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, n)


@dataclass
class EnsembleSummary:
    spec_hash: str
    master_seed: int
    n_trials: int
    n_failed: int
    tol: float
    checkpoints: list[int]
    distance_quantiles: dict[str, list[float]]
    fraction_within_tol: dict[str, float]
    hit_counts: dict[str, int]
    noise_tail_median: list[float]
    omega_p_oscillation: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return _clean(self.__dict__)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


@dataclass
class EnsembleResult:
    spec: ExperimentSpec
    summary: EnsembleSummary
    trials: list[TrialResult]

    def finals(self) -> np.ndarray:
        return np.array([t.final for t in self.trials if t.ok])

    def final_distances(self) -> np.ndarray:
        return np.array([t.distances[-1] for t in self.trials if t.ok])

    def distances_at(self, step: int) -> np.ndarray:
        k = self.spec.schedule.index(step)
        return np.array([t.distances[k] for t in self.trials if t.ok])


def summarize(spec: ExperimentSpec, trials: Sequence[TrialResult]) -> EnsembleSummary:
    """Reduce trial results; independent of the order of ``trials``."""
    good = sorted((t for t in trials if t.ok), key=lambda t: t.trial)
    marks = spec.schedule
    quant: dict[str, list[float]] = {}
    frac: dict[str, float] = {}
    hits: dict[str, int] = {}
    tails: list[float] = []
    osc: dict[str, float] = {}
    if good:
        dist = np.array([t.distances for t in good])
        if spec.target.kind != "none":
            for q in QUANTILES:
                quant[f"q{int(round(q * 100)):02d}"] = list(np.quantile(dist, q, axis=0))
            if spec.target.kind == "equilibria":
                for lab, p in spec.target.points:
                    frac[lab] = float(np.mean([sup_distance(t.final, p) <= spec.tol for t in good]))
            else:
                frac[spec.target.kind] = float(np.mean(dist[:, -1] <= spec.tol))
        for lab, _ in spec.label_points:
            hits[lab] = 0
        for t in good:
            if t.nearest_label:
                hits[t.nearest_label] += 1
        tails = list(np.median(np.array([t.noise_tail for t in good]), axis=0))
        if spec.target.kind == "omega":
            half = len(marks) // 2
            spread = np.array([np.ptp(t.omega_p[half:]) for t in good])
            osc = {"median_late_p_range": float(np.median(spread)), "max_late_p_range": float(spread.max())}
    return EnsembleSummary(
        spec_hash=spec.hash(),
        master_seed=spec.master_seed,
        n_trials=spec.n_trials,
        n_failed=spec.n_trials - len(good),
        tol=spec.tol,
        checkpoints=marks,
        distance_quantiles=quant,
        fraction_within_tol=frac,
        hit_counts=hits,
        noise_tail_median=tails,
        omega_p_oscillation=osc,
    )


def run_ensemble(spec: ExperimentSpec, workers: int | None = None) -> EnsembleResult:
    """Run every trial (concurrently when ``workers > 1``) and summarize.

    Trial ``k`` draws from ``RngSpec(master_seed, k)``, so results do not
    depend on scheduling or worker count.
    """
    n = worker_count(workers)
    if n == 1:
        trials = [run_trial(spec, k) for k in range(spec.n_trials)]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            trials = list(pool.map(lambda k: run_trial(spec, k), range(spec.n_trials)))
    return EnsembleResult(spec, summarize(spec, trials), trials)


# --- reports on finished ensembles --------------------------------------------

@dataclass
class AvoidanceReport:
    eps: float
    counts: dict[str, int]
    enforced: bool          # True when every exponent is <= 1

    @property
    def failures(self) -> dict[str, int]:
        return {k: c for k, c in self.counts.items() if c > 0} if self.enforced else {}

    @property
    def ok(self) -> bool:
        return not self.failures


def unstable_avoidance_report(g, field_spec: FieldSpec, unstable, result: EnsembleResult | Sequence[TrialResult],
                              eps: float = 0.02) -> AvoidanceReport:
    """Count trials ending within ``eps`` (sup norm) of each unstable equilibrium.

    With every exponent <= 1 such limits have probability zero, so any
    nonzero count is a failure; above 1 the counts are informational only.
    """
    trials = result.trials if isinstance(result, EnsembleResult) else result
    finals = [t.final for t in trials if t.ok]
    counts = {}
    for eq in unstable:
        point = getattr(eq, "point", eq)
        label = eq.label() if hasattr(eq, "label") else str(tuple(point))
        counts[label] = int(sum(sup_distance(x, point) <= eps for x in finals))
    return AvoidanceReport(eps, counts, field_spec.max_exponent(g) <= 1.0)


@dataclass
class NoiseReport:
    checkpoints: np.ndarray
    tail: np.ndarray

    def tail_at(self, step: int) -> float:
        idx = int(np.searchsorted(self.checkpoints, step))
        if idx >= len(self.checkpoints) or self.checkpoints[idx] != step:
            raise KeyError(f"{step} is not a checkpoint")
        return float(self.tail[idx])

    def decreases(self, early: int, late: int) -> bool:
        return self.tail_at(late) < self.tail_at(early)

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.tail) <= 1e-15))


def noise_condition_check(trial: TrialResult) -> NoiseReport:
    """Tail sup of the martingale ``M_n = sum gamma_i u_i`` as a function of ``n``."""
    if not trial.ok:
        raise ValueError(f"trial {trial.trial} failed: {trial.error}")
    return NoiseReport(trial.checkpoints, trial.noise_tail)


# --- serialisation ------------------------------------------------------------

def fmt(x: float) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.17g}"


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return None if not math.isfinite(f) else float(f"{f:.17g}")
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def trial_rows(result: EnsembleResult):
    yield "trial,checkpoint,dist_target,nearest_label,noise_tail"
    for t in sorted(result.trials, key=lambda t: t.trial):
        if not t.ok:
            yield f"{t.trial},,,error,"
            continue
        for k, step in enumerate(t.checkpoints):
            yield f"{t.trial},{step},{fmt(t.distances[k])},{t.nearest_label},{fmt(t.noise_tail[k])}"


def write_ensemble(result: EnsembleResult, out_dir: str) -> None:
    os.makedirs(os.path.join(out_dir, "trajectories"), exist_ok=True)
    spec_doc = dict(result.spec.describe(), spec_hash=result.summary.spec_hash)
    with open(os.path.join(out_dir, "spec.json"), "w") as fh:
        fh.write(json.dumps(_clean(spec_doc), sort_keys=True, indent=2) + "\n")
    with open(os.path.join(out_dir, "trajectories", "trials.csv"), "w") as fh:
        fh.write(f"# master_seed={result.spec.master_seed} spec_hash={result.summary.spec_hash}\n")
        fh.write("\n".join(trial_rows(result)) + "\n")
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        fh.write(result.summary.to_json())
