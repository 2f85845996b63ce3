"""Experiment subcommands: each one runs a lab routine and writes its CSVs."""

import logging
import math
import time
from functools import partial
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from ..appendix.comparison import calibration_table, comparison_suite
from ..appendix.dirichlet import DirichletSpec, dirichlet_identity
from ..continuum.cloud import sample_cloud, save_cloud
from ..disorder.scaling import ScalingPlan, asymptotic_ledger
from ..lab.distances import DistanceReport
from ..lab.experiments import (
    continuum_marginal,
    joint_marginal_samples,
    marginal_convergence_experiment,
    path_marginal_experiment,
    truncation_error_curve,
    xi_truncation_slope,
)
from ..lattice.replica import replica_second_moment
from ..utils.errors import DegeneracyError
from ..utils.parallel import replica_map
from ..utils.rng import Stream, StreamKey, generator
from .io import ResultWriter
from .settings import ExperimentConfig

logger = logging.getLogger(__name__)

SAMPLE_COLUMNS = ["replica", "side", "N_or_a", "pairing", "partition"]
PARTITION_COLUMNS = [
    "experiment_id", "N", "d", "alpha", "a", "b", "beta_hat", "functional", "value", "normalization", "seed", "replica",
]
DISTANCE_COLUMNS = ["side", "N_or_a", "component", "statistic", "value", "se", "p_value", "size_a", "size_b"]
REPORT_COLUMNS = ["check", "k", "params", "lhs", "lhs_exact", "lhs_se", "rhs", "constant", "pass", "degenerate"]

DIRICHLET_RTOL = 1e-6


def _distance_rows(reports: List[DistanceReport]) -> List[Dict[str, Any]]:
    return [
        {
            "side": "discrete-vs-continuum",
            "N_or_a": r.meta.get("N"),
            "component": r.meta.get("component"),
            "statistic": r.statistic,
            "value": r.value,
            "se": r.std_error,
            "p_value": r.p_value,
            "size_a": r.size_a,
            "size_b": r.size_b,
        }
        for r in reports
    ]


def _sample_rows(samples) -> List[Dict[str, Any]]:
    return [
        {"replica": s.replica, "side": s.side, "N_or_a": s.scale, "pairing": s.pairing, "partition": s.partition}
        for s in samples
    ]


def _partition_rows(config: ExperimentConfig, samples, N: Optional[int], normalization: float) -> List[Dict[str, Any]]:
    """One row per replica in the fixed partition-results layout; value is already normalized."""
    common = {
        "N": N,
        "d": config.geometry.d,
        "alpha": config.law.alpha,
        "a": config.disorder.a,
        "b": math.inf,
        "beta_hat": config.disorder.beta_hat,
        "functional": config.path_functional().describe(),
        "normalization": normalization,
    }
    return [{**common, "value": s.partition, "replica": s.replica} for s in samples]


def _mean_se(values) -> Dict[str, float]:
    arr = np.asarray(values, dtype=float)
    return {"mean": float(arr.mean()), "se": float(arr.std(ddof=1) / math.sqrt(arr.size))}


# -- handlers ----------------------------------------------------------------------

def simulate_discrete(config: ExperimentConfig, writer: ResultWriter) -> Dict[str, Any]:
    """Joint samples of (⟨ξ^(a), ψ⟩, Z^a(f)) from the lattice polymer, one file row per replica."""
    law, key = config.tail_law(), StreamKey(config.seed)
    f = config.path_functional()
    rows, partition_rows, summary = [], [], {}
    for N in config.geometry.n_values():
        plan = ScalingPlan.build(law, N, config.geometry.d, config.disorder.beta_hat)
        samples = joint_marginal_samples(
            law, config.disorder.beta_hat, config.test_function(), f, N, config.disorder.a,
            config.replicas, key, config.geometry.d, config.geometry.L, config.workers,
        )
        partitions = [s.partition for s in samples]
        if f.is_nonnegative and not any(z > 0 for z in partitions):
            raise DegeneracyError("every sampled partition function vanished", N=N)
        rows.extend(_sample_rows(samples))
        partition_rows.extend(_partition_rows(config, samples, N, plan.normalization))
        summary[f"N={N}"] = {"partition": _mean_se(partitions), "pairing": _mean_se([s.pairing for s in samples])}
    writer.write_rows("samples", rows, SAMPLE_COLUMNS)
    writer.write_rows("partitions", partition_rows, PARTITION_COLUMNS)
    return summary


def simulate_continuum(config: ExperimentConfig, writer: ResultWriter) -> Dict[str, Any]:
    """Continuum counterparts of simulate-discrete; the replica-0 cloud is saved as well."""
    law, key = config.tail_law(), StreamKey(config.seed)
    a, L, d = config.disorder.a, config.geometry.L, config.geometry.d
    fn = partial(
        continuum_marginal, alpha=law.alpha, a=a, beta_hat=config.disorder.beta_hat,
        psi=config.test_function(), f=config.path_functional(), L=L, d=d, key=key.child(Stream.CLOUD),
    )
    samples = replica_map(fn, range(config.replicas), config.workers)
    writer.write_rows("samples", _sample_rows(samples), SAMPLE_COLUMNS)
    writer.write_rows("partitions", _partition_rows(config, samples, None, 1.0), PARTITION_COLUMNS)
    cloud = sample_cloud(law.alpha, a, L, d, key.child(Stream.CLOUD).for_replica(0))
    writer.register(save_cloud(cloud, writer.directory / "cloud_replica0.csv"))
    return {
        "partition": _mean_se([s.partition for s in samples]),
        "pairing": _mean_se([s.pairing for s in samples]),
        "cloud_size_replica0": cloud.size,
    }


def converge(config: ExperimentConfig, writer: ResultWriter) -> Dict[str, Any]:
    """Partition-function distances go to distances.csv (one row per N and statistic); pairing distances to pairing_distances.csv."""
    law = config.tail_law()
    reports = marginal_convergence_experiment(
        law, config.disorder.beta_hat, config.test_function(), config.path_functional(),
        config.geometry.n_values(), config.disorder.a, config.replicas, StreamKey(config.seed),
        d=config.geometry.d, L=config.geometry.L, workers=config.workers,
    )
    partition = [r for r in reports if r.meta["component"] == "partition"]
    pairing = [r for r in reports if r.meta["component"] == "pairing"]
    writer.write_rows("distances", _distance_rows(partition), DISTANCE_COLUMNS)
    writer.write_rows("pairing_distances", _distance_rows(pairing), DISTANCE_COLUMNS)
    return {
        f"N={r.meta['N']}/{r.meta['component']}/{r.statistic}": r.value
        for r in reports
    }


def truncation_curve(config: ExperimentConfig, writer: ResultWriter) -> Dict[str, Any]:
    curve = truncation_error_curve(
        config.tail_law(), config.disorder.beta_hat, config.geometry.d, config.geometry.n_values(),
        config.disorder.a_grid, config.replicas, StreamKey(config.seed),
        f=config.path_functional(), window=config.geometry.L, workers=config.workers,
    )
    rows = [{"kind": "point", "N": p.N, "a": p.a, "estimate": p.estimate, "se": p.std_error} for p in curve.points]
    rows += [{"kind": "sup", "N": p.N, "a": p.a, "estimate": p.estimate, "se": p.std_error} for p in curve.sup_by_a]
    writer.write_rows("truncation", rows, ["kind", "N", "a", "estimate", "se"])
    return {f"a={p.a:g}": p.estimate for p in curve.sup_by_a}


def moments(config: ExperimentConfig, writer: ResultWriter) -> Dict[str, Any]:
    """Scaling-identity ledger along N, plus the ξ truncation slope when a_grid has three or more cutoffs."""
    law, d = config.tail_law(), config.geometry.d
    n_values = config.geometry.n_values()
    ledger = asymptotic_ledger(law, d, config.disorder.beta_hat, n_values, config.disorder.a)
    writer.write_rows("moments", ledger, list(ledger[0].keys()))
    summary: Dict[str, Any] = {"ledger_last": ledger[-1]}
    if len(config.disorder.a_grid) >= 3:
        N = max(n_values)
        result = xi_truncation_slope(
            law, d, N, config.test_function(), config.disorder.a_grid, config.replicas,
            StreamKey(config.seed), config.workers,
        )
        rows = [
            {"N": N, "a": a, "variance": v, "se": s, "cap": c}
            for a, v, s, c in zip(result.a_grid, result.variances, result.variance_ses, result.caps)
        ]
        writer.write_rows("xi_variance", rows, ["N", "a", "variance", "se", "cap"])
        summary["xi_slope"] = {
            "slope": result.slope,
            "expected": 2.0 - law.alpha,
            "within_cap": result.within_cap,
            "flagged": result.flagged,
        }
    return summary


def _dirichlet_specs(count: int, key: StreamKey) -> List[DirichletSpec]:
    gen = generator(key.child(Stream.APPENDIX).for_replica(2))
    specs = []
    for _ in range(count):
        k = int(gen.integers(1, 5))
        zetas = gen.uniform(0.5, 3.0, size=k + 1).round(3).tolist()
        specs.append(DirichletSpec(k=k, zetas=zetas, t=float(round(gen.uniform(0.5, 2.0), 3))))
    return specs


def verify_appendix(config: ExperimentConfig, writer: ResultWriter) -> Dict[str, Any]:
    """Dirichlet identities, comparison inequalities and the calibration table."""
    law, key = config.tail_law(), StreamKey(config.seed)
    rows: List[Dict[str, Any]] = []
    for spec in _dirichlet_specs(config.appendix.dirichlet_trials, key):
        result = dirichlet_identity(spec)
        rows.append({
            "check": "dirichlet",
            "k": spec.k,
            "params": f"t={spec.t};zetas={';'.join(repr(z) for z in spec.zetas)}",
            "lhs": result.numeric,
            "lhs_exact": result.numeric,
            "lhs_se": result.std_error,
            "rhs": result.formula,
            "constant": 1.0,
            "pass": result.relative_error <= DIRICHLET_RTOL,
            "degenerate": False,
        })
    reports = comparison_suite(law, config.appendix.ks, config.appendix.configs_per_k, config.appendix.samples, key)
    rows.extend(r.to_row() for r in reports)
    writer.write_rows("report", rows, REPORT_COLUMNS)
    table = calibration_table([law])
    writer.write_rows("calibration", table, list(table[0].keys()))
    failed = [r for r in rows if not r["pass"]]
    for r in failed:
        logger.warning(f"appendix check failed: {r['check']} k={r['k']} {r['params']}")
    return {"checks": len(rows), "failed": len(failed), "calibration": table[0]}


def replica_moment(config: ExperimentConfig, writer: ResultWriter) -> Dict[str, Any]:
    law, key = config.tail_law(), StreamKey(config.seed)
    rows = []
    for N in config.geometry.n_values():
        plan = ScalingPlan.build(law, N, config.geometry.d, config.disorder.beta_hat)
        m = replica_second_moment(
            law, plan, config.disorder.a, config.disorder.b, None, config.replicas, key, config.workers,
        )
        rows.append({"N": N, **m._asdict()})
    writer.write_rows("replica_moment", rows, ["N", "r", "direct", "direct_se", "overlap", "overlap_se", "exact_overlap"])
    return {f"N={r['N']}": {"direct": r["direct"], "overlap": r["overlap"], "exact": r["exact_overlap"]} for r in rows}


def sample_paths(config: ExperimentConfig, writer: ResultWriter) -> Dict[str, Any]:
    reports = path_marginal_experiment(
        config.tail_law(), config.disorder.beta_hat, config.geometry.n_values(), config.geometry.d,
        config.geometry.t, config.disorder.a, config.replicas, StreamKey(config.seed),
        L=config.geometry.L, workers=config.workers,
    )
    writer.write_rows("distances", _distance_rows(reports), DISTANCE_COLUMNS)
    return {f"N={r.meta['N']}": r.value for r in reports}


COMMANDS: Dict[str, Callable[[ExperimentConfig, ResultWriter], Dict[str, Any]]] = {
    "simulate-discrete": simulate_discrete,
    "simulate-continuum": simulate_continuum,
    "converge": converge,
    "truncation-curve": truncation_curve,
    "moments": moments,
    "verify-appendix": verify_appendix,
    "replica-moment": replica_moment,
    "sample-paths": sample_paths,
}


def run(config: ExperimentConfig) -> Dict[str, Any]:
    """
    Run one configured experiment and write its CSVs and manifest.

    Returns:
        Summary dict (also stored in the manifest)

    Raises:
        PolymerLabError: Propagated from the lab routines; the CLI maps it to an exit code
    """
    handler = COMMANDS[config.experiment]
    writer = ResultWriter(config)
    logger.info(f"{config.experiment} called: seed={config.seed}, replicas={config.replicas}, output={writer.directory}")
    started = time.perf_counter()
    summary = handler(config, writer)
    wall_time = time.perf_counter() - started
    writer.write_manifest(wall_time, summary)
    logger.info(f"{config.experiment} finished in {wall_time:.2f}s")
    return {
        "experiment": config.experiment,
        "experiment_id": writer.experiment_id,
        "output": str(writer.directory),
        "files": sorted(writer.files),
        "summary": summary,
    }
