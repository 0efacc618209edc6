"""Experiment configuration, seed streams, replica sweeps and on-disk formats.

A config is a single JSON document::

    {
      "schedule": {"kind": "rational", "c": 2},
      "arms": {"A": {"kind": "iid", "theta": 0.7},
               "B": {"kind": "iid", "theta": 0.4}},
      "x0": 0.5, "horizon": 100000, "replicas": 1000, "seed": 0,
      "envelope": {"kind": "logpower", "eps": 1.0},
      "thresholds": {"hi": 0.9, "lo": 0.001},
      "output_dir": "out", "stride": null, "workers": 1,
      "verify": {"pairs": 10000, "window": 10000}
    }

Arm kinds: ``iid`` (theta), ``rotation`` (theta), ``scripted`` (path,
theta) and ``markov`` (matrix, target, optional theta which must match the
stationary mean). Unknown keys are rejected everywhere.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import bandit, bounds, payoffs, schedule
from .report import FAIL, INDETERMINATE, PASS, VERDICTS, ConditionReport

SCHEMA_VERSION = 1
OUTPUT_ENV = "ERGOBANDIT_OUTPUT_DIR"

_TOP_KEYS = {"schedule", "arms", "x0", "horizon", "replicas", "seed", "envelope",
             "thresholds", "output_dir", "stride", "workers", "verify"}
_ARM_KEYS = {"iid": {"theta"}, "rotation": {"theta"}, "scripted": {"path", "theta"},
             "markov": {"matrix", "target", "theta"}}


class ConfigError(ValueError):
    pass


def _reject_unknown(d: dict, allowed: set, where: str):
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


@dataclass
class ExperimentConfig:
    schedule: dict
    arms: dict
    x0: float
    horizon: int
    replicas: int = 1
    seed: int = 0
    envelope: dict = field(default_factory=lambda: {"kind": "logpower", "eps": 1.0})
    thresholds: dict = field(default_factory=lambda: {"hi": 0.9, "lo": 1e-3})
    output_dir: str = "out"
    stride: int | None = None
    workers: int = 1
    verify: dict = field(default_factory=lambda: {"pairs": 10_000, "window": 10_000})
    base_dir: Path = field(default=Path("."), repr=False, compare=False)

    def __post_init__(self):
        try:
            self._validate()
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def _validate(self):
        if set(self.arms) != {"A", "B"}:
            raise ConfigError("arms must define exactly A and B")
        for name, arm in self.arms.items():
            kind = arm.get("kind")
            if kind not in _ARM_KEYS:
                raise ConfigError(f"arm {name}: unknown kind {kind!r}")
            _reject_unknown(arm, _ARM_KEYS[kind] | {"kind"}, f"arm {name}")
            if kind != "markov" and "theta" not in arm:
                raise ConfigError(f"arm {name}: theta must be declared")
        _reject_unknown(self.envelope, {"kind", "eps"}, "envelope")
        _reject_unknown(self.thresholds, {"hi", "lo"}, "thresholds")
        _reject_unknown(self.verify, {"pairs", "window"}, "verify")
        self.family = schedule.family_from_dict(self.schedule)
        self.rate = payoffs.RateEnvelope(self.envelope.get("kind", "logpower"),
                                         float(self.envelope.get("eps", 1.0)))
        self.theta_A = self._theta("A")
        self.theta_B = self._theta("B")
        self.hi = float(self.thresholds.get("hi", 0.9))
        self.lo = float(self.thresholds.get("lo", 1e-3))
        if not 0.0 < self.x0 < 1.0:
            raise ConfigError("x0 must lie in (0, 1)")
        if self.horizon < 0 or self.replicas < 1:
            raise ConfigError("need horizon >= 0 and replicas >= 1")
        if not self.lo < self.x0 < self.hi:
            raise ConfigError("thresholds must satisfy lo < x0 < hi")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")

    def _theta(self, name: str) -> float:
        arm = self.arms[name]
        if arm["kind"] == "markov":
            theta = payoffs.stationary_mean(arm["matrix"], arm["target"])
            if "theta" in arm and abs(float(arm["theta"]) - theta) > 1e-9:
                raise ConfigError(
                    f"arm {name}: declared theta {arm['theta']} but stationary mean is {theta}")
            return theta
        theta = float(arm["theta"])
        if not 0.0 < theta < 1.0:
            raise ConfigError(f"arm {name}: theta must lie in (0, 1)")
        return theta

    @classmethod
    def from_dict(cls, d: dict, base_dir=".") -> "ExperimentConfig":
        _reject_unknown(d, _TOP_KEYS, "config")
        for key in ("schedule", "arms", "x0", "horizon"):
            if key not in d:
                raise ConfigError(f"config is missing {key!r}")
        kw = dict(d)
        kw["x0"] = float(kw["x0"])
        kw["horizon"] = int(kw["horizon"])
        for key in ("replicas", "seed", "workers"):
            if key in kw:
                kw[key] = int(kw[key])
        return cls(**kw, base_dir=Path(base_dir))

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(d, base_dir=path.parent)

    def to_dict(self) -> dict:
        return {"schedule": self.schedule, "arms": self.arms, "x0": self.x0,
                "horizon": self.horizon, "replicas": self.replicas, "seed": self.seed,
                "envelope": self.envelope, "thresholds": self.thresholds,
                "output_dir": self.output_dir, "stride": self.stride,
                "workers": self.workers, "verify": self.verify}

    def hash(self) -> str:
        """Digest of everything that affects results (not output_dir or workers)."""
        d = self.to_dict()
        d.pop("output_dir")
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def tables(self, N: int | None = None) -> schedule.PrefixTables:
        N = self.horizon if N is None else N
        # one extra step so tail bounds can use gamma_{N+1}
        return schedule.build_prefix(self.family, max(N, 1) + 1)

    def make_source(self, name: str, rng: np.random.Generator) -> payoffs.PayoffSource:
        arm = self.arms[name]
        kind = arm["kind"]
        if kind == "iid":
            return payoffs.IidBernoulli(float(arm["theta"]), rng)
        if kind == "rotation":
            return payoffs.Rotation(float(arm["theta"]))
        if kind == "scripted":
            return payoffs.ScriptedPayoff.from_file(self.base_dir / arm["path"],
                                                    float(arm["theta"]))
        return payoffs.MarkovIndicator(arm["matrix"], arm["target"], rng)


# -- seeds -------------------------------------------------------------------

STREAMS = ("I", "A", "B")


def derive_seed(master: int, index: int) -> np.random.SeedSequence:
    """Seed for replica ``index``: SeedSequence(entropy=master, spawn_key=(index,)).

    Distinct (master, index) pairs enter the SeedSequence hash as distinct
    inputs; this mapping is stable across processes and platforms.
    """
    if index < 0:
        raise ValueError("replica index must be nonnegative")
    return np.random.SeedSequence(entropy=int(master), spawn_key=(int(index),))


def replica_streams(master: int, index: int) -> dict[str, np.random.Generator]:
    """Independent generators for the uniforms I_n and the two arm sources."""
    root = derive_seed(master, index)
    return {
        name: np.random.Generator(np.random.PCG64(
            np.random.SeedSequence(entropy=root.entropy,
                                   spawn_key=root.spawn_key + (j,))))
        for j, name in enumerate(STREAMS)
    }


# -- single runs -------------------------------------------------------------

def simulate(cfg: ExperimentConfig, index: int = 0, tables=None, keep_full=False,
             seed: int | None = None) -> bandit.RunRecord:
    streams = replica_streams(cfg.seed if seed is None else seed, index)
    tables = cfg.tables() if tables is None else tables
    bc = bandit.BanditConfig(
        tables=tables,
        source_A=cfg.make_source("A", streams["A"]),
        source_B=cfg.make_source("B", streams["B"]),
        x0=cfg.x0, horizon=cfg.horizon, rng=streams["I"],
        theta_A=cfg.theta_A, theta_B=cfg.theta_B,
        stride=cfg.stride, keep_full=keep_full)
    return bandit.run(bc)


def run_reports(rec: bandit.RunRecord, cfg: ExperimentConfig) -> list[ConditionReport]:
    """Verifiers that need only one run: monotonicity, brake bookkeeping, E_phi."""
    d = rec.dense
    out = [bandit.check_sf_monotone(d["X"], d["S"], d["gamma"])]
    arrays = rec.full if rec.full is not None else d
    out.append(bounds.esta_and_decompsum_verify(arrays, rec.theta_B))
    if rec.horizon >= 1000:
        stats = payoffs.deviation_stats(rec.tracker, cfg.rate, rec.horizon)
        out.append(payoffs.check_e_phi(stats))
    return out


# -- sweeps ------------------------------------------------------------------

@dataclass(frozen=True)
class ReplicaResult:
    index: int
    X_final: float | None
    status: str
    verdicts: dict
    brake: dict
    error: str = ""


def run_replica(cfg: ExperimentConfig, index: int, tables=None) -> ReplicaResult:
    try:
        rec = simulate(cfg, index, tables=tables, keep_full=True)
        reports = [bandit.check_sf_monotone(rec.dense["X"], rec.dense["S"], rec.dense["gamma"]),
                   bounds.esta_and_decompsum_verify(rec.full, rec.theta_B)]
    except Exception as exc:  # counted and reported, never aborts the sweep
        return ReplicaResult(index, None, "error", {}, {}, f"{type(exc).__name__}: {exc}")
    inv = rec.invariants
    brake = {"Y_B_minus_x0_min": inv["Y_B_minus_x0_min"], "S_B_le_S": inv["S_B_le_S"],
             "decomposition_residual": inv["decomposition_residual"],
             "decompsum_residual": reports[1].witness["decompsum_residual"]}
    return ReplicaResult(index, rec.X_final, "ok",
                         {r.condition_name: r.verdict for r in reports}, brake)


@dataclass
class SweepSummary:
    finals: list
    fraction_hi: float
    fraction_lo: float
    quantiles: dict
    verdict_counts: dict
    brake: dict
    errors: list
    replicas: int
    delta_hi: float
    delta_lo: float
    config_hash: str
    wall_time: float = 0.0

    @property
    def fraction_mid(self) -> float:
        return 1.0 - self.fraction_hi - self.fraction_lo

    def to_dict(self) -> dict:
        """Deterministic content only; wall time is written separately."""
        return {"schema_version": SCHEMA_VERSION, "config_hash": self.config_hash,
                "replicas": self.replicas, "completed": len(self.finals),
                "delta_hi": self.delta_hi, "delta_lo": self.delta_lo,
                "fraction_hi": self.fraction_hi, "fraction_lo": self.fraction_lo,
                "fraction_mid": self.fraction_mid, "quantiles": self.quantiles,
                "verdict_counts": self.verdict_counts, "brake": self.brake,
                "errors": self.errors}


QUANTILE_LEVELS = (0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0)


def aggregate(results, delta_hi: float = 0.9, delta_lo: float = 1e-3,
              config_hash: str = "") -> SweepSummary:
    results = sorted(results, key=lambda r: r.index)
    ok = [r for r in results if r.status == "ok"]
    errors = [{"index": r.index, "error": r.error} for r in results if r.status != "ok"]
    if not ok:
        raise RuntimeError(f"all {len(results)} replicas failed")
    finals = np.array([r.X_final for r in ok])
    R = len(ok)
    counts: dict = {}
    for r in ok:
        for name, verdict in r.verdicts.items():
            counts.setdefault(name, {v: 0 for v in VERDICTS})[verdict] += 1
    brake = {}
    if ok[0].brake:
        brake = {
            "Y_B_minus_x0_min": min(r.brake["Y_B_minus_x0_min"] for r in ok),
            "S_B_le_S_all": all(r.brake["S_B_le_S"] for r in ok),
            "decomposition_residual_max": max(r.brake["decomposition_residual"] for r in ok),
            "decompsum_residual_max": max(r.brake["decompsum_residual"] for r in ok),
        }
    return SweepSummary(
        finals=[float(x) for x in finals],
        fraction_hi=int((finals > delta_hi).sum()) / R,
        fraction_lo=int((finals < delta_lo).sum()) / R,
        quantiles={f"{q:g}": float(np.quantile(finals, q)) for q in QUANTILE_LEVELS},
        verdict_counts={k: counts[k] for k in sorted(counts)},
        brake=brake, errors=errors, replicas=len(results),
        delta_hi=delta_hi, delta_lo=delta_lo, config_hash=config_hash)


def sweep(cfg: ExperimentConfig, workers: int | None = None) -> tuple[SweepSummary, list]:
    workers = cfg.workers if workers is None else workers
    tables = cfg.tables()
    t0 = time.perf_counter()
    indices = range(cfg.replicas)
    if workers == 1:
        results = [run_replica(cfg, i, tables) for i in indices]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda i: run_replica(cfg, i, tables), indices))
    summary = aggregate(results, cfg.hi, cfg.lo, cfg.hash())
    summary.wall_time = time.perf_counter() - t0
    return summary, sorted(results, key=lambda r: r.index)


# -- checks without (or with one) simulation ----------------------------------

def check_bundle(cfg: ExperimentConfig) -> list[ConditionReport]:
    N = cfg.horizon
    tab = cfg.tables()
    core = schedule.build_prefix(cfg.family, N) if N >= 1 else tab
    reports = [schedule.check_s1(core), schedule.check_square_summable(core),
               schedule.check_sandwich(core)]
    if N >= 16:
        reports.append(schedule.check_s2(core, cfg.theta_B))
    if N >= 100:
        reports.append(schedule.check_lemma1_caps(core, cfg.theta_B))
    if N >= 16:
        reports.append(bounds.gamma_tail_bound_verify(core, cfg.theta_B))
    if N < 1000:
        return reports

    rec = simulate(cfg, 0, tables=tab, keep_full=True)
    F = rec.full
    eta_A, eta_B = F["eta_A"][1:], F["eta_B"][1:]
    stats = payoffs.deviation_stats(rec.tracker, cfg.rate, N)
    k0 = cfg.rate.k0
    pairs = bounds.sample_pairs(k0, N // 2, int(cfg.verify.get("pairs", 10_000)), cfg.seed)
    for w in ("gamma", "gamma_over_Gamma"):
        for arm, eta, th in (("A", eta_A, cfg.theta_A), ("B", eta_B, cfg.theta_B)):
            dev = bounds.phi_dev(w, arm, eta, th, tab, N)
            reports.append(bounds.abel1_verify(dev, cfg.rate, stats, pairs))
            reports.append(bounds.abel2_cauchy_verify(dev))
    table = bounds.psi_table(eta_A, eta_B, cfg.theta_A, cfg.theta_B, tab, N)
    reports.append(bounds.psi_bound_verify(table, stats, tab))
    window = min(int(cfg.verify.get("window", 10_000)), N // 2)
    rp = bounds.r_prime(stats, tab)
    lpairs = bounds.sample_pairs(k0, window, int(cfg.verify.get("pairs", 10_000)), cfg.seed + 1)
    reports.append(bounds.lambda_increment_verify(F["Lambda"], F["X"], F["sum_gf"], rp,
                                                  lpairs, k0=k0, N=N))
    reports.extend(run_reports(rec, cfg))
    return reports


# -- file formats ------------------------------------------------------------

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    Path(path).write_bytes(buf.getvalue().encode("utf-8"))


def write_json(path: Path, obj) -> None:
    text = json.dumps(obj, sort_keys=True, indent=2, allow_nan=True) + "\n"
    Path(path).write_bytes(text.encode("utf-8"))


def trajectory_rows(rec: bandit.RunRecord):
    t = rec.trajectory
    return zip(*(t[c] for c in bandit.TRAJECTORY_COLUMNS))


def run_report_dict(rec: bandit.RunRecord, cfg: ExperimentConfig, reports) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "config_hash": cfg.hash(),
        "seed": cfg.seed,
        "horizon": rec.horizon,
        "X_final": rec.X_final,
        "decomposition": {"M": rec.decomposition.M, "Lambda": rec.decomposition.Lambda,
                          "drift": rec.decomposition.drift,
                          "sum_gf": rec.decomposition.sum_gf},
        "brake": {"S_B": rec.brake.S_B, "Y_B": rec.brake.Y_B, "T_B": rec.brake.T_B},
        "invariants": rec.invariants,
        "reports": [r.to_dict() for r in reports],
    }


def resolve_output_dir(cfg: ExperimentConfig, override: str | None = None) -> Path:
    out = override or os.environ.get(OUTPUT_ENV) or cfg.output_dir
    path = Path(out)
    if not path.is_absolute():
        path = Path.cwd() / path
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise OSError(f"output directory {path} is not writable")
    return path


def binomial_sigma(p: float, R: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / R)


__all__ = ["ExperimentConfig", "ConfigError", "derive_seed", "replica_streams", "simulate",
           "run_replica", "aggregate", "sweep", "check_bundle", "SweepSummary",
           "ReplicaResult", "write_csv", "write_json", "PASS", "FAIL", "INDETERMINATE"]
