"""Empirical privacy audits and utility benchmarks.

Audits run an algorithm many times on two neighboring databases and look
for an outcome event whose probability ratio exceeds what the claimed
privacy bound allows. Benchmarks run seeded trials on synthetic data and
aggregate success rate, score and runtime. Both are reproducible from a
single master seed: trial ``i`` always draws from ``trial_seed(seed, i)``.
"""
from __future__ import annotations

import csv
import json
import math
import os
import time
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Optional

import numpy as np
from scipy.stats import beta as beta_dist

from . import datagen
from .domain import Database, OrderedDomain, PrivacyBudget, interior_score, log_star
from .errors import AuditSetupError, ConfigError, InteriorPointError, ParamError
from .heavy_paths import HeavyParams, heavy_paths, heavy_paths_min_size, run_heavy_paths
from .mechanisms import RandomSource, trial_seed
from .treelog import AlgoParams, MIN_EFFECTIVE_BASE, run_treelog, treelog, treelog_min_size

MIN_REPORT_TRIALS = 10_000
AUDIT_MAX_BITS = 6
ALGORITHMS = ("treelog", "heavy-paths")


# ---------------------------------------------------------------- audits

def neighbor_relation(s: Database, s_prime: Database) -> str:
    """``"insertion"`` or ``"substitution"``; raises if the databases are not neighbors."""
    if s.domain != s_prime.domain:
        raise AuditSetupError("databases live on different domains")
    a, b = Counter(s), Counter(s_prime)
    extra, missing = sum((a - b).values()), sum((b - a).values())
    if (extra, missing) in ((1, 0), (0, 1)):
        return "insertion"
    if (extra, missing) == (1, 1):
        return "substitution"
    raise AuditSetupError(f"databases differ in {extra + missing} entries; expected neighbors")


@dataclass(frozen=True)
class AuditSettings:
    """Per-call parameters the audited algorithm runs with.

    Audit domains are far too small for the public entry points' size checks,
    so the recursion is driven with explicit small parameters instead.
    """

    epsilon: float = 0.5
    delta: float = 1e-3
    trim: int = 1
    base_case_domain: int = MIN_EFFECTIVE_BASE
    lam: float = 0.05


def _treelog_target(settings: AuditSettings):
    params = AlgoParams(settings.trim, settings.epsilon, settings.delta, settings.base_case_domain)

    def run(db, rng):
        return run_treelog(db, params, rng)

    def bound(n, domain):
        return 5.0 * settings.epsilon * max(1, log_star(domain.size)) * math.log2(max(n, 2))

    return run, bound


def _heavy_target(settings: AuditSettings):
    def run(db, rng):
        hp = HeavyParams.for_domain(db.domain, settings.epsilon, settings.delta, settings.lam,
                                    settings.base_case_domain)
        return run_heavy_paths(db, hp, rng)

    def bound(n, domain):
        L = max(1, log_star(domain.size))
        return settings.epsilon * (math.sqrt(L * max(1.0, math.log2(1.0 / (settings.delta * L))))
                                   + math.log2(max(n, 2)))

    return run, bound


def _laplace_target(settings: AuditSettings):
    def run(db, rng):
        # Rounding is post-processing, so the release stays epsilon-DP.
        return int(round(len(db) + rng.laplace(1.0 / settings.epsilon)))

    return run, lambda n, domain: settings.epsilon


def _min_target(settings: AuditSettings):
    # Negative control: claims epsilon-DP but releases the exact minimum.
    return (lambda db, rng: db.min()), (lambda n, domain: settings.epsilon)


AUDIT_TARGETS: dict[str, Callable[[AuditSettings], tuple]] = {
    "treelog": _treelog_target,
    "heavy-paths": _heavy_target,
    "laplace-count": _laplace_target,
    "nonprivate-min": _min_target,
}


def _outcome(run, db, rng) -> str:
    try:
        return str(int(run(db, rng)))
    except InteriorPointError as exc:
        return f"fail:{type(exc).__name__}"


def _audit_chunk(args) -> tuple[Counter, Counter]:
    """Outcome counts for even and odd trial indices separately."""
    target, settings, elements, bits, seed, start, stop = args
    run, _ = AUDIT_TARGETS[target](settings)
    db = Database(elements, OrderedDomain(bits))
    halves: tuple[Counter, Counter] = (Counter(), Counter())
    for i in range(start, stop):
        halves[i % 2][_outcome(run, db, RandomSource(trial_seed(seed, i)))] += 1
    return halves


def _histogram(target, settings, db, seed, trials, workers) -> tuple[Counter, Counter]:
    if workers <= 1:
        return _audit_chunk((target, settings, db.to_list(), db.domain.bit_width, seed, 0, trials))
    step = math.ceil(trials / workers)
    jobs = [(target, settings, db.to_list(), db.domain.bit_width, seed, lo, min(trials, lo + step))
            for lo in range(0, trials, step)]
    even, odd = Counter(), Counter()
    with ProcessPoolExecutor(workers) as pool:
        for e, o in pool.map(_audit_chunk, jobs):
            even.update(e)
            odd.update(o)
    return even, odd


def _cp_lower(k: int, n: int, alpha: float) -> float:
    return 0.0 if k == 0 else float(beta_dist.ppf(alpha, k, n - k + 1))


def _cp_upper(k: int, n: int, alpha: float) -> float:
    return 1.0 if k == n else float(beta_dist.ppf(1 - alpha, k + 1, n - k))


def _ranked(outcomes, num, den, n_num, n_den) -> list:
    return sorted(outcomes, key=lambda o: -(num.get(o, 0) + 0.5) / n_num / ((den.get(o, 0) + 0.5) / n_den))


def estimate_epsilon(hist_a: dict, hist_b: dict, trials_a: int, trials_b: int, delta: float,
                     alpha: float = 0.05, rank_a: Optional[dict] = None,
                     rank_b: Optional[dict] = None) -> tuple[float, float]:
    """Point estimate and lower confidence bound on the privacy loss.

    Events are prefixes of the outcomes ranked by likelihood ratio, taken in
    both directions. The lower bound uses one-sided Clopper-Pearson intervals
    with a Bonferroni correction over every prefix. For that correction to be
    valid the ranking must come from independent counts (``rank_a`` and
    ``rank_b``); without them the evaluated counts rank themselves, which is
    optimistic. The point estimate adds half a count to each denominator so it
    stays finite.
    """
    if (rank_a is None) != (rank_b is None):
        raise ParamError("pass both ranking histograms or neither")
    if rank_a is None:
        rank_a, rank_b = hist_a, hist_b
    outcomes = sorted(set(hist_a) | set(hist_b) | set(rank_a) | set(rank_b))
    a_corr = alpha / max(1, 2 * len(outcomes))
    point, lower = 0.0, 0.0
    directions = ((hist_a, hist_b, trials_a, trials_b, rank_a, rank_b),
                  (hist_b, hist_a, trials_b, trials_a, rank_b, rank_a))
    for num, den, n_num, n_den, r_num, r_den in directions:
        c_num = c_den = 0
        for o in _ranked(outcomes, r_num, r_den, max(1, sum(r_num.values())), max(1, sum(r_den.values()))):
            c_num += num.get(o, 0)
            c_den += den.get(o, 0)
            p_num = c_num / n_num - delta
            if p_num > 0:
                point = max(point, math.log(p_num / ((c_den + 0.5) / (n_den + 1))))
            lo = _cp_lower(c_num, n_num, a_corr) - delta
            if lo > 0:
                lower = max(lower, math.log(lo / _cp_upper(c_den, n_den, a_corr)))
    return max(point, 0.0), lower


@dataclass
class AuditReport:
    algorithm: str
    hist_s: dict
    hist_s_prime: dict
    trials: int
    delta_target: float
    eps_hat: float
    eps_lower: float
    bound: float
    alpha: float
    relation: str
    settings: dict = field(default_factory=dict)

    @property
    def violation(self) -> bool:
        return self.eps_lower > self.bound

    @property
    def underpowered(self) -> bool:
        return self.trials < MIN_REPORT_TRIALS

    def to_json(self) -> dict:
        out = asdict(self)
        out["violation"] = self.violation
        out["underpowered"] = self.underpowered
        return out


def audit_privacy(algorithm: str, s: Database, s_prime: Database, trials: int, delta_target: float,
                  seed: int, *, settings: Optional[AuditSettings] = None, alpha: float = 0.05,
                  workers: int = 1) -> AuditReport:
    """Histogram both sides and estimate the privacy loss over all ratio-ranked events."""
    if algorithm not in AUDIT_TARGETS:
        raise ParamError(f"unknown audit target {algorithm!r}; choose from {sorted(AUDIT_TARGETS)}")
    if s.domain.bit_width > AUDIT_MAX_BITS:
        raise AuditSetupError(f"audits need b <= {AUDIT_MAX_BITS} so every outcome is estimable")
    if trials < 2:
        raise ParamError("audits need at least two trials per side")
    if s.domain == s_prime.domain and s == s_prime:
        relation = "identical"
    else:
        relation = neighbor_relation(s, s_prime)
    settings = settings or AuditSettings(delta=delta_target)
    _, bound = AUDIT_TARGETS[algorithm](settings)
    # Independent streams for the two sides.
    sel_s, ev_s = _histogram(algorithm, settings, s, trial_seed(seed, 0), trials, workers)
    sel_p, ev_p = _histogram(algorithm, settings, s_prime, trial_seed(seed, 1), trials, workers)
    hist_s, hist_p = sel_s + ev_s, sel_p + ev_p
    # Point estimate on all trials; confidence bound on the odd half, ranked by the even half.
    eps_hat, _ = estimate_epsilon(hist_s, hist_p, trials, trials, delta_target, alpha)
    _, eps_lower = estimate_epsilon(ev_s, ev_p, sum(ev_s.values()), sum(ev_p.values()), delta_target,
                                    alpha, rank_a=sel_s, rank_b=sel_p)
    return AuditReport(
        algorithm, dict(sorted(hist_s.items())), dict(sorted(hist_p.items())), trials, delta_target,
        eps_hat, eps_lower, bound(max(len(s), len(s_prime)), s.domain), alpha, relation, asdict(settings),
    )


# ------------------------------------------------------------ benchmarks

@dataclass(frozen=True)
class BenchConfig:
    algo: str = "heavy-paths"
    bits: int = 64
    epsilon: float = 1.0
    delta: float = 1e-6
    trials: int = 200
    seed: int = 0
    n: Optional[int] = None  # None means the algorithm's minimum size
    family: str = "uniform"
    lam: Optional[float] = None
    workers: int = 1

    def __post_init__(self):
        if self.algo not in ALGORITHMS:
            raise ConfigError(f"algo must be one of {ALGORITHMS}, got {self.algo!r}")
        if not 1 <= self.bits <= 128:
            raise ConfigError(f"bits must lie in [1, 128], got {self.bits}")
        if self.trials < 1:
            raise ConfigError("trials must be positive")
        if self.n is not None and self.n < 0:
            raise ConfigError("n must be nonnegative")
        if self.family not in datagen.FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        try:
            PrivacyBudget(self.epsilon, self.delta)
        except ParamError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_dict(cls, raw: dict) -> "BenchConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**raw)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, text: str) -> "BenchConfig":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(raw)

    @property
    def domain(self) -> OrderedDomain:
        return OrderedDomain(self.bits)

    @property
    def budget(self) -> PrivacyBudget:
        return PrivacyBudget(self.epsilon, self.delta)

    def min_size(self) -> int:
        if self.algo == "treelog":
            return treelog_min_size(self.domain, self.budget)
        kwargs = {} if self.lam is None else {"lam": self.lam}
        return heavy_paths_min_size(self.domain, self.budget, **kwargs)

    def resolved_n(self) -> int:
        return self.min_size() if self.n is None else self.n


@dataclass
class TrialReport:
    algo: str
    params: dict
    seed: int
    outcome: Optional[int]
    success: bool
    score: Optional[int]
    ms: float
    error: Optional[str] = None

    def to_json(self) -> dict:
        return asdict(self)


def solve(algo: str, db: Database, budget: PrivacyBudget, rng: RandomSource, lam: Optional[float] = None) -> int:
    if algo == "treelog":
        return treelog(db, budget, rng)
    if algo == "heavy-paths":
        return heavy_paths(db, budget, rng) if lam is None else heavy_paths(db, budget, rng, lam=lam)
    raise ParamError(f"unknown algorithm {algo!r}; expected one of {ALGORITHMS}")


def run_trial(config: BenchConfig, n: int, index: int, db: Optional[Database] = None) -> TrialReport:
    """One seeded trial: fresh data from the family, then one solver run."""
    data_seed = trial_seed(config.seed, 2 * index)
    solver_seed = trial_seed(config.seed, 2 * index + 1)
    if db is None:
        db = datagen.generate(config.family, n, config.domain, data_seed)
    params = {"bits": config.bits, "n": n, "epsilon": config.epsilon, "delta": config.delta,
              "family": config.family, "trial": index}
    if config.lam is not None:
        params["lam"] = config.lam
    start = time.perf_counter()
    outcome = error = score = None
    try:
        outcome = solve(config.algo, db, config.budget, RandomSource(solver_seed), config.lam)
    except InteriorPointError as exc:
        error = type(exc).__name__
    ms = (time.perf_counter() - start) * 1e3
    success = outcome is not None and len(db) > 0 and db.min() <= outcome <= db.max()
    if outcome is not None:
        score = interior_score(db, outcome)
    return TrialReport(config.algo, params, solver_seed, outcome, success, score, round(ms, 3), error)


def _trial_job(args) -> TrialReport:
    config, n, index = args
    return run_trial(config, n, index)


def run_trials(config: BenchConfig) -> list[TrialReport]:
    n = config.resolved_n()
    jobs = [(config, n, i) for i in range(config.trials)]
    if config.workers <= 1:
        return [_trial_job(j) for j in jobs]
    with ProcessPoolExecutor(config.workers) as pool:
        return list(pool.map(_trial_job, jobs, chunksize=max(1, len(jobs) // (4 * config.workers))))


def summarize(config: BenchConfig, reports: list[TrialReport]) -> dict:
    wins = [r for r in reports if r.success]
    ms = np.array([r.ms for r in reports]) if reports else np.zeros(1)
    errors = Counter(r.error for r in reports if r.error)
    return {
        "algo": config.algo,
        "params": asdict(config),
        "n": reports[0].params["n"] if reports else config.resolved_n(),
        "n_min": config.min_size(),
        "trials": len(reports),
        "successes": len(wins),
        "success_rate": len(wins) / len(reports) if reports else 0.0,
        "mean_score": float(np.mean([r.score for r in wins])) if wins else None,
        "min_score": min(r.score for r in wins) if wins else None,
        "errors": dict(sorted(errors.items())),
        "ms_p50": float(np.percentile(ms, 50)),
        "ms_p90": float(np.percentile(ms, 90)),
        "ms_p99": float(np.percentile(ms, 99)),
        "eps_hat": None,
        "bound": None,
        "violation": None,
    }


TIMING_KEYS = ("ms_p50", "ms_p90", "ms_p99")


def deterministic_view(summary: dict) -> dict:
    """Summary without wall-clock fields, for byte-stable output."""
    return {k: v for k, v in summary.items() if k not in TIMING_KEYS}


def write_results(out_dir: str, reports: list[TrialReport], summary: dict) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "trials.jsonl"), "w") as fh:
        for r in reports:
            fh.write(json.dumps(r.to_json(), sort_keys=True) + "\n")
    with open(os.path.join(out_dir, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "trials.csv"), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial", "seed", "outcome", "success", "score", "ms", "error"])
        for r in reports:
            w.writerow([r.params["trial"], r.seed, r.outcome, int(r.success), r.score, r.ms, r.error or ""])


def bench_utility(config: BenchConfig, out_dir: Optional[str] = None) -> dict:
    reports = run_trials(config)
    summary = summarize(config, reports)
    if out_dir:
        write_results(out_dir, reports, summary)
    return summary


CURVE_BITS = (16, 32, 64, 128)
CURVE_SCALES = (0.5, 1.0, 1.5, 2.0)


def bench_curve(config: BenchConfig, bits_list=CURVE_BITS, scales=CURVE_SCALES,
                out_dir: Optional[str] = None) -> list[dict]:
    """Success rate against ``n`` (as multiples of each domain's minimum size)."""
    rows = []
    for bits in bits_list:
        base = BenchConfig(**{**asdict(config), "bits": bits, "n": None})
        n_min = base.min_size()
        for scale in scales:
            n = max(1, int(round(scale * n_min)))
            # Points below the minimum are refused and show up as InsufficientData.
            cfg = BenchConfig(**{**asdict(base), "n": n})
            s = summarize(cfg, run_trials(cfg))
            rows.append({"bits": bits, "n": n, "n_min": n_min, "scale": scale,
                         "success_rate": s["success_rate"], "mean_score": s["mean_score"],
                         "errors": s["errors"]})
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "curve.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["bits", "n", "n_min", "scale", "success_rate", "mean_score"])
            for r in rows:
                w.writerow([r["bits"], r["n"], r["n_min"], r["scale"], r["success_rate"], r["mean_score"]])
        with open(os.path.join(out_dir, "curve.json"), "w") as fh:
            json.dump(rows, fh, indent=2)
            fh.write("\n")
    return rows
