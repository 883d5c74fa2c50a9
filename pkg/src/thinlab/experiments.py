"""Monte Carlo campaigns over the allocation engine.

A campaign is a deterministic function of its configuration: trial i runs
on seed mix_seeds(base_seed, i), trials are embarrassingly parallel, and
aggregation folds results in trial order, so output is identical for any
worker count.  Scaling studies derive one campaign seed per grid point by
the same mixing, keyed on the bin count.

The load factor rho is held as an exact rational and the ball count is
floor(rho * n) in integer arithmetic, so grid boundaries can never shift
with platform float rounding.  String inputs like "1/2" or "0.5" convert
exactly; Python floats convert through their shortest decimal repr.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Sequence

import numpy as np

from .bounds import rejection_budget, stage_params, target_maxload
from .engine import Trace, run_summary
from .errors import ConfigurationError, ResourceLimitError
from .rng import mix_seeds
from .strategies import StrategySpec, parse_strategy

WORKERS_ENV = "THINLAB_WORKERS"
MEMORY_BUDGET_BYTES = 2 * 1024**3
WILSON_Z95 = 1.959963984540054


def parse_rho(value) -> Fraction:
    """Convert a load factor to an exact Fraction.

    Strings are parsed exactly ("1/2" and "0.5" both give one half);
    floats go through their shortest decimal representation, so the
    conversion is reproducible and documented rather than binary-exact.
    """
    if isinstance(value, bool):
        raise ConfigurationError(f"load factor must be numeric, got {value!r}")
    if isinstance(value, Fraction):
        rho = value
    elif isinstance(value, int):
        rho = Fraction(value)
    elif isinstance(value, float):
        rho = Fraction(repr(value))
    elif isinstance(value, str):
        try:
            rho = Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ConfigurationError(f"unparsable load factor {value!r}") from None
    else:
        raise ConfigurationError(f"load factor must be numeric, got {value!r}")
    if rho <= 0:
        raise ConfigurationError(f"load factor must be positive, got {value!r}")
    return rho


@dataclass(frozen=True)
class ExperimentConfig:
    """One Monte Carlo campaign: bin count, ball count, strategy, trials.

    Exactly one of ``rho`` (ball count = floor(rho * n)) and ``t`` must be
    given.  ``strategy`` may be a grammar string (resolved against ``n``,
    so "threshold:auto" adapts) or a ready StrategySpec.  ``out_format``
    and ``out_path`` are carried for sink plumbing and do not affect the
    computation.
    """

    n: int
    strategy: str | StrategySpec
    trials: int
    base_seed: int
    rho: object = None
    t: int | None = None
    out_format: str | None = None
    out_path: str | None = None

    def __post_init__(self):
        if isinstance(self.n, bool) or not isinstance(self.n, int) or self.n < 1:
            raise ConfigurationError(f"bin count must be a positive integer, got {self.n!r}")
        if (self.rho is None) == (self.t is None):
            raise ConfigurationError(
                "exactly one of the load factor rho and the ball count t is required"
            )
        if self.rho is not None:
            object.__setattr__(self, "rho", parse_rho(self.rho))
        if self.t is not None and (
            isinstance(self.t, bool) or not isinstance(self.t, int) or self.t < 0
        ):
            raise ConfigurationError(
                f"ball count must be a non-negative integer, got {self.t!r}"
            )
        if isinstance(self.trials, bool) or not isinstance(self.trials, int) or self.trials < 1:
            raise ConfigurationError(f"trials must be a positive integer, got {self.trials!r}")
        if isinstance(self.base_seed, bool) or not isinstance(self.base_seed, int):
            raise ConfigurationError(f"base seed must be an integer, got {self.base_seed!r}")
        self.spec  # fail fast on an unparsable strategy

    @property
    def spec(self) -> StrategySpec:
        if isinstance(self.strategy, StrategySpec):
            return self.strategy
        return parse_strategy(self.strategy, n=self.n)

    @property
    def ball_count(self) -> int:
        if self.t is not None:
            return self.t
        return int(self.rho * self.n)  # Fraction times int floors exactly via int()

    def trial_seed(self, index: int) -> int:
        return mix_seeds(self.base_seed, index)


def type1_quantile(sorted_values: Sequence[int], p: float):
    """Lower (type-1) quantile of pre-sorted data: no interpolation."""
    if not sorted_values:
        raise ConfigurationError("quantile of empty data is undefined")
    if not 0 < p <= 1:
        raise ConfigurationError(f"quantile level must lie in (0, 1], got {p}")
    index = max(math.ceil(p * len(sorted_values)), 1)
    return sorted_values[index - 1]


@dataclass(frozen=True)
class SummaryStats:
    """Per-trial outcomes and order statistics of one campaign."""

    n: int
    t: int
    strategy_label: str
    trials: int
    base_seed: int
    per_trial_seeds: tuple[int, ...]
    per_trial_maxload: tuple[int, ...]
    per_trial_rejections: tuple[int, ...]
    mean_maxload: float
    median_maxload: int
    quantiles: dict
    normalized_ratio: float | None

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "t": self.t,
            "strategy": self.strategy_label,
            "trials": self.trials,
            "base_seed": self.base_seed,
            "mean_maxload": self.mean_maxload,
            "median_maxload": self.median_maxload,
            "quantiles": dict(self.quantiles),
            "normalized_ratio": self.normalized_ratio,
            "per_trial_maxload": list(self.per_trial_maxload),
            "per_trial_rejections": list(self.per_trial_rejections),
        }


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        env = os.environ.get(WORKERS_ENV, "").strip()
        if env:
            try:
                workers = int(env)
            except ValueError:
                raise ConfigurationError(
                    f"{WORKERS_ENV} must be an integer, got {env!r}"
                ) from None
        else:
            workers = 1
    if isinstance(workers, bool) or not isinstance(workers, int) or workers < 1:
        raise ConfigurationError(f"worker count must be a positive integer, got {workers!r}")
    return workers


def _check_memory(n: int, t: int, trials: int, workers: int) -> None:
    # Peak footprint: each worker holds a few length-n tallies and the
    # ball-count draw block; results add a few words per trial.
    per_worker = 8 * (t + 4 * n)
    needed = per_worker * workers + 64 * trials
    if needed > MEMORY_BUDGET_BYTES:
        raise ResourceLimitError(
            f"campaign needs about {needed} bytes with {workers} workers, "
            f"beyond the budget of {MEMORY_BUDGET_BYTES}"
        )


def _one_trial(args: tuple) -> tuple[int, int]:
    n, t, spec, seed = args
    loads, rejections = run_summary(n, t, spec, seed)
    return int(loads.max()) if n else 0, rejections


def run_trials(config: ExperimentConfig, workers: int | None = None) -> SummaryStats:
    """Run the campaign and summarize max loads and rejections.

    Deterministic in (config), whatever the worker count: trial i always
    runs on the same derived seed and results are folded in trial order.
    """
    workers = _resolve_workers(workers)
    spec = config.spec
    n, t, trials = config.n, config.ball_count, config.trials
    _check_memory(n, t, trials, workers)
    seeds = [config.trial_seed(i) for i in range(trials)]
    jobs = [(n, t, spec, seed) for seed in seeds]
    if workers == 1 or trials == 1:
        outcomes = [_one_trial(job) for job in jobs]
    else:
        chunk = max(1, trials // (workers * 4))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_one_trial, jobs, chunksize=chunk))
    maxloads = tuple(m for m, _ in outcomes)
    rejections = tuple(r for _, r in outcomes)
    ordered = sorted(maxloads)
    median = type1_quantile(ordered, 0.5)
    quantiles = {
        "p50": median,
        "p90": type1_quantile(ordered, 0.9),
        "p99": type1_quantile(ordered, 0.99),
        "max": ordered[-1],
    }
    ratio = median / target_maxload(n) if n >= 3 else None
    return SummaryStats(
        n=n,
        t=t,
        strategy_label=spec.label,
        trials=trials,
        base_seed=config.base_seed,
        per_trial_seeds=tuple(seeds),
        per_trial_maxload=maxloads,
        per_trial_rejections=rejections,
        mean_maxload=sum(maxloads) / trials,
        median_maxload=median,
        quantiles=quantiles,
        normalized_ratio=ratio,
    )


def wilson_interval(successes: int, trials: int, z: float = WILSON_Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 1:
        raise ConfigurationError(f"trials must be a positive integer, got {trials!r}")
    if isinstance(successes, bool) or not isinstance(successes, int) or not 0 <= successes <= trials:
        raise ConfigurationError(
            f"successes must be an integer in [0, {trials}], got {successes!r}"
        )
    p_hat = successes / trials
    z2 = z * z
    center = (p_hat + z2 / (2 * trials)) / (1 + z2 / trials)
    radius = (
        z
        * math.sqrt(p_hat * (1 - p_hat) / trials + z2 / (4 * trials * trials))
        / (1 + z2 / trials)
    )
    low = 0.0 if successes == 0 else max(0.0, center - radius)
    high = 1.0 if successes == trials else min(1.0, center + radius)
    return low, high


class TailEstimate(NamedTuple):
    """Empirical exceedance probability with a 95% Wilson interval."""

    level: int
    successes: int
    trials: int
    p_hat: float
    wilson_low: float
    wilson_high: float


def tail_estimate(
    config: ExperimentConfig, level: int, workers: int | None = None
) -> TailEstimate:
    """Estimate P(max load > level) over the campaign's trials."""
    if isinstance(level, bool) or not isinstance(level, int) or level < 0:
        raise ConfigurationError(f"level must be an integer >= 0, got {level!r}")
    if config.trials < 100:
        raise ConfigurationError(
            f"tail estimation needs at least 100 trials, got {config.trials}"
        )
    stats = run_trials(config, workers=workers)
    successes = sum(1 for m in stats.per_trial_maxload if m > level)
    low, high = wilson_interval(successes, config.trials)
    return TailEstimate(
        level=level,
        successes=successes,
        trials=config.trials,
        p_hat=successes / config.trials,
        wilson_low=low,
        wilson_high=high,
    )


class ScaleRow(NamedTuple):
    """One scaling-study grid point."""

    n: int
    target: float
    median_maxload: int
    ratio: float
    trials: int


def scaling_study(
    n_grid: Sequence[int],
    rho,
    strategy,
    trials: int,
    base_seed: int,
    workers: int | None = None,
) -> list[ScaleRow]:
    """Median max load against the size target across an ascending grid.

    Each grid point runs its own campaign on seed mix_seeds(base_seed, n).
    Strategy strings resolve per grid point, so "threshold:auto" uses the
    level appropriate to each n.
    """
    grid = list(n_grid)
    if not grid:
        raise ConfigurationError("the bin-count grid must be non-empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigurationError("the bin-count grid must be strictly ascending")
    rows = []
    for n in grid:
        config = ExperimentConfig(
            n=n,
            strategy=strategy,
            trials=trials,
            base_seed=mix_seeds(base_seed, n),
            rho=rho,
        )
        stats = run_trials(config, workers=workers)
        target = target_maxload(n)
        rows.append(
            ScaleRow(
                n=n,
                target=target,
                median_maxload=stats.median_maxload,
                ratio=stats.median_maxload / target,
                trials=trials,
            )
        )
    return rows


class StageRow(NamedTuple):
    """Stage k outcome: suggestion-rich bin count and the two event flags."""

    k: int
    rich_bins: int
    count_below_zeta: bool
    load_below_target: bool


@dataclass(frozen=True)
class StageDiagnostics:
    """Observed stage decomposition of one trace.

    Stage k (of s, each w balls) looks at the first k*w balls: rich_bins
    counts bins holding at least k primary suggestions by then;
    count_below_zeta flags rich_bins < n * zeta^k; load_below_target flags
    max load < (2 - epsilon) * ell at that point.  The final partial stage
    beyond s*w balls is deliberately not inspected.
    """

    n: int
    rho: Fraction
    epsilon: float
    ell: int
    s: int
    w: int
    zeta: float
    per_stage: tuple[StageRow, ...]

    def as_dict(self) -> dict:
        return {
            "n": self.n,
            "rho": str(self.rho),
            "epsilon": self.epsilon,
            "ell": self.ell,
            "s": self.s,
            "w": self.w,
            "zeta": self.zeta,
            "stages": [
                {
                    "k": row.k,
                    "rich_bins": row.rich_bins,
                    "count_below_zeta": row.count_below_zeta,
                    "load_below_target": row.load_below_target,
                }
                for row in self.per_stage
            ],
        }


def stage_diagnostics(trace: Trace, rho, epsilon: float) -> StageDiagnostics:
    """Evaluate the stage decomposition events on a recorded trace.

    rich_bins is computed from primary suggestions (accepted or not),
    exactly as the stage set is defined; it is NOT clipped to be monotone
    across stages, because the literal per-stage definition can admit a
    bin into stage k+1 that stage k missed.
    """
    rho = parse_rho(rho)
    params = stage_params(trace.n, rho, epsilon)
    needed = params.s * params.w
    if trace.t < needed:
        raise ConfigurationError(
            f"stage diagnostics need a trace of at least s*w = {params.s}*{params.w} "
            f"= {needed} balls, got {trace.t}"
        )
    n = trace.n
    load_target = (2 - epsilon) * params.ell
    rows = []
    for k in range(1, params.s + 1):
        upto = k * params.w
        suggested = np.bincount(trace.primary_bins[:upto], minlength=n)
        rich = int((suggested >= k).sum())
        max_load_now = int(np.bincount(trace.final_bins[:upto], minlength=n).max())
        rows.append(
            StageRow(
                k=k,
                rich_bins=rich,
                count_below_zeta=rich < n * params.zeta**k,
                load_below_target=max_load_now < load_target,
            )
        )
    return StageDiagnostics(
        n=n,
        rho=rho,
        epsilon=epsilon,
        ell=params.ell,
        s=params.s,
        w=params.w,
        zeta=params.zeta,
        per_stage=tuple(rows),
    )


class RejectionStats(NamedTuple):
    """Total rejections and their ratio to the size-derived budget."""

    total_rejections: int
    budget_ratio: float


def rejection_stats(trace: Trace) -> RejectionStats:
    """Rejections of a run against the 2n/L! budget for its bin count."""
    total = trace.final_state.rejections
    return RejectionStats(total, total / rejection_budget(trace.n))
