"""The two-thinning allocation process engine.

Each ball draws a uniform primary bin from the primary stream.  A thinning
strategy, seeing only the tallies so far and the suggestion, accepts or
rejects; a rejected ball lands at the next unconsumed draw of the secondary
pool.  With a retry budget k above 1, each fresh pool suggestion is put to
the strategy again, and after k rejections the next pool draw is forced.

Bin indices are 1-based in every public record and serialization, matching
the usual bin-labeling convention; tally arrays are 0-indexed internally.

Two execution paths produce bit-identical traces: a reference path that
steps one ball at a time, and a vectorized path for the retry-budget-1
strategies that processes whole draw blocks.  The two-choices baseline
(outside the thinning class: it sees both candidate bins) runs on its own
sequential path, consuming one secondary draw per ball.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ConfigurationError
from .rng import RngStream, mix_seeds
from .strategies import (
    ALWAYS_ACCEPT,
    ALWAYS_REJECT,
    THRESHOLD,
    TWO_CHOICES_GREEDY,
    StrategySpec,
    decide,
    parse_strategy,
    two_choices_decide,
)

_TALLY_FIELDS = ("load", "primary_suggested", "primary_accepted", "secondary_used")


def _coerce_spec(strategy, n: int | None = None) -> StrategySpec:
    if isinstance(strategy, StrategySpec):
        return strategy
    if isinstance(strategy, str):
        return parse_strategy(strategy, n=n)
    raise ConfigurationError(
        f"strategy must be a StrategySpec or grammar string, got {strategy!r}"
    )


def _check_bin_count(n) -> int:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
        raise ConfigurationError(f"bin count must be an integer, got {n!r}")
    if n < 1:
        raise ConfigurationError(f"bin count must be at least 1, got {n}")
    return int(n)


@dataclass(eq=False)
class ProcessState:
    """Mutable tallies of one allocation process.

    ``load`` holds final per-bin loads, ``primary_suggested`` counts every
    primary suggestion (accepted or not), ``primary_accepted`` counts the
    accepted ones, ``secondary_used`` counts balls landed through the pool,
    and ``rejections`` counts individual reject decisions.
    """

    n: int
    strategy: StrategySpec
    t: int = 0
    load: np.ndarray = field(default=None)
    primary_suggested: np.ndarray = field(default=None)
    primary_accepted: np.ndarray = field(default=None)
    secondary_used: np.ndarray = field(default=None)
    rejections: int = 0

    def __post_init__(self):
        for name in _TALLY_FIELDS:
            if getattr(self, name) is None:
                setattr(self, name, np.zeros(self.n, dtype=np.int64))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ProcessState):
            return NotImplemented
        return (
            self.n == other.n
            and self.strategy == other.strategy
            and self.t == other.t
            and self.rejections == other.rejections
            and all(
                np.array_equal(getattr(self, name), getattr(other, name))
                for name in _TALLY_FIELDS
            )
        )

    def copy(self) -> "ProcessState":
        return ProcessState(
            n=self.n,
            strategy=self.strategy,
            t=self.t,
            load=self.load.copy(),
            primary_suggested=self.primary_suggested.copy(),
            primary_accepted=self.primary_accepted.copy(),
            secondary_used=self.secondary_used.copy(),
            rejections=self.rejections,
        )


@dataclass(frozen=True)
class AllocationRecord:
    """One ball's allocation outcome.  Bin numbers are 1-based."""

    ball_index: int
    primary_bin: int
    decisions: tuple[str, ...]
    final_bin: int
    secondary_pool_index: int | None


def new_process(n: int, strategy) -> ProcessState:
    """Fresh zeroed process over ``n`` bins with the given strategy."""
    n = _check_bin_count(n)
    spec = _coerce_spec(strategy, n)
    return ProcessState(n=n, strategy=spec)


def step(state: ProcessState, primary_stream, secondary_stream) -> AllocationRecord:
    """Allocate one ball, mutating ``state``; returns the ball's record.

    The streams must be positioned where the process left them: the primary
    stream at one draw per ball so far; the secondary stream at one draw per
    rejection so far (thinning kinds) or one draw per ball (two-choices,
    which observes a secondary candidate for every ball).
    """
    spec = state.strategy
    n = state.n
    primary = primary_stream.next_bounded(n)
    ball_index = state.t + 1

    if spec.kind == TWO_CHOICES_GREEDY:
        candidate = secondary_stream.next_bounded(n)
        pool_index = state.t  # two-choices consumes one pool draw per ball
        chosen = two_choices_decide(state, primary, candidate)
        state.primary_suggested[primary] += 1
        state.load[chosen] += 1
        state.t += 1
        if chosen == primary:
            state.primary_accepted[primary] += 1
            return AllocationRecord(ball_index, primary + 1, ("accept",), primary + 1, None)
        state.secondary_used[chosen] += 1
        state.rejections += 1
        return AllocationRecord(
            ball_index, primary + 1, ("reject",), chosen + 1, pool_index
        )

    accept = decide(spec, state, primary)
    state.primary_suggested[primary] += 1
    if accept:
        state.primary_accepted[primary] += 1
        state.load[primary] += 1
        state.t += 1
        return AllocationRecord(ball_index, primary + 1, ("accept",), primary + 1, None)

    rejects = 1
    state.rejections += 1
    while True:
        pool_index = state.rejections - 1  # this rejection consumes this index
        fresh = secondary_stream.next_bounded(n)
        if rejects == spec.retry_budget:
            decisions = ("reject",) * rejects  # budget exhausted: forced landing
            break
        if decide(spec, state, fresh):
            decisions = ("reject",) * rejects + ("accept",)
            break
        rejects += 1
        state.rejections += 1
    state.secondary_used[fresh] += 1
    state.load[fresh] += 1
    state.t += 1
    return AllocationRecord(ball_index, primary + 1, decisions, fresh + 1, pool_index)


@dataclass(frozen=True)
class Trace:
    """Complete, replayable record of one run.

    Stored in columnar form: per-ball primary bins, final bins, reject
    counts, and consumed pool indices (-1 where a ball landed at its
    primary).  ``records`` materializes the per-ball view on demand.
    """

    n: int
    t: int
    strategy: StrategySpec
    seed: int | None
    primary_bins: np.ndarray
    final_bins: np.ndarray
    reject_counts: np.ndarray
    pool_indices: np.ndarray
    final_state: ProcessState

    @property
    def loads(self) -> np.ndarray:
        return self.final_state.load

    def _decisions_for(self, reject_count: int) -> tuple[str, ...]:
        if reject_count == 0:
            return ("accept",)
        if self.strategy.kind == TWO_CHOICES_GREEDY:
            return ("reject",)
        if reject_count < self.strategy.retry_budget:
            return ("reject",) * reject_count + ("accept",)
        return ("reject",) * reject_count

    @property
    def records(self) -> tuple[AllocationRecord, ...]:
        out = []
        for i in range(self.t):
            pool_index = int(self.pool_indices[i])
            out.append(
                AllocationRecord(
                    ball_index=i + 1,
                    primary_bin=int(self.primary_bins[i]) + 1,
                    decisions=self._decisions_for(int(self.reject_counts[i])),
                    final_bin=int(self.final_bins[i]) + 1,
                    secondary_pool_index=None if pool_index < 0 else pool_index,
                )
            )
        return tuple(out)

    def to_json(self) -> str:
        """Serialize with stable field names; bins are 1-based."""
        records = [
            {
                "ball": record.ball_index,
                "primary": record.primary_bin,
                "decision": list(record.decisions),
                "final": record.final_bin,
                "sec_idx": record.secondary_pool_index,
            }
            for record in self.records
        ]
        payload = {
            "n": self.n,
            "t": self.t,
            "strategy": self.strategy.label,
            "seed": self.seed,
            "records": records,
            "loads": self.final_state.load.tolist(),
        }
        return json.dumps(payload)


def trace_from_json(text: str) -> Trace:
    """Rebuild a trace from its JSON form, re-deriving the final state.

    The embedded loads are checked against the replayed records, so a
    corrupted payload is rejected rather than silently trusted.
    """
    try:
        payload = json.loads(text)
        n = payload["n"]
        t = payload["t"]
        strategy = parse_strategy(payload["strategy"], n=n)
        seed = payload["seed"]
        raw_records = payload["records"]
        loads = payload["loads"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigurationError(f"malformed trace payload: {exc}") from None
    n = _check_bin_count(n)
    if not isinstance(t, int) or isinstance(t, bool) or t < 0:
        raise ConfigurationError(f"trace payload ball count is invalid: {t!r}")
    if len(raw_records) != t or len(loads) != n:
        raise ConfigurationError("trace payload lengths disagree with n, t")
    primary_bins = np.zeros(t, dtype=np.int64)
    final_bins = np.zeros(t, dtype=np.int64)
    reject_counts = np.zeros(t, dtype=np.int64)
    pool_indices = np.full(t, -1, dtype=np.int64)
    try:
        for i, row in enumerate(raw_records):
            primary_bins[i] = row["primary"] - 1
            final_bins[i] = row["final"] - 1
            reject_counts[i] = sum(1 for d in row["decision"] if d == "reject")
            pool_indices[i] = -1 if row["sec_idx"] is None else row["sec_idx"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigurationError(f"malformed trace record: {exc}") from None
    if primary_bins.size and not (
        0 <= primary_bins.min() and primary_bins.max() < n
        and 0 <= final_bins.min() and final_bins.max() < n
    ):
        raise ConfigurationError(f"trace payload bin numbers must lie in 1..{n}")
    trace = _assemble_trace(
        n, t, strategy, seed, primary_bins, final_bins, reject_counts, pool_indices
    )
    if trace.final_state.load.tolist() != list(loads):
        raise ConfigurationError("trace payload loads disagree with its records")
    return trace


def _assemble_trace(n, t, spec, seed, primary_bins, final_bins, reject_counts,
                    pool_indices) -> Trace:
    """Build the Trace and its final state from columnar ball data."""
    state = ProcessState(n=n, strategy=spec)
    landed_secondary = pool_indices >= 0
    state.primary_suggested += np.bincount(primary_bins, minlength=n)
    state.load += np.bincount(final_bins, minlength=n)
    state.secondary_used += np.bincount(final_bins[landed_secondary], minlength=n)
    state.primary_accepted += np.bincount(final_bins[~landed_secondary], minlength=n)
    state.t = int(t)
    state.rejections = int(reject_counts.sum())
    return Trace(
        n=n,
        t=int(t),
        strategy=spec,
        seed=seed,
        primary_bins=primary_bins,
        final_bins=final_bins,
        reject_counts=reject_counts,
        pool_indices=pool_indices,
        final_state=state,
    )


def _occurrence_index(values: np.ndarray) -> np.ndarray:
    """occ[i] = how many earlier entries equal values[i] (vectorized)."""
    t = len(values)
    order = np.argsort(values, kind="stable")
    sorted_values = values[order]
    positions = np.arange(t, dtype=np.int64)
    run_start = np.ones(t, dtype=bool)
    run_start[1:] = sorted_values[1:] != sorted_values[:-1]
    start_positions = np.maximum.accumulate(np.where(run_start, positions, 0))
    occurrence = np.empty(t, dtype=np.int64)
    occurrence[order] = positions - start_positions
    return occurrence


def _run_reference(n, t, spec, seed, primary_stream, secondary_stream) -> Trace:
    state = new_process(n, spec)
    primary_bins = np.zeros(t, dtype=np.int64)
    final_bins = np.zeros(t, dtype=np.int64)
    reject_counts = np.zeros(t, dtype=np.int64)
    pool_indices = np.full(t, -1, dtype=np.int64)
    for i in range(t):
        record = step(state, primary_stream, secondary_stream)
        primary_bins[i] = record.primary_bin - 1
        final_bins[i] = record.final_bin - 1
        reject_counts[i] = sum(1 for d in record.decisions if d == "reject")
        if record.secondary_pool_index is not None:
            pool_indices[i] = record.secondary_pool_index
    trace = _assemble_trace(
        n, t, spec, seed, primary_bins, final_bins, reject_counts, pool_indices
    )
    if trace.final_state != state:
        raise AssertionError("columnar state assembly diverged from stepping")
    return trace


def _run_vectorized(n, t, spec, seed, primary_stream, secondary_stream) -> Trace:
    primary_bins = primary_stream.bounded_block(n, t)
    if spec.kind == ALWAYS_ACCEPT:
        rejected = np.zeros(t, dtype=bool)
    elif spec.kind == ALWAYS_REJECT:
        rejected = np.ones(t, dtype=bool)
    elif spec.kind == THRESHOLD:
        rejected = _occurrence_index(primary_bins) >= spec.ell
    else:
        return _run_two_choices(n, t, spec, seed, primary_bins, secondary_stream)
    rejections = int(rejected.sum())
    secondary_bins = secondary_stream.bounded_block(n, rejections)
    final_bins = primary_bins.copy()
    final_bins[rejected] = secondary_bins
    pool_indices = np.full(t, -1, dtype=np.int64)
    pool_indices[rejected] = np.arange(rejections, dtype=np.int64)
    return _assemble_trace(
        n, t, spec, seed, primary_bins, final_bins,
        rejected.astype(np.int64), pool_indices,
    )


def _run_two_choices(n, t, spec, seed, primary_bins, secondary_stream) -> Trace:
    candidates = secondary_stream.bounded_block(n, t)
    load = [0] * n
    final_list = []
    primary_list = primary_bins.tolist()
    candidate_list = candidates.tolist()
    rejected = np.zeros(t, dtype=bool)
    for i in range(t):
        p = primary_list[i]
        s = candidate_list[i]
        if load[s] < load[p]:
            load[s] += 1
            final_list.append(s)
            rejected[i] = True
        else:
            load[p] += 1
            final_list.append(p)
    final_bins = np.array(final_list, dtype=np.int64)
    pool_indices = np.full(t, -1, dtype=np.int64)
    pool_indices[rejected] = np.flatnonzero(rejected)
    return _assemble_trace(
        n, t, spec, seed, primary_bins, final_bins,
        rejected.astype(np.int64), pool_indices,
    )


def run_with_streams(n, t, strategy, primary_stream, secondary_stream,
                     seed: int | None = None, method: str = "reference") -> Trace:
    """Run ``t`` balls against caller-provided streams (e.g. preset draws)."""
    n = _check_bin_count(n)
    spec = _coerce_spec(strategy, n)
    if not isinstance(t, (int, np.integer)) or isinstance(t, bool) or t < 0:
        raise ConfigurationError(f"ball count must be a non-negative integer, got {t!r}")
    t = int(t)
    if method == "auto":
        method = "reference" if spec.retry_budget > 1 else "vectorized"
    if method == "reference":
        return _run_reference(n, t, spec, seed, primary_stream, secondary_stream)
    if method == "vectorized":
        if spec.retry_budget > 1:
            raise ConfigurationError(
                "the vectorized path supports retry budget 1 only; "
                "use method='reference' for larger budgets"
            )
        return _run_vectorized(n, t, spec, seed, primary_stream, secondary_stream)
    raise ConfigurationError(
        f"unknown method {method!r}; expected 'auto', 'reference' or 'vectorized'"
    )


def run(n: int, t: int, strategy, seed: int, method: str = "auto") -> Trace:
    """Deterministic run: trace is a pure function of (n, t, strategy, seed).

    The primary and secondary streams are derived from ``seed`` by index
    mixing, so the two are independent and the derivation is documented and
    portable.  ``method`` selects the execution path; "auto" uses the
    vectorized path whenever the strategy allows it.  All paths produce
    bit-identical traces.
    """
    n = _check_bin_count(n)
    spec = _coerce_spec(strategy, n)
    primary_stream = RngStream(mix_seeds(seed, 0))
    secondary_stream = RngStream(mix_seeds(seed, 1))
    return run_with_streams(
        n, t, spec, primary_stream, secondary_stream, seed=seed, method=method
    )


def run_summary(n: int, t: int, strategy, seed: int) -> tuple[np.ndarray, int]:
    """Loads and rejection count of :func:`run`, skipping per-ball records.

    For retry-budget-1 thinning strategies the loads depend on the draw
    blocks only through tallies, so this path is pure bincount arithmetic;
    it returns exactly the final loads and rejections the full trace would.
    """
    n = _check_bin_count(n)
    spec = _coerce_spec(strategy, n)
    if not isinstance(t, (int, np.integer)) or isinstance(t, bool) or t < 0:
        raise ConfigurationError(f"ball count must be a non-negative integer, got {t!r}")
    t = int(t)
    primary_stream = RngStream(mix_seeds(seed, 0))
    secondary_stream = RngStream(mix_seeds(seed, 1))
    if spec.kind == ALWAYS_ACCEPT:
        primary_bins = primary_stream.bounded_block(n, t)
        return np.bincount(primary_bins, minlength=n).astype(np.int64), 0
    if spec.kind == ALWAYS_REJECT:
        primary_stream.bounded_block(n, t)
        secondary_bins = secondary_stream.bounded_block(n, t)
        return np.bincount(secondary_bins, minlength=n).astype(np.int64), t
    if spec.kind == THRESHOLD and spec.retry_budget == 1:
        primary_bins = primary_stream.bounded_block(n, t)
        suggested = np.bincount(primary_bins, minlength=n)
        overflow = suggested - spec.ell
        np.clip(overflow, 0, None, out=overflow)
        rejections = int(overflow.sum())
        secondary_bins = secondary_stream.bounded_block(n, rejections)
        loads = np.minimum(suggested, spec.ell)
        loads += np.bincount(secondary_bins, minlength=n)
        return loads.astype(np.int64), rejections
    trace = run_with_streams(
        n, t, spec, primary_stream, secondary_stream, seed=seed,
        method="vectorized" if spec.retry_budget == 1 else "reference",
    )
    return trace.final_state.load, trace.final_state.rejections


def replay(trace: Trace) -> ProcessState:
    """Re-apply a trace's records to a fresh state and return the result.

    The reconstruction must match ``trace.final_state`` exactly; callers
    use this as the integrity check for stored or transmitted traces.
    """
    state = new_process(trace.n, trace.strategy)
    for record in trace.records:
        primary = record.primary_bin - 1
        final = record.final_bin - 1
        state.primary_suggested[primary] += 1
        state.load[final] += 1
        if record.secondary_pool_index is None:
            if record.final_bin != record.primary_bin:
                raise ConfigurationError(
                    f"ball {record.ball_index} landed away from its primary "
                    "bin without a pool draw"
                )
            state.primary_accepted[final] += 1
        else:
            state.secondary_used[final] += 1
        state.rejections += sum(1 for d in record.decisions if d == "reject")
        state.t += 1
    return state


def max_load(state: ProcessState, subset: Iterable[int] | None = None) -> int:
    """Maximum load over a 1-based bin subset (default: every bin)."""
    if subset is None:
        if state.n == 0:
            return 0
        return int(state.load.max()) if state.t else 0
    indices = _subset_indices(state.n, subset)
    return int(state.load[indices].max())


def level_set_count(
    state: ProcessState,
    tally: str,
    level: int,
    subset: Iterable[int] | None = None,
) -> int:
    """How many bins of ``subset`` have ``tally`` at least ``level``.

    ``tally`` names one of the per-bin vectors: "load", "primary_suggested",
    "primary_accepted", or "secondary_used".
    """
    if tally not in _TALLY_FIELDS:
        known = ", ".join(_TALLY_FIELDS)
        raise ConfigurationError(f"unknown tally {tally!r}; expected one of: {known}")
    if isinstance(level, bool) or not isinstance(level, (int, np.integer)) or level < 0:
        raise ConfigurationError(f"level must be a non-negative integer, got {level!r}")
    values = getattr(state, tally)
    if subset is not None:
        values = values[_subset_indices(state.n, subset)]
    return int((values >= level).sum())


def _subset_indices(n: int, subset: Iterable[int]) -> np.ndarray:
    indices = np.asarray(sorted(set(int(b) for b in subset)), dtype=np.int64)
    if indices.size == 0:
        raise ConfigurationError("bin subset must be non-empty")
    if indices.min() < 1 or indices.max() > n:
        raise ConfigurationError(f"bin subset must lie within 1..{n}")
    return indices - 1
