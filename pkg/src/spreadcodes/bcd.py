"""Two-stage block coordinate descent over code families.

Stage one drives every code to the ACZ property by minimizing the sum of
squared shift-one autocorrelations.  Stage two then minimizes the full sum
of squared correlations while keeping ACZ.  Every step picks a random block
of chips and replaces it by the exact minimizer of the restricted objective,
so the tracked objective never increases.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import CodeFamily, IndexSet, is_acz, load_family, save_family
from .correlation import (
    CorrelationTable,
    ObjectiveValue,
    apply_assignment,
    build_table,
    stage_one_objective,
)
from .generators import gold_family, is_prime, random_family, weil_family
from .subproblem import STAGE_ONE, STAGE_TWO, build_partial, evaluate, solve

__all__ = [
    "SelectionStrategy",
    "BcdConfig",
    "IterationRecord",
    "RunHistory",
    "StepRecord",
    "select_subset",
    "bcd_step",
    "run_stage_one",
    "run_stage_two",
    "run",
    "resolve_initializer",
    "HISTORY_COLUMNS",
]

log = logging.getLogger(__name__)

HISTORY_COLUMNS = ["iter", "stage", "elapsed_s", "block_size", "active_cols", "restricted_obj", "isl", "mos", "J"]


@dataclass(frozen=True)
class SelectionStrategy:
    """How many chips to free per step and how to spread them over codes."""

    block_size: int = 1
    max_active_columns: int = 1
    max_per_column: int | None = None

    @property
    def per_column(self) -> int:
        if self.max_per_column is not None:
            return self.max_per_column
        return math.ceil(self.block_size / self.max_active_columns)

    def validate(self, n: int, m: int) -> None:
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")
        if not 1 <= self.max_active_columns <= m:
            raise ValueError(f"max_active_columns must be in [1, {m}], got {self.max_active_columns}")
        if self.per_column < 1:
            raise ValueError("max_per_column must be >= 1")
        cols = min(self.max_active_columns, self.block_size)
        if cols * min(self.per_column, n) < self.block_size:
            raise ValueError(
                f"cannot place {self.block_size} chips in {cols} columns with at most "
                f"{min(self.per_column, n)} per column"
            )


@dataclass
class BcdConfig:
    strategy: SelectionStrategy = field(default_factory=SelectionStrategy)
    seed: int = 0
    max_iterations: int | None = 10_000
    time_limit: float | None = None
    patience: int | None = None
    solver: str = "auto"
    checkpoint_every: int = 500
    out_dir: str | None = None
    threads: int = 1

    @property
    def resolved_patience(self) -> int:
        if self.patience is not None:
            return self.patience
        return max(1, 2000 // self.strategy.block_size)

    def validate(self) -> None:
        if self.max_iterations is None and self.time_limit is None:
            raise ValueError("set max_iterations or time_limit")
        if self.max_iterations is not None and self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")
        if self.time_limit is not None and self.time_limit < 0:
            raise ValueError("time_limit must be >= 0")
        if self.resolved_patience < 1:
            raise ValueError("patience must be >= 1")
        if self.solver not in ("auto", "enum", "bnb"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.checkpoint_every < 1:
            raise ValueError("checkpoint_every must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["strategy"]["max_per_column"] = self.strategy.per_column
        d["patience"] = self.resolved_patience
        return d


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    stage: int
    elapsed_s: float
    block_size: int
    active_cols: int
    restricted_obj: int | None
    isl: int
    mos: float
    J: int

    def row(self) -> list:
        return [
            self.iteration,
            self.stage,
            f"{self.elapsed_s:.6f}",
            self.block_size,
            self.active_cols,
            "" if self.restricted_obj is None else self.restricted_obj,
            self.isl,
            f"{self.mos:.6f}",
            self.J,
        ]


@dataclass
class RunHistory:
    records: list[IterationRecord] = field(default_factory=list)
    family: CodeFamily | None = None
    stage_one_iterations: int = 0
    stage_two_iterations: int = 0
    feasible: bool = False
    stop_reason: str = ""

    def stage(self, s: int) -> list[IterationRecord]:
        return [r for r in self.records if r.stage == s]

    @property
    def objective(self) -> ObjectiveValue:
        last = self.records[-1]
        return ObjectiveValue(last.isl, self.family.n, self.family.m)


@dataclass(frozen=True)
class StepRecord:
    block_size: int
    active_cols: int
    restricted_before: int
    restricted_after: int
    changed: int
    nodes: int


def select_subset(rng: np.random.Generator, n: int, m: int, strategy: SelectionStrategy) -> IndexSet:
    """Random block: distinct codes first, then distinct chips dealt round-robin."""
    strategy.validate(n, m)
    n_cols = min(strategy.max_active_columns, strategy.block_size)
    cols = rng.choice(m, size=n_cols, replace=False)
    per = min(strategy.per_column, n)
    rows = [rng.choice(n, size=per, replace=False) for _ in cols]
    entries = []
    depth = 0
    while len(entries) < strategy.block_size:
        for c, col in enumerate(cols):
            if len(entries) == strategy.block_size:
                break
            if depth < per:
                entries.append((int(col), int(rows[c][depth])))
        depth += 1
    return IndexSet(tuple(sorted(entries)))


def bcd_step(
    family: CodeFamily,
    table: CorrelationTable,
    S: IndexSet,
    mode: str = STAGE_TWO,
    solver: str = "auto",
    threads: int = 1,
) -> tuple[CodeFamily, StepRecord]:
    """Replace the chips in ``S`` by an exact minimizer; ``table`` is updated in place."""
    problem = build_partial(family, table, S, mode)
    before = evaluate(problem, problem.incumbent)
    result = solve(problem, solver, threads=threads)
    changed = int(np.count_nonzero(result.assignment != problem.incumbent))
    family, table, _ = apply_assignment(family, table, result.as_updates(problem))
    record = StepRecord(
        block_size=len(S),
        active_cols=len(S.active_columns),
        restricted_before=before,
        restricted_after=result.objective,
        changed=changed,
        nodes=result.nodes_explored,
    )
    return family, record


def _acz_target(family: CodeFamily) -> int:
    # J at feasibility: every shift-one value is 0 (even n) or ±1 (odd n)
    return family.m * family.g


class _Budget:
    def __init__(self, config: BcdConfig):
        self.max_iterations = config.max_iterations
        self.time_limit = config.time_limit
        self.start = time.perf_counter()

    def exhausted(self, iterations: int) -> str | None:
        if self.max_iterations is not None and iterations >= self.max_iterations:
            return "max_iterations"
        if self.time_limit is not None and time.perf_counter() - self.start >= self.time_limit:
            return "time_limit"
        return None


class _Recorder:
    """Collects iteration records and writes checkpoints."""

    def __init__(self, config: BcdConfig, history: RunHistory, clock_start: float):
        self.config = config
        self.history = history
        self.clock_start = clock_start
        self.iteration = 0
        self.out = Path(config.out_dir) if config.out_dir else None
        self._pending: list[IterationRecord] = []
        self._csv_started = False

    def record(self, stage, table, block_size=0, active_cols=0, restricted=None) -> IterationRecord:
        obj = table.objective()
        rec = IterationRecord(
            iteration=self.iteration,
            stage=stage,
            elapsed_s=time.perf_counter() - self.clock_start,
            block_size=block_size,
            active_cols=active_cols,
            restricted_obj=restricted,
            isl=obj.isl,
            mos=obj.mos,
            J=stage_one_objective(table),
        )
        self.history.records.append(rec)
        self._pending.append(rec)
        return rec

    def maybe_checkpoint(self, family, table) -> None:
        if self.iteration % self.config.checkpoint_every == 0:
            self.checkpoint(family, table)

    def checkpoint(self, family: CodeFamily, table: CorrelationTable) -> None:
        fresh = build_table(family)
        if fresh != table or fresh.isl != table.isl:
            raise RuntimeError(f"correlation table drifted from the family at iteration {self.iteration}")
        if self.out is None:
            self._pending.clear()
            return
        self.out.mkdir(parents=True, exist_ok=True)
        save_family(family, self.out / f"family_{self.iteration}.txt")
        with open(self.out / "history.csv", "a" if self._csv_started else "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            if not self._csv_started:
                writer.writerow(HISTORY_COLUMNS)
                self._csv_started = True
            writer.writerows(r.row() for r in self._pending)
        self._pending.clear()


def run_stage_one(
    family: CodeFamily,
    config: BcdConfig,
    rng: np.random.Generator | None = None,
    table: CorrelationTable | None = None,
    recorder: _Recorder | None = None,
) -> tuple[CodeFamily, CorrelationTable, bool, str]:
    """Minimize the shift-one objective until every code has the ACZ property.

    Returns ``(family, table, feasible, stop_reason)``.  When the budget runs
    out first, the family with the lowest objective reached is returned with
    ``feasible=False``; descent makes that the last iterate.
    """
    config.validate()
    config.strategy.validate(family.n, family.m)
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    table = table if table is not None else build_table(family)
    history = recorder.history if recorder else None
    target = _acz_target(family)
    J = stage_one_objective(table)
    if J == target:
        return family, table, True, "feasible"
    budget = _Budget(config)
    iterations = 0
    while True:
        reason = budget.exhausted(iterations)
        if reason:
            log.info("stage one stopped by %s with J=%d (target %d)", reason, J, target)
            return family, table, False, reason
        S = select_subset(rng, family.n, family.m, config.strategy)
        family, step = bcd_step(family, table, S, STAGE_ONE, config.solver, config.threads)
        iterations += 1
        new_J = stage_one_objective(table)
        if new_J > J:
            raise RuntimeError(f"stage-one objective increased from {J} to {new_J}")
        J = new_J
        if history is not None:
            history.stage_one_iterations = iterations
            recorder.iteration += 1
            recorder.record(1, table, step.block_size, step.active_cols, step.restricted_after)
            recorder.maybe_checkpoint(family, table)
        if J == target:
            return family, table, True, "feasible"


def run_stage_two(
    family: CodeFamily,
    config: BcdConfig,
    rng: np.random.Generator | None = None,
    table: CorrelationTable | None = None,
    recorder: _Recorder | None = None,
) -> tuple[CodeFamily, CorrelationTable, str]:
    """Minimize the full objective over ACZ families; stops on patience or budget."""
    config.validate()
    config.strategy.validate(family.n, family.m)
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    table = table if table is not None else build_table(family)
    if stage_one_objective(table) != _acz_target(family):
        raise ValueError("stage two needs a family in which every code has the ACZ property")
    history = recorder.history if recorder else None
    patience = config.resolved_patience
    budget = _Budget(config)
    best = table.isl
    stale = 0
    iterations = 0
    while True:
        reason = budget.exhausted(iterations)
        if reason is None and stale >= patience:
            reason = "patience"
        if reason:
            return family, table, reason
        S = select_subset(rng, family.n, family.m, config.strategy)
        family, step = bcd_step(family, table, S, STAGE_TWO, config.solver, config.threads)
        iterations += 1
        if table.isl > best:
            raise RuntimeError(f"objective increased from {best} to {table.isl}")
        stale = stale + 1 if table.isl == best else 0
        best = table.isl
        if history is not None:
            history.stage_two_iterations = iterations
            recorder.iteration += 1
            recorder.record(2, table, step.block_size, step.active_cols, step.restricted_after)
            recorder.maybe_checkpoint(family, table)


def resolve_initializer(init, n: int, m: int, seed: int = 0) -> CodeFamily:
    """Initial family from ``random``, ``gold``, ``weil``, ``file:PATH`` or a CodeFamily.

    Gold and Weil initializers take the first ``m`` codes, with ACZ codes
    ordered first so that a small enough family starts out feasible.
    """
    if isinstance(init, CodeFamily):
        family = init
    elif init == "random":
        return random_family(n, m, seed)
    elif init == "gold":
        d = (n + 1).bit_length() - 1
        if 2**d - 1 != n:
            raise ValueError(f"gold initialization needs n = 2^d - 1, got n={n}")
        family = _acz_first(gold_family(d))
    elif init == "weil":
        if not is_prime(n) or n < 5:
            raise ValueError(f"weil initialization needs a prime n >= 5, got n={n}")
        family = _acz_first(weil_family(n))
    elif isinstance(init, str) and init.startswith("file:"):
        family = load_family(init[len("file:"):])
    else:
        raise ValueError(f"unknown initializer {init!r}")
    if family.n != n:
        raise ValueError(f"initial family has n={family.n}, expected {n}")
    if family.m < m:
        raise ValueError(f"initial family has only {family.m} codes, need {m}")
    return family.subset(range(m)) if family.m > m else family


def _acz_first(family: CodeFamily) -> CodeFamily:
    good = [i for i in range(family.m) if is_acz(family.code(i))]
    rest = [i for i in range(family.m) if i not in set(good)]
    return family.subset(good + rest)


def run(
    initializer,
    config: BcdConfig,
    n: int | None = None,
    m: int | None = None,
    extra_config: dict | None = None,
) -> RunHistory:
    """Stage one (if needed) then stage two, with history and checkpoints.

    Reproducible from ``(initializer, config)``: the initial random family
    and the block selections use independent streams derived from
    ``config.seed``.
    """
    config.validate()
    if isinstance(initializer, CodeFamily):
        n, m = initializer.n, initializer.m
    if n is None or m is None:
        raise ValueError("n and m are required unless the initializer is a CodeFamily")
    init_seq, select_seq = np.random.SeedSequence(config.seed).spawn(2)
    init_seed = int(init_seq.generate_state(1, dtype=np.uint64)[0])
    family = resolve_initializer(initializer, n, m, init_seed)
    config.strategy.validate(n, m)
    rng = np.random.default_rng(select_seq)

    history = RunHistory()
    recorder = _Recorder(config, history, time.perf_counter())
    if recorder.out is not None:
        recorder.out.mkdir(parents=True, exist_ok=True)
        resolved = {"n": n, "m": m, "initializer": initializer if isinstance(initializer, str) else "family"}
        resolved.update(config.to_dict())
        if extra_config:
            resolved.update(extra_config)
        with open(recorder.out / "config.json", "w") as fh:
            json.dump(resolved, fh, indent=2, sort_keys=True)
            fh.write("\n")

    table = build_table(family)
    recorder.record(0, table)
    family, table, feasible, reason = run_stage_one(family, config, rng, table, recorder)
    history.feasible = feasible
    if feasible:
        family, table, reason = run_stage_two(family, config, rng, table, recorder)
    history.family = family
    history.stop_reason = reason
    recorder.checkpoint(family, table)
    log.info(
        "run finished (%s): stage one %d iterations, stage two %d iterations, mos %.6f",
        reason,
        history.stage_one_iterations,
        history.stage_two_iterations,
        table.objective().mos,
    )
    return history
