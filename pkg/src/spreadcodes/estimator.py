"""scikit-learn style front end for the block coordinate descent designer."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .bcd import BcdConfig, SelectionStrategy, run
from .core import CodeFamily, check_family
from .correlation import acz_count, build_table, stage_one_objective


class SpreadingCodeDesigner(BaseEstimator):
    """Design ``n_codes`` ±1 codes of length ``code_length`` with low correlations.

    ``fit(X)`` starts from the chip matrix ``X`` (shape ``(code_length,
    n_codes)``) when given, otherwise from ``init``.  After fitting,
    ``codes_`` holds the optimized chips and ``history_`` the full run log.

    Parameters mirror :class:`~spreadcodes.bcd.BcdConfig`; ``time_limit`` and
    ``max_iter`` apply to each of the two stages.
    """

    def __init__(
        self,
        code_length=127,
        n_codes=66,
        block_size=4,
        max_active_columns=None,
        max_per_column=None,
        init="random",
        solver="auto",
        max_iter=10_000,
        time_limit=None,
        patience=None,
        checkpoint_every=500,
        out_dir=None,
        random_state=0,
    ):
        self.code_length = code_length
        self.n_codes = n_codes
        self.block_size = block_size
        self.max_active_columns = max_active_columns
        self.max_per_column = max_per_column
        self.init = init
        self.solver = solver
        self.max_iter = max_iter
        self.time_limit = time_limit
        self.patience = patience
        self.checkpoint_every = checkpoint_every
        self.out_dir = out_dir
        self.random_state = random_state

    def _config(self, m: int) -> BcdConfig:
        active = self.max_active_columns
        if active is None:
            active = min(self.block_size, m)
        strategy = SelectionStrategy(self.block_size, active, self.max_per_column)
        return BcdConfig(
            strategy=strategy,
            seed=int(self.random_state),
            max_iterations=self.max_iter,
            time_limit=self.time_limit,
            patience=self.patience,
            solver=self.solver,
            checkpoint_every=self.checkpoint_every,
            out_dir=self.out_dir,
        )

    def fit(self, X=None, y=None):
        if X is not None:
            init = CodeFamily(check_family(X))
            n, m = init.n, init.m
        else:
            init, n, m = self.init, self.code_length, self.n_codes
        history = run(init, self._config(m), n, m)
        self.history_ = history
        self.codes_ = np.array(history.family.chips)
        self.feasible_ = history.feasible
        objective = history.objective
        self.isl_ = objective.isl
        self.mos_ = objective.mos
        self.sidelobe_mos_ = objective.sidelobe_mos
        return self

    def _check_fitted(self):
        if not hasattr(self, "codes_"):
            raise NotFittedError("call fit before using this designer")

    def transform(self, X=None):
        """Return the designed chip matrix (the input is ignored)."""
        self._check_fitted()
        return self.codes_.copy()

    def score(self, X=None, y=None):
        """Negative mean-of-squares of ``X`` (or of the fitted codes); higher is better."""
        if X is None:
            self._check_fitted()
            X = self.codes_
        family = CodeFamily(check_family(X))
        return -build_table(family).objective().mos


def family_report(X) -> dict:
    """Summary metrics of a chip matrix: isl, mos, sidelobe mos, J and ACZ count."""
    family = CodeFamily(check_family(X))
    table = build_table(family)
    obj = table.objective()
    return {
        "n": family.n,
        "m": family.m,
        "isl": obj.isl,
        "mos": obj.mos,
        "sidelobe_mos": obj.sidelobe_mos,
        "J": stage_one_objective(table),
        "acz_count": acz_count(family),
    }
