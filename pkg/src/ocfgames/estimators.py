"""Estimator-style wrappers around the solvers.

``fit`` takes a game (and optionally a starting outcome) and stores the
result in trailing-underscore attributes; ``predict`` returns per-player
payoffs and ``score`` the social welfare.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_game, check_outcome
from .baselines import solve_local, solve_nonoverlapping
from .core import GameSpec, Outcome, empty_outcome
from .solver import Improvement, SolverConfig, solve

__all__ = ["LocalBaseline", "NonOverlappingBaseline", "OCFSolver"]

_STARTS = ("idle", "local", "nonoverlapping")


class _OutcomeMixin:
    def predict(self, game: GameSpec | None = None) -> np.ndarray:
        """Per-player payoffs of the fitted outcome."""
        check_is_fitted(self, "outcome_")
        if game is not None and check_game(game).n_players != len(self.payoffs_):
            raise ValueError("game has a different number of players than the fitted one")
        return self.payoffs_.copy()

    def score(self, game: GameSpec | None = None) -> float:
        """Social welfare of the fitted outcome."""
        check_is_fitted(self, "outcome_")
        return float(self.welfare_)

    def _store(self, game: GameSpec, outcome: Outcome):
        self.outcome_ = outcome
        self.payoffs_ = np.asarray(outcome.payoffs(game.n_players), dtype=float)
        self.welfare_ = outcome.welfare()
        self.n_players_ = game.n_players


class OCFSolver(_OutcomeMixin, BaseEstimator):
    """Iterates profitable bounded deviations until the outcome is stable.

    Parameters
    ----------
    max_iterations : int
        Cap on accepted deviations.
    improvement : {"first", "best"}
        Take the first profitable deviation found, or the one with the
        largest gain.
    deterministic_order : bool
        Scan deviator sets in lexicographic order; otherwise shuffle with
        ``random_state``.
    start : {"idle", "local", "nonoverlapping"}
        Starting outcome when ``fit`` is not given one.
    random_state : int or None
    """

    def __init__(
        self,
        max_iterations: int = 100_000,
        improvement: str = "first",
        deterministic_order: bool = True,
        start: str = "idle",
        random_state: int | None = None,
    ):
        self.max_iterations = max_iterations
        self.improvement = improvement
        self.deterministic_order = deterministic_order
        self.start = start
        self.random_state = random_state

    def _config(self) -> SolverConfig:
        return SolverConfig(
            max_iterations=self.max_iterations,
            improvement=Improvement(self.improvement),
            deterministic_order=self.deterministic_order,
            random_state=self.random_state,
        )

    def fit(self, game: GameSpec, initial: Outcome | None = None):
        game = check_game(game)
        if self.start not in _STARTS:
            raise ValueError(f"start must be one of {_STARTS}, got {self.start!r}")
        if initial is None:
            if self.start == "local":
                initial = solve_local(game)
            elif self.start == "nonoverlapping":
                initial = solve_nonoverlapping(game).outcome
            else:
                initial = empty_outcome()
        else:
            check_outcome(game, initial)
        outcome, report = solve(game, initial, self._config())
        self._store(game, outcome)
        self.initial_ = initial
        self.report_ = report
        self.n_iter_ = report.iterations
        self.converged_ = report.terminated.value == "stable"
        return self


class LocalBaseline(_OutcomeMixin, BaseEstimator):
    """Every player works alone with its full budget."""

    def fit(self, game: GameSpec):
        game = check_game(game)
        self._store(game, solve_local(game))
        return self


class NonOverlappingBaseline(_OutcomeMixin, BaseEstimator):
    """Greedy merging into disjoint blocks."""

    def __init__(self, max_block_size: int | None = None):
        self.max_block_size = max_block_size

    def fit(self, game: GameSpec):
        game = check_game(game)
        if self.max_block_size is not None and self.max_block_size < 1:
            raise ValueError("max_block_size must be positive")
        result = solve_nonoverlapping(game, self.max_block_size)
        self.partition_ = result.partition
        self._store(game, result.outcome)
        return self
