"""Cooperative spectrum sensing as a K-task OCF game.

Every secondary user (SU) heads one sensing task.  Other SUs spend report
bits to send their local decision to heads; a head fuses its own decision
with the received ones by majority vote (ties decide "present").  Local
decisions are conditionally independent given the hypothesis, so the
fused error is computed exactly from the Poisson-binomial vote count.

The game value of a task is the accuracy gain over the head's local
decision.  A head falls back to its own decision when the fused one is
worse, so values are never negative.
"""
from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from ..baselines import solve_local, solve_nonoverlapping
from ..core import Coalition, GameSpec, Outcome
from ..solver import SolverConfig, solve
from .hetnet import ScenarioMetrics, StrategyResult

__all__ = [
    "SensingConfig",
    "SensingValue",
    "SuNode",
    "build_game",
    "fusion_error",
    "fusion_error_bruteforce",
    "generate_sensing_network",
    "mean_error",
    "network_to_json",
    "run_sensing",
    "sensing_task_value",
    "vote_distribution",
]


@dataclass(frozen=True)
class SensingConfig:
    n_su: int = 10
    prior_h1: float = 0.5
    pd_range: tuple[float, float] = (0.5, 0.9)
    pf_range: tuple[float, float] = (0.05, 0.2)
    report_budget_bits: int = 3
    report_cost_bits: int = 1
    max_deviation_size: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pd_range", tuple(float(x) for x in self.pd_range))
        object.__setattr__(self, "pf_range", tuple(float(x) for x in self.pf_range))
        if self.n_su < 1:
            raise ValueError("n_su must be >= 1")
        if not 0.0 < self.prior_h1 < 1.0:
            raise ValueError("prior_h1 must lie in (0, 1)")
        for name in ("pd_range", "pf_range"):
            lo, hi = getattr(self, name)
            if not 0.0 < lo <= hi < 1.0:
                raise ValueError(f"{name} must satisfy 0 < low <= high < 1")
        if self.pd_range[1] <= self.pf_range[0]:
            raise ValueError("no detector can have p_d > p_f with these ranges")
        if self.report_budget_bits < 0 or self.report_cost_bits < 1:
            raise ValueError("report budget must be >= 0 and report cost >= 1")
        if self.max_deviation_size < 1:
            raise ValueError("max_deviation_size must be >= 1")


@dataclass(frozen=True)
class SuNode:
    p_d: float
    p_f: float
    budget_bits: int

    def __post_init__(self):
        if not 0.0 < self.p_f < self.p_d < 1.0:
            raise ValueError(f"need 0 < p_f < p_d < 1, got p_f={self.p_f}, p_d={self.p_d}")


def generate_sensing_network(cfg: SensingConfig) -> list[SuNode]:
    """Detector qualities drawn uniformly; pairs with p_d <= p_f are redrawn."""
    rng = np.random.default_rng(cfg.seed)
    nodes = []
    for _ in range(cfg.n_su):
        while True:
            pd = float(rng.uniform(*cfg.pd_range))
            pf = float(rng.uniform(*cfg.pf_range))
            if pd > pf:
                break
        nodes.append(SuNode(pd, pf, cfg.report_budget_bits))
    return nodes


def network_to_json(nodes: Sequence[SuNode]) -> str:
    return json.dumps([asdict(n) for n in nodes], indent=1, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# fusion
# --------------------------------------------------------------------------


def vote_distribution(probs: Sequence[float]) -> np.ndarray:
    """P(exactly k of the independent voters say "present"), k = 0..len(probs)."""
    dist = np.zeros(len(probs) + 1)
    dist[0] = 1.0
    for k, p in enumerate(probs, start=1):
        dist[1 : k + 1] = dist[1 : k + 1] * (1.0 - p) + dist[0:k] * p
        dist[0] *= 1.0 - p
    return dist


def _present_threshold(n_votes: int) -> int:
    # majority with ties going to "present"
    return (n_votes + 1) // 2


def fusion_error(head: SuNode, reporters: Sequence[SuNode], prior_h1: float) -> float:
    panel = [head, *reporters]
    t = _present_threshold(len(panel))
    miss = float(np.sum(vote_distribution([s.p_d for s in panel])[:t]))
    alarm = float(np.sum(vote_distribution([s.p_f for s in panel])[t:]))
    return prior_h1 * miss + (1.0 - prior_h1) * alarm


def fusion_error_bruteforce(head: SuNode, reporters: Sequence[SuNode], prior_h1: float) -> float:
    """Sum over all joint decision outcomes; exponential, for testing."""
    panel = [head, *reporters]
    t = _present_threshold(len(panel))
    miss = 0.0
    alarm = 0.0
    for votes in itertools.product((0, 1), repeat=len(panel)):
        p1 = 1.0
        p0 = 1.0
        for s, v in zip(panel, votes):
            p1 *= s.p_d if v else 1.0 - s.p_d
            p0 *= s.p_f if v else 1.0 - s.p_f
        if sum(votes) >= t:
            alarm += p0
        else:
            miss += p1
    return prior_h1 * miss + (1.0 - prior_h1) * alarm


def sensing_task_value(
    head: int, contributions: Sequence[int], nodes: Sequence[SuNode], prior_h1: float, cost_bits: int
) -> float:
    """Accuracy of the fused decision at ``head``.

    Reporters are the SUs whose contribution covers one report; extra bits
    to the same head add nothing.
    """
    reporters = [nodes[i] for i, x in enumerate(contributions) if x >= cost_bits and i != head]
    return 1.0 - fusion_error(nodes[head], reporters, prior_h1)


class SensingValue:
    """Game value of a task: accuracy gain of its head over sensing alone."""

    def __init__(self, nodes: Sequence[SuNode], cfg: SensingConfig):
        self.nodes = tuple(nodes)
        self.cfg = cfg
        self.local = [1.0 - fusion_error(s, [], cfg.prior_h1) for s in self.nodes]
        self._cache: dict[tuple[int, frozenset], float] = {}

    def reporters(self, c: Coalition) -> frozenset:
        return frozenset(i for i, x in enumerate(c.resources) if x >= self.cfg.report_cost_bits and i != c.task)

    def __call__(self, c: Coalition, ctx=None) -> float:
        key = (c.task, self.reporters(c))
        v = self._cache.get(key)
        if v is None:
            acc = sensing_task_value(c.task, c.resources, self.nodes, self.cfg.prior_h1, self.cfg.report_cost_bits)
            v = self._cache[key] = max(0.0, acc - self.local[c.task])
        return v

    def accuracy(self, task: int, gain: float) -> float:
        return self.local[task] + gain

    def to_dict(self) -> dict:
        return {"kind": "sensing", "config": asdict(self.cfg)}


def build_game(cfg: SensingConfig, nodes: Sequence[SuNode] | None = None, **game_options) -> GameSpec:
    """``game_options`` (division, arbitration) pass through to GameSpec."""
    nodes = list(nodes) if nodes is not None else generate_sensing_network(cfg)
    n = len(nodes)
    can_report = cfg.report_budget_bits >= cfg.report_cost_bits
    admissible = tuple(tuple(t for t in range(n) if t != i) if can_report else () for i in range(n))
    return GameSpec(
        # budgets below one report are useless; one idle unit keeps the spec valid
        budgets=tuple(max(1, s.budget_bits) for s in nodes),
        value_fn=SensingValue(nodes, cfg),
        max_coalitions=max(1, cfg.report_budget_bits // cfg.report_cost_bits),
        max_deviation_size=min(cfg.max_deviation_size, n),
        n_tasks=n,
        admissible_tasks=admissible,
        task_owner=tuple(range(n)),
        name="sensing",
        **game_options,
    )


def mean_error(spec: GameSpec, outcome: Outcome) -> float:
    """Mean incorrect-decision probability over all heads."""
    value: SensingValue = spec.value_fn
    gains = {c.task: v for c, v in zip(outcome.structure, outcome.values())}
    return math.fsum(1.0 - value.accuracy(t, gains.get(t, 0.0)) for t in range(spec.n_tasks)) / spec.n_tasks


def run_sensing(cfg: SensingConfig, solver_cfg: SolverConfig | None = None, **game_options) -> ScenarioMetrics:
    """Mean sensing error of local, non-overlapping and OCF strategies.

    The OCF solver starts from the non-overlapping outcome.
    """
    spec = build_game(cfg, **game_options)
    metrics = ScenarioMetrics("sensing", cfg.seed)

    t0 = time.perf_counter()
    local = solve_local(spec)
    t1 = time.perf_counter()
    metrics.results.append(StrategyResult("local", mean_error(spec, local), local.welfare(), 0, (t1 - t0) * 1e3))

    # a member can only inform K peers, so larger blocks could not share fully
    no = solve_nonoverlapping(spec, max_block_size=spec.max_coalitions + 1)
    t2 = time.perf_counter()
    metrics.results.append(
        StrategyResult("nonoverlapping", mean_error(spec, no.outcome), no.welfare(), 0, (t2 - t1) * 1e3)
    )

    ocf, report = solve(spec, no.outcome, solver_cfg)
    t3 = time.perf_counter()
    metrics.results.append(
        StrategyResult("ocf", mean_error(spec, ocf), ocf.welfare(), report.iterations, (t3 - t2) * 1e3)
    )
    metrics.report = report
    return metrics
