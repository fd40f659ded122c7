"""Small-cell interference coordination as a K-coalition OCF game.

Each small base station (SBS) is granted a random subset of resource-block
groups (RBGs) by the macro cell and needs ``demand`` of them.  SBSs pool
RBGs in coalitions; inside a coalition every pooled RBG goes to exactly one
member, so members never interfere with each other on it.  Transmissions
from other coalitions still interfere, which makes a coalition's value
depend on the rest of the structure.

Radio model: one representative user per SBS at ``user_distance_m``,
path loss ``d**-pathloss_exponent``, SNR ``snr_ref_db`` at the user with no
interference.  An interferer at distance d contributes an interference to
noise ratio ``snr * (user_distance / d) ** exponent``.  Only SBSs within
``interference_radius_m`` interfere.  A transmission on one RBG earns
``rbg_size * log2(1 + SNR / (1 + sum INR))``.
"""
from __future__ import annotations

import itertools
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from ..baselines import solve_local, solve_nonoverlapping
from ..core import Coalition, GameSpec, StructureContext
from ..solver import ConvergenceReport, SolverConfig, solve

__all__ = [
    "HetNetConfig",
    "HetNetValue",
    "SbsNode",
    "Topology",
    "build_game",
    "generate_topology",
    "run_hetnet",
]


@dataclass(frozen=True)
class HetNetConfig:
    area_m: float = 400.0
    n_sbs: int = 20
    interference_radius_m: float = 100.0
    rb_pool: int = 25
    # RBs are handed out in groups so budgets stay small enough to enumerate
    rbg_size: int = 5
    rb_availability_prob: float = 0.8
    traffic_load: float = 0.75
    user_distance_m: float = 20.0
    pathloss_exponent: float = 3.0
    snr_ref_db: float = 20.0
    max_coalitions: int = 3
    max_deviation_size: int = 2
    seed: int = 0

    def __post_init__(self):
        for name in ("area_m", "interference_radius_m", "user_distance_m", "pathloss_exponent"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.n_sbs < 1:
            raise ValueError("n_sbs must be >= 1")
        if self.rb_pool < 1 or self.rbg_size < 1 or self.rb_pool % self.rbg_size:
            raise ValueError("rb_pool must be a positive multiple of rbg_size")
        if not 0.0 < self.rb_availability_prob <= 1.0:
            raise ValueError("rb_availability_prob must lie in (0, 1]")
        if not 0.0 < self.traffic_load <= 1.0:
            raise ValueError("traffic_load must lie in (0, 1]")
        if self.max_coalitions < 1 or self.max_deviation_size < 1:
            raise ValueError("max_coalitions and max_deviation_size must be >= 1")

    @property
    def n_rbg(self) -> int:
        return self.rb_pool // self.rbg_size

    @property
    def snr_linear(self) -> float:
        return 10.0 ** (self.snr_ref_db / 10.0)


@dataclass(frozen=True)
class SbsNode:
    position: tuple[float, float]
    available: tuple[int, ...]
    demand: int


@dataclass(frozen=True)
class Topology:
    nodes: tuple[SbsNode, ...]
    edges: tuple[tuple[int, int], ...]

    @property
    def n(self) -> int:
        return len(self.nodes)

    def neighbors(self) -> list[set[int]]:
        adj = [set() for _ in self.nodes]
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj

    def to_json(self) -> str:
        doc = {
            "nodes": [
                {"position": list(n.position), "available": list(n.available), "demand": n.demand}
                for n in self.nodes
            ],
            "edges": [list(e) for e in self.edges],
        }
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def generate_topology(cfg: HetNetConfig) -> Topology:
    """Uniform SBS positions, Bernoulli RBG grants, demand from the traffic load."""
    rng = np.random.default_rng(cfg.seed)
    pos = rng.uniform(0.0, cfg.area_m, size=(cfg.n_sbs, 2))
    grants = rng.random((cfg.n_sbs, cfg.n_rbg)) < cfg.rb_availability_prob
    fallback = rng.integers(0, cfg.n_rbg, size=cfg.n_sbs)
    nodes = []
    for b in range(cfg.n_sbs):
        avail = tuple(int(m) for m in np.flatnonzero(grants[b]))
        if not avail:
            # the macro cell always leaves at least one group to a covered SBS
            avail = (int(fallback[b]),)
        demand = max(1, min(len(avail), _round_half_up(cfg.traffic_load * len(avail))))
        nodes.append(SbsNode((float(pos[b, 0]), float(pos[b, 1])), avail, demand))
    edges = []
    for a, b in itertools.combinations(range(cfg.n_sbs), 2):
        if math.dist(nodes[a].position, nodes[b].position) < cfg.interference_radius_m:
            edges.append((a, b))
    return Topology(tuple(nodes), tuple(edges))


class HetNetValue:
    """Downlink throughput of a coalition inside a structure.

    ``realize`` turns a whole structure into concrete transmissions:
    coalitions are processed in sorted order; each member contributes its
    lowest-index granted RBGs not already committed, and the pool is dealt
    round-robin to members in index order.  A member only takes RBGs it is
    granted and not yet transmitting on, and never beyond its demand.
    """

    uses_context = True

    def __init__(self, topo: Topology, cfg: HetNetConfig):
        self.topo = topo
        self.cfg = cfg
        self.n = topo.n
        self.adj = topo.neighbors()
        self.avail_mask = [sum(1 << m for m in node.available) for node in topo.nodes]
        self.demand = [node.demand for node in topo.nodes]
        snr = cfg.snr_linear
        self.snr = snr
        self.inr: list[dict[int, float]] = [dict() for _ in range(self.n)]
        for a, b in topo.edges:
            d = math.dist(topo.nodes[a].position, topo.nodes[b].position)
            d = max(d, cfg.user_distance_m)
            g = snr * (cfg.user_distance_m / d) ** cfg.pathloss_exponent
            self.inr[a][b] = g
            self.inr[b][a] = g

    def is_clique(self, members) -> bool:
        members = list(members)
        return all(b in self.adj[a] for a, b in itertools.combinations(members, 2))

    def _check(self, c: Coalition) -> None:
        if len(c.resources) != self.n:
            raise ValueError("resource vector length differs from the SBS count")
        for b in c.members:
            if c.resources[b] > len(self.topo.nodes[b].available):
                raise ValueError(f"SBS {b} contributes more RBGs than it is granted")
        if not self.is_clique(c.members):
            raise ValueError(f"SBSs {c.members} are not pairwise neighbors")

    # -- concretization ------------------------------------------------------

    def _concretize(self, c: Coalition, used: list[int], tx: list[int]) -> list[tuple[int, int]]:
        pool = 0
        pool_list = []
        for b in c.members:
            free = self.avail_mask[b] & ~used[b] & ~pool
            need = c.resources[b]
            m = 0
            while need and free >> m:
                if free >> m & 1:
                    pool |= 1 << m
                    pool_list.append(m)
                    used[b] |= 1 << m
                    need -= 1
                m += 1
        pool_list.sort()
        members = c.members
        assigned = []
        remaining = list(pool_list)
        progress = True
        while remaining and progress:
            progress = False
            for b in members:
                if bin(tx[b]).count("1") >= self.demand[b]:
                    continue
                for k, m in enumerate(remaining):
                    bit = 1 << m
                    if self.avail_mask[b] & bit and not tx[b] & bit:
                        tx[b] |= bit
                        assigned.append((b, m))
                        del remaining[k]
                        progress = True
                        break
                if not remaining:
                    break
        return assigned

    def realize(self, structure: Sequence[Coalition]):
        """Per-coalition assignments (in the given order) and the transmit masks."""
        order = sorted(range(len(structure)), key=lambda k: structure[k].resources)
        used = [0] * self.n
        tx = [0] * self.n
        assigned: list[list[tuple[int, int]]] = [[] for _ in structure]
        for k in order:
            assigned[k] = self._concretize(structure[k], used, tx)
        return assigned, tx

    def rate(self, b: int, m: int, tx: Sequence[int]) -> float:
        bit = 1 << m
        interference = 0.0
        for c, g in self.inr[b].items():
            if tx[c] & bit:
                interference += g
        return self.cfg.rbg_size * math.log2(1.0 + self.snr / (1.0 + interference))

    def structure_values(self, structure: Sequence[Coalition]) -> list[float]:
        for c in structure:
            self._check(c)
        assigned, tx = self.realize(structure)
        return [math.fsum(self.rate(b, m, tx) for b, m in a) for a in assigned]

    def __call__(self, c: Coalition, ctx: StructureContext | None = None) -> float:
        self._check(c)
        others = tuple(ctx.coalitions) if ctx is not None else ()
        members = set(c.members)
        if any(members.intersection(o.members) for o in others):
            return self.structure_values(others + (c,))[-1]
        # members are not in the context, so the context realizes the same with or without c
        key = ("hetnet", id(self))
        state = ctx.cache.get(key) if ctx is not None else None
        if state is None:
            _, tx_ctx = self.realize(others)
            state = tuple(tx_ctx)
            if ctx is not None:
                ctx.cache[key] = state
        used = [0] * self.n
        tx = [0] * self.n
        assigned = self._concretize(c, used, tx)
        merged = [a | b for a, b in zip(state, tx)]
        return math.fsum(self.rate(b, m, merged) for b, m in assigned)

    def to_dict(self) -> dict:
        return {"kind": "hetnet", "config": asdict(self.cfg)}


def build_game(cfg: HetNetConfig, topo: Topology | None = None, **game_options) -> GameSpec:
    """``game_options`` (division, arbitration) pass through to GameSpec."""
    topo = topo or generate_topology(cfg)
    value = HetNetValue(topo, cfg)
    return GameSpec(
        budgets=tuple(node.demand for node in topo.nodes),
        value_fn=value,
        max_coalitions=cfg.max_coalitions,
        max_deviation_size=min(cfg.max_deviation_size, topo.n),
        admissible_support=value.is_clique,
        name="hetnet",
        **game_options,
    )


@dataclass
class StrategyResult:
    strategy: str
    metric: float
    welfare: float
    iterations: int = 0
    wall_ms: float = 0.0


@dataclass
class ScenarioMetrics:
    scenario: str
    seed: int
    results: list[StrategyResult] = field(default_factory=list)
    report: ConvergenceReport | None = None

    def by_strategy(self) -> dict[str, StrategyResult]:
        return {r.strategy: r for r in self.results}


def run_hetnet(cfg: HetNetConfig, solver_cfg: SolverConfig | None = None, **game_options) -> ScenarioMetrics:
    """Total throughput of local, non-overlapping and OCF strategies for one seed.

    The OCF solver starts from the non-overlapping outcome.
    """
    spec = build_game(cfg, **game_options)
    metrics = ScenarioMetrics("hetnet", cfg.seed)

    t0 = time.perf_counter()
    local = solve_local(spec)
    t1 = time.perf_counter()
    metrics.results.append(StrategyResult("local", local.welfare(), local.welfare(), 0, (t1 - t0) * 1e3))

    no = solve_nonoverlapping(spec)
    t2 = time.perf_counter()
    metrics.results.append(
        StrategyResult("nonoverlapping", no.welfare(), no.welfare(), 0, (t2 - t1) * 1e3)
    )

    ocf, report = solve(spec, no.outcome, solver_cfg)
    t3 = time.perf_counter()
    metrics.results.append(
        StrategyResult("ocf", ocf.welfare(), ocf.welfare(), report.iterations, (t3 - t2) * 1e3)
    )
    metrics.report = report
    return metrics
