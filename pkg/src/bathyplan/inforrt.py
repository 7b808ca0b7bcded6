"""Budgeted information-gathering tree planner over the feature field.

Grows a tree per start by repeating aim -> select -> steer -> grow:
aim picks a target (uniformly, or the highest-novelty point among random
samples), select expands the best of the k spatially nearest nodes with
budget left, steer collision-checks the step, and grow appends the node
while accumulating feature samples along the path. There is no rewire
step; growth is purely incremental.

Novelty is the minimum Mahalanobis feature distance to everything the
tree has already sampled, so branches are pushed toward terrain unlike
what the tree has seen.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .errors import PlannerError
from .features import FeatureField, MahalanobisModel
from .grid import BathyGrid, ObstacleMask
from .paths import Path, densify


@dataclass
class Environment:
    """Everything the planner may query, aligned to one grid frame."""

    grid: BathyGrid
    mask: ObstacleMask
    field: FeatureField
    model: MahalanobisModel

    _free_cells: np.ndarray | None = None

    def free_cells(self) -> np.ndarray:
        if self._free_cells is None:
            self._free_cells = self.mask.unblocked_cells()
            if len(self._free_cells) == 0:
                raise PlannerError("no unblocked cells in the environment")
        return self._free_cells

    def sample_free_positions(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """n cell-center positions drawn uniformly over unblocked cells."""
        cells = self.free_cells()
        picks = cells[rng.integers(len(cells), size=n)]
        e, nn = self.grid.cell_centers(picks[:, 0], picks[:, 1])
        return np.column_stack([e, nn])

    def feature_at(self, position) -> np.ndarray:
        return self.field.features_at(np.asarray(position, dtype=float))[0]


@dataclass
class PlannerConfig:
    budget: float
    step: float | None = None  # default 5 * cellsize
    k_nearest: int = 5
    iterations: int = 200
    n_starts: int = 4
    goal_bias: float = 0.5
    aim_samples: int = 100
    start_samples: int = 100
    sample_spacing: float | None = None  # default 2 * cellsize
    seed: int = 0
    start_mode: str = "informative"  # or "random"
    eval_metric: str = "mpd"  # or "msd"
    eval_seed: int = 12345
    eval_env_samples: int = 1000
    time_budget: float | None = None  # wall-clock seconds per start; overrides iterations

    def validate(self):
        if self.budget <= 0:
            raise ValueError(f"budget {self.budget} must be > 0")
        if self.step is not None and self.step <= 0:
            raise ValueError("step must be > 0")
        if self.sample_spacing is not None and self.sample_spacing <= 0:
            raise ValueError("sample_spacing must be > 0")
        if self.k_nearest < 1:
            raise ValueError("k_nearest must be >= 1")
        if not 0.0 <= self.goal_bias <= 1.0:
            raise ValueError("goal_bias must lie in [0, 1]")
        if self.start_mode not in ("informative", "random"):
            raise ValueError(f"unknown start_mode {self.start_mode!r}")
        if self.eval_metric not in ("mpd", "msd"):
            raise ValueError(f"unknown eval_metric {self.eval_metric!r}")

    def resolve(self, grid: BathyGrid) -> "PlannerConfig":
        """Fill grid-relative defaults (step, sample spacing)."""
        cfg = replace(
            self,
            step=self.step if self.step is not None else 5.0 * grid.cellsize,
            sample_spacing=(self.sample_spacing if self.sample_spacing is not None
                            else 2.0 * grid.cellsize),
        )
        cfg.validate()
        return cfg


@dataclass
class TreeNode:
    id: int
    position: np.ndarray  # (2,)
    parent: int | None
    cost: float  # meters from root
    feature: np.ndarray
    path_w: np.ndarray  # whitened feature samples along root->here, (m, d)
    sample_resid: float  # arc length since the last sample
    pair_sum: float  # sum of pairwise distances over path_w, diagonal included
    min_env_d: np.ndarray | None = None  # per env sample: min dist to path_w


class Tree:
    """Append-only RRT-style tree with per-node path feature samples.

    Per node it maintains the two path scores incrementally: the pairwise
    distance total (for mean-pairwise ranking) and, when whitened
    environment samples are supplied, each sample's min distance to the
    path (for coverage ranking).
    """

    def __init__(self, root_pos: np.ndarray, env: Environment, spacing: float,
                 env_samples_w: np.ndarray | None = None):
        self.env = env
        self.spacing = spacing
        self.env_samples_w = env_samples_w
        root_feat = env.feature_at(root_pos)
        root_w = env.model.whiten(root_feat)
        min_env_d = None
        if env_samples_w is not None:
            min_env_d = np.linalg.norm(env_samples_w - root_w[0], axis=1)
        self.nodes: list[TreeNode] = [TreeNode(
            id=0, position=np.asarray(root_pos, dtype=float), parent=None,
            cost=0.0, feature=root_feat, path_w=root_w, sample_resid=0.0,
            pair_sum=0.0, min_env_d=min_env_d)]
        self.positions = [np.asarray(root_pos, dtype=float)]
        self.features_w = [root_w[0]]

    def __len__(self) -> int:
        return len(self.nodes)

    def positions_array(self) -> np.ndarray:
        return np.asarray(self.positions)

    def features_w_array(self) -> np.ndarray:
        return np.asarray(self.features_w)

    def grow(self, parent: TreeNode, new_pos: np.ndarray) -> TreeNode:
        """Append a node, sampling features every `spacing` meters along
        the new edge (arc length carries over node boundaries)."""
        new_pos = np.asarray(new_pos, dtype=float)
        edge = float(np.linalg.norm(new_pos - parent.position))
        direction = (new_pos - parent.position) / edge
        offsets = []
        off = self.spacing - parent.sample_resid
        while off <= edge + 1e-9:
            offsets.append(min(off, edge))
            off += self.spacing
        min_env_d = parent.min_env_d
        if offsets:
            pts = parent.position + np.outer(offsets, direction)
            new_w = self.env.model.whiten(self.env.field.features_at(pts))
            # incremental pairwise-distance total: old pairs + cross terms + new pairs
            cross = np.linalg.norm(
                parent.path_w[:, None, :] - new_w[None, :, :], axis=-1)
            inner = np.linalg.norm(new_w[:, None, :] - new_w[None, :, :], axis=-1)
            pair_sum = parent.pair_sum + 2.0 * cross.sum() + inner.sum()
            path_w = np.vstack([parent.path_w, new_w])
            resid = (parent.sample_resid + edge) - self.spacing * len(offsets)
            if self.env_samples_w is not None:
                d_new = np.min(np.linalg.norm(
                    self.env_samples_w[:, None, :] - new_w[None, :, :], axis=-1), axis=1)
                min_env_d = np.minimum(parent.min_env_d, d_new)
        else:
            pair_sum = parent.pair_sum
            path_w = parent.path_w
            resid = parent.sample_resid + edge
        feat = self.env.feature_at(new_pos)
        node = TreeNode(id=len(self.nodes), position=new_pos, parent=parent.id,
                        cost=parent.cost + edge, feature=feat, path_w=path_w,
                        sample_resid=resid, pair_sum=pair_sum, min_env_d=min_env_d)
        self.nodes.append(node)
        self.positions.append(new_pos)
        self.features_w.append(self.env.model.whiten(feat)[0])
        return node

    def path_to(self, node: TreeNode) -> Path:
        chain = []
        cur: TreeNode | None = node
        while cur is not None:
            chain.append(cur.position)
            cur = self.nodes[cur.parent] if cur.parent is not None else None
        return Path(np.asarray(chain[::-1]))

    def edges_csv(self) -> str:
        """child_id,parent_id,x,y,cost - for offline visualization."""
        lines = ["child_id,parent_id,x,y,cost"]
        for nd in self.nodes:
            parent = -1 if nd.parent is None else nd.parent
            lines.append(f"{nd.id},{parent},{float(nd.position[0])!r},"
                         f"{float(nd.position[1])!r},{float(nd.cost)!r}")
        return "\n".join(lines) + "\n"


def find_start(env: Environment, n: int, rng, mode: str = "informative") -> np.ndarray:
    """Pick a starting position.

    informative: sample n unblocked positions and return the one whose
    feature is farthest (summed Mahalanobis distance) from all the other
    samples; ties go to the first sampled. random: one uniform sample.
    """
    rng = _as_rng(rng)
    if mode == "random":
        return env.sample_free_positions(1, rng)[0]
    if n < 2:
        raise ValueError(f"informative start needs n >= 2 samples, got {n}")
    pts = env.sample_free_positions(n, rng)
    W = env.model.whiten(env.field.features_at(pts))
    dists = np.linalg.norm(W[:, None, :] - W[None, :, :], axis=-1)
    scores = dists.sum(axis=1)
    return pts[int(np.argmax(scores))]


def aim(tree: Tree, env: Environment, goal_bias: float, aim_samples: int, rng) -> np.ndarray:
    """Choose a target: uniform with probability 1 - goal_bias, otherwise
    the sampled point most novel w.r.t. the features already in the tree."""
    rng = _as_rng(rng)
    if rng.random() >= goal_bias:
        return env.sample_free_positions(1, rng)[0]
    pts = env.sample_free_positions(aim_samples, rng)
    W = env.model.whiten(env.field.features_at(pts))
    tree_w = tree.features_w_array()
    novelty = np.min(np.linalg.norm(W[:, None, :] - tree_w[None, :, :], axis=-1), axis=1)
    return pts[int(np.argmax(novelty))]


def select(tree: Tree, target: np.ndarray, k_nearest: int, env: Environment,
           step: float, budget: float) -> TreeNode | None:
    """Among the k spatially nearest nodes with budget for a full step,
    pick the one whose step-limited move toward the target is most novel
    against that node's own path samples plus all tree features.

    Returns None when every candidate is out of budget (iteration skipped).
    """
    positions = tree.positions_array()
    d2 = np.sum((positions - target) ** 2, axis=1)
    k = min(k_nearest, len(positions))
    nearest = np.argpartition(d2, k - 1)[:k]
    nearest = nearest[np.argsort(d2[nearest], kind="stable")]

    tree_w = tree.features_w_array()
    scored: list[tuple[float, int]] = []
    for idx in nearest:
        node = tree.nodes[int(idx)]
        if node.cost + step > budget:
            continue
        gap = float(np.linalg.norm(target - node.position))
        if gap <= 1e-12:
            endpoint = target
        else:
            endpoint = node.position + min(step, gap) * (target - node.position) / gap
        u_w = env.model.whiten(env.feature_at(endpoint))[0]
        V = np.vstack([node.path_w, tree_w])
        scored.append((float(np.min(np.linalg.norm(V - u_w, axis=1))), node.id))
    if not scored:
        return None
    scored.sort(key=lambda s: (-s[0], s[1]))
    return tree.nodes[scored[0][1]]


def steer(from_pos: np.ndarray, target: np.ndarray, step: float,
          mask: ObstacleMask) -> np.ndarray | None:
    """Move from from_pos toward target, at most `step` meters, checking
    the segment for collisions every cellsize/2. None means blocked."""
    from_pos = np.asarray(from_pos, dtype=float)
    target = np.asarray(target, dtype=float)
    gap = float(np.linalg.norm(target - from_pos))
    if gap <= 1e-12:
        endpoint = target
    else:
        endpoint = from_pos + min(step, gap) * (target - from_pos) / gap
    seg = float(np.linalg.norm(endpoint - from_pos))
    n_checks = max(1, int(np.ceil(seg / (mask.cellsize / 2.0))))
    for t in np.linspace(0.0, 1.0, n_checks + 1):
        p = from_pos + t * (endpoint - from_pos)
        if mask.blocked_at(p[0], p[1]):
            return None
    return endpoint


def grow_tree(env: Environment, root: np.ndarray, config: PlannerConfig,
              rng, env_samples_w: np.ndarray | None = None) -> Tree:
    """One start's tree: aim/select/steer/grow rounds.

    Runs `iterations` rounds by default (deterministic); with
    config.time_budget set, rounds continue until the wall clock expires
    instead, matching per-start planning-time limits.
    """
    rng = _as_rng(rng)
    tree = Tree(root, env, config.sample_spacing, env_samples_w=env_samples_w)
    deadline = None if config.time_budget is None else \
        time.monotonic() + config.time_budget
    rounds = 0
    while (rounds < config.iterations) if deadline is None else \
            (time.monotonic() < deadline):
        rounds += 1
        target = aim(tree, env, config.goal_bias, config.aim_samples, rng)
        node = select(tree, target, config.k_nearest, env, config.step, config.budget)
        if node is None:
            continue
        endpoint = steer(node.position, target, config.step, env.mask)
        if endpoint is None:
            continue
        if np.linalg.norm(endpoint - node.position) <= 1e-9:
            continue
        tree.grow(node, endpoint)
    return tree


def best_node_path(tree: Tree, env: Environment, config: PlannerConfig) -> Path:
    """The root path that maximizes the configured criterion over its
    accumulated feature samples; ties go to the lowest node id."""
    best: tuple[float, int] | None = None
    for node in tree.nodes:
        if config.eval_metric == "mpd":
            m = len(node.path_w)
            score = node.pair_sum / (m * m)
        else:
            score = -float(np.mean(node.min_env_d))
        if best is None or score > best[0]:
            best = (score, node.id)
    return tree.path_to(tree.nodes[best[1]])


def plan(env: Environment, config: PlannerConfig,
         collect_trees: list | None = None) -> list[Path]:
    """Run all starts; returns one candidate path per start, in start order.

    Deterministic for (env, config): each start draws from its own
    generator seeded by (config.seed, start index). Pass a list as
    collect_trees to keep the grown trees (e.g. for export).
    """
    config = config.resolve(env.grid)
    env_samples_w = None
    if config.eval_metric == "msd":
        env_samples_w = _env_samples_whitened(env, config)
    candidates = []
    for s in range(config.n_starts):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, s]))
        root = find_start(env, config.start_samples, rng, mode=config.start_mode)
        tree = grow_tree(env, root, config, rng, env_samples_w=env_samples_w)
        if collect_trees is not None:
            collect_trees.append(tree)
        candidates.append(best_node_path(tree, env, config))
    return candidates


def evaluate(candidates: list[Path], env: Environment, config: PlannerConfig) -> Path:
    """Pick the candidate that best samples the feature space.

    Ranked by mean pairwise feature distance along the densified path
    (or negated mean environment-sample distance when configured); ties
    break to the shortest path, then the lowest start index.
    """
    if not candidates:
        raise ValueError("no candidate paths")
    config = config.resolve(env.grid)
    env_samples_w = None
    if config.eval_metric == "msd":
        env_samples_w = _env_samples_whitened(env, config)
    scored = []
    for i, path in enumerate(candidates):
        dense = densify(path, config.sample_spacing)
        W = env.model.whiten(env.field.features_at(dense.waypoints))
        if config.eval_metric == "mpd":
            dists = np.linalg.norm(W[:, None, :] - W[None, :, :], axis=-1)
            score = float(dists.sum()) / (len(W) ** 2)
        else:
            dmin = np.min(np.linalg.norm(
                env_samples_w[:, None, :] - W[None, :, :], axis=-1), axis=1)
            score = -float(np.mean(dmin))
        scored.append((-score, path.length, i))
    scored.sort()
    return candidates[scored[0][2]]


def _env_samples_whitened(env: Environment, config: PlannerConfig) -> np.ndarray:
    from .evaluation import sample_environment_features

    samples = sample_environment_features(
        env.field, env.mask, config.eval_env_samples, config.eval_seed)
    return env.model.whiten(samples)


def _as_rng(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
