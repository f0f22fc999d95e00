"""Goal-biased random walks on the tessellation adjacency graph."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..rng import make_rng
from .tessellation import Tessellation


@dataclass(frozen=True)
class WalkResult:
    path: list
    truncated: bool

    @property
    def steps(self) -> int:
        return len(self.path) - 1


def geodesic_walk(
    tess: Tessellation, start_site: int, goal_site: int, seed, temperature: float = 0.0,
    max_steps: int | None = None,
) -> WalkResult:
    """Walk from ``start_site`` towards ``goal_site`` over shared cell edges.

    A neighbour ``j`` is chosen with probability proportional to
    ``exp(-|s_j - s_goal| / temperature)``. At temperature 0 the walk is
    greedy (closest neighbour, lowest index on ties). The walk stops at the
    goal or after ``10 * n_sites`` steps, in which case it is flagged truncated.
    """
    n = tess.n_sites
    if not (0 <= start_site < n and 0 <= goal_site < n):
        raise ValidationError("start and goal must be site indices of the tessellation")
    if temperature < 0:
        raise ValidationError("temperature must be non-negative")
    limit = 10 * n if max_steps is None else max_steps
    nbrs = tess.neighbours()
    dist = np.linalg.norm(tess.sites - tess.sites[goal_site], axis=1)
    rng = make_rng(seed)
    path = [int(start_site)]
    cur = int(start_site)
    while cur != goal_site and len(path) - 1 < limit:
        cand = nbrs[cur]
        if not cand:
            break
        d = dist[cand]
        if temperature == 0:
            cur = cand[int(np.argmin(d))]
        else:
            w = np.exp(-(d - d.min()) / temperature)
            cur = cand[int(rng.choice(len(cand), p=w / w.sum()))]
        path.append(int(cur))
    return WalkResult(path, cur != goal_site)
