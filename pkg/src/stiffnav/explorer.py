"""Stiffness-region atlas: group visited poses by the constraint acting on them.

Each probed stiffness is decomposed into eigenscrews and compared with the
constraints already known. A pose joins the first region whose screws all
find a close partner; a run of unmatched poses founds a new region.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classifier import ClassifierThresholds, ConstraintLabel, identify_constraint
from .screw import InvalidInputError, Pose, canonical_sign
from .stiffness import Constraint, Eigenscrew, _as_stiffness, eigenscrew_decompose, principal_axes


def screw_similarity(e_i, e_k, gamma: float = 0.25):
    """``(similar, d2)``: d2 is the squared distance of the unit screws, sign-blind.

    Screws are similar when ``d2 < gamma**2``.
    """
    a = np.asarray(e_i, dtype=float)
    b = np.asarray(e_k, dtype=float)
    if not (np.any(a) and np.any(b)):
        raise InvalidInputError("screw must be nonzero")
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    d2 = float(min(np.sum((a - b) ** 2), np.sum((a + b) ** 2)))
    return d2 < gamma ** 2, d2


def match_constraint(known, observed, gamma: float = 0.25):
    """Pair every known screw with a distinct observed one.

    Candidate pairs are taken greedily by increasing distance. Returns a list
    of ``(i_known, j_observed, d2)`` or ``None`` if any known screw is left
    without a partner under ``gamma``.
    """
    if not observed:
        raise InvalidInputError("no observed screws")
    cands = []
    for i, s in enumerate(known):
        for j, o in enumerate(observed):
            ok, d2 = screw_similarity(s.e, o.e, gamma)
            if ok:
                cands.append((d2, i, j))
    cands.sort()
    used_i, used_j, pairs = set(), set(), []
    for d2, i, j in cands:
        if i in used_i or j in used_j:
            continue
        used_i.add(i)
        used_j.add(j)
        pairs.append((i, j, d2))
    if len(pairs) != len(known):
        return None
    return sorted(pairs)


@dataclass
class ExplorerConfig:
    gamma: float = 0.25
    ema_weight: float = 0.2
    mismatch_patience: int = 3
    # screws stiffer than this (|lam|) are left out of constraints; None keeps all
    rigid_lambda: float | None = None

    def __post_init__(self):
        if not 0 < self.gamma < 1:
            raise InvalidInputError("gamma must be in (0, 1)")
        if not 0 < self.ema_weight <= 1:
            raise InvalidInputError("ema_weight must be in (0, 1]")
        if int(self.mismatch_patience) < 1:
            raise InvalidInputError("mismatch_patience must be >= 1")


@dataclass
class StiffnessRegion:
    id: int
    poses: list
    constraint: Constraint
    label: ConstraintLabel

    def to_dict(self):
        return {
            "id": self.id,
            "label": self.label.to_dict(),
            "sample_count": self.constraint.sample_count,
            "screws": [{"e": s.e.tolist(), "lam": s.lam, "pitch": s.pitch_w, "kind": s.kind}
                       for s in self.constraint.screws],
            "poses": [z.as_list() for z in self.poses],
        }


@dataclass
class Atlas:
    regions: list = field(default_factory=list)
    misses: int = 0
    pending: list = field(default_factory=list)      # poses in the current mismatch run
    unassigned: list = field(default_factory=list)   # mismatch runs that ended in a match

    def region(self, rid) -> StiffnessRegion:
        for r in self.regions:
            if r.id == rid:
                return r
        raise KeyError(rid)

    def to_dict(self):
        return {
            "regions": [r.to_dict() for r in self.regions],
            "unassigned_poses": [z.as_list() for z in self.unassigned + self.pending],
        }


def _observe(K, cfg: ExplorerConfig):
    screws = eigenscrew_decompose(K)
    if cfg.rigid_lambda is not None:
        screws = [s for s in screws if abs(s.lam) < cfg.rigid_lambda]
    return screws


def _update(C: Constraint, observed, pairs, K, w):
    screws = list(C.screws)
    for i, j, _ in pairs:
        old, new = screws[i].e, observed[j].e
        sgn = 1.0 if old @ new >= 0 else -1.0
        e = (1 - w) * old + w * sgn * new
        lam = (1 - w) * screws[i].lam + w * observed[j].lam
        screws[i] = Eigenscrew.from_vector(canonical_sign(e / np.linalg.norm(e)), lam, screws[i].kind)
    K_avg = K if C.stiffness is None else (1 - w) * C.stiffness + w * K
    return Constraint(screws, C.sample_count + 1, K_avg)


def _label(K, thresholds):
    return identify_constraint(principal_axes(K), thresholds)


def explore_step(atlas: Atlas, z: Pose, K, cfg: ExplorerConfig | None = None,
                 thresholds: ClassifierThresholds | None = None):
    """Assign ``z`` to a region given the stiffness ``K`` probed there.

    Returns ``(atlas, region_id)``; the id is ``None`` while the pose is held
    in a mismatch run that has not yet reached ``mismatch_patience``.
    Region ids start at 1. ``atlas`` is updated in place.
    """
    cfg = cfg or ExplorerConfig()
    K = _as_stiffness(K)
    observed = _observe(K, cfg)
    for r in atlas.regions:
        pairs = match_constraint(r.constraint.screws, observed, cfg.gamma)
        if pairs is not None:
            r.poses.append(z)
            r.constraint = _update(r.constraint, observed, pairs, K, cfg.ema_weight)
            r.label = _label(r.constraint.stiffness, thresholds)
            atlas.unassigned.extend(atlas.pending)
            atlas.pending, atlas.misses = [], 0
            return atlas, r.id
    atlas.misses += 1
    if atlas.regions and atlas.misses < cfg.mismatch_patience:
        atlas.pending.append(z)
        return atlas, None
    rid = max((r.id for r in atlas.regions), default=0) + 1
    region = StiffnessRegion(rid, atlas.pending + [z], Constraint(observed, 1, K), _label(K, thresholds))
    atlas.regions.append(region)
    atlas.pending, atlas.misses = [], 0
    return atlas, rid


class Explorer:
    """Stateful wrapper so the planner can feed each new stiffness probe."""

    def __init__(self, cfg: ExplorerConfig | None = None, thresholds: ClassifierThresholds | None = None):
        self.cfg = cfg or ExplorerConfig()
        self.thresholds = thresholds
        self.atlas = Atlas()

    def step(self, z: Pose, K):
        _, rid = explore_step(self.atlas, z, K, self.cfg, self.thresholds)
        return rid
