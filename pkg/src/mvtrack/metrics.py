"""CLEAR-MOT, identity and pose metrics over 3D trajectory sets.

A trajectory set is ``{track_id: {frame: position}}`` where a position is a
``(3,)`` footprint or a ``(K, 3)`` joint array (NaN rows for missing joints).
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from importlib import resources
from typing import Optional

import numpy as np
import yaml
from scipy.optimize import linear_sum_assignment

TrajectorySet = dict[int, dict[int, np.ndarray]]


@dataclass
class MotReport:
    mota: float
    idf1: float
    mt: float
    ml: float
    fp: int
    fn: int
    ids: int
    num_gt: int = 0
    motp: float = float("nan")
    idtp: int = 0

    def as_record(self) -> dict:
        return asdict(self)

    def format(self) -> str:
        lines = []
        for k, v in self.as_record().items():
            lines.append(f"{k} = {v:.6f}" if isinstance(v, float) else f"{k} = {v}")
        return "\n".join(lines)


def position_distance(a, b) -> float:
    """Footprint distance, or mean distance over joints present in both."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim == 1:
        return float(np.linalg.norm(a - b))
    d = np.linalg.norm(a - b, axis=-1)
    d = d[~np.isnan(d)]
    return float(d.mean()) if len(d) else float("inf")


def _by_frame(tracks: TrajectorySet):
    frames: dict[int, dict[int, np.ndarray]] = {}
    for tid, traj in tracks.items():
        for t, pos in traj.items():
            frames.setdefault(t, {})[tid] = pos
    return frames


def clear_match(gt_frame, pred_frame, threshold, prev_matches=None) -> dict:
    """Match ground-truth ids to prediction ids in one frame.

    Previous matches that are still within ``threshold`` are kept; the rest is
    solved by minimum-cost assignment gated at ``threshold``.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    prev_matches = prev_matches or {}
    matches = {}
    for g, p in prev_matches.items():
        if g in gt_frame and p in pred_frame and position_distance(gt_frame[g], pred_frame[p]) <= threshold:
            matches[g] = p
    gts = [g for g in sorted(gt_frame) if g not in matches]
    used = set(matches.values())
    preds = [p for p in sorted(pred_frame) if p not in used]
    if gts and preds:
        D = np.array([[position_distance(gt_frame[g], pred_frame[p]) for p in preds] for g in gts])
        feasible = D <= threshold
        if feasible.any():
            big = float(D[feasible].sum()) + 1.0
            rows, cols = linear_sum_assignment(np.where(feasible, D, big))
            for r, c in zip(rows, cols):
                if feasible[r, c]:
                    matches[gts[r]] = preds[c]
    return matches


def clear_mot(gt: TrajectorySet, pred: TrajectorySet, threshold=0.5) -> MotReport:
    """MOTA, MOTP, MT/ML, FP, FN and ID switches (IDF1 filled in too)."""
    gt_frames = _by_frame(gt)
    pred_frames = _by_frame(pred)
    fp = fn = ids = num_gt = 0
    dist_sum, n_match = 0.0, 0
    last_match: dict[int, int] = {}
    prev: dict[int, int] = {}
    matched_count = {g: 0 for g in gt}
    for t in sorted(gt_frames.keys() | pred_frames.keys()):
        g_t = gt_frames.get(t, {})
        p_t = pred_frames.get(t, {})
        m = clear_match(g_t, p_t, threshold, prev)
        num_gt += len(g_t)
        fn += len(g_t) - len(m)
        fp += len(p_t) - len(m)
        for g, p in m.items():
            if g in last_match and last_match[g] != p:
                ids += 1
            last_match[g] = p
            matched_count[g] += 1
            dist_sum += position_distance(g_t[g], p_t[p])
            n_match += 1
        prev = m
    ratios = [matched_count[g] / len(gt[g]) for g in gt if len(gt[g])]
    mt = float(np.mean([r > 0.8 for r in ratios])) if ratios else 0.0
    ml = float(np.mean([r < 0.2 for r in ratios])) if ratios else 0.0
    mota = 1.0 - (fp + fn + ids) / num_gt if num_gt else float("nan")
    idf1, idtp = identity_f1(gt, pred, threshold, return_idtp=True)
    motp = dist_sum / n_match if n_match else float("nan")
    return MotReport(mota, idf1, mt, ml, fp, fn, ids, num_gt, motp, idtp)


def mota(gt, pred, threshold=0.5) -> MotReport:
    return clear_mot(gt, pred, threshold)


def identity_f1(gt: TrajectorySet, pred: TrajectorySet, threshold=0.5, return_idtp=False):
    """IDF1 from the one-to-one id mapping that maximises true-positive frames."""
    gids = sorted(gt)
    pids = sorted(pred)
    n_gt = sum(len(v) for v in gt.values())
    n_pred = sum(len(v) for v in pred.values())
    overlap = np.zeros((len(gids), len(pids)))
    for i, g in enumerate(gids):
        for j, p in enumerate(pids):
            common = gt[g].keys() & pred[p].keys()
            overlap[i, j] = sum(
                position_distance(gt[g][t], pred[p][t]) <= threshold for t in common
            )
    idtp = 0
    if overlap.size:
        rows, cols = linear_sum_assignment(-overlap)
        idtp = int(overlap[rows, cols].sum())
    idfn = n_gt - idtp
    idfp = n_pred - idtp
    denom = 2 * idtp + idfp + idfn
    score = 2 * idtp / denom if denom else 1.0
    return (score, idtp) if return_idtp else score


idf1 = identity_f1


def load_limbs(path: Optional[str] = None) -> dict[str, tuple[int, int]]:
    """Limb table ``{name: (joint_a, joint_b)}``; defaults to the packaged one."""
    if path is None:
        text = resources.files("mvtrack").joinpath("data/limbs.yaml").read_text()
    else:
        with open(path) as fh:
            text = fh.read()
    raw = yaml.safe_load(text)
    return {name: (int(a), int(b)) for name, (a, b) in raw["limbs"].items()}


def _limb_correct(gt_pose, pred_pose, a, b, alpha):
    length = np.linalg.norm(gt_pose[a] - gt_pose[b])
    ea = np.linalg.norm(pred_pose[a] - gt_pose[a])
    eb = np.linalg.norm(pred_pose[b] - gt_pose[b])
    # NaN errors compare False, counting missing joints as wrong
    return bool(ea <= alpha * length and eb <= alpha * length)


def pcp(gt: TrajectorySet, pred: TrajectorySet, alpha=0.5, limbs=None):
    """Percentage of correctly estimated parts per actor and on average.

    Each ground-truth pose is scored against the prediction at that frame with
    the smallest mean joint error; frames with no prediction score zero.
    Returns ``({actor: ratio}, average)``.
    """
    limbs = load_limbs() if limbs is None else limbs
    pairs = list(limbs.values()) if isinstance(limbs, dict) else list(limbs)
    pred_frames = _by_frame(pred)
    per_actor = {}
    for g in sorted(gt):
        correct = total = 0
        for t, gpose in gt[g].items():
            total += len(pairs)
            cands = pred_frames.get(t, {})
            if not cands:
                continue
            best = min(cands.values(), key=lambda p: position_distance(gpose, p))
            correct += sum(_limb_correct(gpose, best, a, b, alpha) for a, b in pairs)
        per_actor[g] = correct / total if total else float("nan")
    vals = [v for v in per_actor.values() if not np.isnan(v)]
    return per_actor, float(np.mean(vals)) if vals else float("nan")


def mean_position_error(gt: TrajectorySet, pred: TrajectorySet, threshold=0.5) -> float:
    """Mean distance over CLEAR-matched pairs (MOTP in meters)."""
    return clear_mot(gt, pred, threshold).motp
