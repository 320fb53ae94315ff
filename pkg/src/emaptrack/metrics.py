"""CLEAR-MOT style evaluation (IDSW, MOTA, FP, FN) plus IDF1, and the mode ablation."""

from __future__ import annotations

import csv
import io
from collections import Counter, defaultdict
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .association import iou_matrix, max_weight_matching
from .emap import EmapMode
from .tracker import FrameBundle, TrackerConfig, TrackRow, run_sequence
from .geometry import CameraModel

ABLATION_ORDER = (EmapMode.BASELINE, EmapMode.TRANSLATION_ONLY, EmapMode.ROTATION_ONLY, EmapMode.FULL)


@dataclass
class FrameMatch:
    frame: int
    pairs: List[Tuple[int, int]]  # (gt id, pred id)
    missed: List[int]  # gt ids without a partner
    false_positives: List[int]  # pred ids without a partner


@dataclass
class Correspondences:
    frames: List[FrameMatch]
    num_gt: int
    num_pred: int
    # frames in which gt id g and pred id p overlap at the threshold
    overlap: Dict[Tuple[int, int], int] = field(default_factory=dict)


@dataclass
class EvalReport:
    name: str
    idsw: float
    mota: float
    idf1: float
    fp: float
    fn: float
    gt: float
    matches: float

    def as_row(self):
        return [self.name, self.idsw, self.mota, self.idf1, self.fp, self.fn, self.gt, self.matches]


def _by_frame(rows: Iterable[TrackRow]) -> Dict[int, List[TrackRow]]:
    out = defaultdict(list)
    for r in rows:
        out[r.frame].append(r)
    return out


def match_frames(pred: Sequence[TrackRow], gt: Sequence[TrackRow], iou_thresh: float = 0.5) -> Correspondences:
    """Per-frame gt/prediction correspondences.

    A (gt, pred) pair from the last frame the gt was matched is kept while
    its IoU stays at or above the threshold; the rest is solved as a
    maximum-IoU assignment.
    """
    pred_f, gt_f = _by_frame(pred), _by_frame(gt)
    last: Dict[int, int] = {}
    overlap: Counter = Counter()
    frames = []
    for fi in sorted(set(pred_f) | set(gt_f)):
        g_rows = sorted(gt_f.get(fi, []), key=lambda r: r.id)
        p_rows = sorted(pred_f.get(fi, []), key=lambda r: r.id)
        g_ids = [r.id for r in g_rows]
        p_ids = [r.id for r in p_rows]
        ious = iou_matrix([r.box for r in g_rows], [r.box for r in p_rows])
        ok = ious >= iou_thresh
        for gi, pj in zip(*np.nonzero(ok)):
            overlap[(g_ids[gi], p_ids[pj])] += 1

        pairs = []
        g_free = set(range(len(g_ids)))
        p_free = set(range(len(p_ids)))
        p_index = {pid: j for j, pid in enumerate(p_ids)}
        for gi, gid in enumerate(g_ids):
            pj = p_index.get(last.get(gid))
            if pj is not None and pj in p_free and ok[gi, pj]:
                pairs.append((gi, pj))
                g_free.discard(gi)
                p_free.discard(pj)

        gl, pl = sorted(g_free), sorted(p_free)
        if gl and pl:
            sub = np.where(ok[np.ix_(gl, pl)], ious[np.ix_(gl, pl)], 0.0)
            for a, b in max_weight_matching(sub):
                pairs.append((gl[a], pl[b]))
                g_free.discard(gl[a])
                p_free.discard(pl[b])

        id_pairs = sorted((g_ids[gi], p_ids[pj]) for gi, pj in pairs)
        for gid, pid in id_pairs:
            last[gid] = pid
        frames.append(FrameMatch(
            fi, id_pairs, [g_ids[i] for i in sorted(g_free)], [p_ids[j] for j in sorted(p_free)]
        ))
    return Correspondences(frames, len(gt), len(pred), dict(overlap))


def count_switches(corr: Correspondences) -> int:
    """Changes of a gt identity's partner between its consecutive matched frames."""
    prev: Dict[int, int] = {}
    n = 0
    for fm in corr.frames:
        for gid, pid in fm.pairs:
            if gid in prev and prev[gid] != pid:
                n += 1
            prev[gid] = pid
    return n


def identity_true_positives(corr: Correspondences) -> int:
    """Frames covered by the best one-to-one gt/prediction identity pairing."""
    if not corr.overlap:
        return 0
    g_ids = sorted({g for g, _ in corr.overlap})
    p_ids = sorted({p for _, p in corr.overlap})
    gi = {g: i for i, g in enumerate(g_ids)}
    pi = {p: j for j, p in enumerate(p_ids)}
    w = np.zeros((len(g_ids), len(p_ids)))
    for (g, p), c in corr.overlap.items():
        w[gi[g], pi[p]] = c
    rows, cols = linear_sum_assignment(-w)
    return int(w[rows, cols].sum())


def summarize(corr: Correspondences, name: str = "") -> EvalReport:
    matches = sum(len(fm.pairs) for fm in corr.frames)
    fn = corr.num_gt - matches
    fp = corr.num_pred - matches
    idsw = count_switches(corr)
    mota = 1.0 - (fn + fp + idsw) / corr.num_gt if corr.num_gt else float("nan")
    idtp = identity_true_positives(corr)
    denom = corr.num_gt + corr.num_pred
    idf1 = 2.0 * idtp / denom if denom else 1.0
    return EvalReport(name, idsw, mota, idf1, fp, fn, corr.num_gt, matches)


def evaluate(pred: Sequence[TrackRow], gt: Sequence[TrackRow], iou_thresh: float = 0.5, name: str = "") -> EvalReport:
    return summarize(match_frames(pred, gt, iou_thresh), name)


def average_reports(reports: Sequence[EvalReport], name: str = "mean") -> EvalReport:
    """Per-field mean over sequences (MOTA recomputed from the mean counts)."""
    n = len(reports)
    if n == 0:
        raise ValueError("no reports to average")
    mean = {k: sum(getattr(r, k) for r in reports) / n for k in ("idsw", "idf1", "fp", "fn", "gt", "matches")}
    mota = 1.0 - (mean["fn"] + mean["fp"] + mean["idsw"]) / mean["gt"] if mean["gt"] else float("nan")
    return EvalReport(name, mean["idsw"], mota, mean["idf1"], mean["fp"], mean["fn"], mean["gt"], mean["matches"])


# -- ablation ----------------------------------------------------------------


@dataclass
class SequenceInput:
    name: str
    frames: Iterable[FrameBundle]  # must be re-iterable
    camera: CameraModel
    gt: List[TrackRow]


@dataclass
class AblationRow:
    mode: EmapMode
    per_sequence: List[EvalReport]
    mean: EvalReport

    @property
    def total_idsw(self) -> float:
        return sum(r.idsw for r in self.per_sequence)


def ablate(sequences: Sequence[SequenceInput], cfg: TrackerConfig, iou_thresh: float = 0.5,
           include_extrapolated: bool = True) -> List[AblationRow]:
    """Run every mode on identical inputs; rows follow Baseline/Trans/Rot/Full."""
    rows = []
    for mode in ABLATION_ORDER:
        reports = []
        for seq in sequences:
            table = run_sequence(seq.frames, seq.camera, replace(cfg, mode=mode))
            if not include_extrapolated:
                table = [r for r in table if not r.extrapolated]
            reports.append(evaluate(table, seq.gt, iou_thresh, seq.name))
        rows.append(AblationRow(mode, reports, average_reports(reports, mode.label)))
    return rows


# -- report formatting -------------------------------------------------------

COLUMNS = ("name", "IDSW", "MOTA", "IDF1", "FP", "FN", "GT", "matches")


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if float(v).is_integer():
        return str(int(v))
    return f"{v:.4f}"


def format_table(reports: Sequence[EvalReport], title: str = "") -> str:
    cells = [list(COLUMNS)] + [[_fmt(v) for v in r.as_row()] for r in reports]
    widths = [max(len(row[i]) for row in cells) for i in range(len(COLUMNS))]
    lines = [title] if title else []
    for k, row in enumerate(cells):
        lines.append("  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(row, widths))))
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def reports_to_csv(reports: Sequence[EvalReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in reports:
        w.writerow([_fmt(v) for v in r.as_row()])
    return buf.getvalue()


def format_ablation(rows: Sequence[AblationRow]) -> str:
    parts = [format_table([r.mean for r in rows], "Ablation (mean over sequences)")]
    for r in rows:
        parts.append(format_table(r.per_sequence, f"{r.mode.label}"))
    return "\n".join(parts)


def plot_data_csv(reports: Sequence[EvalReport]) -> str:
    """Per-sequence (IDSW, IDF1) pairs; IDF1 stands in for HOTA."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sequence", "idsw", "hota_proxy_idf1"])
    for r in reports:
        w.writerow([r.name, _fmt(r.idsw), f"{r.idf1:.6f}"])
    return buf.getvalue()
