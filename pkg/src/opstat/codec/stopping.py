"""Multi-round codec runs and the four stopping conditions.

Each round hits the object with a fresh Poisson batch (arrival times in
``[k, k + 1)`` for round ``k``), accumulates it with earlier batches,
re-tessellates and decodes. The stopping conditions are statistical
surrogates:

1. stationarity: hit counts per time slice pass a chi-squared uniformity test;
2. vanishing gradient: the IoU change between the last two rounds is below ``iou_eps``;
3. vanishing intersection: the area of cells straddling the object boundary
   is below ``band_threshold``;
4. independence: the label sequence in arrival order passes a Wald-Wolfowitz
   runs test.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..errors import ValidationError
from .objects import DEFAULT_RESOLUTION, GeometricObject, PolygonUnion, fidelity
from .tessellation import HitSet, Tessellation, decode, encode, tessellate


@dataclass
class RoundRecord:
    hits: HitSet
    tessellation: Tessellation
    reconstruction: PolygonUnion
    iou: float


@dataclass
class CodecRun:
    obj: GeometricObject
    intensity: float
    seed: int
    rounds: list = field(default_factory=list)

    @property
    def hits(self) -> HitSet:
        return self.rounds[-1].hits

    @property
    def ious(self) -> list:
        return [r.iou for r in self.rounds]


def run_codec(
    obj: GeometricObject, intensity: float, rounds: int, seed, ramp: float = 0.0,
    resolution: int = DEFAULT_RESOLUTION, resample: bool = False,
) -> CodecRun:
    """Encode/decode over ``rounds`` accumulating batches of hits.

    With ``resample`` each round decodes from an independent hit set of the
    accumulated intensity instead of the encoding hits themselves.
    """
    if rounds < 1:
        raise ValidationError("need at least one round")
    run = CodecRun(obj, float(intensity), int(seed))
    acc = None
    for k in range(rounds):
        batch = encode(obj, intensity, seed, ramp=ramp, t0=float(k), stream=(0, k))
        acc = batch if acc is None else acc.merged(batch)
        source = acc
        if resample:
            source = encode(obj, intensity * (k + 1), seed, stream=(1, k))
        tess = tessellate(source)
        recon = decode(tess, source)
        run.rounds.append(RoundRecord(acc, tess, recon, fidelity(obj, recon, resolution)))
    return run


def runs_test(labels) -> float:
    """Two-sided p-value of the Wald-Wolfowitz runs test (normal approximation)."""
    x = np.asarray(labels, dtype=bool)
    n1 = int(x.sum())
    n2 = len(x) - n1
    if n1 == 0 or n2 == 0:
        return 1.0
    n = n1 + n2
    runs = 1 + int(np.count_nonzero(x[1:] != x[:-1]))
    mean = 2.0 * n1 * n2 / n + 1.0
    var = 2.0 * n1 * n2 * (2.0 * n1 * n2 - n) / (n * n * (n - 1.0))
    if var <= 0:
        return 1.0
    z = (runs - mean) / math.sqrt(var)
    return float(2.0 * stats.norm.sf(abs(z)))


def stationarity_test(times, t_end: float, n_slices: int) -> float:
    """Chi-squared p-value for uniform hit counts over equal time slices."""
    counts, _ = np.histogram(times, bins=n_slices, range=(0.0, t_end))
    if counts.sum() == 0:
        return 1.0
    return float(stats.chisquare(counts).pvalue)


def boundary_band_fraction(tess: Tessellation, obj: GeometricObject) -> float:
    """Area of cells the object boundary passes through.

    A cell counts as crossed when the indicator disagrees among its site,
    vertices and edge midpoints.
    """
    counts = np.diff(tess.vert_ptr)
    owner = np.repeat(np.arange(tess.n_sites), counts)
    nxt = np.arange(len(tess.verts)) + 1
    last = tess.vert_ptr[1:] - 1
    nxt[last[counts > 0]] = tess.vert_ptr[:-1][counts > 0]
    mids = 0.5 * (tess.verts + tess.verts[nxt])
    inside_v = obj.indicator(tess.verts).astype(int)
    inside_m = obj.indicator(mids).astype(int)
    inside_s = obj.indicator(tess.sites).astype(int)
    n_in = np.bincount(owner, inside_v + inside_m, minlength=tess.n_sites) + inside_s
    n_pts = 2 * counts + 1
    crossed = (n_in > 0) & (n_in < n_pts)
    return float(math.fsum(tess.areas()[crossed]))


@dataclass
class StoppingReport:
    stationary: bool
    gradient_vanished: bool
    intersection_vanished: bool
    independent: bool
    details: dict

    @property
    def stop(self) -> bool:
        return self.stationary and self.gradient_vanished and self.intersection_vanished and self.independent

    def conditions(self) -> dict:
        return {
            "1_stationary_poisson": self.stationary,
            "2_grad_s_zero": self.gradient_vanished,
            "3_intersection_zero": self.intersection_vanished,
            "4_independent": self.independent,
        }

    def to_dict(self) -> dict:
        return {"stop": self.stop, "conditions": self.conditions(), "details": self.details,
                "note": "condition 3 uses the boundary-band surrogate"}


def stopping_check(
    run: CodecRun, alpha: float = 0.01, iou_eps: float = 0.01, band_threshold: float = 0.1,
    slices_per_round: int = 5,
) -> tuple[bool, StoppingReport]:
    """Evaluate the four stopping conditions on a run with at least two rounds."""
    if len(run.rounds) < 2:
        raise ValidationError("not enough rounds: stopping check needs at least 2")
    hits = run.hits
    n_rounds = len(run.rounds)
    p_stat = stationarity_test(hits.times, float(n_rounds), slices_per_round * n_rounds)
    d_iou = run.rounds[-1].iou - run.rounds[-2].iou
    band = boundary_band_fraction(run.rounds[-1].tessellation, run.obj)
    order = np.argsort(hits.times, kind="stable")
    p_runs = runs_test(hits.labels[order])
    report = StoppingReport(
        stationary=p_stat >= alpha,
        gradient_vanished=abs(d_iou) < iou_eps,
        intersection_vanished=band < band_threshold,
        independent=p_runs >= alpha,
        details={
            "stationarity_pvalue": p_stat,
            "iou_change": d_iou,
            "boundary_band_fraction": band,
            "runs_pvalue": p_runs,
            "alpha": alpha,
            "iou_eps": iou_eps,
            "band_threshold": band_threshold,
        },
    )
    return report.stop, report
