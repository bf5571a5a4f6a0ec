"""Normalized-score model selection.

Candidates are compared by squared metrics normalized to [0, 1] across the
candidate set, which makes the choice invariant to positive affine
rescaling of any raw metric. Two presets: interpolation error + sparsity
(no extrapolation data), and interpolation + extrapolation error (40
labeled extrapolation points, sparsity excluded).
"""

import csv
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SelectionWeights:
    alpha: float  # interpolation-validation error
    beta: float  # sparsity
    gamma: float = 0.0  # extrapolation-validation error

    def __post_init__(self):
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise ValueError("selection weights must be nonnegative")


VINT_S = SelectionWeights(alpha=0.5, beta=0.5, gamma=0.0)
VINT_EX = SelectionWeights(alpha=0.5, beta=0.0, gamma=0.5)


def normalize(values) -> list:
    """Map values to [0, 1] via (v - min)/(max - min) over finite entries.

    Non-finite entries (failed candidates) map to 1.0 so they rank last; a
    degenerate all-equal list maps to 0.
    """
    values = [float(v) for v in values]
    if not values:
        raise ValueError("cannot normalize an empty list")
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return [1.0] * len(values)
    lo, hi = min(finite), max(finite)
    span = hi - lo
    out = []
    for v in values:
        if not math.isfinite(v):
            out.append(1.0)
        elif span == 0.0:
            out.append(0.0)
        else:
            out.append((v - lo) / span)
    return out


def scores(candidates, w: SelectionWeights) -> list:
    """Selection score of every candidate: alpha*vint~^2 + beta*s~^2 +
    gamma*vex~^2 with tilde denoting normalization across the set."""
    if not candidates:
        raise ValueError("no candidates to select from")
    v_int = normalize([c.v_int for c in candidates])
    s = normalize([c.sparsity for c in candidates])
    if w.gamma > 0.0:
        if any(c.v_ex is None for c in candidates):
            raise ValueError(
                "extrapolation-validation weight requires v_ex on every candidate")
        v_ex = normalize([c.v_ex for c in candidates])
    else:
        v_ex = [0.0] * len(candidates)
    return [w.alpha * vi ** 2 + w.beta * si ** 2 + w.gamma * ve ** 2
            for vi, si, ve in zip(v_int, s, v_ex)]


def select(candidates, w: SelectionWeights):
    """Candidate with the lowest selection score.

    Ties break by smaller sparsity (only when sparsity carries weight, so
    sparsity-free selections stay insensitive to it), then smaller
    interpolation error, then smaller lambda, then smaller seed; the choice
    is independent of list order.
    """
    sc = scores(candidates, w)
    best = min((s, c.sparsity if w.beta > 0.0 else 0.0, c.v_int, c.lam,
                c.seed, i)
               for i, (s, c) in enumerate(zip(sc, candidates)))
    return candidates[best[-1]]


def write_report(candidates, w: SelectionWeights, chosen, path):
    """Selection report: the chosen candidate plus every candidate's
    normalized metrics and score."""
    sc = scores(candidates, w)
    v_int = normalize([c.v_int for c in candidates])
    s = normalize([c.sparsity for c in candidates])
    v_ex = (normalize([c.v_ex for c in candidates])
            if w.gamma > 0.0 else [""] * len(candidates))
    with open(path, "w", newline="") as fh:
        fh.write(f"# selection alpha={w.alpha} beta={w.beta} gamma={w.gamma}\n")
        wr = csv.writer(fh)
        wr.writerow(["chosen", "lambda", "depth", "seed", "v_int", "v_ex",
                     "sparsity", "v_int_norm", "v_ex_norm", "sparsity_norm",
                     "score", "network_path"])
        for c, vi, si, ve, score in zip(candidates, v_int, s, v_ex, sc):
            wr.writerow([
                int(c is chosen), repr(c.lam), c.depth, c.seed,
                repr(c.v_int), "" if c.v_ex is None else repr(c.v_ex),
                repr(c.sparsity), repr(vi), ve if ve == "" else repr(ve),
                repr(si), repr(score), c.path,
            ])
