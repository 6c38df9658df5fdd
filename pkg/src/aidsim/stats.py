"""Experiment statistics: bootstrap confidence intervals, one-way ANOVA and
Tukey HSD with compact letter display.

All procedures are pure functions of their inputs (bootstrap additionally of
its random stream). Distribution tails come from qdist; integration tests
compare against an independent reference implementation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .qdist import f_pvalue, studentized_range_ppf, studentized_range_sf
from .rng import as_generator


@dataclass(frozen=True)
class SampleGroup:
    """Labelled observations of one experimental level."""

    label: str
    observations: np.ndarray

    def __post_init__(self):
        obs = np.asarray(self.observations, dtype=np.float64)
        object.__setattr__(self, "observations", obs)
        if obs.ndim != 1 or len(obs) == 0:
            raise ValueError(f"group {self.label}: needs a 1-d nonempty sample")
        if not np.all(np.isfinite(obs)):
            raise ValueError(f"group {self.label}: observations must be finite")

    @property
    def n(self) -> int:
        return len(self.observations)

    @property
    def mean(self) -> float:
        return float(np.mean(self.observations))


def _as_groups(groups) -> list[SampleGroup]:
    out = []
    for k, g in enumerate(groups):
        if isinstance(g, SampleGroup):
            out.append(g)
        else:
            out.append(SampleGroup(label=f"g{k}", observations=np.asarray(g)))
    return out


def bootstrap_ci(obs, level: float = 0.90, resamples: int = 1000,
                 stream=None) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean.

    Resamples with replacement, takes the central `level` quantile interval
    of the resample means. Deterministic given the stream. A single
    observation yields a degenerate interval and a warning.
    """
    obs = np.asarray(obs, dtype=np.float64)
    if obs.ndim != 1 or len(obs) == 0:
        raise ValueError("observations must be a nonempty 1-d sample")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    if len(obs) == 1:
        warnings.warn("bootstrap interval from a single observation is degenerate")
        return float(obs[0]), float(obs[0])
    rng = as_generator(stream if stream is not None else 0)
    idx = rng.integers(0, len(obs), size=(resamples, len(obs)))
    means = obs[idx].mean(axis=1)
    alpha = 0.5 * (1.0 - level)
    lo, hi = np.quantile(means, [alpha, 1.0 - alpha])
    return float(lo), float(hi)


def _anova_parts(groups: list[SampleGroup]):
    k = len(groups)
    ns = np.array([g.n for g in groups], dtype=np.float64)
    means = np.array([g.mean for g in groups])
    total_n = ns.sum()
    grand = float(sum(g.observations.sum() for g in groups) / total_n)
    ss_between = float(np.sum(ns * (means - grand) ** 2))
    ss_within = float(sum(np.sum((g.observations - g.mean) ** 2) for g in groups))
    df_between = k - 1
    df_within = int(total_n) - k
    return means, ns, ss_between, ss_within, df_between, df_within


def anova_oneway(groups) -> tuple[float, float]:
    """One-way ANOVA: (F, p) with df (k-1, N-k).

    Zero between-group variance gives F = 0, p = 1; zero within-group
    variance with distinct means gives an infinite F (p = 0).
    """
    groups = _as_groups(groups)
    if len(groups) < 2:
        raise ValueError("ANOVA needs at least two groups")
    for g in groups:
        if g.n < 2:
            raise ValueError(f"group {g.label}: needs n >= 2")
    _, _, ssb, ssw, dfb, dfw = _anova_parts(groups)
    msb = ssb / dfb
    msw = ssw / dfw
    if msw == 0.0:
        if msb == 0.0:
            return 0.0, 1.0
        return float("inf"), 0.0
    f = msb / msw
    return float(f), float(f_pvalue(f, dfb, dfw))


@dataclass(frozen=True)
class TukeyResult:
    labels: tuple
    means: np.ndarray
    n: np.ndarray
    confidence: float
    q_critical: float
    df_within: int
    ms_within: float
    hsd: np.ndarray           # pairwise least significant difference
    p_values: np.ndarray      # pairwise adjusted p-values
    significant: np.ndarray   # pairwise significance at the confidence level
    letters: dict             # label -> letter string (shared letter = not distinct)

    def separated_labels(self) -> list:
        """Labels whose letter set is disjoint from every other group's."""
        out = []
        for lab in self.labels:
            mine = set(self.letters[lab])
            if all(mine.isdisjoint(self.letters[ot])
                   for ot in self.labels if ot != lab):
                out.append(lab)
        return out


def tukey_hsd(groups, confidence: float = 0.95) -> TukeyResult:
    """Tukey honest-significant-difference comparison with letter grouping.

    Pair (i, j) differs when |mean_i - mean_j| exceeds
    q(k, N-k, confidence) * sqrt(MS_within/2 * (1/n_i + 1/n_j)).
    Letters are assigned over mean-sorted groups (ties broken by label) so
    that two groups share a letter exactly when they are not significantly
    different.
    """
    groups = _as_groups(groups)
    if len(groups) < 2:
        raise ValueError("Tukey HSD needs at least two groups")
    for g in groups:
        if g.n < 2:
            raise ValueError(f"group {g.label}: needs n >= 2")
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    means, ns, _, ssw, _, dfw = _anova_parts(groups)
    k = len(groups)
    msw = ssw / dfw
    qc = studentized_range_ppf(confidence, k, dfw)
    hsd = np.zeros((k, k))
    pvals = np.ones((k, k))
    sig = np.zeros((k, k), dtype=bool)
    for i in range(k):
        for j in range(i + 1, k):
            se = np.sqrt(msw * 0.5 * (1.0 / ns[i] + 1.0 / ns[j]))
            hsd[i, j] = hsd[j, i] = qc * se
            diff = abs(means[i] - means[j])
            if se > 0:
                pvals[i, j] = pvals[j, i] = studentized_range_sf(
                    diff / se, k, dfw)
            else:
                pvals[i, j] = pvals[j, i] = 0.0 if diff > 0 else 1.0
            sig[i, j] = sig[j, i] = diff > hsd[i, j]
    letters = _letter_grouping([g.label for g in groups], means, sig)
    return TukeyResult(
        labels=tuple(g.label for g in groups), means=means,
        n=ns.astype(np.int64), confidence=confidence, q_critical=float(qc),
        df_within=dfw, ms_within=float(msw), hsd=hsd, p_values=pvals,
        significant=sig, letters=letters)


def _letter_grouping(labels, means, sig) -> dict:
    """Compact letter display via insert-and-absorb.

    Start from one letter covering everything; each significant pair splits
    every letter containing both; absorbed (subset) letters are dropped.
    Groups then share a letter exactly when they are not significantly
    different. Deterministic: groups are processed in mean order with label
    tie-breaks, letters ordered by their most upstream member.
    """
    k = len(labels)
    order = sorted(range(k), key=lambda i: (means[i], str(labels[i])))
    sets = [set(range(k))]
    for a_pos in range(k):
        for b_pos in range(a_pos + 1, k):
            i, j = order[a_pos], order[b_pos]
            if not sig[i, j]:
                continue
            nxt = []
            for s in sets:
                if i in s and j in s:
                    nxt.append(s - {i})
                    nxt.append(s - {j})
                else:
                    nxt.append(s)
            # absorb: drop sets contained in another
            nxt.sort(key=len, reverse=True)
            kept = []
            for s in nxt:
                if s and not any(s <= t for t in kept):
                    kept.append(s)
            sets = kept
    rank = {g: pos for pos, g in enumerate(order)}
    sets.sort(key=lambda s: (min(rank[g] for g in s),
                             -len(s), sorted(rank[g] for g in s)))
    letters = {lab: "" for lab in labels}
    for idx, s in enumerate(sets):
        letter = _letter_symbol(idx)
        for g in sorted(s, key=lambda g: rank[g]):
            letters[labels[g]] += letter
    return letters


def _letter_symbol(idx: int) -> str:
    out = ""
    idx += 1
    while idx > 0:
        idx, rem = divmod(idx - 1, 26)
        out = chr(ord("A") + rem) + out
    return out
