"""Rank statistics for comparing acquisition rules across benchmarks.

Pairwise one-sided Mann-Whitney tests on final values produce a partial
ranking per benchmark; ties are re-tested on the area under the progress
curve; Borda scores (competitors ranked strictly below) are summed across
benchmarks into the aggregate ranking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from math import comb, erf, sqrt

import numpy as np

EXACT_MIN_SIZE = 8
EXACT_TOTAL = 16


def _rank_with_ties(pooled: np.ndarray) -> np.ndarray:
    order = np.argsort(pooled, kind="mergesort")
    ranks = np.empty(len(pooled))
    sorted_vals = pooled[order]
    i = 0
    while i < len(pooled):
        j = i
        while j + 1 < len(pooled) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _u_statistic(ranks_a: np.ndarray, n: int) -> float:
    return float(np.sum(ranks_a) - n * (n + 1) / 2.0)


def _normal_sf(z: float) -> float:
    return 0.5 * (1.0 - erf(z / sqrt(2.0)))


def mann_whitney_u(a, b, side: str = "greater") -> tuple[float, float]:
    """U statistic of ``a`` and the p-value for the requested alternative.

    Exact permutation enumeration for small samples (min size ≤ 8 and total
    ≤ 16), otherwise a tie-corrected normal approximation with continuity
    correction.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise ValueError("samples must be nonempty")
    if side not in ("greater", "less", "two-sided"):
        raise ValueError(f"unknown side {side!r}")
    n, m = a.size, b.size
    pooled = np.concatenate([a, b])
    ranks = _rank_with_ties(pooled)
    u_obs = _u_statistic(ranks[:n], n)

    if min(n, m) <= EXACT_MIN_SIZE and n + m <= EXACT_TOTAL:
        total = comb(n + m, n)
        count_ge = 0
        count_le = 0
        for idx in combinations(range(n + m), n):
            u = _u_statistic(ranks[list(idx)], n)
            if u >= u_obs - 1e-12:
                count_ge += 1
            if u <= u_obs + 1e-12:
                count_le += 1
        p_greater = count_ge / total
        p_less = count_le / total
    else:
        mean = n * m / 2.0
        tie_term = 0.0
        _, counts = np.unique(pooled, return_counts=True)
        tie_term = np.sum(counts**3 - counts)
        N = n + m
        var = n * m / 12.0 * ((N + 1) - tie_term / (N * (N - 1)))
        if var <= 0:
            p_greater = p_less = 1.0
        else:
            sd = sqrt(var)
            p_greater = _normal_sf((u_obs - mean - 0.5) / sd)
            p_less = _normal_sf((mean - u_obs - 0.5) / sd)

    if side == "greater":
        return u_obs, min(p_greater, 1.0)
    if side == "less":
        return u_obs, min(p_less, 1.0)
    return u_obs, min(2.0 * min(p_greater, p_less), 1.0)


def auc(trace_or_values) -> float:
    """Area under the progress curve: rectangle-rule sum of per-iteration values."""
    if hasattr(trace_or_values, "objective_series"):
        trace_or_values = trace_or_values.objective_series()
    return float(np.sum(np.asarray(trace_or_values, dtype=float)))


@dataclass
class StatsReport:
    rules: list[str]
    benchmarks: list[str]
    alpha: float
    win_value: dict = field(default_factory=dict)   # bench -> matrix (list of lists)
    win_auc: dict = field(default_factory=dict)
    borda: dict = field(default_factory=dict)       # bench -> {rule: score}
    aggregate: dict = field(default_factory=dict)   # rule -> total score
    ranking: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "schema": 1,
            "kind": "stats-report",
            "rules": self.rules,
            "benchmarks": self.benchmarks,
            "alpha": self.alpha,
            "win_value": self.win_value,
            "win_auc": self.win_auc,
            "borda": self.borda,
            "aggregate": self.aggregate,
            "ranking": self.ranking,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "StatsReport":
        if payload.get("schema") != 1 or payload.get("kind") != "stats-report":
            raise ValueError("unknown report schema")
        return cls(
            rules=payload["rules"],
            benchmarks=payload["benchmarks"],
            alpha=payload["alpha"],
            win_value=payload["win_value"],
            win_auc=payload["win_auc"],
            borda=payload["borda"],
            aggregate=payload["aggregate"],
            ranking=payload["ranking"],
        )


def _pairwise_wins(samples: dict[str, np.ndarray], rules: list[str], alpha: float):
    k = len(rules)
    wins = np.zeros((k, k), dtype=int)
    for i, ri in enumerate(rules):
        for j, rj in enumerate(rules):
            if i == j:
                continue
            _, p = mann_whitney_u(samples[ri], samples[rj], side="greater")
            if p < alpha:
                wins[i, j] = 1
    return wins


def _levels_from_wins(order_keys: list[tuple], rules: list[str]) -> list[list[str]]:
    """Group rules into ranked levels by descending sort key."""
    levels: list[list[str]] = []
    last_key = None
    for key, rule in sorted(zip(order_keys, rules), key=lambda t: t[0], reverse=True):
        if last_key is None or key != last_key:
            levels.append([rule])
        else:
            levels[-1].append(rule)
        last_key = key
    return levels


def stratified_ranking(results: dict, alpha: float = 5e-4) -> StatsReport:
    """Rank rules from per-seed outcomes.

    ``results[rule][benchmark]`` must be a mapping with ``final`` and ``auc``
    arrays of equal length across rules within a benchmark. Final-value wins
    rank first; ties are broken by wins on AUC; Borda is computed on the
    merged ranking and summed across benchmarks.
    """
    rules = sorted(results.keys())
    benchmarks = sorted({b for r in rules for b in results[r].keys()})
    report = StatsReport(rules=rules, benchmarks=benchmarks, alpha=alpha)
    aggregate = {r: 0 for r in rules}

    for bench in benchmarks:
        finals = {}
        aucs = {}
        length = None
        for rule in rules:
            entry = results[rule].get(bench)
            if entry is None:
                raise ValueError(f"rule {rule!r} missing benchmark {bench!r}")
            f = np.asarray(entry["final"], dtype=float)
            a = np.asarray(entry["auc"], dtype=float)
            if length is None:
                length = f.size
            if f.size != length or a.size != length:
                raise ValueError(f"unequal replicate counts on {bench!r}")
            finals[rule] = f
            aucs[rule] = a

        wv = _pairwise_wins(finals, rules, alpha)
        wa = _pairwise_wins(aucs, rules, alpha)
        report.win_value[bench] = wv.tolist()
        report.win_auc[bench] = wa.tolist()

        value_wins = wv.sum(axis=1)
        levels = _levels_from_wins([(w,) for w in value_wins], rules)

        merged: list[list[str]] = []
        for level in levels:
            if len(level) == 1:
                merged.append(level)
                continue
            idx = [rules.index(r) for r in level]
            sub = wa[np.ix_(idx, idx)].sum(axis=1)
            merged.extend(_levels_from_wins([(w,) for w in sub], level))

        scores = {}
        below = 0
        for level in reversed(merged):
            for rule in level:
                scores[rule] = below
            below += len(level)
        report.borda[bench] = scores
        for rule in rules:
            aggregate[rule] += scores[rule]

    report.aggregate = aggregate
    report.ranking = sorted(rules, key=lambda r: (-aggregate[r], r))
    return report
