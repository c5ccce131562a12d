"""Batch explanation: risk ratio, itemset mining, and ranking.

Explanations are attribute-value combinations that are common among
outlier points (high outlier support) and disproportionately rare among
inliers (high relative risk ratio).  The batch strategy is three-staged
and cardinality-aware: single attribute values are screened first with
cheap counting passes, a prefix tree is mined only over the (small)
outlier set restricted to the surviving values, and the (large) inlier
set is then touched once, counting only the surviving combinations.

An exhaustive enumerator with identical semantics is kept as a test
oracle, and an unoptimized mine-both-sides-then-join baseline is kept for
work comparisons.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, replace

import numpy as np

from .core import NULL_ID, AttributeDictionary, ExplanationRecord

logger = logging.getLogger(__name__)

ItemSet = frozenset[int]


def risk_ratio(ao: float, ai: float, bo: float, bi: float) -> float:
    """(ao/(ao+ai)) / (bo/(bo+bi)): how much more likely a point carrying
    the combination is to be an outlier than the rest of the population.

    Conventions for empty cells: a combination absent from outliers scores
    0; one present in outliers but absent from "other outliers" (bo = 0)
    scores +inf; 0/0 collapses to 0.
    """
    if min(ao, ai, bo, bi) < 0:
        raise ValueError("counts must be nonnegative")
    if ao == 0.0:
        return 0.0
    numerator = ao / (ao + ai)
    if bo == 0.0:
        return math.inf
    return numerator / (bo / (bo + bi))


@dataclass
class AttributeCounts:
    """Per-attribute-id occurrence counts in each class."""

    ao: np.ndarray
    ai: np.ndarray
    outlier_total: float
    inlier_total: float


def _flat_counts(ids: np.ndarray, n_items: int) -> np.ndarray:
    flat = ids.ravel()
    flat = flat[flat != NULL_ID]
    return np.bincount(flat, minlength=n_items).astype(np.float64)


def count_single_attributes(
    outlier_ids: np.ndarray, inlier_ids: np.ndarray, n_items: int
) -> AttributeCounts:
    """Exact single-value counts from one pass over each id matrix."""
    return AttributeCounts(
        ao=_flat_counts(outlier_ids, n_items),
        ai=_flat_counts(inlier_ids, n_items),
        outlier_total=float(outlier_ids.shape[0]),
        inlier_total=float(inlier_ids.shape[0]),
    )


@dataclass
class ExplainStats:
    """Work counters for comparing explanation strategies."""

    stage1_tests: int = 0
    stage3_tests: int = 0
    inlier_expansions: int = 0

    @property
    def num_tests(self) -> int:
        return self.stage1_tests + self.stage3_tests


# ---------------------------------------------------------------------------
# FP-tree construction and mining


class FpNode:
    __slots__ = ("item", "count", "parent", "children")

    def __init__(self, item: int | None, parent: "FpNode | None"):
        self.item = item
        self.count = 0.0
        self.parent = parent
        self.children: dict[int, FpNode] = {}


class FpTree:
    """Frequency-descending prefix tree with per-item header lists."""

    def __init__(self, rank: dict[int, int]):
        self.root = FpNode(None, None)
        self.rank = rank  # item -> position in frequency-descending order
        self.header: dict[int, list[FpNode]] = {}

    def insert(self, items: list[int], weight: float) -> int:
        """Insert one transaction (already rank-sorted); returns the number
        of nodes walked."""
        node = self.root
        for item in items:
            child = node.children.get(item)
            if child is None:
                child = FpNode(item, node)
                node.children[item] = child
                self.header.setdefault(item, []).append(child)
            child.count += weight
            node = child
        return len(items)

    def item_order(self) -> list[int]:
        return sorted(self.header, key=lambda i: self.rank[i])


def _tree_from_transactions(
    transactions: list[tuple[int, ...]],
    weights: list[float] | None,
    min_count: float,
    stats: ExplainStats | None = None,
) -> FpTree:
    counts: dict[int, float] = {}
    if weights is None:
        for txn in transactions:
            for item in txn:
                counts[item] = counts.get(item, 0.0) + 1.0
    else:
        for txn, w in zip(transactions, weights):
            for item in txn:
                counts[item] = counts.get(item, 0.0) + w
    frequent = {i for i, c in counts.items() if c >= min_count}
    order = sorted(frequent, key=lambda i: (-counts[i], i))
    rank = {item: pos for pos, item in enumerate(order)}
    tree = FpTree(rank)
    walked = 0
    for pos, txn in enumerate(transactions):
        kept = sorted((i for i in txn if i in frequent), key=rank.__getitem__)
        if kept:
            walked += tree.insert(kept, 1.0 if weights is None else weights[pos])
    if stats is not None:
        stats.inlier_expansions += walked
    return tree


def mine_tree(
    tree: FpTree, min_count: float, stats: ExplainStats | None = None
) -> dict[ItemSet, float]:
    """Recursive conditional-tree mining; exact counts for every itemset
    whose count is at least min_count."""
    out: dict[ItemSet, float] = {}
    _mine(tree, min_count, (), out, stats)
    return out


def _mine(
    tree: FpTree,
    min_count: float,
    suffix: tuple[int, ...],
    out: dict[ItemSet, float],
    stats: ExplainStats | None,
) -> None:
    # least-frequent first, so conditional trees shrink fastest
    for item in reversed(tree.item_order()):
        nodes = tree.header[item]
        support = sum(n.count for n in nodes)
        if support < min_count:
            continue
        itemset = suffix + (item,)
        out[frozenset(itemset)] = support
        # conditional pattern base: prefix paths above each node
        paths: list[tuple[tuple[int, ...], float]] = []
        for node in nodes:
            path = []
            parent = node.parent
            while parent is not None and parent.item is not None:
                path.append(parent.item)
                parent = parent.parent
            if path:
                paths.append((tuple(reversed(path)), node.count))
        if not paths:
            continue
        cond = _tree_from_transactions(
            [p for p, _ in paths], [w for _, w in paths], min_count, stats
        )
        if cond.header:
            _mine(cond, min_count, itemset, out, stats)


def fpgrowth(
    transactions: list[tuple[int, ...]] | list[frozenset[int]],
    min_count: float,
    stats: ExplainStats | None = None,
) -> dict[ItemSet, float]:
    """All itemsets with count >= min_count, with exact counts."""
    if min_count <= 0:
        raise ValueError("min_count must be positive")
    txns = [tuple(set(t)) for t in transactions]
    tree = _tree_from_transactions(txns, None, min_count, stats)
    return mine_tree(tree, min_count, stats)


# ---------------------------------------------------------------------------
# candidate counting over a large id matrix


def count_itemsets_in_matrix(
    ids: np.ndarray,
    itemsets: list[ItemSet],
    stats: ExplainStats | None = None,
) -> dict[ItemSet, float]:
    """Count each candidate itemset's occurrences in the rows of ids.

    Rows are intersected with the candidates' combined alphabet first (one
    vectorized pass), so rows containing no candidate item are never
    walked.  The walk itself descends a trie of the candidates.
    """
    result = {s: 0.0 for s in itemsets}
    if not itemsets or ids.shape[0] == 0:
        return result
    alphabet = np.array(sorted(set().union(*itemsets)), dtype=ids.dtype)
    order = {int(item): pos for pos, item in enumerate(alphabet)}

    # trie over rank-sorted itemsets; terminal nodes point at their itemset
    trie: dict = {}
    for s in itemsets:
        node = trie
        for item in sorted(s, key=order.__getitem__):
            node = node.setdefault(item, {})
        node[None] = s

    present = np.isin(ids, alphabet)
    rows = np.nonzero(present.any(axis=1))[0]
    expansions = 0
    for row in rows:
        items = sorted(
            (int(v) for v in ids[row][present[row]]), key=order.__getitem__
        )
        # DFS: at each trie node, try every remaining item of the row
        stack = [(trie, 0)]
        while stack:
            node, start = stack.pop()
            hit = node.get(None)
            if hit is not None:
                result[hit] += 1.0
            for idx in range(start, len(items)):
                child = node.get(items[idx])
                if child is not None:
                    expansions += 1
                    stack.append((child, idx + 1))
    if stats is not None:
        stats.inlier_expansions += expansions
    return result


# ---------------------------------------------------------------------------
# the three-stage cardinality-aware strategy


def _matrix_transactions(ids: np.ndarray, keep: set[int] | None) -> list[tuple[int, ...]]:
    txns = []
    for row in ids:
        if keep is None:
            txn = tuple(int(v) for v in row if v != NULL_ID)
        else:
            txn = tuple(int(v) for v in row if v != NULL_ID and int(v) in keep)
        txns.append(txn)
    return txns


def _decode_items(itemset: ItemSet, dictionary: AttributeDictionary) -> tuple:
    return tuple(sorted(dictionary.decode(i) for i in itemset))


def _build_record(
    itemset: ItemSet,
    ao: float,
    ai: float,
    n_out: float,
    n_in: float,
    dictionary: AttributeDictionary,
    flags: tuple[str, ...] = (),
) -> ExplanationRecord:
    bo, bi = n_out - ao, n_in - ai
    return ExplanationRecord(
        items=_decode_items(itemset, dictionary),
        ao=ao,
        ai=ai,
        bo=bo,
        bi=bi,
        outlier_support=ao / n_out if n_out else 0.0,
        risk_ratio=risk_ratio(ao, ai, bo, bi),
        flags=flags,
    )


def explain_batch(
    outlier_ids: np.ndarray,
    inlier_ids: np.ndarray,
    dictionary: AttributeDictionary,
    min_support: float,
    min_risk_ratio: float,
    strict_subsets: bool = False,
    stats: ExplainStats | None = None,
) -> list[ExplanationRecord]:
    """Cardinality-aware explanation over labeled id matrices.

    Stage 1 screens single attribute values by outlier support and risk
    ratio; stage 2 mines combinations over the outliers restricted to the
    survivors; stage 3 counts the surviving combinations once over the
    inliers and drops those whose risk ratio falls below threshold.  In
    strict mode every subset of a reported combination must also clear the
    risk-ratio bar (the default checks singletons and the full set, which
    is what the staged strategy prunes by).
    """
    if stats is None:
        stats = ExplainStats()
    n_out = outlier_ids.shape[0]
    n_in = inlier_ids.shape[0]
    if n_out == 0:
        logger.warning("explain_batch called with zero outliers; nothing to explain")
        return []
    n_items = int(
        max(outlier_ids.max(initial=-1), inlier_ids.max(initial=-1))
    ) + 1
    counts = count_single_attributes(outlier_ids, inlier_ids, n_items)

    # stage 1: cheap singleton screen
    min_count = min_support * n_out
    supported = np.nonzero(counts.ao >= min_count)[0]
    survivors: set[int] = set()
    for item in supported:
        ao, ai = counts.ao[item], counts.ai[item]
        stats.stage1_tests += 1
        if risk_ratio(ao, ai, n_out - ao, n_in - ai) >= min_risk_ratio:
            survivors.add(int(item))
    if not survivors:
        return []

    # stage 2: mine combinations over outliers, survivor alphabet only
    txns = _matrix_transactions(outlier_ids, survivors)
    itemsets = fpgrowth(txns, min_count)

    # stage 3: one filtered pass over the inliers for the combinations
    combos = [s for s in itemsets if len(s) > 1]
    inlier_counts = count_itemsets_in_matrix(inlier_ids, combos, stats)

    ratios: dict[ItemSet, float] = {}
    records = []
    for itemset, ao in itemsets.items():
        ai = (
            float(counts.ai[next(iter(itemset))])
            if len(itemset) == 1
            else inlier_counts[itemset]
        )
        stats.stage3_tests += 1
        record = _build_record(itemset, ao, ai, n_out, n_in, dictionary)
        ratios[itemset] = record.risk_ratio
        if record.risk_ratio >= min_risk_ratio:
            records.append((itemset, record))

    if strict_subsets:
        # every subset of a frequent set is frequent and over the same
        # alphabet, so all subset ratios are already in `ratios`
        records = [
            (itemset, record)
            for itemset, record in records
            if all(
                ratios[frozenset(sub)] >= min_risk_ratio
                for size in range(2, len(itemset))
                for sub in itertools.combinations(sorted(itemset), size)
            )
        ]
    return rank_explanations([r for _, r in records])


# ---------------------------------------------------------------------------
# oracle and baseline


def brute_force_explain(
    outlier_ids: np.ndarray,
    inlier_ids: np.ndarray,
    dictionary: AttributeDictionary,
    min_support: float,
    min_risk_ratio: float,
    strict_subsets: bool = False,
    max_candidates: int = 1 << 20,
) -> list[ExplanationRecord]:
    """Exhaustive enumeration with the same semantics as explain_batch.

    Every attribute-value combination co-occurring in at least one outlier
    is counted exactly in both classes, then filtered by the identical
    staged rules.  Only safe for small instances; refuses otherwise.
    """
    n_out, n_in = outlier_ids.shape[0], inlier_ids.shape[0]
    if n_out == 0:
        return []
    est = sum(2 ** int((row != NULL_ID).sum()) for row in outlier_ids)
    if est > max_candidates:
        raise ValueError(f"instance too large for brute force ({est} candidate expansions)")

    out_counts: dict[ItemSet, float] = {}
    for row in outlier_ids:
        items = sorted(int(v) for v in set(row.tolist()) if v != NULL_ID)
        for size in range(1, len(items) + 1):
            for combo in itertools.combinations(items, size):
                key = frozenset(combo)
                out_counts[key] = out_counts.get(key, 0.0) + 1.0

    alphabet = set().union(*out_counts) if out_counts else set()
    in_counts: dict[ItemSet, float] = {s: 0.0 for s in out_counts}
    for row in inlier_ids:
        items = sorted(int(v) for v in set(row.tolist()) if v != NULL_ID and int(v) in alphabet)
        for size in range(1, len(items) + 1):
            for combo in itertools.combinations(items, size):
                key = frozenset(combo)
                if key in in_counts:
                    in_counts[key] += 1.0

    def ratio_of(s: ItemSet) -> float:
        ao, ai = out_counts[s], in_counts[s]
        return risk_ratio(ao, ai, n_out - ao, n_in - ai)

    min_count = min_support * n_out
    stage1 = {
        s
        for s in out_counts
        if len(s) == 1 and out_counts[s] >= min_count and ratio_of(s) >= min_risk_ratio
    }
    singletons_ok = set().union(*stage1) if stage1 else set()

    records = []
    for itemset, ao in out_counts.items():
        if ao < min_count:
            continue
        if not itemset <= singletons_ok:
            continue
        if ratio_of(itemset) < min_risk_ratio:
            continue
        if strict_subsets and len(itemset) > 2:
            subs = (
                frozenset(c)
                for size in range(2, len(itemset))
                for c in itertools.combinations(sorted(itemset), size)
            )
            if any(ratio_of(sub) < min_risk_ratio for sub in subs):
                continue
        records.append(
            _build_record(itemset, ao, in_counts[itemset], n_out, n_in, dictionary)
        )
    return rank_explanations(records)


def two_pass_explain(
    outlier_ids: np.ndarray,
    inlier_ids: np.ndarray,
    dictionary: AttributeDictionary,
    min_support: float,
    min_risk_ratio: float,
    stats: ExplainStats | None = None,
) -> list[ExplanationRecord]:
    """Unoptimized baseline: mine outliers and inliers independently with
    full alphabets, join, then apply the same final filters.

    Produces output identical to explain_batch; the work difference is the
    point.  Mining the inliers at the outlier-derived absolute count means
    most of the inlier-side effort is spent on combinations that the risk
    ratio ultimately discards.
    """
    if stats is None:
        stats = ExplainStats()
    n_out, n_in = outlier_ids.shape[0], inlier_ids.shape[0]
    if n_out == 0:
        return []
    n_items = int(max(outlier_ids.max(initial=-1), inlier_ids.max(initial=-1))) + 1
    counts = count_single_attributes(outlier_ids, inlier_ids, n_items)
    min_count = min_support * n_out

    out_sets = fpgrowth(_matrix_transactions(outlier_ids, None), min_count)
    in_sets = fpgrowth(_matrix_transactions(inlier_ids, None), min_count, stats)

    # join; combinations below the mining threshold on the inlier side
    # still need exact counts for their records
    missing = [s for s in out_sets if len(s) > 1 and s not in in_sets]
    recounted = count_itemsets_in_matrix(inlier_ids, missing, stats)

    stage1_ok: set[int] = set()
    for item in np.nonzero(counts.ao >= min_count)[0]:
        ao, ai = counts.ao[item], counts.ai[item]
        stats.stage1_tests += 1
        if risk_ratio(ao, ai, n_out - ao, n_in - ai) >= min_risk_ratio:
            stage1_ok.add(int(item))

    records = []
    for itemset, ao in out_sets.items():
        if not itemset <= stage1_ok:
            continue
        if len(itemset) == 1:
            ai = float(counts.ai[next(iter(itemset))])
        elif itemset in in_sets:
            ai = in_sets[itemset]
        else:
            ai = recounted[itemset]
        stats.stage3_tests += 1
        record = _build_record(itemset, ao, ai, n_out, n_in, dictionary)
        if record.risk_ratio >= min_risk_ratio:
            records.append(record)
    return rank_explanations(records)


# ---------------------------------------------------------------------------
# confidence intervals


def normal_quantile(p: float) -> float:
    """Standard normal quantile via Acklam's rational approximation plus
    one Halley refinement against erfc; documented accuracy ~1e-12."""
    if not (0.0 < p < 1.0):
        raise ValueError("p must be in (0, 1)")
    a = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
         1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
    b = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
         6.680131188771972e+01, -1.328068155288572e+01)
    c = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
         -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
    d = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
         3.754408661907416e+00)
    p_low, p_high = 0.02425, 1 - 0.02425
    if p < p_low:
        q = math.sqrt(-2 * math.log(p))
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
    elif p <= p_high:
        q = p - 0.5
        r = q * q
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q / \
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1)
    else:
        q = math.sqrt(-2 * math.log(1 - p))
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) / \
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1)
    # Halley step: e = Phi(x) - p
    e = 0.5 * math.erfc(-x / math.sqrt(2)) - p
    u = e * math.sqrt(2 * math.pi) * math.exp(x * x / 2)
    return x - u / (1 + x * u / 2)


def confidence_interval(
    ao: float, ai: float, bo: float, bi: float, p: float = 0.05, k: int = 1
) -> tuple[float, float] | None:
    """Log-scale confidence interval for the risk ratio; None when any
    count is zero (the interval is undefined, not the record).

    With k > 1 hypotheses the significance is Bonferroni-adjusted to p/k.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if min(ao, ai, bo, bi) <= 0.0:
        return None
    ratio = risk_ratio(ao, ai, bo, bi)
    z = normal_quantile(1.0 - (p / k) / 2.0)
    width = math.sqrt(1.0 / ao - 1.0 / (ao + ai) + 1.0 / bo - 1.0 / (bo + bi))
    log_hi = math.log(ratio) + z * width
    hi = math.inf if log_hi > 700.0 else ratio * math.exp(z * width)
    return (ratio * math.exp(-z * width), hi)


def attach_confidence(
    records: list[ExplanationRecord], p: float, num_tests: int
) -> list[ExplanationRecord]:
    """Attach Bonferroni-corrected intervals; zero-count records are
    flagged ci_undefined rather than dropped."""
    out = []
    for record in records:
        ci = confidence_interval(record.ao, record.ai, record.bo, record.bi, p, num_tests)
        flags = record.flags
        if ci is None and "ci_undefined" not in flags:
            flags = flags + ("ci_undefined",)
        out.append(replace(record, ci=ci, num_tests=num_tests, flags=flags))
    return out


def rank_explanations(records: list[ExplanationRecord]) -> list[ExplanationRecord]:
    """Descending outlier support, then descending risk ratio (+inf first),
    then itemset order; a total order, so any input permutation agrees."""
    return sorted(
        records, key=lambda r: (-r.outlier_support, -r.risk_ratio, r.items)
    )
