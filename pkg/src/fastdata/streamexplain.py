"""Streaming explanation over exponentially damped windows.

Single attribute values are tracked by a pair of heavy-hitters counters
(one per class).  Attribute combinations are tracked by a pair of decayed,
frequency-descending prefix trees that only admit items currently frequent
on the outlier side; at each window boundary the trees decay, drop items
that fell below support, and restructure into the fresh frequency order.
Explanations can be emitted at any batch boundary without mutating state.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import AttributeDictionary, ExplanationRecord
from .explain import FpTree, mine_tree, rank_explanations, _build_record
from .sketches import AmortizedMaintenanceCounter

_RESIDUAL_EPS = 1e-12

LOWER_CONFIDENCE_FLAG = "inlier_count_lower_confidence"


class MCpsTree:
    """Decayed prefix tree restricted to recently frequent items.

    Wraps the mining FpTree with the window maintenance it needs: count
    decay, eviction of no-longer-frequent items, and a total restructure
    that re-sorts every path into the current frequency-descending order
    (decompose into residual-weighted paths, re-insert).
    """

    def __init__(self):
        self.tree = FpTree({})

    @property
    def rank(self) -> dict[int, int]:
        return self.tree.rank

    def insert(self, items: list[int], weight: float = 1.0) -> None:
        """items must already be filtered to the eligible set."""
        if items:
            self.tree.insert(sorted(items, key=self.rank.__getitem__), weight)

    def _nodes(self):
        for nodes in self.tree.header.values():
            yield from nodes

    def total_mass(self) -> float:
        return sum(n.count for n in self._nodes())

    def decay(self, retention: float) -> None:
        for node in self._nodes():
            node.count *= retention

    def paths(self) -> list[tuple[tuple[int, ...], float]]:
        """Decompose into (root-to-node path, residual weight) pairs; the
        residual is the mass of transactions that ended at that node."""
        out: list[tuple[tuple[int, ...], float]] = []
        stack: list[tuple] = [(self.tree.root, ())]
        while stack:
            node, path = stack.pop()
            residual = node.count - sum(c.count for c in node.children.values())
            if node.item is not None and residual > _RESIDUAL_EPS:
                out.append((path, residual))
            for child in node.children.values():
                stack.append((child, path + (child.item,)))
        return out

    def restructure(self, new_rank: dict[int, int]) -> None:
        """Rebuild in the given order, dropping items outside it."""
        old_paths = self.paths()
        self.tree = FpTree(dict(new_rank))
        for path, weight in old_paths:
            kept = sorted((i for i in path if i in new_rank), key=new_rank.__getitem__)
            if kept:
                self.tree.insert(kept, weight)

    def itemset_count(self, itemset: frozenset[int]) -> float:
        """Decayed weight of transactions containing the whole itemset."""
        if not itemset or any(i not in self.rank for i in itemset):
            return 0.0
        deepest = max(itemset, key=self.rank.__getitem__)
        total = 0.0
        for node in self.tree.header.get(deepest, ()):
            seen = set()
            cursor = node
            while cursor.item is not None:
                seen.add(cursor.item)
                cursor = cursor.parent
            if itemset <= seen:
                total += node.count
        return total

    def mine(self, min_count: float) -> dict[frozenset[int], float]:
        return mine_tree(self.tree, min_count)


@dataclass
class EmitStats:
    num_tests: int = 0


class StreamingSummarizer:
    """Maintains the paired sketches and trees for one query.

    Tree eligibility is a snapshot refreshed at window boundaries: an item
    enters the trees only after a window in which its outlier-side count
    met the support threshold.  Until the first boundary nothing is
    tree-eligible, so the first window populates the counters only.
    """

    def __init__(
        self,
        min_support: float,
        retention: float,
        amc_stable_size: int = 10_000,
    ):
        self.min_support = min_support
        self.retention = retention
        self.outlier_amc = AmortizedMaintenanceCounter(amc_stable_size)
        self.inlier_amc = AmortizedMaintenanceCounter(amc_stable_size)
        self.outlier_tree = MCpsTree()
        self.inlier_tree = MCpsTree()
        self.outlier_weight = 0.0
        self.inlier_weight = 0.0
        self.window = 0
        self._eligible: set[int] = set()

    def observe_labeled_point(self, is_outlier: bool, attrs: list[int]) -> None:
        amc = self.outlier_amc if is_outlier else self.inlier_amc
        tree = self.outlier_tree if is_outlier else self.inlier_tree
        for item in attrs:
            amc.observe(item, 1.0)
        if is_outlier:
            self.outlier_weight += 1.0
        else:
            self.inlier_weight += 1.0
        eligible = [i for i in attrs if i in self._eligible]
        if eligible:
            tree.insert(eligible, 1.0)

    def advance_window(self) -> None:
        """Decay everything, refresh eligibility from the outlier counter,
        evict newly infrequent items, and re-sort the trees."""
        r = self.retention
        self.outlier_amc.decay(r)
        self.inlier_amc.decay(r)
        self.outlier_tree.decay(r)
        self.inlier_tree.decay(r)
        self.outlier_weight *= r
        self.inlier_weight *= r
        self.window += 1

        threshold = self.min_support * self.outlier_weight
        counts = self.outlier_amc.counts
        newly_eligible = {i for i, c in counts.items() if c >= threshold}
        order = sorted(newly_eligible, key=lambda i: (-counts[i], i))
        new_rank = {item: pos for pos, item in enumerate(order)}

        arrivals = newly_eligible - self._eligible
        self.outlier_tree.restructure(new_rank)
        self.inlier_tree.restructure(new_rank)
        # seed singleton mass for items that just became eligible so their
        # tree-side support does not start from zero mid-history
        for item in arrivals:
            self.outlier_tree.insert([item], self.outlier_amc.estimate(item))
            inlier_est = self.inlier_amc.counts.get(item)
            if inlier_est:
                self.inlier_tree.insert([item], inlier_est)
        self._eligible = newly_eligible

    def emit_explanations(
        self,
        min_risk_ratio: float,
        dictionary: AttributeDictionary,
        stats: EmitStats | None = None,
    ) -> list[ExplanationRecord]:
        """Current explanations; read-only, callable at any batch boundary."""
        if stats is None:
            stats = EmitStats()
        n_out, n_in = self.outlier_weight, self.inlier_weight
        if n_out <= 0.0:
            return []
        records = []
        min_count = self.min_support * n_out

        for item, ao in self.outlier_amc.counts.items():
            if ao < min_count:
                continue
            stats.num_tests += 1
            flags: tuple[str, ...] = ()
            ai = self.inlier_amc.counts.get(item)
            if ai is None:
                ai = self.inlier_amc.estimate(item)
                if ai > 0.0:
                    flags = (LOWER_CONFIDENCE_FLAG,)
            record = _build_record(
                frozenset([item]), min(ao, n_out), min(ai, n_in), n_out, n_in,
                dictionary, flags,
            )
            if record.risk_ratio >= min_risk_ratio:
                records.append(record)

        for itemset, ao in self.outlier_tree.mine(min_count).items():
            if len(itemset) < 2:
                continue
            stats.num_tests += 1
            ai = self.inlier_tree.itemset_count(itemset)
            flags = (LOWER_CONFIDENCE_FLAG,) if ai == 0.0 else ()
            record = _build_record(
                itemset, min(ao, n_out), min(ai, n_in), n_out, n_in, dictionary, flags
            )
            if record.risk_ratio >= min_risk_ratio:
                records.append(record)
        return rank_explanations(records)

    def state_fingerprint(self) -> tuple:
        """Hashable snapshot of all mutable state (purity checks)."""
        def tree_dump(t: MCpsTree):
            return tuple(sorted((p, w) for p, w in t.paths()))

        return (
            self.outlier_weight,
            self.inlier_weight,
            self.window,
            tuple(sorted(self.outlier_amc.counts.items())),
            tuple(sorted(self.inlier_amc.counts.items())),
            self.outlier_amc.carry_over,
            self.inlier_amc.carry_over,
            tuple(sorted(self._eligible)),
            tree_dump(self.outlier_tree),
            tree_dump(self.inlier_tree),
        )
