"""Decayed streaming data structures.

Three sketches back the streaming engine:

* AdaptableDampedReservoir (ADR): a fixed-size weighted sample whose decay
  step is decoupled from insertion, so exponential damping can follow
  tuple-count windows, wall-clock windows, or anything else.
* AmortizedMaintenanceCounter (AMC): a heavy-hitters counter with
  constant-time inserts; pruning cost is amortized across a maintenance
  schedule instead of being paid per observation.
* SpaceSaving: the classic bounded counter, kept as an undecayed baseline
  for accuracy/throughput comparisons.

All sketches are single-writer and deterministic under their seed.
"""

from __future__ import annotations

import heapq
import itertools
from typing import Hashable

import numpy as np

from .core import nearest_rank_quantile


class AdaptableDampedReservoir:
    """Exponentially damped reservoir over arbitrary decay windows.

    Insertion: the running weight c_w grows by each observation's weight;
    the item replaces a uniformly random slot with probability
    min(1, k / c_w).  The clamp covers the post-decay "overweight" regime,
    where items are always retained until c_w catches back up with k.
    Decay: c_w is multiplied by the retention factor (1 - decay_rate);
    stored items are untouched.
    """

    def __init__(
        self,
        size: int,
        decay_rate: float = 0.0,
        seed: int = 0,
        item_shape: tuple[int, ...] = (),
        dtype=np.float64,
    ):
        if size < 1:
            raise ValueError("reservoir size must be >= 1")
        if not (0.0 <= decay_rate < 1.0):
            raise ValueError("decay rate must be in [0, 1)")
        self.size = size
        self.retention = 1.0 - decay_rate
        self.weight = 0.0  # c_w
        self.rng = np.random.default_rng(seed)
        self._items = np.empty((size,) + item_shape, dtype=dtype)
        self._fill = 0

    def __len__(self) -> int:
        return self._fill

    def sample(self) -> np.ndarray:
        """Copy of the current reservoir contents."""
        return self._items[: self._fill].copy()

    def observe(self, x, w: float = 1.0) -> None:
        if w < 0:
            raise ValueError("observation weight must be nonnegative")
        self.weight += w
        if self._fill < self.size:
            self._items[self._fill] = x
            self._fill += 1
            return
        p = 1.0 if self.weight <= self.size else self.size / self.weight
        if self.rng.random() < p:
            slot = int(self.rng.integers(self.size))
            self._items[slot] = x

    def observe_many(self, xs: np.ndarray, ws: np.ndarray | None = None) -> None:
        """Bulk insertion with the same sequential semantics as observe().

        Statistically identical to folding observe() over xs; the random
        draws are batched, so the two paths do not share a draw-for-draw
        RNG stream.
        """
        xs = np.asarray(xs)
        n = xs.shape[0]
        if n == 0:
            return
        if ws is None:
            ws = np.ones(n)
        else:
            ws = np.asarray(ws, dtype=np.float64)
            if np.any(ws < 0):
                raise ValueError("observation weight must be nonnegative")
        start = 0
        while self._fill < self.size and start < n:
            self.observe(xs[start], float(ws[start]))
            start += 1
        if start == n:
            return
        xs, ws = xs[start:], ws[start:]
        cw = self.weight + np.cumsum(ws)
        self.weight = float(cw[-1])
        probs = np.minimum(1.0, self.size / cw)
        mask = self.rng.random(len(cw)) < probs
        slots = self.rng.integers(self.size, size=len(cw))
        self._assign(slots[mask], xs[mask])

    def observe_many_tuple_decayed(
        self, xs: np.ndarray, ws: np.ndarray | None = None
    ) -> None:
        """Per-tuple decay variant: each arrival first decays c_w by the
        retention factor, then is inserted.  This is the tuple-at-a-time
        damped sampler kept for comparison runs; it skews toward periods of
        high stream volume, which is exactly what the windowed ADR avoids.
        """
        xs = np.asarray(xs)
        n = xs.shape[0]
        if n == 0:
            return
        if ws is None:
            ws = np.ones(n)
        else:
            ws = np.asarray(ws, dtype=np.float64)
            if np.any(ws < 0):
                raise ValueError("observation weight must be nonnegative")
        r = self.retention
        # chunked closed form of cw_j = r * cw_{j-1} + w_j, sized so the
        # r**-i rescaling stays in float range
        chunk = max(16, int(30.0 / max(1e-12, -np.log(r)))) if r < 1.0 else n
        pos = 0
        while pos < n:
            end = min(n, pos + chunk)
            w_chunk = ws[pos:end]
            m = end - pos
            powers = r ** np.arange(1, m + 1)
            cw = powers * self.weight + powers * np.cumsum(w_chunk / powers)
            self.weight = float(cw[-1])
            x_chunk = xs[pos:end]
            fillable = 0
            while self._fill < self.size and fillable < m:
                self._items[self._fill] = x_chunk[fillable]
                self._fill += 1
                fillable += 1
            if fillable < m:
                cw_rest = cw[fillable:]
                probs = np.minimum(1.0, self.size / np.maximum(cw_rest, 1e-300))
                mask = self.rng.random(len(cw_rest)) < probs
                slots = self.rng.integers(self.size, size=len(cw_rest))
                self._assign(slots[mask], x_chunk[fillable:][mask])
            pos = end

    def _assign(self, slots: np.ndarray, values: np.ndarray) -> None:
        if len(slots) == 0:
            return
        # keep only the chronologically last write per slot
        _, last = np.unique(slots[::-1], return_index=True)
        keep = len(slots) - 1 - last
        self._items[slots[keep]] = values[keep]

    def decay(self) -> None:
        self.weight *= self.retention

    def quantile(self, q: float) -> float:
        if self._fill == 0:
            raise ValueError("quantile of an empty reservoir")
        return nearest_rank_quantile(self._items[: self._fill], q)


class AmortizedMaintenanceCounter:
    """Decayed heavy-hitters counter with amortized pruning.

    observe() is a plain dict update: a new item enters with the carry-over
    weight w (the largest count discarded by the last maintenance) plus its
    own count, so stored counts never undershoot the true decayed count.
    maintain() prunes the map back to stable_size, keeping the largest
    counts (ties resolved oldest-first), and records the largest discarded
    count as the new carry-over.  decay() scales every count, then runs
    maintenance, per the sketch's window semantics.

    By default maintenance also fires whenever the map exceeds
    size_bound_factor * stable_size, bounding worst-case memory.
    """

    def __init__(self, stable_size: int, size_bound_factor: float = 2.0):
        if stable_size < 1:
            raise ValueError("stable size must be >= 1")
        self.stable_size = stable_size
        self.size_bound = int(size_bound_factor * stable_size)
        self.carry_over = 0.0  # w_i in the update rule
        self.max_carry_over = 0.0
        self.total_weight = 0.0  # decayed weight of everything observed
        self.counts: dict[Hashable, float] = {}
        self._seq: dict[Hashable, int] = {}
        self._next_seq = itertools.count()

    def __len__(self) -> int:
        return len(self.counts)

    def observe(self, item: Hashable, count: float = 1.0) -> None:
        if count < 0:
            raise ValueError("count must be nonnegative")
        self.total_weight += count
        if item in self.counts:
            self.counts[item] += count
        else:
            self.counts[item] = self.carry_over + count
            self._seq[item] = next(self._next_seq)
        if len(self.counts) > self.size_bound:
            self.maintain()

    def maintain(self) -> None:
        # no removal leaves the carry-over untouched (maintain is idempotent);
        # it only moves when entries are actually discarded
        if len(self.counts) <= self.stable_size:
            return
        # survivors: stable_size largest counts, earliest-inserted wins ties
        seq = self._seq
        survivors = heapq.nlargest(
            self.stable_size,
            self.counts.items(),
            key=lambda kv: (kv[1], -seq[kv[0]]),
        )
        keep = {item for item, _ in survivors}
        removed_max = 0.0
        for item, count in self.counts.items():
            if item not in keep and count > removed_max:
                removed_max = count
        self.counts = {i: c for i, c in self.counts.items() if i in keep}
        self._seq = {i: s for i, s in seq.items() if i in keep}
        self.carry_over = removed_max
        self.max_carry_over = max(self.max_carry_over, removed_max)

    def decay(self, retention: float) -> None:
        if not (0.0 < retention <= 1.0):
            raise ValueError("retention must be in (0, 1]")
        if retention != 1.0:
            for item in self.counts:
                self.counts[item] *= retention
            self.carry_over *= retention
            self.total_weight *= retention
        self.maintain()

    def estimate(self, item: Hashable) -> float:
        """Stored count, or the carry-over upper bound for unstored items."""
        return self.counts.get(item, self.carry_over)

    def frequent(self, min_fraction: float) -> list[tuple[Hashable, float]]:
        threshold = min_fraction * self.total_weight
        hits = [(i, c) for i, c in self.counts.items() if c >= threshold]
        hits.sort(key=lambda kv: -kv[1])
        return hits


class SpaceSaving:
    """Classic SpaceSaving counter (undecayed baseline).

    Keeps at most m (item, count, error) entries; a new item replaces the
    minimum-count entry and inherits its count, so stored estimates
    overshoot true counts by at most W/m.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.counts: dict[Hashable, float] = {}
        self.errors: dict[Hashable, float] = {}
        self.total_weight = 0.0
        self._heap: list[tuple[float, int, Hashable]] = []  # lazy min-heap
        self._next_seq = itertools.count()

    def __len__(self) -> int:
        return len(self.counts)

    def observe(self, item: Hashable, count: float = 1.0) -> None:
        if count < 0:
            raise ValueError("count must be nonnegative")
        self.total_weight += count
        if item in self.counts:
            self.counts[item] += count
            heapq.heappush(self._heap, (self.counts[item], next(self._next_seq), item))
            return
        if len(self.counts) < self.capacity:
            self.counts[item] = count
            self.errors[item] = 0.0
            heapq.heappush(self._heap, (count, next(self._next_seq), item))
            return
        evicted, min_count = self._pop_min()
        del self.counts[evicted]
        del self.errors[evicted]
        self.counts[item] = min_count + count
        self.errors[item] = min_count
        heapq.heappush(self._heap, (min_count + count, next(self._next_seq), item))

    def _pop_min(self) -> tuple[Hashable, float]:
        while True:
            count, _, item = heapq.heappop(self._heap)
            if self.counts.get(item) == count:
                return item, count

    def estimate(self, item: Hashable) -> float:
        return self.counts.get(item, 0.0)

    def frequent(self, min_fraction: float) -> list[tuple[Hashable, float]]:
        threshold = min_fraction * self.total_weight
        hits = [(i, c) for i, c in self.counts.items() if c >= threshold]
        hits.sort(key=lambda kv: -kv[1])
        return hits


class DecayDriver:
    """Emits decay ticks on a tuple-count or wall-clock schedule.

    advance() reports how many period boundaries elapsed; time-based ticks
    fire even when no tuples arrive, which is the property that makes the
    windowed ADR resilient to arrival-rate spikes.
    """

    def __init__(
        self,
        period_points: int | None = None,
        period_seconds: float | None = None,
        start_time: float = 0.0,
    ):
        if (period_points is None) == (period_seconds is None):
            raise ValueError("set exactly one of period_points / period_seconds")
        if period_points is not None and period_points <= 0:
            raise ValueError("period_points must be positive")
        if period_seconds is not None and period_seconds <= 0:
            raise ValueError("period_seconds must be positive")
        self.period_points = period_points
        self.period_seconds = period_seconds
        self._points_into_period = 0
        self._last_boundary = start_time

    def advance(self, n_points: int = 0, to_time: float | None = None) -> int:
        ticks = 0
        if self.period_points is not None:
            self._points_into_period += n_points
            ticks = self._points_into_period // self.period_points
            self._points_into_period %= self.period_points
        elif to_time is not None:
            while to_time >= self._last_boundary + self.period_seconds:
                self._last_boundary += self.period_seconds
                ticks += 1
        return ticks


class PeriodSampleFolder:
    """Variable-arrival policy for real-time windows: keep a plain uniform
    reservoir over the current period, and at each decay tick fold it into
    the damped reservoir before clearing it.

    Folded items carry unit weight, so a period contributes at most k
    observations no matter how many tuples arrived in it.  This is what
    keeps an arrival-rate spike from flooding the damped sample: the spike
    period is represented, but at the same total weight as a quiet one.
    """

    def __init__(self, adr: AdaptableDampedReservoir, seed: int = 0):
        self.adr = adr
        self._seed = seed
        self.period = self._fresh_period()

    def _fresh_period(self) -> AdaptableDampedReservoir:
        self._seed += 1
        return AdaptableDampedReservoir(
            self.adr.size, 0.0, seed=self._seed,
            item_shape=self.adr._items.shape[1:], dtype=self.adr._items.dtype,
        )

    def observe(self, x, w: float = 1.0) -> None:
        self.period.observe(x, w)

    def observe_many(self, xs: np.ndarray, ws: np.ndarray | None = None) -> None:
        self.period.observe_many(xs, ws)

    def tick(self) -> None:
        self.adr.decay()
        items = self.period.sample()
        if len(items):
            self.adr.observe_many(items)
        self.period = self._fresh_period()


class SubperiodAverager:
    """Appendix-style time-uniform policy: insert each subperiod's mean
    value into the damped reservoir as a single unit-weight observation, so
    every slice of wall-clock time carries equal weight."""

    def __init__(self, adr: AdaptableDampedReservoir):
        self.adr = adr
        self._sum = 0.0
        self._count = 0

    def observe(self, x: float) -> None:
        self._sum += x
        self._count += 1

    def close_subperiod(self) -> None:
        if self._count:
            self.adr.observe(self._sum / self._count, 1.0)
        self._sum = 0.0
        self._count = 0
