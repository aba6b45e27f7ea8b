"""Adaptive pair-selection state machines for paired-comparison studies.

Two sorters produce a full quality ranking from forced-choice outcomes:

* The interleave sorter assumes each distortion type forms a chain already
  ordered by strength (stronger distortion never looks better). Chains
  merge pairwise from the worst end: the two current-worst candidates are
  shown, the loser is committed as poorer, and the winner faces the
  loser's next-stronger sibling. Intermediate lists then merge until one
  ranking remains. For five chains of four the schedule is
  (4,4)->8, (4,4)->8, (8,4)->12, (12,8)->20.

* The tree sorter makes no monotonicity assumption: stimuli are inserted
  one by one into a height-balanced binary search tree ordered by
  quality, each insertion comparing the new stimulus against the nodes on
  its descent path.

Sessions are single-writer state machines: ``next_pair`` yields the pending
comparison (or None when done) and ``report`` absorbs the outcome. The
transcript replays deterministically given the same design and seed.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from .errors import ProtocolError


@dataclass(frozen=True)
class StudyDesign:
    """Stimuli partitioned into monotone chains, each best quality first."""

    stimuli: tuple[str, ...]
    chains: tuple[tuple[str, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "stimuli", tuple(self.stimuli))
        object.__setattr__(self, "chains", tuple(tuple(c) for c in self.chains))
        flat = [s for chain in self.chains for s in chain]
        if not self.chains or any(len(c) == 0 for c in self.chains):
            raise ValueError("every chain must be non-empty")
        if sorted(flat) != sorted(self.stimuli) or len(set(flat)) != len(flat):
            raise ValueError("chains must partition the stimulus set")

    @classmethod
    def from_chains(cls, chains) -> "StudyDesign":
        chains = tuple(tuple(c) for c in chains)
        return cls(stimuli=tuple(s for c in chains for s in c), chains=chains)


def grid_design(n_types: int = 5, n_levels: int = 4) -> StudyDesign:
    """Synthetic design of ``n_types`` chains with ``n_levels`` strengths each."""
    chains = tuple(
        tuple(f"t{t}l{level}" for level in range(1, n_levels + 1))
        for t in range(n_types)
    )
    return StudyDesign.from_chains(chains)


class _Merge:
    """One two-list merge from the worst end; sources are worst-first."""

    __slots__ = ("a", "b", "ia", "ib", "out")

    def __init__(self, a: list[str], b: list[str]):
        self.a = a
        self.b = b
        self.ia = 0
        self.ib = 0
        self.out: list[str] = []

    @property
    def done(self) -> bool:
        return self.ia >= len(self.a) or self.ib >= len(self.b)

    def pending(self) -> tuple[str, str]:
        return self.a[self.ia], self.b[self.ib]

    def absorb(self, winner: str) -> None:
        a, b = self.pending()
        if winner == a:
            self.out.append(b)
            self.ib += 1
        else:
            self.out.append(a)
            self.ia += 1

    def finish(self) -> list[str]:
        self.out.extend(self.a[self.ia:])
        self.out.extend(self.b[self.ib:])
        return self.out

    def remaining_bounds(self) -> tuple[int, int]:
        ra = len(self.a) - self.ia
        rb = len(self.b) - self.ib
        if ra == 0 or rb == 0:
            return 0, 0
        return min(ra, rb), ra + rb - 1


def _merge_plan(n_chains: int) -> list[tuple[tuple[str, int], tuple[str, int]]]:
    """Merge task list over ('chain', i) / ('task', j) source references.

    Chains pair up in order; an odd leftover merges into the last
    intermediate; intermediates then fold from the last back to the first.
    """
    if n_chains < 2:
        return []
    tasks: list[tuple[tuple[str, int], tuple[str, int]]] = []
    intermediates: list[tuple[str, int]] = []
    for i in range(0, n_chains - 1, 2):
        tasks.append((("chain", i), ("chain", i + 1)))
        intermediates.append(("task", len(tasks) - 1))
    if n_chains % 2 == 1:
        tasks.append((intermediates.pop(), ("chain", n_chains - 1)))
        intermediates.append(("task", len(tasks) - 1))
    result = intermediates.pop()
    while intermediates:
        tasks.append((result, intermediates.pop()))
        result = ("task", len(tasks) - 1)
    return tasks


class SortSession:
    """Resumable comparator-driven sorting session.

    mode 'interleave' requires a StudyDesign with monotone chains; mode
    'bst' takes any stimulus order (the insertion order, recorded).
    """

    MODES = ("interleave", "bst")

    def __init__(self, design: StudyDesign, mode: str = "interleave", seed: int = 0):
        if mode not in self.MODES:
            raise ValueError(f"mode must be one of {self.MODES}, got {mode!r}")
        self.design = design
        self.mode = mode
        self.seed = int(seed)
        self.transcript: list[tuple[tuple[str, str], str]] = []
        self.comparisons = 0
        self._ranking: list[str] | None = None

        if mode == "interleave":
            rng = random.Random(self.seed)
            order = list(range(len(design.chains)))
            rng.shuffle(order)
            # working lists are worst-first: strongest distortion leads
            self._chains = [list(reversed(design.chains[i])) for i in order]
            self._plan = _merge_plan(len(self._chains))
            self._outputs: list[list[str]] = []
            self._task_idx = 0
            self._merge: _Merge | None = None
            if not self._plan:
                self._ranking = list(reversed(self._chains[0]))
            else:
                self._start_task()
        else:
            self._insert_order = list(design.stimuli)
            self._tree: _AvlTree = _AvlTree()
            self._item_idx = 0
            self._node = None
            self._begin_insertions()

    # -- interleave internals -------------------------------------------------

    def _source(self, ref: tuple[str, int]) -> list[str]:
        kind, idx = ref
        return self._chains[idx] if kind == "chain" else self._outputs[idx]

    def _start_task(self) -> None:
        a_ref, b_ref = self._plan[self._task_idx]
        self._merge = _Merge(self._source(a_ref), self._source(b_ref))
        self._settle_merge()

    def _settle_merge(self) -> None:
        while self._merge.done:
            self._outputs.append(self._merge.finish())
            self._task_idx += 1
            if self._task_idx >= len(self._plan):
                self._ranking = list(reversed(self._outputs[-1]))
                self._merge = None
                return
            a_ref, b_ref = self._plan[self._task_idx]
            self._merge = _Merge(self._source(a_ref), self._source(b_ref))

    # -- bst internals ---------------------------------------------------------

    def _begin_insertions(self) -> None:
        while self._item_idx < len(self._insert_order):
            item = self._insert_order[self._item_idx]
            if self._tree.root is None:
                self._tree.attach_root(item)
                self._item_idx += 1
                continue
            self._node = self._tree.root
            self._tree.begin_path()
            return
        self._ranking = list(reversed(self._tree.in_order()))
        self._node = None

    # -- public protocol -------------------------------------------------------

    @property
    def done(self) -> bool:
        return self._ranking is not None

    def next_pair(self) -> tuple[str, str] | None:
        if self.done:
            return None
        if self.mode == "interleave":
            return self._merge.pending()
        return self._insert_order[self._item_idx], self._node.item

    def report(self, winner: str) -> None:
        pair = self.next_pair()
        if pair is None:
            raise ProtocolError("no comparison is pending")
        if winner not in pair:
            raise ProtocolError(f"winner {winner!r} is not in the pending pair {pair}")
        self.transcript.append((pair, winner))
        self.comparisons += 1
        if self.mode == "interleave":
            self._merge.absorb(winner)
            self._settle_merge()
        else:
            item = self._insert_order[self._item_idx]
            new_is_better = winner == item
            child = self._node.right if new_is_better else self._node.left
            self._tree.push_path(self._node, new_is_better)
            if child is None:
                self._tree.attach(self._node, new_is_better, item)
                self._item_idx += 1
                self._node = None
                self._begin_insertions()
            else:
                self._node = child

    @property
    def ranking(self) -> list[str]:
        """Best-to-worst quality order; only available once done."""
        if self._ranking is None:
            raise ProtocolError("session is not complete")
        return list(self._ranking)

    def remaining_bounds(self) -> tuple[int, int]:
        """(min, max) further comparisons needed to finish the session."""
        if self.done:
            return 0, 0
        if self.mode == "interleave":
            lo, hi = self._merge.remaining_bounds()
            done_sizes = {}
            for t in range(len(self._plan)):
                a_ref, b_ref = self._plan[t]
                size = lambda ref: (
                    len(self._chains[ref[1]]) if ref[0] == "chain" else done_sizes[ref[1]]
                )
                m, n = size(a_ref), size(b_ref)
                done_sizes[t] = m + n
                if t > self._task_idx:
                    lo += min(m, n)
                    hi += m + n - 1
            return lo, hi
        remaining = len(self._insert_order) - self._item_idx
        per_item_cap = math.ceil(math.log2(len(self._insert_order) + 1)) + 1
        return remaining, remaining * per_item_cap


class _AvlNode:
    __slots__ = ("item", "left", "right", "height")

    def __init__(self, item: str):
        self.item = item
        self.left = None
        self.right = None
        self.height = 1


class _AvlTree:
    """Height-balanced search tree ordered worst (left) to best (right)."""

    def __init__(self):
        self.root: _AvlNode | None = None
        self._path: list[tuple[_AvlNode, bool]] = []

    def attach_root(self, item: str) -> None:
        self.root = _AvlNode(item)

    def begin_path(self) -> None:
        self._path = []

    def push_path(self, node: _AvlNode, went_right: bool) -> None:
        self._path.append((node, went_right))

    def attach(self, parent: _AvlNode, as_right: bool, item: str) -> None:
        node = _AvlNode(item)
        if as_right:
            parent.right = node
        else:
            parent.left = node
        self._rebalance_path()

    @staticmethod
    def _h(node) -> int:
        return node.height if node is not None else 0

    def _update(self, node: _AvlNode) -> None:
        node.height = 1 + max(self._h(node.left), self._h(node.right))

    def _balance(self, node: _AvlNode) -> int:
        return self._h(node.left) - self._h(node.right)

    def _rotate_right(self, node: _AvlNode) -> _AvlNode:
        pivot = node.left
        node.left = pivot.right
        pivot.right = node
        self._update(node)
        self._update(pivot)
        return pivot

    def _rotate_left(self, node: _AvlNode) -> _AvlNode:
        pivot = node.right
        node.right = pivot.left
        pivot.left = node
        self._update(node)
        self._update(pivot)
        return pivot

    def _rebalance(self, node: _AvlNode) -> _AvlNode:
        self._update(node)
        balance = self._balance(node)
        if balance > 1:
            if self._balance(node.left) < 0:
                node.left = self._rotate_left(node.left)
            return self._rotate_right(node)
        if balance < -1:
            if self._balance(node.right) > 0:
                node.right = self._rotate_right(node.right)
            return self._rotate_left(node)
        return node

    def _rebalance_path(self) -> None:
        for node, went_right in reversed(self._path):
            child = node.right if went_right else node.left
            new_child = self._rebalance(child)
            if went_right:
                node.right = new_child
            else:
                node.left = new_child
        self.root = self._rebalance(self.root)
        self._path = []

    def in_order(self) -> list[str]:
        out: list[str] = []
        stack: list[tuple[_AvlNode, bool]] = [(self.root, False)] if self.root else []
        while stack:
            node, expanded = stack.pop()
            if node is None:
                continue
            if expanded:
                out.append(node.item)
            else:
                stack.append((node.right, False))
                stack.append((node, True))
                stack.append((node.left, False))
        return out


def replay(design: StudyDesign, mode: str, seed: int, winners: list[str]) -> SortSession:
    """Drive a fresh session with a recorded winner sequence."""
    session = SortSession(design, mode=mode, seed=seed)
    for winner in winners:
        session.report(winner)
    return session


def simulate_sessions(
    design: StudyDesign,
    mode: str = "interleave",
    sessions: int = 1000,
    accuracy: float = 1.0,
    seed: int = 0,
) -> dict:
    """Run synthetic observers over random consistent ground truths.

    Each session draws a ground-truth quality order uniformly among the
    orders consistent with the design's chains (for 'bst', any order),
    then answers every emitted pair with the truly better stimulus with
    probability ``accuracy``. Returns comparison-count statistics and the
    fraction of sessions whose ranking matched the ground truth exactly.
    """
    if not 0.0 <= accuracy <= 1.0:
        raise ValueError("accuracy must be in [0, 1]")
    rng = random.Random(seed)
    counts = []
    exact = 0
    for s in range(sessions):
        truth = random_consistent_order(design, rng)
        quality = {stim: len(truth) - i for i, stim in enumerate(truth)}
        session = SortSession(design, mode=mode, seed=rng.getrandbits(32))
        while not session.done:
            a, b = session.next_pair()
            better = a if quality[a] > quality[b] else b
            worse = b if better == a else a
            session.report(better if rng.random() < accuracy else worse)
        counts.append(session.comparisons)
        if session.ranking == truth:
            exact += 1
    counts.sort()
    n = len(counts)
    return {
        "sessions": n,
        "mean_comparisons": sum(counts) / n,
        "min_comparisons": counts[0],
        "max_comparisons": counts[-1],
        "median_comparisons": counts[n // 2],
        "exact_recovery_rate": exact / n,
    }


def random_consistent_order(design: StudyDesign, rng: random.Random) -> list[str]:
    """Uniform random best-to-worst order respecting within-chain monotonicity.

    Stimuli draw independent uniform qualities which are then sorted
    within each chain, yielding a uniform linear extension of the chain
    partial order.
    """
    values = {}
    for chain in design.chains:
        draws = sorted((rng.random() for _ in chain), reverse=True)
        for stim, value in zip(chain, draws):
            values[stim] = value
    return sorted(design.stimuli, key=lambda s: -values[s])
