import itertools
import random

import pytest

from texmeshqa.errors import ProtocolError
from texmeshqa.sorting import (
    SortSession,
    StudyDesign,
    grid_design,
    random_consistent_order,
    replay,
    simulate_sessions,
)


def run_with_truth(session, truth, flip=None):
    """Answer every pair according to a ground-truth order (best first)."""
    quality = {s: len(truth) - i for i, s in enumerate(truth)}
    while not session.done:
        a, b = session.next_pair()
        better = a if quality[a] > quality[b] else b
        session.report(better)
    return session


class TestStudyDesign:
    def test_chains_must_partition(self):
        with pytest.raises(ValueError, match="partition"):
            StudyDesign(stimuli=("a", "b", "c"), chains=(("a", "b"),))

    def test_empty_chain_rejected(self):
        with pytest.raises(ValueError, match="non-empty"):
            StudyDesign(stimuli=("a",), chains=(("a",), ()))

    def test_grid_design_shape(self):
        design = grid_design(5, 4)
        assert len(design.stimuli) == 20
        assert len(design.chains) == 5
        assert all(len(c) == 4 for c in design.chains)


class TestInterleave:
    def test_exact_recovery_200_random_truths(self):
        design = grid_design(5, 4)
        rng = random.Random(100)
        for _ in range(200):
            truth = random_consistent_order(design, rng)
            session = SortSession(design, "interleave", seed=rng.getrandbits(32))
            run_with_truth(session, truth)
            assert session.ranking == truth

    def test_comparison_bounds(self):
        design = grid_design(5, 4)
        rng = random.Random(101)
        for _ in range(300):
            truth = random_consistent_order(design, rng)
            session = SortSession(design, "interleave", seed=rng.getrandbits(32))
            run_with_truth(session, truth)
            assert 20 <= session.comparisons <= 44

    def test_two_chain_design(self):
        design = StudyDesign.from_chains([("a1", "a2"), ("b1", "b2")])
        truth = ["a1", "b1", "a2", "b2"]
        session = run_with_truth(SortSession(design, "interleave", seed=5), truth)
        assert session.ranking == truth
        assert 2 <= session.comparisons <= 3

    def test_single_chain_needs_no_comparisons(self):
        design = StudyDesign.from_chains([("a", "b", "c")])
        session = SortSession(design, "interleave", seed=0)
        assert session.done
        assert session.ranking == ["a", "b", "c"]
        assert session.comparisons == 0

    def test_three_chain_design_recovers(self):
        design = grid_design(3, 4)
        rng = random.Random(103)
        for _ in range(100):
            truth = random_consistent_order(design, rng)
            session = SortSession(design, "interleave", seed=rng.getrandbits(32))
            run_with_truth(session, truth)
            assert session.ranking == truth

    def test_seed_controls_chain_pairing(self):
        design = grid_design(5, 4)
        first = SortSession(design, "interleave", seed=1).next_pair()
        seeds_differ = any(
            SortSession(design, "interleave", seed=s).next_pair() != first
            for s in range(2, 30)
        )
        assert seeds_differ

    def test_deterministic_given_seed(self):
        design = grid_design(5, 4)
        assert (
            SortSession(design, "interleave", seed=7).next_pair()
            == SortSession(design, "interleave", seed=7).next_pair()
        )


class TestBst:
    def test_exhaustive_recovery_n8(self):
        items = [f"s{k}" for k in range(8)]
        design = StudyDesign.from_chains([(s,) for s in items])
        for perm in itertools.permutations(items):
            session = SortSession(design, "bst")
            run_with_truth(session, list(perm))
            assert session.ranking == list(perm)

    def test_recovery_sampled_n36(self):
        items = [f"s{k}" for k in range(36)]
        design = StudyDesign.from_chains([(s,) for s in items])
        rng = random.Random(104)
        for _ in range(300):
            truth = items[:]
            rng.shuffle(truth)
            session = SortSession(design, "bst")
            run_with_truth(session, truth)
            assert session.ranking == truth
            assert session.comparisons <= 36 * 6  # ceil(log2(37)) = 6

    def test_no_monotonicity_assumption(self):
        # ground truth deliberately violates within-chain order
        design = StudyDesign.from_chains([("a1", "a2"), ("b1", "b2")])
        truth = ["a2", "b2", "a1", "b1"]
        session = SortSession(design, "bst")
        run_with_truth(session, truth)
        assert session.ranking == truth


class TestProtocol:
    def test_report_without_pending_pair(self):
        design = StudyDesign.from_chains([("a",), ("b",)])
        session = SortSession(design, "bst")
        run_with_truth(session, ["a", "b"])
        with pytest.raises(ProtocolError, match="pending"):
            session.report("a")

    def test_winner_must_be_in_pair(self):
        design = grid_design(2, 2)
        session = SortSession(design, "interleave", seed=0)
        with pytest.raises(ProtocolError, match="not in the pending pair"):
            session.report("unrelated")

    def test_ranking_unavailable_until_done(self):
        design = grid_design(2, 2)
        session = SortSession(design, "interleave", seed=0)
        with pytest.raises(ProtocolError, match="not complete"):
            _ = session.ranking

    def test_unknown_mode(self):
        with pytest.raises(ValueError, match="mode"):
            SortSession(grid_design(2, 2), "quick")


class TestTranscript:
    def test_replay_reproduces_ranking(self):
        design = grid_design(5, 4)
        rng = random.Random(105)
        for mode in ("interleave", "bst"):
            truth = random_consistent_order(design, rng)
            session = SortSession(design, mode, seed=9)
            run_with_truth(session, truth)
            winners = [w for _, w in session.transcript]
            again = replay(design, mode, 9, winners)
            assert again.done
            assert again.ranking == session.ranking
            assert again.transcript == session.transcript

    def test_remaining_bounds_shrink_to_zero(self):
        design = grid_design(5, 4)
        rng = random.Random(106)
        truth = random_consistent_order(design, rng)
        session = SortSession(design, "interleave", seed=11)
        quality = {s: len(truth) - i for i, s in enumerate(truth)}
        last_hi = None
        while not session.done:
            lo, hi = session.remaining_bounds()
            assert 0 <= lo <= hi
            if last_hi is not None:
                assert hi <= last_hi
            last_hi = hi
            a, b = session.next_pair()
            session.report(a if quality[a] > quality[b] else b)
        assert session.remaining_bounds() == (0, 0)

    def test_bounds_cover_actual_count(self):
        design = grid_design(5, 4)
        rng = random.Random(107)
        for _ in range(50):
            truth = random_consistent_order(design, rng)
            session = SortSession(design, "interleave", seed=rng.getrandbits(32))
            lo, hi = session.remaining_bounds()
            run_with_truth(session, truth)
            assert lo <= session.comparisons <= hi


class TestSimulation:
    def test_interleave_statistics(self):
        stats = simulate_sessions(grid_design(5, 4), "interleave", sessions=2000, seed=1)
        assert stats["exact_recovery_rate"] == 1.0
        assert 20 <= stats["min_comparisons"]
        assert stats["max_comparisons"] <= 44

    def test_bst_statistics_n36(self):
        design = StudyDesign.from_chains([(f"s{k}",) for k in range(36)])
        stats = simulate_sessions(design, "bst", sessions=2000, seed=2)
        assert stats["exact_recovery_rate"] == 1.0
        assert stats["max_comparisons"] <= 216
        assert 125 <= stats["mean_comparisons"] <= 155

    def test_noisy_observer_still_terminates(self):
        stats = simulate_sessions(grid_design(5, 4), "interleave", sessions=200, accuracy=0.8, seed=3)
        assert stats["exact_recovery_rate"] < 1.0
        assert stats["max_comparisons"] <= 44

    def test_uniform_consistent_order_respects_chains(self):
        design = grid_design(4, 3)
        rng = random.Random(8)
        for _ in range(100):
            order = random_consistent_order(design, rng)
            pos = {s: i for i, s in enumerate(order)}
            for chain in design.chains:
                positions = [pos[s] for s in chain]
                assert positions == sorted(positions)
