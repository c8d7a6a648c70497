import numpy as np
import pytest

from vitprune import PruneConfig, diversity_score, forward, measure
from vitprune.errors import InputError
from vitprune.testing import random_image, random_weight_store, small_config


class TestDiversityScore:
    def test_rank_one_matrix_scores_zero(self):
        z = np.array([2.0, -1.0, 0.5])
        stack = np.tile(z, (6, 1))
        assert diversity_score(stack) == 0.0

    def test_three_point_column(self):
        # rows 0, 1, 5 -> median 1, deviations 1 + 0 + 4
        assert diversity_score(np.array([[0.0], [1.0], [5.0]])) == 5.0

    def test_permutation_invariance_exact(self):
        rng = np.random.default_rng(0)
        z = rng.standard_normal((9, 5))
        for _ in range(10):
            perm = rng.permutation(9)
            assert diversity_score(z[perm]) == diversity_score(z)

    def test_positive_scaling_is_linear(self):
        rng = np.random.default_rng(1)
        z = rng.standard_normal((7, 4))
        assert abs(diversity_score(2.0 * z) - 2.0 * diversity_score(z)) < 1e-9

    def test_zero_iff_identical_rows(self):
        rng = np.random.default_rng(2)
        z = rng.standard_normal((5, 3))
        assert diversity_score(z) > 1e-9
        z[1:] = z[0]
        assert diversity_score(z) < 1e-9

    def test_single_row_scores_zero(self):
        assert diversity_score(np.array([[3.0, -2.0]])) == 0.0

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            diversity_score(np.empty((0, 4)))

    def test_median_beats_grid_candidates(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            z = rng.standard_normal((6, 4))
            best = diversity_score(z)
            for _ in range(50):
                cand = rng.uniform(z.min(), z.max(), size=4)
                assert best <= np.abs(z - cand).sum() + 1e-12


class TestMeasure:
    def _trace(self, prune, seed=4):
        config = small_config(depth=5)
        rng = np.random.default_rng(seed)
        store = random_weight_store(config, rng)
        img = random_image(config, rng)
        _, trace = forward(img, store, prune, config)
        return trace

    def test_final_prune_layer_scope(self):
        trace = self._trace(PruneConfig(prune_layers=(2, 4), keep_rate=0.5))
        rep = measure(trace)
        assert rep.measured_at == "final_prune_layer"
        assert len(rep.per_layer) == 1
        assert rep.per_layer[0].block == 4
        assert rep.per_layer[0].score >= 0.0
        post = trace.layers[3].post_prune
        assert rep.per_layer[0].token_count == post.n_patch_tokens
        assert rep.per_layer[0].score == diversity_score(post.patch_tokens)

    def test_all_layers_scope(self):
        trace = self._trace(PruneConfig(prune_layers=(2,), keep_rate=0.5))
        rep = measure(trace, scope="all_layers")
        assert [e.block for e in rep.per_layer] == [1, 2, 3, 4, 5]
        assert all(e.score >= 0.0 for e in rep.per_layer)

    def test_unpruned_trace_falls_back_to_last_block(self):
        trace = self._trace(None)
        rep = measure(trace)
        assert rep.per_layer[0].block == 5

    def test_identity_schedule_matches_unpruned(self):
        identity = PruneConfig(prune_layers=(2, 4), keep_rate=1.0, pair_count=0)
        r_id = measure(self._trace(identity, seed=5), scope="all_layers")
        r_base = measure(self._trace(None, seed=5), scope="all_layers")
        for a, b in zip(r_id.per_layer, r_base.per_layer):
            assert a.score == b.score

    def test_bad_scope_rejected(self):
        with pytest.raises(InputError):
            measure(self._trace(None), scope="sometimes")

    def test_lower_keep_rate_not_more_diverse_single_layer(self):
        # with one prune layer both settings reduce the same matrix, so the
        # smaller attentive subset can never be the more diverse one
        config = small_config(depth=3)
        rng = np.random.default_rng(6)
        hits = 0
        for trial in range(10):
            store = random_weight_store(config, rng)
            img = random_image(config, rng)
            scores = {}
            for eta in (0.3, 0.9):
                pc = PruneConfig(strategy="importance_only", prune_layers=(2,),
                                 keep_rate=eta)
                _, trace = forward(img, store, pc, config)
                scores[eta] = measure(trace).per_layer[0].score
            hits += scores[0.3] <= scores[0.9]
        assert hits == 10
