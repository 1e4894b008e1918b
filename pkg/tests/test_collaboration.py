import inspect

import numpy as np
import pytest

from dcqe.collaboration import (
    assemble_collaborative,
    fit_integration,
    generate_anchor,
    make_intermediate,
    shared_anchor_basis,
)
from dcqe.datamodel import CollaborationScope, Dataset, PartitionSpec, PartyView, partition
from dcqe.errors import AnchorError, CollaborationError, DimensionError
from dcqe.experiments import ArtificialDataConfig, generate_artificial


def benchmark_pipeline(seed=3, anchor_seed=77, scope_kind="whole", collaborative_dim=6):
    """Reduced benchmark pipeline: 1000x6 data on a 2x2 grid, width-2 reductions."""
    data, _ = generate_artificial(ArtificialDataConfig(seed=seed))
    spec = PartitionSpec((500, 500), (3, 3))
    scope = CollaborationScope.build(scope_kind, spec)
    views = [v for v in partition(data, spec) if (v.row_index, v.col_index) in scope.parties]
    cols = np.concatenate([np.arange(spec.col_slice(l).start, spec.col_slice(l).stop)
                           for l in scope.col_indices])
    bounds = np.column_stack([data.covariates[:, cols].min(0), data.covariates[:, cols].max(0)])
    blocks = tuple(spec.col_blocks[l] for l in scope.col_indices)
    anchor = generate_anchor(bounds, 1000, anchor_seed, blocks)
    local_col = {l: i for i, l in enumerate(scope.col_indices)}
    reps = [make_intermediate(v, anchor.block(local_col[v.col_index]), 2) for v in views]
    return views, reps, collaborative_dim


class TestGenerateAnchor:
    def test_degenerate_interval_gives_constant(self):
        anchor = generate_anchor([(0.0, 0.0)], 5, seed=1)
        assert anchor.values.shape == (5, 1)
        np.testing.assert_array_equal(anchor.values, 0.0)

    def test_benchmark_size_matches_subject_count(self):
        bounds = [(-3.0, 3.0)] * 6
        anchor = generate_anchor(bounds, 1000, seed=0, column_blocks=(3, 3))
        assert anchor.values.shape == (1000, 6)
        assert anchor.block(0).shape == (1000, 3)
        assert anchor.block(1).shape == (1000, 3)

    def test_uniform_moments(self):
        bounds = [(-2.0, 6.0), (0.0, 1.0)]
        anchor = generate_anchor(bounds, 10_000, seed=9)
        for j, (low, high) in enumerate(bounds):
            column = anchor.values[:, j]
            assert column.min() >= low and column.max() <= high
            midpoint = (low + high) / 2.0
            stderr = (high - low) / np.sqrt(12.0 * 10_000)
            assert abs(column.mean() - midpoint) < 4.0 * stderr

    def test_deterministic_given_seed(self):
        bounds = [(0.0, 1.0), (-1.0, 1.0)]
        first = generate_anchor(bounds, 50, seed=4)
        second = generate_anchor(bounds, 50, seed=4)
        assert np.array_equal(first.values, second.values)

    def test_invalid_inputs(self):
        with pytest.raises(AnchorError):
            generate_anchor([], 5, seed=0)
        with pytest.raises(AnchorError):
            generate_anchor([(1.0, 0.0)], 5, seed=0)
        with pytest.raises(AnchorError):
            generate_anchor([(0.0, 1.0)], 0, seed=0)
        with pytest.raises(AnchorError):
            generate_anchor([(0.0, 1.0)] * 3, 5, seed=0, column_blocks=(2, 2))


def make_view(rows, cols, seed=0, row_index=0, col_index=0):
    rng = np.random.default_rng(seed)
    z = np.zeros(rows, dtype=int)
    z[: rows // 2] = 1
    return PartyView(row_index, col_index, rng.normal(size=(rows, cols)), z, rng.normal(size=rows))


class TestMakeIntermediate:
    def test_benchmark_party_shapes(self):
        view = make_view(500, 3)
        anchor_block = np.random.default_rng(1).uniform(-3, 3, size=(1000, 3))
        rep = make_intermediate(view, anchor_block, 2)
        assert rep.data_rep.shape == (500, 2)
        assert rep.anchor_rep.shape == (1000, 2)
        assert rep.reduced_dim == 2

    def test_wider_party_shapes(self):
        view = make_view(1337, 4, seed=2)
        anchor_block = np.random.default_rng(3).uniform(-1, 1, size=(2674, 4))
        rep = make_intermediate(view, anchor_block, 3)
        assert rep.data_rep.shape == (1337, 3)
        assert rep.anchor_rep.shape == (2674, 3)

    def test_rank_one_block_preserves_all_variance(self):
        rng = np.random.default_rng(5)
        base = rng.normal(size=60)
        covariates = np.column_stack([base, 2.0 * base, -0.5 * base])
        z = np.zeros(60, dtype=int)
        z[:30] = 1
        view = PartyView(0, 0, covariates, z, rng.normal(size=60))
        rep = make_intermediate(view, rng.uniform(-1, 1, size=(10, 3)), 1)
        # Standardized rank-1 block has total variance 3, all on one direction.
        assert rep.data_rep[:, 0].var(ddof=1) == pytest.approx(3.0, abs=1e-8)

    def test_fit_depends_on_party_data_only(self):
        # Different anchors may not change the party-side reduction: the
        # standardization and components are fitted on the private block.
        view = make_view(100, 3, seed=9)
        rng = np.random.default_rng(10)
        rep_a = make_intermediate(view, rng.uniform(-5, 5, size=(40, 3)), 2)
        rep_b = make_intermediate(view, rng.uniform(-5, 5, size=(40, 3)), 2)
        assert np.array_equal(rep_a.data_rep, rep_b.data_rep)

    def test_reduction_must_be_strict(self):
        view = make_view(20, 3)
        block = np.zeros((5, 3))
        with pytest.raises(DimensionError):
            make_intermediate(view, block, 3)
        with pytest.raises(DimensionError):
            make_intermediate(view, block, 0)

    def test_anchor_width_must_match(self):
        view = make_view(20, 3)
        with pytest.raises(DimensionError):
            make_intermediate(view, np.zeros((5, 2)), 1)


class TestFitIntegration:
    def test_single_row_block_aligns_exactly(self):
        rng = np.random.default_rng(7)
        views = [make_view(40, 4, seed=1, col_index=0), make_view(40, 3, seed=1, col_index=1)]
        anchor_blocks = [rng.uniform(-2, 2, size=(50, 4)), rng.uniform(-2, 2, size=(50, 3))]
        reps = [make_intermediate(v, b, 2) for v, b in zip(views, anchor_blocks)]
        functions = fit_integration(reps, 4)
        basis = shared_anchor_basis(reps, 4)
        stacked = np.hstack([reps[0].anchor_rep, reps[1].anchor_rep])
        np.testing.assert_allclose(stacked @ functions[0].matrix, basis, atol=1e-8)

    def test_identical_row_blocks_get_identical_maps(self):
        rng = np.random.default_rng(8)
        anchor_rep = rng.normal(size=(30, 3))
        data = rng.normal(size=(12, 3))
        from dcqe.collaboration import IntermediateRepresentation

        reps = [
            IntermediateRepresentation(0, 0, data, anchor_rep),
            IntermediateRepresentation(1, 0, data, anchor_rep),
        ]
        functions = fit_integration(reps, 3)
        assert np.array_equal(functions[0].matrix, functions[1].matrix)
        basis = shared_anchor_basis(reps, 3)
        np.testing.assert_allclose(anchor_rep @ functions[0].matrix, basis, atol=1e-8)

    def test_benchmark_alignment_residual_regression(self):
        # With width-4 anchor images and a 6-column shared basis the relative
        # residual cannot drop below sqrt(2/6) ~ 0.5774 (two basis directions
        # lie outside each block's span); the pipeline sits essentially at
        # that floor. Frozen regression bound from a seeded run: 0.5777.
        _, reps, collaborative_dim = benchmark_pipeline()
        functions = fit_integration(reps, collaborative_dim)
        basis = shared_anchor_basis(reps, collaborative_dim)
        for fn in functions:
            own = np.hstack([r.anchor_rep for r in reps if r.row_index == fn.row_index])
            residual = np.linalg.norm(own @ fn.matrix - basis) / np.linalg.norm(basis)
            assert residual < 0.60

    def test_pairwise_alignment_bounded_by_shared_target(self):
        _, reps, collaborative_dim = benchmark_pipeline(seed=6, anchor_seed=11)
        functions = fit_integration(reps, collaborative_dim)
        basis = shared_anchor_basis(reps, collaborative_dim)
        images = {}
        residuals = {}
        for fn in functions:
            own = np.hstack([r.anchor_rep for r in reps if r.row_index == fn.row_index])
            images[fn.row_index] = own @ fn.matrix
            residuals[fn.row_index] = np.linalg.norm(images[fn.row_index] - basis)
        keys = sorted(images)
        worst = max(residuals.values())
        for i, a in enumerate(keys):
            for b in keys[i + 1:]:
                pairwise = np.linalg.norm(images[a] - images[b])
                assert pairwise <= 2.0 * worst + 1e-9

    def test_shared_basis_is_orthonormal(self):
        _, reps, collaborative_dim = benchmark_pipeline(seed=9, anchor_seed=5)
        basis = shared_anchor_basis(reps, collaborative_dim)
        np.testing.assert_allclose(basis.T @ basis, np.eye(basis.shape[1]), atol=1e-8)

    def test_requested_width_clamps_to_combined_width(self):
        # Top-side collaboration: one row block, two width-2 images; asking
        # for 6 shared directions can only ever return 4.
        _, reps, _ = benchmark_pipeline(scope_kind="top")
        functions = fit_integration(reps, 6)
        assert functions[0].collaborative_dim == 4

    def test_width_beyond_anchor_rows_rejected(self):
        _, reps, _ = benchmark_pipeline()
        with pytest.raises(DimensionError):
            fit_integration(reps, 1001)
        with pytest.raises(DimensionError):
            fit_integration(reps, 0)

    def test_missing_block_rejected(self):
        _, reps, _ = benchmark_pipeline()
        with pytest.raises(CollaborationError):
            fit_integration(reps[:-1], 4)

    def test_duplicate_party_rejected(self):
        _, reps, _ = benchmark_pipeline()
        with pytest.raises(CollaborationError):
            fit_integration(reps + [reps[0]], 4)


def assemble_benchmark(scope_kind, collaborative_dim, seed=3, anchor_seed=77):
    views, reps, _ = benchmark_pipeline(seed=seed, anchor_seed=anchor_seed,
                                        scope_kind=scope_kind,
                                        collaborative_dim=collaborative_dim)
    functions = fit_integration(reps, collaborative_dim)
    return assemble_collaborative(
        reps,
        functions,
        {v.row_index: v.treatments for v in views},
        {v.row_index: v.outcomes for v in views},
    )


class TestAssemble:
    def test_whole_collaboration_width(self):
        collab = assemble_benchmark("whole", 6)
        assert collab.values.shape == (1000, 6)
        assert collab.row_blocks == (500, 500)
        assert collab.treatments.shape == (1000,)

    def test_left_collaboration_width(self):
        collab = assemble_benchmark("left", 3)
        assert collab.values.shape == (1000, 3)

    def test_single_party_spans_reduction_scores(self):
        rng = np.random.default_rng(12)
        z = np.zeros(80, dtype=int)
        z[:40] = 1
        data = Dataset(rng.normal(size=(80, 4)), z, rng.normal(size=80))
        spec = PartitionSpec((80,), (4,))
        view = partition(data, spec)[0]
        bounds = np.column_stack([data.covariates.min(0), data.covariates.max(0)])
        anchor = generate_anchor(bounds, 80, 3, (4,))
        rep = make_intermediate(view, anchor.block(0), 3)
        functions = fit_integration([rep], 3)
        collab = assemble_collaborative(
            [rep], functions, {0: view.treatments}, {0: view.outcomes}
        )
        # The aligned representation is an invertible linear image of the
        # reduction scores, so predicting it from them leaves no residual.
        solution, residual, rank, _ = np.linalg.lstsq(rep.data_rep, collab.values, rcond=None)
        assert rank == 3
        reconstruction = rep.data_rep @ solution
        np.testing.assert_allclose(reconstruction, collab.values, atol=1e-8)

    def test_mismatched_integrations_rejected(self):
        views, reps, _ = benchmark_pipeline()
        functions = fit_integration(reps, 6)
        with pytest.raises(CollaborationError):
            assemble_collaborative(
                reps, functions[:1],
                {v.row_index: v.treatments for v in views},
                {v.row_index: v.outcomes for v in views},
            )

    def test_missing_labels_rejected(self):
        views, reps, _ = benchmark_pipeline()
        functions = fit_integration(reps, 6)
        with pytest.raises(CollaborationError):
            assemble_collaborative(reps, functions, {}, {})


class TestPrivacyBoundary:
    ANALYST_FUNCTIONS = (fit_integration, assemble_collaborative, shared_anchor_basis)

    def test_analyst_signatures_never_mention_party_views(self):
        for fn in self.ANALYST_FUNCTIONS:
            signature = inspect.signature(fn)
            for parameter in signature.parameters.values():
                annotation = str(parameter.annotation)
                assert "PartyView" not in annotation
                assert "Dataset" not in annotation

    def test_analyst_output_ignores_covariate_tampering(self):
        views, reps, _ = benchmark_pipeline(seed=15, anchor_seed=2)
        labels = ({v.row_index: v.treatments for v in views},
                  {v.row_index: v.outcomes for v in views})
        functions_before = fit_integration(reps, 6)
        before = assemble_collaborative(reps, functions_before, *labels)
        for view in views:  # overwrite the private blocks after sharing
            view.covariates[:] = 0.0
        functions_after = fit_integration(reps, 6)
        after = assemble_collaborative(reps, functions_after, *labels)
        assert np.array_equal(before.values, after.values)


class TestDeterminism:
    def test_fixed_seeds_give_bit_identical_representations(self):
        first = assemble_benchmark("whole", 6, seed=4, anchor_seed=21)
        second = assemble_benchmark("whole", 6, seed=4, anchor_seed=21)
        assert np.array_equal(first.values, second.values)
        assert np.array_equal(first.treatments, second.treatments)
        assert np.array_equal(first.outcomes, second.outcomes)
