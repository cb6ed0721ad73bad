import numpy as np
import pytest
from numpy.testing import assert_allclose

from sier import (
    DEFAULT_PAIRS,
    Dataset,
    DegenerateFitError,
    PenaltyPair,
    RandomStream,
    SolverConfig,
    TuningGrid,
    ValidationError,
    cross_validate,
    max_components,
    predict,
)
from sier.tuning import share_rule_stop


def toy_dataset(seed=4, n=40, p=8, q=3, noise=0.1, rank=2):
    g = RandomStream(seed).generator()
    x = g.standard_normal((n, p))
    b = g.standard_normal((p, rank)) @ g.standard_normal((rank, q))
    y = x @ b + noise * g.standard_normal((n, q))
    return Dataset(x, y)


class TestMaxComponents:
    def test_small_second_magnitude(self):
        assert max_components([1.0, 0.01], 10, 10, 10) == 2

    def test_equal_magnitudes(self):
        assert max_components([1.0] * 60, 50, 50, 50) == 20

    def test_dimension_cap_binds(self):
        assert max_components([1.0, 0.9, 0.8, 0.7], 3, 100, 100) == 3

    def test_never_below_threshold(self):
        assert max_components([1.0, 1.0, 1.0], 3, 5, 7) == 3

    def test_stream_exhausted_early(self):
        assert max_components([1.0], 10, 10, 10) == 1

    def test_lazy_consumption(self):
        pulled = []

        def stream():
            for i in range(100):
                pulled.append(i)
                yield 1.0

        assert max_components(stream(), 50, 50, 50) == 20
        assert len(pulled) == 20

    def test_share_rule_stop_agrees(self):
        mus = [2.0, 1.5, 0.9, 0.12, 0.11]
        stop = share_rule_stop(0.05)
        k_by_stop = 0
        for k in range(1, len(mus) + 1):
            k_by_stop = k
            if stop(mus[:k]):
                break
        assert k_by_stop == max_components(mus, 99, 99, 99)


class TestTuningGrid:
    def test_default_pairs_exact(self):
        expect = [
            (0.05, 0.05), (0.1, 0.05), (0.1, 0.1), (0.5, 0.1), (0.5, 0.2),
            (1, 0.2), (1, 0.3), (5, 0.3), (5, 0.4), (10, 0.4), (50, 0.5),
            (100, 0.6),
        ]
        assert len(DEFAULT_PAIRS) == 12
        for pair, (t, l) in zip(DEFAULT_PAIRS, expect):
            assert pair.tau == t and pair.lam == l

    def test_validation(self):
        with pytest.raises(ValidationError):
            TuningGrid(pairs=())
        with pytest.raises(ValidationError):
            TuningGrid(threshold=0.0)
        with pytest.raises(ValidationError):
            TuningGrid(k_caps=(1,))


class TestCrossValidate:
    def test_fold_partition(self):
        data = toy_dataset()
        _model, report = cross_validate(data, rs=RandomStream(3))
        ids = report.fold_assignment
        assert ids.shape == (data.n,)
        sizes = np.bincount(ids, minlength=5)
        assert sizes.sum() == data.n
        assert sizes.max() - sizes.min() <= 1

    def test_report_shapes_and_minimum(self):
        data = toy_dataset()
        model, report = cross_validate(data, rs=RandomStream(3))
        n_pairs = len(report.pairs)
        assert n_pairs == 12
        assert report.errors.shape[0] == n_pairs
        assert report.errors.shape[1] == max(report.k_caps)
        chosen = report.errors[report.chosen_pair, report.chosen_k - 1]
        finite = report.errors[np.isfinite(report.errors)]
        assert chosen <= finite.min() + 1e-15
        assert model.k_opt == report.chosen_k >= 1

    def test_mean_error_is_fold_mean(self):
        data = toy_dataset()
        _model, report = cross_validate(data, rs=RandomStream(3))
        recomputed = np.mean(report.fold_errors, axis=1)
        mask = np.isfinite(report.errors)
        assert_allclose(report.errors[mask], recomputed[mask], rtol=0, atol=0)

    def test_dominating_pair_selected(self):
        # a sane pair against one that shrinks everything to mush
        data = toy_dataset(noise=0.05)
        grid = TuningGrid(pairs=(PenaltyPair(0.1, 0.1), PenaltyPair(1e6, 0.6)))
        model, report = cross_validate(data, grid, rs=RandomStream(5))
        assert report.chosen_pair == 0
        assert model.tau == 0.1

    def test_determinism_across_runs_and_threads(self):
        data = toy_dataset()
        m1, r1 = cross_validate(data, rs=RandomStream(11), threads=1)
        m2, r2 = cross_validate(data, rs=RandomStream(11), threads=1)
        m4, r4 = cross_validate(data, rs=RandomStream(11), threads=4)
        for ra, rb in [(r1, r2), (r1, r4)]:
            assert np.array_equal(ra.fold_assignment, rb.fold_assignment)
            assert np.array_equal(ra.fold_errors, rb.fold_errors, equal_nan=True)
            assert ra.chosen_pair == rb.chosen_pair and ra.chosen_k == rb.chosen_k
        x_new = RandomStream(99).generator().standard_normal((6, data.p))
        assert np.array_equal(predict(m1, x_new), predict(m4, x_new))

    def test_prefix_errors_match_refit(self):
        # the j-prefix validation error equals an independent refit's error
        from sier.model import standardize_apply, standardize_fit
        from sier.extractor import coefficient_matrix, cross_moment, fit_components

        data = toy_dataset()
        grid = TuningGrid(pairs=(PenaltyPair(0.5, 0.2),))
        _model, report = cross_validate(data, grid, rs=RandomStream(7))
        l = 0
        train = report.fold_assignment != l
        std, frame = standardize_fit(Dataset(data.x[train], data.y[train]), scale=False)
        cm = cross_moment(frame.x, frame.y)
        dec = fit_components(cm, grid.pairs[0], report.k_caps[0], SolverConfig())
        x_val = standardize_apply(std, data.x[~train])
        y_val = data.y[~train]
        for j in range(1, min(dec.k, report.k_caps[0]) + 1):
            pred = std.y_mean + x_val @ coefficient_matrix(dec, j)
            err = float(np.sum((y_val - pred) ** 2)) / y_val.shape[0]
            assert abs(err - report.fold_errors[0, l, j - 1]) <= 1e-12

    def test_k_caps_override(self):
        data = toy_dataset()
        grid = TuningGrid(pairs=(PenaltyPair(0.5, 0.2),), k_caps=(2,))
        model, report = cross_validate(data, grid, rs=RandomStream(2))
        assert report.k_caps == (2,)
        assert model.k_opt <= 2

    def test_small_n_rejected(self):
        data = toy_dataset(n=8)
        with pytest.raises(ValidationError):
            cross_validate(data, rs=RandomStream(0))

    def test_degenerate_all_zero_responses(self):
        g = RandomStream(6).generator()
        data = Dataset(g.standard_normal((20, 4)), np.zeros((20, 2)))
        with pytest.raises(DegenerateFitError):
            cross_validate(data, rs=RandomStream(0))

    def test_scaled_frame_mode(self):
        data = toy_dataset()
        model, _report = cross_validate(data, rs=RandomStream(3), scale=True)
        s_diag = np.mean(
            ((data.x - model.standardizer.x_mean) / model.standardizer.x_scale) ** 2,
            axis=0,
        )
        assert np.max(np.abs(s_diag - 1.0)) <= 1e-10
