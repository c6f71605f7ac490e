"""Dataset container, CSV ingestion, subsampling, and scaling tests."""

import numpy as np
import pytest

from poisonlab import (
    CsvFormatError,
    Dataset,
    Provenance,
    export_csv,
    from_arrays,
    load_csv,
    standardize,
    stratified_subsample,
)

from synth import email_corpus, two_gaussians, write_csv


def small_dataset(n=10, d=3, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    y = np.array([-1, 1] * (n // 2))
    return from_arrays(X, y, feature_names=tuple(f"c{i}" for i in range(d)))


class TestLoadCsv:
    def test_three_row_csv(self, tmp_path):
        p = tmp_path / "tiny.csv"
        p.write_text("a,b,label\n1,2,spam\n3,4,ham\n5,6,spam\n")
        ds = load_csv(p, "label", "spam", "ham")
        assert ds.n == 3 and ds.d == 2
        assert list(ds.y) == [1, -1, 1]
        assert list(ds.ids) == [0, 1, 2]
        assert ds.feature_names == ("a", "b")
        assert all(pv == Provenance.ORIGINAL.value for pv in ds.provenance)
        assert ds.X.dtype == np.float64
        assert not ds.is_standardized

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / "nope.csv", "label", "a", "b")

    def test_non_numeric_cell_names_row_and_column(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b,label\n1,2,spam\n3,oops,ham\n")
        with pytest.raises(CsvFormatError) as exc:
            load_csv(p, "label", "spam", "ham")
        assert exc.value.row == 2
        assert exc.value.column == "b"

    def test_unknown_label_value_names_row(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,label\n1,spam\n2,maybe\n")
        with pytest.raises(CsvFormatError) as exc:
            load_csv(p, "label", "spam", "ham")
        assert exc.value.row == 2
        assert exc.value.column == "label"

    def test_missing_label_column(self, tmp_path):
        p = tmp_path / "bad.csv"
        p.write_text("a,b\n1,2\n3,4\n")
        with pytest.raises(CsvFormatError):
            load_csv(p, "label", "spam", "ham")

    def test_fewer_than_two_rows(self, tmp_path):
        p = tmp_path / "one.csv"
        p.write_text("a,label\n1,spam\n")
        with pytest.raises(CsvFormatError):
            load_csv(p, "label", "spam", "ham")

    def test_ragged_row_rejected(self, tmp_path):
        p = tmp_path / "ragged.csv"
        p.write_text("a,b,label\n1,2,spam\n3,ham\n")
        with pytest.raises(CsvFormatError) as exc:
            load_csv(p, "label", "spam", "ham")
        assert exc.value.row == 2

    def test_email_scale_dimensionality(self, email_csv):
        ds = load_csv(email_csv, "label", "spam", "nonspam")
        assert ds.d == 57
        assert ds.n == 4601
        assert ds.class_counts() == {-1: 2788, 1: 1813}


class TestExportRoundTrip:
    def test_load_export_load_identity(self, tmp_path):
        ds = small_dataset()
        out = tmp_path / "out.csv"
        export_csv(ds, out)
        back = load_csv(out, "label", "1", "-1")
        assert np.array_equal(back.X, ds.X)
        assert np.array_equal(back.y, ds.y)
        assert np.array_equal(back.ids, ds.ids)
        assert list(back.provenance) == list(ds.provenance)
        assert back.feature_names == ds.feature_names

    def test_round_trip_preserves_poisons_and_raw_space(self, tmp_path):
        ds = standardize(small_dataset())
        ds = ds.with_poisons(np.ones((2, 3)), -1)
        out = tmp_path / "out.csv"
        export_csv(ds, out)
        back = load_csv(out, "label", "1", "-1")
        assert np.array_equal(back.X, ds.to_raw(ds.X))
        assert back.poison_mask().sum() == 2
        assert np.array_equal(back.ids, ds.ids)


class TestStratifiedSubsample:
    def test_email_ratio_split(self):
        corpus = email_corpus()
        sub = stratified_subsample(corpus, 400, seed=42)
        assert sub.class_counts() == {-1: 243, 1: 157}
        assert sub.n == 400
        assert list(sub.ids) == list(range(400))

    def test_identity_when_n_equals_size(self):
        ds = small_dataset()
        sub = stratified_subsample(ds, ds.n, seed=1)
        assert np.array_equal(np.sort(sub.X, axis=0), np.sort(ds.X, axis=0))
        assert sub.class_counts() == ds.class_counts()

    def test_deterministic_per_seed(self):
        ds = two_gaussians(n=60, seed=5)
        a = stratified_subsample(ds, 30, seed=9)
        b = stratified_subsample(ds, 30, seed=9)
        assert np.array_equal(a.X, b.X)
        assert np.array_equal(a.y, b.y)
        c = stratified_subsample(ds, 30, seed=10)
        assert not np.array_equal(a.X, c.X)

    def test_source_ids_map_back(self):
        ds = two_gaussians(n=60, seed=5)
        sub = stratified_subsample(ds, 30, seed=9)
        assert sub.source_ids is not None
        for new_id, old_id in sub.source_ids.items():
            assert np.array_equal(
                sub.X[sub.row_of(new_id)], ds.X[ds.row_of(old_id)]
            )

    def test_rounding_rule_counts(self):
        # remainder seat goes to the majority class
        ds = two_gaussians(n=200, seed=3)  # 100 / 100
        sub = stratified_subsample(ds, 55, seed=0)
        counts = sub.class_counts()
        assert counts[-1] + counts[1] == 55
        assert counts[-1] == 28 and counts[1] == 27  # tie favors negative

    def test_errors(self):
        ds = small_dataset()
        with pytest.raises(ValueError):
            stratified_subsample(ds, ds.n + 1, seed=0)
        with pytest.raises(ValueError):
            stratified_subsample(ds, 1, seed=0)  # one class would get 0 seats


class TestStandardize:
    def test_moments(self):
        ds = standardize(two_gaussians(n=100, seed=2))
        assert np.all(np.abs(ds.X.mean(axis=0)) < 1e-9)
        assert np.all(np.abs(ds.X.std(axis=0) - 1.0) < 1e-9)
        assert ds.is_standardized

    def test_analytic_value(self):
        X = np.array([[8.0], [12.0]])
        ds = from_arrays(X, np.array([-1, 1]))
        std = standardize(ds)
        # mean 10, population stddev 2 -> 12 maps to 1.0
        assert std.X[1, 0] == pytest.approx(1.0)
        assert std.feature_means[0] == pytest.approx(10.0)
        assert std.feature_stds[0] == pytest.approx(2.0)

    def test_constant_column_passes_through(self):
        X = np.column_stack([np.full(6, 3.0), np.arange(6, dtype=float)])
        ds = from_arrays(X, np.array([-1, 1] * 3))
        std = standardize(ds)
        assert np.all(std.X[:, 0] == 0.0)
        assert std.feature_stds[0] == 1.0

    def test_inverse_round_trip(self):
        ds = two_gaussians(n=80, seed=11)
        std = standardize(ds)
        assert np.all(np.abs(std.to_raw(std.X) - ds.X) < 1e-9)


class TestDataset:
    def test_immutability(self):
        ds = small_dataset()
        with pytest.raises(ValueError):
            ds.X[0, 0] = 99.0
        with pytest.raises(ValueError):
            ds.y[0] = 1

    def test_unique_ids_enforced(self):
        with pytest.raises(ValueError):
            Dataset(
                X=np.zeros((2, 1)),
                y=np.array([-1, 1]),
                ids=np.array([0, 0]),
                provenance=np.array(["original", "original"], dtype=object),
                feature_names=("a",),
            )

    def test_label_domain_enforced(self):
        with pytest.raises(ValueError):
            from_arrays(np.zeros((2, 1)), np.array([0, 1]))

    def test_instance_accessor(self):
        ds = small_dataset()
        inst = ds.instance(3)
        assert inst.id == 3
        assert inst.label == ds.y[3]
        assert np.array_equal(inst.features, ds.X[3])
        assert inst.provenance == Provenance.ORIGINAL
        with pytest.raises(KeyError):
            ds.instance(999)

    def test_with_poisons_extends_ids(self):
        ds = small_dataset()
        poisoned = ds.with_poisons(np.zeros((3, 3)), 1)
        assert poisoned.n == ds.n + 3
        assert list(poisoned.ids[-3:]) == [10, 11, 12]
        assert poisoned.poison_mask().sum() == 3
        assert all(poisoned.y[-3:] == 1)
        # original rows untouched
        assert np.array_equal(poisoned.X[: ds.n], ds.X)

    def test_without_row(self):
        ds = small_dataset()
        smaller = ds.without_row(4)
        assert smaller.n == ds.n - 1
        assert 4 not in smaller.ids

    def test_fingerprint_sensitivity(self):
        ds = small_dataset()
        base = ds.fingerprint()
        assert ds.fingerprint() == base
        assert ds.with_poisons(np.zeros((1, 3)), 1).fingerprint() != base
        assert ds.without_row(0).fingerprint() != base

    def test_standardization_vector_validation(self):
        with pytest.raises(ValueError):
            Dataset(
                X=np.zeros((2, 2)),
                y=np.array([-1, 1]),
                ids=np.array([0, 1]),
                provenance=np.array(["original", "original"], dtype=object),
                feature_names=("a", "b"),
                feature_means=np.zeros(2),
                feature_stds=np.array([1.0, 0.0]),
            )


def test_write_csv_helper_round_trips(tmp_path):
    ds = two_gaussians(n=20, seed=1)
    p = tmp_path / "plain.csv"
    write_csv(ds, p, label_names=("neg", "pos"))
    back = load_csv(p, "label", "pos", "neg")
    assert np.array_equal(back.X, ds.X)
    assert np.array_equal(back.y, ds.y)
