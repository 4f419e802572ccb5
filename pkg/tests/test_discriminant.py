"""Tests for LDA/QDA fitting, posteriors and the MMP/MJP decision rules."""

import math

import numpy as np
import pytest

from crop_spectra.core.constants import CROPS, STAGES, CropLabel, StageLabel
from crop_spectra.core.dataset import Dataset, JointLabel, SampleRecord, WavelengthGrid
from crop_spectra.core.exceptions import DatasetError, ModelError, NumericalError
from crop_spectra.models import discriminant
from crop_spectra.models.discriminant import (
    DecisionRule,
    DiscriminantKind,
    DiscriminantModel,
    LabelingMode,
)

CORN_CRITICAL = JointLabel(CropLabel.CORN, StageLabel.CRITICAL)
CORN_MATURE = JointLabel(CropLabel.CORN, StageLabel.MATURE_SENESC)
SOY_CRITICAL = JointLabel(CropLabel.SOYBEANS, StageLabel.CRITICAL)
WHEAT_LATE = JointLabel(CropLabel.WINTER_WHEAT, StageLabel.LATE)


def _dataset(samples_by_label):
    """Dataset from {JointLabel: (n, B) array}."""
    band_count = next(iter(samples_by_label.values())).shape[1]
    grid = WavelengthGrid(tuple(500.0 + 10 * b for b in range(band_count)))
    records = [
        SampleRecord(row, label.crop, label.stage)
        for label, rows in samples_by_label.items()
        for row in rows
    ]
    return Dataset(grid, tuple(records))


def _posterior_model(probabilities):
    """Two-band joint LDA model whose posteriors at the origin equal ``probabilities``.

    With identity covariance and uniform priors, the posterior of class k at
    the origin is proportional to exp(-|mean_k|^2 / 2).
    """
    labels = sorted(probabilities, key=lambda l: (CROPS.index(l.crop), STAGES.index(l.stage)))
    top = max(math.log(p) for p in probabilities.values())
    means = np.array(
        [[math.sqrt(2.0 * (top - math.log(probabilities[l]))), 0.0] for l in labels]
    )
    k = len(labels)
    return DiscriminantModel(
        mode=LabelingMode.JOINT_CROP_STAGE,
        kind=DiscriminantKind.LDA,
        classes=tuple(labels),
        means=means,
        priors=np.full(k, 1.0 / k),
        class_counts=(10,) * k,
        factors=(np.eye(2),),
        log_dets=(0.0,),
        shrinkage=0.0,
    )


def _random_joint_data(rng, labels, n=8, bands=2, spread=5.0):
    samples = {}
    for label in labels:
        center = rng.normal(scale=spread, size=bands)
        samples[label] = rng.normal(center, 1.0 + rng.random(), size=(n, bands))
    return _dataset(samples)


class TestFit:
    def test_crop_only_classes(self, separable_dataset):
        m = discriminant.fit(separable_dataset, LabelingMode.CROP_ONLY, DiscriminantKind.LDA)
        assert m.classes == (CropLabel.CORN, CropLabel.COTTON, CropLabel.RICE), f"Unexpected classes {m.classes}"
        assert len(m.factors) == 1, "LDA stores exactly one covariance factor"
        np.testing.assert_allclose(m.priors, [1 / 3] * 3)

    def test_joint_classes_and_support(self, separable_dataset):
        m = discriminant.fit(separable_dataset, LabelingMode.JOINT_CROP_STAGE, DiscriminantKind.QDA, shrinkage=0.1)
        assert len(m.classes) == 6, f"Expected 6 joint classes, got {len(m.classes)}"
        assert len(m.factors) == 6, "QDA stores one factor per class"
        mask = m.support_mask()
        assert mask.sum() == 6, "Support mask should mark the 6 realized pairs"
        assert mask[STAGES.index(StageLabel.EMERGE_VEARLY), CROPS.index(CropLabel.CORN)], "Corn/EmergeVEarly realized"
        assert not mask[:, CROPS.index(CropLabel.SOYBEANS)].any(), "Soybeans never realized"

    def test_empirical_priors(self, rng):
        ds = _dataset({
            CORN_CRITICAL: rng.normal(size=(6, 2)),
            SOY_CRITICAL: rng.normal(size=(2, 2)) + 5,
        })
        m = discriminant.fit(ds, LabelingMode.CROP_ONLY, DiscriminantKind.LDA, priors="empirical")
        np.testing.assert_allclose(m.priors, [0.75, 0.25])

    def test_sparse_class_named(self, rng):
        ds = _dataset({CORN_CRITICAL: rng.normal(size=(5, 2)), WHEAT_LATE: rng.normal(size=(1, 2))})
        with pytest.raises(DatasetError, match="WinterWheat/Late has 1 sample"):
            discriminant.fit(ds, LabelingMode.JOINT_CROP_STAGE, DiscriminantKind.LDA)

    def test_sparse_class_dropped(self, rng):
        ds = _dataset({
            CORN_CRITICAL: rng.normal(size=(5, 2)),
            SOY_CRITICAL: rng.normal(size=(5, 2)) + 3,
            WHEAT_LATE: rng.normal(size=(1, 2)),
        })
        m = discriminant.fit(ds, LabelingMode.JOINT_CROP_STAGE, DiscriminantKind.LDA, drop_sparse_classes=True)
        assert WHEAT_LATE not in m.classes, "Sparse class should be left out"
        table = discriminant.joint_posterior_table(m, np.zeros(2))
        assert table.cell(CropLabel.WINTER_WHEAT, StageLabel.LATE) == 0.0, "Dropped class has exactly zero posterior"

    def test_qda_singular_names_class(self, rng):
        ds = _dataset({CORN_CRITICAL: rng.normal(size=(3, 5)), SOY_CRITICAL: rng.normal(size=(3, 5))})
        with pytest.raises(NumericalError, match="Corn/Critical at lambda=0.0"):
            discriminant.fit(ds, LabelingMode.JOINT_CROP_STAGE, DiscriminantKind.QDA)
        discriminant.fit(ds, LabelingMode.JOINT_CROP_STAGE, DiscriminantKind.QDA, shrinkage=0.2)

    def test_invalid_priors(self, separable_dataset):
        with pytest.raises(ModelError, match="Invalid priors"):
            discriminant.fit(separable_dataset, LabelingMode.CROP_ONLY, DiscriminantKind.LDA, priors="flat")


class TestPosteriors:
    def test_identical_classes_split_evenly(self, rng):
        rows = rng.normal(size=(6, 3))
        ds = _dataset({CORN_CRITICAL: rows, SOY_CRITICAL: rows.copy()})
        m = discriminant.fit(ds, LabelingMode.CROP_ONLY, DiscriminantKind.QDA)
        log_post = discriminant.class_log_posteriors(m, rng.normal(size=3))
        np.testing.assert_allclose(log_post, [math.log(0.5)] * 2, atol=1e-12)
        assert discriminant.predict_direct(m, rows[0]) == CropLabel.CORN, "Ties go to the first crop alphabetically"

    def test_far_into_basin(self, separable_dataset):
        m = discriminant.fit(separable_dataset, LabelingMode.CROP_ONLY, DiscriminantKind.QDA)
        cotton_mean = separable_dataset.spectra[np.array(separable_dataset.crops) == CropLabel.COTTON].mean(axis=0)
        posteriors = np.exp(discriminant.class_log_posteriors(m, cotton_mean))
        assert posteriors[1] > 0.999, f"Cotton posterior should dominate, got {posteriors}"

    def test_batch_matches_single(self, separable_dataset):
        m = discriminant.fit(separable_dataset, LabelingMode.JOINT_CROP_STAGE, DiscriminantKind.LDA)
        batch = discriminant.class_log_posteriors(m, separable_dataset.spectra[:5])
        for i in range(5):
            np.testing.assert_allclose(batch[i], discriminant.class_log_posteriors(m, separable_dataset.spectra[i]))

    def test_dimension_mismatch(self, separable_dataset):
        m = discriminant.fit(separable_dataset, LabelingMode.CROP_ONLY, DiscriminantKind.LDA)
        with pytest.raises(ModelError, match="model expects 4"):
            discriminant.class_log_posteriors(m, np.zeros(3))

    @pytest.mark.slow
    def test_normalization_many_models(self, rng):
        labels = [JointLabel(c, s) for c in CROPS[:3] for s in STAGES[:2]]
        checked = 0
        for trial in range(200):
            ds = _random_joint_data(rng, labels[: 2 + trial % 5], bands=3)
            kind = DiscriminantKind.QDA if trial % 2 else DiscriminantKind.LDA
            mode = LabelingMode.JOINT_CROP_STAGE if trial % 3 else LabelingMode.CROP_ONLY
            m = discriminant.fit(ds, mode, kind, shrinkage=0.05 * (trial % 4))
            for x in rng.normal(scale=8.0, size=(5, 3)):
                total = np.exp(discriminant.class_log_posteriors(m, x)).sum()
                assert abs(total - 1.0) < 1e-9, f"Posteriors sum to {total}"
                checked += 1
        assert checked == 1000, "Every model/input pair should be checked"

    def test_lda_matches_qda_for_shared_covariance(self, rng):
        offsets = rng.normal(size=(12, 2))
        ds = _dataset({
            CORN_CRITICAL: offsets + [0.0, 0.0],
            SOY_CRITICAL: offsets + [3.0, 1.0],
            WHEAT_LATE: offsets + [-2.0, 4.0],
        })
        lda = discriminant.fit(ds, LabelingMode.JOINT_CROP_STAGE, DiscriminantKind.LDA)
        qda = discriminant.fit(ds, LabelingMode.JOINT_CROP_STAGE, DiscriminantKind.QDA)
        xs, ys = np.meshgrid(np.linspace(-6, 8, 15), np.linspace(-5, 9, 15))
        probes = np.column_stack([xs.ravel(), ys.ravel()])
        np.testing.assert_allclose(
            discriminant.class_log_posteriors(lda, probes),
            discriminant.class_log_posteriors(qda, probes),
            atol=1e-8,
        )
        np.testing.assert_array_equal(
            discriminant.decide(lda, probes, DecisionRule.MJP),
            discriminant.decide(qda, probes, DecisionRule.MJP),
        )


def _oracle(ds, labels, kind, lam, x):
    """Posteriors by explicit inverses and determinants, uniform priors."""
    stats = []
    for label in labels:
        rows = [r.spectrum for r in ds.records if r.joint_label == label]
        n = len(rows)
        mean = sum(rows) / n
        cov = sum(np.outer(r - mean, r - mean) for r in rows) / n
        stats.append((mean, cov, n))
    if kind == DiscriminantKind.LDA:
        pooled = sum(n * cov for _, cov, n in stats) / sum(n for _, _, n in stats)
        stats = [(mean, pooled, n) for mean, _, n in stats]
    densities = []
    for mean, cov, _ in stats:
        b = len(mean)
        shrunk = (1 - lam) * cov + lam * np.trace(cov) / b * np.eye(b)
        inv = np.linalg.inv(shrunk)
        d = x - mean
        densities.append(math.exp(-0.5 * d @ inv @ d) / (2 * math.pi * math.sqrt(np.linalg.det(shrunk))))
    total = sum(densities)
    return np.array([p / total for p in densities])


class TestBruteForceOracle:
    @pytest.mark.parametrize("kind,lam", [(DiscriminantKind.LDA, 0.0), (DiscriminantKind.QDA, 0.0), (DiscriminantKind.QDA, 0.3)])
    def test_matches_oracle(self, rng, kind, lam):
        labels = [CORN_CRITICAL, CORN_MATURE, JointLabel(CropLabel.SOYBEANS, StageLabel.LATE), SOY_CRITICAL, WHEAT_LATE]
        ds = _random_joint_data(rng, labels, n=10, spread=3.0)
        m = discriminant.fit(ds, LabelingMode.JOINT_CROP_STAGE, kind, shrinkage=lam)
        assert list(m.classes) == labels, "Classes should be in crop, stage order"
        crop_of = np.array([CROPS.index(l.crop) for l in labels])
        for x in rng.normal(scale=3.0, size=(1000, 2)):
            expected = _oracle(ds, labels, kind, lam, x)
            got = np.exp(discriminant.class_log_posteriors(m, x))
            np.testing.assert_allclose(got, expected, atol=1e-9)

            marginals = np.array([expected[crop_of == c].sum() for c in range(len(CROPS))])
            crop, vector = discriminant.predict_mmp(m, x)
            assert crop == CROPS[int(np.argmax(marginals))], "MMP should match the brute-force argmax"
            np.testing.assert_allclose(vector, marginals, atol=1e-9)

            crop, cell = discriminant.predict_mjp(m, x)
            assert cell == labels[int(np.argmax(expected))], "MJP should pick the brute-force maximal cell"
            assert crop == cell.crop, "MJP crop should be the cell's crop"


class TestJointTables:
    def test_critical_corn_table(self):
        m = _posterior_model({CORN_CRITICAL: 0.58, SOY_CRITICAL: 0.42})
        table = discriminant.joint_posterior_table(m, np.zeros(2))
        assert abs(table.cell(CropLabel.CORN, StageLabel.CRITICAL) - 0.58) < 1e-9, "Corn/Critical cell"
        assert abs(table.cell(CropLabel.SOYBEANS, StageLabel.CRITICAL) - 0.42) < 1e-9, "Soybeans/Critical cell"
        assert np.count_nonzero(table.probabilities) == 2, "Unsupported cells are exactly zero"
        assert abs(table.probabilities.sum() - 1.0) < 1e-9, "Table sums to 1"
        assert discriminant.predict_mjp(m, np.zeros(2)) == (CropLabel.CORN, CORN_CRITICAL), "MJP picks Corn/Critical"
        assert discriminant.predict_mmp(m, np.zeros(2))[0] == CropLabel.CORN, "MMP picks Corn"

    def test_stage_split_marginal(self):
        m = _posterior_model({CORN_CRITICAL: 0.48, CORN_MATURE: 0.52})
        crop, marginals = discriminant.predict_mmp(m, np.zeros(2))
        assert crop == CropLabel.CORN, "All mass is on Corn"
        assert abs(marginals[CROPS.index(CropLabel.CORN)] - 1.0) < 1e-9, "Corn marginal is 1"
        assert discriminant.predict_mjp(m, np.zeros(2))[1] == CORN_MATURE, "Largest cell is Corn/MatureSenesc"

    def test_marginals_from_log_posteriors(self):
        m = _posterior_model({CORN_CRITICAL: 0.23, SOY_CRITICAL: 0.44, WHEAT_LATE: 0.33})
        log_post = np.log([0.23, 0.44, 0.33])
        marginals = np.exp(discriminant.crop_log_marginals(m, log_post))
        np.testing.assert_allclose(marginals, [0.23, 0.0, 0.0, 0.44, 0.33], atol=1e-12)
        assert CROPS[int(np.argmax(marginals))] == CropLabel.SOYBEANS, "Soybeans has the largest marginal"

    def test_single_class_table(self):
        m = _posterior_model({WHEAT_LATE: 1.0})
        table = discriminant.joint_posterior_table(m, np.array([3.0, -2.0]))
        assert abs(table.cell(CropLabel.WINTER_WHEAT, StageLabel.LATE) - 1.0) < 1e-12, "Only cell carries all mass"
        assert table.argmax_cell() == WHEAT_LATE, "Argmax is the only supported cell"

    def test_uniform_table_tie_break(self):
        m = _posterior_model({SOY_CRITICAL: 0.5, CORN_MATURE: 0.5})
        crop, marginals = discriminant.predict_mmp(m, np.zeros(2))
        assert crop == CropLabel.CORN, "Tied marginals go to the first crop alphabetically"
        assert discriminant.predict_mjp(m, np.zeros(2))[1] == CORN_MATURE, "Tied cells go to the first crop"

    def test_to_rows(self):
        m = _posterior_model({CORN_CRITICAL: 0.58, SOY_CRITICAL: 0.42})
        rows = discriminant.joint_posterior_table(m, np.zeros(2)).to_rows()
        assert [r["stage"] for r in rows] == [s.value for s in STAGES], "One row per stage in order"
        critical = rows[STAGES.index(StageLabel.CRITICAL)]
        assert abs(critical["Corn"] - 0.58) < 1e-9, "Row dicts are keyed by crop"


class TestDecisionRules:
    def test_wrong_mode(self, separable_dataset):
        crop_model = discriminant.fit(separable_dataset, LabelingMode.CROP_ONLY, DiscriminantKind.LDA)
        with pytest.raises(ModelError, match="joint_crop_stage"):
            discriminant.predict_mmp(crop_model, separable_dataset.spectra[0])
        with pytest.raises(ModelError):
            discriminant.joint_posterior_table(crop_model, separable_dataset.spectra[0])
        joint_model = discriminant.fit(separable_dataset, LabelingMode.JOINT_CROP_STAGE, DiscriminantKind.LDA)
        with pytest.raises(ModelError, match="crop_only"):
            discriminant.predict_direct(joint_model, separable_dataset.spectra[0])

    @pytest.mark.parametrize("rule", [DecisionRule.MMP, DecisionRule.MJP])
    def test_batch_rules_match_single(self, separable_dataset, rule):
        m = discriminant.fit(separable_dataset, LabelingMode.JOINT_CROP_STAGE, DiscriminantKind.QDA, shrinkage=0.1)
        batch = discriminant.predict_crops(m, separable_dataset.spectra[:10], rule)
        single = discriminant.predict_mmp if rule == DecisionRule.MMP else discriminant.predict_mjp
        assert batch == [single(m, x)[0] for x in separable_dataset.spectra[:10]], "Batch and single predictions differ"

    def test_separable_recovered(self, separable_dataset):
        for kind in DiscriminantKind:
            m = discriminant.fit(separable_dataset, LabelingMode.CROP_ONLY, kind)
            predicted = discriminant.predict_crops(m, separable_dataset.spectra, DecisionRule.DIRECT)
            assert tuple(predicted) == separable_dataset.crops, f"{kind.value} should recover every crop"


class TestDecisionInvariants:
    def test_dominant_cell_rules_agree(self):
        m = _posterior_model({CORN_CRITICAL: 0.2, CORN_MATURE: 0.15, SOY_CRITICAL: 0.6, WHEAT_LATE: 0.05})
        assert discriminant.predict_mmp(m, np.zeros(2))[0] == CropLabel.SOYBEANS, "MMP follows the dominant cell"
        assert discriminant.predict_mjp(m, np.zeros(2))[0] == CropLabel.SOYBEANS, "MJP follows the dominant cell"

    def test_rules_agree_wherever_one_class_dominates(self, separable_dataset, rng):
        m = discriminant.fit(separable_dataset, LabelingMode.JOINT_CROP_STAGE, DiscriminantKind.QDA, shrinkage=0.1)
        x = np.vstack([separable_dataset.spectra, rng.normal(30.0, 20.0, size=(200, 4))])
        dominant = np.max(discriminant.class_log_posteriors(m, x), axis=1) > math.log(0.5)
        assert dominant.any(), "Some spectra should have a dominant class"
        mmp = discriminant.decide(m, x[dominant], DecisionRule.MMP)
        mjp = discriminant.decide(m, x[dominant], DecisionRule.MJP)
        np.testing.assert_array_equal(mmp, mjp)

    def test_scaled_scores_keep_argmax(self, rng):
        m = _posterior_model({CORN_CRITICAL: 0.23, CORN_MATURE: 0.21, SOY_CRITICAL: 0.31, WHEAT_LATE: 0.25})
        log_post = discriminant.class_log_posteriors(m, np.zeros(2))
        marginals = discriminant.crop_log_marginals(m, log_post)
        for scale in rng.uniform(1e-6, 1e6, size=10):
            shifted = log_post + math.log(scale)
            scaled = discriminant.crop_log_marginals(m, shifted)
            assert np.argmax(scaled) == np.argmax(marginals), f"Scale {scale:.3g} changed the MMP crop"
            assert np.argmax(shifted) == np.argmax(log_post), f"Scale {scale:.3g} changed the MJP cell"
            finite = np.isfinite(marginals)
            np.testing.assert_allclose(scaled[finite] - marginals[finite], math.log(scale), rtol=1e-9)
        assert CROPS[int(np.argmax(marginals))] == CropLabel.CORN, "Corn marginal 0.44 beats Soybeans 0.31"

    @pytest.mark.parametrize("rule", [DecisionRule.MMP, DecisionRule.MJP])
    def test_predictions_follow_relabeled_crops(self, separable_dataset, rng, rule):
        relabel = {
            CropLabel.CORN: CropLabel.SOYBEANS,
            CropLabel.COTTON: CropLabel.CORN,
            CropLabel.RICE: CropLabel.WINTER_WHEAT,
        }
        renamed = Dataset(
            separable_dataset.grid,
            tuple(
                SampleRecord(r.spectrum, relabel[r.crop], r.stage) for r in separable_dataset.records
            ),
        )
        x = np.vstack([separable_dataset.spectra, rng.normal(30.0, 20.0, size=(100, 4))])
        original = discriminant.fit(separable_dataset, LabelingMode.JOINT_CROP_STAGE, DiscriminantKind.QDA, shrinkage=0.1)
        permuted = discriminant.fit(renamed, LabelingMode.JOINT_CROP_STAGE, DiscriminantKind.QDA, shrinkage=0.1)
        expected = [relabel[c] for c in discriminant.predict_crops(original, x, rule)]
        assert discriminant.predict_crops(permuted, x, rule) == expected, "Relabeled model should relabel predictions"
