import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import oracles
from cosynth.metrics import (
    MapPair,
    MetricError,
    adaptive_threshold,
    binarize,
    compute_image_metrics,
    e_measure_curve,
    evaluate_dataset,
    f_measure_curve,
    mae,
    pair_maps,
    precision_recall,
    s_measure,
)


def random_pair(rng, size=16):
    S = rng.integers(0, 256, (size, size)).astype(np.float64) / 255.0
    G = rng.random((size, size)) > rng.uniform(0.2, 0.8)
    return S, G


class TestBinarize:
    def test_threshold_zero_is_all_foreground(self):
        S = np.array([[0.0, 0.3], [0.9, 1.0]])
        assert binarize(S, 0.0).all()

    def test_threshold_above_max_is_all_background(self):
        S = np.array([[0.0, 0.3], [0.9, 0.99]])
        assert not binarize(S, 0.995).any()

    def test_ge_rule(self):
        S = np.array([[0.0, 0.5, 1.0]])
        assert binarize(S, 0.5).tolist() == [[False, True, True]]


class TestPrecisionRecall:
    def test_perfect_prediction(self):
        G = np.array([[1, 0], [1, 1]], bool)
        assert precision_recall(G, G) == (1.0, 1.0)

    def test_hand_example(self):
        binS = np.array([[1, 0], [0, 0]], bool)
        G = np.array([[1, 1], [0, 0]], bool)
        assert precision_recall(binS, G) == (1.0, 0.5)

    def test_empty_prediction_convention(self):
        binS = np.zeros((2, 2), bool)
        G = np.array([[1, 1], [0, 0]], bool)
        assert precision_recall(binS, G) == (0.0, 0.0)

    def test_matches_confusion_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            binS = rng.random((16, 16)) > 0.5
            G = rng.random((16, 16)) > 0.5
            assert precision_recall(binS, G) == oracles.precision_recall_ref(binS, G)

    @given(
        arrays(bool, (8, 8), elements=st.booleans()),
        arrays(bool, (8, 8), elements=st.booleans()),
    )
    @settings(max_examples=50, deadline=None)
    def test_bounds(self, binS, G):
        p, r = precision_recall(binS, G)
        assert 0.0 <= p <= 1.0
        assert 0.0 <= r <= 1.0


class TestMae:
    def test_identical_maps(self):
        G = np.array([[1, 0], [0, 1]], bool)
        assert mae(G.astype(float), G) == 0.0

    def test_inverted_maps(self):
        assert mae(np.ones((3, 3)), np.zeros((3, 3), bool)) == 1.0

    def test_half_error(self):
        assert mae(np.array([[0.5, 0.5]]), np.array([[True, False]])) == 0.5

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            S, G = random_pair(rng, size=8)
            assert mae(S, G) == pytest.approx(oracles.mae_ref(S, G), abs=1e-12)

    def test_symmetric_on_binary_maps(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            A = rng.random((8, 8)) > 0.5
            B = rng.random((8, 8)) > 0.5
            assert mae(A.astype(float), B) == mae(B.astype(float), A)


class TestFMeasure:
    def test_hand_value_binary_step(self):
        # binarization [[1,0],[0,0]] vs G [[1,1],[0,0]]: P=1, R=0.5, F=0.8125
        S = np.array([[1.0, 0.0], [0.0, 0.0]])
        G = np.array([[1, 1], [0, 0]], bool)
        p, r = precision_recall(binarize(S, 0.5), G)
        f = (1 + 0.3) * p * r / (0.3 * p + r)
        assert f == pytest.approx(0.8125, abs=0)
        f_max, _ = f_measure_curve(S, G)
        assert f_max == pytest.approx(0.8125)

    def test_perfect_binary_prediction(self):
        G = np.zeros((6, 6), bool)
        G[2:4, 1:5] = True
        f_max, f_avg = f_measure_curve(G.astype(float), G)
        assert f_max == pytest.approx(1.0, abs=1e-12)

    def test_beta2_one_harmonic_sanity(self):
        G = np.zeros((4, 4), bool)
        G[1:3, 1:3] = True
        f_max, _ = f_measure_curve(G.astype(float), G, beta2=1.0)
        assert f_max == pytest.approx(1.0, abs=1e-12)

    def test_constant_prediction_single_cut(self):
        S = np.full((4, 4), 0.4)
        G = np.zeros((4, 4), bool)
        G[:2] = True
        f_max, f_avg = f_measure_curve(S, G)
        # only two binarizations exist; the all-fg one is the best
        p, r = precision_recall(np.ones((4, 4), bool), G)
        expected = (1.3 * p * r) / (0.3 * p + r)
        assert f_max == pytest.approx(expected)

    def test_empty_gt_rejected(self):
        with pytest.raises(MetricError, match="foreground"):
            f_measure_curve(np.zeros((4, 4)), np.zeros((4, 4), bool))

    def test_adaptive_threshold_definition(self):
        S = np.full((4, 4), 0.2)
        assert adaptive_threshold(S) == pytest.approx(0.4)
        assert adaptive_threshold(np.ones((4, 4))) == pytest.approx(1 - 1 / 255)

    def test_fmax_ge_favg_for_quantized_maps(self):
        rng = np.random.default_rng(4)
        for _ in range(30):
            S, G = random_pair(rng)
            if not G.any():
                continue
            f_max, f_avg = f_measure_curve(S, G)
            assert f_max >= f_avg - 1e-12

    def test_matches_threshold_loop_oracle(self):
        rng = np.random.default_rng(5)
        for _ in range(30):
            S, G = random_pair(rng)
            if not G.any():
                continue
            got = f_measure_curve(S, G)
            want = oracles.f_measure_curve_ref(S, G)
            assert got[0] == pytest.approx(want[0], abs=1e-9)
            assert got[1] == pytest.approx(want[1], abs=1e-9)


class TestEMeasure:
    def test_exact_match_gives_one(self):
        G = np.zeros((5, 5), bool)
        G[1:3, 2:5] = True
        e_max, _ = e_measure_curve(G.astype(float), G)
        assert e_max == pytest.approx(1.0, abs=1e-12)

    def test_complement_scores_zero_at_that_threshold(self):
        G = np.zeros((4, 4), bool)
        G[:2] = True
        S = (~G).astype(float)
        score = oracles._alignment_score_ref(S >= 0.5, G)
        assert score == pytest.approx(0.0, abs=1e-12)
        e_max, e_avg = e_measure_curve(S, G)
        assert e_avg < e_max  # sweep mixes the degenerate all-fg threshold in

    def test_all_zero_gt_and_prediction(self):
        S = np.zeros((4, 4))
        G = np.zeros((4, 4), bool)
        e_max, _ = e_measure_curve(S, G)
        assert e_max == pytest.approx(1.0, abs=1e-12)

    def test_matches_per_pixel_oracle(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            S, G = random_pair(rng)
            got = e_measure_curve(S, G)
            want = oracles.e_measure_curve_ref(S, G)
            assert got[0] == pytest.approx(want[0], abs=1e-9)
            assert got[1] == pytest.approx(want[1], abs=1e-9)


class TestSMeasure:
    def test_exact_match_gives_one(self):
        G = np.zeros((6, 6), bool)
        G[2:5, 1:4] = True
        assert s_measure(G.astype(float), G) == pytest.approx(1.0, abs=0)

    def test_all_background_gt(self):
        G = np.zeros((4, 4), bool)
        S = np.full((4, 4), 0.25)
        assert s_measure(S, G) == pytest.approx(0.75)
        assert s_measure(np.zeros((4, 4)), G) == pytest.approx(1.0)

    def test_all_foreground_gt(self):
        G = np.ones((4, 4), bool)
        S = np.full((4, 4), 0.25)
        assert s_measure(S, G) == pytest.approx(0.25)

    def test_matches_reference_implementation(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            S, G = random_pair(rng)
            assert s_measure(S, G) == pytest.approx(
                oracles.s_measure_ref(S, G), abs=1e-9
            )

    def test_clamped_to_unit_interval(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            S, G = random_pair(rng, size=8)
            assert 0.0 <= s_measure(S, G) <= 1.0


class TestEvaluateDataset:
    def _pair(self, sid, mae_target):
        G = np.zeros((4, 4), bool)
        G[:2] = True
        S = G.astype(float).copy()
        S[2:4, :] = 2 * mae_target  # 8 of 16 pixels off by 2*target
        return MapPair(prediction=S, ground_truth=G, id=sid)

    def test_aggregate_is_unweighted_mean(self):
        pairs = [self._pair("a", 0.1), self._pair("b", 0.3)]
        report = evaluate_dataset(pairs)
        assert report.aggregate["mae"] == pytest.approx(
            np.mean([row["mae"] for row in report.per_image])
        )
        assert report.per_image[0]["mae"] == pytest.approx(0.1)
        assert report.per_image[1]["mae"] == pytest.approx(0.3)
        assert report.aggregate["mae"] == pytest.approx(0.2)

    def test_perfect_prediction_scores(self):
        G = np.zeros((6, 6), bool)
        G[1:4, 2:5] = True
        report = evaluate_dataset([MapPair(G.astype(float), G, id="p")])
        agg = report.aggregate
        assert agg["mae"] == 0.0
        for key in ("f_max", "e_max", "s_alpha"):
            assert agg[key] == pytest.approx(1.0, abs=1e-9)

    def test_id_mismatch_names_the_id(self):
        G = np.zeros((4, 4), bool)
        G[0, 0] = True
        with pytest.raises(MetricError, match="lonely"):
            pair_maps({}, {"lonely": G})

    def test_empty_input_rejected(self):
        with pytest.raises(MetricError, match="no map pairs"):
            evaluate_dataset([])

    def test_per_group_means(self):
        pairs = [self._pair("a", 0.1), self._pair("b", 0.3), self._pair("c", 0.1)]
        report = evaluate_dataset(pairs, grouping={"a": "g1", "b": "g2", "c": "g1"})
        assert set(report.per_group) == {"g1", "g2"}
        assert report.per_group["g1"]["n"] == 2
        assert report.per_group["g1"]["mae"] == pytest.approx(0.1)

    def test_dim_mismatch_rejected(self):
        with pytest.raises(MetricError, match="dims differ"):
            MapPair(np.zeros((4, 4)), np.zeros((4, 5), bool), id="bad")

    def test_all_metrics_in_unit_interval(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            S, G = random_pair(rng)
            if not G.any():
                continue
            row = compute_image_metrics(S, G)
            for key, value in row.items():
                assert 0.0 <= value <= 1.0, key
