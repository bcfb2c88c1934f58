import pytest

from prospect_drive.cpt import DrivingUtilities
from prospect_drive.dataset import generate_synthetic, split_pairs
from prospect_drive.estimation import cpt_fit
from prospect_drive.evaluation import (
    FrameOutcomes,
    cpt_predict,
    eut_predict,
    evaluate,
    format_table,
    frame_observation,
    prediction_from_outcomes,
    summarize,
    ttc_predict,
    ttc_probability,
)
from prospect_drive.exceptions import EmptyDatasetError, UnlabeledFrameError
from prospect_drive.kinematics import Frame
from prospect_drive.models import (
    CptParams,
    Decision,
    Granularity,
    PredictionRecord,
    SynthConfig,
    WeightingMode,
)
from prospect_drive.observability import get_metrics

THETA = [1.0, 0.5, 0.2, -0.3]


def record(pair_id, pr_pass, label, model="cpt", frame_index=0):
    return PredictionRecord(
        pair_id=pair_id,
        frame_index=frame_index,
        model=model,
        pr_pass=pr_pass,
        predicted=Decision.PASS if pr_pass > 0.5 else Decision.YIELD,
        label=label,
    )


class TestTtcBaseline:
    def test_earlier_arrival_passes(self):
        assert ttc_probability(-10.0, 10.0, -40.0, 10.0) > 0.9
        assert ttc_probability(-40.0, 10.0, -10.0, 10.0) < 0.1
        assert ttc_probability(-20.0, 10.0, -20.0, 10.0) == 0.5

    @pytest.mark.parametrize(
        "target,other,expected",
        [
            ((1.0, 5.0), (2.0, 5.0), 0.5),
            ((-10.0, 0.0), (-10.0, 0.0), 0.5),
            ((1.0, 5.0), (-10.0, 5.0), 1.0),
            ((-10.0, 0.0), (-10.0, 5.0), 0.0),
            ((-10.0, 5.0), (3.0, 5.0), 0.0),
            ((-10.0, 5.0), (-10.0, 0.0), 1.0),
        ],
    )
    def test_degenerate_states(self, target, other, expected):
        assert ttc_probability(*target, *other) == expected

    def test_uses_last_sample(self, make_pair):
        pair = make_pair("p", -20.0, 10.0, -60.0, 10.0, samples=10)
        assert ttc_predict(Frame.from_pair(pair)) == pytest.approx(ttc_probability(-11.0, 10.0, -51.0, 10.0))


class TestCptPipeline:
    utilities = DrivingUtilities(u_pass_yield=10.0, u_pass_nonyield=2.0, u_yield=6.0)
    params = CptParams.driving(0.9827, 0.6742)

    def outcomes(self, p_yield):
        return FrameOutcomes(self.utilities, self.utilities, 0.0, p_yield, 0)

    def test_far_slow_target_tends_to_yield(self):
        p_yield = ttc_probability(-40.0, 4.0, -10.0, 10.0)
        prediction = prediction_from_outcomes(self.outcomes(p_yield), self.params, WeightingMode.RANK_ORDERED)
        assert prediction.pr_pass < 0.5
        assert prediction.decision is Decision.YIELD

    def test_close_fast_target_tends_to_pass(self):
        p_yield = ttc_probability(-10.0, 10.0, -40.0, 4.0)
        prediction = prediction_from_outcomes(self.outcomes(p_yield), self.params, WeightingMode.RANK_ORDERED)
        assert prediction.pr_pass > 0.5
        assert prediction.decision is Decision.PASS

    def test_frame_prediction(self, make_pair, cfg_u, limits):
        frame = Frame.from_pair(make_pair("p", -30.0, 8.0, -25.0, 7.0, label=Decision.PASS))
        prediction = cpt_predict(frame, THETA, cfg_u, self.params, limits=limits, horizon=30)
        assert 0.0 <= prediction.pr_pass <= 1.0
        assert min(prediction.utilities.as_tuple()) >= 0.0
        assert 0 <= prediction.k0 <= 30
        assert 0.0 <= prediction.p_yield <= 1.0

    def test_identity_parameters_match_expected_utility(self, make_pair, cfg_u, limits):
        frame = Frame.from_pair(make_pair("p", -30.0, 8.0, -25.0, 7.0))
        for mode in WeightingMode:
            cpt = cpt_predict(frame, THETA, cfg_u, CptParams.driving(1.0, 1.0), mode, limits, horizon=30)
            eut = eut_predict(frame, THETA, cfg_u, mode, limits, horizon=30)
            assert cpt.pr_pass == pytest.approx(eut.pr_pass, abs=1e-9)

    def test_negative_utilities_are_shifted(self, make_pair, cfg_u, limits):
        frame = Frame.from_pair(make_pair("p", -30.0, 8.0, -25.0, 7.0))
        prediction = cpt_predict(frame, [-1.0, -1.0, -1.0, -1.0], cfg_u, self.params, limits=limits)
        assert prediction.offset > 0.0
        assert min(prediction.utilities.as_tuple()) == pytest.approx(0.0, abs=1e-9)
        assert get_metrics().count("gain_shifts") == 1.0

    def test_frame_observation_needs_label(self, make_pair):
        frame = Frame.from_pair(make_pair("p", -30.0, 8.0, -25.0, 7.0))
        with pytest.raises(UnlabeledFrameError):
            frame_observation(self.outcomes(0.5), frame)
        labeled = Frame.from_pair(make_pair("q", -30.0, 8.0, -25.0, 7.0, label=Decision.YIELD))
        observation = frame_observation(self.outcomes(0.4), labeled)
        assert observation.label is Decision.YIELD
        assert observation.p_yield == 0.4


class TestReports:
    def test_frame_success_rate_and_confusion(self):
        records = [
            record("a", 0.9, Decision.PASS),
            record("a", 0.2, Decision.PASS, frame_index=1),
            record("b", 0.1, Decision.YIELD),
            record("b", 0.7, Decision.YIELD, frame_index=1),
        ]
        report = summarize(records)
        score = report.models["cpt"]
        assert score.success_rate == 0.5
        assert score.confusion == [[1, 1], [1, 1]]
        assert report.sample_count == 4

    def test_threshold_is_reapplied(self):
        records = [record("a", 0.6, Decision.YIELD), record("b", 0.8, Decision.PASS)]
        assert summarize(records, threshold=0.7).models["cpt"].success_rate == 1.0

    def test_pair_votes_tie_to_yield(self):
        records = [
            record("a", 0.9, Decision.PASS),
            record("a", 0.1, Decision.PASS, frame_index=1),
            record("b", 0.9, Decision.YIELD),
            record("b", 0.2, Decision.YIELD, frame_index=1),
        ]
        report = summarize(records, granularity=Granularity.PAIR)
        assert report.sample_count == 2
        assert report.models["cpt"].success_rate == 0.5
        assert report.models["cpt"].confusion == [[0, 1], [0, 1]]

    def test_several_models(self):
        records = [
            record("a", 0.9, Decision.PASS, model="cpt"),
            record("a", 0.3, Decision.PASS, model="ttc"),
        ]
        report = summarize(records)
        assert report.models["cpt"].success_rate == 1.0
        assert report.models["ttc"].success_rate == 0.0

    def test_format_table(self):
        report = summarize([record("a", 0.9, Decision.PASS), record("b", 0.9, Decision.YIELD),
                            record("c", 0.1, Decision.YIELD)])
        table = format_table(report)
        assert "Success rates" in table
        assert "CPT" in table
        assert "66.67%" in table

    def test_unlabeled_records_rejected(self):
        with pytest.raises(UnlabeledFrameError):
            summarize([record("a", 0.9, None)])
        with pytest.raises(EmptyDatasetError):
            summarize([])

    def test_evaluate_runs_predictor(self, make_pair):
        frames = [
            Frame.from_pair(make_pair("near", -10.0, 10.0, -40.0, 10.0, label=Decision.PASS)),
            Frame.from_pair(make_pair("far", -40.0, 10.0, -10.0, 10.0, label=Decision.YIELD)),
        ]
        report = evaluate(ttc_predict, frames, model="ttc")
        assert report.models["ttc"].success_rate == 1.0

    def test_evaluate_requires_labels(self, make_pair):
        frames = [Frame.from_pair(make_pair("p", -10.0, 10.0, -40.0, 10.0))]
        with pytest.raises(UnlabeledFrameError):
            evaluate(ttc_predict, frames)


def test_fitted_cpt_beats_ttc_on_generated_pairs():
    cfg = SynthConfig(n_pairs=400, rng_seed=17, horizon=20, max_draws=2)
    dataset = generate_synthetic(cfg)
    outcomes = dataset.metadata["outcomes"]
    train_ids, test_ids = split_pairs(dataset.pair_ids, 0.2, seed=3)
    labels = dataset.labels
    fit = cpt_fit(
        [frame_observation(outcomes[pair.pair_id], Frame.from_pair(pair)) for pair in dataset.subset(train_ids).pairs]
    )

    cpt_hits = ttc_hits = 0
    for pair in dataset.subset(test_ids).pairs:
        prediction = prediction_from_outcomes(outcomes[pair.pair_id], fit.cpt_params(), WeightingMode.PAPER_EXACT)
        cpt_hits += prediction.decision is labels[pair.pair_id]
        ttc_decision = Decision.PASS if ttc_predict(Frame.from_pair(pair)) > 0.5 else Decision.YIELD
        ttc_hits += ttc_decision is labels[pair.pair_id]
    assert cpt_hits >= ttc_hits
    assert cpt_hits > 0.5 * len(test_ids)
