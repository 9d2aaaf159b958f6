import numpy as np
import pytest

from cgebd.codec import CodecParams, encode_video
from cgebd.model import GebdModel, ModelDims, prepare_video_sample, train_model
from cgebd.model.scce import EncoderVariant
from cgebd.nn import SgdConfig, gradient_check
from cgebd.synth import SynthEvent, SynthSpec, generate_video
from cgebd.utils.errors import AnnotationError, NumericError

DIMS = ModelDims(channels=8, window_k=2, sample_t=2, search_radius=2)


def tiny_sample(
    seed: int,
    video_id: str = "v",
    num_frames: int = 10,
    events=(4,),
    sample_t: int = 2,
    pan=(1, 1),
):
    spec = SynthSpec(
        video_id=video_id,
        seed=seed,
        num_frames=num_frames,
        fps=4.0,
        height=16,
        width=16,
        events=[SynthEvent(frame=f, kind="cut") for f in events],
        max_speed=2,
        search_radius=2,
        pan=pan,
    )
    video, annotation = generate_video(spec)
    cv = encode_video(video, CodecParams(block_size=8, search_radius=2, gop_pframes=3))
    return prepare_video_sample(cv, video_id, sample_t=sample_t), annotation


class TestVideoSample:
    def test_panning_background_gives_sampled_motion(self):
        panned, _ = tiny_sample(0)
        assert any(acc.motion.any() for gop in panned.gops for acc in gop.pframes)

    def test_frame_indices_follow_sampling(self):
        sample, _ = tiny_sample(0)

        # GOPs start at 0, 4, 8; the last GOP holds a single P-frame
        assert sample.frame_indices.tolist() == [0, 1, 2, 4, 5, 6, 8, 9]
        assert sample.gop_of_positions() == [0, 0, 0, 1, 1, 1, 2, 2]
        assert sample.duration == 2.5

    def test_no_sampling_keeps_iframes_only(self):
        sample, _ = tiny_sample(0, sample_t=0)
        sequence, _ = GebdModel(DIMS.model_copy(update={"sample_t": 0})).embed(sample)

        assert sample.frame_indices.tolist() == [0, 4, 8]
        assert sequence.length == 3


class TestGebdModel:
    def test_targets_use_nearest_position(self):
        sample, annotation = tiny_sample(1)
        model = GebdModel(DIMS)
        targets = model.targets(sample, annotation.boundaries_sec, "gaussian")

        # Boundary at 1.0s is frame 4, position 3
        assert targets[3] == 1.0
        assert targets[2] == pytest.approx(np.exp(-0.5))

    def test_per_candidate_scoring_matches(self):
        sample, _ = tiny_sample(2, num_frames=16, events=(5, 11))
        model = GebdModel(DIMS, seed=3)

        whole = model.score(sample)
        per_candidate = model.score_per_candidate(sample)
        assert np.max(np.abs(whole.scores - per_candidate.scores)) < 1e-9
        assert np.array_equal(whole.frame_indices, per_candidate.frame_indices)

    @pytest.mark.parametrize("seed", range(5))
    @pytest.mark.parametrize("encoder", list(EncoderVariant))
    def test_full_model_gradients(self, encoder, seed):
        sample, annotation = tiny_sample(3 + seed)
        model = GebdModel(DIMS.model_copy(update={"encoder": encoder}), seed=5 + seed)
        targets = model.targets(sample, annotation.boundaries_sec, "gaussian")

        report = gradient_check(
            lambda: model.loss_and_grad(sample, targets),
            model.params,
            tolerance=1e-5,
            samples_per_param=3,
        )
        assert report.passed, report.max_rel_err

    def test_every_parameter_gets_gradient(self):
        sample, annotation = tiny_sample(4)
        model = GebdModel(DIMS, seed=1)
        model.loss_and_grad(sample, model.targets(sample, annotation.boundaries_sec, "gaussian"))

        for name, param in model.params.items():
            # Softmax ignores a shift shared by every position
            if name.endswith(".spatial.bias"):
                continue
            assert param.grad.any(), name

    def test_predictions_lie_inside_video(self):
        sample, _ = tiny_sample(5)
        model = GebdModel(DIMS.model_copy(update={"threshold": 0.0}), seed=2)
        boundaries, track = model.predict(sample)

        assert boundaries
        assert all(0.0 <= b <= sample.duration for b in boundaries)
        assert np.all((track.scores > 0) & (track.scores < 1))

    def test_same_seed_same_parameters(self):
        first, second = GebdModel(DIMS, seed=9), GebdModel(DIMS, seed=9)
        assert first.params.names() == second.params.names()
        assert all(np.array_equal(first.params[n], second.params[n]) for n in first.params.names())


class TestTraining:
    @pytest.fixture
    def corpus(self):
        pairs = [tiny_sample(10 + i, video_id=f"v{i}") for i in range(3)]
        return [s for s, _ in pairs], {a.video_id: a.boundaries_sec for _, a in pairs}

    def test_deterministic(self, corpus, tmp_path):
        samples, boundaries = corpus
        sgd = SgdConfig(epochs=2)

        runs = []
        for _ in range(2):
            model = GebdModel(DIMS, seed=4)
            history = train_model(
                model,
                samples,
                boundaries,
                sgd,
                batch_size=2,
                seed=4,
                log_path=tmp_path / "log.jsonl",
            )
            runs.append((model.params.state_dict(), history))

        (first, history), (second, again) = runs
        assert all(np.array_equal(first[n], second[n]) for n in first)
        assert history == again
        assert [r.epoch for r in history] == [0, 1]
        assert history[0].steps == 2
        assert len((tmp_path / "log.jsonl").read_text().splitlines()) == 2

    def test_loss_goes_down(self, corpus):
        samples, boundaries = corpus
        model = GebdModel(DIMS, seed=0)
        history = train_model(model, samples, boundaries, SgdConfig(epochs=10), batch_size=1)
        assert history[-1].mean_loss < history[0].mean_loss

    def test_missing_annotation(self, corpus):
        samples, boundaries = corpus
        with pytest.raises(AnnotationError, match="v1"):
            train_model(GebdModel(DIMS), samples, {"v0": boundaries["v0"]}, SgdConfig(epochs=1))

    def test_non_finite_loss_aborts(self, corpus):
        samples, boundaries = corpus
        model = GebdModel(DIMS)
        model.params.parameter("classifier.1.bias").value[...] = np.nan

        with pytest.raises(NumericError, match="epoch 0"):
            train_model(model, samples, boundaries, SgdConfig(epochs=1))
