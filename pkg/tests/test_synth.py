import numpy as np
import pytest

from latentmix.core import RandomSource, forward_diffuse
from latentmix.errors import DomainError, ParameterError
from latentmix.sampler import predict_x0
from latentmix.synth import (
    OracleSpec,
    checkerboard_frame,
    moving_square_scene,
    oracle_denoiser,
    patch_embedding_proxy,
)
from latentmix.tracking import iou, threshold_segment

from conftest import DESK_SHAPE


class TestOracle:
    def test_recovers_known_noise(self, desk_schedule):
        rng = RandomSource(1)
        x0 = rng.normal(DESK_SHAPE)
        den = oracle_denoiser(OracleSpec(x0_star=x0), desk_schedule)
        for t in range(1, desk_schedule.T + 1):
            eps = rng.normal(DESK_SHAPE)
            ab = desk_schedule.alpha_bar[t]
            x_t = np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * eps
            assert np.max(np.abs(den.predict_eps(x_t, t) - eps)) < 1e-9

    def test_predict_x0_is_exact(self, desk_schedule):
        x0 = RandomSource(2).normal(DESK_SHAPE)
        den = oracle_denoiser(OracleSpec(x0_star=x0), desk_schedule)
        rng = RandomSource(3)
        for t in range(1, desk_schedule.T + 1):
            x_t = forward_diffuse(x0, t, desk_schedule, rng)
            rec = predict_x0(x_t, t, den.predict_eps(x_t, t), desk_schedule)
            assert np.max(np.abs(rec - x0)) < 1e-9

    def test_t0_is_domain_error(self, desk_schedule):
        den = oracle_denoiser(OracleSpec(x0_star=np.zeros(DESK_SHAPE)), desk_schedule)
        with pytest.raises(DomainError):
            den.predict_eps(np.zeros(DESK_SHAPE), 0)

    def test_spec_requires_exactly_one_target(self):
        with pytest.raises(ParameterError):
            OracleSpec()
        with pytest.raises(ParameterError):
            OracleSpec(x0_star=np.zeros((1, 2, 2)), frames=np.zeros((1, 1, 2, 2)))

    def test_sequence_oracle_frame_selection(self, desk_schedule):
        frames = np.stack([np.full(DESK_SHAPE, float(k)) for k in range(3)])
        den = oracle_denoiser(OracleSpec(frames=frames), desk_schedule)
        x = RandomSource(4).normal(DESK_SHAPE)
        t = 10
        for k in (0, 1, 2):
            got = den.for_frame(k).predict_eps(x, t)
            ab = desk_schedule.alpha_bar[t]
            expect = (x - np.sqrt(ab) * frames[k]) / np.sqrt(1.0 - ab)
            assert np.max(np.abs(got - expect)) < 1e-12
        # indices past the end clamp to the final target
        assert np.array_equal(den.for_frame(99).x0_star, frames[2])
        # bare predict_eps follows frame 0
        assert np.array_equal(den.predict_eps(x, t), den.for_frame(0).predict_eps(x, t))
        with pytest.raises(ParameterError):
            den.for_frame(-1)


class TestMovingSquareScene:
    def test_centroid_progression_and_clamp(self):
        seq, track = moving_square_scene(16, 8, 3, (1, 0))
        cols = []
        for k in range(16):
            ys, xs = np.nonzero(track.masks[k])
            cols.append(xs.mean())
            assert ys.mean() == 1.0  # row centroid fixed
        # centroid advances 1 px/frame until the square hits the border
        expect = [min(k, 5) + 1.0 for k in range(16)]
        assert cols == expect

    def test_masks_match_values(self):
        seq, track = moving_square_scene(6, 8, 3, (1, 1), channels=2, value=1.0)
        for k in range(6):
            assert np.array_equal(seq.frame(k)[0] == 1.0, track.masks[k])
            assert np.array_equal(seq.frame(k)[1] == 1.0, track.masks[k])

    def test_threshold_recovers_exactly_on_clean_frames(self):
        seq, track = moving_square_scene(16, 8, 3, (1, 0))
        for k in range(16):
            assert np.array_equal(threshold_segment(seq.frame(k), 0.5), track.masks[k])

    def test_adjacent_iou_half(self):
        # 3x3 square moving 1 px: overlap 6, union 12
        _, track = moving_square_scene(4, 8, 3, (1, 0))
        assert abs(iou(track.masks[0], track.masks[1]) - 0.5) < 1e-15

    def test_zero_velocity_static(self):
        seq, track = moving_square_scene(5, 8, 3, (0, 0))
        for k in range(1, 5):
            assert np.array_equal(seq.frame(k), seq.frame(0))
            assert np.array_equal(track.masks[k], track.masks[0])

    def test_fully_linked_ground_truth(self):
        _, track = moving_square_scene(7, 8, 2, (2, 0))
        assert track.linked == (True,) * 7
        assert not track.degenerate

    def test_validation(self):
        with pytest.raises(ParameterError):
            moving_square_scene(4, 8, 9, (1, 0))  # square larger than grid
        with pytest.raises(ParameterError):
            moving_square_scene(0, 8, 3, (1, 0))


class TestCheckerboard:
    def test_pattern(self):
        f = checkerboard_frame(4, channels=2, hi=1.0, lo=-1.0)
        assert f.shape == (2, 4, 4)
        assert f[0, 0, 0] == 1.0 and f[0, 0, 1] == -1.0 and f[1, 1, 0] == -1.0
        assert np.array_equal(f[0], f[1])


class TestPatchEmbeddingProxy:
    def test_constant_frame_uniform_direction(self):
        v = patch_embedding_proxy(np.full((4, 8, 8), 3.0), patches=4)
        assert v.shape == (16,)
        assert np.allclose(v, 0.25)  # 1/sqrt(16)
        assert abs(np.linalg.norm(v) - 1.0) < 1e-12

    def test_negation_flips_direction(self):
        frame = RandomSource(5).normal((4, 8, 8))
        a = patch_embedding_proxy(frame, 4)
        b = patch_embedding_proxy(-frame, 4)
        assert abs(float(a @ b) + 1.0) < 1e-12

    def test_hand_computed_blocks(self):
        frame = np.zeros((1, 4, 4))
        frame[0, :2, :2] = 4.0  # patch (0,0)
        frame[0, 2:, 2:] = 3.0  # patch (1,1)
        v = patch_embedding_proxy(frame, 2)
        assert np.allclose(v, np.array([4.0, 0.0, 0.0, 3.0]) / 5.0)

    def test_validation(self):
        with pytest.raises(ParameterError):
            patch_embedding_proxy(np.zeros((1, 4, 4)), 2)  # zero frame
        with pytest.raises(ParameterError):
            patch_embedding_proxy(np.ones((1, 5, 5)), 2)  # not divisible
        with pytest.raises(ParameterError):
            patch_embedding_proxy(np.ones((1, 4, 4)), 0)
