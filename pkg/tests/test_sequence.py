"""
Tests for window assembly, masks and augmentation
"""
import numpy as np
import pytest
from mgdt._consts import NO_TARGET, TokenKind
from mgdt.errors import MgdtInputError
from mgdt.sequence import (
    Augmentation,
    Layout,
    apply_augmentation,
    augment_window,
    build_mask,
    build_window,
    collate,
    compute_return_to_go,
)


@pytest.mark.parametrize(
    ("rewards", "expected"),
    [([0, 0, 0], [0, 0, 0]), ([1, 0, 1], [1, 1, 0]), ([1], [0])],
)
def test_return_to_go(rewards, expected):
    np.testing.assert_array_equal(compute_return_to_go(rewards), expected)


def test_return_to_go_inclusive():
    np.testing.assert_array_equal(
        compute_return_to_go([1, 0, 1], inclusive=True), [2, 1, 1])


def test_return_to_go_empty():
    with pytest.raises(MgdtInputError):
        compute_return_to_go([])


@pytest.mark.parametrize(
    ("T", "M", "layout", "length"),
    [
        (4, 36, Layout.DT, 156),
        (4, 36, Layout.BC, 152),
        (1, 1, Layout.DT, 4),
        (4, 9, Layout.DT, 48),
        (4, 9, Layout.BC, 44),
    ],
)
def test_layout_lengths(T: int, M: int, layout: Layout, length: int):
    assert build_mask(T, M, layout).shape == (length, length)


def test_zero_timesteps():
    with pytest.raises(MgdtInputError):
        build_mask(0, 9)


def test_window_contents(make_traj, codec):
    traj = make_traj(rewards=[1, 0, -1, 1])
    seq = build_window(traj, 1, 2, codec)
    M = 9
    assert len(seq) == 2 * (M + 3)
    assert list(seq.kinds[M:M + 3]) == [
        TokenKind.RETURN, TokenKind.ACTION, TokenKind.REWARD]
    # Return-to-go after timestep 1 is -1 + 1 = 0
    assert seq.token_ids[M] == codec.return_id(0)
    assert seq.token_ids[M + 1] == codec.action_id(int(traj.actions[1]))
    assert seq.token_ids[M + 2] == codec.reward_id(0)
    assert seq.token_ids[2 * M + 3 + 2] == codec.reward_id(-1)
    assert (seq.targets[seq.kinds == TokenKind.PATCH] == NO_TARGET).all()
    assert (seq.loss_weights[seq.kinds == TokenKind.PATCH] == 0).all()


def test_window_inclusive_returns(make_traj, codec):
    traj = make_traj(rewards=[1, 0, 1])
    seq = build_window(traj, 0, 1, codec, inclusive_returns=True)
    assert seq.token_ids[9] == codec.return_id(2)


def test_bc_window_has_no_returns(make_traj, codec):
    seq = build_window(make_traj(), 0, 4, codec, Layout.BC)
    assert len(seq) == 44
    assert TokenKind.RETURN not in seq.kinds


def test_window_past_episode_end(make_traj, codec):
    with pytest.raises(MgdtInputError):
        build_window(make_traj(n=3), 1, 3, codec)


def test_mask_single_step_two_patches():
    expected = np.array([
        [1, 1, 0, 0, 0],
        [1, 1, 0, 0, 0],
        [1, 1, 1, 0, 0],
        [1, 1, 1, 1, 0],
        [1, 1, 1, 1, 1],
    ], dtype=bool)
    np.testing.assert_array_equal(build_mask(1, 2), expected)


def test_mask_single_patch_is_lower_triangular():
    np.testing.assert_array_equal(
        build_mask(1, 1), np.tril(np.ones((4, 4), dtype=bool)))


@pytest.mark.parametrize("layout", list(Layout))
def test_mask_properties(layout: Layout):
    rng = np.random.default_rng(0)
    for _ in range(20):
        T = int(rng.integers(1, 7))
        M = int(rng.integers(1, 10))
        mask = build_mask(T, M, layout)
        step = layout.step_length(M)
        L = T * step
        timestep = np.arange(L) // step
        is_patch = (np.arange(L) % step) < M
        for i in range(L):
            for j in range(L):
                if timestep[j] > timestep[i]:
                    # No attention to later timesteps
                    assert not mask[i, j]
                elif timestep[j] == timestep[i] and is_patch[i] \
                        and is_patch[j]:
                    assert mask[i, j]
                elif not is_patch[i] or not is_patch[j]:
                    assert mask[i, j] == (j <= i)
                else:
                    assert mask[i, j]


def test_identity_augmentation():
    frames = np.random.default_rng(0).integers(
        0, 256, size=(3, 12, 12, 1), dtype=np.uint8)
    np.testing.assert_array_equal(
        apply_augmentation(frames, Augmentation((4, 4), 0)), frames)


def test_crop_shifts_image():
    frames = np.zeros((1, 12, 12), dtype=np.uint8)
    frames[0, 0, 0] = 255
    shifted = apply_augmentation(frames, Augmentation((0, 0), 0))
    assert shifted[0, 4, 4] == 255
    assert shifted.sum() == 255


def test_augmentation_is_shared_and_deterministic():
    frames = np.random.default_rng(0).integers(
        0, 256, size=(4, 12, 12, 1), dtype=np.uint8)
    a = augment_window(frames, 7)
    b = augment_window(frames, 7)
    np.testing.assert_array_equal(a, b)
    # The same transform is applied to every frame
    for i in range(4):
        np.testing.assert_array_equal(
            a[i], augment_window(frames[i:i + 1], 7)[0])


def test_collate_pads(make_traj, codec):
    long = build_window(make_traj(), 0, 2, codec)
    short = build_window(make_traj(), 0, 1, codec)
    batch = collate([
        (long, build_mask(2, 9)),
        (short, build_mask(1, 9)),
    ])
    assert batch.kinds.shape == (2, 24)
    assert (batch.kinds[1, 12:] == TokenKind.PAD).all()
    assert (batch.loss_weights[1, 12:] == 0).all()
    pad_rows = batch.masks[1, 12:]
    assert (pad_rows.sum(axis=1) == 1).all()
    assert not batch.masks[1, :12, 12:].any()


def test_collate_empty():
    with pytest.raises(MgdtInputError):
        collate([])
