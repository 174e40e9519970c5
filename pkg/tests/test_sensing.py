import numpy as np
import pytest

from quatnav import geometry as geo
from quatnav.errors import PreconditionError
from quatnav.kinematics import ImuSample, NavState
from quatnav.sensing import ImuNoiseParams, LandmarkFrame, LandmarkNoise, correct_inputs, imu_forward_model, landmark_h

from conftest import random_quats


def test_landmark_h_identity_pose(rng):
    f_w = rng.normal(size=(5, 3))
    np.testing.assert_array_equal(landmark_h(NavState.from_parts(), f_w), f_w.reshape(-1))


def test_landmark_h_yawed_example():
    x = NavState.from_parts(q=[np.sqrt(0.5), 0, 0, np.sqrt(0.5)], p=[1, 0, 0])
    np.testing.assert_allclose(landmark_h(x, [[2, 0, 0]]), [0, -1, 0], atol=1e-15)


def test_landmark_h_empty():
    assert landmark_h(NavState.from_parts(), np.zeros((0, 3))).shape == (0,)


def test_landmark_h_inverse_and_order(rng):
    q = random_quats(rng, 1)[0]
    x = NavState.from_parts(q=q, p=rng.normal(size=3))
    f_w = rng.normal(0, 5, (7, 3))
    fb = landmark_h(x, f_w).reshape(7, 3)
    np.testing.assert_allclose(fb @ geo.quat_to_rotmat(q).T + x.p, f_w, atol=1e-12)
    fb_rev = landmark_h(x, f_w[::-1]).reshape(7, 3)
    np.testing.assert_array_equal(fb_rev, fb[::-1])


def test_landmark_h_rigid_equivariance(rng):
    q, q0 = random_quats(rng, 2)
    p0 = rng.normal(size=3)
    x = NavState.from_parts(q=q, p=rng.normal(size=3))
    f_w = rng.normal(0, 5, (6, 3))
    R0 = geo.quat_to_rotmat(q0)
    moved = NavState.from_parts(q=geo.quat_product(q0, q), p=R0 @ x.p + p0)
    np.testing.assert_allclose(landmark_h(moved, f_w @ R0.T + p0), landmark_h(x, f_w), atol=1e-12)


def test_landmark_h_batched(rng):
    x = NavState.from_parts(q=random_quats(rng, 4), p=rng.normal(size=(4, 3)))
    f_w = rng.normal(size=(3, 3))
    out = landmark_h(x, f_w)
    assert out.shape == (4, 9)
    np.testing.assert_array_equal(out[2], landmark_h(x[2], f_w))


def test_default_landmark_covariance():
    np.testing.assert_array_equal(LandmarkNoise(sigma_f=0.5).cov(6), 0.25 * np.eye(6))
    with pytest.raises(PreconditionError):
        LandmarkNoise()
    with pytest.raises(PreconditionError):
        LandmarkNoise(C_f=np.eye(3)).cov(6)


def test_landmark_frame_validation():
    with pytest.raises(PreconditionError):
        LandmarkFrame(0.0, [1, 1], np.zeros((2, 3)), np.zeros((2, 3)))
    fr = LandmarkFrame(0.0, [4, 2], [[1, 2, 3], [4, 5, 6]], [[7, 8, 9], [10, 11, 12]])
    assert len(fr) == 2
    np.testing.assert_array_equal(fr.z, [7, 8, 9, 10, 11, 12])
    assert [lm[0] for lm in fr.landmarks] == [4, 2]


def test_noise_params_expand_and_validate():
    n = ImuNoiseParams.from_sigmas(0.1, 0.2, 0.3, 0.4)
    np.testing.assert_allclose(n.C_acc, 0.04 * np.eye(3))
    assert n.C_x.shape == (6, 6) and n.C_w.shape == (15, 15)
    np.testing.assert_array_equal(n.C_w[:9, :9], 0.0)
    np.testing.assert_allclose(n.C_w[12:, 12:], 0.16 * np.eye(3))
    with pytest.raises(PreconditionError):
        ImuNoiseParams(-np.eye(3), 0.0, 0.0, 0.0)


def test_forward_model_zero_noise(rng):
    zero = ImuNoiseParams.zero()
    u, bias = imu_forward_model([1, 2, 3], [4, 5, 6], ([0, 0, 0], [0, 0, 0]), zero, rng)
    np.testing.assert_array_equal(u.omega_m, [1, 2, 3])
    np.testing.assert_array_equal(u.acc_m, [4, 5, 6])
    u, bias = imu_forward_model([1, 2, 3], [4, 5, 6], ([0.01, 0, 0], [0, 0, 0]), zero, rng)
    np.testing.assert_allclose(u.omega_m - [1, 2, 3], [0.01, 0, 0], atol=1e-16)
    np.testing.assert_array_equal(bias[0], [0.01, 0, 0])
    omega, acc = correct_inputs(u, bias)
    np.testing.assert_allclose(omega, [1, 2, 3], atol=1e-15)
    np.testing.assert_array_equal(acc, [4, 5, 6])


def test_forward_model_noise_covariance(rng):
    C = np.array([[4e-4, 1e-4, 0], [1e-4, 2e-4, 0], [0, 0, 1e-4]])
    noise = ImuNoiseParams(C, 0.0, 0.0, 0.0)
    draws = np.array([imu_forward_model(np.zeros(3), np.zeros(3), (np.zeros(3), np.zeros(3)), noise, rng)[0].omega_m
                      for _ in range(100_000)])
    emp = np.cov(draws.T)
    np.testing.assert_allclose(np.diag(emp), np.diag(C), rtol=0.05)
    assert abs(emp[0, 1] - C[0, 1]) <= 0.05 * np.sqrt(C[0, 0] * C[1, 1])


def test_correct_inputs_symmetric_sigma_points():
    u = ImuSample(0.0, [0.5, 0.1, -0.2], [0, 0, 9.81])
    bias = (np.array([0.01, 0.02, 0.03]), np.zeros(3))
    col = np.array([0.004, -0.001, 0.002])
    plus, _ = correct_inputs(u, bias, (col, np.zeros(3)))
    minus, _ = correct_inputs(u, bias, (-col, np.zeros(3)))
    np.testing.assert_allclose(0.5 * (plus + minus), u.omega_m - bias[0], atol=1e-16)
