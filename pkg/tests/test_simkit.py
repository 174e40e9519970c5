import numpy as np
import pytest
from scipy import stats

from quatnav import geometry as geo
from quatnav.errors import DatasetError, OrderingError, PreconditionError
from quatnav.kinematics import GRAVITY, ImuStream, NavState, WorldParams, propagate_exact
from quatnav.sensing import ImuNoiseParams, LandmarkNoise
from quatnav.simkit import dataset as ds
from quatnav.simkit.metrics import compute_errors, convergence_time, rms, summarize
from quatnav.simkit.sensors import synthesize_sensors
from quatnav.simkit.trajectory import TrajectorySpec, _motion, euler_to_quat, generate_trajectory, instantaneous_rates

from conftest import random_quats


def reintegrate(t, truth, rates, dT):
    omega, acc = rates
    world = WorldParams(dT=dT)
    x = truth[0]
    out = [x.p]
    for k in range(len(t) - 1):
        x = propagate_exact(x, omega[k], acc[k], world)
        out.append(x.p)
    return np.array(out)


@pytest.mark.parametrize("motion", ["figure-eight", "circle", "hover-then-dash"])
def test_reintegration_reproduces_truth(motion):
    spec = TrajectorySpec(duration=60.0, motion=motion)
    t, truth, rates = generate_trajectory(spec)
    assert len(t) == 12_000
    p = reintegrate(t, truth, rates, 1.0 / spec.imu_rate)
    assert np.max(np.linalg.norm(p - truth.p, axis=1)) <= 1e-3


def test_hover_segment_is_at_rest():
    spec = TrajectorySpec(duration=10.0, motion="hover-then-dash")
    t, truth, (omega, acc) = generate_trajectory(spec)
    hover = t < 4.9
    np.testing.assert_array_equal(omega[hover], 0.0)
    expect = -(geo.quat_to_rotmat(truth.q[hover]).transpose(0, 2, 1) @ np.array(GRAVITY))
    np.testing.assert_allclose(acc[hover], expect, atol=1e-15)
    assert truth.p[-1, 0] == pytest.approx(spec.amplitude, abs=1e-3)


def test_circle_speed():
    spec = TrajectorySpec(duration=30.0, motion="circle", amplitude=1.0, period=2 * np.pi / 0.5)
    _, truth, _ = generate_trajectory(spec)
    np.testing.assert_allclose(np.linalg.norm(truth.v, axis=1), 0.5, atol=1e-12)


def test_instantaneous_rates_match_finite_differences():
    spec = TrajectorySpec(duration=20.0)
    t = np.linspace(1.0, 19.0, 50)
    h = 1e-6
    omega, _ = instantaneous_rates(spec, t)
    q0, q1 = euler_to_quat(_motion(spec, t - h).euler), euler_to_quat(_motion(spec, t + h).euler)
    # body rate: q1 = q0 (x) exp(omega * 2h)
    fd = geo.quat_to_rotvec(geo.quat_product(geo.quat_inverse(q0), q1)) / (2 * h)
    np.testing.assert_allclose(omega, fd, atol=1e-6)


def test_spec_validation():
    with pytest.raises(PreconditionError):
        TrajectorySpec(imu_rate=200, cam_rate=30)
    with pytest.raises(PreconditionError):
        TrajectorySpec(motion="spiral")


def _sensors(noise, landmark, duration=60.0, seed=5, bias=((0, 0, 0), (0, 0, 0)), **spec_kw):
    spec = TrajectorySpec(duration=duration, **spec_kw)
    t, truth, rates = generate_trajectory(spec)
    imu, frames, biases = synthesize_sensors(t, truth, rates, noise, landmark, spec, seed, initial_bias=bias)
    return spec, t, truth, rates, imu, frames, biases


def test_stream_counts():
    spec, _, _, _, imu, frames, _ = _sensors(ImuNoiseParams.zero(), LandmarkNoise(sigma_f=0.02))
    assert len(imu) == 60 * 200
    assert len(frames) == 60 * 20
    assert all(len(fr) == spec.landmark_count for fr in frames)
    lo, hi = np.array(spec.landmark_box)
    f_w = np.concatenate([fr.f_w for fr in frames])
    assert np.all((f_w >= lo) & (f_w <= hi))
    assert len({int(i) for fr in frames for i in fr.ids}) == 60 * 20 * spec.landmark_count


def test_zero_noise_sensors_are_exact():
    _, t, truth, (omega, acc), imu, frames, _ = _sensors(ImuNoiseParams.zero(), LandmarkNoise(C_f=np.zeros((60, 60))),
                                                        duration=5.0)
    np.testing.assert_array_equal(imu.omega_m, omega)
    np.testing.assert_array_equal(imu.acc_m, acc)
    k = int(round(frames[7].t * 200))
    R = geo.quat_to_rotmat(truth.q[k])
    np.testing.assert_allclose(frames[7].f_b, (frames[7].f_w - truth.p[k]) @ R, atol=1e-14)


def test_landmark_noise_level():
    _, t, truth, _, _, frames, _ = _sensors(ImuNoiseParams.zero(), LandmarkNoise(sigma_f=0.02), duration=60.0,
                                            landmark_count=30)
    res = []
    for fr in frames:
        k = int(round(fr.t * 200))
        res.append(fr.f_b - (fr.f_w - truth.p[k]) @ geo.quat_to_rotmat(truth.q[k]))
    res = np.concatenate(res).ravel()
    assert res.size >= 10**5
    assert abs(res.std() / 0.02 - 1.0) <= 0.05


def test_imu_noise_chi_square():
    noise = ImuNoiseParams.from_sigmas(2.4e-3, 0.028, 1.3e-6, 2.1e-4)
    _, _, _, (omega, acc), imu, _, biases = _sensors(noise, LandmarkNoise(sigma_f=0.02), duration=100.0,
                                                      bias=((0.003, -0.002, 0.001), (0.05, -0.03, 0.04)))
    white = np.concatenate([(imu.omega_m - omega - biases[:, :3]) / 2.4e-3,
                            (imu.acc_m - acc - biases[:, 3:]) / 0.028], axis=1)
    steps = np.diff(biases, axis=0) / np.r_[np.full(3, 1.3e-6), np.full(3, 2.1e-4)]
    for sample in (white, steps):
        x = sample.ravel()
        assert x.size >= 10**5
        stat = np.sum(x**2)
        p = 2 * min(stats.chi2.cdf(stat, x.size), stats.chi2.sf(stat, x.size))
        assert p >= 0.01


def test_synthesis_is_seeded():
    noise = ImuNoiseParams.from_sigmas(2.4e-3, 0.028, 1.3e-6, 2.1e-4)
    a = _sensors(noise, LandmarkNoise(sigma_f=0.02), duration=2.0, seed=7)
    b = _sensors(noise, LandmarkNoise(sigma_f=0.02), duration=2.0, seed=7)
    c = _sensors(noise, LandmarkNoise(sigma_f=0.02), duration=2.0, seed=8)
    np.testing.assert_array_equal(a[4].acc_m, b[4].acc_m)
    np.testing.assert_array_equal(a[5][3].f_b, b[5][3].f_b)
    assert not np.array_equal(a[4].acc_m, c[4].acc_m)
    assert not np.array_equal(a[5][3].f_w, c[5][3].f_w)


# ------------------------------------------------------------------ files


def _assert_same_dataset(a, b):
    for name in ("t", "omega_m", "acc_m"):
        np.testing.assert_array_equal(getattr(a.imu, name), getattr(b.imu, name))
    assert len(a.frames) == len(b.frames)
    for fa, fb in zip(a.frames, b.frames):
        assert fa.t == fb.t
        np.testing.assert_array_equal(fa.ids, fb.ids)
        np.testing.assert_array_equal(fa.f_w, fb.f_w)
        np.testing.assert_array_equal(fa.f_b, fb.f_b)
    np.testing.assert_array_equal(a.truth.t, b.truth.t)
    np.testing.assert_array_equal(a.truth.states.data[:, :10], b.truth.states.data[:, :10])


def test_native_round_trip_is_bitwise(short_data, tmp_path):
    ds.write_dataset(tmp_path / "d", short_data.imu, short_data.frames, short_data.truth)
    back = ds.load_dataset(tmp_path / "d")
    _assert_same_dataset(short_data, back)
    ds.write_dataset(tmp_path / "e", back.imu, back.frames, back.truth)
    for name in ("imu.csv", "landmarks.csv", "groundtruth.csv"):
        assert (tmp_path / "d" / name).read_bytes() == (tmp_path / "e" / name).read_bytes()


def test_round_trip_of_awkward_floats(tmp_path):
    vals = np.array([0.1, 1 / 3, 5e-324, 1.7976931348623157e308, -0.0, 2.0**-1074 * 3, np.nextafter(1.0, 2.0)])
    imu = ImuStream(np.arange(7) * 0.005, np.tile(vals[:, None], 3), np.tile(vals[::-1, None], 3))
    ds.write_imu(tmp_path / "imu.csv", imu)
    back = ds.read_imu(tmp_path / "imu.csv")
    np.testing.assert_array_equal(back.omega_m, imu.omega_m)
    np.testing.assert_array_equal(np.signbit(back.omega_m), np.signbit(imu.omega_m))


def test_asl_nanoseconds():
    assert ds.ns_to_decimal(1403636579758555392) == ds.Decimal("1403636579.758555392")
    assert ds.ns_to_seconds(1403636579758555392) == float(ds.Decimal("1403636579.758555392"))
    assert ds.ns_to_seconds(5_000_000) == 0.005


def _write_asl(root, truth=True, landmarks=True):
    imu_dir = root / "mav0" / "imu0"
    imu_dir.mkdir(parents=True)
    lines = ["#timestamp [ns],w_RS_S_x [rad s^-1],w_RS_S_y,w_RS_S_z,a_RS_S_x [m s^-2],a_RS_S_y,a_RS_S_z"]
    for k in range(4):
        lines.append(f"{1403636579758555392 + 5_000_000 * k},0.1,0.2,0.3,0.0,0.0,9.81")
    (imu_dir / "data.csv").write_text("\n".join(lines) + "\n")
    if truth:
        gt = root / "mav0" / "state_groundtruth_estimate0"
        gt.mkdir(parents=True)
        rows = ["#timestamp,p_x,p_y,p_z,q_w,q_x,q_y,q_z,v_x,v_y,v_z,b_w_x,b_w_y,b_w_z,b_a_x,b_a_y,b_a_z"]
        for k in range(4):
            rows.append(f"{1403636579758555392 + 5_000_000 * k},1,2,3,1,0,0,0,0.5,0,0,0,0,0,0,0,0")
        (gt / "data.csv").write_text("\n".join(rows) + "\n")
    if landmarks:
        (root / "landmarks.csv").write_text("t,id,fwx,fwy,fwz,fbx,fby,fbz\n"
                                            "1403636579.7635553,0,1,2,3,0,0,0\n")


def test_asl_ingestion(tmp_path):
    _write_asl(tmp_path)
    data = ds.load_dataset(tmp_path, ds.ASL)
    assert data.imu.t[0] == 1403636579.758555392
    np.testing.assert_allclose(np.diff(data.imu.t), 0.005, atol=1e-6)
    np.testing.assert_array_equal(data.imu.acc_m[2], [0, 0, 9.81])
    np.testing.assert_array_equal(data.truth.states.p[1], [1, 2, 3])
    assert len(data.frames) == 1
    assert ds.load_dataset(tmp_path / "mav0", ds.ASL).imu.t.shape == (4,)


def test_asl_without_landmarks_warns(tmp_path, caplog):
    _write_asl(tmp_path, truth=False, landmarks=False)
    data = ds.load_dataset(tmp_path, ds.ASL)
    assert data.frames == [] and data.truth is None
    assert "landmarks.csv" in caplog.text


def test_asl_ordering_error_names_line(tmp_path):
    _write_asl(tmp_path)
    path = tmp_path / "mav0" / "imu0" / "data.csv"
    lines = path.read_text().splitlines()
    lines[2], lines[3] = lines[3], lines[2]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(OrderingError) as info:
        ds.load_dataset(tmp_path, ds.ASL)
    assert info.value.line == 4


def test_shuffled_native_row_is_an_ordering_error(short_data, tmp_path):
    ds.write_dataset(tmp_path, short_data.imu, short_data.frames[:3])
    lines = (tmp_path / "imu.csv").read_text().splitlines()
    lines[10], lines[11] = lines[11], lines[10]
    (tmp_path / "imu.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(OrderingError) as info:
        ds.load_dataset(tmp_path)
    assert info.value.line == 12
    assert "imu.csv" in str(info.value)


def test_malformed_row_reports_file_line_column(short_data, tmp_path):
    ds.write_dataset(tmp_path, short_data.imu, short_data.frames[:3])
    lines = (tmp_path / "imu.csv").read_text().splitlines()
    cells = lines[5].split(",")
    cells[4] = "abc"
    lines[5] = ",".join(cells)
    (tmp_path / "imu.csv").write_text("\n".join(lines) + "\n")
    with pytest.raises(DatasetError) as info:
        ds.load_dataset(tmp_path)
    assert (info.value.line, info.value.column) == (6, "ax")
    assert str(tmp_path / "imu.csv") in str(info.value)


def test_bad_header_and_missing_dir(tmp_path):
    (tmp_path / "imu.csv").write_text("time,wx,wy,wz,ax,ay,az\n0,0,0,0,0,0,0\n")
    with pytest.raises(DatasetError):
        ds.load_dataset(tmp_path)
    with pytest.raises(DatasetError):
        ds.load_dataset(tmp_path / "nope")


def test_interpolation_hits_samples_and_midpoints(short_data):
    traj = short_data.truth
    mid = ds.interpolate_trajectory(traj, traj.t[[3, 4]])
    np.testing.assert_allclose(mid.states.data[:, :10], traj.states.data[[3, 4], :10], atol=1e-15)
    half = ds.interpolate_trajectory(traj, [0.5 * (traj.t[3] + traj.t[4])])
    np.testing.assert_allclose(half.states.p[0], 0.5 * (traj.states.p[3] + traj.states.p[4]), atol=1e-15)
    with pytest.raises(DatasetError):
        ds.interpolate_trajectory(traj, [traj.t[-1] + 1.0])


# ---------------------------------------------------------------- metrics


def _states(rng, n):
    return NavState.from_parts(q=random_quats(rng, n), p=rng.normal(0, 3, (n, 3)), v=rng.normal(0, 1, (n, 3)))


def test_error_examples(rng):
    t = np.arange(5) * 0.1
    x = _states(rng, 5)
    table = compute_errors(t, x, t, x)
    assert np.all(table.r_norm == 0) and np.all(table.p_norm == 0) and np.all(table.v_norm == 0)
    est = NavState(x.data.copy())
    est.data[:, :4] = geo.boxplus(x.q, [0.1, 0, 0])
    est.data[:, 4:7] = x.p + [0.3, 0.4, 0]
    table = compute_errors(t, x, t, est)
    np.testing.assert_allclose(table.r_norm, 0.1, atol=1e-12)
    np.testing.assert_allclose(table.p_norm, 0.5, atol=1e-12)
    assert table[2].p_norm == pytest.approx(0.5)


def test_errors_are_frame_consistent(rng):
    t = np.arange(50) * 0.1
    x, y = _states(rng, 50), _states(rng, 50)
    q0 = random_quats(rng, 1)[0]
    R0, p0 = geo.quat_to_rotmat(q0), rng.normal(size=3)

    def move(s):
        return NavState.from_parts(q=geo.quat_product(q0, s.q), p=s.p @ R0.T + p0, v=s.v @ R0.T)

    a, b = compute_errors(t, x, t, y), compute_errors(t, move(x), t, move(y))
    for name in ("r_norm", "p_norm", "v_norm"):
        np.testing.assert_allclose(getattr(b, name), getattr(a, name), atol=1e-9)
    assert np.all(a.r_norm <= np.pi + 1e-12)


def test_timestamp_mismatch(rng):
    x = _states(rng, 3)
    with pytest.raises(PreconditionError, match="index 1"):
        compute_errors(np.array([0.0, 0.1, 0.2]), x, np.array([0.0, 0.11, 0.2]), x)


def test_summary_statistics():
    assert rms([3.0, 4.0]) == pytest.approx(np.sqrt(12.5))
    t = np.arange(10.0)
    norm = np.array([5, 4, 3, 0.05, 0.2, 0.05, 0.01, 0.01, 0.01, 0.01])
    assert convergence_time(t, norm, 0.1) == 5.0
    assert convergence_time(t, norm, 10.0) == 0.0
    assert convergence_time(t, np.ones(10), 0.5) is None


def test_summarize_window(rng):
    t = np.arange(20) * 1.0
    truth = _states(rng, 20)
    est = NavState(truth.data.copy())
    est.data[:10, 4] += 1.0
    s = summarize(compute_errors(t, truth, t, est), transient=10.0)
    assert s.rmse_p == 0.0 and s.window_start == 10.0 and s.convergence_time_p == 10.0
    short = summarize(compute_errors(t[:5], truth[:5], t[:5], est[:5]), transient=10.0)
    assert short.window_start == 0.0 and short.rmse_p == pytest.approx(1.0)
