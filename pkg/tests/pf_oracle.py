"""Shared particle-filter oracles: the bare UKF reference and run fixtures."""
import dataclasses

import numpy as np

from quatnav import geometry as geo
from quatnav import qukf, qupf
from quatnav.kinematics import NavState
from quatnav.simkit import dataset as ds

from conftest import preset_config


def data_config(data, **kw):
    cfg = preset_config("qupf").filter_config(data.truth, float(data.imu.t[0]))
    if "m_p" in kw:
        kw.setdefault("m_thr", None)  # back to the m_p / 2 default
    return dataclasses.replace(cfg, **kw)


def manual_single_ukf(data, cfg):
    """The bare quaternion UKF, with the mean replaced by the same proposal draw the particle filter makes."""
    frames = qupf.align_frames(data.imu.t, data.frames)
    L0 = geo.cholesky(cfg.init_cov)
    mean = cfg.init_mean.boxplus(L0 @ qupf.substream(cfg.seed, 1, 0, 0).standard_normal(15))
    cov = cfg.init_cov
    pts = None
    out = []
    for k in range(len(data.imu)):
        if k > 0:
            sig = qukf.sigma_points(qukf.augment(qukf.UkfMoments(mean, cov), cfg.imu_noise), cfg.tuning)
            pred, pts = qukf.time_update(sig, data.imu[k - 1], cfg.world, cfg.imu_noise,
                                         data.imu.t[k] - data.imu.t[k - 1])
            mean, cov = pred.mean, pred.cov
        frame = frames.get(k)
        if frame is not None:
            prior = qukf.UkfMoments(mean, cov)
            if pts is None:
                pts = qukf.sigma_points(qukf.augment(prior, cfg.imu_noise), cfg.tuning).points
            C_f = cfg.landmark_noise.cov(3 * len(frame))
            post, _, _ = qukf.measurement_update(prior, pts, cfg.tuning.weights(), frame.z, frame.f_w, C_f)
            zeta = qupf.substream(cfg.seed, 2, k, 0).standard_normal(15)
            mean, cov = post.mean.boxplus(geo.cholesky(post.cov) @ zeta), post.cov
        pts = None
        out.append(mean.data.copy())
    return np.array(out)


def estimates_csv(tmp_path, est, name):
    path = tmp_path / name
    ds.write_trajectory(path, np.array([e.t for e in est]), NavState(np.stack([e.state.data for e in est])))
    return path.read_bytes()
