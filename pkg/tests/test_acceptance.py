"""Acceptance criteria 1-8, each at its stated tolerance.

Every test records a PASS/FAIL line that is repeated in the terminal summary.
"""
import time
import warnings

import numpy as np
import pytest

from cartdmp import quaternion as quat
from cartdmp.cli import fit_report
from cartdmp.controller import Gains, scalar_release
from cartdmp.dmp import CoupledState, dmp_derivatives, rollout, stack_states
from cartdmp.learning import train
from cartdmp.presets import RunConfig, build
from cartdmp.sim import run_batch, summarize

from conftest import record_criterion

N_POINTS = 100_000


@pytest.fixture(scope="module")
def setup1_logs():
    model, gains, sets, c0 = build(RunConfig(preset="setup1", trials=100, seed=0))
    start = time.perf_counter()
    logs = run_batch(model, gains, sets, 3.0, coupled0=c0)
    return logs, time.perf_counter() - start


def test_criterion_1_setup1_convergence(setup1_logs):
    logs, elapsed = setup1_logs
    summaries = [summarize(log, tol=1e-3) for log in logs]
    n_conv = sum(s["converged"] for s in summaries)
    worst = max(max(s["final"].values()) for s in summaries)
    ok = n_conv == 100 and elapsed < 5.0
    record_criterion("1 setup1 convergence", ok,
                     f"{n_conv}/100 converged within 3 s, worst final norm {worst:.2e}, "
                     f"batch runtime {elapsed:.2f} s")
    assert ok


def test_criterion_2_exponential_decay(setup1_logs):
    logs, _ = setup1_logs
    summaries = [summarize(log) for log in logs]
    slopes = np.array([s["decay_rate"] for s in summaries])
    r2 = np.array([s["decay_r2"] for s in summaries])
    ok = bool(np.all(slopes < -1.0) and np.all(r2 > 0.95))
    record_criterion("2 exponential decay", ok,
                     f"slowest slope {slopes.max():.3f} 1/s, lowest R^2 {r2.min():.4f}")
    assert ok


def test_criterion_3_temporal_coupling():
    cfg = RunConfig(preset="setup2", trials=5, seed=0)
    model, gains, sets, _ = build(cfg)
    logs = run_batch(model, gains, sets + [[]], cfg.T)
    free = logs[-1]
    tau = gains.tau
    peak, recovery, stays_low, ahead = [], [], True, True
    for log in logs[:-1]:
        starts = [p.t_start for p in log.perturbations[1:]] + [log.t[-1] + 1.0]
        for p, next_start in zip(log.perturbations, starts):
            on = (log.t >= p.t_start - 1e-9) & (log.t < p.t_end - 1e-9)
            peak.append(log.tau_a[on].max() / tau)
            after = log.t >= p.t_end - 1e-9
            low = np.flatnonzero(after & (log.tau_a < 1.05 * tau))
            recovery.append(log.t[low[0]] - p.t_end if len(low) else np.inf)
            settled = (log.t >= p.t_end + 2.0) & (log.t < next_start)
            stays_low &= bool(np.all(log.tau_a[settled] < 1.05 * tau))
            k = int(np.searchsorted(log.t, p.t_end - 1e-9))
            ahead &= bool(log.x[k] > free.x[k])
    ok = min(peak) > 1.5 and max(recovery) <= 2.0 and stays_low and ahead
    record_criterion("3 temporal coupling", ok,
                     f"min peak tau_a/tau {min(peak):.3f}, slowest return below 1.05 "
                     f"{max(recovery):.3f} s, stays below {stays_low}, "
                     f"phase ahead of unperturbed at pulse ends {ahead}")
    assert ok


def test_criterion_4_setup3_half_sphere_crossing():
    cfg = RunConfig(preset="setup3", seed=0)
    model, gains, sets, _ = build(cfg)
    log = run_batch(model, gains, sets, cfg.T)[0]
    s = summarize(log)
    final_dcg = s["final"]["dcg"]
    ok = (np.pi < s["initial_dcg"] < 2 * np.pi and s["equator_crossed"]
          and s["min_successive_dot"] > 0 and final_dcg < 1e-2)
    record_criterion("4 setup3 crossing", ok,
                     f"initial |d_cg| {s['initial_dcg']:.4f} rad, scalar part range "
                     f"[{log.q_c[:, 0].min():.3f}, {log.q_c[:, 0].max():.3f}], "
                     f"min successive dot {s['min_successive_dot']:.6f}, "
                     f"final |d_cg| {final_dcg:.2e} rad")
    assert ok


def test_criterion_5_training_fidelity(reach_demo, handover_demo):
    details, ok = [], True
    for name, demo in (("reach", reach_demo), ("handover", handover_demo)):
        stats = []
        for n_basis in (10, 25, 50):
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                model, targets = train(demo, n_basis=n_basis)
            residual, pos, rot = fit_report(model, targets, demo)
            stats.append((pos, rot, np.sqrt(np.mean(residual**2))))
        stats = np.array(stats)
        monotone = bool(np.all(np.diff(stats, axis=0) <= 0))
        within = stats[1, 0] < 1e-2 and stats[1, 1] < 0.05
        ok &= monotone and within
        details.append(f"{name}: N_b=25 pos {stats[1, 0]:.2e} m rot {stats[1, 1]:.2e} rad, "
                       f"non-increasing {monotone}")
    record_criterion("5 training fidelity", ok, "; ".join(details))
    assert ok


def test_criterion_6_quaternion_suite(rng):
    q = quat.random_unit(rng, N_POINTS)
    q = q[q[:, 0] > -1 + 1e-6]
    exp_log = np.abs(quat.exp_map(quat.log_map(q)) - q).max()

    pole = quat.random_unit(rng)
    p = quat.random_unit(rng, N_POINTS)
    p = p[np.linalg.norm(p - pole, axis=1) > 1e-3]
    stereo = np.abs(quat.stereographic_unproject(quat.stereographic_project(p, pole), pole)
                    - p).max()

    axes = rng.standard_normal((N_POINTS, 3))
    axes /= np.linalg.norm(axes, axis=1, keepdims=True)
    angles = rng.uniform(0.0, 2 * np.pi - 1e-3, N_POINTS)
    q2 = quat.random_unit(rng, N_POINTS)
    q1 = quat.multiply(quat.from_axis_angle(axes, angles), q2)
    diff = np.abs(np.linalg.norm(quat.quat_diff(q1, q2), axis=1) - angles).max()

    try:
        quat.log_map([-1.0, 0.0, 0.0, 0.0])
        raises = False
    except quat.DomainError:
        raises = True

    chain = quat.random_unit(rng)
    for step, w in zip(quat.random_unit(rng, 10_000), rng.standard_normal((10_000, 3))):
        chain = quat.integrate_orientation(quat.multiply(step, chain), w, 0.004)
    drift = abs(np.linalg.norm(chain) - 1.0)

    ok = exp_log < 1e-12 and stereo < 1e-12 and diff < 1e-10 and raises and drift < 1e-9
    record_criterion("6 quaternion suite", ok,
                     f"exp/log {exp_log:.1e}, stereographic {stereo:.1e}, "
                     f"|quat_diff| vs angle {diff:.1e}, pole raises {raises}, "
                     f"norm drift {drift:.1e}")
    assert ok


def test_criterion_7_critical_damping():
    dt = 1 / 250
    rel_err, overshoot = 0.0, 0.0
    for k_v in (5.0, 10.0, 20.0):
        gains = Gains(tau=1.0, k_v=k_v)
        for amplitude in (0.1, -0.5, 1.0):
            t, err = scalar_release(gains, amplitude, 4.0, dt)
            env = amplitude * (1 + k_v * t / 2) * np.exp(-k_v * t / 2)
            rel_err = max(rel_err, np.max(np.abs(err - env) / np.abs(env)))
            overshoot = max(overshoot, -np.min(err * np.sign(amplitude)))
    # the simulated robot's own integrator must not overshoot either
    _, euler = scalar_release(Gains(tau=1.0), 0.1, 6.0, dt, method="euler")
    overshoot = max(overshoot, -euler.min())
    ok = rel_err < 1e-4 and overshoot <= 1e-9
    record_criterion("7 critical damping", ok,
                     f"max relative envelope error {rel_err:.1e} at 250 Hz, "
                     f"max overshoot {max(overshoot, 0.0):.1e}")
    assert ok


def _arc_length(y, q):
    seg = np.sqrt(np.sum(np.diff(y, axis=0) ** 2, axis=1)
                  + np.sum(quat.quat_diff(q[1:], q[:-1]) ** 2, axis=1))
    return np.concatenate([[0.0], np.cumsum(seg)])


def _resample(s, values, grid):
    return np.column_stack([np.interp(grid, s, v) for v in values.T])


def test_criterion_8_homogeneity(reach_model, rng):
    model = reach_model
    exact = True
    for _ in range(200):
        s = CoupledState(model.g + 0.3 * rng.standard_normal(3), rng.standard_normal(3),
                         quat.multiply(quat.exp_map(rng.standard_normal(3)), model.q_g),
                         rng.standard_normal(3), np.float64(rng.uniform(1e-3, 1.0)))
        tau_a = rng.uniform(0.5, 10.0)
        d1, d2 = dmp_derivatives(model, s, tau_a), dmp_derivatives(model, s, 2 * tau_a)
        for a, b in zip((d1.yd_c, d1.zd, d1.omega_c, d1.omega_zd, d1.xd),
                        (d2.yd_c, d2.zd, d2.omega_c, d2.omega_zd, d2.xd)):
            exact &= bool(np.array_equal(b, a / 2))

    dt, T = 1 / 250, 8.0
    paths = []
    for factor in (1, 2):
        _, states = rollout(model, factor * T, dt, tau_a=factor * model.tau, method="rk4")
        st = stack_states(states)
        paths.append((st.y_c, st.q_c, _arc_length(st.y_c, st.q_c)))
    length = min(paths[0][2][-1], paths[1][2][-1])
    grid = np.linspace(0.0, length, 5000)
    (ya, qa, sa), (yb, qb, sb) = paths
    pos_dev = np.abs(_resample(sa, ya, grid) - _resample(sb, yb, grid)).max()
    qa_g, qb_g = quat.normalize(_resample(sa, qa, grid)), quat.normalize(_resample(sb, qb, grid))
    rot_dev = np.linalg.norm(quat.quat_diff(qa_g, qb_g), axis=1).max()
    ok = exact and max(pos_dev, rot_dev) < 1e-6
    record_criterion("8 homogeneity", ok,
                     f"derivatives exact {exact}, path deviation after arc-length "
                     f"reparameterization {pos_dev:.1e} m / {rot_dev:.1e} rad")
    assert ok
