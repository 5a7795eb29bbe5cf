"""Integrator study: envelope error of the scalar release and path error under time scaling.

Compares semi-implicit Euler (the default control-loop integrator) with RK4
over a range of step sizes.

    python scripts/convergence_study.py
"""
import warnings

import numpy as np

from cartdmp import quaternion as quat
from cartdmp.controller import Gains, scalar_release
from cartdmp.dmp import rollout, stack_states
from cartdmp.learning import synth_demo, train

STEPS = (1 / 125, 1 / 250, 1 / 500, 1 / 1000, 1 / 2000)


def release_error(method, dt, k_v=10.0, T=4.0):
    t, err = scalar_release(Gains(tau=1.0, k_v=k_v), 1.0, T, dt, method=method)
    env = (1 + k_v * t / 2) * np.exp(-k_v * t / 2)
    return np.max(np.abs(err - env) / env), max(-err.min(), 0.0)


def time_scaling_error(model, method, dt, T=8.0):
    """Max position gap between tau_a = tau and tau_a = 2 tau, matched at equal phase."""
    _, a = rollout(model, T, dt, tau_a=model.tau, method=method)
    _, b = rollout(model, 2 * T, dt, tau_a=2 * model.tau, method=method)
    ya, yb = stack_states(a).y_c, stack_states(b).y_c
    # interpolate the slow run at the fast run's phase
    tb = np.arange(len(yb)) * dt / 2
    ta = np.arange(len(ya)) * dt
    yb_at = np.column_stack([np.interp(ta, tb, yb[:, i]) for i in range(3)])
    return np.abs(ya - yb_at).max()


def main():
    print("scalar release, k_v = 10: max relative envelope error / overshoot")
    print(f"{'dt':>10} {'euler':>12} {'overshoot':>10} {'rk4':>12}")
    for dt in STEPS:
        e_eu, o_eu = release_error("euler", dt)
        e_rk, _ = release_error("rk4", dt)
        print(f"{dt:10.5f} {e_eu:12.3e} {o_eu:10.1e} {e_rk:12.3e}")

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        demo = synth_demo("reach", 4.0, q_g=quat.from_axis_angle([1.0, 1.0, 0.0], 1.0))
        model, _ = train(demo)
    print("\ntime scaling tau_a = 2 tau vs tau: max position gap [m]")
    print(f"{'dt':>10} {'euler':>12} {'rk4':>12}")
    for dt in STEPS[:4]:
        print(f"{dt:10.5f} {time_scaling_error(model, 'euler', dt):12.3e} "
              f"{time_scaling_error(model, 'rk4', dt):12.3e}")


if __name__ == "__main__":
    main()
