import csv
import shutil

import numpy as np
import pytest

from cartdmp import quaternion as quat
from cartdmp.cli import main
from cartdmp.io import read_demo, read_log, read_model, write_demo, write_log, write_model
from cartdmp.learning import Demonstration
from cartdmp.presets import RunConfig, load_config
from cartdmp.sim import Perturbation, run_episode


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_model_round_trip_is_field_exact(tmp_path, reach_model):
    write_model(tmp_path / "m.txt", reach_model)
    assert read_model(tmp_path / "m.txt") == reach_model


def test_demo_round_trip(tmp_path, reach_demo):
    write_demo(tmp_path / "d.csv", reach_demo)
    back = read_demo(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.t, reach_demo.t)
    np.testing.assert_array_equal(back.y, reach_demo.y)
    np.testing.assert_array_equal(back.q, reach_demo.q)


def test_log_round_trip(tmp_path, reach_model):
    from cartdmp.controller import Gains
    pulse = Perturbation("accel_pulse", 0.2, 0.4, accel=np.arange(6.0))
    log = run_episode(reach_model, Gains(tau=reach_model.tau), [pulse], 1.0)
    write_log(tmp_path / "trial_000.csv", log)
    back = read_log(tmp_path / "trial_000.csv")
    for name in ("t", "x", "tau_a", "xi", "q_c", "q_a"):
        np.testing.assert_array_equal(getattr(back, name), getattr(log, name))
    assert back.tau == log.tau and back.failed_t is None
    np.testing.assert_array_equal(back.perturbations[0].accel, pulse.accel)


def test_config_file(tmp_path):
    cfg_path = tmp_path / "run.cfg"
    cfg_path.write_text("# two pulses\npreset = custom\nmodel = m.txt\nk_v = 12\n"
                        "perturbation = accel_pulse 1 1.3 1 0 0 0 0 1\n"
                        "perturbation = displace_release 2 0.1 0 0 0 0 0.2\n")
    cfg = load_config(cfg_path, trials=3)
    assert cfg.k_v == 12.0 and cfg.trials == 3 and len(cfg.perturbations) == 2
    assert cfg.perturbations[1].kind == "displace_release"
    cfg_path.write_text("preset = setup1\nbogus = 1\n")
    with pytest.raises(ValueError):
        load_config(cfg_path)
    with pytest.raises(ValueError):
        RunConfig(preset="setup9")


def test_demo_gen_reach(tmp_path, capsys):
    assert main(["demo-gen", "--kind", "reach", "--duration", "4", "--out", str(tmp_path)]) == 0
    demo = read_demo(tmp_path / "demo_reach.csv")
    assert len(demo) == 1000
    assert demo.t[1] - demo.t[0] == pytest.approx(1 / 250, rel=1e-3)


def test_demo_gen_handover(tmp_path):
    path = tmp_path / "h.csv"
    assert main(["demo-gen", "--kind", "handover_gt_pi", "--angle", "4.712", "-o", str(path)]) == 0
    demo = read_demo(path)
    angle = np.linalg.norm(quat.quat_diff(demo.q[-1], demo.q[0]))
    assert angle == pytest.approx(1.5 * np.pi, abs=1e-3)


def test_demo_gen_usage_errors(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["demo-gen", "--duration", "4"])
    assert exc.value.code == 2
    assert main(["demo-gen", "--kind", "handover_gt_pi", "--angle", "2.0",
                 "--out", str(tmp_path)]) == 2


def test_out_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("CARTDMP_OUT_DIR", str(tmp_path / "env"))
    assert main(["demo-gen", "--kind", "reach"]) == 0
    assert (tmp_path / "env" / "demo_reach.csv").exists()


def test_train_reports_small_rollout_error(tmp_path, capsys, reach_demo):
    write_demo(tmp_path / "d.csv", reach_demo)
    assert main(["train", str(tmp_path / "d.csv"), "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    pos = float(out.split("rollout RMS position error:")[1].split()[0])
    assert pos < 1e-2
    assert read_model(tmp_path / "model.txt").n_basis == 25


def test_train_constant_pose_warns(tmp_path, capsys):
    n = 50
    demo = Demonstration(np.arange(n) / 250, np.zeros((n, 3)), np.tile(quat.IDENTITY, (n, 1)))
    write_demo(tmp_path / "c.csv", demo)
    assert main(["train", str(tmp_path / "c.csv"), "--out", str(tmp_path)]) == 0
    assert "warning" in capsys.readouterr().err
    assert np.all(read_model(tmp_path / "model.txt").weights == 0)


def test_train_residual_non_increasing(tmp_path, capsys, reach_demo):
    write_demo(tmp_path / "d.csv", reach_demo)
    residuals = []
    for n_basis in (1, 25):
        main(["train", str(tmp_path / "d.csv"), "--n-basis", str(n_basis),
              "-o", str(tmp_path / f"m{n_basis}.txt")])
        out = capsys.readouterr().out
        line = out.split("forcing residual RMS per dim:")[1].splitlines()[0]
        residuals.append(np.array(line.split(), dtype=float))
    assert np.all(residuals[1] <= residuals[0])


def test_train_bad_input_exits_3(tmp_path):
    (tmp_path / "bad.csv").write_text("t,y1,y2,y3,qw,qx,qy,qz\n0,0,0,0,1,0,0,0\n")
    assert main(["train", str(tmp_path / "bad.csv"), "--out", str(tmp_path)]) == 3
    assert main(["train", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == 3


def test_run_setup3_summary(tmp_path):
    assert main(["run", "--preset", "setup3", "--out", str(tmp_path)]) == 0
    text = (tmp_path / "summary.txt").read_text()
    assert "equator_crossed=True" in text
    initial = float(text.split("initial_dcg=")[1].split()[0])
    assert initial > np.pi


def test_run_setup2_without_perturbation(tmp_path):
    assert main(["run", "--preset", "setup2", "--no-perturb", "--T", "10",
                 "--out", str(tmp_path)]) == 0
    ratio = float((tmp_path / "summary.txt").read_text().split("max_tau_ratio=")[1].split()[0])
    assert ratio < 1.05


def test_run_usage_and_runtime_errors(tmp_path):
    assert main(["run", "--preset", "custom", "--out", str(tmp_path)]) == 2
    assert main(["run", "--preset", "setup1", "--model", str(tmp_path / "none.txt"),
                 "--out", str(tmp_path)]) == 2
    cfg = tmp_path / "turn.cfg"
    write_model(tmp_path / "m.txt", _reach_model_for_cli(tmp_path))
    cfg.write_text(f"preset = custom\nmodel = {tmp_path / 'm.txt'}\nT = 1\n"
                   f"perturbation = displace_release 0.1 0 0 0 0 0 {2 * np.pi - 1e-9!r}\n")
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 4


def _reach_model_for_cli(tmp_path):
    main(["demo-gen", "--kind", "reach", "-o", str(tmp_path / "d.csv")])
    main(["train", str(tmp_path / "d.csv"), "-o", str(tmp_path / "tmp_model.txt")])
    return read_model(tmp_path / "tmp_model.txt")


def test_run_is_byte_deterministic(tmp_path):
    args = ["run", "--preset", "setup1", "--trials", "3", "--seed", "11", "--T", "1"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
    for f in sorted((tmp_path / "a").iterdir()):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes(), f.name


def test_report_counts(tmp_path):
    run_dir = tmp_path / "runs"
    assert main(["run", "--preset", "setup1", "--trials", "10", "--out", str(run_dir)]) == 0
    # a short copy of one trial cannot have converged
    short = tmp_path / "short"
    short.mkdir()
    log = read_log(run_dir / "trial_000.csv")
    log.t, log.x, log.tau_a, log.xi = log.t[:20], log.x[:20], log.tau_a[:20], log.xi[:20]
    log.q_c, log.q_a = log.q_c[:20], log.q_a[:20]
    write_log(short / "trial_100.csv", log)

    out = tmp_path / "rep"
    assert main(["report", str(run_dir), "--out", str(out)]) == 0
    table = rows(out / "report_table.csv")
    agg = rows(out / "report_aggregate.csv")[0]
    assert len(table) == 10 and all(r["converged"] == "True" for r in table)
    assert int(agg["n_trials"]) == 10 and int(agg["n_converged"]) == 10

    assert main(["report", str(run_dir), str(short / "trial_100.csv"), "--out", str(out)]) == 0
    table = rows(out / "report_table.csv")
    agg = rows(out / "report_aggregate.csv")[0]
    assert int(agg["n_trials"]) == len(table) == 11
    assert int(agg["n_converged"]) == sum(r["converged"] == "True" for r in table) == 10
    assert int(agg["n_not_converged"]) == 1


def test_report_single_log(tmp_path):
    run_dir = tmp_path / "one"
    assert main(["run", "--preset", "setup1", "--out", str(run_dir)]) == 0
    assert main(["report", str(run_dir / "trial_000.csv"), "--out", str(tmp_path)]) == 0
    assert rows(tmp_path / "report_table.csv")[0]["converged"] == "True"
    shutil.rmtree(run_dir)
    assert main(["report", str(run_dir), "--out", str(tmp_path)]) == 2
