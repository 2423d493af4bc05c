import os
import time

import numpy as np
import pytest

from motionsel import cli, synth
from motionsel.config import PRESETS, ConfigError, load_config, parse_config, preset_text
from motionsel.synth import SynthSpec
from motionsel.video_io import load_clip

SPEC = SynthSpec(height=16, width=16, size=4, amplitude=1, period=8, length=14)

CONFIG = """\
[model]
N = 4
L = 4
delta = 3
channels = 1
height = 16
width = 16

[selector]
ndf = 4

[train]
iters_per_K = 3
stage2_max = 3
t_train = 10
seed = 5

[data]
clip = clip/frame_%03d.png
out_dir = run
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("ws")
    synth.write(SPEC, str(root / "clip"))
    (root / "run.cfg").write_text(CONFIG)
    assert cli.main(["train", "--config", str(root / "run.cfg")]) == 0
    return root


def test_presets_parse():
    for name in PRESETS:
        cfg = parse_config(preset_text(name), name)
        assert cfg.variant == "M2"
    bird = parse_config(preset_text("bird"))
    assert (bird.model.N, bird.model.L, bird.model.delta) == (50, 12, 4)
    assert bird.train.t_train == 50


def test_unknown_key_reports_line():
    text = CONFIG.replace("ndf = 4", "ndf = 4\nwobble = 3")
    with pytest.raises(ConfigError) as info:
        parse_config(text, "x.cfg")
    assert info.value.line == 11 and info.value.key == "wobble"
    assert "x.cfg:11" in str(info.value)


def test_bad_values_and_missing_keys():
    with pytest.raises(ConfigError):
        parse_config(CONFIG.replace("N = 4", "N = four"))
    with pytest.raises(ConfigError):
        parse_config(CONFIG.replace("L = 4\n", ""))
    with pytest.raises(ConfigError):
        parse_config(CONFIG + "[bogus]\n")
    with pytest.raises(ConfigError):
        parse_config(CONFIG.replace("N = 4", "N = 4\nN = 5"))


def test_variant_sets_motion_weight():
    assert parse_config(CONFIG + "[run]\nvariant = M1\n").train.mu_motion == 0.0
    assert parse_config(CONFIG).train.mu_motion == 10.0
    assert not parse_config(CONFIG + "[run]\nvariant = B1\n").use_selector


def test_missing_clip_exits_2(tmp_path):
    (tmp_path / "run.cfg").write_text(CONFIG)
    assert cli.main(["train", "--config", str(tmp_path / "run.cfg")]) == 2
    with pytest.raises(ConfigError):
        load_config(tmp_path / "run.cfg")


def test_usage_errors_exit_2():
    assert cli.main([]) == 2
    assert cli.main(["train"]) == 2


def test_train_outputs(workspace):
    run = workspace / "run"
    assert (run / "final.bin").exists()
    lines = (run / "train_log.csv").read_text().splitlines()
    assert len(lines) == 1 + 9 + 3


def test_smoke_training_is_fast(tmp_path):
    synth.write(SPEC, str(tmp_path / "clip"))
    (tmp_path / "run.cfg").write_text(CONFIG)
    t0 = time.time()
    assert cli.main(["train", "--config", str(tmp_path / "run.cfg"), "--out", str(tmp_path / "o")]) == 0
    assert time.time() - t0 < 60


def test_training_reproducible(workspace, tmp_path):
    assert cli.main(["train", "--config", str(workspace / "run.cfg"), "--out", str(tmp_path)]) == 0
    a = (workspace / "run" / "train_log.csv").read_text().splitlines()[1:11]
    b = (tmp_path / "train_log.csv").read_text().splitlines()[1:11]
    assert a == b
    assert (workspace / "run" / "final.bin").read_bytes() == (tmp_path / "final.bin").read_bytes()


def _predict(workspace, out, entry=0, horizon=5):
    return cli.main(["predict", "--config", str(workspace / "run.cfg"),
                     "--checkpoint", str(workspace / "run" / "final.bin"),
                     "--entry", str(entry), "--horizon", str(horizon), "--out", str(out)])


def test_predict(workspace, tmp_path):
    assert _predict(workspace, tmp_path / "p", horizon=25) == 0
    assert len(list((tmp_path / "p").glob("pred_*.png"))) == 25
    lines = (tmp_path / "p" / "alpha_trace.csv").read_text().splitlines()
    assert len(lines) == 1 + 25 * 2 * 4
    assert lines[1].startswith("3,")


def test_predict_horizon_zero_and_bad_entry(workspace, tmp_path):
    assert _predict(workspace, tmp_path / "z", horizon=0) == 0
    assert not (tmp_path / "z").exists()
    assert _predict(workspace, tmp_path / "e", entry=12) == 2
    assert _predict(workspace, tmp_path / "e", entry=-1) == 2


def test_checkpoint_mismatch_exits_4(workspace, tmp_path):
    other = CONFIG.replace("N = 4", "N = 6")
    (workspace / "other.cfg").write_text(other)
    code = cli.main(["predict", "--config", str(workspace / "other.cfg"),
                     "--checkpoint", str(workspace / "run" / "final.bin"),
                     "--entry", "0", "--horizon", "1", "--out", str(tmp_path)])
    assert code == 4
    (tmp_path / "junk.bin").write_bytes(b"junk")
    code = cli.main(["predict", "--config", str(workspace / "run.cfg"),
                     "--checkpoint", str(tmp_path / "junk.bin"),
                     "--entry", "0", "--horizon", "1", "--out", str(tmp_path)])
    assert code == 4


def _evaluate(pred_dir, gt, out, first=0):
    return cli.main(["evaluate", "--pred", str(pred_dir), "--gt", gt, "--first", str(first),
                     "--out", str(out)])


def test_evaluate_identical_frames(workspace, tmp_path, capsys):
    gt = str(workspace / "clip" / "frame_%03d.png")
    pred = tmp_path / "pred"
    clip = load_clip(gt)
    from motionsel.video_io import write_clip
    write_clip(clip[4:8], pred, "pred_%03d.png")
    assert _evaluate(pred, gt, tmp_path / "r.csv", first=4) == 0
    last = (tmp_path / "r.csv").read_text().splitlines()[-1].split(",")
    assert float(last[2]) == 100.0 and float(last[3]) == 1.0
    assert "M2 (FDN)" in capsys.readouterr().out


def test_copy_last_equals_b0(workspace, tmp_path):
    gt = str(workspace / "clip" / "frame_%03d.png")
    clip = load_clip(gt)
    from motionsel.video_io import write_clip
    write_clip(np.repeat(clip[5:6], 6, axis=0), tmp_path / "pred", "pred_%03d.png")
    assert _evaluate(tmp_path / "pred", gt, tmp_path / "r.csv", first=6) == 0
    assert (tmp_path / "r.csv").read_text().splitlines()[1:] == \
        (tmp_path / "r_b0.csv").read_text().splitlines()[1:]


def test_evaluate_errors(workspace, tmp_path):
    gt = str(workspace / "clip" / "frame_%03d.png")
    (tmp_path / "empty").mkdir()
    assert _evaluate(tmp_path / "empty", gt, tmp_path / "r.csv") == 2
    _predict(workspace, tmp_path / "p", horizon=5)
    assert _evaluate(tmp_path / "p", gt, tmp_path / "r.csv", first=12) == 2


def test_analyze(workspace, tmp_path):
    code = cli.main(["analyze", "--config", str(workspace / "run.cfg"),
                     "--checkpoint", str(workspace / "run" / "final.bin"),
                     "--entry", "2", "--horizon", "4", "--out", str(tmp_path)])
    assert code == 0
    assert len(list((tmp_path / "decomposition").glob("*.png"))) == 12
    lines = (tmp_path / "alpha_trace.csv").read_text().splitlines()
    assert len(lines) == 1 + 4 * 2 * 4
    assert (tmp_path / "average_pred.png").exists() and (tmp_path / "average_gt.png").exists()


def test_module_entry_point():
    import subprocess
    import sys
    out = subprocess.run([sys.executable, "-m", "motionsel", "--help"], capture_output=True, text=True)
    assert out.returncode == 0 and "train" in out.stdout
