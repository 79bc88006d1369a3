import hashlib
import json

import pytest

from curricomp.cli import main
from curricomp.dataset import write_manifest


def tree_digest(root):
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode())
            h.update(p.read_bytes())
    return h.hexdigest()


def test_gen_data_counts_and_rerun(tmp_path, capsys):
    assert main(["gen-data", "--n-per-class", "5", "--val-per-class", "2", "--resolution", "16",
                 "--out", str(tmp_path / "a")]) == 0
    assert len(list((tmp_path / "a" / "images" / "basic").glob("*.ppm"))) == 30
    assert len((tmp_path / "a" / "val_manifest.csv").read_text().splitlines()) == 15
    main(["gen-data", "--n-per-class", "5", "--val-per-class", "2", "--resolution", "16",
          "--out", str(tmp_path / "b")])
    assert tree_digest(tmp_path / "a") == tree_digest(tmp_path / "b")
    assert "30 images" in capsys.readouterr().out


def test_gen_data_full_size(tmp_path):
    assert main(["gen-data", "--n-per-class", "200", "--out", str(tmp_path)]) == 0
    assert len(list((tmp_path / "images" / "basic").glob("*.ppm"))) == 1200
    assert len((tmp_path / "manifest.csv").read_text().splitlines()) == 1201


def test_gen_data_zero_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["gen-data", "--n-per-class", "0", "--out", str(tmp_path)])
    assert info.value.code == 2


def write_config(path, **extra):
    cfg = {"resolution": 16, "model": {"hidden": [16]}, "batch_size": 16,
           "epoch_dis": [1, 1], "compound_prop": [0.0, 1.0],
           "data": {"val_per_class": 3, "synthetic": {"n_per_class": 10}}}
    cfg.update(extra)
    path.write_text(json.dumps(cfg))
    return path


def test_train_eval_predict(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json")
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg), "--out", str(out)]) == 0
    for name in ("best.ckpt", "last.ckpt", "trainlog.jsonl", "config.json", "metrics.json",
                 "training_curves.png", "confusion.png"):
        assert (out / name).exists(), name
    main(["gen-data", "--n-per-class", "1", "--val-per-class", "2", "--resolution", "16",
          "--out", str(tmp_path / "d")])
    capsys.readouterr()
    assert main(["eval", "--checkpoint", str(out / "best.ckpt"),
                 "--manifest", str(tmp_path / "d" / "val_manifest.csv")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert len(report["per_class"]) == 7 and 0 <= report["macro_f1"] <= 1
    image = next((tmp_path / "d" / "images" / "basic").glob("*.ppm"))
    assert main(["predict", "--checkpoint", str(out / "best.ckpt"), "--image", str(image), "--json"]) == 0
    pred = json.loads(capsys.readouterr().out)
    assert len(pred["basic"]) == 6 and len(pred["compound_scores"]) == 7
    assert pred["compound"] in pred["compound_scores"]


def test_train_cli_flags_override(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json")
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "r"), "--epoch-dis", "1,1,1",
                 "--compound-prop", "0,0.5,1", "--no-figures"]) == 0
    assert len((tmp_path / "r" / "trainlog.jsonl").read_text().splitlines()) == 3
    assert not (tmp_path / "r" / "training_curves.png").exists()


def test_train_mismatched_arrays(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", epoch_dis=[5, 5, 3], compound_prop=[0, 1])
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "r")]) == 1
    assert "compound_prop" in capsys.readouterr().err
    assert not (tmp_path / "r" / "trainlog.jsonl").exists()


def test_eval_missing_checkpoint(tmp_path, capsys):
    assert main(["eval", "--checkpoint", str(tmp_path / "none.ckpt"), "--manifest", "x.csv"]) == 1
    assert "not found" in capsys.readouterr().err


def test_eval_overfit_tiny_run(tmp_path, capsys):
    # train on a 50-sample natural compound set and score that same set
    from curricomp.dataset import GlyphConfig, generate_compound_glyphs, generate_synthetic
    gcfg = GlyphConfig(n_per_class=2, resolution=16, seed=3)
    compounds = generate_compound_glyphs(8, gcfg)[:50]
    write_manifest(tmp_path / "compounds.csv", compounds)
    write_manifest(tmp_path / "train.csv", generate_synthetic(gcfg) + compounds)
    cfg = write_config(tmp_path / "c.json", epoch_dis=[80], compound_prop=[1.0], batch_size=25,
                       optimizer={"learning_rate": 0.01},
                       compound_source={"mixup": 0.0, "cutmix": 0.0, "natural": 1.0},
                       augment={"flip_p": 0, "jitter_strength": 0, "crop_scale": 1, "cutout_size": 0},
                       data={"train_manifest": str(tmp_path / "train.csv"),
                             "val_manifest": str(tmp_path / "compounds.csv")})
    assert main(["train", "--config", str(cfg), "--out", str(tmp_path / "r"), "--no-figures"]) == 0
    capsys.readouterr()
    main(["eval", "--checkpoint", str(tmp_path / "r" / "last.ckpt"),
          "--manifest", str(tmp_path / "compounds.csv")])
    report = json.loads(capsys.readouterr().out)
    assert report["n"] == 50
    assert report["macro_f1"] >= 0.99


def test_sweep_cli(tmp_path, capsys):
    spec = {"name": "mini", "seeds": [0], "base": {},
            "experiments": [{"exp": 1, "epoch_dis": [1], "compound_prop": [0]},
                            {"exp": 2, "epoch_dis": [1, 1], "compound_prop": [0, 1]}]}
    (tmp_path / "s.json").write_text(json.dumps(spec))
    cfg = write_config(tmp_path / "c.json")
    assert main(["sweep", str(tmp_path / "s.json"), "--config", str(cfg), "--out", str(tmp_path / "o"),
                 "--no-figures"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "exp,epoch_dis,compound_prop,mixup,cutmix,macro_f1"
    assert len(lines) == 3


def test_grad_check_cli(capsys):
    assert main(["grad-check", "--random", "3"]) == 0
    assert main(["grad-check", "--random", "2", "--inject-fault", "0"]) == 1
    out = capsys.readouterr().out
    assert "grad-check: PASS" in out and "grad-check: FAIL" in out


def test_unknown_command_exits_2():
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2
