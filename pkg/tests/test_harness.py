#  Copyright (c) 2025 DeReverb contributors
#  Licensed under the GNU AGPL v3.0: https://www.gnu.org/licenses/agpl-3.0.html
#  Part of the DeReverb project. All rights reserved where applicable.

from __future__ import annotations

import asyncio
import csv
import re
import time
from pathlib import Path

import numpy as np
import pytest
import soundfile as sf
from PIL import Image

from DeReverb.__main__ import main
from DeReverb.core import (
    DataError,
    FeatureNormalizer,
    UnknownModelError,
    UsageError,
    Waveform,
    load_checkpoint,
    load_experiment_config,
    parse_model_id,
    read_wav,
    write_wav,
)
from DeReverb.modules import cmd_evaluate, cmd_gen_testdata, cmd_prepare, cmd_spectrogram, cmd_train

TINY_TOML = """\
seed = 3
output_dir = "run"
roster = ["HDDAE_A(2)", "IDEA_A(4)"]

[corpus]
train_dir = "corpus/train"
test_dir = "corpus/test"

[[rooms]]
dims = [3.0, 3.0, 2.5]

[rirs]
train_t60 = [0.2, 0.3]
test_t60 = [0.2, 0.25, 0.3]
per_train_t60 = 1
per_test_t60 = 1

[hddae]
hidden = 16

[cnn]
conv_channels = 2
kernel = 3
fc_hidden = 16

[train.hddae]
epochs = 2
minibatch_size = 64
learning_rate = 1e-3

[train.cnn]
epochs = 2
minibatch_size = 64
learning_rate = 1e-3
"""


@pytest.mark.parametrize(
    "text,kind,condition,depth,slug",
    [
        ("HDDAE_A(3)", "hddae", None, 3, "hddae_A_3"),
        ("HDDAE_0.3(3)", "hddae", 0.3, 3, "hddae_0.3_3"),
        (" IDEA_A(6) ", "idea", None, 6, "idea_A_6"),
    ],
)
def test_parse_model_id(text, kind, condition, depth, slug):
    mid = parse_model_id(text)
    assert (mid.kind, mid.condition, mid.depth, mid.slug) == (kind, condition, depth, slug)
    assert str(parse_model_id(str(mid))) == str(mid)


def test_idea_depth_split():
    mid = parse_model_id("IDEA_A(5)")
    assert (mid.specialist_depth, mid.fusion_depth) == (2, 3)
    assert mid.artifact(Path("root")) == Path("root/models/idea_A_5/idea.json")
    assert parse_model_id("HDDAE_A(6)").artifact(Path("r")) == Path("r/models/hddae_A_6/model.drvk")


@pytest.mark.parametrize("text", ["HDDAE_B(3)", "IDEA_0.3(6)", "IDEA_A(3)", "HDDAE_A(1)", "DNN_A(3)", ""])
def test_unknown_model_ids(text):
    with pytest.raises(UnknownModelError):
        parse_model_id(text)


def test_exit_codes(tmp_path):
    assert main([]) == 1
    assert main(["--version"]) == 0
    assert main(["train", "--model", "HDDAE_B(3)"]) == 1
    assert main(["prepare", "--config", str(tmp_path / "missing.toml")]) == 1
    assert main(["evaluate", "--out", str(tmp_path / "nothing")]) == 2
    assert main(["dereverb", "--model", str(tmp_path / "m.drvk"), "in.wav", "out.wav"]) == 2
    assert main(["gen-testdata", "--out", str(tmp_path), "--n-train", "0"]) == 1


def test_malformed_config(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[rirs]\ntrain_t60 = []\n", encoding="utf-8")
    with pytest.raises(UsageError, match="invalid config"):
        load_experiment_config(bad)
    bad.write_text("seed = = 1\n", encoding="utf-8")
    with pytest.raises(UsageError, match="malformed config"):
        load_experiment_config(bad)


def test_gen_testdata(tmp_path):
    path = asyncio.run(cmd_gen_testdata(tmp_path, n_train=3, n_test=2, duration=0.5, seed=9))
    assert sorted(p.name for p in (tmp_path / "corpus" / "train").iterdir()) == ["utt_000.wav", "utt_001.wav", "utt_002.wav"]
    w = read_wav(tmp_path / "corpus" / "test" / "utt_001.wav")
    assert len(w) == 8000
    cfg = load_experiment_config(path)
    assert cfg.corpus.train_dir == tmp_path / "corpus" / "train"
    assert cfg.output_dir == tmp_path / "run"
    assert cfg.rirs.per_train_t60 == 1


def test_read_wav_rejects_bad_files(tmp_path):
    stereo = tmp_path / "stereo.wav"
    sf.write(str(stereo), np.zeros((100, 2)), 16000, subtype="PCM_16")
    with pytest.raises(DataError, match="channels"):
        read_wav(stereo)
    other_rate = tmp_path / "rate.wav"
    sf.write(str(other_rate), np.zeros(100), 8000, subtype="PCM_16")
    with pytest.raises(DataError, match="8000 Hz"):
        read_wav(other_rate)
    text = tmp_path / "text.wav"
    text.write_text("not audio", encoding="utf-8")
    with pytest.raises(DataError):
        read_wav(text)


def test_write_wav_counts_clipping(tmp_path):
    clipped = write_wav(tmp_path / "loud.wav", Waveform(np.array([0.5, 1.5, -2.0, 0.0]), 16000))
    assert clipped == 2
    assert np.max(np.abs(read_wav(tmp_path / "loud.wav").samples)) <= 1.0


def test_spectrogram_csv_and_png(tmp_path):
    wav = tmp_path / "in.wav"
    write_wav(wav, Waveform(np.zeros(16000), 16000))
    features = asyncio.run(cmd_spectrogram(wav, tmp_path / "out.csv", tmp_path / "out.png"))
    with (tmp_path / "out.csv").open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][0] == "bin_0" and rows[0][-1] == "bin_256"
    assert len(rows) == 62
    assert all(float(v) == np.log(1e-12) for v in rows[1])
    assert features.shape == (61, 257)
    assert Image.open(tmp_path / "out.png").size == (61, 257)


@pytest.fixture(scope="module")
def prepared(tmp_path_factory):
    base = tmp_path_factory.mktemp("tiny")
    asyncio.run(cmd_gen_testdata(base, n_train=2, n_test=1, duration=2.0, seed=3))
    (base / "tiny.toml").write_text(TINY_TOML, encoding="utf-8")
    cfg = load_experiment_config(base / "tiny.toml")
    manifest = asyncio.run(cmd_prepare(cfg))
    return cfg, manifest


def test_prepare_counts(prepared):
    cfg, manifest = prepared
    root = cfg.output_dir
    assert len(manifest.split("train")) == 2 * 2
    assert len(manifest.split("test")) == 1 * 3
    assert len(list((root / "reverb" / "train").glob("*.wav"))) == 4
    assert len(list((root / "rirs").glob("*.wav"))) == 5
    assert all(0.0 < r.beta < 1.0 for r in manifest.rirs)
    assert all(r.n_frames == 124 for r in manifest.records)
    assert {r.t60 for r in manifest.split("test")} == {0.2, 0.25, 0.3}
    moments = np.load(root / manifest.moments_path)
    assert moments.shape == (2, 2, 3, 257)
    np.testing.assert_array_equal(moments[:, :, 0, :], 248.0)
    pair = np.load(root / manifest.records[0].feature_path)
    assert pair.shape == (2, 124, 257)
    assert (root / "manifest.json").is_file()


def test_prepare_is_deterministic(prepared, tmp_path):
    cfg, manifest = prepared
    again = asyncio.run(cmd_prepare(cfg, out=tmp_path / "again"))
    assert again.content_hash == manifest.content_hash
    assert (tmp_path / "again" / "manifest.json").read_bytes() == (cfg.output_dir / "manifest.json").read_bytes()
    for rir in manifest.rirs:
        first = read_wav(cfg.output_dir / rir.path, pcm16=False).samples
        np.testing.assert_array_equal(read_wav(tmp_path / "again" / rir.path, pcm16=False).samples, first)


def test_float_wav_bytes_do_not_depend_on_write_time(tmp_path):
    w = Waveform(np.linspace(-0.5, 0.5, 400), 16000)
    write_wav(tmp_path / "a.wav", w, subtype="FLOAT")
    time.sleep(1.1)
    write_wav(tmp_path / "b.wav", w, subtype="FLOAT")
    assert (tmp_path / "a.wav").read_bytes() == (tmp_path / "b.wav").read_bytes()
    back = read_wav(tmp_path / "a.wav", pcm16=False)
    assert sf.info(str(tmp_path / "a.wav")).subtype == "FLOAT"
    np.testing.assert_allclose(back.samples, w.samples, atol=1e-7)


def test_train_single_condition_uses_its_subset(prepared):
    cfg, manifest = prepared
    path, history = asyncio.run(cmd_train(cfg, "HDDAE_0.2(2)"))
    model = load_checkpoint(path)
    moments = np.load(cfg.output_dir / manifest.moments_path)
    expected = FeatureNormalizer.from_lps_moments(moments[0], cfg.analysis.context_radius)
    np.testing.assert_array_equal(model.normalizer.out_mean, expected.out_mean)
    assert model.meta["model_id"] == "HDDAE_0.2(2)"
    assert history.read_text(encoding="utf-8").splitlines()[0] == "epoch,train_loss,val_loss"


def test_train_rejects_unknown_condition(prepared):
    cfg, _ = prepared
    with pytest.raises(UnknownModelError):
        asyncio.run(cmd_train(cfg, "HDDAE_0.5(2)"))


def test_train_evaluate_dereverb(prepared, tmp_path):
    cfg, manifest = prepared
    root = cfg.output_dir
    asyncio.run(cmd_train(cfg, "HDDAE_A(2)"))
    paths = asyncio.run(cmd_train(cfg, "IDEA_A(4)"))
    idea_dir = root / "models" / "idea_A_4"
    assert paths[0] == idea_dir / "idea.json"
    assert sorted(p.name for p in idea_dir.glob("*.drvk")) == ["fusion.drvk", "specialist_0.drvk", "specialist_1.drvk"]
    assert (idea_dir / "fusion_history.csv").is_file()

    report = asyncio.run(cmd_evaluate(cfg))
    assert report.models() == ["Clean", "Reverberation", "HDDAE_A(2)", "IDEA_A(4)"]
    clean = report.mean("Clean")
    assert clean["stoi"] == pytest.approx(1.0, abs=1e-6)
    assert clean["sdi"] == 0.0 and clean["lsd"] == 0.0
    with (root / "eval" / "metrics.csv").open(newline="", encoding="utf-8") as fh:
        assert len(list(csv.DictReader(fh))) == 3 * 4
    tables = (root / "eval" / "tables.txt").read_text(encoding="utf-8")
    assert "Overall averages" in tables
    assert re.search(r"0\.2s\s+0\.3s\s+\|\s+0\.25s\s+Avg", tables)

    reverb = root / manifest.split("test")[0].reverb_path
    out = tmp_path / "out.wav"
    assert main(["dereverb", "--model", str(idea_dir), str(reverb), str(out)]) == 0
    assert sf.info(str(out)).frames == sf.info(str(reverb)).frames
    assert main(["dereverb", "--model", str(root / "models" / "hddae_A_2" / "model.drvk"), str(reverb), str(out)]) == 0


def test_evaluate_reports_missing_artifacts(prepared):
    cfg, _ = prepared
    with pytest.raises(DataError, match="missing artifact"):
        asyncio.run(cmd_evaluate(cfg, ["HDDAE_A(7)"]))


@pytest.mark.slow
def test_desk_reproduction(tmp_path):
    desk = asyncio.run(cmd_gen_testdata(tmp_path))
    cfg = load_experiment_config(desk)
    asyncio.run(cmd_prepare(cfg))
    for model_id in cfg.roster:
        asyncio.run(cmd_train(cfg, model_id))
    idea_dir = parse_model_id("IDEA_A(6)").artifact(cfg.output_dir).parent
    first = {p.name: p.read_bytes() for p in idea_dir.glob("*.drvk")}
    asyncio.run(cmd_train(cfg, "IDEA_A(6)"))
    assert {p.name: p.read_bytes() for p in idea_dir.glob("*.drvk")} == first

    report = asyncio.run(cmd_evaluate(cfg))
    metrics_csv = cfg.output_dir / "eval" / "metrics.csv"
    scored = metrics_csv.read_bytes()
    asyncio.run(cmd_evaluate(cfg))
    assert metrics_csv.read_bytes() == scored

    specialists = {t60: f"HDDAE_{t60:g}(3)" for t60 in cfg.rirs.train_t60}
    for t60, own in specialists.items():
        for other in specialists.values():
            if other != own:
                assert report.mean(own, t60)["stoi"] > report.mean(other, t60)["stoi"], (own, other, t60)
    candidates = [*specialists.values(), "HDDAE_A(3)"]
    assert max(candidates, key=lambda m: report.mean(m)["stoi"]) == "HDDAE_A(3)"

    idea, single, reverb = report.mean("IDEA_A(6)"), report.mean("HDDAE_A(6)"), report.mean("Reverberation")
    assert idea["stoi"] >= single["stoi"]
    assert idea["sdi"] <= single["sdi"]
    for scores in (idea, single):
        assert scores["stoi"] > reverb["stoi"]
        assert scores["sdi"] < reverb["sdi"]
        assert scores["lsd"] < reverb["lsd"]
