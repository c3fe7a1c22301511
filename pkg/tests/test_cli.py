"""End-to-end CLI tests on tiny inputs (in-process invocations)."""

import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from gaudi.cli import main, read_embeddings, write_embeddings
from gaudi.dataset_io import load_dataset
from gaudi.model import init_parameters, load_checkpoint
from gaudi.training import EmbeddingRecord


def invoke(*argv):
    return main(list(argv))


def test_generate_watts_strogatz(tmp_path):
    out = tmp_path / "ws"
    assert invoke("generate", "watts-strogatz", "--count", "8", "--seed", "3", "--out", str(out)) == 0
    ds = load_dataset(out / "dataset.jsonl")
    assert len(ds) == 8
    assert {g.labels["C"] for g in ds} == {2, 4, 6, 8}
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "generate"
    assert manifest["seed"] == 3


def test_generate_is_byte_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        invoke("generate", "smlm", "--count", "3", "--seed", "9", "--out", str(out))
    assert (a / "dataset.jsonl").read_bytes() == (b / "dataset.jsonl").read_bytes()


def test_generate_vicsek_counts(tmp_path):
    out = tmp_path / "v"
    assert invoke(
        "generate", "vicsek", "--sims", "2", "--steps", "100", "--analyzed", "10",
        "--seed", "1", "--out", str(out),
    ) == 0
    ds = load_dataset(out / "dataset.jsonl")
    assert len(ds) == 20  # 2 sims x 10 analyzed frames


def test_generate_scale_flag(tmp_path):
    out = tmp_path / "scaled"
    invoke("generate", "watts-strogatz", "--scale", "0.02", "--seed", "0", "--out", str(out))
    assert len(load_dataset(out / "dataset.jsonl")) == 7  # round(350 * 0.02)


def test_train_preset_echo_and_zero_epochs(tmp_path):
    data = tmp_path / "data"
    invoke("generate", "watts-strogatz", "--count", "4", "--seed", "0", "--out", str(data))
    out = tmp_path / "train"
    assert invoke(
        "train", "--dataset", str(data / "dataset.jsonl"),
        "--preset", "watts-strogatz", "--epochs", "0", "--seed", "5", "--out", str(out),
    ) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    cfg = manifest["config"]
    assert cfg["alpha"] == 0.0 and cfg["gamma"] == 10.0
    assert cfg["beta"] == 1e-5 and cfg["lr"] == 5e-5
    assert cfg["epochs"] == 0
    # zero epochs: checkpoint equals seeded initialization
    params, loaded_cfg = load_checkpoint(out / "checkpoint.npz")
    fresh = init_parameters(loaded_cfg, np.random.default_rng(5))
    for name in fresh:
        assert np.array_equal(params[name].value, fresh[name].value)
    assert (out / "loss_log.jsonl").read_text() == ""


def test_train_loss_log_rows(tmp_path):
    data = tmp_path / "data"
    invoke("generate", "watts-strogatz", "--count", "4", "--seed", "0", "--out", str(data))
    out = tmp_path / "train"
    invoke(
        "train", "--dataset", str(data / "dataset.jsonl"), "--preset", "watts-strogatz",
        "--epochs", "2", "--out", str(out),
    )
    rows = [json.loads(line) for line in (out / "loss_log.jsonl").read_text().splitlines()]
    assert [r["epoch"] for r in rows] == [0, 1]
    assert all(np.isfinite(r["total"]) for r in rows)


def test_config_file_with_flag_override(tmp_path):
    data = tmp_path / "data"
    invoke("generate", "watts-strogatz", "--count", "4", "--seed", "0", "--out", str(data))
    config = tmp_path / "run.cfg"
    config.write_text("epochs = 3\nlr = 0.001\n# comment\nbatch_size = 2\n")
    out = tmp_path / "train"
    invoke(
        "train", "--dataset", str(data / "dataset.jsonl"), "--config", str(config),
        "--epochs", "1", "--out", str(out),
    )
    cfg = json.loads((out / "manifest.json").read_text())["config"]
    assert cfg["epochs"] == 1          # flag overrides file
    assert cfg["lr"] == 0.001          # file overrides default
    assert cfg["batch_size"] == 2


def _pipeline_fixture(tmp_path, count=4, epochs=1):
    data = tmp_path / "data"
    invoke("generate", "watts-strogatz", "--count", str(count), "--seed", "0", "--out", str(data))
    train_dir = tmp_path / "train"
    invoke(
        "train", "--dataset", str(data / "dataset.jsonl"), "--preset", "watts-strogatz",
        "--epochs", str(epochs), "--out", str(train_dir),
    )
    embed_dir = tmp_path / "embed"
    invoke(
        "embed", "--dataset", str(data / "dataset.jsonl"),
        "--checkpoint", str(train_dir / "checkpoint.npz"), "--out", str(embed_dir),
    )
    return data, train_dir, embed_dir


def test_embed_output_table(tmp_path):
    _, _, embed_dir = _pipeline_fixture(tmp_path)
    lines = (embed_dir / "embeddings.csv").read_text().splitlines()
    header = lines[0].split(",")
    assert header[:8] == [f"z{i}" for i in range(8)]
    assert "C" in header and "p" in header
    assert len(lines) == 1 + 4


def test_embed_rerun_identical(tmp_path):
    data, train_dir, embed_dir = _pipeline_fixture(tmp_path)
    again = tmp_path / "embed2"
    invoke(
        "embed", "--dataset", str(data / "dataset.jsonl"),
        "--checkpoint", str(train_dir / "checkpoint.npz"), "--out", str(again),
    )
    assert (embed_dir / "embeddings.csv").read_bytes() == (again / "embeddings.csv").read_bytes()


def test_embed_average_by(tmp_path):
    data = tmp_path / "vdata"
    invoke(
        "generate", "vicsek", "--sims", "2", "--steps", "40", "--analyzed", "10",
        "--seed", "2", "--out", str(data),
    )
    train_dir = tmp_path / "vtrain"
    invoke(
        "train", "--dataset", str(data / "dataset.jsonl"), "--preset", "vicsek",
        "--epochs", "0", "--out", str(train_dir),
    )
    out = tmp_path / "vembed"
    invoke(
        "embed", "--dataset", str(data / "dataset.jsonl"),
        "--checkpoint", str(train_dir / "checkpoint.npz"),
        "--average-by", "sim_id", "--out", str(out),
    )
    lines = (out / "embeddings.csv").read_text().splitlines()
    assert len(lines) == 1 + 2  # one row per simulation


def test_evaluate_ws_report_fields(tmp_path, rng):
    # synthetic embeddings: enough per class for the continuity metric
    records = []
    for i in range(48):
        c = (2, 4, 6, 8)[i % 4]
        p = float(rng.uniform())
        latent = np.zeros(8)
        latent[0] = p + 0.01 * rng.normal()
        latent[1] = c
        records.append(EmbeddingRecord(latent=latent, labels={"C": c, "p": p}))
    emb = tmp_path / "embeddings.csv"
    write_embeddings(emb, records)
    out = tmp_path / "eval"
    assert invoke("evaluate", "--embeddings", str(emb), "--preset", "watts-strogatz", "--out", str(out)) == 0
    payload = json.loads((out / "metrics.json").read_text())
    assert payload["one_nn_accuracy"] is not None
    assert payload["continuity_score"] is not None
    assert payload["auc_pc"] is None and payload["r_squared_pc"] is None
    assert not (out / "roc_pc.csv").exists()


def test_evaluate_smlm_writes_roc(tmp_path, rng):
    records = []
    for i in range(40):
        shape = "ring" if i % 2 == 0 else "spot"
        latent = rng.normal(size=8) + (1.5 if shape == "ring" else -1.5)
        records.append(EmbeddingRecord(latent=latent, labels={"shape_class": shape}))
    emb = tmp_path / "embeddings.csv"
    write_embeddings(emb, records)
    out = tmp_path / "eval"
    invoke("evaluate", "--embeddings", str(emb), "--preset", "smlm", "--out", str(out))
    payload = json.loads((out / "metrics.json").read_text())
    assert payload["auc_pc"] is not None and payload["auc_full"] is not None
    roc = (out / "roc_full.csv").read_text().splitlines()
    assert roc[0] == "fpr,tpr"
    assert roc[1].startswith("0,0")


def test_evaluate_missing_label_fails_with_name(tmp_path, rng, capsys):
    records = [EmbeddingRecord(latent=rng.normal(size=8), labels={"p": 0.5}) for _ in range(12)]
    emb = tmp_path / "embeddings.csv"
    write_embeddings(emb, records)
    code = invoke("evaluate", "--embeddings", str(emb), "--preset", "watts-strogatz", "--out", str(tmp_path / "e"))
    assert code == 1
    assert "C" in capsys.readouterr().err


def test_plot_svg_valid_and_deterministic(tmp_path, rng):
    records = []
    for i in range(20):
        c = (2, 4)[i % 2]
        records.append(
            EmbeddingRecord(
                latent=rng.normal(size=8), labels={"C": c, "p": float(rng.uniform())}
            )
        )
    emb = tmp_path / "embeddings.csv"
    write_embeddings(emb, records)
    out1, out2 = tmp_path / "p1", tmp_path / "p2"
    assert invoke("plot", "--embeddings", str(emb), "--preset", "watts-strogatz", "--out", str(out1)) == 0
    invoke("plot", "--embeddings", str(emb), "--preset", "watts-strogatz", "--out", str(out2))
    svg = (out1 / "scatter.svg").read_bytes()
    assert svg == (out2 / "scatter.svg").read_bytes()
    root = ET.fromstring(svg.decode())
    assert root.tag.endswith("svg")
    shapes = [el for el in root.iter() if el.tag.split("}")[-1] in ("circle", "rect", "polygon")]
    assert len(shapes) >= 20


def test_plot_single_point(tmp_path):
    emb = tmp_path / "one.csv"
    write_embeddings(emb, [EmbeddingRecord(latent=np.zeros(8), labels={"age": 30.0})])
    out = tmp_path / "plot"
    assert invoke("plot", "--embeddings", str(emb), "--preset", "brain", "--out", str(out)) == 0
    ET.fromstring((out / "scatter.svg").read_text())


def test_replay_reproduces_outputs(tmp_path):
    out = tmp_path / "gen"
    invoke("generate", "watts-strogatz", "--count", "5", "--seed", "8", "--out", str(out))
    original = (out / "dataset.jsonl").read_bytes()
    (out / "dataset.jsonl").unlink()
    assert invoke("replay", str(out / "manifest.json")) == 0
    assert (out / "dataset.jsonl").read_bytes() == original


def test_missing_file_is_one_line_error(tmp_path, capsys):
    code = invoke("train", "--dataset", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "o"))
    assert code == 1
    err = capsys.readouterr().err
    assert err.startswith("error:") and err.count("\n") == 1


def test_unknown_preset_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        invoke("generate", "banana", "--out", str(tmp_path / "x"))
    assert exc.value.code == 2


def test_embeddings_roundtrip(tmp_path, rng):
    records = [
        EmbeddingRecord(
            latent=rng.normal(size=8),
            labels={"C": 4, "p": 0.25, "sex": "F"},
        )
        for _ in range(3)
    ]
    path = tmp_path / "emb.csv"
    write_embeddings(path, records)
    back = read_embeddings(path)
    assert len(back) == 3
    assert back[0].labels == {"C": 4, "p": 0.25, "sex": "F"}
    assert np.array_equal(back[0].latent, records[0].latent)


def test_pipeline_creates_all_stages(tmp_path):
    out = tmp_path / "pipe"
    assert invoke(
        "pipeline", "watts-strogatz", "--count", "48", "--epochs", "1",
        "--seed", "4", "--out", str(out),
    ) == 0
    for stage in ("data", "train", "embed", "eval", "plot"):
        assert (out / stage / "manifest.json").exists()
    assert (out / "plot" / "scatter.svg").exists()
    payload = json.loads((out / "eval" / "metrics.json").read_text())
    assert payload["preset"] == "watts-strogatz"
