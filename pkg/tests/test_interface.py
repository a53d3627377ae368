import json
from pathlib import Path

import numpy as np
import pytest

from metapinn.archive import ArchiveError, load_model, load_pinn, save_model, save_pinn
from metapinn.cli import cli_dispatch
from metapinn.config import config_hash, load_config
from metapinn.pde import BURGERS, sample_collocation
from metapinn.reduced import StiffFilter, gpt_loss
from metapinn.training import TrainConfig, train_full_pinn

from test_reduced import quick_model

TINY_CONFIG = """\
[pde]
pde = "burgers"

[collocation]
n_interior = 60
n_boundary = 16
n_initial = 12
strategy = "uniform-random"
seed = 3
filter = "none"

[full_pinn]
dims = [2, 6, 1]
activation = "tanh"
lr = 2e-3
epochs = 40

[online]
lr = 0.02
epochs = 30

[greedy]
xi_list = [[0.3], [0.5], [0.7], [0.9]]
mu1 = [0.5]
n_max = 2
seed = 1

[eval]
n_test = 2
grid = [9, 9]
seed = 0

[output]
directory = "out"
"""


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text(TINY_CONFIG)
    return path


# -------------------------------------------------------------------- config

def test_config_roundtrip(tiny_config):
    cfg = load_config(tiny_config)
    assert cfg.pde.pde == "burgers"
    assert cfg.xi().shape == (4, 1)
    assert cfg.pde_definition().name == "burgers"
    assert cfg.train_config().dims == (2, 6, 1)
    assert cfg.stiff_filter() is None   # explicit "none" wins


def test_stiff_filter_defaults_on_for_burgers(tmp_path):
    # unset filter key: enabled with the max rule for the stiff family only
    text = TINY_CONFIG.replace('filter = "none"' + chr(10), "")
    path = tmp_path / "f.toml"
    path.write_text(text)
    cfg = load_config(path)
    assert cfg.resolved_filter() == "max"
    assert cfg.stiff_filter().mode == "max"
    path.write_text(text.replace('pde = "burgers"', 'pde = "kg"')
                        .replace("xi_list = [[0.3], [0.5], [0.7], [0.9]]",
                                 "xi_list = [[-1.5, 0.5, 0.5]]")
                        .replace("mu1 = [0.5]", "mu1 = [-1.5, 0.5, 0.5]"))
    assert load_config(path).stiff_filter() is None


def test_config_unknown_key_rejected(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text(TINY_CONFIG + "\n[online2]\nlr = 1.0\n")
    with pytest.raises(ValueError, match="unknown config sections"):
        load_config(bad)
    bad.write_text(TINY_CONFIG.replace("lr = 0.02", "lr = 0.02\nlearningrate = 3"))
    with pytest.raises(ValueError, match="unknown keys"):
        load_config(bad)


def test_config_missing_xi_file_rejected(tmp_path):
    text = TINY_CONFIG.replace('xi_list = [[0.3], [0.5], [0.7], [0.9]]',
                               'xi_file = "nope.csv"').replace("mu1 = [0.5]\n", "")
    path = tmp_path / "run.toml"
    path.write_text(text)
    with pytest.raises(FileNotFoundError, match="xi_file"):
        load_config(path)


def test_config_hash_semantic_only(tiny_config, tmp_path):
    base = config_hash(load_config(tiny_config))
    moved = tmp_path / "moved.toml"
    moved.write_text(TINY_CONFIG.replace('directory = "out"', 'directory = "elsewhere"'))
    assert config_hash(load_config(moved)) == base
    changed = tmp_path / "changed.toml"
    changed.write_text(TINY_CONFIG.replace("lr = 0.02", "lr = 0.021"))
    assert config_hash(load_config(changed)) != base


# ------------------------------------------------------------------- archive

@pytest.fixture(scope="module")
def model3():
    return quick_model(BURGERS, [(0.25,), (0.5,), (0.75,)], epochs=25,
                       stiff_filter=StiffFilter())


def test_archive_roundtrip_bitwise(model3, tmp_path):
    path = tmp_path / "model.bin"
    save_model(model3, path)
    back = load_model(path)
    assert back.pde.name == model3.pde.name
    assert len(back.mus) == 3
    for a, b in zip(back.mus, model3.mus):
        assert np.array_equal(a, b)
    for pa, pb in zip(back.pinns, model3.pinns):
        assert pa.params.dims == pb.params.dims
        assert pa.terminal_loss == pb.terminal_loss
        assert pa.seed == pb.seed and pa.epochs_run == pb.epochs_run
        assert pa.wall_time == pb.wall_time
        for wa, wb in zip(pa.params.weights + pa.params.biases,
                          pb.params.weights + pb.params.biases):
            assert np.array_equal(wa, wb)
        assert np.array_equal(pa.loss_history, pb.loss_history)
    for name, mat in model3.basis.interior.items():
        assert np.array_equal(back.basis.interior[name], mat)
    assert np.array_equal(back.basis.boundary_u, model3.basis.boundary_u)
    assert np.array_equal(back.basis.initial_u, model3.basis.initial_u)
    for name in ("interior", "boundary", "initial"):
        assert np.array_equal(back.masks[name], model3.masks[name])
    assert back.neuron_losses == model3.neuron_losses
    assert np.array_equal(back.colloc_r.interior, model3.colloc_r.interior)
    # behavioural identity
    c = np.array([0.2, -0.4, 1.1])
    assert gpt_loss(c, back, (0.4,)) == gpt_loss(c, model3, (0.4,))
    # a loaded model can keep growing (filter tables restored)
    cfg = TrainConfig(dims=(2, 6, 6, 1), activation="tanh", lr=0.0, epochs=0)
    extra = train_full_pinn(BURGERS, (0.9,), cfg, seed=45, colloc=back.colloc_r)
    back.add_neuron(extra)
    assert back.n_neurons == 4


def test_archive_wrong_magic(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"XXXXXXXX" + b"\x00" * 64)
    with pytest.raises(ArchiveError, match="not a model archive"):
        load_model(path)


def test_archive_truncated(model3, tmp_path):
    path = tmp_path / "model.bin"
    save_model(model3, path)
    data = path.read_bytes()
    clipped = tmp_path / "clipped.bin"
    clipped.write_bytes(data[: len(data) - 911])
    with pytest.raises(ArchiveError, match="corrupt archive"):
        load_model(clipped)
    trailing = tmp_path / "trailing.bin"
    trailing.write_bytes(data + b"\x00" * 8)
    with pytest.raises(ArchiveError, match="corrupt archive"):
        load_model(trailing)


def test_archive_unsupported_version(model3, tmp_path):
    path = tmp_path / "model.bin"
    save_model(model3, path)
    data = bytearray(path.read_bytes())
    payload = data[16:].replace(b'"version": 1', b'"version": 9', 1)
    path.write_bytes(bytes(data[:16]) + bytes(payload))
    with pytest.raises(ArchiveError, match="unsupported version"):
        load_model(path)


def test_pinn_checkpoint_roundtrip(tmp_path):
    colloc = sample_collocation(BURGERS, (40, 12, 10), seed=2)
    cfg = TrainConfig(dims=(2, 5, 1), activation="tanh", lr=1e-3, epochs=20)
    pinn = train_full_pinn(BURGERS, (0.5,), cfg, seed=4, colloc=colloc)
    path = tmp_path / "ckpt.bin"
    save_pinn(pinn, path)
    back = load_pinn(path)
    assert np.array_equal(back.mu, pinn.mu)
    assert back.terminal_loss == pinn.terminal_loss
    for a, b in zip(back.params.weights, pinn.params.weights):
        assert np.array_equal(a, b)
    with pytest.raises(ArchiveError, match="not a model archive"):
        load_model(path)   # a checkpoint is not a model archive


# ----------------------------------------------------------------------- cli

def test_cli_offline_online_roundtrip(tiny_config, tmp_path):
    out = tmp_path / "run"
    assert cli_dispatch(["offline", "--config", str(tiny_config), "--out", str(out)]) == 0
    assert (out / "model.bin").exists()
    assert (out / "chosen_params.csv").exists()
    assert (out / "run_meta.json").exists()
    meta = json.loads((out / "run_meta.json").read_text())
    assert meta["n_neurons"] == 2
    assert meta["config_hash"]
    scan_files = sorted(out.glob("indicator_scan_round_*.csv"))
    assert len(scan_files) == 2

    out2 = tmp_path / "query"
    code = cli_dispatch(["online", "--model", str(out / "model.bin"), "--mu", "0.42",
                         "--out", str(out2), "--config", str(tiny_config)])
    assert code == 0
    for name in ("coefficients.csv", "online_results.csv", "prediction_grid.csv"):
        assert (out2 / name).exists()
    header = (out2 / "prediction_grid.csv").read_text().splitlines()[0]
    assert header == "x,t,value"


def test_cli_offline_single_neuron(tiny_config, tmp_path):
    single = tmp_path / "single.toml"
    single.write_text(TINY_CONFIG.replace("n_max = 2", "n_max = 1"))
    out = tmp_path / "single_out"
    assert cli_dispatch(["offline", "--config", str(single), "--out", str(out)]) == 0
    from metapinn.archive import load_model as lm

    assert lm(out / "model.bin").n_neurons == 1


def test_cli_unknown_subcommand_usage_error(capsys):
    assert cli_dispatch(["frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_cli_missing_required_argument(capsys):
    assert cli_dispatch(["offline", "--config", "x.toml"]) == 1


def test_cli_online_outside_domain(tiny_config, tmp_path, capsys):
    out = tmp_path / "run"
    cli_dispatch(["offline", "--config", str(tiny_config), "--out", str(out)])
    code = cli_dispatch(["online", "--model", str(out / "model.bin"), "--mu", "7.5",
                         "--out", str(tmp_path / "q")])
    assert code == 2
    assert "parameter outside domain" in capsys.readouterr().err


def test_cli_train_full(tiny_config, tmp_path):
    out = tmp_path / "tf"
    assert cli_dispatch(["train-full", "--config", str(tiny_config), "--mu", "0.6",
                         "--out", str(out)]) == 0
    assert (out / "full_pinn.bin").exists()
    lines = (out / "loss_history.csv").read_text().splitlines()
    assert lines[0] == "epoch,loss"
    assert len(lines) == 41


def test_cli_eval_bench_svd(tiny_config, tmp_path):
    out = tmp_path / "run"
    assert cli_dispatch(["offline", "--config", str(tiny_config), "--out", str(out)]) == 0
    model = str(out / "model.bin")

    ev = tmp_path / "ev"
    assert cli_dispatch(["eval", "--model", model, "--config", str(tiny_config),
                         "--out", str(ev)]) == 0
    lines = (ev / "test_errors.csv").read_text().splitlines()
    assert lines[0] == "mu1,rel_l2,max_abs,delta,t_online_s"
    assert len(lines) == 3   # n_test = 2
    assert (ev / "pointwise_error.csv").read_text().splitlines()[0] == "x,t,abs_error"

    bench = tmp_path / "bench"
    assert cli_dispatch(["bench", "--model", model, "--config", str(tiny_config),
                         "--out", str(bench)]) == 0
    tlines = (bench / "timing.csv").read_text().splitlines()
    assert tlines[0] == "q,full_cum_s,gpt_cum_s"
    assert len(tlines) > 1

    svd = tmp_path / "svd"
    svd_cfg = tmp_path / "svd.toml"
    svd_cfg.write_text(TINY_CONFIG.replace("grid = [9, 9]", "grid = [9, 9]\nsvd_snapshots = 4"))
    assert cli_dispatch(["svd", "--config", str(svd_cfg), "--out", str(svd)]) == 0
    slines = (svd / "svd.csv").read_text().splitlines()
    assert slines[0] == "k,sigma_ratio,label"
    labels = {line.split(",")[2] for line in slines[1:]}
    assert labels == {"solution-snapshots", "weight-snapshots"}


def test_shipped_configs_load():
    configs = Path(__file__).parent.parent / "configs"
    kg = load_config(configs / "kg_full.toml")
    assert kg.full_pinn.epochs == 75000
    assert kg.greedy.n_max == 15
    assert kg.xi().shape == (1000, 3)
    bu = load_config(configs / "burgers_full.toml")
    assert bu.full_pinn.stop_loss == 2e-5
    assert bu.resolved_filter() == "max"
    assert bu.xi().shape == (129, 1)
    ac = load_config(configs / "ac_full.toml")
    assert ac.full_pinn.sa_enabled and ac.full_pinn.extra_epochs == 10000
    assert ac.collocation.strategy == "latin-hypercube"
    assert ac.xi().shape == (121, 2)
    assert "lbfgs-phase-replaced-by-decayed-adam" in ac.deviations()
    desk = load_config(configs / "kg_desk.toml")
    assert desk.xi().shape == (125, 3)
