"""
Tests for the experiment runner and the vpinn-bench command line.
"""
import pandas as pd
import pytest

from vpinn_bench import cli, training
from vpinn_bench.bench import parse_axis, run_experiment, run_sweep
from vpinn_bench.config import load_config, parse_config
from vpinn_bench.errors import SingularFrequencyError

TINY = """
[problem]
tag = "sine-modal"

[network]
width = 3

[loss]
form = "v2"
tau = 5.0
test_functions = 4
analytic = True

[run]
seeds = (0, 1)
max_iters = 5
record_every = 1
output_dir = "{out}"
"""


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.cfg"
    path.write_text(TINY.format(out=(tmp_path / "results").as_posix()), encoding="utf-8")
    return path


class TestRunExperiment:
    def test_writes_artifacts(self, tiny_config):
        artifacts = run_experiment(tiny_config)
        out = artifacts.output_dir
        assert sorted(p.name for p in out.iterdir()) == [
            "error_mean.csv",
            "error_seed0.csv",
            "error_seed1.csv",
            "loss_seed0.csv",
            "loss_seed1.csv",
            "summary.cfg",
        ]
        loss = pd.read_csv(out / "loss_seed0.csv")
        assert list(loss.columns) == ["iteration", "loss"]
        assert list(loss["iteration"]) == [0, 1, 2, 3, 4, 5]
        error = pd.read_csv(out / "error_seed1.csv")
        assert list(error.columns) == ["x", "u_exact", "u_nn", "abs_error"]
        assert len(error) == 1001
        mean = pd.read_csv(artifacts.mean_error_file)
        assert list(mean.columns) == ["x", "u_exact", "mean_abs_error"]
        expected = (pd.read_csv(out / "error_seed0.csv")["abs_error"] + error["abs_error"]) / 2
        pd.testing.assert_series_equal(mean["mean_abs_error"], expected, check_names=False, rtol=1e-12)
        assert artifacts.summary["best_seed"] in (0, 1)
        assert artifacts.summary["diverged_seeds"] == 0

    def test_summary_reads_back_as_config(self, tiny_config):
        artifacts = run_experiment(tiny_config)
        assert load_config(artifacts.summary_file) == load_config(tiny_config)
        text = artifacts.summary_file.read_text(encoding="utf-8")
        assert "[result]" in text and "[seed.1]" in text

    def test_overrides(self, tiny_config, tmp_path):
        artifacts = run_experiment(tiny_config, seeds=[3], output_dir=tmp_path / "other", max_iters=2)
        assert artifacts.output_dir == tmp_path / "other"
        assert list(artifacts.loss_files) == [3]
        assert list(pd.read_csv(artifacts.loss_files[3])["iteration"]) == [0, 1, 2]
        echoed = load_config(artifacts.summary_file)
        assert echoed.seeds == (3,) and echoed.max_iters == 2

    def test_data_files_are_reproducible(self, tiny_config, tmp_path):
        first = run_experiment(tiny_config, output_dir=tmp_path / "a")
        second = run_experiment(tiny_config, output_dir=tmp_path / "b")
        for name in ("loss_seed0.csv", "error_seed1.csv", "error_mean.csv"):
            assert (first.output_dir / name).read_bytes() == (second.output_dir / name).read_bytes()

    def test_2d_error_columns(self, tmp_path):
        config = parse_config(
            f"""
[problem]
tag = "steep-2d"

[network]
depth = 2
width = 4

[loss]
form = "strong"
tau = 1.0
penalizing_points = 20
boundary_points_per_edge = 5

[init]
scheme = "xavier-standard"

[run]
max_iters = 2
output_dir = "{tmp_path.as_posix()}"
"""
        )
        artifacts = run_experiment(config)
        error = pd.read_csv(artifacts.error_files[0])
        assert list(error.columns) == ["x", "y", "u_exact", "u_nn", "abs_error"]
        assert len(error) == 101 * 101


class TestSweep:
    def test_grid(self, tiny_config, tmp_path):
        axes = {"N": [2, 3], "tau": [1.0]}
        path, table = run_sweep(tiny_config, axes, seeds=[0], output_dir=tmp_path / "sweep")
        assert path == tmp_path / "sweep" / "sweep.csv"
        assert list(table["N"]) == [2, 3]
        assert (tmp_path / "sweep" / "N=2,tau=1.0" / "summary.cfg").exists()
        assert load_config(tmp_path / "sweep" / "N=3,tau=1.0" / "summary.cfg").network.width == 3
        assert {"linf", "l2", "best_seed"} <= set(pd.read_csv(path).columns)

    def test_no_axes(self, tiny_config, tmp_path):
        _, table = run_sweep(tiny_config, {}, output_dir=tmp_path / "sweep")
        assert len(table) == 1
        assert (tmp_path / "sweep" / "base" / "error_mean.csv").exists()

    def test_config_axes_are_the_default(self, tiny_config, tmp_path):
        tiny_config.write_text(
            tiny_config.read_text(encoding="utf-8") + "\n[sweep]\nnetwork.width = (2, 3)\n", encoding="utf-8"
        )
        path, table = run_sweep(tiny_config, seeds=[0], output_dir=tmp_path / "sweep")
        assert list(table["network.width"]) == [2, 3]
        cell = load_config(tmp_path / "sweep" / "network.width=2" / "summary.cfg")
        assert cell.network.width == 2
        assert cell.sweep == ()
        _, table = run_sweep(tiny_config, {"tau": [2.0]}, seeds=[0], output_dir=tmp_path / "explicit")
        assert list(table.columns[:1]) == ["tau"]


class TestParseAxis:
    def test_values(self):
        assert parse_axis("N=3,5,10") == ("N", [3, 5, 10])
        assert parse_axis("tau=1.0, 5") == ("tau", [1.0, 5])
        assert parse_axis("loss.basis=sine,legendre") == ("loss.basis", ["sine", "legendre"])

    @pytest.mark.parametrize("text", ["N", "=1,2", "N=", "K=(3,3)"])
    def test_rejected(self, text):
        with pytest.raises(ValueError):
            parse_axis(text)


class TestCli:
    def test_run(self, tiny_config, tmp_path, capsys):
        out = tmp_path / "cli"
        code = cli.main(["run", str(tiny_config), "--seeds", "0", "--out", str(out), "--workers", "1"])
        assert code == cli.EXIT_OK
        assert capsys.readouterr().out.strip() == str(out / "summary.cfg")

    def test_sweep(self, tiny_config, tmp_path, capsys):
        out = tmp_path / "cli"
        args = ["sweep", str(tiny_config), "--axis", "N=2,3", "--seeds", "0", "--out", str(out)]
        args += ["--workers", "1"]
        assert cli.main(args) == cli.EXIT_OK
        assert capsys.readouterr().out.strip() == str(out / "sweep.csv")

    def test_config_error(self, tmp_path, capsys):
        path = tmp_path / "bad.cfg"
        text = TINY.format(out="x").replace("test_functions = 4", "test_functions = 0")
        path.write_text(text, encoding="utf-8")
        assert cli.main(["run", str(path), "--workers", "1"]) == cli.EXIT_CONFIG
        err = capsys.readouterr().err
        assert err.startswith("error[config]: ")
        assert "loss.test_functions" in err

    def test_unknown_axis(self, tiny_config, capsys):
        assert cli.main(["sweep", str(tiny_config), "--axis", "Z=1,2", "--workers", "1"]) == cli.EXIT_CONFIG
        assert capsys.readouterr().err.startswith("error[config]: ")

    def test_malformed_axis(self, tiny_config):
        with pytest.raises(SystemExit) as info:
            cli.main(["sweep", str(tiny_config), "--axis", "N"])
        assert info.value.code == 2

    def test_missing_file(self, tmp_path, capsys):
        assert cli.main(["run", str(tmp_path / "nope.cfg")]) == cli.EXIT_IO
        assert capsys.readouterr().err.startswith("error[io]: ")

    def test_all_seeds_diverged(self, tiny_config, tmp_path, monkeypatch, capsys):
        monkeypatch.setattr(training, "DIVERGENCE_CEILING", -1.0)
        code = cli.main(["run", str(tiny_config), "--out", str(tmp_path / "d"), "--workers", "1"])
        assert code == cli.EXIT_DIVERGED
        assert capsys.readouterr().err.startswith("error[diverged]: all 2 seeds diverged")

    def test_solver_error(self, tiny_config, monkeypatch, capsys):
        def singular(*args, **kwargs):
            raise SingularFrequencyError(2, 3, denominator=1e-15)

        monkeypatch.setattr(cli, "run_experiment", singular)
        assert cli.main(["run", str(tiny_config), "--workers", "1"]) == cli.EXIT_FAILURE
        err = capsys.readouterr().err
        assert err.startswith("error[solver]: SingularFrequencyError: ")
        assert len(err.strip().splitlines()) == 1


def best_linf(config_dir, name, tmp_path, **overrides):
    artifacts = run_experiment(config_dir / name, output_dir=tmp_path / name, workers=None, **overrides)
    return artifacts.summary["linf"]


@pytest.mark.slow
class TestReproductions:
    def test_tanh_pinn_beats_sine_pinn(self, config_dir, tmp_path):
        sine = best_linf(config_dir, "burgers_sine_modal_pinn_sine.cfg", tmp_path)
        tanh = best_linf(config_dir, "burgers_sine_modal_pinn_tanh.cfg", tmp_path)
        assert tanh < sine

    def test_depth_lowers_error(self, config_dir, tmp_path):
        config = config_dir / "poisson_steep_deep.cfg"
        _, table = run_sweep(config, {"L": [1, 4]}, output_dir=tmp_path, workers=None)
        shallow, deep = table["linf"]
        assert deep <= shallow / 10

    def test_vpinn_beats_pinn_on_boundary_layer(self, config_dir, tmp_path):
        vpinn = best_linf(config_dir, "poisson_boundary_layer.cfg", tmp_path)
        pinn = best_linf(config_dir, "poisson_boundary_layer_pinn.cfg", tmp_path)
        assert vpinn < pinn

    def test_2d_error_peaks_at_the_front(self, config_dir, tmp_path):
        artifacts = run_experiment(config_dir / "poisson_2d_steep.cfg", output_dir=tmp_path, workers=None)
        assert artifacts.summary["linf"] <= 5e-2
        error = pd.read_csv(artifacts.error_files[artifacts.summary["best_seed"]])
        assert abs(error["x"][error["abs_error"].idxmax()]) <= 0.3

    def test_penalty_shrinks_boundary_error(self, config_dir, tmp_path):
        axes = {"loss.form": ["v3"], "tau": [1.0, 5.0, 50.0]}
        _, table = run_sweep(config_dir / "burgers_sine_modal.cfg", axes, output_dir=tmp_path, workers=None)
        boundary = list(table["boundary_error"])
        assert boundary[0] > boundary[1] > boundary[2]

    def test_loss_drops_four_orders(self, config_dir, tmp_path):
        artifacts = run_experiment(
            config_dir / "burgers_sine_modal.cfg", seeds=range(10), output_dir=tmp_path, workers=None
        )
        drops = []
        for path in artifacts.loss_files.values():
            loss = pd.read_csv(path)["loss"]
            drops.append(loss.iloc[0] / loss.cummin().iloc[-1])
        assert max(drops) >= 1e4

    def test_shallow_legendre_grid_beats_sine_pinn(self, config_dir, tmp_path):
        config = config_dir / "poisson_steep_shallow_legendre.cfg"
        _, table = run_sweep(config, output_dir=tmp_path / "grid", workers=None)
        assert len(table) == 9
        assert table["linf"].min() < best_linf(config_dir, "poisson_steep_pinn_sine.cfg", tmp_path)
