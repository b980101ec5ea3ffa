import numpy as np
import pytest

from tscaled.cli import main
from tscaled.config import ExperimentConfig, load_config
from tscaled.errors import ConfigError, EmptyTraceSet
from tscaled.harness import emit_plot, read_trace, run_experiment, validate_suite
from tscaled.talg import read_tsr3


def small_cfg(tmp_path, **overrides):
    base = dict(
        problem="rpca",
        methods=["scaledgd", "vanillagd"],
        transform="dct",
        n1=12,
        n2=12,
        n3=6,
        rank=2,
        kappas=[1.0, 4.0],
        alpha=0.05,
        etas=[0.5],
        max_iters=8,
        seeds=[0],
        out_dir=str(tmp_path / "runs"),
        no_timing=True,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestConfig:
    def test_load_and_roundtrip(self, tmp_path):
        path = tmp_path / "exp.ini"
        path.write_text(
            "[experiment]\n"
            "problem = completion\n"
            "methods = scaledgd\n"
            "transform = dct\n"
            "n1 = 10\nn2 = 9\nn3 = 4\nrank = 2\n"
            "kappa = 1, 5\n"
            "p = 0.5\n"
            "eta = 0.3, 0.5\n"
            "max_iters = 7\n"
            "seeds = 1, 2\n"
            f"out = {tmp_path / 'o'}\n"
            "\n[projection]\nvarsigma = 2.5\n"
        )
        cfg = load_config(path)
        assert cfg.problem == "completion"
        assert cfg.kappas == [1.0, 5.0]
        assert cfg.etas == [0.3, 0.5]
        assert cfg.seeds == [1, 2]
        assert cfg.varsigma == 2.5

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "nope.ini")

    def test_field_path_in_error(self, tmp_path):
        path = tmp_path / "bad.ini"
        path.write_text("[experiment]\nproblem = fourier\n")
        with pytest.raises(ConfigError, match="experiment.problem"):
            load_config(path)

    def test_rank_bound_checked(self, tmp_path):
        cfg = small_cfg(tmp_path, rank=40)
        with pytest.raises(ConfigError, match="experiment.rank"):
            cfg.validate()

    def test_bad_rho(self, tmp_path):
        cfg = small_cfg(tmp_path, rho=1.5)
        with pytest.raises(ConfigError, match="schedule"):
            cfg.validate()


class TestRunExperiment:
    def test_writes_traces_and_summary(self, tmp_path):
        cfg = small_cfg(tmp_path)
        traces, summary, statuses = run_experiment(cfg)
        assert len(traces) == 4  # 2 methods x 2 kappas
        assert len(statuses) == 4
        rows = read_trace(traces[0])
        assert rows[0].iteration == 0
        assert len(rows) == cfg.max_iters + 1
        with open(summary) as fh:
            lines = fh.read().strip().splitlines()
        assert len(lines) == 5

    def test_byte_identical_reruns(self, tmp_path):
        cfg_a = small_cfg(tmp_path / "a")
        cfg_b = small_cfg(tmp_path / "b")
        traces_a, summary_a, _ = run_experiment(cfg_a)
        traces_b, summary_b, _ = run_experiment(cfg_b)
        for pa, pb in zip(sorted(traces_a), sorted(traces_b)):
            assert open(pa, "rb").read() == open(pb, "rb").read()
        assert open(summary_a, "rb").read() == open(summary_b, "rb").read()

    def test_methods_share_initialization(self, tmp_path):
        cfg = small_cfg(tmp_path, kappas=[4.0])
        traces, _, _ = run_experiment(cfg)
        by_method = {read_trace(t)[0].method: read_trace(t)[0] for t in traces}
        # Identical iteration-0 row: same instance, same spectral start.
        assert by_method["scaledgd"].rel_err == by_method["vanillagd"].rel_err

    def test_completion_problem(self, tmp_path):
        cfg = small_cfg(tmp_path, problem="completion", kappas=[2.0], max_iters=6)
        traces, _, statuses = run_experiment(cfg)
        assert len(traces) == 2
        errs = [r.rel_err for r in read_trace(traces[0])]
        assert errs[-1] < errs[0]

    def test_factorization_problem(self, tmp_path):
        cfg = small_cfg(
            tmp_path, problem="factorization", methods=["scaledgd"], kappas=[10.0], max_iters=10
        )
        traces, _, _ = run_experiment(cfg)
        errs = [r.rel_err for r in read_trace(traces[0])]
        assert errs[-1] < 1e-3 * errs[0]


class TestEmitPlot:
    def test_err_vs_iter_svg(self, tmp_path):
        cfg = small_cfg(tmp_path)
        traces, _, _ = run_experiment(cfg)
        out = tmp_path / "plot.svg"
        emit_plot(traces, "err_vs_iter", out)
        body = out.read_text()
        assert body.lstrip().startswith("<?xml")
        assert "svg" in body

    def test_deterministic_output(self, tmp_path):
        cfg = small_cfg(tmp_path)
        traces, _, _ = run_experiment(cfg)
        a, b = tmp_path / "a.svg", tmp_path / "b.svg"
        emit_plot(traces, "err_vs_iter", a)
        emit_plot(traces, "err_vs_iter", b)
        assert a.read_bytes() == b.read_bytes()

    def test_eta_plot_needs_spread(self, tmp_path):
        cfg = small_cfg(tmp_path, kappas=[2.0], methods=["scaledgd"])
        traces, _, _ = run_experiment(cfg)
        with pytest.raises(EmptyTraceSet):
            emit_plot(traces, "err_vs_eta", tmp_path / "x.svg")

    def test_empty_input(self, tmp_path):
        with pytest.raises(EmptyTraceSet):
            emit_plot([], "err_vs_iter", tmp_path / "x.svg")

    def test_unknown_kind(self, tmp_path):
        with pytest.raises(EmptyTraceSet):
            emit_plot([], "err_vs_banana", tmp_path / "x.svg")


class TestValidateSuite:
    def test_all_pass(self):
        results = validate_suite(seed=0, trials=6)
        for res in results:
            assert res.passed, res.line()


class TestCli:
    def test_rpca_subcommand(self, tmp_path, capsys):
        ini = tmp_path / "c.ini"
        ini.write_text(
            "[experiment]\nproblem = rpca\nmethods = scaledgd\ntransform = dct\n"
            "n1 = 10\nn2 = 10\nn3 = 4\nrank = 2\nkappa = 2\nalpha = 0.05\n"
            "eta = 0.5\nmax_iters = 5\nseeds = 0\n"
            f"out = {tmp_path / 'r'}\n"
        )
        assert main(["rpca", "--config", str(ini), "--no-timing"]) == 0
        assert (tmp_path / "r" / "summary.csv").exists()

    def test_config_error_exit_code(self, tmp_path):
        assert main(["rpca", "--config", str(tmp_path / "missing.ini")]) == 1

    def test_validate_exit_code(self, capsys):
        assert main(["validate", "--trials", "4"]) == 0
        out = capsys.readouterr().out
        assert "[PASS]" in out

    def test_gen_writes_readable_tsr3(self, tmp_path):
        code = main(
            [
                "gen",
                "--out",
                str(tmp_path / "g"),
                "--n1", "6", "--n2", "6", "--n3", "4",
                "--rank", "2", "--kappa", "3", "--seed", "5",
                "--alpha", "0.1", "--p", "0.5",
            ]
        )
        assert code == 0
        x = read_tsr3(tmp_path / "g" / "xstar.tsr3")
        assert x.shape == (6, 6, 4)
        y = read_tsr3(tmp_path / "g" / "y.tsr3")
        s = read_tsr3(tmp_path / "g" / "sstar.tsr3")
        assert np.allclose(y, x + s)

    def test_plot_subcommand(self, tmp_path):
        ini = tmp_path / "c.ini"
        ini.write_text(
            "[experiment]\nproblem = completion\nmethods = scaledgd\ntransform = dct\n"
            "n1 = 10\nn2 = 10\nn3 = 4\nrank = 2\nkappa = 2\np = 0.6\n"
            "eta = 0.5\nmax_iters = 5\nseeds = 0\n"
            f"out = {tmp_path / 'p'}\n"
        )
        assert main(["complete", "--config", str(ini), "--no-timing"]) == 0
        import glob

        traces = sorted(glob.glob(str(tmp_path / "p" / "completion_*.csv")))
        out = tmp_path / "fig.svg"
        assert main(["plot", *traces, "--out", str(out)]) == 0
        assert out.exists()

    def test_sweep_requires_multiple_etas(self, tmp_path):
        ini = tmp_path / "c.ini"
        ini.write_text(
            "[experiment]\nproblem = completion\nmethods = scaledgd\ntransform = dct\n"
            "n1 = 8\nn2 = 8\nn3 = 4\nrank = 2\nkappa = 2\np = 0.6\n"
            "eta = 0.5\nmax_iters = 3\nseeds = 0\n"
            f"out = {tmp_path / 's'}\n"
        )
        assert main(["sweep", "--config", str(ini)]) == 1

    def test_smoke_config_in_repo(self, tmp_path):
        import pathlib

        repo_cfg = pathlib.Path(__file__).resolve().parents[1] / "configs" / "smoke.ini"
        cfg = load_config(repo_cfg)
        cfg.out_dir = str(tmp_path / "smoke")
        cfg.max_iters = 4
        traces, _, _ = run_experiment(cfg)
        assert traces
