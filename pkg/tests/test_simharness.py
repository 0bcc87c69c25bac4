import gzip
import json

import pytest

from cardaudit.errormodels import ScenarioSpec
from cardaudit.simharness import (
    ExperimentConfig,
    ExperimentError,
    emit_comparison_plotdata,
    emit_table2,
    replication_seed,
    run_experiment,
    summary_csv,
)


def grid_point(v=0.05, m=0.0, N=400, model="random_100_0", kind="plurality"):
    return ScenarioSpec(kind=kind, N=N, v_target=v, m_target=m, model=model, seed=0)


@pytest.fixture(scope="module")
def small_result():
    config = ExperimentConfig(
        grid=(grid_point(), grid_point(v=0.1)),
        methods=("mismatch", "comparison"),
        replications=20,
        master_seed=11,
    )
    return run_experiment(config)


class TestConfig:
    def test_from_json(self):
        config = ExperimentConfig.from_json(
            {
                "grid": [{"N": 100, "v": 0.05}],
                "methods": ["mismatch"],
                "replications": 5,
                "master_seed": 3,
            }
        )
        assert config.grid[0].N == 100
        assert config.replications == 5

    def test_bad_method_rejected(self):
        with pytest.raises(ExperimentError):
            ExperimentConfig(grid=(grid_point(),), methods=("guess",))

    def test_replications_positive(self):
        with pytest.raises(ExperimentError):
            ExperimentConfig(grid=(grid_point(),), replications=0)


class TestSeeding:
    def test_depends_on_all_inputs(self):
        base = replication_seed(1, "p", 0)
        assert replication_seed(1, "p", 0) == base
        assert replication_seed(2, "p", 0) != base
        assert replication_seed(1, "q", 0) != base
        assert replication_seed(1, "p", 1) != base


class TestRunExperiment:
    def test_all_cells_present(self, small_result):
        assert len(small_result.cells) == 4
        cell = small_result.cell(grid_point(), "mismatch")
        assert len(cell.n_draws) == 20

    def test_deterministic_across_runs(self, small_result):
        again = run_experiment(small_result.config)
        for a, b in zip(small_result.cells, again.cells):
            assert a.n_draws == b.n_draws and a.decisions == b.decisions

    def test_invariant_to_worker_count(self, small_result):
        config = ExperimentConfig(
            grid=small_result.config.grid,
            methods=small_result.config.methods,
            replications=20,
            master_seed=11,
            jobs=2,
        )
        parallel = run_experiment(config)
        for a, b in zip(small_result.cells, parallel.cells):
            assert a.n_draws == b.n_draws

    def test_infeasible_point_skipped_not_fatal(self):
        config = ExperimentConfig(
            grid=(grid_point(v=0.45, m=0.3, model="two_under"),),
            replications=2,
        )
        result = run_experiment(config)
        assert result.cells[0].skipped is not None

    def test_output_files(self, tmp_path):
        config = ExperimentConfig(
            grid=(grid_point(),), methods=("mismatch", "comparison"),
            replications=5, master_seed=1,
        )
        run_experiment(config, out_dir=tmp_path)
        assert (tmp_path / "summary.csv").exists()
        assert (tmp_path / "table2.txt").exists()
        assert (tmp_path / "diffplot.csv").exists()
        raw = tmp_path / "raw" / f"{grid_point().point_id()}.mismatch.ndjson.gz"
        with gzip.open(raw, "rt") as f:
            lines = [json.loads(l) for l in f]
        assert len(lines) == 5
        assert {"r", "seed", "n_draws", "decision"} <= set(lines[0])


class TestEmitters:
    def test_summary_csv_has_every_cell(self, small_result):
        text = summary_csv(small_result)
        assert text.count("\n") == 5  # header + 4 cells
        assert "mismatch" in text and "comparison" in text

    def test_table_marks_full_counts(self):
        config = ExperimentConfig(
            grid=(grid_point(v=0.02, m=0.1),),  # m >> v: always a full count
            replications=3,
            master_seed=2,
        )
        result = run_experiment(config)
        table = emit_table2(result)
        assert "F" in table.split()
        assert "m=0.1" in table

    def test_table_requires_matching_method(self, small_result):
        with pytest.raises(ExperimentError):
            emit_table2(small_result, method="raire")

    def test_diffplot_rows(self, small_result):
        text = emit_comparison_plotdata(small_result)
        rows = text.strip().splitlines()
        assert rows[0].startswith("v,N,m,model")
        assert len(rows) == 3

    def test_diffplot_zero_for_identical_methods(self, small_result):
        # same cell subtracted from itself must be exactly zero
        cell = small_result.cell(grid_point(), "mismatch")
        assert (cell.mean_n - cell.mean_n) / grid_point().N == 0.0
