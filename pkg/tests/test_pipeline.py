import csv
from pathlib import Path

import numpy as np
import pytest

from ordview.core import stratified_split
from ordview.metrics import amae
from ordview.model import method_config, predict_proba_batch, train
from ordview.pipeline import (
    ExperimentConfig,
    ExperimentError,
    SynthConfig,
    generate_synthetic,
    grid_header,
    load_views_csv,
    read_grid_csv,
    run_experiment,
    view_config_names,
    write_views_csv,
)


def write_csv(path, header, rows):
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


class TestSynthetic:
    def test_default_counts(self):
        data = generate_synthetic(SynthConfig(), seed=0)
        assert data.counts().tolist() == [40, 102, 106, 47]
        assert data.view_names == ("crown", "north", "south")
        assert data.views["crown"].shape == (295, 10)

    def test_deterministic(self):
        a = generate_synthetic(SynthConfig(), seed=5)
        b = generate_synthetic(SynthConfig(), seed=5)
        assert np.array_equal(a.labels, b.labels)
        for v in a.view_names:
            assert np.array_equal(a.views[v], b.views[v])

    def test_seed_changes_data(self):
        a = generate_synthetic(SynthConfig(), seed=0)
        b = generate_synthetic(SynthConfig(), seed=1)
        assert not np.array_equal(a.views["crown"], b.views["crown"])

    def test_labels_ordered_by_latent(self):
        # the latent score is recoverable: class means must increase
        cfg = SynthConfig(view_noise=(0.0, 0.0, 0.0))
        data = generate_synthetic(cfg, seed=2)
        x = data.views["crown"]
        # project onto the first principal direction of the signal
        u, s, vt = np.linalg.svd(x - x.mean(axis=0), full_matrices=False)
        proj = x @ vt[0]
        means = [proj[data.labels == q].mean() for q in range(4)]
        diffs = np.diff(means)
        assert np.all(diffs > 0) or np.all(diffs < 0)

    def test_noise_free_is_learnable(self):
        cfg = SynthConfig(view_noise=(0.0, 0.0, 0.0))
        data = generate_synthetic(cfg, seed=3)
        train_part, test_part = stratified_split(data, 0.2, seed=0)
        model = train(
            method_config("nominal", 4, None, seed=0, learning_rate=0.1,
                          epochs=500),
            train_part.views["crown"],
            train_part.labels,
        )
        preds = np.argmax(
            predict_proba_batch(model, test_part.views["crown"]), axis=1
        )
        assert amae(test_part.labels, preds, 4) < 0.1

    def test_infeasible_proportions(self):
        cfg = SynthConfig(
            n_samples=5,
            n_classes=4,
            class_proportions=(0.01, 0.01, 0.49, 0.49),
            view_noise=(1.0, 1.0, 1.0),
        )
        with pytest.raises(ValueError):
            generate_synthetic(cfg, seed=0)

    def test_validation(self):
        with pytest.raises(ValueError):
            SynthConfig(class_proportions=(0.5, 0.4))  # length != n_classes
        with pytest.raises(ValueError):
            SynthConfig(latent_correlation=1.5)
        with pytest.raises(ValueError):
            SynthConfig(view_noise=(1.0,))


class TestCsvRoundtrip:
    def test_write_then_load(self, tmp_path):
        data = generate_synthetic(
            SynthConfig(n_samples=40, class_proportions=(0.25,) * 4), seed=1
        )
        paths = write_views_csv(data, tmp_path)
        loaded = load_views_csv(paths)
        assert loaded.n_samples == 40
        assert loaded.n_classes == 4
        assert np.array_equal(loaded.labels, data.labels)
        for v in data.view_names:
            assert np.allclose(loaded.views[v], data.views[v])


class TestCsvLoader:
    def make_pair(self, tmp_path, rows_a=None, rows_b=None):
        header = ["sample_id", "f0", "f1", "label"]
        a = tmp_path / "a.csv"
        b = tmp_path / "b.csv"
        write_csv(a, header, rows_a or [[0, 0.1, 0.2, 0], [1, 0.3, 0.4, 1]])
        write_csv(b, header, rows_b or [[0, 1.1, 1.2, 0], [1, 1.3, 1.4, 1]])
        return {"a": a, "b": b}

    def test_two_aligned_files(self, tmp_path):
        data = load_views_csv(self.make_pair(tmp_path))
        assert data.n_samples == 2
        assert sorted(data.view_names) == ["a", "b"]
        assert data.labels.tolist() == [0, 1]

    def test_missing_column(self, tmp_path):
        p = tmp_path / "x.csv"
        write_csv(p, ["id", "f0", "label"], [[0, 0.5, 0]])
        with pytest.raises(ValueError, match="missing required column"):
            load_views_csv({"x": p})

    def test_ragged_row_names_line(self, tmp_path):
        p = tmp_path / "x.csv"
        write_csv(p, ["sample_id", "f0", "label"], [[0, 0.5, 0], [1, 0.5]])
        with pytest.raises(ValueError, match="line 3"):
            load_views_csv({"x": p})

    def test_non_integer_label(self, tmp_path):
        p = tmp_path / "x.csv"
        write_csv(p, ["sample_id", "f0", "label"], [[0, 0.5, "high"]])
        with pytest.raises(ValueError, match="not an integer"):
            load_views_csv({"x": p})

    def test_negative_label(self, tmp_path):
        p = tmp_path / "x.csv"
        write_csv(p, ["sample_id", "f0", "label"], [[0, 0.5, -1]])
        with pytest.raises(ValueError, match="negative"):
            load_views_csv({"x": p})

    def test_label_out_of_range(self, tmp_path):
        p = tmp_path / "x.csv"
        write_csv(p, ["sample_id", "f0", "label"], [[0, 0.5, 1], [1, 0.6, 4]])
        with pytest.raises(ValueError, match="outside"):
            load_views_csv({"x": p}, n_classes=4)

    def test_duplicate_id(self, tmp_path):
        p = tmp_path / "x.csv"
        write_csv(p, ["sample_id", "f0", "label"], [[0, 0.5, 0], [0, 0.6, 1]])
        with pytest.raises(ValueError, match="duplicate"):
            load_views_csv({"x": p})

    def test_mismatched_ids_name_first_offender(self, tmp_path):
        paths = self.make_pair(
            tmp_path,
            rows_a=[[0, 0.1, 0.2, 0], [1, 0.3, 0.4, 1]],
            rows_b=[[0, 1.1, 1.2, 0], [7, 1.3, 1.4, 1]],
        )
        with pytest.raises(ValueError, match="'1'|'7'"):
            load_views_csv(paths)

    def test_conflicting_labels(self, tmp_path):
        paths = self.make_pair(
            tmp_path,
            rows_a=[[0, 0.1, 0.2, 0], [1, 0.3, 0.4, 1]],
            rows_b=[[0, 1.1, 1.2, 0], [1, 1.3, 1.4, 0]],
        )
        with pytest.raises(ValueError, match="conflicting labels"):
            load_views_csv(paths)

    def test_non_numeric_feature(self, tmp_path):
        p = tmp_path / "x.csv"
        write_csv(p, ["sample_id", "f0", "label"], [[0, "oops", 0]])
        with pytest.raises(ValueError, match="cannot parse feature"):
            load_views_csv({"x": p})

    def test_numeric_id_ordering(self, tmp_path):
        p = tmp_path / "x.csv"
        write_csv(
            p,
            ["sample_id", "f0", "label"],
            [[10, 0.1, 0], [2, 0.2, 1], [1, 0.3, 0]],
        )
        data = load_views_csv({"x": p})
        # numeric order 1, 2, 10 (not lexicographic "1", "10", "2")
        assert data.views["x"][:, 0].tolist() == [0.3, 0.2, 0.1]

    def test_lexicographic_fallback(self, tmp_path):
        p = tmp_path / "x.csv"
        write_csv(
            p,
            ["sample_id", "f0", "label"],
            [["t2", 0.1, 0], ["t10", 0.2, 1], ["t1", 0.3, 0]],
        )
        data = load_views_csv({"x": p})
        assert data.views["x"][:, 0].tolist() == [0.3, 0.2, 0.1]


class TestViewConfigs:
    def test_order_and_names(self):
        configs = view_config_names(("crown", "north", "south"))
        assert [name for name, _ in configs] == [
            "crown", "north", "south",
            "crown+north", "crown+south", "north+south",
            "crown+north+south",
        ]

    def test_header(self):
        assert grid_header(3) == (
            "method", "view_config", "seed", "qwk", "amae", "accuracy",
            "sens_0", "sens_1", "sens_2", "mae_0", "mae_1", "mae_2",
        )


def tiny_config(tmp_path, **kw):
    defaults = dict(
        output_dir=tmp_path / "run",
        methods=("nominal",),
        views=("crown",),
        n_seeds=1,
        tuning=False,
        synth=SynthConfig(
            n_samples=60,
            n_features_per_view=4,
            class_proportions=(0.25, 0.25, 0.25, 0.25),
        ),
        epochs=30,
        n_candidates=20,
    )
    defaults.update(kw)
    return ExperimentConfig(**defaults)


class TestRunExperiment:
    def test_single_cell_grid(self, tmp_path):
        res = run_experiment(tiny_config(tmp_path))
        assert len(res.rows) == 1
        header, rows = read_grid_csv(res.grid_path)
        assert header == res.header
        assert len(rows) == 1
        assert rows[0][0] == "nominal"
        assert rows[0][1] == "crown"

    def test_28_row_cardinality(self, tmp_path):
        cfg = tiny_config(
            tmp_path,
            methods=("nominal", "clm"),
            views=("crown", "north", "south"),
            n_seeds=2,
        )
        res = run_experiment(cfg)
        assert len(res.rows) == 2 * 7 * 2

    def test_rows_written_in_seed_major_order(self, tmp_path):
        cfg = tiny_config(tmp_path, methods=("nominal", "clm"), n_seeds=2)
        res = run_experiment(cfg)
        seeds = [r[2] for r in res.rows]
        assert seeds == sorted(seeds)

    def test_byte_identical_rerun(self, tmp_path):
        cfg_a = tiny_config(tmp_path, output_dir=tmp_path / "a", n_seeds=2)
        cfg_b = tiny_config(tmp_path, output_dir=tmp_path / "b", n_seeds=2)
        ra = run_experiment(cfg_a)
        rb = run_experiment(cfg_b)
        assert ra.grid_path.read_bytes() == rb.grid_path.read_bytes()

    def test_threaded_matches_serial(self, tmp_path):
        cfg_a = tiny_config(tmp_path, output_dir=tmp_path / "a", n_seeds=3)
        cfg_b = tiny_config(tmp_path, output_dir=tmp_path / "b", n_seeds=3,
                            workers=3)
        ra = run_experiment(cfg_a)
        rb = run_experiment(cfg_b)
        assert ra.grid_path.read_bytes() == rb.grid_path.read_bytes()

    def test_summary_recomputable_from_grid(self, tmp_path):
        cfg = tiny_config(tmp_path, methods=("nominal", "clm"), n_seeds=3)
        res = run_experiment(cfg)
        header, rows = read_grid_csv(res.grid_path)
        qwk_col = header.index("qwk")
        vals = [r[qwk_col] for r in rows if r[0] == "clm"]
        mean = np.mean(vals)
        std = np.std(vals, ddof=1)
        text = res.summary_paths["qwk"].read_text()
        line = [ln for ln in text.splitlines() if ln.startswith("| clm ")][0]
        assert f"{mean:.3f} +- {std:.3f}" in line

    def test_outputs_exist(self, tmp_path):
        res = run_experiment(tiny_config(tmp_path, n_seeds=2))
        assert res.grid_path.exists()
        assert res.config_path.exists()
        for metric in ("qwk", "amae", "accuracy"):
            assert res.summary_paths[metric].exists()
            assert res.stats_paths[metric].exists()

    def test_error_carries_context(self, tmp_path):
        # epochs=0 is rejected by ModelConfig inside the per-view training
        cfg = tiny_config(tmp_path, epochs=0)
        with pytest.raises(ExperimentError, match="method=nominal.*seed=0"):
            run_experiment(cfg)

    def test_partial_flush_before_abort(self, tmp_path, monkeypatch):
        import ordview.pipeline as pl

        original = pl._run_seed

        def failing(cfg, train_base, test, configs, seed):
            if seed == 1:
                raise ExperimentError("method=nominal view=crown seed=1: boom")
            return original(cfg, train_base, test, configs, seed)

        monkeypatch.setattr(pl, "_run_seed", failing)
        cfg = tiny_config(tmp_path, methods=("nominal",), n_seeds=2)
        with pytest.raises(ExperimentError, match="seed=1"):
            run_experiment(cfg)
        # seed 0 rows must already be flushed to disk
        header, rows = read_grid_csv(cfg.output_dir / "grid.csv")
        assert len(rows) == 1
        assert rows[0][2] == 0

    def test_validation(self, tmp_path):
        with pytest.raises(ValueError):
            tiny_config(tmp_path, methods=("unknown",))
        with pytest.raises(ValueError):
            tiny_config(tmp_path, n_seeds=0)
        with pytest.raises(ValueError):
            ExperimentConfig(output_dir=tmp_path, synth=None, csv_paths=None)
        with pytest.raises(ValueError, match="views not in dataset"):
            run_experiment(tiny_config(tmp_path, views=("crown", "missing")))


class TestStatsReports:
    def test_anova_section_present(self, tmp_path):
        cfg = tiny_config(
            tmp_path, methods=("nominal", "clm"), views=("crown", "north"),
            n_seeds=3,
        )
        res = run_experiment(cfg)
        text = res.stats_paths["qwk"].read_text()
        assert "| Method |" in text
        assert "| Method:View |" in text
        assert "Tukey HSD over method" in text

    def test_single_cell_skips_gracefully(self, tmp_path):
        res = run_experiment(tiny_config(tmp_path, n_seeds=2))
        text = res.stats_paths["qwk"].read_text()
        assert "ANOVA skipped" in text or "Not enough groups" in text
