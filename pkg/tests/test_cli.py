"""End-to-end command line tests.

Commands run in-process through main(argv); exit codes and the
error[...] stderr lines are part of the contract, as is byte-level
reproducibility of model files and simulation reports.
"""

import csv
import json

import numpy as np
import pytest

from ldrr import io
from ldrr.cli import main


def run(argv):
    try:
        return main([str(a) for a in argv])
    except SystemExit as exc:  # argparse failures
        return exc.code


def write_csv(path, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        csv.writer(fh, lineterminator="\n").writerows(rows)


def make_train_csv(path, n=60, p=4, n_classes=3, seed=0, label_column="label"):
    rng = np.random.default_rng(seed)
    names = [f"c{l}" for l in range(n_classes)]
    header = [f"x{i}" for i in range(p)] + [label_column]
    rows = [header]
    labels = np.concatenate([np.arange(n_classes), rng.integers(0, n_classes, n - n_classes)])
    for lab in labels:
        x = rng.standard_normal(p)
        x[lab % p] += 2.5
        rows.append([repr(float(v)) for v in x] + [names[lab]])
    write_csv(path, rows)
    return names


def read_csv(path):
    with open(path, encoding="utf-8", newline="") as fh:
        return list(csv.reader(fh))


class TestExitCodes:
    def test_no_command(self, capsys):
        assert run([]) == 1
        assert "error[usage]" in capsys.readouterr().err

    def test_unknown_flag(self, tmp_path, capsys):
        train = tmp_path / "t.csv"
        make_train_csv(train)
        assert run(["fit", "--train", train, "--out", tmp_path / "m.json",
                    "--bogus"]) == 1
        assert "error[usage]" in capsys.readouterr().err

    def test_missing_train_file(self, tmp_path, capsys):
        assert run(["fit", "--train", tmp_path / "nope.csv",
                    "--out", tmp_path / "m.json", "--lambda", "0.1"]) == 2
        assert "error[CsvParseError]" in capsys.readouterr().err

    def test_bad_feature_cell_names_row_and_column(self, tmp_path, capsys):
        train = tmp_path / "t.csv"
        write_csv(train, [["x0", "x1", "label"],
                          ["1.0", "2.0", "a"],
                          ["1.0", "oops", "b"]])
        assert run(["fit", "--train", train, "--out", tmp_path / "m.json",
                    "--lambda", "0.1"]) == 2
        err = capsys.readouterr().err
        assert "error[NonNumericFeatureError]" in err
        assert "row 3" in err and "'x1'" in err and "'oops'" in err

    def test_missing_label_column(self, tmp_path, capsys):
        train = tmp_path / "t.csv"
        write_csv(train, [["x0", "x1"], ["1.0", "2.0"]])
        assert run(["fit", "--train", train, "--out", tmp_path / "m.json",
                    "--lambda", "0.1"]) == 2
        assert "error[MissingLabelColumnError]" in capsys.readouterr().err

    def test_duplicate_columns(self, tmp_path, capsys):
        train = tmp_path / "t.csv"
        write_csv(train, [["x0", "x0", "label"], ["1.0", "2.0", "a"]])
        assert run(["fit", "--train", train, "--out", tmp_path / "m.json",
                    "--lambda", "0.1"]) == 2
        assert "duplicate" in capsys.readouterr().err

    def test_bad_lambda_value(self, tmp_path, capsys):
        train = tmp_path / "t.csv"
        make_train_csv(train)
        assert run(["fit", "--train", train, "--out", tmp_path / "m.json",
                    "--lambda", "lots"]) == 1
        assert "error[usage]" in capsys.readouterr().err

    def test_rank_cv_needs_rank_family(self, tmp_path, capsys):
        train = tmp_path / "t.csv"
        make_train_csv(train)
        assert run(["fit", "--train", train, "--out", tmp_path / "m.json",
                    "--penalty", "lasso", "--rank-cv"]) == 1
        assert "error[usage]" in capsys.readouterr().err

    def test_singular_design_is_numeric_error(self, tmp_path, capsys):
        # more features than rows, no ridge: the rank family cannot fit
        train = tmp_path / "wide.csv"
        rng = np.random.default_rng(1)
        header = [f"x{i}" for i in range(20)] + ["label"]
        rows = [header]
        for i in range(10):
            rows.append([repr(float(v)) for v in rng.standard_normal(20)]
                        + [f"c{i % 2}"])
        write_csv(train, rows)
        assert run(["fit", "--train", train, "--out", tmp_path / "m.json",
                    "--penalty", "rr", "--lambda", "0.5"]) == 3
        assert "error[SingularDesignError]" in capsys.readouterr().err

    def test_cv_with_tiny_class(self, tmp_path, capsys):
        train = tmp_path / "t.csv"
        write_csv(train, [["x0", "label"],
                          ["1.0", "a"], ["1.1", "a"], ["0.9", "a"],
                          ["2.0", "a"], ["1.5", "a"], ["-1.0", "b"]])
        assert run(["fit", "--train", train, "--out", tmp_path / "m.json",
                    "--lambda", "cv", "--folds", "3"]) == 2
        assert "error[ClassMissingInFoldError]" in capsys.readouterr().err

    def test_corrupt_model_file(self, tmp_path, capsys):
        model = tmp_path / "m.json"
        model.write_text("{not json")
        data = tmp_path / "d.csv"
        make_train_csv(data)
        assert run(["predict", "--model", model, "--data", data]) == 2
        assert "error[ModelFileError]" in capsys.readouterr().err

    def test_version_mismatch(self, tmp_path, capsys):
        train = tmp_path / "t.csv"
        make_train_csv(train)
        model = tmp_path / "m.json"
        assert run(["fit", "--train", train, "--out", model,
                    "--lambda", "0.1", "--quiet"]) == 0
        doc = json.loads(model.read_text())
        doc["format_version"] = 99
        model.write_text(json.dumps(doc))
        assert run(["predict", "--model", model, "--data", train]) == 2
        err = capsys.readouterr().err
        assert "error[VersionMismatchError]" in err
        assert "99" in err and "1" in err

    def test_predict_dimension_mismatch(self, tmp_path, capsys):
        train = tmp_path / "t.csv"
        make_train_csv(train, p=4)
        model = tmp_path / "m.json"
        assert run(["fit", "--train", train, "--out", model,
                    "--lambda", "0.1", "--quiet"]) == 0
        narrow = tmp_path / "narrow.csv"
        write_csv(narrow, [["x0", "x1"], ["0.0", "0.0"]])
        assert run(["predict", "--model", model, "--data", narrow]) == 2
        assert "error[DimensionMismatchError]" in capsys.readouterr().err

    def test_project_requires_subspace_model(self, tmp_path, capsys):
        train = tmp_path / "t.csv"
        make_train_csv(train)
        model = tmp_path / "m.json"
        assert run(["fit", "--train", train, "--out", model,
                    "--lambda", "0.1", "--quiet"]) == 0
        assert run(["project", "--model", model, "--data", train]) == 1
        assert "error[usage]" in capsys.readouterr().err


class TestFitPredictEvaluate:
    def test_round_trip(self, tmp_path, capsys):
        train = tmp_path / "t.csv"
        names = make_train_csv(train, n=60, p=4, n_classes=3)
        model = tmp_path / "m.json"
        assert run(["fit", "--train", train, "--out", model,
                    "--lambda", "0.2"]) == 0
        out = capsys.readouterr().out
        assert "config:" in out and f"saved {model}" in out

        preds = tmp_path / "p.csv"
        assert run(["predict", "--model", model, "--data", train,
                    "--out", preds, "--quiet"]) == 0
        rows = read_csv(preds)
        assert rows[0] == ["predicted"]
        assert len(rows) == 61
        assert set(r[0] for r in rows[1:]) <= set(names)

        scores = tmp_path / "e.csv"
        assert run(["evaluate", "--model", model, "--data", train,
                    "--out", scores, "--quiet"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("test_error:")
        table = read_csv(scores)
        assert table[0] == ["n", "errors", "error_rate"]
        n, errors, rate = int(table[1][0]), int(table[1][1]), float(table[1][2])
        assert n == 60 and errors == round(rate * 60)
        assert rate < 0.35  # well-separated classes

    def test_predictions_match_library(self, tmp_path, capsys):
        train = tmp_path / "t.csv"
        names = make_train_csv(train, seed=5)
        model = tmp_path / "m.json"
        run(["fit", "--train", train, "--out", model, "--lambda", "0.2", "--quiet"])
        preds = tmp_path / "p.csv"
        run(["predict", "--model", model, "--data", train, "--out", preds, "--quiet"])
        loaded = io.load_model(model)
        data = io.load_csv_dataset(train, class_names=loaded.class_names)
        expected = [names[i] for i in loaded.model.predict(data.features)]
        assert [r[0] for r in read_csv(preds)[1:]] == expected

    def test_predict_to_stdout(self, tmp_path, capsys):
        train = tmp_path / "t.csv"
        make_train_csv(train)
        model = tmp_path / "m.json"
        run(["fit", "--train", train, "--out", model, "--lambda", "0.2", "--quiet"])
        capsys.readouterr()
        assert run(["predict", "--model", model, "--data", train, "--quiet"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "predicted"
        assert len(lines) == 61

    def test_refit_is_byte_identical(self, tmp_path):
        train = tmp_path / "t.csv"
        make_train_csv(train)
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        run(["fit", "--train", train, "--out", a, "--lambda", "cv", "--quiet"])
        run(["fit", "--train", train, "--out", b, "--lambda", "cv", "--quiet"])
        assert a.read_bytes() == b.read_bytes()

    def test_saved_model_predicts_bitwise_like_fresh_fit(self, tmp_path):
        train = tmp_path / "t.csv"
        make_train_csv(train, n=80, seed=9)
        model = tmp_path / "m.json"
        run(["fit", "--train", train, "--out", model, "--lambda", "0.15", "--quiet"])
        loaded = io.load_model(model)
        data = io.load_csv_dataset(train, class_names=loaded.class_names)
        from ldrr import Lasso, fit_ldrr
        fresh = fit_ldrr(data.to_dataset(), Lasso(0.15))
        pts = np.random.default_rng(3).standard_normal((100, 4)) * 2.0
        np.testing.assert_array_equal(loaded.model.scores(pts), fresh.scores(pts))

    def test_label_column_flag(self, tmp_path):
        train = tmp_path / "t.csv"
        make_train_csv(train, label_column="species")
        model = tmp_path / "m.json"
        assert run(["fit", "--train", train, "--label-column", "species",
                    "--out", model, "--lambda", "0.2", "--quiet"]) == 0

    def test_feature_name_mismatch_rejected(self, tmp_path, capsys):
        train = tmp_path / "t.csv"
        make_train_csv(train, p=2)
        model = tmp_path / "m.json"
        run(["fit", "--train", train, "--out", model, "--lambda", "0.2", "--quiet"])
        other = tmp_path / "o.csv"
        write_csv(other, [["a", "b"], ["0.0", "0.0"]])
        assert run(["predict", "--model", model, "--data", other]) == 2
        assert "error[CsvParseError]" in capsys.readouterr().err


class TestCvCommand:
    def test_lambda_table(self, tmp_path, capsys):
        train = tmp_path / "t.csv"
        make_train_csv(train, n=60)
        table = tmp_path / "cv.csv"
        assert run(["cv", "--train", train, "--penalty", "lasso",
                    "--grid", "6", "--folds", "3", "--out", table,
                    "--quiet"]) == 0
        out = capsys.readouterr().out
        assert out.startswith("best_lambda:")
        rows = read_csv(table)
        assert rows[0] == ["lambda", "mean_loss", "se_loss"]
        assert len(rows) == 7
        grid = [float(r[0]) for r in rows[1:]]
        assert grid == sorted(grid, reverse=True)

    def test_rank_table(self, tmp_path, capsys):
        train = tmp_path / "t.csv"
        make_train_csv(train, n=60, p=4, n_classes=3)
        assert run(["cv", "--train", train, "--penalty", "rr", "--rank-cv",
                    "--folds", "3", "--quiet"]) == 0
        out = capsys.readouterr().out
        assert "best_rank:" in out

    def test_none_penalty_rejected(self, tmp_path, capsys):
        train = tmp_path / "t.csv"
        make_train_csv(train)
        assert run(["cv", "--train", train, "--penalty", "none"]) == 1
        assert "error[usage]" in capsys.readouterr().err


class TestProject:
    def test_projection_table(self, tmp_path, capsys):
        train = tmp_path / "t.csv"
        names = make_train_csv(train, n=50, p=4, n_classes=3)
        model = tmp_path / "m.json"
        assert run(["fit", "--train", train, "--out", model, "--fisher",
                    "--k", "2", "--lambda", "0.1", "--quiet"]) == 0
        table = tmp_path / "proj.csv"
        assert run(["project", "--model", model, "--data", train,
                    "--out", table, "--quiet"]) == 0
        rows = read_csv(table)
        assert rows[0] == ["d1", "d2", "label"]
        assert len(rows) == 51
        assert set(r[2] for r in rows[1:]) <= set(names)
        coords = np.array([[float(r[0]), float(r[1])] for r in rows[1:]])
        loaded = io.load_model(model)
        data = io.load_csv_dataset(train, class_names=loaded.class_names)
        np.testing.assert_array_equal(coords, loaded.model.project(data.features))


class TestSimulate:
    ARGS = ["simulate", "--scenario", "sparse", "--n", "40", "--p", "25",
            "--classes", "5", "--n-test", "30", "--reps", "2", "--mc", "200",
            "--methods", "oracle,lasso", "--lambda", "0.3", "--seed", "7"]

    def test_report_csv(self, tmp_path, capsys):
        out = tmp_path / "report.csv"
        assert run(self.ARGS + ["--out", out, "--quiet"]) == 0
        rows = read_csv(out)
        assert rows[0] == ["scenario", "param", "value", "method", "mean_error",
                           "se", "bayes_error", "excess_risk", "link_warnings"]
        assert [r[3] for r in rows[1:]] == ["oracle", "lasso"]
        assert all(r[0] == "sparse" for r in rows[1:])
        for r in rows[1:]:
            assert 0.0 <= float(r[4]) <= 1.0
            assert float(r[6]) > 0.0
        assert capsys.readouterr().out == ""  # quiet with --out prints nothing

    def test_byte_reproducible(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run(self.ARGS + ["--out", a, "--quiet"]) == 0
        assert run(self.ARGS + ["--out", b, "--quiet"]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_stdout_table_without_out(self, capsys):
        assert run(self.ARGS + ["--quiet"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0].startswith("scenario,param,value,method,")
        assert len(lines) == 3

    def test_vary_sweep(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert run(self.ARGS + ["--vary", "n", "--values", "30,40",
                                "--out", out, "--quiet"]) == 0
        rows = read_csv(out)
        assert len(rows) == 5
        assert [r[1] for r in rows[1:]] == ["n"] * 4
        assert [r[2] for r in rows[1:]] == ["30", "30", "40", "40"]

    def test_vary_unknown_field(self, capsys):
        assert run(self.ARGS + ["--vary", "bogus", "--values", "1"]) == 1
        assert "error[usage]" in capsys.readouterr().err

    def test_unknown_method(self, capsys):
        assert run(["simulate", "--scenario", "sparse", "--methods", "bogus"]) == 1
        assert "error[usage]" in capsys.readouterr().err

    def test_config_echo_default(self, capsys):
        assert run(self.ARGS) == 0
        out = capsys.readouterr().out
        assert out.startswith("config: ")
        config = json.loads(out.splitlines()[0][len("config: "):])
        assert config["scenario"] == "sparse" and config["seed"] == 7
