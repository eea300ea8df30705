import json

import pytest

from malshort.cli import main
from malshort.evaluation import TABLE_ROWS
from malshort.learn import ModelKind
from malshort.pipeline import EXPERIMENT_SCHEMA, Experiment, ExperimentConfig, run_pipeline, select_experiment

FAST = '{"RANDOM_FOREST": {"n_trees": 10}}'


def run(*argv):
    return main([str(a) for a in argv])


def error_of(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


@pytest.fixture(scope="module")
def labeled(world_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("labeled")
    assert main(["label", "--corpus", str(world_dir), "--out", str(out / "labels.jsonl")]) == 0
    assert main(["features", "--corpus", str(world_dir), "--labels", str(out / "labels.jsonl"),
                 "--out", str(out / "features.csv")]) == 0
    return out


def test_generate(tmp_path, capsys):
    assert run("generate", "--out", tmp_path / "c", "--n-benign", 20, "--n-malicious", 20, "--seed", 5) == 0
    assert (tmp_path / "c" / "links.jsonl").exists()
    assert (tmp_path / "c" / "fixtures" / "probes.jsonl").exists()
    assert "wrote 40 links" in capsys.readouterr().out


def test_generate_bad_config(tmp_path, capsys):
    assert run("generate", "--out", tmp_path, "--config", '{"noise_fraction": 2}') == 4
    assert error_of(capsys)["error"] == "ConfigError"


def test_label_and_features(labeled):
    header = (labeled / "features.csv").read_text().splitlines()[0]
    assert header.startswith("link_id,schema,domain_age")
    assert len((labeled / "labels.jsonl").read_text().splitlines()) == 300


def test_rank_lists_seven_descending(labeled, capsys, tmp_path):
    assert run("rank", "--features", labeled / "features.csv", "--out", tmp_path / "rank.json") == 0
    rows = json.loads((tmp_path / "rank.json").read_text())
    assert len(rows) == 7
    gains = [r["info_gain"] for r in rows]
    assert gains == sorted(gains, reverse=True)


def test_train_eval_crossval(labeled, tmp_path, capsys):
    assert run("train", "--features", labeled / "features.csv", "--classifier", "DT", "--out", tmp_path / "m.json") == 0
    assert run("eval", "--model", tmp_path / "m.json", "--features", labeled / "features.csv") == 0
    out = capsys.readouterr().out
    assert all(name in out for name, _ in TABLE_ROWS)
    assert run("crossval", "--features", labeled / "features.csv", "--classifier", "NB", "--k", 3,
               "--out", tmp_path / "cv.json") == 0
    assert json.loads((tmp_path / "cv.json").read_text())["k"] == 3


def test_eval_schema_mismatch(labeled, tmp_path, world_dir, capsys):
    assert run("features", "--corpus", world_dir, "--labels", labeled / "labels.jsonl",
               "--schema", "NON_CLICK", "--out", tmp_path / "nc.csv") == 0
    assert run("train", "--features", tmp_path / "nc.csv", "--classifier", "NB", "--out", tmp_path / "nb.json") == 0
    capsys.readouterr()
    assert run("eval", "--model", tmp_path / "nb.json", "--features", labeled / "features.csv") == 3
    assert error_of(capsys)["error"] == "SchemaMismatch"


def test_conflicting_schema_flags(labeled, world_dir, tmp_path, capsys):
    code = run("features", "--corpus", world_dir, "--labels", labeled / "labels.jsonl", "--schema", "FULL",
               "--experiment", "NONCLICK_SUBSET", "--out", tmp_path / "x.csv")
    assert code == 3


def test_missing_inputs(tmp_path, capsys):
    assert run("run", "--corpus", tmp_path / "nope", "--out", tmp_path / "o") == 2
    err = error_of(capsys)
    assert err["exit_code"] == 2 and err["command"] == "run"
    assert run("rank", "--features", tmp_path / "none.csv") == 2


def test_invariant_violation_exit_4(tmp_path, world_dir, capsys):
    bad = tmp_path / "bad"
    bad.mkdir()
    lines = (world_dir / "links.jsonl").read_text().splitlines()
    row = json.loads(lines[0])
    row["encoders"] = []
    (bad / "links.jsonl").write_text(json.dumps(row) + "\n")
    assert run("profile", "--corpus", bad, "--out", tmp_path / "p") == 4


def test_profile_outputs(world_dir, tmp_path, capsys):
    assert run("profile", "--corpus", world_dir, "--out", tmp_path) == 0
    reports = [json.loads(l) for l in (tmp_path / "suspicion.jsonl").read_text().splitlines()]
    flagged = [r["account_id"] for r in reports if r["highly_suspicious"]]
    assert len(flagged) == 2  # the two planted bots
    for account in flagged:
        assert (tmp_path / f"timeline_{account}.csv").read_text().startswith("month,links,clicks\n")
    assert "accounts" in json.loads((tmp_path / "overlap.json").read_text())


def test_probe(world_dir, labeled, tmp_path, capsys):
    assert run("probe", "--corpus", world_dir, "--labels", labeled / "labels.jsonl", "--out", tmp_path / "l.json") == 0
    report = json.loads((tmp_path / "l.json").read_text())
    assert 0.0 < report["dead_fraction"] <= 1.0


def test_run_and_report(world_dir, tmp_path, capsys):
    out = tmp_path / "run"
    assert run("run", "--corpus", world_dir, "--out", out, "--k", 3, "--params", FAST) == 0
    for name in ("report.json", "report.txt", "model.json", "features.csv", "labels.jsonl"):
        assert (out / name).exists(), name
    report = json.loads((out / "report.json").read_text())
    assert report["schema_version"] == 1
    assert set(report["test"]) == {k.value for k in ModelKind}
    capsys.readouterr()
    assert run("report", out) == 0
    text = capsys.readouterr().out
    assert all(name in text for name, _ in TABLE_ROWS)


def test_run_deterministic_and_jobs_invariant(world_dir, tmp_path):
    outs = []
    for name, jobs in (("a", 1), ("b", 1), ("c", 4)):
        assert run("run", "--corpus", world_dir, "--out", tmp_path / name, "--k", 3, "--params", FAST,
                   "--jobs", jobs, "--seed", 11) == 0
        outs.append(tmp_path / name)
    for f in ("report.json", "model.json", "features.csv", "labels.jsonl"):
        first = (outs[0] / f).read_bytes()
        assert all((o / f).read_bytes() == first for o in outs[1:]), f


@pytest.mark.parametrize("experiment", list(Experiment))
def test_experiments(world_dir, tmp_path, experiment):
    config = ExperimentConfig(world_dir, None, tmp_path, experiment, classifiers=("DT",), cv_k=3)
    report = run_pipeline(config)
    assert report["schema"] == EXPERIMENT_SCHEMA[experiment].value
    assert len(report["features"]) == (7 if experiment is Experiment.FULL_ALL_FEATURES else 5)


def test_nonclick_subset_only_zero_click(small_world):
    from malshort.labeling import Label, LabelValue

    corpus, _ = small_world
    labels = {l.short_hash: Label(LabelValue.MALICIOUS, ("t",)) if corpus.truth[l.short_hash]
              else Label(LabelValue.BENIGN, ("none",)) for l in corpus.links}
    zero = {l.short_hash for l in corpus.links if not l.clicks}
    data = select_experiment(corpus.links, labels, Experiment.NONCLICK_SUBSET, 0)
    assert {i.link_id for i in data.instances} <= zero
    benign, malicious = data.class_counts()
    assert benign == malicious
    unbalanced = select_experiment(corpus.links, labels, Experiment.NONCLICK_SUBSET, 0, balance=False)
    assert {i.link_id for i in unbalanced.instances} == zero
