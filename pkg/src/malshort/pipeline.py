"""End-to-end experiment: label, extract, split, cross-validate, train, test, rank."""

from __future__ import annotations

import enum
import logging
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

from malshort.core.io import load_corpus, parse_ts
from malshort.core.model import Corpus, ShortLinkRecord
from malshort.evaluation import (
    REPORT_SCHEMA_VERSION,
    FeatureRanking,
    compute_metrics,
    confusion_matrix_arrays,
    metrics_from_dict,
    rank_features,
    render_ranking,
    render_table,
    report_json,
)
from malshort.features import Schema, build_instances, write_csv
from malshort.labeling import (
    FixtureProbe,
    HttpProbe,
    Label,
    LabelRecord,
    label_corpus,
    load_fixture_providers,
    load_labels,
    load_whitelist,
    save_labels,
)
from malshort.learn import Dataset, ModelKind, SplitSpec, TrainerConfig, cross_validate, model_kind, split_dataset
from malshort.learn.model import predict_labels
from malshort.rng import child_rng

log = logging.getLogger(__name__)


class Experiment(str, enum.Enum):
    FULL_ALL_FEATURES = "FULL_ALL_FEATURES"  # all links, all 7 features
    NONCLICK_SUBSET = "NONCLICK_SUBSET"  # zero-click links only, 5 features
    FULL_NONCLICK_FEATURES = "FULL_NONCLICK_FEATURES"  # all links, 5 features


EXPERIMENT_SCHEMA = {
    Experiment.FULL_ALL_FEATURES: Schema.FULL,
    Experiment.NONCLICK_SUBSET: Schema.NON_CLICK,
    Experiment.FULL_NONCLICK_FEATURES: Schema.NON_CLICK,
}
ALL_CLASSIFIERS = (ModelKind.NAIVE_BAYES, ModelKind.DECISION_TREE, ModelKind.RANDOM_FOREST)


class ProviderFailure(RuntimeError):
    """A live lookup failed; only raised in live mode."""


@dataclass
class ExperimentConfig:
    corpus_dir: Path
    fixtures_dir: Optional[Path]
    out_dir: Path
    experiment: Experiment = Experiment.FULL_ALL_FEATURES
    classifiers: tuple[ModelKind, ...] = ALL_CLASSIFIERS
    params: Mapping[str, Mapping[str, Any]] = field(default_factory=dict)
    seed: int = 0
    split: SplitSpec = field(default_factory=SplitSpec)
    cv_k: int = 10
    jobs: int = 1
    live: bool = False
    balance: bool = True
    labels_path: Optional[Path] = None

    def __post_init__(self):
        self.corpus_dir = Path(self.corpus_dir)
        self.out_dir = Path(self.out_dir)
        self.fixtures_dir = Path(self.fixtures_dir) if self.fixtures_dir else None
        self.experiment = Experiment(self.experiment)
        self.classifiers = tuple(model_kind(c) for c in self.classifiers)

    @property
    def schema(self) -> Schema:
        return EXPERIMENT_SCHEMA[self.experiment]


def reference_time(corpus: Corpus) -> datetime:
    """Deterministic 'now' for a corpus: its manifest ``as_of`` or the latest link."""
    as_of = corpus.manifest.get("as_of") if corpus.manifest else None
    if as_of:
        return parse_ts(as_of)
    if corpus.links:
        return max(l.created_at for l in corpus.links)
    return datetime(1970, 1, 1, tzinfo=timezone.utc)


def default_fixtures_dir(corpus_dir: Path) -> Path:
    return Path(corpus_dir) / "fixtures"


def label_with_fixtures(corpus: Corpus, fixtures_dir: Path, live: bool = False, jobs: int = 1) -> list[LabelRecord]:
    fixtures_dir = Path(fixtures_dir)
    if not fixtures_dir.is_dir():
        raise FileNotFoundError(f"fixtures directory not found: {fixtures_dir}")
    providers = load_fixture_providers(fixtures_dir)
    probe = HttpProbe() if live else FixtureProbe.from_file(fixtures_dir / "probes.jsonl")
    whitelist = load_whitelist(fixtures_dir / "whitelist.txt")
    records = label_corpus(corpus, providers, probe, whitelist, checked_at=reference_time(corpus),
                           max_in_flight=jobs)
    if live and any(v.failed for r in records for v in r.verdicts):
        raise ProviderFailure("one or more blacklist lookups failed in live mode")
    return records


def select_experiment(links: Sequence[ShortLinkRecord], labels: Mapping[str, Label], experiment: Experiment,
                      seed: int, balance: bool = True) -> Dataset:
    """Instances for one of the three experiments.

    NONCLICK_SUBSET keeps only never-clicked links and, when ``balance`` is
    set, randomly thins the larger class to the size of the smaller one.
    """
    experiment = Experiment(experiment)
    schema = EXPERIMENT_SCHEMA[experiment]
    chosen = list(links)
    if experiment is Experiment.NONCLICK_SUBSET:
        chosen = [l for l in chosen if not l.clicks]
    instances = build_instances(chosen, labels, schema)
    if experiment is Experiment.NONCLICK_SUBSET and balance and instances:
        mal = [i for i, x in enumerate(instances) if x.malicious]
        ben = [i for i, x in enumerate(instances) if not x.malicious]
        if mal and ben:
            rng = child_rng(seed, "balance")
            small, large = (mal, ben) if len(mal) <= len(ben) else (ben, mal)
            keep = set(small) | {large[i] for i in rng.permutation(len(large))[: len(small)]}
            instances = [x for i, x in enumerate(instances) if i in keep]
    return Dataset(tuple(instances), schema)


def _params_for(config: ExperimentConfig, kind: ModelKind) -> dict:
    return dict(config.params.get(kind.value, {}))


def run_experiment(dataset: Dataset, config: ExperimentConfig) -> tuple[dict, dict]:
    """Split, cross-validate and test every configured classifier.

    Returns the report dict and the trained models keyed by kind.
    """
    train, test = split_dataset(dataset, config.split)
    report: dict[str, Any] = {
        "schema_version": REPORT_SCHEMA_VERSION,
        "experiment": config.experiment.value,
        "schema": dataset.schema.value,
        "features": list(dataset.feature_names),
        "seed": config.seed,
        "n_instances": len(dataset),
        "class_counts": dict(zip(("benign", "malicious"), dataset.class_counts())),
        "split": {
            "train_fraction": config.split.train_fraction,
            "stratified": config.split.stratified,
            "train": dict(zip(("benign", "malicious"), train.class_counts())),
            "test": dict(zip(("benign", "malicious"), test.class_counts())),
        },
        "cv": {},
        "test": {},
    }
    models = {}
    X_test, y_test = test.X(), test.y()
    for kind in config.classifiers:
        trainer = TrainerConfig(kind, _params_for(config, kind), seed=config.seed, jobs=config.jobs)
        if config.cv_k:
            cv = cross_validate(train, config.cv_k, trainer, config.seed, jobs=config.jobs)
            report["cv"][kind.value] = cv.to_dict()
        model = trainer.train(train)
        models[kind] = model
        if len(test):
            pred = predict_labels(model, X_test)
            report["test"][kind.value] = compute_metrics(confusion_matrix_arrays(pred, y_test)).to_dict()
    report["ranking"] = rank_features(dataset).to_dict()
    return report, models


def render_report(report: Mapping) -> str:
    title = f"Results ({report['experiment']}, {report['schema']} features, n={report['n_instances']})"
    order = {k.value: i for i, k in enumerate(ALL_CLASSIFIERS)}
    tested = sorted(report.get("test", {}).items(), key=lambda kv: order.get(kv[0], len(order)))
    columns = {k: metrics_from_dict(v) for k, v in tested}
    parts = [render_table(columns, title)]
    if report.get("cv"):
        k = next(iter(report["cv"].values()))["k"]
        cvs = sorted(report["cv"].items(), key=lambda kv: order.get(kv[0], len(order)))
        means = ", ".join(f"{name}={cv['mean_accuracy']:.4f}" for name, cv in cvs)
        parts.append(f"{k}-fold cross-validation on the training split, mean accuracy: {means}\n")
    ranking = FeatureRanking(tuple((r["feature"], r["info_gain"]) for r in report.get("ranking", [])))
    parts.append("Feature ranking by information gain\n" + render_ranking(ranking))
    return "\n".join(parts)


def run_pipeline(config: ExperimentConfig) -> dict:
    """Full run; writes report.json, report.txt, model.json, features.csv, labels.jsonl."""
    corpus = load_corpus(config.corpus_dir)
    out = config.out_dir
    out.mkdir(parents=True, exist_ok=True)

    if config.labels_path is not None:
        labels = load_labels(config.labels_path)
        label_summary = None
    else:
        fixtures = config.fixtures_dir or default_fixtures_dir(config.corpus_dir)
        records = label_with_fixtures(corpus, fixtures, config.live, config.jobs)
        save_labels(records, out / "labels.jsonl")
        labels = {r.short_hash: r.label for r in records}
        label_summary = {
            "malicious": sum(r.label.malicious for r in records),
            "benign": sum(not r.label.malicious for r in records),
            "sources": dict(sorted(Counter(s for r in records if r.label.malicious for s in r.label.sources).items())),
        }

    dataset = select_experiment(corpus.links, labels, config.experiment, config.seed, config.balance)
    write_csv(dataset.instances, out / "features.csv", dataset.schema)
    report, models = run_experiment(dataset, config)
    if label_summary is not None:
        report["labeling"] = label_summary

    primary = ModelKind.RANDOM_FOREST if ModelKind.RANDOM_FOREST in models else config.classifiers[-1]
    models[primary].save(out / "model.json")
    if len(models) > 1:
        for kind, model in models.items():
            model.save(out / f"model_{kind.value.lower()}.json")
    (out / "report.json").write_text(report_json(report), encoding="utf-8")
    (out / "report.txt").write_text(render_report(report), encoding="utf-8")
    return report
