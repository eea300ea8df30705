"""Command-line driver.

Exit codes: 0 success, 1 other error, 2 input missing, 3 schema mismatch,
4 invariant or format violation, 5 provider failure in ``--live`` mode.
Failures print one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from malshort.core.io import SchemaError, load_corpus, save_corpus
from malshort.core.model import InvariantError

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_MISSING = 2
EXIT_SCHEMA = 3
EXIT_INVARIANT = 4
EXIT_PROVIDER = 5

log = logging.getLogger("malshort")


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _json_arg(text):
    if text is None:
        return {}
    path = Path(text)
    if path.exists():
        text = path.read_text(encoding="utf-8")
    try:
        value = json.loads(text)
    except json.JSONDecodeError as exc:
        raise argparse.ArgumentTypeError(f"not JSON: {exc}") from None
    if not isinstance(value, dict):
        raise argparse.ArgumentTypeError("expected a JSON object")
    return value


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=0, help="root seed for every random stream (default 0)")
    g.add_argument("--schema", choices=["FULL", "NON_CLICK"], default=None, help="feature schema")
    g.add_argument("--experiment", choices=["FULL_ALL_FEATURES", "NONCLICK_SUBSET", "FULL_NONCLICK_FEATURES"],
                   default=None, help="which of the three experiments to run")
    g.add_argument("--out", type=Path, default=None, help="output file or directory")
    g.add_argument("--jobs", type=int, default=1, help="worker threads; never changes outputs")
    g.add_argument("--live", action="store_true", help="allow network access for link probes")
    g.add_argument("-v", "--verbose", action="store_true")
    return p


def _require_out(args, default=None) -> Path:
    out = args.out or default
    if out is None:
        raise CliError(EXIT_ERROR, "--out is required")
    return Path(out)


def _schema(args, default="FULL"):
    from malshort.features import Schema
    from malshort.pipeline import EXPERIMENT_SCHEMA, Experiment

    if args.experiment:
        implied = EXPERIMENT_SCHEMA[Experiment(args.experiment)]
        if args.schema and Schema(args.schema) is not implied:
            raise CliError(EXIT_SCHEMA, f"--schema {args.schema} conflicts with --experiment {args.experiment}")
        return implied
    return Schema(args.schema or default)


def _write_or_print(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")


def _load_dataset(path):
    from malshort.features import read_csv
    from malshort.learn import Dataset

    if not Path(path).exists():
        raise FileNotFoundError(f"features file not found: {path}")
    instances = read_csv(path)
    if not instances:
        raise CliError(EXIT_INVARIANT, f"no instances in {path}")
    return Dataset.from_instances(instances)


# -- subcommands ---------------------------------------------------------------


def cmd_generate(args) -> int:
    from malshort.core.synthetic import GeneratorConfig, generate_world

    out = _require_out(args)
    cfg = dict(args.config)
    if args.n_benign is not None:
        cfg["n_benign"] = args.n_benign
    if args.n_malicious is not None:
        cfg["n_malicious"] = args.n_malicious
    corpus, fixtures = generate_world(GeneratorConfig.from_dict(cfg), args.seed)
    save_corpus(corpus, out)
    fixtures.write(args.fixtures or out / "fixtures")
    print(f"wrote {len(corpus.links)} links, {len(corpus.encoders)} encoder profiles to {out}")
    return EXIT_OK


def cmd_label(args) -> int:
    from malshort.labeling import save_labels
    from malshort.pipeline import default_fixtures_dir, label_with_fixtures

    corpus = load_corpus(args.corpus)
    records = label_with_fixtures(corpus, args.fixtures or default_fixtures_dir(args.corpus), args.live, args.jobs)
    out = _require_out(args, Path("labels.jsonl"))
    save_labels(records, out)
    n_mal = sum(r.label.malicious for r in records)
    print(f"labeled {len(records)} links: {n_mal} malicious, {len(records) - n_mal} benign -> {out}")
    return EXIT_OK


def cmd_features(args) -> int:
    from malshort.features import build_instances, write_csv
    from malshort.labeling import load_labels
    from malshort.pipeline import Experiment, select_experiment

    corpus = load_corpus(args.corpus)
    labels = load_labels(args.labels)
    schema = _schema(args)
    if args.experiment:
        instances = select_experiment(corpus.links, labels, Experiment(args.experiment), args.seed).instances
    else:
        instances = build_instances(corpus.links, labels, schema)
    out = _require_out(args, Path("features.csv"))
    write_csv(instances, out, schema)
    print(f"wrote {len(instances)} {schema.value} feature rows -> {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    from malshort.learn import TrainerConfig

    data = _load_dataset(args.features)
    model = TrainerConfig(args.classifier, args.params, seed=args.seed, jobs=args.jobs).train(data)
    out = _require_out(args, Path("model.json"))
    model.save(out)
    print(f"trained {model.kind.value} on {len(data)} instances -> {out}")
    return EXIT_OK


def cmd_crossval(args) -> int:
    from malshort.evaluation import report_json
    from malshort.learn import TrainerConfig, cross_validate

    data = _load_dataset(args.features)
    trainer = TrainerConfig(args.classifier, args.params, seed=args.seed, jobs=args.jobs)
    result = cross_validate(data, args.k, trainer, args.seed, jobs=args.jobs)
    _write_or_print(report_json(result.to_dict()), args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    from malshort.evaluation import compute_metrics, confusion_matrix_arrays, render_table, report_json
    from malshort.learn import SchemaMismatch, TrainedModel, predict_labels

    if not Path(args.model).exists():
        raise FileNotFoundError(f"model file not found: {args.model}")
    model = TrainedModel.load(args.model)
    data = _load_dataset(args.features)
    if data.schema is not model.schema:
        raise SchemaMismatch(f"model schema {model.schema.value} != data schema {data.schema.value}")
    report = compute_metrics(confusion_matrix_arrays(predict_labels(model, data.X()), data.y()))
    if args.out:
        _write_or_print(report_json({model.kind.value: report.to_dict()}), args.out)
    sys.stdout.write(render_table({model.kind.value: report}))
    return EXIT_OK


def cmd_rank(args) -> int:
    from malshort.evaluation import rank_features, render_ranking, report_json

    ranking = rank_features(_load_dataset(args.features))
    if args.out:
        _write_or_print(report_json(ranking.to_dict()), args.out)
    sys.stdout.write(render_ranking(ranking))
    return EXIT_OK


def cmd_profile(args) -> int:
    from malshort import profiles as pf
    from malshort.core.io import dumps

    corpus = load_corpus(args.corpus)
    out = _require_out(args, Path("profile_out"))
    out.mkdir(parents=True, exist_ok=True)
    accounts = [corpus.encoders[a] for a in sorted(corpus.encoders)]
    reports = pf.suspicious_accounts(accounts)
    with open(out / "suspicion.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for r in reports:
            fh.write(dumps(r.to_dict()) + "\n")
    selected = {r.account_id for r in reports if r.suspicion_factor >= args.min_suspicion}
    for r in reports:
        if args.all_timelines or r.highly_suspicious:
            tl = pf.activity_timeline(corpus.encoders[r.account_id])
            (out / f"timeline_{r.account_id}.csv").write_text(tl.to_csv(), encoding="utf-8")
    with open(out / "variance.jsonl", "w", encoding="utf-8", newline="\n") as fh:
        for account, res in pf.low_variance_accounts(corpus.encoders[a] for a in sorted(selected)):
            stamps = pf.post_timestamps(corpus.encoders[account])
            row = {"account_id": account, "variance": None, "flagged": None,
                   "automation_score": pf.posting_pattern(stamps).automation_score if stamps else None}
            if res is not None:
                row.update(variance=res.variance, flagged=res.flagged)
            fh.write(dumps(row) + "\n")
    with_posts = [corpus.encoders[a] for a in sorted(selected) if corpus.encoders[a].posts]
    overlap = pf.cross_account_overlap(with_posts).to_dict() if len(with_posts) >= 2 else {"accounts": []}
    (out / "overlap.json").write_text(json.dumps(overlap, sort_keys=True, indent=1) + "\n", encoding="utf-8")
    n_high = sum(r.highly_suspicious for r in reports)
    print(f"profiled {len(reports)} accounts ({n_high} highly suspicious) -> {out}")
    return EXIT_OK


def cmd_probe(args) -> int:
    from malshort.evaluation import report_json
    from malshort.labeling import FixtureProbe, HttpProbe, load_labels, load_whitelist
    from malshort.labeling import domain_liveness_report
    from malshort.pipeline import default_fixtures_dir

    corpus = load_corpus(args.corpus)
    fixtures = Path(args.fixtures or default_fixtures_dir(args.corpus))
    probe = HttpProbe() if args.live else FixtureProbe.from_file(fixtures / "probes.jsonl")
    domains = None
    if args.labels:
        labels = load_labels(args.labels)
        domains = {l.domain for l in corpus.links if l.short_hash in labels and labels[l.short_hash].malicious}
    report = domain_liveness_report(corpus, probe, domains, load_whitelist(fixtures / "whitelist.txt"))
    if args.out:
        _write_or_print(report_json(report.to_dict()), args.out)
    print(f"domains checked: {report.n_domains}; dead: {report.n_dead} "
          f"({100 * report.dead_fraction:.2f}%); warning-page views on dead domains: {report.dead_warning_sum}")
    return EXIT_OK


def cmd_report(args) -> int:
    from malshort.pipeline import render_report

    path = Path(args.report)
    if path.is_dir():
        path = path / "report.json"
    if not path.exists():
        raise FileNotFoundError(f"report not found: {path}")
    _write_or_print(render_report(json.loads(path.read_text(encoding="utf-8"))), args.out)
    return EXIT_OK


def cmd_run(args) -> int:
    from malshort.learn import SplitSpec
    from malshort.pipeline import ALL_CLASSIFIERS, ExperimentConfig, run_pipeline

    classifiers = ALL_CLASSIFIERS if args.classifier.upper() == "ALL" else (args.classifier,)
    config = ExperimentConfig(
        corpus_dir=args.corpus,
        fixtures_dir=args.fixtures,
        out_dir=_require_out(args, Path("run_out")),
        experiment=args.experiment or "FULL_ALL_FEATURES",
        classifiers=classifiers,
        params=args.params,
        seed=args.seed,
        split=SplitSpec(args.train_fraction, args.seed, True),
        cv_k=args.k,
        jobs=args.jobs,
        live=args.live,
        labels_path=args.labels,
    )
    if args.schema:
        _schema(args)
    if not config.corpus_dir.exists():
        raise FileNotFoundError(f"corpus not found: {config.corpus_dir}")
    report = run_pipeline(config)
    sys.stdout.write((config.out_dir / "report.txt").read_text(encoding="utf-8"))
    return EXIT_OK if report else EXIT_ERROR


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="malshort", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", parents=[common], help="write a synthetic corpus and its fixtures")
    p.add_argument("--n-benign", type=int)
    p.add_argument("--n-malicious", type=int)
    p.add_argument("--config", type=_json_arg, default={}, help="GeneratorConfig overrides (JSON or file)")
    p.add_argument("--fixtures", type=Path, help="fixture output dir (default OUT/fixtures)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("label", parents=[common], help="label links from blacklist and probe fixtures")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--fixtures", type=Path)
    p.set_defaults(func=cmd_label)

    p = sub.add_parser("features", parents=[common], help="export the feature matrix as CSV")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--labels", type=Path, required=True)
    p.set_defaults(func=cmd_features)

    for name, func, helptext in (("train", cmd_train, "train one classifier"),
                                 ("crossval", cmd_crossval, "k-fold cross-validation")):
        p = sub.add_parser(name, parents=[common], help=helptext)
        p.add_argument("--features", type=Path, required=True)
        p.add_argument("--classifier", default="RF", help="NB, DT or RF")
        p.add_argument("--params", type=_json_arg, default={}, help="hyper-parameters (JSON or file)")
        if name == "crossval":
            p.add_argument("--k", type=int, default=10)
        p.set_defaults(func=func)

    p = sub.add_parser("eval", parents=[common], help="score a saved model on a feature CSV")
    p.add_argument("--model", type=Path, required=True)
    p.add_argument("--features", type=Path, required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("rank", parents=[common], help="rank features by information gain")
    p.add_argument("--features", type=Path, required=True)
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("profile", parents=[common], help="encoder-account analytics")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--min-suspicion", type=float, default=0.8,
                   help="suspicion factor needed for variance/overlap analysis (default 0.8)")
    p.add_argument("--all-timelines", action="store_true", help="timeline for every account, not just highly suspicious")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("probe", parents=[common], help="domain liveness recheck")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--fixtures", type=Path)
    p.add_argument("--labels", type=Path, help="restrict to domains of links labeled malicious")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("report", parents=[common], help="render report.json as text tables")
    p.add_argument("report", type=Path)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("run", parents=[common], help="full pipeline: label through ranking")
    p.add_argument("--corpus", type=Path, required=True)
    p.add_argument("--fixtures", type=Path)
    p.add_argument("--labels", type=Path, help="reuse an existing labels.jsonl instead of labeling")
    p.add_argument("--classifier", default="ALL", help="NB, DT, RF or ALL")
    p.add_argument("--params", type=_json_arg, default={},
                   help='per-classifier params, e.g. {"RANDOM_FOREST": {"n_trees": 50}}')
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--train-fraction", type=float, default=0.75)
    p.set_defaults(func=cmd_run)
    return parser


def _fail(code: int, exc: BaseException, command: str) -> int:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "command": command,
                                 "exit_code": code}, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    from malshort.core.synthetic import ConfigError
    from malshort.learn import DatasetError, ModelFormatError, SchemaMismatch
    from malshort.pipeline import ProviderFailure

    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        return _fail(exc.code, exc, args.command)
    except FileNotFoundError as exc:
        return _fail(EXIT_MISSING, exc, args.command)
    except SchemaMismatch as exc:
        return _fail(EXIT_SCHEMA, exc, args.command)
    except ProviderFailure as exc:
        return _fail(EXIT_PROVIDER, exc, args.command)
    except (InvariantError, SchemaError, ModelFormatError, DatasetError, ConfigError) as exc:
        return _fail(EXIT_INVARIANT, exc, args.command)
    except (ValueError, OSError) as exc:
        return _fail(EXIT_ERROR, exc, args.command)


if __name__ == "__main__":
    sys.exit(main())
