import logging
import os
import sys
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Optional

from align import Alignment, AlignmentException, EditCounts, EmptyReference, align, corpus_error_rate, edit_counts
from analysis import HEURISTIC_TYPES, SCORED_ATTEMPTS, AttemptTally, ConfusionTable, FalseRecognitionType, \
    LabelCountMismatch, accuracy_changes, attempt_tally, compare_top, false_recognition_tally
from config import ConfigError, RunConfig
from corpusio import dump_corpus, fetch_all, load_corpus, load_embeddings
from errors import ALL, ERROR_KINDS, ErrorPair, NoTrueErrors, category_shares, error_ratio, extract_error_pairs, \
    match_by_category, merge_results
from inject import InjectionException, InjectionResources, InjectionSpec, inject_miscues
from miscue import MISCUE_LABELS, ClassifiedError, MiscueException, classify_errors, miscue_match_results
from normalize import IPA, NormalizationException, load_phoneme_mapping, map_phonemes, normalize_text, \
    parse_phonemes
from record import CorpusException, CorpusRecord, Transcript
from templates import confusion_report_template, detection_template, injection_truth_template, miscue_template, \
    model_report_template, report_template
import utils

logger = logging.getLogger(__name__)

INJECTED_MODEL = "injected"
ERROR_CATEGORIES = [kind.value for kind in ERROR_KINDS]
MISCUE_CATEGORIES = [label.value for label in MISCUE_LABELS]


class AnnotationMissing(CorpusException):
    pass


# anything raised from these is a data error (exit status 2)
DATA_ERRORS = (CorpusException, NormalizationException, AlignmentException, MiscueException, LabelCountMismatch,
               InjectionException, OSError)


@dataclass
class RecordResult:
    record_id: str
    prompt_hyp: Alignment
    prompt_ref: Alignment
    ref_hyp: Alignment
    predicted: List[ErrorPair]
    truth: List[ErrorPair]
    predicted_miscues: Optional[List[ClassifiedError]] = None
    truth_miscues: Optional[List[ClassifiedError]] = None
    phoneme_alignment: Optional[Alignment] = None

    @property
    def word_counts(self) -> EditCounts:
        return edit_counts(self.ref_hyp)


class Session:
    """
    Loaded inputs of one CLI run, shared read-only by the record workers.
    """

    def __init__(self, cfg: RunConfig, needs_embeddings=False):
        cfg.check_paths(embeddings=needs_embeddings)
        self.cfg: RunConfig = cfg
        self.records: List[CorpusRecord] = sorted(load_corpus(cfg.corpus, cfg.normalization), key=lambda r: r.id)
        self.emb = load_embeddings(cfg.embeddings) if cfg.embeddings else None
        self.mapping = load_phoneme_mapping(cfg.phoneme_map)

    def models(self) -> List[str]:
        models = self.cfg.models or sorted({m for r in self.records for m in r.hypotheses} | set(self.cfg.sources))
        if not models:
            raise AnnotationMissing(f"{self.cfg.corpus} holds no hypotheses and no model was selected")
        return models

    def hypotheses(self, model: str) -> Dict[str, Transcript]:
        hypotheses = fetch_all(self.cfg.source(model), self.records, model, self.cfg.normalization)
        if not hypotheses:
            raise AnnotationMissing(f"No '{model}' hypotheses for the records of {self.cfg.corpus}")
        return hypotheses

    def map(self, fn: Callable, records: List[CorpusRecord]) -> list:
        # results come back in record order whatever the completion order
        if self.cfg.jobs == 1:
            return [fn(record) for record in records]
        with ThreadPoolExecutor(max_workers=self.cfg.jobs) as executor:
            return list(executor.map(fn, records))

    def strict(self) -> bool:
        return self.emb is None and self.cfg.missing_embeddings == "error"

    def warn_degraded(self):
        if self.emb is None and self.cfg.missing_embeddings == "degrade":
            logger.warning("No embeddings loaded, substitutions that are not orthographically similar are labeled O")

    def phonemes(self, record: CorpusRecord, hyp: Transcript):
        ref_phonemes = record.reference.cgn_phonemes(self.mapping)
        hyp_phonemes = hyp.cgn_phonemes(self.mapping)
        if ref_phonemes is None or hyp_phonemes is None:
            return None
        return align(ref_phonemes, hyp_phonemes, self.cfg.phoneme_costs)

    def process(self, record: CorpusRecord, hyp: Transcript, classify=False, phonemes=False) -> RecordResult:
        costs = self.cfg.word_costs
        prompt_hyp = align(record.prompt, hyp.words, costs)
        prompt_ref = align(record.prompt, record.reference.words, costs)
        result = RecordResult(
            record_id=record.id,
            prompt_hyp=prompt_hyp,
            prompt_ref=prompt_ref,
            ref_hyp=align(record.reference.words, hyp.words, costs),
            predicted=extract_error_pairs(prompt_hyp),
            truth=extract_error_pairs(prompt_ref),
            phoneme_alignment=self.phonemes(record, hyp) if phonemes else None,
        )
        if classify:
            # ground truth and prediction go through the same classifier
            result.predicted_miscues = classify_errors(result.predicted, record.prompt, self.cfg.classifier,
                                                       self.emb, self.strict())
            result.truth_miscues = classify_errors(result.truth, record.prompt, self.cfg.classifier,
                                                   self.emb, self.strict())
        return result

    def run(self, model: str, classify=False, phonemes=False) -> List[RecordResult]:
        hypotheses = self.hypotheses(model)
        return self.map(lambda record: self.process(record, hypotheses[record.id], classify, phonemes), self.records)


def _path(staging, *parts):
    return os.path.join(staging, *[utils.safe_name(p) for p in parts])


def cmd_detect(cfg: RunConfig) -> int:
    session = Session(cfg)
    with utils.staged_output(cfg.out) as staging:
        for model in session.models():
            results = session.run(model)
            for result in results:
                row = detection_template(result.record_id, model)
                for side, alignment, errors in (("prompt_hypothesis", result.prompt_hyp, result.predicted),
                                                ("prompt_reference", result.prompt_ref, result.truth)):
                    row[side]["alignment"] = alignment.to_records()
                    row[side]["errors"] = [e.to_dict() for e in errors]
                utils.write_json(row, _path(staging, "detect", model, f"{result.record_id}.json"))
            print(f"{model}: {sum(len(r.predicted) for r in results)} predicted errors, "
                  f"{sum(len(r.truth) for r in results)} true errors in {len(results)} records")
    return 0


def _miscue_rows(miscues: List[ClassifiedError]) -> List[dict]:
    return [{**c.to_dict(), "miscue": c.is_miscue} for c in miscues]


def cmd_classify(cfg: RunConfig) -> int:
    session = Session(cfg)
    session.warn_degraded()
    with utils.staged_output(cfg.out) as staging:
        for model in session.models():
            results = session.run(model, classify=True)
            for result in results:
                row = miscue_template(result.record_id, model)
                row["predicted"] = _miscue_rows(result.predicted_miscues)
                row["truth"] = _miscue_rows(result.truth_miscues)
                utils.write_json(row, _path(staging, "classify", model, f"{result.record_id}.json"))
            labels = Counter(c.label.value for r in results for c in r.predicted_miscues)
            print(f"{model}: " + ", ".join(f"{label} {labels[label]}" for label in sorted(labels)))
    return 0


def _require_annotations(session: Session, analyses: List[str], level: str):
    records = session.records
    if {"attempts", "false_recognition"} & set(analyses):
        missing = [r.id for r in records if r.reference.attempt_labels is None]
        if missing:
            raise AnnotationMissing(f"Attempt labels are absent for records {', '.join(missing[:5])}")
    if "confusions" in analyses and level == "phoneme":
        _require_phonemes(session)


def _require_phonemes(session: Session, hypotheses: Optional[Dict[str, Transcript]] = None):
    missing = [r.id for r in session.records if r.reference.phonemes is None
               or (hypotheses is not None and hypotheses[r.id].phonemes is None)]
    if missing:
        raise AnnotationMissing(f"Phoneme transcriptions are absent for records {', '.join(missing[:5])}")


def confusion_table(results: List[RecordResult], level: str) -> ConfusionTable:
    table = ConfusionTable()
    for result in results:
        alignment = result.phoneme_alignment if level == "phoneme" else result.ref_hyp
        if alignment is None:
            raise AnnotationMissing(f"Record '{result.record_id}' has no phoneme alignment")
        table.add_alignment(alignment)
    return table


def evaluate_model(session: Session, model: str, results: List[RecordResult]) -> dict:
    """
    Pools the per-record results of one model into its report section (micro-averaged counts)
    """
    cfg = session.cfg
    out = model_report_template(model)
    out["records"] = len(results)

    try:
        out["wer"] = corpus_error_rate(r.word_counts for r in results)
    except EmptyReference:
        logger.warning(f"{model}: references are empty, WER is undefined")
    phoneme_counts = [edit_counts(r.phoneme_alignment) for r in results if r.phoneme_alignment is not None]
    if phoneme_counts:
        try:
            out["per"] = corpus_error_rate(phoneme_counts)
        except EmptyReference:
            logger.warning(f"{model}: phoneme references are empty, PER is undefined")

    predicted = sum(len(r.predicted) for r in results)
    truth = sum(len(r.truth) for r in results)
    out["predicted_errors"], out["true_errors"] = predicted, truth
    try:
        out["error_ratio"] = error_ratio(predicted, truth)
    except NoTrueErrors as e:
        logger.warning(f"{model}: {e.message}")

    detection = merge_results(match_by_category(r.predicted, r.truth, ERROR_CATEGORIES) for r in results)
    out["error_detection"] = {name: detection[name].to_dict() for name in ERROR_CATEGORIES + [ALL]}
    out["error_shares"] = category_shares([e for r in results for e in r.truth], ERROR_CATEGORIES)

    miscues = merge_results(miscue_match_results(r.predicted_miscues, r.truth_miscues) for r in results)
    out["miscue_detection"] = {name: miscues[name].to_dict() for name in MISCUE_CATEGORIES + [ALL]}
    out["miscue_shares"] = category_shares([c for r in results for c in r.truth_miscues if c.is_miscue],
                                           MISCUE_CATEGORIES, category=lambda c: c.label.value)

    records = {record.id: record for record in session.records}
    if "attempts" in cfg.analyses:
        tally = sum((attempt_tally(records[r.record_id].reference.attempt_labels, r.ref_hyp) for r in results),
                    AttemptTally())
        out["attempt_accuracy"] = tally.to_dict()
    if "false_recognition" in cfg.analyses:
        counts = Counter()
        for r in results:
            record = records[r.record_id]
            counts += false_recognition_tally(record.reference.attempt_labels, r.ref_hyp, record.links(),
                                              record.prompt)
        out["false_recognition"] = {kind.value: counts[kind] for kind in FalseRecognitionType}
        out["false_recognition"]["heuristic"] = [kind.value for kind in HEURISTIC_TYPES]
    if "confusions" in cfg.analyses:
        out["confusions"] = {"level": cfg.confusion_level,
                             **confusion_table(results, cfg.confusion_level).top(cfg.top_k).to_dict()}
    return out


def _prf_rows(model, section: dict, shares: dict, categories):
    rows = []
    for name in categories + [ALL]:
        counts = section[name]
        rows.append({"model": model, "category": name, "share": shares.get(name), "tp": counts["tp"],
                     "fp": counts["fp"], "fn": counts["fn"], "precision": counts["precision"],
                     "recall": counts["recall"], "f1": counts["f1"]})
    return rows


def _confusion_rows(model, confusions: dict):
    rows = []
    for section in ("confusion", "deletion", "insertion"):
        for rank, row in enumerate(confusions[section], start=1):
            rows.append({"model": model, "section": section, "rank": rank, "item": row["item"],
                         "count": row["count"]})
    return rows


def report_tables(report: dict) -> Dict[str, tuple]:
    """
    Flat tables of a report, one entry per CSV file / summary section: name -> (title, columns, rows)
    """
    prf_columns = ["model", "category", "share", "tp", "fp", "fn", "precision", "recall", "f1"]
    tables = {
        "recognition": ("Recognition", ["model", "wer", "per", "error_ratio", "predicted_errors", "true_errors"], []),
        "error_detection": ("Error detection (loose criterion)", prf_columns, []),
        "miscue_detection": ("Miscue detection", prf_columns, []),
        "attempt_accuracy": ("Attempt accuracy", ["model", "label", "matched", "total", "accuracy"], []),
        "false_recognition": ("False recognition of incorrect attempts", ["model", "type", "count"], []),
        "confusions": ("Top confusions", ["model", "section", "rank", "item", "count"], []),
    }
    for model, section in report["models"].items():
        tables["recognition"][2].append({key: section[key] if key != "model" else model
                                         for key in tables["recognition"][1]})
        tables["error_detection"][2].extend(_prf_rows(model, section["error_detection"], section["error_shares"],
                                                      ERROR_CATEGORIES))
        tables["miscue_detection"][2].extend(_prf_rows(model, section["miscue_detection"], section["miscue_shares"],
                                                       MISCUE_CATEGORIES))
        if section["attempt_accuracy"] is not None:
            for label in SCORED_ATTEMPTS:
                tables["attempt_accuracy"][2].append({"model": model, "label": label.value,
                                                      **section["attempt_accuracy"][label.value]})
        if section["false_recognition"] is not None:
            for kind in FalseRecognitionType:
                name = kind.value + (" (heuristic)" if kind in HEURISTIC_TYPES else "")
                tables["false_recognition"][2].append({"model": model, "type": name,
                                                       "count": section["false_recognition"][kind.value]})
        if section["confusions"] is not None:
            tables["confusions"][2].extend(_confusion_rows(model, section["confusions"]))
    return {name: table for name, table in tables.items() if table[2] or name in ("recognition",)}


def summary_text(tables: Dict[str, tuple]) -> str:
    return "\n".join(utils.format_table(rows, columns, f"# {title}") for title, columns, rows in tables.values())


def cmd_evaluate(cfg: RunConfig) -> int:
    session = Session(cfg)
    _require_annotations(session, cfg.analyses, cfg.confusion_level)
    session.warn_degraded()

    report = report_template()
    report["corpus"] = cfg.corpus
    report["records"] = len(session.records)
    report["settings"] = {
        "classifier": vars(cfg.classifier),
        "word_costs": {"sub": cfg.word_costs.sub_cost, "ins": cfg.word_costs.ins_cost,
                       "del": cfg.word_costs.del_cost},
        "analyses": sorted(cfg.analyses),
        "averaging": "micro",
    }
    for model in session.models():
        results = session.run(model, classify=True, phonemes=True)
        if "confusions" in cfg.analyses and cfg.confusion_level == "phoneme":
            if any(r.phoneme_alignment is None for r in results):
                raise AnnotationMissing(f"'{model}' hypotheses carry no phoneme transcriptions")
        report["models"][model] = evaluate_model(session, model, results)

    tables = report_tables(report)
    summary = summary_text(tables)
    with utils.staged_output(cfg.out) as staging:
        if "json" in cfg.formats:
            utils.write_json(report, os.path.join(staging, "report.json"))
        if "csv" in cfg.formats:
            for name, (title, columns, rows) in tables.items():
                utils.write_csv(rows, os.path.join(staging, f"{name}.csv"), columns)
        if "txt" in cfg.formats:
            utils.write_text(summary, os.path.join(staging, "summary.txt"))
    print(summary)
    return 0


def _comparison(first: str, second: str, tables: Dict[str, ConfusionTable], k: int) -> dict:
    top_first, top_second = tables[first].top(k), tables[second].top(k)
    return {
        "first": first,
        "second": second,
        "only_in_first": {name: list(items) for name, items in compare_top(top_first, top_second).items()},
        "only_in_second": {name: list(items) for name, items in compare_top(top_second, top_first).items()},
        "accuracy_drop": [{"symbol": symbol, "drop": drop}
                          for symbol, drop in accuracy_changes(tables[first], tables[second])],
    }


def _comparison_rows(comparison: dict) -> List[dict]:
    rows = []
    for side, model in (("only_in_first", comparison["first"]), ("only_in_second", comparison["second"])):
        for section, items in comparison[side].items():
            rows.extend({"first": comparison["first"], "second": comparison["second"], "only_in": model,
                         "section": section, "item": item} for item in items)
    return rows


def cmd_confusions(cfg: RunConfig) -> int:
    session = Session(cfg)
    level = cfg.confusion_level
    report = confusion_report_template(level, cfg.top_k)
    tables = {}
    rows, accuracy_rows = [], []
    for model in session.models():
        hypotheses = session.hypotheses(model)
        if level == "phoneme":
            _require_phonemes(session, hypotheses)
        results = session.map(lambda record: session.process(record, hypotheses[record.id],
                                                             phonemes=level == "phoneme"), session.records)
        table = tables[model] = confusion_table(results, level)
        report["models"][model] = {"totals": table.totals(), **table.top(cfg.top_k).to_dict(),
                                   "accuracy": table.accuracy_rows()}
        rows.extend(_confusion_rows(model, report["models"][model]))
        accuracy_rows.extend({"model": model, **row} for row in table.accuracy_rows())

    models = list(tables)
    report["comparisons"] = [_comparison(first, second, tables, cfg.top_k)
                             for index, first in enumerate(models) for second in models[index + 1:]]
    comparison_rows = [row for comparison in report["comparisons"] for row in _comparison_rows(comparison)]

    columns = ["model", "section", "rank", "item", "count"]
    with utils.staged_output(cfg.out) as staging:
        utils.write_json(report, os.path.join(staging, "confusions.json"))
        if "csv" in cfg.formats:
            utils.write_csv(rows, os.path.join(staging, "confusions.csv"), columns)
            utils.write_csv(accuracy_rows, os.path.join(staging, "symbol_accuracy.csv"),
                            ["model", "symbol", "matched", "total", "accuracy"])
            if comparison_rows:
                utils.write_csv(comparison_rows, os.path.join(staging, "confusion_comparison.csv"),
                                ["first", "second", "only_in", "section", "item"])
    print(utils.format_table(rows, columns, f"# Top-{cfg.top_k} {level} confusions"))
    for comparison in report["comparisons"]:
        flagged = sum(len(items) for items in comparison["only_in_first"].values())
        print(f"{comparison['first']} vs {comparison['second']}: {flagged} top-{cfg.top_k} entries "
              f"of {comparison['first']} are not in the top-{cfg.top_k} of {comparison['second']}")
    return 0


def cmd_inject(cfg: RunConfig) -> int:
    session = Session(cfg, needs_embeddings=True)
    resources = InjectionResources(session.emb, cfg=cfg.classifier)
    try:
        base_spec = InjectionSpec.from_dict(cfg.injection, seed=cfg.seed)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"injection: {e}", "injection")

    injected = []
    truth = injection_truth_template(cfg.seed)
    for index, record in enumerate(session.records):
        spec = replace(base_spec, seed=cfg.seed + index)
        try:
            transcript, classified = inject_miscues(record.prompt, spec, resources, cfg.word_costs,
                                                    cfg.normalization)
        except InjectionException as e:
            logger.warning(f"Skipping record '{record.id}': {e.message}")
            truth["skipped"].append(record.id)
            continue
        metadata = {**record.metadata, "injection_seed": spec.seed}
        injected.append(CorpusRecord(record.id, record.prompt_text, record.prompt, transcript,
                                     {INJECTED_MODEL: transcript}, metadata))
        truth["records"][record.id] = _miscue_rows(classified)
    if not injected:
        raise InjectionException(f"No record of {cfg.corpus} could host the requested injections")

    with utils.staged_output(cfg.out) as staging:
        dump_corpus(injected, os.path.join(staging, "injected_corpus.json"))
        utils.write_json(truth, os.path.join(staging, "injection_truth.json"))
    print(f"{len(injected)} records injected, {len(truth['skipped'])} skipped")
    return 0


def cmd_normalize(cfg: RunConfig, texts: Optional[List[str]] = None, phonemes=False) -> int:
    lines = texts if texts else [line.rstrip("\n") for line in sys.stdin]
    mapping = load_phoneme_mapping(cfg.phoneme_map) if phonemes else None
    for line in lines:
        if phonemes:
            print(map_phonemes(parse_phonemes(line, IPA), mapping).text())
        else:
            print(normalize_text(line, cfg.normalization).text())
    return 0


COMMANDS = {
    "detect": cmd_detect,
    "classify": cmd_classify,
    "evaluate": cmd_evaluate,
    "confusions": cmd_confusions,
    "inject": cmd_inject,
}
