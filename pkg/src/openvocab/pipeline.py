"""Stage driver: each stage reads its inputs and writes documented artifacts
into the work directory.

Artifacts (under ``workdir/``): normalized ``kb.tsv`` + ``mediators.txt`` +
``kb_summary.json``; extracted+filtered ``instances.jsonl`` +
``corpus_summary.json``; ``features.tsv``; ``selected_features.tsv``;
``model.<mode>.json`` + ``train_loss.<mode>.tsv``; ``run.<tag>.tsv``;
``report.<tag>.txt``; ``significance.txt``.  Every invocation also writes a
``config.resolved.json`` snapshot.  With a fixed config and seed all
artifacts are byte-identical across runs.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

from . import evaluation, kb, logical_forms, models, query_engine, subgraph_features
from .errors import LoadError
from .feature_selection import accumulate_counts, read_selected, select_top_k, write_selected

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    kb: str | None = None
    mediators: str | None = None
    corpus: str | None = None
    queries: str | None = None
    pool: str | None = None
    workdir: str = "work"
    mode: str = "combined"
    dim: int = 300
    learning_rate: float = 0.05
    epochs: int = 30
    negatives_per_positive: int = 10
    l2: float = 1e-4
    seed: int = 0
    max_path_len: int = 2
    fanout_cap: int = 100
    top_k: int = 100
    min_feature_count: int = 5
    min_predicate_count: int = 6
    ap_mode: str = "paper"
    append_kb: bool = False
    iterations: int = 10000
    threads: int = 1

    @classmethod
    def from_file(cls, path: str) -> "PipelineConfig":
        with open(path, encoding="utf-8") as handle:
            try:
                data = json.load(handle)
            except json.JSONDecodeError as exc:
                raise LoadError(f"config file: invalid JSON: {exc.msg}") from None
        if not isinstance(data, dict):
            raise LoadError("config file: top level must be an object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise LoadError(f"config file: unknown keys: {', '.join(unknown)}")
        try:
            return cls(**data)
        except (TypeError, ValueError) as exc:
            raise LoadError(f"config file: {exc}") from None

    def model_config(self, mode: str | None = None) -> models.ModelConfig:
        return models.ModelConfig(
            mode=mode or self.mode,
            dim=self.dim,
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            negatives_per_positive=self.negatives_per_positive,
            l2=self.l2,
            seed=self.seed,
        )

    def require(self, *fields: str) -> None:
        missing = [f for f in fields if getattr(self, f) is None]
        if missing:
            raise LoadError(f"config is missing required paths: {', '.join(missing)}")


def workpath(cfg: PipelineConfig, name: str) -> str:
    return os.path.join(cfg.workdir, name)


def write_resolved_config(cfg: PipelineConfig) -> None:
    os.makedirs(cfg.workdir, exist_ok=True)
    with open(workpath(cfg, "config.resolved.json"), "w", encoding="utf-8") as handle:
        json.dump(dataclasses.asdict(cfg), handle, indent=2, sort_keys=True)
        handle.write("\n")


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def run_tag(mode: str, append_kb: bool) -> str:
    return mode + ("+kb" if append_kb else "")


# -- stages ---------------------------------------------------------------

def stage_build_kb(cfg: PipelineConfig) -> kb.KnowledgeGraph:
    cfg.require("kb")
    graph = kb.load_kb(cfg.kb, cfg.mediators)
    os.makedirs(cfg.workdir, exist_ok=True)
    kb.save_kb(graph, workpath(cfg, "kb.tsv"))
    kb.save_mediators(graph, workpath(cfg, "mediators.txt"))
    _write_json(workpath(cfg, "kb_summary.json"), graph.summary())
    log.info("kb: %s", graph.summary())
    return graph


def _load_work_graph(cfg: PipelineConfig) -> kb.KnowledgeGraph:
    return kb.load_kb(workpath(cfg, "kb.tsv"), workpath(cfg, "mediators.txt"))


def stage_extract_lf(cfg: PipelineConfig) -> list[logical_forms.PredicateInstance]:
    cfg.require("corpus")
    raw = logical_forms.read_corpus(cfg.corpus)
    kept, dropped = logical_forms.filter_rare_predicates(raw, cfg.min_predicate_count)
    os.makedirs(cfg.workdir, exist_ok=True)
    logical_forms.write_instances(workpath(cfg, "instances.jsonl"), kept)
    _write_json(
        workpath(cfg, "corpus_summary.json"),
        {
            "instances_extracted": len(raw),
            "instances_kept": len(kept),
            "predicates_dropped": sorted(f"{p.name}/{p.arity}" for p in dropped),
        },
    )
    log.info("corpus: %d instances extracted, %d kept", len(raw), len(kept))
    return kept


def _read_instances(cfg: PipelineConfig) -> list[logical_forms.PredicateInstance]:
    return logical_forms.read_corpus(workpath(cfg, "instances.jsonl"))


def _instance_keys(instances) -> list[str]:
    keys: list[str] = []
    seen = set()
    for inst in instances:
        key = (
            inst.args[0]
            if inst.predicate.arity == 1
            else subgraph_features.pair_key(*inst.args)
        )
        if key not in seen:
            seen.add(key)
            keys.append(key)
    return keys


def stage_sfe_extract(cfg: PipelineConfig) -> None:
    graph = _load_work_graph(cfg)
    instances = _read_instances(cfg)
    store = subgraph_features.FeatureStore(
        graph, max_len=cfg.max_path_len, fanout_cap=cfg.fanout_cap
    )
    rows = {}
    for inst in instances:
        key = (
            inst.args[0]
            if inst.predicate.arity == 1
            else subgraph_features.pair_key(*inst.args)
        )
        if key not in rows:
            rows[key] = store.vector_for(inst.args)
    subgraph_features.write_feature_matrix(workpath(cfg, "features.tsv"), rows, store.space)
    log.info("sfe: %d keys, %d distinct features", len(rows), len(store.space))


def _matrix_lookup(rows: dict[str, frozenset[int]]):
    def lookup(args: tuple[str, ...]) -> frozenset[int]:
        key = args[0] if len(args) == 1 else subgraph_features.pair_key(*args)
        return rows.get(key, frozenset())

    return lookup


def stage_select_features(cfg: PipelineConfig) -> None:
    instances = _read_instances(cfg)
    space = subgraph_features.FeatureSpace()
    rows = subgraph_features.read_feature_matrix(workpath(cfg, "features.tsv"), space)
    counts = accumulate_counts(instances, _matrix_lookup(rows))
    selected = select_top_k(counts, cfg.top_k, cfg.min_feature_count, space)
    write_selected(workpath(cfg, "selected_features.tsv"), selected, space)
    total = sum(len(v) for v in selected.values())
    log.info("selection: %d features across %d predicates", total, len(selected))


def stage_train(cfg: PipelineConfig, mode: str | None = None) -> models.Model:
    mode = mode or cfg.mode
    instances = _read_instances(cfg)
    space = subgraph_features.FeatureSpace()
    rows = subgraph_features.read_feature_matrix(workpath(cfg, "features.tsv"), space)
    selected = read_selected(workpath(cfg, "selected_features.tsv"), space)
    lookup = _matrix_lookup(rows)

    entity_keys = [k for k in _instance_keys(i for i in instances if i.predicate.arity == 1)]
    pair_keys = [
        tuple(k.split(subgraph_features.PAIR_KEY_SEPARATOR))
        for k in _instance_keys(i for i in instances if i.predicate.arity == 2)
    ]

    def universe(inst: logical_forms.PredicateInstance):
        pool = entity_keys if inst.predicate.arity == 1 else pair_keys
        own = inst.key
        return [k for k in pool if k != own]

    model = models.initialize_model(cfg.model_config(mode), instances, selected, space)
    losses = models.train(model, instances, lookup, universe)
    models.save_model(model, workpath(cfg, f"model.{mode}.json"))
    with open(workpath(cfg, f"train_loss.{mode}.tsv"), "w", encoding="utf-8") as handle:
        for epoch, loss in enumerate(losses, start=1):
            handle.write(f"{epoch}\t{loss:.6f}\n")
    log.info("train[%s]: loss %.4f -> %.4f", mode, losses[0], losses[-1])
    return model


def stage_answer(
    cfg: PipelineConfig, mode: str | None = None, append_kb: bool | None = None
) -> str:
    cfg.require("queries")
    mode = mode or cfg.mode
    append_kb = cfg.append_kb if append_kb is None else append_kb
    graph = _load_work_graph(cfg)
    model = models.load_model(workpath(cfg, f"model.{mode}.json"))
    store = subgraph_features.FeatureStore(
        graph, model.feature_space, max_len=cfg.max_path_len, fanout_cap=cfg.fanout_cap
    )
    cooccurrence = query_engine.CooccurrenceIndex.from_instances(_read_instances(cfg))
    queries = logical_forms.read_queries(cfg.queries)

    def answer_one(item):
        qid, form = item
        candidates = query_engine.generate_candidates(form, graph, cooccurrence)
        ranked = query_engine.execute_query(form, candidates, model, store, qid)
        if append_kb:
            ranked = query_engine.append_kb_candidates(ranked, candidates)
        return ranked

    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            answers = list(pool.map(answer_one, queries))
    else:
        answers = [answer_one(item) for item in queries]

    tag = run_tag(mode, append_kb)
    path = workpath(cfg, f"run.{tag}.tsv")
    query_engine.write_run(path, answers)
    log.info("answer[%s]: %d queries", tag, len(answers))
    return path


def stage_evaluate(cfg: PipelineConfig, run_path: str, out_path: str | None = None) -> evaluation.EvaluationReport:
    cfg.require("pool")
    run = query_engine.read_run(run_path)
    pool = evaluation.read_pool(cfg.pool)
    report = evaluation.evaluate_run(run, pool, cfg.ap_mode)
    if out_path is None:
        base = os.path.basename(run_path)
        tag = base[len("run.") : -len(".tsv")] if base.startswith("run.") else base
        out_path = workpath(cfg, f"report.{tag}.txt")
    os.makedirs(os.path.dirname(out_path) or ".", exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as handle:
        handle.write(report.to_text())
    log.info(
        "evaluate[%s]: MAP %.4f W-MAP %.4f MRR %.4f",
        os.path.basename(run_path), report.map, report.w_map, report.mrr,
    )
    return report


def stage_significance(
    cfg: PipelineConfig, run_a: str, run_b: str, out_path: str | None = None
) -> float:
    cfg.require("pool")
    pool = evaluation.read_pool(cfg.pool)
    report_a = evaluation.evaluate_run(query_engine.read_run(run_a), pool, cfg.ap_mode)
    report_b = evaluation.evaluate_run(query_engine.read_run(run_b), pool, cfg.ap_mode)
    ap_a = [row.ap for row in report_a.per_query]
    ap_b = [row.ap for row in report_b.per_query]
    p_value = evaluation.paired_permutation_test(
        ap_a, ap_b, iterations=cfg.iterations, seed=cfg.seed
    )
    exact = len(ap_a) <= evaluation.EXACT_PERMUTATION_LIMIT
    if out_path is None:
        out_path = workpath(cfg, "significance.txt")
    with open(out_path, "w", encoding="utf-8") as handle:
        handle.write("# paired permutation test on per-query AP\n")
        handle.write(f"run_a\t{os.path.basename(run_a)}\n")
        handle.write(f"run_b\t{os.path.basename(run_b)}\n")
        handle.write(f"ap_mode\t{cfg.ap_mode}\n")
        handle.write(f"queries\t{len(ap_a)}\n")
        handle.write(f"map_a\t{report_a.map:.6f}\n")
        handle.write(f"map_b\t{report_b.map:.6f}\n")
        handle.write(f"method\t{'exact' if exact else f'monte-carlo:{cfg.iterations}'}\n")
        handle.write(f"seed\t{cfg.seed}\n")
        handle.write(f"p_value\t{p_value:.6f}\n")
    log.info("significance: p = %.6f", p_value)
    return p_value


def stage_pipeline(cfg: PipelineConfig) -> dict[str, evaluation.EvaluationReport]:
    """All stages end to end: one model per mode, runs, reports, significance.

    The distributional model is answered twice, with and without the appended
    KB-candidate tail; significance compares combined vs distributional+kb.
    """
    stage_build_kb(cfg)
    stage_extract_lf(cfg)
    stage_sfe_extract(cfg)
    stage_select_features(cfg)
    reports = {}
    for mode in models.MODES:
        stage_train(cfg, mode)
        variants = [False, True] if mode == "distributional" else [False]
        for append in variants:
            run_path = stage_answer(cfg, mode, append)
            tag = run_tag(mode, append)
            reports[tag] = stage_evaluate(cfg, run_path)
    stage_significance(
        cfg,
        workpath(cfg, "run.combined.tsv"),
        workpath(cfg, "run.distributional+kb.tsv"),
    )
    return reports
