"""Command-line orchestration: one subcommand per pipeline stage plus an
end-to-end ``run`` driver with stage manifests and resume."""

from __future__ import annotations

import functools
import hashlib
import json
import os
import sys
import time
from typing import Optional

import click
import yaml

from . import classifier as clf
from . import dedup as dd
from . import extraction as ex
from . import filters as flt
from . import stats as st
from . import verification as vf
from .corpus import (ConfigurationError, Document, TokenCounter, doc_to_record,
                     file_hash, read_corpus, write_corpus)
from .gateway import FixtureTransport, Gateway, HttpTransport

EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _fail_config(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_CONFIG)


def _fail_runtime(message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_RUNTIME)


def gateway_options(fn):
    @click.option("--gateway", "gateway_mode", type=click.Choice(["http", "fixtures"]),
                  default="http", show_default=True)
    @click.option("--fixtures", "fixtures_dir", type=click.Path(),
                  help="Fixture directory for offline playback.")
    @click.option("--cache-dir", type=click.Path(), help="Response cache directory.")
    @click.option("--model-id", default="default", show_default=True)
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        return fn(*args, **kwargs)
    return wrapper


def build_gateway(gateway_mode: str, fixtures_dir: Optional[str],
                  cache_dir: Optional[str]) -> Gateway:
    if gateway_mode == "fixtures":
        if not fixtures_dir:
            raise ConfigurationError("fixture gateway requires --fixtures")
        transport = FixtureTransport(fixtures_dir)
    else:
        transport = HttpTransport()
    return Gateway(transport, cache_dir=cache_dir)


def write_manifest(path: str, payload: dict) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
    os.replace(tmp, path)


def _config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


def _corpus_totals(path: str) -> tuple[int, int]:
    """(documents, whitespace tokens) of a corpus file."""
    counter = TokenCounter()
    docs = toks = 0
    for doc in read_corpus(path):
        docs += 1
        toks += doc.token_count if doc.token_count is not None \
            else counter.count(doc.text)
    return docs, toks


def _line_count(path: str) -> int:
    with open(path, encoding="utf-8") as fh:
        return sum(1 for line in fh if line.strip())


def _stage_manifest(stage: str, params: dict, input_path: str, output_path: str,
                    started: float, extra: Optional[dict] = None,
                    input_is_corpus: bool = True) -> dict:
    if input_is_corpus:
        docs_in, tokens_in = _corpus_totals(input_path)
    else:
        docs_in, tokens_in = _line_count(input_path), 0
    docs_out, tokens_out = _corpus_totals(output_path)
    payload = {
        "stage": stage,
        "config_hash": _config_hash(params),
        "input_hash": file_hash(input_path),
        "output_hash": file_hash(output_path),
        "docs_in": docs_in,
        "docs_out": docs_out,
        "tokens_in": tokens_in,
        "tokens_out": tokens_out,
        "wall_time_s": round(time.monotonic() - started, 3),
    }
    if extra:
        payload.update(extra)
    return payload


@click.group()
def main():
    """Math pretraining corpus curation pipeline."""


@main.command("train-classifier")
@click.option("--positives", required=True, type=click.Path(exists=True))
@click.option("--negatives", required=True, type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path())
@click.option("--dim", default=50, show_default=True)
@click.option("--lr", default=0.5, show_default=True)
@click.option("--word-ngrams", default=2, show_default=True)
@click.option("--epochs", default=5, show_default=True)
@click.option("--buckets", default=2_000_000, show_default=True)
@click.option("--min-count", default=1, show_default=True)
@click.option("--seed", default=1, show_default=True)
def train_classifier_cmd(positives, negatives, output, dim, lr, word_ngrams,
                         epochs, buckets, min_count, seed):
    """Train the filtering classifier from positive/negative corpora."""
    try:
        config = clf.ClassifierConfig(dim=dim, lr=lr, word_ngrams=word_ngrams,
                                      epochs=epochs, buckets=buckets,
                                      min_count=min_count, seed=seed)
        model = clf.train(read_corpus(positives, source="web"),
                          read_corpus(negatives, source="web"), config)
    except ConfigurationError as exc:
        _fail_config(str(exc))
    clf.save_model(model, output)
    click.echo(f"saved model to {output}")


@main.command("score")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path())
def score_cmd(model_path, input_path, output):
    """Score each document; writes JSONL of {id, score}."""
    model = clf.load_model(model_path)
    with open(output, "w", encoding="utf-8") as fh:
        for doc in read_corpus(input_path):
            fh.write(json.dumps({"id": doc.id, "score": model.score(doc.text)}) + "\n")


@main.command("filter-web")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path())
@click.option("--stage1-model", required=True, type=click.Path(exists=True))
@click.option("--stage1-threshold", required=True, type=float)
@click.option("--stage2-threshold", required=True, type=float)
@click.option("--stage2-model", type=click.Path(exists=True))
@click.option("--sample-size", default=1000, show_default=True)
@click.option("--positive-types", default="1,2,3", show_default=True)
@click.option("--seed", default=0, show_default=True)
@gateway_options
def filter_web_cmd(input_path, output, stage1_model, stage1_threshold,
                   stage2_threshold, stage2_model, sample_size, positive_types,
                   seed, gateway_mode, fixtures_dir, cache_dir, model_id):
    """Two-round web filtering: coarse filter, annotate, finer filter."""
    try:
        plan = flt.WebFilterPlan(
            stage1_model=clf.load_model(stage1_model),
            stage1_threshold=stage1_threshold,
            stage2_threshold=stage2_threshold,
            positive_types=frozenset(int(t) for t in positive_types.split(",")),
            stage2_model=clf.load_model(stage2_model) if stage2_model else None,
            annotation_sample_size=sample_size,
            seed=seed,
        )
        gateway = None if stage2_model else build_gateway(gateway_mode, fixtures_dir, cache_dir)
        report = flt.WebPipelineReport()
        n = write_corpus(
            flt.run_web_pipeline(read_corpus(input_path, source="web"), plan,
                                 gateway, model_id, report), output)
    except ConfigurationError as exc:
        _fail_config(str(exc))
    click.echo(f"stage1: {report.stage1_in} -> {report.stage1_out}; "
               f"stage2: {report.stage1_out} -> {n}")


@main.command("annotate")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path())
@gateway_options
def annotate_cmd(input_path, output, gateway_mode, fixtures_dir, cache_dir, model_id):
    """Label documents with the 7-type annotation prompt."""
    try:
        gateway = build_gateway(gateway_mode, fixtures_dir, cache_dir)
    except ConfigurationError as exc:
        _fail_config(str(exc))
    with open(output, "w", encoding="utf-8") as fh:
        for label in flt.annotate_documents(read_corpus(input_path, source="web"),
                                            gateway, model_id):
            fh.write(json.dumps({"doc_id": label.doc_id, "type_code": label.type_code,
                                 "raw_response": label.raw_response,
                                 "failed": label.failed}, ensure_ascii=False) + "\n")


@main.command("filter-code")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path())
def filter_code_cmd(input_path, output):
    """Keep code documents importing math packages."""
    n = write_corpus((d for d in read_corpus(input_path, source="code")
                      if flt.filter_code_by_imports(d)), output)
    click.echo(f"retained {n} documents")


@main.command("filter-textbooks")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path())
@click.option("--title-field", default="title", show_default=True)
def filter_textbooks_cmd(input_path, output, title_field):
    """Keep textbook documents whose title carries a math keyword."""
    n = write_corpus(
        (d for d in read_corpus(input_path, source="textbook")
         if flt.filter_textbook_by_title(d.meta.get(title_field, ""))), output)
    click.echo(f"retained {n} documents")


@main.command("extract")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path())
@click.option("--rewrite", is_flag=True,
              help="Rewrite documents for quality instead of extracting computations.")
@gateway_options
def extract_cmd(input_path, output, rewrite, gateway_mode, fixtures_dir,
                cache_dir, model_id):
    """Extract computations (or rewrite documents) via the LLM."""
    try:
        gateway = build_gateway(gateway_mode, fixtures_dir, cache_dir)
    except ConfigurationError as exc:
        _fail_config(str(exc))
    if rewrite:
        n = write_corpus(
            (out for doc in read_corpus(input_path)
             if (out := ex.rewrite_document(doc, gateway, model_id)) is not None),
            output)
        click.echo(f"rewrote {n} documents")
        return
    def _gen():
        for doc in read_corpus(input_path):
            comps, _report = ex.extract_computations(doc, gateway, model_id)
            yield from comps
    n = ex.write_computations(_gen(), output)
    click.echo(f"extracted {n} computations")


@main.command("verify")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path())
@click.option("--time-limit", default=10.0, show_default=True)
@click.option("--memory-limit", default=512, show_default=True)
@click.option("--stdout-cap", default=65536, show_default=True)
@click.option("--policy", type=click.Choice(["drop", "retain_flagged"]),
              default="drop", show_default=True)
@click.option("--runner-cmd", help="Alternate runner command (shell words).")
def verify_cmd(input_path, output, time_limit, memory_limit, stdout_cap,
               policy, runner_cmd):
    """Execute extracted snippets and keep those with matching output."""
    limits = vf.ExecutionLimits(time_s=time_limit, memory_mb=memory_limit,
                                stdout_cap=stdout_cap)
    command = runner_cmd.split() if runner_cmd else None
    retained, report = vf.verify_and_retain(
        ex.read_computations(input_path), limits, policy, command)
    with open(output, "w", encoding="utf-8") as fh:
        for comp, result, outcome in retained:
            fh.write(json.dumps({
                "computation": ex.computation_to_record(comp),
                "stdout": result.stdout,
                "wall_time_ms": result.wall_time_ms,
                "match_kind": outcome.kind,
                "match_detail": outcome.detail,
            }, ensure_ascii=False) + "\n")
    ratio = f"{report.retention_ratio:.3f}" if report.retention_ratio is not None else "n/a"
    click.echo(f"retained {report.retained}/{report.total} (ratio {ratio}); "
               f"drops: {report.dropped}")


def _read_retained(path: str):
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield ex.computation_from_record(json.loads(line)["computation"])


@main.command("compose")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path())
@click.option("--mode", type=click.Choice(["step_and_code", "step_only", "code_only"]),
              default="step_and_code", show_default=True)
def compose_cmd(input_path, output, mode):
    """Render retained computations as training documents."""
    n = write_corpus(
        (vf.composed_to_document(vf.compose_training_document(c, mode))
         for c in _read_retained(input_path)), output)
    click.echo(f"composed {n} documents")


@main.command("dedup")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path())
def dedup_cmd(input_path, output):
    """Drop exact-duplicate texts, keeping first occurrences."""
    n = write_corpus(dd.exact_dedup(read_corpus(input_path)), output)
    click.echo(f"kept {n} documents")


@main.command("decontaminate")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--benchmark", required=True, type=click.Path(exists=True))
@click.option("--output", required=True, type=click.Path())
@click.option("--threshold", default=0.6, show_default=True)
@click.option("--mode", type=click.Choice(["jaccard", "containment"]),
              default="containment", show_default=True)
@click.option("--removed-log", type=click.Path())
def decontaminate_cmd(input_path, benchmark, output, threshold, mode, removed_log):
    """Remove documents overlapping benchmark questions (13-gram rule)."""
    bench = dd.BenchmarkSet.from_file(benchmark)
    removed: list = []
    n = write_corpus(dd.decontaminate(read_corpus(input_path), bench, threshold,
                                      mode, removed=removed), output)
    if removed_log:
        dd.write_removal_log(removed, removed_log)
    click.echo(f"kept {n}, removed {len(removed)}")


@main.command("stats")
@click.option("--input", "input_path", required=True, type=click.Path(exists=True))
@click.option("--format", "fmt", type=click.Choice(["table", "csv"]),
              default="table", show_default=True)
@click.option("--output", type=click.Path())
def stats_cmd(input_path, fmt, output):
    """Corpus component statistics."""
    report = st.render_report(st.compute_stats(read_corpus(input_path)), fmt)
    if output:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(report)
    else:
        click.echo(report, nl=False)


# ---------------------------------------------------------------------------
# End-to-end driver

_STAGE_PARAMS = {
    "filter_code": set(),
    "filter_textbooks": {"title_field"},
    "filter_score": {"model", "threshold"},
    "extract": {"max_chars"},
    "rewrite": {"max_chars"},
    "verify": {"time_limit_s", "memory_limit_mb", "stdout_cap", "policy", "runner_cmd"},
    "compose": {"mode"},
    "dedup": set(),
    "decontaminate": {"benchmark", "threshold", "mode"},
    "stats": {"format"},
}

_TOP_KEYS = {"input", "source", "outdir", "gateway", "seed", "stages"}
_GATEWAY_KEYS = {"mode", "fixtures_dir", "cache_dir", "model_id"}


def _validate_config(config: dict) -> None:
    unknown = set(config) - _TOP_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    for key in ("input", "outdir", "stages"):
        if key not in config:
            raise ConfigurationError(f"config missing required key {key!r}")
    gw = config.get("gateway", {})
    if set(gw) - _GATEWAY_KEYS:
        raise ConfigurationError(f"unknown gateway keys: {sorted(set(gw) - _GATEWAY_KEYS)}")
    for i, stage in enumerate(config["stages"]):
        if "name" not in stage:
            raise ConfigurationError(f"stage {i} has no name")
        name = stage["name"]
        if name not in _STAGE_PARAMS:
            raise ConfigurationError(f"unknown stage {name!r}")
        extra = set(stage) - _STAGE_PARAMS[name] - {"name"}
        if extra:
            raise ConfigurationError(f"stage {name}: unknown keys {sorted(extra)}")


def _run_stage(name: str, params: dict, input_path: str, output_path: str,
               gateway: Optional[Gateway], model_id: str) -> dict:
    """Execute one pipeline stage file-to-file; returns manifest extras."""
    extra: dict = {}
    if name == "filter_code":
        write_corpus((d for d in read_corpus(input_path, source="code")
                      if flt.filter_code_by_imports(d)), output_path)
    elif name == "filter_textbooks":
        field = params.get("title_field", "title")
        write_corpus((d for d in read_corpus(input_path, source="textbook")
                      if flt.filter_textbook_by_title(d.meta.get(field, ""))),
                     output_path)
    elif name == "filter_score":
        model = clf.load_model(params["model"])
        write_corpus(clf.filter_by_score(read_corpus(input_path), model,
                                         params["threshold"]), output_path)
    elif name == "extract":
        if gateway is None:
            raise ConfigurationError("extract stage requires a gateway")
        def _comps():
            for doc in read_corpus(input_path):
                comps, _ = ex.extract_computations(doc, gateway, model_id,
                                                   params.get("max_chars"))
                yield from comps
        ex.write_computations(_comps(), output_path)
    elif name == "rewrite":
        if gateway is None:
            raise ConfigurationError("rewrite stage requires a gateway")
        write_corpus(
            (out for doc in read_corpus(input_path)
             if (out := ex.rewrite_document(doc, gateway, model_id,
                                            params.get("max_chars"))) is not None),
            output_path)
    elif name == "verify":
        limits = vf.ExecutionLimits(
            time_s=params.get("time_limit_s", 10.0),
            memory_mb=params.get("memory_limit_mb", 512),
            stdout_cap=params.get("stdout_cap", 65536))
        command = params["runner_cmd"].split() if params.get("runner_cmd") else None
        retained, report = vf.verify_and_retain(
            ex.read_computations(input_path), limits,
            params.get("policy", "drop"), command)
        ex.write_computations((c for c, _r, _m in retained), output_path)
        extra["retention"] = {"total": report.total, "retained": report.retained,
                              "dropped": report.dropped}
    elif name == "compose":
        mode = params.get("mode", "step_and_code")
        write_corpus(
            (vf.composed_to_document(vf.compose_training_document(c, mode))
             for c in ex.read_computations(input_path)), output_path)
    elif name == "dedup":
        write_corpus(dd.exact_dedup(read_corpus(input_path)), output_path)
    elif name == "decontaminate":
        bench = dd.BenchmarkSet.from_file(params["benchmark"])
        removed: list = []
        write_corpus(dd.decontaminate(read_corpus(input_path), bench,
                                      params.get("threshold", 0.6),
                                      params.get("mode", "containment"),
                                      removed=removed), output_path)
        dd.write_removal_log(removed, output_path + ".removed.jsonl")
        extra["removed"] = len(removed)
    elif name == "stats":
        report = st.render_report(st.compute_stats(read_corpus(input_path)),
                                  params.get("format", "table"))
        with open(output_path, "w", encoding="utf-8") as fh:
            fh.write(report)
    else:
        raise ConfigurationError(f"unknown stage {name!r}")
    return extra


# stages whose input/output are computation records, not corpora
_COMP_OUTPUT = {"extract", "verify"}
_NO_CORPUS_OUTPUT = {"stats"}


@main.command("run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def run_cmd(config_path):
    """Run the configured stage chain end to end, with resume."""
    with open(config_path, encoding="utf-8") as fh:
        config = yaml.safe_load(fh)
    try:
        _validate_config(config)
        gw_conf = config.get("gateway", {})
        gateway = None
        if gw_conf:
            if gw_conf.get("mode", "http") == "fixtures":
                transport = FixtureTransport(gw_conf["fixtures_dir"])
            else:
                transport = HttpTransport()
            gateway = Gateway(transport, cache_dir=gw_conf.get("cache_dir"))
        model_id = gw_conf.get("model_id", "default")
    except ConfigurationError as exc:
        _fail_config(str(exc))

    outdir = config["outdir"]
    os.makedirs(outdir, exist_ok=True)
    current = config["input"]
    if config.get("source"):
        # normalize raw input so downstream stages see tagged documents
        normalized = os.path.join(outdir, "00_input.jsonl")
        if not os.path.exists(normalized):
            write_corpus(read_corpus(current, source=config["source"]), normalized)
        current = normalized

    for i, stage in enumerate(config["stages"], start=1):
        name = stage["name"]
        params = {k: v for k, v in stage.items() if k != "name"}
        suffix = "txt" if name in _NO_CORPUS_OUTPUT else "jsonl"
        output_path = os.path.join(outdir, f"{i:02d}_{name}.{suffix}")
        manifest_path = os.path.join(outdir, f"{i:02d}_{name}.manifest.json")

        config_hash = _config_hash(params)
        input_hash = file_hash(current)
        manifest = st.load_manifest(manifest_path)
        if (manifest and manifest.get("config_hash") == config_hash
                and manifest.get("input_hash") == input_hash
                and os.path.exists(output_path)):
            click.echo(f"[{i:02d}] {name}: up to date, skipping")
        else:
            started = time.monotonic()
            try:
                extra = _run_stage(name, params, current, output_path, gateway, model_id)
            except ConfigurationError as exc:
                _fail_config(f"stage {name}: {exc}")
            except Exception as exc:
                _fail_runtime(f"stage {name} failed: {exc}")
            if name in _COMP_OUTPUT or name in _NO_CORPUS_OUTPUT:
                payload = {
                    "stage": name,
                    "config_hash": config_hash,
                    "input_hash": input_hash,
                    "output_hash": file_hash(output_path),
                    "docs_in": _line_count(current),
                    "docs_out": _line_count(output_path),
                    "wall_time_s": round(time.monotonic() - started, 3),
                }
                payload.update(extra)
            else:
                payload = _stage_manifest(name, params, current, output_path,
                                          started, extra,
                                          input_is_corpus=(name != "compose"))
                payload["input_hash"] = input_hash
            write_manifest(manifest_path, payload)
            click.echo(f"[{i:02d}] {name}: done")
        if name not in _NO_CORPUS_OUTPUT:
            current = output_path

    manifests = [st.load_manifest(os.path.join(outdir, f"{i:02d}_{s['name']}.manifest.json"))
                 for i, s in enumerate(config["stages"], start=1)
                 if s["name"] not in _NO_CORPUS_OUTPUT]
    report = st.retention_report([m for m in manifests if m])
    with open(os.path.join(outdir, "retention.txt"), "w", encoding="utf-8") as fh:
        fh.write(report)
    click.echo(report, nl=False)


if __name__ == "__main__":
    main()
