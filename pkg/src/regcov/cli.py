"""Command-line pipeline: ingest -> sample -> judge -> validate -> analyze -> report.

Exit codes: 0 success, 1 input or configuration error, 2 some judge calls
failed (the errors file is non-empty).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from . import analysis, corpus, sampler, validation
from .errors import ConfigError, ParseError, RegcovError
from .judge import (
    API_KEY_ENV,
    Classification,
    HttpBackend,
    JudgeConfig,
    MockBackend,
    classify_batch,
    read_enriched,
    write_enriched,
)
from .jsonl import write_file
from .taxonomy import Kind, load_risk_map

log = logging.getLogger("regcov")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_PARTIAL = 2


@dataclass
class PipelineConfig:
    sources: list[dict[str, Any]] = field(default_factory=list)
    judge: dict[str, Any] = field(default_factory=dict)
    mock_rules: dict[str, Any] = field(default_factory=dict)
    sampling: dict[str, Any] = field(default_factory=dict)
    analysis: dict[str, Any] = field(default_factory=dict)
    corpus: str | None = None
    gold: str | None = None
    out: str = "out"
    base: Path = Path(".")

    @classmethod
    def load(cls, path: str | Path | None) -> "PipelineConfig":
        if path is None:
            return cls()
        path = Path(path)
        try:
            data = json.loads(path.read_text("utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        known = set(cls.__dataclass_fields__) - {"base"}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"{path}: unknown config keys {sorted(unknown)}")
        cfg = cls(**data, base=path.resolve().parent)
        names = [s.get("benchmark") for s in cfg.sources]
        if len(names) != len(set(names)):
            raise ConfigError(f"{path}: benchmark names must be unique")
        return cfg

    def path(self, p: str | Path) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base / p

    def to_json(self) -> dict[str, Any]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__ if k != "base"}


def _out_dir(args, cfg: PipelineConfig) -> Path:
    out = Path(args.out) if args.out else cfg.path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _corpus_path(args, cfg: PipelineConfig, out: Path) -> Path:
    if getattr(args, "corpus", None):
        return Path(args.corpus)
    if cfg.corpus:
        return cfg.path(cfg.corpus)
    return out / "corpus.jsonl"


def _read(reader, path: Path):
    try:
        return reader(path)
    except FileNotFoundError:
        raise ConfigError(f"file not found: {path}") from None
    except (ParseError, RegcovError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _dump_json(path: Path, obj: Any) -> None:
    path.write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_ingest(args, cfg: PipelineConfig) -> int:
    out = _out_dir(args, cfg)
    if not cfg.sources:
        raise ConfigError("config lists no sources to ingest")
    records: list[corpus.QuestionRecord] = []
    for src in cfg.sources:
        path = cfg.path(src["path"])
        desc = src.get("descriptor")
        if src.get("descriptor_path"):
            desc = corpus.load_descriptor(cfg.path(src["descriptor_path"]))
        try:
            records.extend(corpus.ingest(src["benchmark"], src.get("adapter", "jsonl"), path, desc))
        except (RegcovError, ValueError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    try:
        data = corpus.save_corpus(records)
    except RegcovError as exc:
        raise ConfigError(f"combined corpus: {exc}") from exc
    target = _corpus_path(args, cfg, out)
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_bytes(data)
    stats = corpus.corpus_stats(records)
    for b, n in stats.counts.items():
        print(f"{b}\t{n}\t{100 * stats.fractions[b]:.2f}%")
    print(f"total\t{stats.total}\t100.00%")
    print(f"wrote {target}", file=sys.stderr)
    return EXIT_OK


def cmd_sample(args, cfg: PipelineConfig) -> int:
    out = _out_dir(args, cfg)
    s = cfg.sampling
    budget = args.budget if args.budget is not None else s.get("budget", 600)
    min_per = args.min_per_stratum if args.min_per_stratum is not None else s.get("min_per_stratum", 30)
    seed = args.seed if args.seed is not None else s.get("seed", 0)
    records = _read(corpus.read_corpus, _corpus_path(args, cfg, out))
    alloc = sampler.allocate(sampler.strata_sizes(records), budget, min_per)
    sample = sampler.draw(records, alloc, seed)
    corpus.write_corpus(out / "sample.jsonl", sample.records)
    (out / "sample_allocation.json").write_text(sample.sidecar(), encoding="utf-8")
    for b, n in alloc.targets.items():
        print(f"{b}\t{alloc.proportional.get(b, 0)}\t{n}")
    print(f"total\t{sum(alloc.proportional.values())}\t{alloc.total}")
    return EXIT_OK


def _judge_config(args, cfg: PipelineConfig, out: Path, live: bool) -> JudgeConfig:
    data = dict(cfg.judge)
    data.setdefault("model_id", "mock-keyword-judge" if not live else "")
    if data.get("cache_dir") is not None:
        data["cache_dir"] = str(cfg.path(data["cache_dir"]))
    else:
        data["cache_dir"] = str(out / "cache")
    data["reuse_cache"] = bool(args.resume)
    if not live:
        # the mock answers instantly; throttling it only slows tests down
        data.setdefault("rate_limit", 1e6)
    return JudgeConfig.from_json(data)


def _mock_rules(cfg: PipelineConfig) -> dict[str, Any]:
    rules = cfg.mock_rules
    if isinstance(rules, str):
        rules = json.loads(cfg.path(rules).read_text("utf-8"))
    return rules


def cmd_judge(args, cfg: PipelineConfig, backend=None) -> int:
    out = _out_dir(args, cfg)
    if args.live and backend is None and not os.environ.get(API_KEY_ENV):
        raise ConfigError(f"--live needs an API key in ${API_KEY_ENV}")
    jc = _judge_config(args, cfg, out, args.live)
    if backend is None:
        if args.live:
            backend = HttpBackend(jc.endpoint, jc.model_id, timeout=jc.request_timeout, decoding=jc.decoding)
        else:
            backend = MockBackend(_mock_rules(cfg))
    records = _read(corpus.read_corpus, _corpus_path(args, cfg, out))

    def progress(ev):
        if ev.done % 100 == 0 or ev.done == ev.total:
            print(f"[{ev.done}/{ev.total}] {ev.elapsed:.1f}s", file=sys.stderr)

    result = classify_batch(records, backend, jc, on_progress=progress)
    write_enriched(out / "classifications.jsonl", result.classifications)
    write_file(out / "judge_errors.jsonl", [e.to_json() for e in result.errors])
    print(f"classified {len(result.classifications)} / {len(records)}; errors {len(result.errors)}")
    return EXIT_PARTIAL if result.errors else EXIT_OK


def cmd_validate(args, cfg: PipelineConfig) -> int:
    out = _out_dir(args, cfg)
    cls_path = Path(args.classifications) if args.classifications else out / "classifications.jsonl"
    gold_path = Path(args.gold) if args.gold else (cfg.path(cfg.gold) if cfg.gold else None)
    if gold_path is None:
        raise ConfigError("no gold annotation file given (--gold or config 'gold')")
    annotations = _read(validation.read_gold, gold_path)
    gold, review = validation.build_gold(annotations)
    by_model: dict[str, dict[str, Classification]] = defaultdict(dict)
    for c in _read(read_enriched, cls_path):
        by_model[c.model_id][c.question_id] = c
    if not by_model:
        raise ConfigError(f"{cls_path}: no classifications")

    reports = []
    missing_any = False
    for model in sorted(by_model):
        preds = by_model[model]
        missing = sorted(q for q in gold if q not in preds)
        if missing:
            missing_any = True
            print(f"error: model {model} has no prediction for: {', '.join(missing)}", file=sys.stderr)
            continue
        reports.append(validation.evaluate(preds, gold, model))
    if missing_any:
        return EXIT_INPUT

    try:
        agreement = validation.interrater_agreement(annotations, overlap_only=False)
    except RegcovError:
        agreement = {}
    payload = {
        "reports": [r.to_json() for r in reports],
        "interrater_agreement": [
            {"annotators": list(pair), **{("capabilities" if k is Kind.CAPABILITY else "propensities"): v
                                          for k, v in ks.items()}}
            for pair, ks in agreement.items()
        ],
        "needs_review": [{"question_id": r.question_id, "tied": [str(c) for c in sorted(r.tied)]}
                         for r in review],
        "metadata": {"averaging": "micro", "gold": str(gold_path), "classifications": str(cls_path),
                     "config": cfg.to_json()},
    }
    _dump_json(out / "metrics.json", payload)
    md = validation.metrics_markdown(reports)
    (out / "metrics.md").write_text(md, encoding="utf-8")
    sys.stdout.write(md)
    for r in reports:
        print(f"{r.model_id}: capabilities kappa {r.capabilities.kappa:.2f} ({r.capabilities.kappa_band}), "
              f"propensities kappa {r.propensities.kappa:.2f} ({r.propensities.kappa_band})")
    return EXIT_OK


def cmd_analyze(args, cfg: PipelineConfig) -> int:
    out = _out_dir(args, cfg)
    mode = args.denominator or cfg.analysis.get("denominator_mode", "labeled_questions")
    risk_map = None
    if cfg.analysis.get("risk_map"):
        risk_map = load_risk_map(cfg.path(cfg.analysis["risk_map"]))
    meta = {"config": cfg.to_json()}

    if args.fixture:
        fx = analysis.load_fixture(None if args.fixture == "builtin" else args.fixture)
        report = analysis.analyze_fixture(fx, denominator_mode=mode, risk_map=risk_map)
        report.metadata.update(meta)
    else:
        cls_path = Path(args.classifications) if args.classifications else out / "classifications.jsonl"
        classifications = _read(read_enriched, cls_path)
        corpus_path = _corpus_path(args, cfg, out)
        if corpus_path.exists():
            sizes = corpus.corpus_stats(_read(corpus.read_corpus, corpus_path)).counts
        else:
            sizes = defaultdict(int)
            for c in classifications:
                sizes[c.benchmark] += 1
        sizes = {b: sizes[b] for b in sorted(sizes)}
        matrix = analysis.aggregate(classifications, sizes)
        report = analysis.analyze(matrix, denominator_mode=mode, risk_map=risk_map, metadata=meta)

    _dump_json(out / "analysis.json", report.to_json())
    (out / "capability_matrix.csv").write_text(analysis.matrix_csv(report.matrix, Kind.CAPABILITY), "utf-8")
    (out / "propensity_matrix.csv").write_text(analysis.matrix_csv(report.matrix, Kind.PROPENSITY), "utf-8")
    _dump_json(out / "heatmap.json", report.heatmap())
    md = "## Coverage tiers\n\n" + analysis.tier_markdown(analysis.tier_table(report.totals, report.avg_normalized))
    md += "\n## Systemic risk coverage\n\n" + analysis.risk_markdown(report.risk)
    (out / "analysis.md").write_text(md, encoding="utf-8")

    for t, codes in report.tiers.items():
        print(f"{t}: {' '.join(codes)}")
    for r in report.risk:
        print(f"{r.risk.display_name}\t{r.question_sum}\t{r.coverage_pct:.1f}%")
    return EXIT_OK


def cmd_report(args, cfg: PipelineConfig) -> int:
    out = _out_dir(args, cfg)
    parts = ["# Coverage report\n"]
    corpus_path = _corpus_path(args, cfg, out)
    if corpus_path.exists():
        stats = corpus.corpus_stats(_read(corpus.read_corpus, corpus_path))
        parts.append("## Corpus\n\n| Benchmark | Questions | Share |\n|---|---:|---:|")
        parts += [f"| {b} | {n:,} | {100 * stats.fractions[b]:.2f}% |" for b, n in stats.counts.items()]
        parts.append(f"| Total | {stats.total:,} | 100% |\n")
    if (out / "metrics.md").exists():
        parts.append("## Judge validation\n\n" + (out / "metrics.md").read_text("utf-8"))
    if (out / "analysis.md").exists():
        parts.append((out / "analysis.md").read_text("utf-8"))
    if len(parts) == 1:
        raise ConfigError(f"nothing to report in {out}; run analyze or validate first")
    text = "\n".join(parts)
    (out / "report.md").write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON")
    common.add_argument("--out", help="output directory (overrides config)")
    common.add_argument("--corpus", help="normalized corpus JSONL (default <out>/corpus.jsonl)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="regcov", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("ingest", parents=[common], help="normalize raw benchmark files into one corpus")

    sp = sub.add_parser("sample", parents=[common], help="draw the stratified gold-standard sample")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--budget", type=int)
    sp.add_argument("--min-per-stratum", type=int)

    jp = sub.add_parser("judge", parents=[common], help="classify every corpus question")
    mode = jp.add_mutually_exclusive_group()
    mode.add_argument("--mock", dest="live", action="store_false", help="keyword mock judge (default)")
    mode.add_argument("--live", dest="live", action="store_true", help="HTTP judge; needs $REGCOV_API_KEY")
    jp.add_argument("--resume", action="store_true", help="reuse cached judge replies")
    jp.set_defaults(live=False)

    vp = sub.add_parser("validate", parents=[common], help="score judge output against gold annotations")
    vp.add_argument("--classifications")
    vp.add_argument("--gold")

    ap = sub.add_parser("analyze", parents=[common], help="coverage matrices, tiers and risk coverage")
    ap.add_argument("--classifications")
    ap.add_argument("--fixture", nargs="?", const="builtin",
                    help="analyse bundled reference counts instead (bundled copy unless a path is given)")
    ap.add_argument("--denominator", choices=["labeled", "all"])

    sub.add_parser("report", parents=[common], help="combine corpus, validation and analysis into report.md")
    return p


COMMANDS = {
    "ingest": cmd_ingest,
    "sample": cmd_sample,
    "judge": cmd_judge,
    "validate": cmd_validate,
    "analyze": cmd_analyze,
    "report": cmd_report,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = PipelineConfig.load(args.config)
        return COMMANDS[args.command](args, cfg)
    except ParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (RegcovError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
