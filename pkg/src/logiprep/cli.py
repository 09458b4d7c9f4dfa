"""Command-line front end; every pipeline stage is a subcommand.

Exit codes: 0 ok, 2 config error, 3 input error, 4 invariant violation,
5 I/O error. Errors print one line to stderr: `<error-class>: <message>`.
`LOGIPREP_SEED` overrides the seed from both config file and flags.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import shutil
import sys
from dataclasses import dataclass
from pathlib import Path

from . import masker as masker_mod
from . import pos_tagger, stats, toyloss
from .curator import CategoryFilter, curate, curate_stream, passes_category
from .errors import ConfigError, InputError, LogiprepError
from .lexicon import builtin_lexicon, load_lexicon
from .masker import PolicyKind, ablation_policy
from .pipeline import PipelineComponents, PipelineSettings, run_pipeline
from .pos_tagger import PosTag
from .segmenter import (
    MAX_WORDS,
    MIN_WORDS,
    read_jsonl,
    read_plain_text,
    split_sentences,
    tokenize_words,
)
from .shards import read_shards, write_shards
from .tokenizer import OverLongEncoding, SubwordVocab, encode


# --------------------------------------------------------------------------
# config files: flat TOML-style key/value
# --------------------------------------------------------------------------

def _strip_comment(line: str) -> str:
    out = []
    in_string = False
    for ch in line:
        if ch == '"':
            in_string = not in_string
        if ch == "#" and not in_string:
            break
        out.append(ch)
    return "".join(out)


def _parse_scalar(raw: str, where: str):
    s = raw.strip()
    if len(s) >= 2 and s[0] == '"' and s[-1] == '"':
        return s[1:-1]
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        pass
    raise ConfigError(f"{where}: cannot parse value {raw.strip()!r}")


def parse_config_file(path: str | Path) -> dict:
    """Flat key = value file (strings, ints, floats, bools, arrays)."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    out: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        where = f"{path}:{lineno}"
        line = _strip_comment(raw).strip()
        if not line:
            continue
        if line.startswith("["):
            raise ConfigError(f"{where}: sections are not supported; use flat keys")
        if "=" not in line:
            raise ConfigError(f"{where}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"{where}: empty key")
        if value.startswith("[") and value.endswith("]"):
            inner = value[1:-1].strip()
            out[key] = [
                _parse_scalar(item, where) for item in _split_array(inner)
            ] if inner else []
        else:
            out[key] = _parse_scalar(value, where)
    return out


def _split_array(inner: str) -> list[str]:
    items = []
    depth_quote = False
    cur = []
    for ch in inner:
        if ch == '"':
            depth_quote = not depth_quote
        if ch == "," and not depth_quote:
            items.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    if cur:
        items.append("".join(cur))
    return [i for i in (s.strip() for s in items) if i]


# --------------------------------------------------------------------------
# run configuration for pack / inspect / curate
# --------------------------------------------------------------------------

_PACK_DEFAULTS = {
    "format": "jsonl",
    "lexicon": "builtin",
    "seed": 0,
    "workers": 1,
    "policy": "base",
    "mask_rate": 0.15,
    "action_probs": [0.8, 0.1, 0.1],
    "include_aux": False,
    "category": "both",
    "records_per_shard": 1000,
}


@dataclass
class RunConfig:
    input: str
    format: str
    lexicon: str
    tagger: str
    vocab: str
    out: str | None
    seed: int
    workers: int
    policy: str
    mask_rate: float
    action_probs: tuple[float, float, float]
    include_aux: bool
    category: str
    records_per_shard: int

    @property
    def category_filter(self) -> CategoryFilter:
        try:
            return CategoryFilter(self.category)
        except ValueError:
            raise ConfigError(f"unknown category {self.category!r}") from None

    def mask_policy(self):
        try:
            kind = PolicyKind(self.policy)
        except ValueError:
            raise ConfigError(f"unknown policy {self.policy!r}") from None
        try:
            return ablation_policy(
                kind, self.seed, self.mask_rate,
                tuple(self.action_probs), self.include_aux,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc


def resolve_run_config(args: argparse.Namespace, need_out: bool) -> RunConfig:
    merged = dict(_PACK_DEFAULTS)
    if getattr(args, "config", None):
        merged.update(parse_config_file(args.config))
    for key in ("input", "format", "lexicon", "tagger", "vocab", "out", "seed",
                "workers", "policy", "mask_rate", "include_aux", "category",
                "records_per_shard"):
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    if getattr(args, "action_probs", None) is not None:
        merged["action_probs"] = [float(x) for x in args.action_probs.split(",")]
    env_seed = os.environ.get("LOGIPREP_SEED")
    if env_seed is not None:
        try:
            merged["seed"] = int(env_seed)
        except ValueError:
            raise ConfigError(f"LOGIPREP_SEED must be an integer, got {env_seed!r}") from None

    for key in ("input", "tagger", "vocab"):
        if not merged.get(key):
            raise ConfigError(f"missing required setting `{key}`")
    if need_out and not merged.get("out"):
        raise ConfigError("missing required setting `out`")
    probs = merged["action_probs"]
    if not isinstance(probs, (list, tuple)) or len(probs) != 3:
        raise ConfigError(f"action_probs must be three numbers, got {probs!r}")

    cfg = RunConfig(
        input=str(merged["input"]),
        format=str(merged["format"]),
        lexicon=str(merged["lexicon"]),
        tagger=str(merged["tagger"]),
        vocab=str(merged["vocab"]),
        out=str(merged["out"]) if merged.get("out") else None,
        seed=int(merged["seed"]),
        workers=int(merged["workers"]),
        policy=str(merged["policy"]),
        mask_rate=float(merged["mask_rate"]),
        action_probs=tuple(float(p) for p in probs),
        include_aux=bool(merged["include_aux"]),
        category=str(merged["category"]),
        records_per_shard=int(merged["records_per_shard"]),
    )
    if cfg.format not in ("text", "jsonl"):
        raise ConfigError(f"unknown input format {cfg.format!r}")
    for label, path in (("input", cfg.input), ("tagger", cfg.tagger), ("vocab", cfg.vocab)):
        if not Path(path).exists():
            raise ConfigError(f"{label} path does not exist: {path}")
    if cfg.lexicon != "builtin" and not Path(cfg.lexicon).exists():
        raise ConfigError(f"lexicon path does not exist: {cfg.lexicon}")
    return cfg


def _read_docs(cfg: RunConfig):
    reader = read_jsonl if cfg.format == "jsonl" else read_plain_text
    return reader(cfg.input)


def _resolved_config_obj(cfg: RunConfig, vocab: SubwordVocab, policy) -> dict:
    """The reproducibility record embedded in manifest and report. Worker
    count and output path are excluded: they must not affect results."""
    return {
        "format": cfg.format,
        "lexicon": cfg.lexicon,
        "tagger": cfg.tagger,
        "vocab_sha256": vocab.sha256,
        "vocab_size": len(vocab),
        "pad_id": vocab.pad_id,
        "unk_id": vocab.unk_id,
        "cls_id": vocab.cls_id,
        "sep_id": vocab.sep_id,
        "mask_id": vocab.mask_id,
        "policy": cfg.policy,
        "policy_sha256": policy.digest(),
        "candidate_tags": sorted(t.value for t in policy.candidate_tags),
        "mask_rate": cfg.mask_rate,
        "action_probs": list(cfg.action_probs),
        "include_aux": cfg.include_aux,
        "seed": cfg.seed,
        "category": cfg.category,
        "records_per_shard": cfg.records_per_shard,
        "min_words": MIN_WORDS,
        "max_words": MAX_WORDS,
        "dedup": False,
    }


def _config_sha256(config_obj: dict) -> str:
    return hashlib.sha256(json.dumps(config_obj, sort_keys=True).encode()).hexdigest()


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def cmd_segment(args) -> int:
    if args.format not in ("text", "jsonl"):
        raise ConfigError(f"unknown input format {args.format!r}")
    if not Path(args.input).exists():
        raise ConfigError(f"input path does not exist: {args.input}")
    reader = read_jsonl if args.format == "jsonl" else read_plain_text
    emitted = 0
    for doc in reader(args.input):
        for sent in split_sentences(doc):
            print(f"{sent.doc_id}\t{sent.sent_idx}\t{sent.text}")
            emitted += 1
            if args.limit and emitted >= args.limit:
                return 0
    return 0


def cmd_tag_train(args) -> int:
    if args.epochs < 1:
        raise ConfigError(f"epochs must be >= 1, got {args.epochs}")
    model = pos_tagger.train(args.conllu, args.epochs, args.seed)
    if args.eval:
        acc = pos_tagger.evaluate(model, args.eval)
        model.metadata["dev_accuracy"] = round(acc, 6)
        print(f"dev accuracy: {acc:.4f}")
    pos_tagger.save(model, args.out)
    print(f"model saved to {args.out}")
    return 0


def cmd_tag(args) -> int:
    model = pos_tagger.load(args.model)
    if args.input:
        sentences = [ln for ln in Path(args.input).read_text(encoding="utf-8").splitlines() if ln.strip()]
    else:
        sentences = args.text
    if not sentences:
        raise ConfigError("no sentences given (pass text arguments or --input)")
    first = True
    for sent in sentences:
        if not first:
            print()
        first = False
        words = [w.form for w in tokenize_words(sent)]
        if not words:
            continue
        for word, tag in zip(words, model.tag(words)):
            print(f"{word}\t{tag.value}")
    return 0


def cmd_curate(args) -> int:
    if args.format not in ("text", "jsonl"):
        raise ConfigError(f"unknown input format {args.format!r}")
    if not Path(args.input).exists():
        raise ConfigError(f"input path does not exist: {args.input}")
    lexicon = builtin_lexicon() if args.lexicon == "builtin" else load_lexicon(args.lexicon)
    try:
        category = CategoryFilter(args.category)
    except ValueError:
        raise ConfigError(f"unknown category {args.category!r}") from None
    if args.tagger:
        model = pos_tagger.load(args.tagger)
        tags_provider = model.tag
    else:
        tags_provider = lambda words: [PosTag.X] * len(words)  # noqa: E731

    config_obj = {
        "stage": "curate",
        "format": args.format,
        "lexicon": args.lexicon,
        "category": args.category,
        "min_words": MIN_WORDS,
        "max_words": MAX_WORDS,
        "dedup": False,
    }
    report = stats.zero_report(_config_sha256(config_obj))
    reader = read_jsonl if args.format == "jsonl" else read_plain_text

    def sentences():
        for doc in reader(args.input):
            for sent in split_sentences(doc):
                if not MIN_WORDS <= len(sent.words) <= MAX_WORDS:
                    report.sentences_seen += 1
                    report.drop("length")
                    continue
                yield sent

    counters: dict = {}
    previewed = 0
    for curated in curate_stream(sentences(), tags_provider, lexicon, category, counters):
        for m in curated.matches:
            phrase = " ".join(m.entry.phrase)
            report.keyword_counts[phrase] = report.keyword_counts.get(phrase, 0) + 1
        if args.preview and previewed < args.preview:
            print(f"[{curated.label.name}] {curated.segmented.text}")
            previewed += 1
    report.sentences_seen += counters["seen"]
    report.sentences_kept = counters["kept_entailment"] + counters["kept_contradiction"]
    report.kept_entailment = counters["kept_entailment"]
    report.kept_contradiction = counters["kept_contradiction"]
    report.dropped_by_reason["no_keyword"] = counters["no_keyword"]
    report.dropped_by_reason["category_filter"] = counters["category_filtered"]
    report.check()
    if args.report:
        Path(args.report).write_text(stats.render(report, "json"), encoding="utf-8")
    sys.stdout.write(stats.render(report, "text"))
    return 0


def _prepare_out_dir(out: str) -> tuple[Path, bool]:
    out_dir = Path(out)
    created = not out_dir.exists()
    if out_dir.exists() and any(out_dir.iterdir()):
        raise ConfigError(f"output directory {out_dir} is not empty")
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir, created


def _cleanup_out_dir(out_dir: Path, created: bool) -> None:
    if created:
        shutil.rmtree(out_dir, ignore_errors=True)
    else:
        for p in out_dir.iterdir():
            p.unlink()


def cmd_pack(args) -> int:
    cfg = resolve_run_config(args, need_out=True)
    vocab = SubwordVocab.load(cfg.vocab)
    policy = cfg.mask_policy()
    config_obj = _resolved_config_obj(cfg, vocab, policy)
    settings = PipelineSettings(
        lexicon_path=None if cfg.lexicon == "builtin" else cfg.lexicon,
        tagger_path=cfg.tagger,
        vocab_path=cfg.vocab,
        policy=policy,
        category=cfg.category_filter,
        config_sha256=_config_sha256(config_obj),
    )
    out_dir, created = _prepare_out_dir(cfg.out)
    try:
        records, report = run_pipeline(_read_docs(cfg), settings, cfg.workers)
        manifest = write_shards(
            records, out_dir, cfg.records_per_shard,
            vocab_sha256=vocab.sha256,
            policy_sha256=policy.digest(),
            config=config_obj,
        )
        (out_dir / "report.json").write_text(stats.render(report, "json"), encoding="utf-8")
    except BaseException:
        _cleanup_out_dir(out_dir, created)
        raise
    sys.stdout.write(stats.render(report, "text"))
    print(f"wrote {manifest.n_records} records to {out_dir}")
    return 0


def cmd_stats(args) -> int:
    report = stats.load_report(args.report)
    sys.stdout.write(stats.render(report, args.format))
    return 0


def cmd_verify(args) -> int:
    count = 0
    for _ in read_shards(args.shards):
        count += 1
    print(f"ok: {count} records")
    return 0


def cmd_train_toy(args) -> int:
    if args.steps < 1:
        raise ConfigError(f"steps must be >= 1, got {args.steps}")
    params, curve = toyloss.train_toy(
        args.shards, args.steps, args.lr, args.seed,
        width=args.width, ecls_weight=args.ecls_weight,
    )
    toyloss.write_loss_curve(curve, args.out_csv)
    print(f"loss curve written to {args.out_csv}")
    if not args.no_fig:
        fig_path = args.out_fig or str(Path(args.out_csv).with_suffix(".png"))
        _render_loss_figure(curve, fig_path)
        print(f"loss figure written to {fig_path}")
    first, last = curve[0], curve[-1]
    print(f"total loss: step 0 = {first[3]:.4f}, step {last[0]} = {last[3]:.4f}")
    return 0


def _render_loss_figure(curve, path: str) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    steps = [row[0] for row in curve]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(steps, [row[1] for row in curve], label="masked-token loss", lw=0.8)
    ax.plot(steps, [row[2] for row in curve], label="classification loss", lw=0.8)
    ax.plot(steps, [row[3] for row in curve], label="total", lw=1.2, color="black")
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def cmd_inspect(args) -> int:
    cfg = resolve_run_config(args, need_out=False)
    comps = PipelineComponents(
        PipelineSettings(
            lexicon_path=None if cfg.lexicon == "builtin" else cfg.lexicon,
            tagger_path=cfg.tagger,
            vocab_path=cfg.vocab,
            policy=cfg.mask_policy(),
            category=cfg.category_filter,
            config_sha256="",
        )
    )
    target = None
    for doc in _read_docs(cfg):
        if doc.doc_id == args.doc_id:
            target = doc
            break
    if target is None:
        raise InputError(f"no document with id {args.doc_id}")
    sentences = split_sentences(target)
    if args.sent_idx >= len(sentences):
        raise InputError(
            f"document {args.doc_id} has {len(sentences)} sentences, asked for index {args.sent_idx}"
        )
    sent = sentences[args.sent_idx]
    words = sent.word_forms
    print(f"text : {sent.text}")
    if not MIN_WORDS <= len(words) <= MAX_WORDS:
        print(f"dropped: length ({len(words)} words outside [{MIN_WORDS}, {MAX_WORDS}])")
        return 0
    tags = comps.tagger.tag(words)
    print("words:", " ".join(words))
    print("tags :", " ".join(t.value for t in tags))
    curated = curate(sent, tags, comps.lexicon)
    if curated is None:
        print("dropped: no keyword match")
        return 0
    for m in curated.matches:
        marker = " (governing)" if m is curated.governing_match else ""
        print(f"match: {' '.join(m.entry.phrase)!r} [{m.start},{m.end}) {m.entry.polarity.name}{marker}")
    print(f"label: {curated.label.name} ({curated.label_source.value})")
    if not passes_category(curated, comps.category):
        print(f"dropped: category filter ({comps.category.value})")
        return 0
    try:
        encoded = encode(comps.vocab, words)
    except OverLongEncoding as exc:
        print(f"dropped: over-length encoding ({exc.n_subwords} subwords)")
        return 0
    mplan = masker_mod.plan(curated, encoded, comps.policy, comps.vocab)
    if mplan is None:
        print("dropped: no maskable candidate words")
        return 0
    chosen = ", ".join(
        f"{words[w]!r}@{w}:{mplan.action_kind(w).value}" for w in mplan.selected_words
    )
    print(f"plan : {chosen}")
    record = masker_mod.apply_plan(curated, encoded, mplan, comps.vocab)
    print(f"record: ids={list(record.input_ids)}")
    print(f"        tgt={list(record.mlm_targets)}")
    print(f"        cls={record.cls_label} kwm={int(record.keyword_masked)}")
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _add_run_config_flags(p: argparse.ArgumentParser, with_out: bool) -> None:
    p.add_argument("--config", help="flat TOML-style config file")
    p.add_argument("--input")
    p.add_argument("--format", choices=("text", "jsonl"))
    p.add_argument("--lexicon", help="'builtin' or a lexicon file path")
    p.add_argument("--tagger", help="tagger model file")
    p.add_argument("--vocab", help="wordpiece vocab file")
    if with_out:
        p.add_argument("--out", help="output shard directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--policy", choices=tuple(k.value for k in PolicyKind))
    p.add_argument("--mask-rate", dest="mask_rate", type=float)
    p.add_argument("--action-probs", dest="action_probs",
                   help="mask,random,keep probabilities, e.g. 0.8,0.1,0.1")
    p.add_argument("--include-aux", dest="include_aux",
                   action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--category", choices=tuple(c.value for c in CategoryFilter))
    p.add_argument("--records-per-shard", dest="records_per_shard", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="logiprep",
        description="Keyword-filtered corpus curation and selective-masking pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="preview the sentence stream of a corpus")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("text", "jsonl"), default="jsonl")
    p.add_argument("--limit", type=int, default=0)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("tag-train", help="train the averaged-perceptron tagger")
    p.add_argument("--conllu", required=True)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--eval", help="held-out CoNLL-U file to report accuracy on")
    p.set_defaults(func=cmd_tag_train)

    p = sub.add_parser("tag", help="tag sentences with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", help="file with one sentence per line")
    p.add_argument("text", nargs="*")
    p.set_defaults(func=cmd_tag)

    p = sub.add_parser("curate", help="run the filter/label stage and report counts")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=("text", "jsonl"), default="jsonl")
    p.add_argument("--lexicon", default="builtin")
    p.add_argument("--category", choices=tuple(c.value for c in CategoryFilter),
                   default="both")
    p.add_argument("--tagger", help="optional tagger model (tags are not needed for labels)")
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--preview", type=int, default=0)
    p.set_defaults(func=cmd_curate)

    p = sub.add_parser("pack", help="full pipeline: corpus -> shards + report")
    _add_run_config_flags(p, with_out=True)
    p.set_defaults(func=cmd_pack)

    p = sub.add_parser("stats", help="re-render a report")
    p.add_argument("--report", required=True)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("verify", help="re-validate shard invariants")
    p.add_argument("--shards", required=True)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("train-toy", help="gradient-descent reference run on shards")
    p.add_argument("--shards", required=True)
    p.add_argument("--steps", type=int, default=2000)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--width", type=int, default=16)
    p.add_argument("--ecls-weight", dest="ecls_weight", type=float, default=1.0)
    p.add_argument("--out-csv", dest="out_csv", required=True)
    p.add_argument("--out-fig", dest="out_fig")
    p.add_argument("--no-fig", dest="no_fig", action="store_true")
    p.set_defaults(func=cmd_train_toy)

    p = sub.add_parser("inspect", help="trace one sentence through every stage")
    p.add_argument("doc_id", type=int)
    p.add_argument("sent_idx", type=int)
    _add_run_config_flags(p, with_out=False)
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except LogiprepError as exc:
        print(f"{exc.error_class}: {exc}", file=sys.stderr)
        return exc.exit_code
    except ValueError as exc:
        print(f"config-error: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    except OSError as exc:
        print(f"io-error: {exc}", file=sys.stderr)
        return 5
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal-error: {exc!r}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
