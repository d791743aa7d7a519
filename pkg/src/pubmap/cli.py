"""Command-line pipeline: ingest -> embed -> cluster -> project -> keywords
-> authors -> report.

Each stage reads its upstream artifacts from the output directory and
writes its own atomically, so expensive steps (embedding) are reused
across downstream experiments. `pubmap report` runs everything end to end
from a raw corpus and additionally emits the SVG plots.

Exit codes: 0 success, 1 configuration/validation problems (including a
missing upstream artifact), 2 runtime failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

import numba
import numpy as np
import scipy

from . import __version__
from .authors import (
    distance_matrix,
    distributions,
    extreme_self_distance,
    papers_per_author_histogram,
    write_distributions_csv,
    write_matrix_csv,
)
from .cluster import (
    OverridePlan,
    apply_overrides,
    kmeans,
    load_cluster_model,
    save_cluster_model,
    select_k,
)
from .config import PipelineConfig
from .corpus import (
    AuthorKey,
    FieldMapping,
    abstract_length_histogram,
    load_corpus,
    save_corpus_json,
)
from .embedding import (
    EmbeddingCache,
    MockProvider,
    RemoteProvider,
    content_hash,
    embed_corpus,
    load_embeddings,
    save_embeddings,
)
from .errors import ConfigError, PubmapError
from .keywords import extract_cluster_keywords, label_report
from .metrics import build_report, write_report_csv, write_report_json
from .projection import project, write_projection_csv
from .svgplot import emit_distribution_plot, emit_scatter_svg, write_svg


class MissingArtifactError(Exception):
    def __init__(self, path, producer):
        super().__init__(
            f"missing artifact {path}; run `pubmap {producer}` first"
        )


def _meta(config: PipelineConfig, command: str) -> dict:
    return {
        "command": command,
        "config_sha256": config.hash,
        "seed": config["seed"],
        "versions": {
            "pubmap": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "numba": numba.__version__,
        },
    }


def _meta_line(config: PipelineConfig, command: str) -> str:
    return "pubmap-meta: " + json.dumps(
        _meta(config, command), sort_keys=True, separators=(",", ":")
    )


def _out(config: PipelineConfig, name: str) -> str:
    out_dir = config["out"]
    os.makedirs(out_dir, exist_ok=True)
    return os.path.join(out_dir, name)


def _need(config: PipelineConfig, name: str, producer: str) -> str:
    path = os.path.join(config["out"], name)
    if not os.path.exists(path):
        raise MissingArtifactError(path, producer)
    return path


def _provider(config: PipelineConfig):
    p = config["provider"]
    if p["kind"] == "mock":
        return MockProvider(dim=config["dim"], seed=p["seed"])
    return RemoteProvider(
        base_url=p["url"], model_id=p["model"], dim=config["dim"],
        timeout=p["timeout"],
    )


def _load_current_corpus(config: PipelineConfig):
    path = _need(config, "corpus.json", "ingest")
    return load_corpus(path)


def cmd_ingest(config: PipelineConfig) -> int:
    raw = config["input"]
    if not raw:
        raise ConfigError("input", "no input file configured")
    if not os.path.exists(raw):
        raise ConfigError("input", f"file not found: {raw}")
    ing = config["ingest"]
    corpus = load_corpus(
        raw,
        mapping=FieldMapping.from_dict(config["field_mapping"]),
        eligible_types=frozenset(ing["eligible_types"]),
        outlier_threshold=ing["outlier_threshold"],
    )
    if len(corpus) == 0:
        raise ConfigError("input", "no records survived selection")
    histogram = abstract_length_histogram(corpus, ing["histogram_bin_width"])
    save_corpus_json(
        corpus, _out(config, "corpus.json"),
        meta=_meta(config, "ingest"),
        extras={
            "stats": dataclasses.asdict(corpus.stats),
            "abstract_length_histogram": [[s, c] for s, c in histogram],
        },
    )
    s = corpus.stats
    print(
        f"ingest: selected {s.selected}/{s.total_records} records "
        f"(no abstract: {s.dropped_no_abstract}, wrong type: {s.dropped_type}, "
        f"no authors: {s.dropped_no_authors}, outliers flagged: {s.flagged_outliers})"
    )
    return 0


def cmd_embed(config: PipelineConfig) -> int:
    corpus = _load_current_corpus(config)
    provider = _provider(config)
    cache_dir = config["cache_dir"] or os.path.join(config["out"], "cache")
    cache = EmbeddingCache(cache_dir)
    matrix = embed_corpus(corpus, provider, cache)
    hashes = [content_hash(p.abstract, provider.model_id) for p in corpus.papers]
    save_embeddings(
        matrix, _out(config, "embeddings.bin"), _out(config, "manifest.json"),
        content_hashes=hashes, meta=_meta(config, "embed"),
    )
    print(f"embed: {matrix.vectors.shape[0]} vectors, D={matrix.dim}, "
          f"model {matrix.model_id}")
    return 0


def cmd_cluster(config: PipelineConfig) -> int:
    bin_path = _need(config, "embeddings.bin", "embed")
    manifest_path = _need(config, "manifest.json", "embed")
    matrix, _ = load_embeddings(bin_path, manifest_path)
    c = config["cluster"]
    if c["k"] is not None:
        model = kmeans(matrix, c["k"], seed=config["seed"],
                       max_iter=c["max_iter"], tol=c["tol"])
    else:
        n = len(matrix.paper_ids)
        if c["k_max"] > n - 1:
            raise ConfigError(
                "cluster.k_max", f"must be <= n-1 = {n - 1} for this corpus"
            )
        model = select_k(matrix, c["k_min"], c["k_max"], seed=config["seed"],
                         max_iter=c["max_iter"], tol=c["tol"])
    plan = OverridePlan.from_dict(config["overrides"])
    model = apply_overrides(model, plan)
    save_cluster_model(model, _out(config, "clusters.json"),
                       meta=_meta(config, "cluster"))
    picked = f"k={model.k}"
    if model.selection_trace:
        best = max(s for _, s in model.selection_trace)
        picked += f" (silhouette {best:.3f} over scan)"
    print(f"cluster: {picked}, {len(model.excluded)} papers excluded by overrides")
    return 0


def cmd_project(config: PipelineConfig) -> int:
    bin_path = _need(config, "embeddings.bin", "embed")
    manifest_path = _need(config, "manifest.json", "embed")
    matrix, _ = load_embeddings(bin_path, manifest_path)
    model = load_cluster_model(_need(config, "clusters.json", "cluster"))
    pr = config["projection"]
    n = len(matrix.paper_ids)
    if pr["n_neighbors"] >= n:
        raise ConfigError("projection.n_neighbors", f"must be < n = {n}")
    proj = project(matrix, n_neighbors=pr["n_neighbors"], min_dist=pr["min_dist"],
                   epochs=pr["epochs"], seed=config["seed"], spread=pr["spread"])
    write_projection_csv(
        proj, _out(config, "projection.csv"),
        assignment=model.assignment, excluded=model.excluded_map,
        meta_line=_meta_line(config, "project"),
    )
    print(f"project: {n} points -> 2D ({pr['epochs']} epochs)")
    return 0


def cmd_keywords(config: PipelineConfig) -> int:
    corpus = _load_current_corpus(config)
    matrix, _ = load_embeddings(
        _need(config, "embeddings.bin", "embed"),
        _need(config, "manifest.json", "embed"),
    )
    model = load_cluster_model(_need(config, "clusters.json", "cluster"))
    kw = config["keywords"]
    sets = extract_cluster_keywords(
        corpus, matrix, model, _provider(config),
        max_ngram=kw["max_ngram"], top_k=kw["top_k"],
        diversity=kw["diversity"], score_mode=kw["score_mode"],
    )
    fragment = label_report(model, sets, manual_topics=config.manual_topics,
                            display_k=kw["display_k"])
    report = build_report(matrix, model, fragment=fragment)
    write_report_csv(report, _out(config, "report.csv"),
                     meta_line=_meta_line(config, "keywords"))
    write_report_json(report, _out(config, "report.json"),
                      meta=_meta(config, "keywords"))
    print(f"keywords: {model.k} clusters labeled, report written")
    return 0


def cmd_authors(config: PipelineConfig) -> int:
    corpus = _load_current_corpus(config)
    matrix, _ = load_embeddings(
        _need(config, "embeddings.bin", "embed"),
        _need(config, "manifest.json", "embed"),
    )
    a = config["authors"]
    adm = distance_matrix(corpus, matrix, min_papers=a["min_papers"],
                          include_german=a["include_german"],
                          self_mode=a["self_mode"])
    dists = distributions(corpus, matrix, min_papers=a["min_papers"],
                          include_german=a["include_german"],
                          self_mode=a["self_mode"])
    write_matrix_csv(adm, _out(config, "authors.csv"),
                     meta_line=_meta_line(config, "authors"))
    write_distributions_csv(dists, _out(config, "distributions.csv"),
                            meta_line=_meta_line(config, "authors"))
    hi = extreme_self_distance(adm, "highest")
    lo = extreme_self_distance(adm, "lowest")
    print(f"authors: {adm.n} active (>= {a['min_papers']} papers) of "
          f"{len(corpus.authors)} total; self-distance extremes: "
          f"highest {hi}, lowest {lo}")
    return 0


def cmd_report(config: PipelineConfig) -> int:
    """Run every stage, then emit the SVG plots."""
    cmd_ingest(config)
    cmd_embed(config)
    cmd_cluster(config)
    cmd_project(config)
    cmd_keywords(config)
    cmd_authors(config)

    corpus = _load_current_corpus(config)
    matrix, _ = load_embeddings(
        os.path.join(config["out"], "embeddings.bin"),
        os.path.join(config["out"], "manifest.json"),
    )
    model = load_cluster_model(os.path.join(config["out"], "clusters.json"))
    pr = config["projection"]
    proj = project(matrix, n_neighbors=pr["n_neighbors"], min_dist=pr["min_dist"],
                   epochs=pr["epochs"], seed=config["seed"], spread=pr["spread"])

    highlights = {}
    for key_text in config["report"]["highlights"]:
        key = AuthorKey.parse(key_text)
        if key not in corpus.papers_by_author:
            raise ConfigError("report.highlights", f"unknown author {key_text!r}")
        highlights[key_text] = set(corpus.papers_by_author[key])

    svg = emit_scatter_svg(proj, model.assignment, excluded=model.excluded_map,
                           highlights=highlights,
                           meta_line=_meta_line(config, "report"))
    write_svg(svg, _out(config, "scatter.svg"))

    a = config["authors"]
    dists = distributions(corpus, matrix, min_papers=a["min_papers"],
                          include_german=a["include_german"],
                          self_mode=a["self_mode"])
    svg = emit_distribution_plot(dists, bins=config["report"]["bins"],
                                 meta_line=_meta_line(config, "report"))
    write_svg(svg, _out(config, "distributions.svg"))

    hist = papers_per_author_histogram(corpus)
    print(f"report: complete; papers-per-author max count "
          f"{hist[-1][0] if hist else 0}; artifacts in {config['out']}")
    return 0


COMMANDS = {
    "ingest": cmd_ingest,
    "embed": cmd_embed,
    "cluster": cmd_cluster,
    "project": cmd_project,
    "keywords": cmd_keywords,
    "authors": cmd_authors,
    "report": cmd_report,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pubmap",
        description="Map a publication database into a topical landscape.",
    )
    parser.add_argument("--version", action="version", version=f"pubmap {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        p = sub.add_parser(name, help=fn.__doc__ or name)
        p.add_argument("--config", help="JSON config file (or set PUBMAP_CONFIG)")
        p.add_argument("--input", help="raw records file (overrides config)")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="pipeline seed (overrides config)")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config_path = args.config or os.environ.get("PUBMAP_CONFIG")
        if config_path:
            config = PipelineConfig.from_file(config_path)
        else:
            config = PipelineConfig.from_dict({})
        config = config.override(input=args.input, out=args.out, seed=args.seed)
        return COMMANDS[args.command](config)
    except (ConfigError, MissingArtifactError, FileNotFoundError) as exc:
        print(f"pubmap {args.command}: {exc}", file=sys.stderr)
        return 1
    except PubmapError as exc:
        print(f"pubmap {args.command}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"pubmap {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
