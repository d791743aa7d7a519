"""Seeded synthetic fixtures: Gaussian blobs and topic-structured corpora."""

import json

import numpy as np

from pubmap.corpus import (
    AuthorKey,
    AuthorKind,
    Corpus,
    PaperRecord,
    SourceType,
    tag_language,
)

TOPIC_POOLS = (
    # power systems
    ["renewable", "photovoltaic", "electricity", "grid", "inverter", "solar",
     "wind", "turbine", "storage", "battery", "voltage", "converter",
     "transformer", "generation", "microgrid", "load", "frequency", "power",
     "energy", "substation", "distribution", "transmission", "panel", "cell"],
    # health informatics
    ["patient", "clinical", "diagnosis", "therapy", "hospital", "nursing",
     "treatment", "disease", "telemedicine", "sensor", "monitoring", "health",
     "rehabilitation", "vital", "wearable", "physician", "screening", "care",
     "dementia", "mobility", "medication", "symptom", "wellbeing", "elderly"],
    # media technology
    ["broadcast", "video", "streaming", "codec", "audio", "television",
     "compression", "rendering", "camera", "production", "journalism",
     "studio", "media", "film", "animation", "subtitle", "transcoding",
     "playback", "bitrate", "latency", "newsroom", "archive", "editing",
     "caption"],
)

GERMAN_POOL = [
    "gussteil", "werkstoff", "fertigung", "verfahren", "anlage", "prüfung",
    "messung", "oberfläche", "legierung", "bauteil", "maschine", "umformung",
    "schweissen", "giesserei", "qualität", "werkzeug", "produktion",
    "verschleiss", "härte", "beschichtung", "normung", "betrieb",
]

_EN_GLUE = ["the", "of", "and", "in", "for", "with"]
_DE_GLUE = ["der", "die", "das", "und", "mit", "von"]


def _make_text(rng, pool, n_words, glue):
    words = [pool[int(rng.integers(len(pool)))] for _ in range(n_words)]
    out = []
    for i, w in enumerate(words):
        out.append(w)
        if i % 3 == 2:
            out.append(glue[(i // 3) % len(glue)])
    return " ".join(out)


def english_text(rng, topic, n_words=40):
    return _make_text(rng, TOPIC_POOLS[topic], n_words, _EN_GLUE)


def german_text(rng, n_words=40):
    return _make_text(rng, GERMAN_POOL, n_words, _DE_GLUE)


def gaussian_blobs(seed, n_per=20, n_blobs=3, dim=16, separation=10.0, sigma=1.0):
    """Well-separated axis-aligned Gaussian blobs; returns (X, labels)."""
    rng = np.random.default_rng(seed)
    chunks, labels = [], []
    for b in range(n_blobs):
        center = np.zeros(dim)
        center[b] = separation
        chunks.append(center + rng.normal(scale=sigma, size=(n_per, dim)))
        labels.extend([b] * n_per)
    return np.vstack(chunks), np.asarray(labels)


def topic_corpus(seed, n_authors=50, solo_papers=5, words_per_paper=40):
    """Three-topic corpus for the distance-distribution fixtures.

    Author i works in topic i % 3. Each author writes solo_papers solo
    papers; authors (i, i+3) additionally share one coauthored paper, so
    every coauthor pair is within-topic. All text is English.
    """
    rng = np.random.default_rng(seed)
    author_keys = [
        AuthorKey(key=f"author{i:02d}@example.org", kind=AuthorKind.INTERNAL)
        for i in range(n_authors)
    ]
    papers = []
    pid = 0

    def add_paper(authors, topic):
        nonlocal pid
        text = english_text(rng, topic, words_per_paper)
        papers.append(PaperRecord(
            id=f"p{pid:04d}",
            title=f"study {pid}",
            authors=tuple(authors),
            date=None,
            abstract=text,
            language=tag_language(text),
            source_type=SourceType.JOURNAL_ARTICLE,
        ))
        pid += 1

    for i, ak in enumerate(author_keys):
        for _ in range(solo_papers):
            add_paper([ak], i % 3)
    for i in range(n_authors - 3):
        add_paper([author_keys[i], author_keys[i + 3]], i % 3)
    return Corpus.from_papers(papers)


def cli_records(seed, per_topic=20):
    """Raw record list for end-to-end runs: 3 topics, one of them German.

    60 selectable papers plus a few deliberately broken records that the
    ingest filter must drop. Twelve authors, four per topic, each paper
    credited to one or two same-topic authors.
    """
    rng = np.random.default_rng(seed)
    people = {
        0: [("Anna Weber", "anna.weber@example.org"),
            ("Jonas Krause", "jonas.krause@example.org"),
            ("Lea Fischer", None),
            ("Tom Berger", "tom.berger@example.org")],
        1: [("Maria Lang", "maria.lang@example.org"),
            ("Paul Vogt", None),
            ("Ida Brandt", "ida.brandt@example.org"),
            ("Finn Sommer", "finn.sommer@example.org")],
        2: [("Emma Wolf", "emma.wolf@example.org"),
            ("Max Richter", None),
            ("Nina Busch", "nina.busch@example.org"),
            ("Ole Franke", "ole.franke@example.org")],
    }
    records = []
    pid = 0
    for topic in range(3):
        for i in range(per_topic):
            if topic == 2:
                text = german_text(rng)
            else:
                text = english_text(rng, topic)
            authors = [people[topic][i % 4]]
            if i % 3 == 0:
                authors.append(people[topic][(i + 1) % 4])
            records.append({
                "id": f"rec{pid:04d}",
                "title": f"paper {pid}",
                "creators": [
                    {"name": name, **({"email": email} if email else {})}
                    for name, email in authors
                ],
                "date": f"20{14 + (pid % 9):02d}-0{1 + pid % 9}-1{pid % 10}",
                "abstractText": text,
                "itemType": "journalArticle" if i % 2 == 0 else "conferencePaper",
            })
            pid += 1
    records.append({
        "id": "bad-no-abstract", "title": "no abstract", "abstractText": "",
        "creators": [{"name": "Anna Weber"}], "itemType": "journalArticle",
    })
    records.append({
        "id": "bad-type", "title": "a book", "abstractText": "text here",
        "creators": [{"name": "Anna Weber"}], "itemType": "book",
    })
    records.append({
        "id": "bad-no-authors", "title": "orphan", "abstractText": "text here",
        "creators": [], "itemType": "journalArticle",
    })
    return records


def write_cli_fixture(tmp_path, seed=7, **config_overrides):
    """Write records + config files; returns (records_path, config_path, out_dir)."""
    records_path = tmp_path / "records.json"
    out_dir = tmp_path / "out"
    with open(records_path, "w", encoding="utf-8") as fh:
        json.dump(cli_records(seed), fh, indent=1)

    config = {
        "input": str(records_path),
        "out": str(out_dir),
        "dim": 64,
        "seed": 3,
        "provider": {"kind": "mock", "seed": 11},
        "cluster": {"k": 3},
        "projection": {"n_neighbors": 10, "epochs": 50},
        "authors": {"min_papers": 3},
        "keywords": {"max_ngram": 2, "top_k": 6, "display_k": 3},
    }
    for key, value in config_overrides.items():
        if isinstance(value, dict) and isinstance(config.get(key), dict):
            config[key].update(value)
        else:
            config[key] = value
    config_path = tmp_path / "config.json"
    with open(config_path, "w", encoding="utf-8") as fh:
        json.dump(config, fh, indent=1)
    return records_path, config_path, out_dir
