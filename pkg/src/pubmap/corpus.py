"""Publication database ingestion.

Parses a JSON export of bibliographic records, keeps the ones that are
analyzable (non-empty abstract, eligible record type, at least one author),
resolves author identities, tags the abstract language, and computes basic
corpus statistics.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from datetime import date
from enum import Enum
from functools import lru_cache
from importlib import resources

from .errors import IngestError

# Records longer than this many characters are kept but flagged, so that
# pathological entries (e.g. a full paper pasted into the abstract field)
# stay visible in reports.
DEFAULT_OUTLIER_THRESHOLD = 10_000

DEFAULT_ELIGIBLE_TYPES = frozenset({"journalArticle", "conferencePaper"})

_WORD_RE = re.compile(r"[^\W\d_]+", re.UNICODE)
_WS_RE = re.compile(r"\s+")


class AuthorKind(str, Enum):
    INTERNAL = "internal"
    EXTERNAL = "external"


class Language(str, Enum):
    ENGLISH = "english"
    GERMAN = "german"
    OTHER = "other"


class SourceType(str, Enum):
    JOURNAL_ARTICLE = "journalArticle"
    CONFERENCE_PAPER = "conferencePaper"
    OTHER = "other"


@dataclass(frozen=True, order=True)
class AuthorKey:
    """Identity of an author.

    Internal authors are keyed by their lower-cased e-mail address; external
    authors by a normalized "family, given" name. Two keys denote the same
    author iff kind and key are equal. Ordering is (key, kind) so that ties
    between kinds resolve deterministically.
    """

    key: str
    kind: AuthorKind

    def __str__(self):
        return f"{self.kind.value}:{self.key}"

    @staticmethod
    def parse(text: str) -> "AuthorKey":
        kind, _, key = text.partition(":")
        return AuthorKey(key=key, kind=AuthorKind(kind))


@dataclass(frozen=True)
class PaperRecord:
    id: str
    title: str
    authors: tuple[AuthorKey, ...]
    date: date | None
    abstract: str
    language: Language
    source_type: SourceType
    outlier: bool = False

    def __post_init__(self):
        if not self.abstract:
            raise ValueError(f"paper {self.id!r}: abstract must be non-empty")
        if not self.authors:
            raise ValueError(f"paper {self.id!r}: authors must be non-empty")


@dataclass(frozen=True)
class IngestStats:
    total_records: int = 0
    selected: int = 0
    dropped_no_abstract: int = 0
    dropped_type: int = 0
    dropped_no_authors: int = 0
    flagged_outliers: int = 0


@dataclass(frozen=True)
class Corpus:
    """Immutable collection of selected papers with an author index."""

    papers: tuple[PaperRecord, ...]
    authors: frozenset[AuthorKey]
    papers_by_author: dict[AuthorKey, frozenset[str]]
    stats: IngestStats = field(default_factory=IngestStats)

    def __len__(self):
        return len(self.papers)

    def paper(self, paper_id: str) -> PaperRecord:
        return self._by_id[paper_id]

    @property
    def _by_id(self):
        cached = object.__getattribute__(self, "__dict__").get("_by_id_cache")
        if cached is None:
            cached = {p.id: p for p in self.papers}
            object.__getattribute__(self, "__dict__")["_by_id_cache"] = cached
        return cached

    @staticmethod
    def from_papers(papers, stats=None) -> "Corpus":
        papers = tuple(papers)
        seen = set()
        for p in papers:
            if p.id in seen:
                raise ValueError(f"duplicate paper id {p.id!r}")
            seen.add(p.id)
        index: dict[AuthorKey, set[str]] = {}
        for p in papers:
            for a in p.authors:
                index.setdefault(a, set()).add(p.id)
        return Corpus(
            papers=papers,
            authors=frozenset(index),
            papers_by_author={a: frozenset(ids) for a, ids in index.items()},
            stats=stats or IngestStats(),
        )


@dataclass(frozen=True)
class FieldMapping:
    """Names of the input fields in the raw export.

    Defaults are the canonical schema; override entries when ingesting an
    export that uses different field names.
    """

    id: str = "id"
    title: str = "title"
    creators: str = "creators"
    date: str = "date"
    abstract: str = "abstractText"
    item_type: str = "itemType"
    creator_name: str = "name"
    creator_email: str = "email"

    @staticmethod
    def from_dict(overrides: dict | None) -> "FieldMapping":
        if not overrides:
            return FieldMapping()
        valid = {f for f in FieldMapping.__dataclass_fields__}
        unknown = set(overrides) - valid
        if unknown:
            raise IngestError(f"unknown field mapping entries: {sorted(unknown)}")
        return FieldMapping(**overrides)


@lru_cache(maxsize=None)
def _stopwords(lang: str) -> frozenset[str]:
    text = resources.files("pubmap.data").joinpath(f"stopwords_{lang}.txt").read_text("utf-8")
    return frozenset(w.strip() for w in text.splitlines() if w.strip())


def english_stopwords() -> frozenset[str]:
    return _stopwords("en")


def german_stopwords() -> frozenset[str]:
    return _stopwords("de")


def tag_language(abstract: str) -> Language:
    """Classify an abstract as English, German, or Other.

    Pure stopword-frequency heuristic: count token hits against the two
    shipped stopword lists over lower-cased alphabetic tokens; the larger
    count wins, ties or zero hits yield Other.
    """
    tokens = _WORD_RE.findall(abstract.casefold())
    en = sum(1 for t in tokens if t in english_stopwords())
    de = sum(1 for t in tokens if t in german_stopwords())
    if en > de:
        return Language.ENGLISH
    if de > en:
        return Language.GERMAN
    return Language.OTHER


def resolve_author(raw_name: str, raw_email: str | None = None) -> AuthorKey:
    """Resolve a creator entry to an AuthorKey.

    A creator with a usable e-mail address (exactly one "@") is an internal
    author keyed by the lower-cased address. Everyone else is external,
    keyed by a whitespace-collapsed, case-folded "family, given" form of the
    name. External keys cannot distinguish two people with the same name;
    that is an accepted limitation of name-keyed identity.
    """
    if not raw_name or not raw_name.strip():
        raise ValueError("raw_name must be non-empty")
    if raw_email and raw_email.count("@") == 1:
        return AuthorKey(key=raw_email.strip().casefold(), kind=AuthorKind.INTERNAL)
    name = _WS_RE.sub(" ", raw_name.strip().casefold())
    if "," in name:
        family, _, given = name.partition(",")
        family, given = family.strip(), given.strip()
    else:
        parts = name.split(" ")
        family, given = parts[-1], " ".join(parts[:-1])
    key = f"{family}, {given}" if given else family
    return AuthorKey(key=key, kind=AuthorKind.EXTERNAL)


def _parse_date(value) -> date | None:
    # Accepts ISO dates and year-only values; anything else is kept as null
    # rather than dropping the record (dates are unused by downstream math).
    if value is None:
        return None
    text = str(value).strip()
    if not text:
        return None
    m = re.match(r"^(\d{4})-(\d{2})-(\d{2})", text)
    if m:
        try:
            return date(int(m.group(1)), int(m.group(2)), int(m.group(3)))
        except ValueError:
            return None
    m = re.match(r"^(\d{4})$", text)
    if m:
        return date(int(m.group(1)), 1, 1)
    return None


def _source_type(raw) -> SourceType:
    text = str(raw or "").strip()
    lowered = text.casefold()
    for st in (SourceType.JOURNAL_ARTICLE, SourceType.CONFERENCE_PAPER):
        if lowered == st.value.casefold():
            return st
    return SourceType.OTHER


def load_corpus(
    path,
    mapping: FieldMapping | None = None,
    eligible_types: frozenset[str] = DEFAULT_ELIGIBLE_TYPES,
    outlier_threshold: int = DEFAULT_OUTLIER_THRESHOLD,
) -> Corpus:
    """Load and filter a publication database export.

    The input is a UTF-8 JSON file holding either a top-level array of
    record objects, or an object with a "records" array (the canonical
    snapshot format written by :func:`save_corpus_json`). Only records with
    a non-empty abstract and an eligible source type survive; everything
    else is counted in the returned Corpus.stats and dropped.
    """
    mapping = mapping or FieldMapping()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise
    except json.JSONDecodeError as exc:
        raise IngestError(f"malformed JSON at line {exc.lineno}: {exc.msg}") from exc

    if isinstance(raw, dict) and "records" in raw:
        raw = raw["records"]
    if not isinstance(raw, list):
        raise IngestError("input must be a JSON array of record objects")

    eligible = {t.casefold() for t in eligible_types}
    papers = []
    n_no_abstract = n_type = n_no_authors = n_outliers = 0

    for i, rec in enumerate(raw):
        if not isinstance(rec, dict):
            raise IngestError("not a JSON object", record_index=i)
        if mapping.id not in rec:
            raise IngestError(
                f"missing field {mapping.id!r} (mapped from 'id')", record_index=i
            )
        pid = str(rec[mapping.id])

        abstract = rec.get(mapping.abstract)
        abstract = str(abstract).strip() if abstract is not None else ""
        if not abstract:
            n_no_abstract += 1
            continue

        source = _source_type(rec.get(mapping.item_type))
        if source.value.casefold() not in eligible:
            n_type += 1
            continue

        creators = rec.get(mapping.creators) or []
        authors = []
        for c in creators:
            if isinstance(c, str):
                name, email = c, None
            else:
                name = c.get(mapping.creator_name)
                email = c.get(mapping.creator_email)
            if not name or not str(name).strip():
                continue
            authors.append(resolve_author(str(name), email))
        if not authors:
            n_no_authors += 1
            continue

        outlier = len(abstract) > outlier_threshold
        if outlier:
            n_outliers += 1

        papers.append(
            PaperRecord(
                id=pid,
                title=str(rec.get(mapping.title, "")),
                authors=tuple(authors),
                date=_parse_date(rec.get(mapping.date)),
                abstract=abstract,
                language=tag_language(abstract),
                source_type=source,
                outlier=outlier,
            )
        )

    stats = IngestStats(
        total_records=len(raw),
        selected=len(papers),
        dropped_no_abstract=n_no_abstract,
        dropped_type=n_type,
        dropped_no_authors=n_no_authors,
        flagged_outliers=n_outliers,
    )
    try:
        return Corpus.from_papers(papers, stats=stats)
    except ValueError as exc:
        raise IngestError(str(exc)) from exc


def corpus_to_records(corpus: Corpus) -> list[dict]:
    """Render a corpus back to canonical record objects.

    The output is itself a valid ingest input: loading it with the default
    FieldMapping reproduces the corpus exactly (filtering is idempotent).
    """
    records = []
    for p in corpus.papers:
        creators = []
        for a in p.authors:
            if a.kind is AuthorKind.INTERNAL:
                creators.append({"name": a.key, "email": a.key})
            else:
                creators.append({"name": a.key})
        records.append(
            {
                "id": p.id,
                "title": p.title,
                "creators": creators,
                "date": p.date.isoformat() if p.date else None,
                "abstractText": p.abstract,
                "itemType": p.source_type.value,
                "language": p.language.value,
                "outlier": p.outlier,
            }
        )
    return records


def save_corpus_json(corpus: Corpus, path, meta: dict | None = None,
                     extras: dict | None = None) -> None:
    """Write the canonical corpus snapshot.

    extras (e.g. ingest stats, histograms) land at the top level beside
    "records"; loaders ignore everything but "records".
    """
    payload = {"records": corpus_to_records(corpus)}
    if extras:
        payload.update(extras)
    if meta is not None:
        payload["_meta"] = meta
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, ensure_ascii=False, indent=2, sort_keys=True)
        fh.write("\n")


def abstract_length_histogram(corpus: Corpus, bin_width: int) -> list[tuple[int, int]]:
    """Histogram of abstract character counts.

    Bins partition [0, max length] into [k*w, (k+1)*w) intervals; only
    non-empty bins are returned, sorted by bin start. Counts sum to the
    corpus size.
    """
    if bin_width < 1:
        raise ValueError("bin_width must be >= 1")
    counts: dict[int, int] = {}
    for p in corpus.papers:
        start = (len(p.abstract) // bin_width) * bin_width
        counts[start] = counts.get(start, 0) + 1
    return sorted(counts.items())
