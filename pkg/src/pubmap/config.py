"""Pipeline configuration: one JSON file, explicit defaults, strict keys.

Flags given on the command line override file values; the file may also be
named through the PUBMAP_CONFIG environment variable. The sha256 of the
fully resolved configuration is embedded in every artifact so outputs are
traceable to the exact settings that produced them.
"""

from __future__ import annotations

import copy
import hashlib
import json

from .authors import SELF_MODES
from .errors import ConfigError
from .keywords import SCORE_MODES

DEFAULTS: dict = {
    "input": None,
    "out": "out",
    "field_mapping": {},
    "dim": 768,
    "seed": 0,
    "cache_dir": None,
    "provider": {
        "kind": "mock",
        "seed": 0,
        "url": None,
        "model": None,
        "timeout": 120.0,
    },
    "ingest": {
        "eligible_types": ["journalArticle", "conferencePaper"],
        "outlier_threshold": 10000,
        "histogram_bin_width": 100,
    },
    "cluster": {
        "k": None,
        "k_min": 2,
        "k_max": 30,
        "max_iter": 300,
        "tol": 1e-6,
    },
    "overrides": {"merges": [], "excludes": []},
    "projection": {
        "n_neighbors": 15,
        "min_dist": 0.1,
        "epochs": 200,
        "spread": 1.0,
    },
    "authors": {
        "min_papers": 10,
        "include_german": False,
        "self_mode": "inclusive",
    },
    "keywords": {
        "max_ngram": 2,
        "top_k": 10,
        "diversity": 0.5,
        "display_k": 3,
        "score_mode": "centroid",
    },
    "report": {
        "manual_topics": {},
        "bins": 40,
        "highlights": [],
    },
}

# Sections whose inner keys are free-form and skip unknown-key checking.
_OPEN_SECTIONS = {"field_mapping", "report.manual_topics"}


def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if path in _OPEN_SECTIONS:
            out[key] = copy.deepcopy(value)
            continue
        if key not in base:
            raise ConfigError(here, "unknown configuration key")
        if isinstance(base[key], dict) and here not in _OPEN_SECTIONS:
            if not isinstance(value, dict):
                raise ConfigError(here, "expected an object")
            out[key] = _merge(base[key], value, here)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _require(cond: bool, field: str, msg: str) -> None:
    if not cond:
        raise ConfigError(field, msg)


class PipelineConfig:
    """Resolved configuration tree with validation and a stable hash."""

    def __init__(self, data: dict):
        self.data = data
        self.validate()

    @staticmethod
    def from_dict(raw: dict | None) -> "PipelineConfig":
        return PipelineConfig(_merge(DEFAULTS, raw or {}))

    @staticmethod
    def from_file(path) -> "PipelineConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"{path}: invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config", f"{path}: top level must be an object")
        return PipelineConfig.from_dict(raw)

    def override(self, **kwargs) -> "PipelineConfig":
        """Return a copy with top-level values replaced (flags win)."""
        data = copy.deepcopy(self.data)
        for key, value in kwargs.items():
            if value is not None:
                data[key] = value
        return PipelineConfig(data)

    def validate(self) -> None:
        d = self.data
        _require(isinstance(d["dim"], int) and d["dim"] >= 2, "dim", "must be an integer >= 2")
        _require(isinstance(d["seed"], int), "seed", "must be an integer")

        p = d["provider"]
        _require(p["kind"] in ("mock", "remote"), "provider.kind", "must be 'mock' or 'remote'")
        _require(isinstance(p["seed"], int), "provider.seed", "must be an integer")
        if p["kind"] == "remote":
            _require(bool(p["url"]), "provider.url", "required for the remote provider")
            _require(bool(p["model"]), "provider.model", "required for the remote provider")

        i = d["ingest"]
        _require(i["outlier_threshold"] >= 1, "ingest.outlier_threshold", "must be >= 1")
        _require(i["histogram_bin_width"] >= 1, "ingest.histogram_bin_width", "must be >= 1")
        _require(bool(i["eligible_types"]), "ingest.eligible_types", "must be non-empty")

        c = d["cluster"]
        if c["k"] is not None:
            _require(isinstance(c["k"], int) and c["k"] >= 1, "cluster.k", "must be an integer >= 1")
        else:
            _require(2 <= c["k_min"] <= c["k_max"], "cluster.k_min",
                     "scan range must satisfy 2 <= k_min <= k_max")
        _require(c["max_iter"] >= 1, "cluster.max_iter", "must be >= 1")
        _require(c["tol"] > 0, "cluster.tol", "must be > 0")

        o = d["overrides"]
        _require(isinstance(o.get("merges", []), list), "overrides.merges", "must be a list")
        _require(isinstance(o.get("excludes", []), list), "overrides.excludes", "must be a list")

        pr = d["projection"]
        _require(pr["n_neighbors"] >= 1, "projection.n_neighbors", "must be >= 1")
        _require(pr["min_dist"] > 0, "projection.min_dist", "must be > 0")
        _require(pr["epochs"] >= 0, "projection.epochs", "must be >= 0")
        _require(pr["spread"] > 0, "projection.spread", "must be > 0")

        a = d["authors"]
        _require(a["min_papers"] >= 1, "authors.min_papers", "must be >= 1")
        _require(a["self_mode"] in SELF_MODES, "authors.self_mode",
                 f"must be one of {SELF_MODES}")

        k = d["keywords"]
        _require(k["max_ngram"] in (1, 2, 3), "keywords.max_ngram", "must be 1, 2, or 3")
        _require(k["top_k"] >= 1, "keywords.top_k", "must be >= 1")
        _require(0.0 <= k["diversity"] <= 1.0, "keywords.diversity", "must be in [0, 1]")
        _require(k["display_k"] >= 0, "keywords.display_k", "must be >= 0")
        _require(k["score_mode"] in SCORE_MODES, "keywords.score_mode",
                 f"must be one of {SCORE_MODES}")

        r = d["report"]
        _require(r["bins"] >= 1, "report.bins", "must be >= 1")
        _require(isinstance(r["highlights"], list), "report.highlights", "must be a list")
        for key in r["manual_topics"]:
            _require(str(key).lstrip("-").isdigit(), "report.manual_topics",
                     f"keys must be cluster labels, got {key!r}")

    def __getitem__(self, key):
        return self.data[key]

    @property
    def hash(self) -> str:
        canonical = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @property
    def manual_topics(self) -> dict[int, str]:
        return {int(k): str(v) for k, v in self.data["report"]["manual_topics"].items()}
