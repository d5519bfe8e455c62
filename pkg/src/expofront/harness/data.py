"""Query instances from disk or from a seeded generator, plus the query filter."""
from __future__ import annotations

import json
import re
from collections import OrderedDict
from pathlib import Path
from typing import Iterable, NamedTuple, Optional

import numpy as np

from ..core import QueryInstance, dcg_exposure
from ..errors import MissingFeature, ParseError

_LINE = re.compile(r"^(?P<grade>[-+]?\d+(?:\.\d*)?)\s+qid:(?P<qid>\S+)(?P<rest>(?:\s+\S+)*)\s*$")


class LetorRecord(NamedTuple):
    grade: float
    qid: str
    features: dict          # feature id -> value
    comment: str = ""


def _parse_line(line: str, lineno: int) -> Optional[LetorRecord]:
    body, _, comment = line.partition("#")
    body = body.strip()
    if not body:
        return None
    m = _LINE.match(body)
    if m is None:
        raise ParseError("expected '<grade> qid:<id> <fid>:<value> ...'", lineno)
    feats = {}
    for tok in m.group("rest").split():
        fid, sep, val = tok.partition(":")
        try:
            feats[int(fid)] = float(val)
        except ValueError:
            raise ParseError(f"bad feature token {tok!r}", lineno) from None
        if not sep:
            raise ParseError(f"bad feature token {tok!r}", lineno)
    return LetorRecord(float(m.group("grade")), m.group("qid"), feats, comment.strip())


def read_letor_records(path) -> list:
    """All records of a sparse ranking file ("grade qid:<id> <fid>:<val> ... # comment")."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            rec = _parse_line(line, lineno)
            if rec is not None:
                out.append(rec)
    return out


def write_letor_records(records: Iterable[LetorRecord], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            grade = int(r.grade) if float(r.grade).is_integer() else repr(r.grade)
            feats = " ".join(f"{k}:{v!r}" for k, v in sorted(r.features.items()))
            tail = f" # {r.comment}" if r.comment else ""
            fh.write(f"{grade} qid:{r.qid} {feats}{tail}\n")


def quantile_edges(values, n_bins: int = 5) -> np.ndarray:
    """Interior bin edges splitting ``values`` into ``n_bins`` equally populated bins."""
    return np.quantile(np.asarray(values, dtype=float), np.linspace(0, 1, n_bins + 1)[1:-1])


def bin_index(value: float, edges) -> int:
    """1-based bin of ``value``; bins are ``(-inf, e1), [e1, e2), ..., [ek, inf)``."""
    return int(np.searchsorted(np.asarray(edges, dtype=float), value, side="right")) + 1


def parse_letor_file(path, group_feature: int = 132, bin_edges=None, max_grade: float = 4.0,
                     policy: str = "merit") -> list:
    """Build one instance per query id, in file order.

    Relevance is ``grade / max_grade``; the group of an item is the bin of
    its ``group_feature`` value.  Without ``bin_edges`` the corpus quintiles
    are used (five groups).  Queries without any relevant item fall back to
    size-proportional targets, since merit targets are undefined for them.
    """
    records = read_letor_records(path)
    if not records:
        return []
    for r in records:
        if group_feature not in r.features:
            raise MissingFeature(f"query {r.qid}: a document lacks feature {group_feature}")
    if bin_edges is None:
        bin_edges = quantile_edges([r.features[group_feature] for r in records])
    queries = OrderedDict()
    for r in records:
        queries.setdefault(r.qid, []).append(r)
    out = []
    for qid, recs in queries.items():
        rho = np.array([r.grade for r in recs]) / max_grade
        groups = [bin_index(r.features[group_feature], bin_edges) for r in recs]
        pol = policy if policy != "merit" or rho.sum() > 0 else "size-proportional"
        out.append(QueryInstance.create(rho, groups, dcg_exposure(len(recs)), pol, query_id=qid))
    return out


# -- instance JSON ------------------------------------------------------------------

def load_instances(path) -> list:
    """Instances from a JSON file holding a list or ``{"instances": [...]}``."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = data.get("instances", [data])
    return [QueryInstance.from_dict(d) for d in data]


def dump_instances(instances, path) -> None:
    Path(path).write_text(json.dumps({"instances": [q.to_dict() for q in instances]}, indent=1),
                          encoding="utf-8")


# -- filtering ------------------------------------------------------------------------

DROP_RULES = ("maxDocs", "singleDocument", "allEqualRelevance", "singleGroup", "oneItemPerGroup")


def _drop_reason(q: QueryInstance, max_docs: int) -> Optional[str]:
    if q.n > max_docs:
        return "maxDocs"
    if q.n == 1:
        return "singleDocument"
    if np.all(q.relevance == q.relevance[0]):
        return "allEqualRelevance"
    if q.n_groups == 1:
        return "singleGroup"
    if q.n_groups == q.n:
        return "oneItemPerGroup"
    return None


def filter_instances(instances, max_docs: int = 100):
    """Drop uninteresting queries; returns ``(kept, counts)`` with a count per rule.

    Each dropped query is charged to the first rule it breaks.
    """
    counts = dict.fromkeys(DROP_RULES, 0)
    kept = []
    for q in instances:
        why = _drop_reason(q, max_docs)
        if why is None:
            kept.append(q)
        else:
            counts[why] += 1
    return kept, counts


# -- synthetic data -------------------------------------------------------------------

SYNTHETIC_SIZES = {"Ds": (8, 20), "Dl": (5, 100)}


def gen_synthetic(kind: str, count: int, seed: int = 0, policy: str = "merit",
                  n_range: Optional[tuple] = None) -> list:
    """Seeded random instances: uniform n, relevance U[0,1], g uniform in [2, n-1].

    Every group gets one item from a random subset of g items; the other
    items are assigned uniformly.  ``n_range`` overrides the size range of
    ``kind``.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    lo, hi = n_range if n_range is not None else SYNTHETIC_SIZES[kind]
    if lo < 3:
        raise ValueError("instances need n >= 3 to allow 2 <= g <= n-1")
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        n = int(rng.integers(lo, hi + 1))
        g = int(rng.integers(2, n))
        # redrawing until no group is empty almost never succeeds when g is close to n
        groups = rng.integers(0, g, size=n)
        groups[rng.permutation(n)[:g]] = np.arange(g)
        rho = rng.random(n)
        q = QueryInstance.create(rho, groups, dcg_exposure(n), policy, query_id=f"{kind}-{len(out)}")
        if _drop_reason(q, max(hi, 100)) is None:
            out.append(q)
    return out
