"""Problem files and the bundled corpus.

A problem file is JSON with keys ``name``, ``n``, ``objectives`` (list of
serialized scalar functions), ``feasible_set``, ``tags``, ``x0`` and
optionally ``known_critical_points`` (``[{"point": [...], "note": "..."}]``)
and ``description``.
"""

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .convexset import set_from_dict
from .funcspace import VectorFunction

__all__ = ["Problem", "ProblemParseError", "load_problem", "corpus_dir", "corpus_names",
           "resolve_problem", "file_sha256", "CORPUS_ENV", "ALLOWED_TAGS"]

CORPUS_ENV = "PARETOPROX_CORPUS"
ALLOWED_TAGS = {"convex", "pseudoconvex", "nonconvex", "lipschitz"}


class ProblemParseError(ValueError):
    pass


@dataclass
class Problem:
    name: str
    F: VectorFunction
    S: object
    x0: np.ndarray
    tags: list = field(default_factory=list)
    known_critical_points: list = field(default_factory=list)
    description: str = ""

    @property
    def n(self):
        return self.F.n

    def to_dict(self):
        d = {
            "name": self.name,
            "n": self.n,
            "objectives": self.F.to_dict(),
            "feasible_set": self.S.to_dict(),
            "tags": list(self.tags),
            "x0": np.asarray(self.x0, dtype=float).tolist(),
            "known_critical_points": [
                {"point": np.asarray(k["point"], dtype=float).tolist(), "note": k.get("note", "")}
                for k in self.known_critical_points],
        }
        if self.description:
            d["description"] = self.description
        return d

    @classmethod
    def from_dict(cls, d):
        try:
            F = VectorFunction.from_dict(d["objectives"])
            S = set_from_dict(d["feasible_set"])
            x0 = np.atleast_1d(np.asarray(d["x0"], dtype=float))
            name = str(d["name"])
            n = int(d["n"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProblemParseError(f"invalid problem file: {exc}") from exc
        if F.n != n or S.n != n or x0.size != n:
            raise ProblemParseError("dimension mismatch between n, objectives, set and x0")
        tags = list(d.get("tags", []))
        unknown = set(tags) - ALLOWED_TAGS
        if unknown:
            raise ProblemParseError(f"unknown tags {sorted(unknown)}")
        if S.distance(x0) > 1e-8:
            raise ProblemParseError("x0 is not feasible")
        known = [{"point": np.atleast_1d(np.asarray(k["point"], dtype=float)),
                  "note": k.get("note", "")} for k in d.get("known_critical_points", [])]
        return cls(name, F, S, x0, tags, known, d.get("description", ""))

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"


def corpus_dir():
    env = os.environ.get(CORPUS_ENV)
    return Path(env) if env else Path(__file__).with_name("corpus")


def corpus_names():
    return sorted(p.stem for p in corpus_dir().glob("*.json"))


def resolve_problem(ref):
    """Path of a problem given a file path or a corpus name such as ``"P2"``."""
    p = Path(ref)
    if p.is_file():
        return p
    cand = corpus_dir() / f"{ref}.json"
    if cand.is_file():
        return cand
    raise FileNotFoundError(f"no problem file or corpus entry named {ref!r}")


def load_problem(ref):
    path = resolve_problem(ref)
    try:
        d = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ProblemParseError(f"{path}: {exc}") from exc
    if not isinstance(d, dict):
        raise ProblemParseError(f"{path}: top level must be an object")
    return Problem.from_dict(d)


def file_sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
