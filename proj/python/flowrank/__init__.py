"""Python API recommendation from optimistic data flow and a random-forest ranker."""

import json

from ._core import BUNDLE_VERSION, Error, flow_paths, lcs_length, mrr, sim, split_identifier, topk_accuracy
from ._core import Bundle as _Bundle
from ._core import file_edges_json as _file_edges_json

__all__ = [
    "BUNDLE_VERSION",
    "Error",
    "Model",
    "file_edges",
    "flow_paths",
    "lcs_length",
    "mrr",
    "sim",
    "split_identifier",
    "topk_accuracy",
]


def file_edges(source):
    """Data-flow edges of a complete module as dicts with src, dst, line, rule."""
    return [json.loads(e) for e in _file_edges_json(source)]


class Model:
    """A trained bundle. Build with Model.train or Model.load."""

    def __init__(self, bundle):
        self._bundle = bundle

    @classmethod
    def load(cls, path):
        return cls(_Bundle.load(str(path)))

    @classmethod
    def train(cls, projects=(), manifest=None, trees=100, seed=1, negatives=20):
        projects = [str(p) for p in projects]
        return cls(_Bundle.train(None if manifest is None else str(manifest), projects, trees, seed, negatives))

    def save(self, path):
        self._bundle.save(str(path))

    @property
    def provenance(self):
        return list(self._bundle.provenance)

    def recommend_full(self, source, line, column, k=10, project=""):
        """Full result: point, inferred type, candidates with features, timings."""
        return json.loads(self._bundle.recommend_json(source, line, column, k, project))

    def recommend(self, source, line, column, k=10, project=""):
        """(name, score) pairs, best first; score is the forest probability. line is 1-based, column is the 0-based column of the dot."""
        out = self.recommend_full(source, line, column, k, project)
        return [(c["name"], c["score"]) for c in out["candidates"]]
