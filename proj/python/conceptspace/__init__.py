"""Python access to the concept-space refinement engine.

Heavy results cross the boundary as JSON and are decoded here.
"""
import json

from . import _conceptspace
from ._conceptspace import Error, effective_neighborhood, rmsstd, s_dbw, spike

__all__ = ["Error", "Session", "default_config", "effective_neighborhood", "error_kind", "rmsstd", "s_dbw", "spike"]


def default_config():
    return json.loads(_conceptspace.default_config())


def error_kind(exc):
    """The kind prefix of an Error message, e.g. "ForbiddenAction"."""
    return str(exc).split(":", 1)[0]


class Session:
    def __init__(self, corpus=None, embeddings=None, config=None, *, documents=None, vectors=None, _native=None):
        if _native is not None:
            self._s = _native
            return
        config = config or {}
        if corpus is not None and embeddings is not None:
            self._s = _conceptspace.Session(str(corpus), str(embeddings), json.dumps(config))
            return
        request = {"config": config}
        if corpus is not None:
            request["corpus"] = str(corpus)
        else:
            request["documents"] = [d if isinstance(d, dict) else {"id": f"d{i}", "text": d} for i, d in enumerate(documents or [])]
        if embeddings is not None:
            request["embeddings"] = str(embeddings)
        else:
            request["vectors"] = {w: list(map(float, v)) for w, v in (vectors or {}).items()}
        self._s = _conceptspace.Session.from_request(json.dumps(request))

    @classmethod
    def load(cls, path):
        return cls(_native=_conceptspace.Session.load(str(path)))

    generation = property(lambda self: self._s.generation)
    hierarchy_hash = property(lambda self: self._s.hierarchy_hash)
    topic_hash = property(lambda self: self._s.topic_hash)

    @property
    def level(self):
        return self._s.level

    @level.setter
    def level(self, value):
        self._s.level = value

    def state(self, view="concept"):
        return json.loads(self._s.state(view))

    def hierarchy(self):
        return json.loads(self._s.export("hierarchy"))

    def apply(self, kind, targets, destination=None):
        action = {"kind": kind, "targets": list(targets)}
        if destination is not None:
            action["destination"] = destination
        return json.loads(self._s.apply(json.dumps(action)))

    def recommendations(self):
        return json.loads(self._s.recommendations())

    def accept(self, index=0):
        return json.loads(self._s.accept(index))

    def reject(self, index=0):
        return json.loads(self._s.reject(index))

    def recompute(self, kind, wait=True):
        self._s.recompute(kind)
        if wait:
            self._s.wait()
        return self.job()

    def job(self):
        return json.loads(self._s.job())

    def quality(self):
        return json.loads(self._s.quality())

    def search(self, q, limit=20):
        return json.loads(self._s.search(q, limit))

    def xray(self, x, y, r=5.0):
        return json.loads(self._s.xray(x, y, r))

    def export(self, kind):
        return json.loads(self._s.export(kind))

    def save(self, path):
        self._s.save(str(path))

    def replay_matches(self):
        return self._s.replay_matches()
