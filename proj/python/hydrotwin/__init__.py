"""Python access to the hydrotwin core.

Every function takes and returns plain Python values; the native module
exchanges JSON text underneath.
"""

import json

from . import _core
from ._core import HydrotwinError, true_energy, true_quality

__all__ = [
    "HydrotwinError",
    "Service",
    "default_config",
    "evaluate",
    "oracle_model",
    "parse_historian",
    "plan",
    "select_operating_point",
    "simulate",
    "solve",
    "train",
    "true_energy",
    "true_quality",
]


def _text(value):
    if value is None:
        return ""
    return value if isinstance(value, str) else json.dumps(value)


def default_config():
    return json.loads(_core.default_config())


def oracle_model():
    """The noise-free plant formulas, usable wherever a trained model is."""
    return json.loads(_core.oracle_model())


def simulate(steps, seed, config=None, start=None):
    """Synthetic historian and weather CSV text for `steps` steps."""
    out = json.loads(_core.simulate(_text(config), steps, seed, start or ""))
    return out["historian_csv"], out["weather_csv"]


def train(historian_csv, config=None):
    return json.loads(_core.train(historian_csv, _text(config)))


def plan(historian_csv, weather_csv, model, config=None):
    return json.loads(_core.plan(historian_csv, weather_csv or "", _text(model), _text(config)))


def evaluate(episodes, steps=96, config=None, model=None):
    return json.loads(_core.evaluate(_text(config), episodes, steps, _text(model)))


def select_operating_point(model, grid=None, policy=None):
    return json.loads(_core.select_operating_point(_text(model), _text(grid), _text(policy)))


def solve(problem, exhaustive=False):
    return json.loads(_core.solve(_text(problem), exhaustive))


def parse_historian(text):
    return json.loads(_core.parse_historian(text))


class Service:
    """In-process twin service with the same operations as the HTTP API."""

    def __init__(self, config=None):
        self._svc = _core.Service(_text(config))

    def set_model(self, model):
        self._svc.set_model(_text(model))

    def load_history(self, historian_csv, weather_csv=""):
        self._svc.load_history(historian_csv, weather_csv or "")

    def state(self):
        return json.loads(self._svc.state())

    def plan(self, **request):
        return json.loads(self._svc.plan(json.dumps(request)))

    def whatif(self, op_point):
        return json.loads(self._svc.whatif(json.dumps({"op_point": op_point})))

    def operator_action(self, run_id, kind, schedule_edits=None, actor="operator"):
        request = {"run_id": run_id, "kind": kind, "actor": actor}
        if schedule_edits:
            request["schedule_edits"] = schedule_edits
        return json.loads(self._svc.operator_action(json.dumps(request)))

    def sim_tick(self, steps=1, inflows_pct=None):
        request = {"steps": steps}
        if inflows_pct is not None:
            request["inflows_pct"] = list(inflows_pct)
        return json.loads(self._svc.sim_tick(json.dumps(request)))

    def ingest_historian(self, csv_text):
        return json.loads(self._svc.ingest_historian(csv_text))

    def runs(self, limit=50, offset=0):
        return json.loads(self._svc.runs(limit, offset))

    def run(self, run_id):
        return json.loads(self._svc.run(run_id))
