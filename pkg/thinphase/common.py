import datetime as dt
import hashlib
import json

import numpy as np
import pytz

MASK64 = (1 << 64) - 1
SPLITMIX_GAMMA = 0x9E3779B97F4A7C15


def get_timestamp():
    """Get current time with UTC offset"""
    return dt.datetime.now(tz=pytz.UTC)


def datetime_to_string(dttm):
    """Given a datetime instance, produce the string representation
    with microsecond precision"""
    # 1. Convert to timezone-aware
    # 2. Convert to UTC
    # 3. Format in ISO format with microsecond precision

    if dttm.tzinfo is None or dttm.tzinfo.utcoffset(dttm) is None:
        # dttm is timezone-naive; assume UTC
        zoned = pytz.UTC.localize(dttm)
    else:
        zoned = dttm.astimezone(pytz.UTC)
    return zoned.strftime("%Y-%m-%dT%H:%M:%S.%fZ")


def splitmix64(state):
    """
    One splitmix64 transition.

    Args:
        state (int): current 64-bit state

    Returns:
        tuple: ``(next_state, output)``, both unsigned 64-bit integers.

    The transition is the published one: the state advances by the golden
    gamma ``0x9E3779B97F4A7C15`` and the output is the state passed
    through two xor-shift-multiply rounds (multipliers
    ``0xBF58476D1CE4E5B9`` and ``0x94D049BB133111EB``, shifts 30, 27, 31).
    """
    state = (state + SPLITMIX_GAMMA) & MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return state, z ^ (z >> 31)


def child_seeds(seed, count):
    """Derive ``count`` independent 64-bit seeds from a single seed."""
    state = int(seed) & MASK64
    seeds = []
    for _ in range(count):
        state, out = splitmix64(state)
        seeds.append(out)
    return seeds


def make_rng(seed, stream=0):
    """A numpy Generator for child stream ``stream`` of ``seed``."""
    return np.random.default_rng(child_seeds(seed, stream + 1)[stream])


def stable_hash(obj):
    """SHA-256 of the canonical JSON form of ``obj`` (sorted keys)."""
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class LazyJSONDumper(object):
    """An lazy stringifier for dumping objects as JSON, e.g. for logging."""
    def __init__(self, obj, cls=json.JSONEncoder, indent=None):
        super(LazyJSONDumper, self).__init__()
        # We concretise on the first call to `__str__()` so the output's
        # immutable/repeatable after that at least.
        self._obj = obj
        self._dumpcls = cls
        self._indent = indent

    def __str__(self):
        # The first stringification will concretise `obj`
        if not isinstance(self._obj, str):
            self._obj = json.dumps(
                self._obj, cls=self._dumpcls, indent=self._indent,
            )
        return self._obj

    def __repr__(self):  # pragma: no cover
        return repr(str(self))


class NumpyJSONEncoder(json.JSONEncoder):
    """JSON encoder that understands numpy scalars and arrays."""

    def default(self, o):
        if isinstance(o, np.integer):
            return int(o)
        if isinstance(o, np.floating):
            return float(o)
        if isinstance(o, np.bool_):
            return bool(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        return super(NumpyJSONEncoder, self).default(o)
