"""JSON formats for scenarios and beamforming solutions.

Complex arrays are stored row-major with real and imaginary parts
interleaved: [re00, im00, re01, im01, ...].

Scenario file::

    {"N": 12,
     "users": [{"angle_deg": -5, "sinr_db": 10, "noise_power": 0.1}, ...],
     "shaping": [{"type": "charging", "angles_deg": [...], "b_db": 5},
                 {"type": "sidelobe", "angles_deg": [...], "cap": 0.1, "eps": 1e-5},
                 {"type": "nulling", "angles_deg": [...], "beta": 0.005},
                 {"type": "custom", "sense": ">=", "b": 1.0, "A": [[...], ...]}]}

A user may give ``"channel"`` (interleaved, length 2N) instead of an angle.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import scenario as sc


class ConfigError(ValueError):
    pass


def interleave(a) -> list:
    a = np.asarray(a, dtype=complex).ravel()
    out = np.empty(2 * a.size)
    out[0::2] = a.real
    out[1::2] = a.imag
    return out.tolist()


def deinterleave(values, shape) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if v.size != 2 * int(np.prod(shape)):
        raise ConfigError(f"expected {2 * int(np.prod(shape))} interleaved values, got {v.size}")
    return (v[0::2] + 1j * v[1::2]).reshape(shape)


def _require(d, key, where):
    if key not in d:
        raise ConfigError(f"{where}: missing field {key!r}")
    return d[key]


def _user(d, N, idx):
    where = f"user {idx}"
    if "channel" in d:
        h = deinterleave(d["channel"], (N,))
    elif "angle_deg" in d:
        h = sc.steering_vector(float(d["angle_deg"]), N)
    else:
        raise ConfigError(f"{where}: needs 'angle_deg' or 'channel'")
    sinr_db = float(_require(d, "sinr_db", where))
    return sc.User(h, float(sc.db2lin(sinr_db)), float(d.get("noise_power", sc.NOISE_POWER)))


def _block(d, N, M, idx):
    where = f"shaping block {idx}"
    kind = _require(d, "type", where)
    if kind == "charging":
        if "b_db" in d:
            b = float(sc.db2lin(d["b_db"]))
        else:
            b = float(_require(d, "b", where))
        return sc.charging_constraints(_require(d, "angles_deg", where), b, N, M)
    if kind == "sidelobe":
        return sc.sidelobe_constraints(_require(d, "angles_deg", where), float(d.get("cap", 0.1)),
                                       float(d.get("eps", 1e-5)), N, M)
    if kind == "nulling":
        return sc.relaxed_nulling_constraints(_require(d, "angles_deg", where),
                                              float(d.get("beta", 0.005)), N, M)
    if kind == "custom":
        A = _require(d, "A", where)
        if len(A) != M:
            raise ConfigError(f"{where}: expected {M} matrices, got {len(A)}")
        mats = np.stack([deinterleave(a, (N, N)) for a in A])
        return [sc.ShapingConstraint(mats, float(_require(d, "b", where)), d.get("sense", ">="))]
    raise ConfigError(f"{where}: unknown type {kind!r}")


def scenario_from_dict(d) -> sc.Scenario:
    try:
        N = int(_require(d, "N", "scenario"))
        users_cfg = _require(d, "users", "scenario")
        if not users_cfg:
            raise ConfigError("scenario: at least one user is required")
        users = [_user(u, N, i) for i, u in enumerate(users_cfg)]
        shaping = []
        for i, block in enumerate(d.get("shaping", [])):
            shaping.extend(_block(block, N, len(users), i))
        return sc.Scenario(N, users, shaping)
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(str(exc)) from exc


def load_scenario(path) -> sc.Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    return scenario_from_dict(data)


def scenario_to_dict(scenario: sc.Scenario) -> dict:
    """Explicit form: channels and every shaping row as a custom block."""
    return {
        "N": scenario.N,
        "users": [{"channel": interleave(u.h), "sinr_db": float(sc.lin2db(u.sinr_target)),
                   "noise_power": u.noise_power} for u in scenario.users],
        "shaping": [{"type": "custom", "sense": c.sense, "b": c.b,
                     "A": [interleave(a) for a in c.A]} for c in scenario.shaping],
    }


def _plain(v):
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return _plain(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        f = float(v)
        return f if np.isfinite(f) else str(f)
    return v


def solution_to_dict(solution, N: int) -> dict:
    return {
        "N": N,
        "K": solution.K,
        "total_power": solution.total_power,
        "exact": solution.exact,
        "W": [interleave(W) for W in solution.W],
        "diagnostics": _plain(solution.diagnostics),
    }


def save_solution(solution, N: int, path):
    path = Path(path)
    path.write_text(json.dumps(solution_to_dict(solution, N), indent=1, sort_keys=True))
    return path


def load_solution(path):
    """Return (W list, K, metadata dict)."""
    try:
        data = json.loads(Path(path).read_text())
        N, K = int(data["N"]), int(data["K"])
        W = [deinterleave(w, (N, K)) for w in data["W"]]
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot read solution {path}: {exc}") from exc
    return W, K, data
