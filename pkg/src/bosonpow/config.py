"""Run configuration: one JSON document for a whole experiment.

Example (all sections except ``pm`` are optional)::

    {
      "pm": {"N": 2, "M": 6, "d_mb": 3, "d_sb": 7, "epsilon": 0.05, "beta": 0.05,
             "R": "0.01", "P": "0.006", "stake": "20"},
      "unitary": {"haar_seed": 11},
      "hw": "single-core",
      "econ": {"R": 0.01, "P": 0.006, "k": 0.002, "k_classical": 1.0},
      "profiles": [{"id": "h0", "strategy": "honest_quantum"}],
      "seed": 2024, "blocks": 5, "scale": 1e-5,
      "validation": {"path": "estimated", "semantics": "counts"}
    }

``pm.T_mine`` defaults to ``max(N_mb, N_sb) / R_q`` of the scaled
requirements, rounded up to whole simulated seconds.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path

import numpy as np

from .agents import CampaignSettings, MinerProfile
from .binning import AccuracyParams
from .chain import config_digest
from .consensus import ValidationSettings
from .economics import PRESETS, EconomicsConfig, HardwareProfile, mining_time
from .errors import ConfigError
from .linalg import haar_unitary, matrix_from_json
from .params import ParameterSet, dec, unitary_ref

DEFAULT_SCALE = 1e-5


def load_document(path) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"config file {p} must hold a JSON object")
    return doc


def hardware(spec) -> HardwareProfile:
    if spec is None:
        return PRESETS["single-core"]
    if isinstance(spec, str):
        if spec not in PRESETS:
            raise ConfigError(f"unknown hardware preset {spec!r}; known: {sorted(PRESETS)}")
        return PRESETS[spec]
    if isinstance(spec, dict):
        return HardwareProfile.from_json(spec)
    raise ConfigError("hw must be a preset name or an object")


def baselines(doc: dict) -> list[HardwareProfile]:
    """Classical baselines for the performance tables (both presets by default)."""
    spec = doc.get("baselines")
    if spec is None:
        return [hardware(doc["hw"])] if "hw" in doc else list(PRESETS.values())
    return [hardware(s) for s in spec]


def unitary(doc: dict, M: int) -> np.ndarray:
    spec = doc.get("unitary", {"haar_seed": 0})
    if "matrix" in spec:
        U = matrix_from_json(spec["matrix"])
        if U.shape != (M, M):
            raise ConfigError(f"unitary is {U.shape}, expected ({M}, {M})")
        if not np.allclose(U.conj().T @ U, np.eye(M), atol=1e-10):
            raise ConfigError("configured matrix is not unitary")
        return U
    if "haar_seed" in spec:
        return haar_unitary(M, int(spec["haar_seed"]))
    raise ConfigError("unitary needs either 'haar_seed' or 'matrix'")


@dataclass
class RunConfig:
    doc: dict
    pm: ParameterSet | None
    U: np.ndarray | None
    hw: HardwareProfile
    econ: EconomicsConfig | None
    profiles: list[MinerProfile]
    seed: int
    blocks: int
    scale: float
    validation: ValidationSettings | None
    reward_mode: str
    initial_balance: Decimal
    hash: str = field(default="")

    def campaign_settings(self) -> CampaignSettings:
        return CampaignSettings(scale=self.scale, validation=self.validation, reward_mode=self.reward_mode,
                                initial_balance=self.initial_balance)


def _parameter_set(pm_doc: dict, U: np.ndarray, hw: HardwareProfile, scale: float) -> ParameterSet:
    doc = dict(pm_doc)
    try:
        N, M = int(doc["N"]), int(doc["M"])
        if doc.get("T_mine") is None:
            mt = mining_time(N, M, int(doc["d_mb"]), float(doc["beta"]), int(doc["d_sb"]),
                             float(doc["epsilon"]), hw, scale=scale)
            doc["T_mine"] = max(1, math.ceil(mt.seconds))
        doc["U_ref"] = unitary_ref(U)
        return ParameterSet.from_json(doc)
    except KeyError as exc:
        raise ConfigError(f"pm is missing {exc.args[0]!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid pm: {exc}") from None


def build(doc: dict, seed: int | None = None, scale: float | None = None) -> RunConfig:
    """Resolve a config document (with optional CLI overrides) into live objects."""
    doc = json.loads(json.dumps(doc))
    if seed is not None:
        doc["seed"] = seed
    if scale is not None:
        doc["scale"] = scale
    scale = float(doc.get("scale", DEFAULT_SCALE))
    if not 0 < scale <= 1:
        raise ConfigError(f"scale must lie in (0, 1], got {scale}")
    hw = hardware(doc.get("hw"))
    pm = U = validation = None
    if "pm" in doc:
        U = unitary(doc, int(doc["pm"].get("M", 0)))
        pm = _parameter_set(doc["pm"], U, hw, scale)
        v = dict(doc.get("validation", {}))
        try:
            acc = AccuracyParams(beta=pm.beta, epsilon=pm.epsilon, gamma=float(v.pop("gamma", 1e-4)),
                                 delta=v.pop("delta", None), confidence=float(v.pop("confidence", 0.99)))
            validation = ValidationSettings(acc, **v)
        except TypeError as exc:
            raise ConfigError(f"invalid validation section: {exc}") from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
    econ = EconomicsConfig.from_json(doc["econ"]) if "econ" in doc else None
    profiles = [MinerProfile.from_json(p) for p in doc.get("profiles", [])]
    reward_mode = doc.get("reward_mode", econ.reward_mode if econ else "split")
    if reward_mode not in ("split", "block"):
        raise ConfigError(f"unknown reward mode {reward_mode!r}")
    blocks = int(doc.get("blocks", 1))
    if blocks < 0:
        raise ConfigError("blocks must be non-negative")
    cfg = RunConfig(doc, pm, U, hw, econ, profiles, int(doc.get("seed", 0)), blocks, scale, validation,
                    reward_mode, dec(doc.get("initial_balance", 100)))
    cfg.hash = config_digest({k: v for k, v in doc.items() if k != "out"})
    return cfg


def load(path, seed: int | None = None, scale: float | None = None) -> RunConfig:
    return build(load_document(path), seed, scale)
