"""Defaults, the key = value config file, and flag precedence.

Resolution order is flags > config file > defaults. The dataclass fields
double as the set of legal config-file keys (``lambda`` is accepted as an
alias for ``lam``); values are parsed with the field's type so a malformed
line fails loudly with its line number.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace

from .kernels import KernelSpec
from .skeleton import SkeletonConfig

_KEY_ALIASES = {"lambda": "lam"}


@dataclass(frozen=True)
class Config:
    kernel: str = "gaussian"
    h: float = 0.5
    degree: int = 2
    shift: float = 1.0
    lam: float = 1e-3
    leaf: int = 256
    tau: float = 1e-5
    max_rank: int = 64
    samples: int = 256
    sample_mode: str = "uniform"
    knn: int = 8
    restart: int = 50
    tol: float = 1e-8
    maxiter: int = 500
    threads: int = 0
    seed: int = 0

    def kernel_spec(self):
        return KernelSpec(
            family=self.kernel,
            h=self.h,
            degree=self.degree,
            shift=self.shift,
            regularization=self.lam,
        )

    def skeleton_config(self):
        return SkeletonConfig(
            tau=self.tau,
            max_rank=self.max_rank,
            samples=self.samples,
            sample_mode=self.sample_mode,
            seed=self.seed,
        )

    def effective_threads(self):
        return self.threads if self.threads > 0 else (os.cpu_count() or 1)

    def echo(self):
        return {
            "kernel": self.kernel,
            "h": self.h,
            "degree": self.degree,
            "shift": self.shift,
            "lambda": self.lam,
            "leaf": self.leaf,
            "tau": self.tau,
            "max_rank": self.max_rank,
            "samples": self.samples,
            "sample_mode": self.sample_mode,
            "knn": self.knn,
            "restart": self.restart,
            "tol": self.tol,
            "maxiter": self.maxiter,
            "threads": self.effective_threads(),
            "seed": self.seed,
        }


_FIELD_TYPES = {f.name: f.type for f in fields(Config)}


def _convert(key, raw):
    ftype = _FIELD_TYPES[key]
    if ftype in ("int", int):
        return int(raw)
    if ftype in ("float", float):
        return float(raw)
    return raw


def parse_config_file(path, base=None):
    """Overlay key = value lines from ``path`` onto ``base`` (or defaults)."""
    cfg = base or Config()
    updates = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}: line {lineno}: expected key = value")
            key, raw = (part.strip() for part in stripped.split("=", 1))
            key = _KEY_ALIASES.get(key, key)
            if key not in _FIELD_TYPES:
                raise ValueError(f"{path}: line {lineno}: unknown key {key!r}")
            try:
                updates[key] = _convert(key, raw)
            except ValueError:
                raise ValueError(
                    f"{path}: line {lineno}: bad value {raw!r} for {key}"
                ) from None
    return replace(cfg, **updates)


def apply_overrides(cfg, overrides):
    """Overlay explicitly-set flag values (a name -> value mapping)."""
    known = {k: v for k, v in overrides.items() if k in _FIELD_TYPES}
    return replace(cfg, **known) if known else cfg
