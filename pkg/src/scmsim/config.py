"""Run configuration: defaults, validation, and key=value file parsing."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from .data import HierSpec
from .errors import ConfigError, ContractError

MODES = ("deepscm", "cm_joint", "cm_rx1", "cm_rx2")


@dataclass(frozen=True)
class RunConfig:
    mode: str = "deepscm"
    # constellation / channel
    m1: int = 4
    m2: int = 4
    paf: float = 0.8
    power: float = 1.0
    n: int = 8
    snr1_db: float = -5.0
    snr2_db: float = 20.0
    # loss weights
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 0.1
    beta: float = 1.0
    # training schedule
    epochs1: int = 100
    epochs2: int = 150
    epochs3: int = 50
    lr1: float = 2e-4
    lr2: float = 2e-4
    lr3: float = 5e-5
    lr_min: float = 1e-5
    lr_t0: int = 10
    lr_tmult: int = 2
    batch_size: int = 64
    hidden: int = 128
    tau: float = 1.0
    train_hard: bool = True
    seed: int = 0
    # source spec
    l1: int = 4
    l2: int = 8
    k: int = 32
    coarse_sep: float = 10.0
    fine_sep: float = 2.0
    noise_sd: float = 0.5
    n_samples: int = 2000
    # evaluation / behavior flags
    eval_noise_draws: int = 20
    stage1_full_power: bool = False
    expected_power_norm: bool = False
    # conventional-modulation baseline budget; None derives from the stages
    cm_epochs: int | None = None
    cm_decoder_epochs: int | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.5 < self.paf < 1.0:
            raise ConfigError(f"paf must lie in (0.5, 1), got {self.paf}")
        if self.power <= 0:
            raise ConfigError(f"power must be positive, got {self.power}")
        if self.snr2_db <= self.snr1_db:
            raise ConfigError(
                f"need snr2_db > snr1_db, got {self.snr2_db} <= {self.snr1_db}")
        if min(self.epochs1, self.epochs2, self.epochs3) < 1:
            raise ConfigError("stage epoch counts must be >= 1")
        if min(self.lr1, self.lr2, self.lr3) <= 0 or self.lr_min <= 0:
            raise ConfigError("learning rates must be positive")
        if self.batch_size < 1 or self.n < 1 or self.hidden < 1:
            raise ConfigError("batch_size, n, hidden must be >= 1")
        if self.tau <= 0:
            raise ConfigError(f"tau must be positive, got {self.tau}")
        if self.n_samples < 10:
            raise ConfigError(f"n_samples must be >= 10, got {self.n_samples}")
        if self.eval_noise_draws < 1:
            raise ConfigError("eval_noise_draws must be >= 1")
        for m in (self.m1, self.m2):
            side = math.isqrt(m) if m > 0 else 0
            if m < 4 or side * side != m or side % 2 != 0:
                raise ConfigError(
                    f"constellation orders must be square QAM sizes (4, 16, 64, ...), got {m}")
        for name in ("lambda1", "lambda2", "lambda3", "beta"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be nonnegative")
        if self.cm_epochs is not None and self.cm_epochs < 1:
            raise ConfigError("cm_epochs must be >= 1 when given")
        if self.cm_decoder_epochs is not None and self.cm_decoder_epochs < 1:
            raise ConfigError("cm_decoder_epochs must be >= 1 when given")

    @property
    def total_cm_epochs(self) -> int:
        if self.cm_epochs is not None:
            return self.cm_epochs
        return self.epochs1 + self.epochs2 + self.epochs3

    @property
    def total_cm_decoder_epochs(self) -> int:
        if self.cm_decoder_epochs is not None:
            return self.cm_decoder_epochs
        return self.epochs2

    def hier_spec(self) -> HierSpec:
        return HierSpec(l1=self.l1, l2=self.l2, k=self.k,
                        coarse_sep=self.coarse_sep, fine_sep=self.fine_sep,
                        noise_sd=self.noise_sd, seed=self.seed)

    def smoke(self) -> "RunConfig":
        """Short-schedule variant for smoke tests (stages 20/30/10)."""
        return dataclasses.replace(self, epochs1=20, epochs2=30, epochs3=10)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_BOOL_WORDS = {"true": True, "1": True, "yes": True, "on": True,
               "false": False, "0": False, "no": False, "off": False}


def _coerce(key: str, raw: str):
    f = _FIELDS[key]
    raw = raw.strip()
    if f.type in ("int", "int | None"):
        if raw.lower() == "none" and "None" in f.type:
            return None
        try:
            return int(raw)
        except ValueError as exc:
            raise ConfigError(f"{key} expects an integer, got {raw!r}") from exc
    if f.type == "float":
        try:
            return float(raw)
        except ValueError as exc:
            raise ConfigError(f"{key} expects a number, got {raw!r}") from exc
    if f.type == "bool":
        word = raw.lower()
        if word not in _BOOL_WORDS:
            raise ConfigError(f"{key} expects a boolean, got {raw!r}")
        return _BOOL_WORDS[word]
    return raw


def parse_config_text(text: str, overrides: dict | None = None) -> RunConfig:
    """Parse flat key=value lines ('#' starts a comment, unknown keys error)."""
    values: dict = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected key=value, got {stripped!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, raw)
    if overrides:
        for key, val in overrides.items():
            if key not in _FIELDS:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = val
    try:
        return RunConfig(**values)
    except ContractError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path, overrides: dict | None = None) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, overrides)


def config_to_dict(cfg: RunConfig) -> dict:
    return dataclasses.asdict(cfg)
