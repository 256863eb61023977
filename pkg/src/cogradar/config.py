"""Run configuration: defaults, file loading, overrides, validation.

One structured YAML file whose sections mirror the module boundaries, plus
dotted command-line overrides (section.key=value). Every physical constant,
network width and schedule knob lives here; everything is validated at load
so a bad value fails with a field-level message before any work starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace

import yaml

from .cdrl.agent import DdpgConfig
from .cdrl.dual import DualVariable
from .env import EnvParams, SpawnConfig
from .motion import MotionParams
from .sensing import ScanModel, SnrModel, scan_constant
from .tracking import TrackModels


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _require(cond: bool, key: str, msg: str) -> None:
    if not cond:
        raise ValueError(f"{key}: {msg}")


@dataclass(frozen=True)
class EnvSection:
    """Slot economics: capacity, slot length, utility weights."""

    n_max: int = 5
    t0: float = 2.5  # s
    beta: float = 2.0e4  # miss-count weight
    lambda0: float = 5000.0  # initial dual variable
    confirm_k: int = 3  # consecutive gated hits to confirm

    def __post_init__(self):
        _require(self.n_max >= 1, "n_max", "must be at least 1")
        _require(self.t0 > 0, "t0", "must be positive")
        _require(self.beta >= 0, "beta", "must be nonnegative")
        _require(self.lambda0 > 0, "lambda0", "must be positive")
        _require(self.confirm_k >= 1, "confirm_k", "must be at least 1")


@dataclass(frozen=True)
class MotionSection:
    """Target kinematics."""

    sigma_w2: float = 16.0  # process-noise PSD, m^2/s^3

    def __post_init__(self):
        _require(self.sigma_w2 > 0, "sigma_w2", "must be positive")


@dataclass(frozen=True)
class SensingSection:
    """Tracking-dwell SNR law reference point and unit-SNR noise variances."""

    snr0: float = 100.0
    tau0: float = 1.0  # s
    r0: float = 3000.0  # m
    sigma_r0_sq: float = 16.0  # m^2
    sigma_th0_sq: float = 1.0e-6  # rad^2

    def __post_init__(self):
        for f in fields(self):
            _require(getattr(self, f.name) > 0, f.name, "must be positive")


@dataclass(frozen=True)
class ScanSection:
    """Scanning-phase geometry, detection statistics, association gate."""

    phase_delay_deg: float = 3.0
    pfa: float = 1.0e-4
    confirm_threshold: float = 500.0  # association gate, m
    ref_beam_s: float = 1.0e-3  # scan-SNR reference beam dwell, s
    ref_range_m: float = 3000.0
    ref_snr: float = 100.0
    swerling_case: int = 0

    def __post_init__(self):
        _require(0 < self.phase_delay_deg <= 360, "phase_delay_deg", "must be in (0, 360]")
        _require(0 <= self.pfa <= 1, "pfa", "must be in [0, 1]")
        _require(self.confirm_threshold > 0, "confirm_threshold", "must be positive")
        _require(self.ref_beam_s > 0, "ref_beam_s", "must be positive")
        _require(self.ref_range_m > 0, "ref_range_m", "must be positive")
        _require(self.ref_snr > 0, "ref_snr", "must be positive")
        _require(self.swerling_case in (0, 1, 2, 3, 4), "swerling_case", "must be 0..4")


@dataclass(frozen=True)
class TrackingSection:
    """Filter safeguards."""

    dwell_floor_frac: float = 1.0e-4  # of t0; keeps measurement noise finite
    nis_gate: float = 100.0
    reset_speed_sigma: float = 300.0  # m/s

    def __post_init__(self):
        _require(0 < self.dwell_floor_frac <= 1, "dwell_floor_frac", "must be in (0, 1]")
        _require(self.nis_gate > 0, "nis_gate", "must be positive")
        _require(self.reset_speed_sigma > 0, "reset_speed_sigma", "must be positive")


@dataclass(frozen=True)
class SpawnSection:
    """Target arrival process and the surveillance region."""

    period: int = 100  # slots between spawn rolls
    prob: float = 0.05
    max_age: int = 3000  # slots
    region_radius: float = 20000.0  # m
    radius_min: float = 2000.0
    radius_max: float = 18000.0
    speed_min: float = 2.0  # m/s
    speed_max: float = 10.0

    def __post_init__(self):
        _require(self.period >= 1, "period", "must be at least 1")
        _require(0 <= self.prob <= 1, "prob", "must be in [0, 1]")
        _require(self.max_age >= 1, "max_age", "must be at least 1")
        _require(self.region_radius > 0, "region_radius", "must be positive")
        _require(0 < self.radius_min <= self.radius_max, "radius_min",
                 "must be positive and no larger than radius_max")
        _require(0 <= self.speed_min <= self.speed_max, "speed_min",
                 "must be nonnegative and no larger than speed_max")


@dataclass(frozen=True)
class AgentSection:
    """Actor-critic architecture and learning schedule."""

    actor_hidden: tuple = (256, 128)
    critic_hidden: tuple = (100, 100)
    actor_lr: float = 1.0e-3
    critic_lr: float = 1.0e-3
    gamma: float = 0.9
    rho: float = 0.005  # soft-update rate
    batch_size: int = 128
    noise_frac0: float = 0.2  # exploration sigma at slot 0, as fraction of t0
    noise_frac1: float = 0.02  # floor after decay
    noise_decay_frac: float = 0.15  # fraction of training slots spent decaying
    final_init_scale: float = 3.0e-3
    actor_out_bias: float = -2.0  # pre-squash shift; starts dwells inside the budget
    logit_band: float = 4.0  # actor output logits free inside [-band, band]
    logit_decay: float = 1.0e-2  # quadratic pull on logits beyond the band

    def __post_init__(self):
        for name in ("actor_hidden", "critic_hidden"):
            widths = getattr(self, name)
            _require(len(widths) >= 1, name, "needs at least one hidden layer")
            _require(all(w >= 1 for w in widths), name, "layer widths must be positive")
        _require(self.actor_lr > 0, "actor_lr", "must be positive")
        _require(self.critic_lr > 0, "critic_lr", "must be positive")
        _require(0 <= self.gamma < 1, "gamma", "must be in [0, 1)")
        _require(0 < self.rho <= 1, "rho", "must be in (0, 1]")
        _require(self.batch_size >= 1, "batch_size", "must be at least 1")
        _require(0 < self.noise_frac1 <= self.noise_frac0, "noise_frac1",
                 "must be positive and no larger than noise_frac0")
        _require(0 < self.noise_decay_frac <= 1, "noise_decay_frac", "must be in (0, 1]")
        _require(self.final_init_scale > 0, "final_init_scale", "must be positive")
        _require(self.logit_band >= 0, "logit_band", "must be nonnegative")
        _require(self.logit_decay >= 0, "logit_decay", "must be nonnegative")


@dataclass(frozen=True)
class TrainingSection:
    """Run lengths and replay memory."""

    slots: int = 20000
    warmup: int = 200  # slots collected before updates start; dual held fixed
    buffer_capacity: int = 1_000_000
    explore_eps: float = 0.02  # per-slot chance of starting a global action burst
    checkpoint_every: int = 0  # 0 = final checkpoint only
    eval_slots: int = 5000  # per evaluation/baseline episode

    def __post_init__(self):
        _require(self.slots >= 0, "slots", "must be nonnegative")
        _require(self.warmup >= 0, "warmup", "must be nonnegative")
        _require(self.buffer_capacity >= 1, "buffer_capacity", "must be at least 1")
        _require(0.0 <= self.explore_eps <= 1.0, "explore_eps", "must be in [0, 1]")
        _require(self.checkpoint_every >= 0, "checkpoint_every", "must be nonnegative")
        _require(self.eval_slots >= 1, "eval_slots", "must be at least 1")


@dataclass(frozen=True)
class DualSection:
    """Budget constraint and its ascent step."""

    alpha: float = 5000.0
    theta_max: float = 0.9
    window: int = 1  # usage moving-average length

    def __post_init__(self):
        _require(self.alpha >= 0, "alpha", "must be nonnegative")
        _require(0 < self.theta_max <= 1, "theta_max", "must be in (0, 1]")
        _require(self.window >= 1, "window", "must be at least 1")


@dataclass(frozen=True)
class RunSection:
    """Reproducibility."""

    seed: int = 1

    def __post_init__(self):
        _require(self.seed >= 0, "seed", "must be nonnegative")


_SECTIONS = {
    "env": EnvSection,
    "motion": MotionSection,
    "sensing": SensingSection,
    "scan": ScanSection,
    "tracking": TrackingSection,
    "spawn": SpawnSection,
    "agent": AgentSection,
    "training": TrainingSection,
    "dual": DualSection,
    "run": RunSection,
}


@dataclass(frozen=True)
class RunConfig:
    """Validated full configuration of one run."""

    env: EnvSection = field(default_factory=EnvSection)
    motion: MotionSection = field(default_factory=MotionSection)
    sensing: SensingSection = field(default_factory=SensingSection)
    scan: ScanSection = field(default_factory=ScanSection)
    tracking: TrackingSection = field(default_factory=TrackingSection)
    spawn: SpawnSection = field(default_factory=SpawnSection)
    agent: AgentSection = field(default_factory=AgentSection)
    training: TrainingSection = field(default_factory=TrainingSection)
    dual: DualSection = field(default_factory=DualSection)
    run: RunSection = field(default_factory=RunSection)

    def __post_init__(self):
        if self.training.buffer_capacity < self.agent.batch_size:
            raise ConfigError(
                "training.buffer_capacity: must be at least agent.batch_size"
            )

    def env_params(self) -> EnvParams:
        motion = MotionParams(revisit_interval=self.env.t0, sigma_w2=self.motion.sigma_w2)
        snr = SnrModel(
            snr0=self.sensing.snr0,
            tau0=self.sensing.tau0,
            r0=self.sensing.r0,
            sigma_r0_sq=self.sensing.sigma_r0_sq,
            sigma_th0_sq=self.sensing.sigma_th0_sq,
        )
        scan = ScanModel(
            phase_delay_deg=self.scan.phase_delay_deg,
            scan_const=scan_constant(self.scan.ref_beam_s, self.scan.ref_range_m,
                                     self.scan.ref_snr),
            pfa=self.scan.pfa,
            region_radius=self.spawn.region_radius,
            confirm_threshold=self.scan.confirm_threshold,
            swerling_case=self.scan.swerling_case,
        )
        track = TrackModels(
            motion=motion,
            snr=snr,
            dwell_floor=self.tracking.dwell_floor_frac * self.env.t0,
            nis_gate=self.tracking.nis_gate,
            reset_speed_sigma=self.tracking.reset_speed_sigma,
        )
        spawn = SpawnConfig(
            period=self.spawn.period,
            prob=self.spawn.prob,
            max_age=self.spawn.max_age,
            region_radius=self.spawn.region_radius,
            max_targets=self.env.n_max,
            radius_min=self.spawn.radius_min,
            radius_max=self.spawn.radius_max,
            speed_min=self.spawn.speed_min,
            speed_max=self.spawn.speed_max,
        )
        return EnvParams(
            motion=motion,
            snr=snr,
            scan=scan,
            track=track,
            spawn=spawn,
            n_max=self.env.n_max,
            t0=self.env.t0,
            beta=self.env.beta,
            theta_max=self.dual.theta_max,
            lambda0=self.env.lambda0,
            confirm_k=self.env.confirm_k,
        )

    def ddpg_config(self) -> DdpgConfig:
        n = self.env.n_max
        decay = max(1, int(round(self.agent.noise_decay_frac * self.training.slots)))
        return DdpgConfig(
            obs_dim=2 * n + 1,
            act_dim=n,
            t0=self.env.t0,
            actor_hidden=tuple(self.agent.actor_hidden),
            critic_hidden=tuple(self.agent.critic_hidden),
            actor_lr=self.agent.actor_lr,
            critic_lr=self.agent.critic_lr,
            gamma=self.agent.gamma,
            rho=self.agent.rho,
            batch_size=self.agent.batch_size,
            noise_frac0=self.agent.noise_frac0,
            noise_frac1=self.agent.noise_frac1,
            noise_decay_slots=decay,
            final_init_scale=self.agent.final_init_scale,
            actor_out_bias=self.agent.actor_out_bias,
            logit_band=self.agent.logit_band,
            logit_decay=self.agent.logit_decay,
        )

    def dual_variable(self) -> DualVariable:
        return DualVariable(
            lam=self.env.lambda0,
            alpha=self.dual.alpha,
            theta_max=self.dual.theta_max,
            window=self.dual.window,
        )

    def to_mapping(self) -> dict:
        out: dict = {}
        for name in _SECTIONS:
            sect = getattr(self, name)
            out[name] = {
                f.name: _plain(getattr(sect, f.name)) for f in fields(sect)
            }
        return out


def _plain(value):
    if isinstance(value, tuple):
        return list(value)
    return value


_FIELD_DEFAULTS = {
    name: {f.name: getattr(cls(), f.name) for f in fields(cls)}
    for name, cls in _SECTIONS.items()
}


def _coerce(section: str, key: str, value):
    """Check a raw value's type against the default and normalize it."""
    default = _FIELD_DEFAULTS[section][key]
    where = f"{section}.{key}"
    if isinstance(default, tuple):
        if not isinstance(value, (list, tuple)) or not all(
            isinstance(v, int) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"{where}: expected a list of integers")
        return tuple(value)
    if isinstance(default, bool) or isinstance(value, bool):
        raise ConfigError(f"{where}: unexpected boolean")
    if isinstance(default, int):
        if not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return value
    if isinstance(default, float):
        if not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    raise ConfigError(f"{where}: unsupported value")


def _parse_override(item: str) -> tuple[str, str, object]:
    if "=" not in item:
        raise ConfigError(f"override '{item}' is not of the form section.key=value")
    dotted, _, raw = item.partition("=")
    section, _, key = dotted.partition(".")
    if not section or not key or not raw:
        raise ConfigError(f"override '{item}' is not of the form section.key=value")
    try:
        value = yaml.safe_load(raw)
    except yaml.YAMLError:
        raise ConfigError(f"override '{item}': value is not valid YAML")
    return section, key, value


def load_config(path=None, overrides=()) -> RunConfig:
    """Build a RunConfig from defaults, an optional file, then overrides."""
    data: dict = {name: {} for name in _SECTIONS}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                raw = yaml.safe_load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except yaml.YAMLError as exc:
            raise ConfigError(f"config file is not valid YAML: {exc}")
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a mapping of sections")
        for name, sect in raw.items():
            if name not in _SECTIONS:
                raise ConfigError(f"unknown config section '{name}'")
            if sect is None:
                continue
            if not isinstance(sect, dict):
                raise ConfigError(f"{name}: section must be a mapping")
            for key, value in sect.items():
                if key not in _FIELD_DEFAULTS[name]:
                    raise ConfigError(f"{name}.{key}: unknown key")
                data[name][key] = value
    for item in overrides:
        section, key, value = _parse_override(item)
        if section not in _SECTIONS:
            raise ConfigError(f"unknown config section '{section}'")
        if key not in _FIELD_DEFAULTS[section]:
            raise ConfigError(f"{section}.{key}: unknown key")
        data[section][key] = value

    kwargs = {}
    for name, cls in _SECTIONS.items():
        coerced = {k: _coerce(name, k, v) for k, v in data[name].items()}
        try:
            kwargs[name] = cls(**coerced)
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"{name}.{exc}")
    return RunConfig(**kwargs)


def with_updates(rc: RunConfig, **section_updates) -> RunConfig:
    """Replace fields given as section={key: value}; revalidates."""
    kwargs = {}
    for name, updates in section_updates.items():
        try:
            kwargs[name] = replace(getattr(rc, name), **updates)
        except ValueError as exc:
            raise ConfigError(f"{name}.{exc}")
    return replace(rc, **kwargs)


def write_resolved(path, rc: RunConfig, command: str | None = None) -> None:
    """Snapshot the effective configuration; loadable back via load_config."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if command:
            fh.write(f"# {command}\n")
        yaml.safe_dump(rc.to_mapping(), fh, sort_keys=False)
