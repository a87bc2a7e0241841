"""JSON experiment/sweep/server config parsing with field-level diagnostics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ConfigError
from .losses import LossConfig
from .trainer import ExperimentConfig, TeacherSettings


def load_json(path: str) -> dict:
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc


def _take(data: dict, key: str, kind, where: str, default=...):
    if key not in data:
        if default is ...:
            raise ConfigError(f"{where}: missing required field '{key}'")
        return default
    value = data[key]
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(f"{where}: field '{key}' must be {getattr(kind, '__name__', kind)}")
    return value


def _unknown_keys(data: dict, allowed: set[str], where: str) -> None:
    extra = set(data) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {sorted(extra)}")


LOSS_KEYS = {"variant", "distill_weight", "clip_eps", "value_coef",
             "entropy_coef", "ppd_lambda", "ppd_clip", "value_clip"}


def parse_loss(data: dict, where: str = "loss") -> LossConfig:
    _unknown_keys(data, LOSS_KEYS, where)
    try:
        return LossConfig(
            variant=_take(data, "variant", str, where, "none"),
            distill_weight=_take(data, "distill_weight", float, where, 1.0),
            clip_eps=_take(data, "clip_eps", float, where, 0.2),
            value_coef=_take(data, "value_coef", float, where, 0.5),
            entropy_coef=_take(data, "entropy_coef", float, where, 0.0),
            ppd_lambda=_take(data, "ppd_lambda", float, where, 1.0),
            ppd_clip=_take(data, "ppd_clip", float, where, 0.2),
            value_clip=_take(data, "value_clip", float, where, 0.2))
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None


TEACHER_KEYS = {"kind", "task", "competence", "action_noise_std", "systematic_bias",
                "observes_transformed", "seed", "endpoint", "instruction"}


def parse_teacher(data: dict | None, where: str = "teacher") -> TeacherSettings | None:
    if data is None:
        return None
    _unknown_keys(data, TEACHER_KEYS, where)
    bias = data.get("systematic_bias")
    if bias is not None and not isinstance(bias, list):
        raise ConfigError(f"{where}: field 'systematic_bias' must be a list")
    task = data.get("task")
    if task is not None and not isinstance(task, str):
        raise ConfigError(f"{where}: field 'task' must be a string")
    try:
        return TeacherSettings(
            kind=_take(data, "kind", str, where, "scripted"),
            task=task,
            competence=_take(data, "competence", float, where, 1.0),
            action_noise_std=_take(data, "action_noise_std", float, where, 0.0),
            systematic_bias=bias,
            observes_transformed=_take(data, "observes_transformed", bool, where, False),
            seed=_take(data, "seed", int, where, 0),
            endpoint=_take(data, "endpoint", str, where, ""),
            instruction=_take(data, "instruction", str, where, ""))
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from None


EXPERIMENT_KEYS = {"task", "reward_mode", "max_episode_steps", "camera_shift_seed",
                   "act_dim", "hidden_sizes", "loss", "teacher", "total_steps",
                   "lanes", "horizon", "epochs", "minibatch_size", "learning_rate",
                   "gamma", "gae_lambda", "eval_episodes", "eval_interval",
                   "teacher_eval_episodes", "seed"}


def parse_experiment(data: dict, where: str = "config") -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: experiment config must be a JSON object")
    _unknown_keys(data, EXPERIMENT_KEYS, where)
    hidden = _take(data, "hidden_sizes", list, where, [256, 256])
    if not all(isinstance(h, int) and not isinstance(h, bool) for h in hidden):
        raise ConfigError(f"{where}: field 'hidden_sizes' must be a list of ints")
    gamma = data.get("gamma")
    if gamma is not None and not isinstance(gamma, (int, float)):
        raise ConfigError(f"{where}: field 'gamma' must be a number")
    camera = data.get("camera_shift_seed")
    if camera is not None and not isinstance(camera, int):
        raise ConfigError(f"{where}: field 'camera_shift_seed' must be an int")
    try:
        return ExperimentConfig(
            task=_take(data, "task", str, where, "Push2D"),
            reward_mode=_take(data, "reward_mode", str, where, "dense"),
            max_episode_steps=_take(data, "max_episode_steps", int, where, 50),
            camera_shift_seed=camera,
            act_dim=_take(data, "act_dim", int, where, 3),
            hidden_sizes=tuple(hidden),
            loss=parse_loss(_take(data, "loss", dict, where, {}), f"{where}.loss"),
            teacher=parse_teacher(data.get("teacher"), f"{where}.teacher"),
            total_steps=_take(data, "total_steps", int, where, 1_000_000),
            lanes=_take(data, "lanes", int, where, 32),
            horizon=_take(data, "horizon", int, where, 50),
            epochs=_take(data, "epochs", int, where, 4),
            minibatch_size=_take(data, "minibatch_size", int, where, 800),
            learning_rate=_take(data, "learning_rate", float, where, 3e-4),
            gamma=float(gamma) if gamma is not None else None,
            gae_lambda=_take(data, "gae_lambda", float, where, 0.9),
            eval_episodes=_take(data, "eval_episodes", int, where, 100),
            eval_interval=_take(data, "eval_interval", int, where, 5),
            teacher_eval_episodes=_take(data, "teacher_eval_episodes", int, where, 500),
            seed=_take(data, "seed", int, where, 0))
    except ConfigError as exc:
        msg = str(exc)
        raise ConfigError(msg if msg.startswith(where) else f"{where}: {msg}") from None


def experiment_to_dict(cfg: ExperimentConfig) -> dict:
    out = {
        "task": cfg.task, "reward_mode": cfg.reward_mode,
        "max_episode_steps": cfg.max_episode_steps,
        "camera_shift_seed": cfg.camera_shift_seed,
        "act_dim": cfg.act_dim, "hidden_sizes": list(cfg.hidden_sizes),
        "loss": {
            "variant": cfg.loss.variant, "distill_weight": cfg.loss.distill_weight,
            "clip_eps": cfg.loss.clip_eps, "value_coef": cfg.loss.value_coef,
            "entropy_coef": cfg.loss.entropy_coef, "ppd_lambda": cfg.loss.ppd_lambda,
            "ppd_clip": cfg.loss.ppd_clip, "value_clip": cfg.loss.value_clip,
        },
        "teacher": None,
        "total_steps": cfg.total_steps, "lanes": cfg.lanes, "horizon": cfg.horizon,
        "epochs": cfg.epochs, "minibatch_size": cfg.minibatch_size,
        "learning_rate": cfg.learning_rate, "gamma": cfg.gamma,
        "gae_lambda": cfg.gae_lambda, "eval_episodes": cfg.eval_episodes,
        "eval_interval": cfg.eval_interval,
        "teacher_eval_episodes": cfg.teacher_eval_episodes, "seed": cfg.seed,
    }
    if cfg.teacher is not None:
        t = cfg.teacher
        out["teacher"] = {
            "kind": t.kind, "task": t.task, "competence": t.competence,
            "action_noise_std": t.action_noise_std,
            "systematic_bias": t.systematic_bias,
            "observes_transformed": t.observes_transformed, "seed": t.seed,
            "endpoint": t.endpoint, "instruction": t.instruction,
        }
    return out


@dataclass
class SweepSpec:
    configs: dict[str, ExperimentConfig]
    seeds: list[int]
    output_dir: str | None = None
    teacher_baselines: dict[str, float] = field(default_factory=dict)


SWEEP_KEYS = {"base", "configs", "seeds", "seeds_per_config", "output_dir",
              "teacher_baselines"}


def parse_sweep(data: dict, where: str = "sweep") -> SweepSpec:
    _unknown_keys(data, SWEEP_KEYS, where)
    base = _take(data, "base", dict, where, {})
    configs_raw = _take(data, "configs", dict, where)
    if not configs_raw:
        raise ConfigError(f"{where}: 'configs' must name at least one config")
    if "seeds" in data:
        seeds = data["seeds"]
        if (not isinstance(seeds, list) or not seeds
                or not all(isinstance(s, int) for s in seeds)):
            raise ConfigError(f"{where}: field 'seeds' must be a non-empty int list")
    else:
        n = _take(data, "seeds_per_config", int, where, 5)
        if n < 1:
            raise ConfigError(f"{where}: seeds_per_config must be >= 1")
        seeds = list(range(n))
    configs = {}
    budgets = set()
    for name, overrides in configs_raw.items():
        if not isinstance(overrides, dict):
            raise ConfigError(f"{where}.configs.{name}: must be a JSON object")
        merged = _merge(base, overrides)
        configs[name] = parse_experiment(merged, f"{where}.configs.{name}")
        budgets.add(configs[name].total_steps)
    if len(budgets) > 1:
        raise ConfigError(f"{where}: all configs must share total_steps for fair "
                          f"comparison, got {sorted(budgets)}")
    baselines = _take(data, "teacher_baselines", dict, where, {})
    for k, v in baselines.items():
        if not isinstance(v, (int, float)):
            raise ConfigError(f"{where}: teacher_baselines['{k}'] must be a number")
    return SweepSpec(configs=configs, seeds=list(seeds),
                     output_dir=_take(data, "output_dir", str, where, None),
                     teacher_baselines={k: float(v) for k, v in baselines.items()})


def _merge(base: dict, overrides: dict) -> dict:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


SERVER_KEYS = {"port", "act_dim", "teacher", "seed"}


def parse_server(data: dict, where: str = "server") -> tuple[int, int, TeacherSettings]:
    """Returns (port, act_dim, scripted teacher settings)."""
    _unknown_keys(data, SERVER_KEYS, where)
    port = _take(data, "port", int, where, 8800)
    act_dim = _take(data, "act_dim", int, where, 3)
    teacher = parse_teacher(_take(data, "teacher", dict, where), f"{where}.teacher")
    if teacher.kind != "scripted":
        raise ConfigError(f"{where}: only scripted teachers can be served")
    if teacher.task is None:
        raise ConfigError(f"{where}.teacher: field 'task' is required")
    if "seed" in data:
        teacher.seed = _take(data, "seed", int, where)
    return port, act_dim, teacher
