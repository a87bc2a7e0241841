"""Desk-scale teacher-guided PPO: distillation and refinement engine."""

__version__ = "0.1.0"

from .distributions import (GaussianDist, gaussian_entropy, gaussian_kl,
                            gaussian_log_prob, gaussian_sample)
from .envs import EnvSpec, EnvState, StepResult, VecEnv, reset, step, vec_step
from .errors import (ConfigError, NumericalFailureError, ProtocolError,
                     TeacherUnavailableError, UsageError)
from .losses import LossConfig
from .nn import Adam, ParamStore, PolicyValueNet
from .rollout import RolloutBuffer, collect, compute_gae, minibatches
from .teacher import (RemoteTeacher, ScriptedTeacher, ScriptedTeacherSpec,
                      TeacherQuery, TeacherResponse, fit_gaussian, remote_act,
                      scripted_act, teacher_expectation)
from .trainer import (ExperimentConfig, RunMetrics, TeacherSettings, TrainResult,
                      evaluate, teacher_eval, train)
