"""
Synthetic visual control environments: point-mass and two-link arm reach tasks,
a dynamics ladder A..H and procedural background distractors.
"""
from .errors import ActionShapeError, EnvError, EnvNotResetError, HeldOutDistractorError, UnknownVariantError
from .tasks import (TASKS, VARIANT_LABELS, ArmTask, DynamicsVariant, Gains, PointMassTask, ProprioState,
                    Task, get_task, variant_scale)
from .distractors import SEVERITIES, TEST_IDS, TRAIN_IDS, Distraction, background
from .render import dequantize, quantize, render
from .environment import EnvConfig, StepResult, VisualEnv, env_steps_taken

__all__ = [
    'EnvError', 'UnknownVariantError', 'EnvNotResetError', 'ActionShapeError', 'HeldOutDistractorError',
    'TASKS', 'VARIANT_LABELS', 'Task', 'PointMassTask', 'ArmTask', 'ProprioState', 'DynamicsVariant',
    'Gains', 'get_task', 'variant_scale',
    'SEVERITIES', 'TRAIN_IDS', 'TEST_IDS', 'Distraction', 'background',
    'render', 'quantize', 'dequantize',
    'EnvConfig', 'StepResult', 'VisualEnv', 'env_steps_taken',
]
