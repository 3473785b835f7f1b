"""
# Mgdt > CLI

Code for running the Mgdt CLI
"""
from .gen_data import gen_data
from .train import train
from .finetune import finetune
from .eval import evaluate
from .experiment import experiment


__all__ = [
    'gen_data',
    'train',
    'finetune',
    'evaluate',
    'experiment',
]
