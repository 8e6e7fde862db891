"""
Minimal reverse-mode differentiable engine: tensors, the closed layer set,
losses, SGD and the model builders.
"""

from minusface.nn.tensor import Tensor
from minusface.nn.losses import arcface_loss, l1_loss
from minusface.nn.network import (
    ArcFaceHead,
    ConvClassifier,
    EncoderDecoder,
    Model,
    build_generator,
    build_model,
    build_recognizer,
    build_recovery,
    embed,
)
from minusface.nn.optim import SGD, sgd_step
from minusface.nn.gradcheck import gradient_check

__all__ = [
    'Tensor',
    'arcface_loss',
    'l1_loss',
    'ArcFaceHead',
    'ConvClassifier',
    'EncoderDecoder',
    'Model',
    'build_generator',
    'build_model',
    'build_recognizer',
    'build_recovery',
    'embed',
    'SGD',
    'sgd_step',
    'gradient_check',
]
