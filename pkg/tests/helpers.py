"""Shared test utilities: parameter flattening and finite differences."""

from __future__ import annotations

import numpy as np

from boundarynorm.model import LayerParams, ModelParams, init_model


def flatten_params(model: ModelParams) -> np.ndarray:
    parts = []
    for layer in model.hidden:
        parts.append(layer.weight.ravel())
        parts.append(layer.bias.ravel())
    parts.append(model.final_weight.ravel())
    parts.append(model.final_bias.ravel())
    return np.concatenate(parts)


def unflatten_params(template: ModelParams, theta: np.ndarray) -> ModelParams:
    pos = 0
    hidden = []
    for layer in template.hidden:
        size = layer.weight.size
        w = theta[pos : pos + size].reshape(layer.weight.shape)
        pos += size
        b = theta[pos : pos + layer.bias.size].copy()
        pos += layer.bias.size
        hidden.append(LayerParams(weight=w, bias=b))
    size = template.final_weight.size
    fw = theta[pos : pos + size].reshape(template.final_weight.shape)
    pos += size
    fb = theta[pos : pos + template.final_bias.size].copy()
    return ModelParams(hidden=tuple(hidden), final_weight=fw, final_bias=fb)


def flatten_grads(grads) -> np.ndarray:
    parts = []
    for gw, gb in grads.hidden:
        parts.append(gw.ravel())
        parts.append(gb.ravel())
    parts.append(grads.final_weight.ravel())
    parts.append(grads.final_bias.ravel())
    return np.concatenate(parts)


def finite_difference_grads(loss_value_fn, model: ModelParams, h: float = 1e-5) -> np.ndarray:
    """Central differences of loss_value_fn(model) over every parameter."""
    theta = flatten_params(model)
    fd = np.zeros_like(theta)
    for i in range(theta.size):
        plus = theta.copy()
        plus[i] += h
        minus = theta.copy()
        minus[i] -= h
        fd[i] = (
            loss_value_fn(unflatten_params(model, plus))
            - loss_value_fn(unflatten_params(model, minus))
        ) / (2.0 * h)
    return fd


def random_model(rng: np.random.Generator, sizes, bias_scale: float = 0.3) -> ModelParams:
    """Random model with non-zero biases so no sample can reach exactly-zero
    logits through dead ReLUs."""
    base = init_model(sizes, seed=int(rng.integers(2**31)))
    hidden = tuple(
        LayerParams(weight=l.weight, bias=rng.normal(scale=bias_scale, size=l.bias.shape))
        for l in base.hidden
    )
    return ModelParams(
        hidden=hidden,
        final_weight=base.final_weight,
        final_bias=rng.normal(scale=bias_scale, size=base.final_bias.shape),
    )
