"""Adam with bias correction, and the step-halving learning-rate schedule."""

from __future__ import annotations

import torch


class NonFiniteGradientError(FloatingPointError):
    def __init__(self, name):
        super().__init__(f"non-finite gradient in parameter group {name!r}")
        self.name = name


def lr_at(iteration, lr0, halve_every=2000):
    """Learning rate after ``iteration`` global steps: ``lr0 * 2 ** -(iteration // halve_every)``."""
    return lr0 * 0.5 ** (iteration // halve_every)


@torch.no_grad()
def adam_step(param, grad, exp_avg, exp_avg_sq, step, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """In-place Adam update of one tensor. ``step`` counts from 1."""
    exp_avg.mul_(beta1).add_(grad, alpha=1 - beta1)
    exp_avg_sq.mul_(beta2).addcmul_(grad, grad, value=1 - beta2)
    m_hat = exp_avg / (1 - beta1 ** step)
    v_hat = exp_avg_sq / (1 - beta2 ** step)
    param.sub_(lr * m_hat / (v_hat.sqrt() + eps))


class Adam:
    """Adam over a module's named parameters; moments are keyed by name."""

    def __init__(self, named_params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = dict(named_params)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.step_count = 0
        self.exp_avg = {k: torch.zeros_like(p) for k, p in self.params.items()}
        self.exp_avg_sq = {k: torch.zeros_like(p) for k, p in self.params.items()}

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def step(self, lr):
        for name, p in self.params.items():
            if p.grad is not None and not torch.isfinite(p.grad).all():
                raise NonFiniteGradientError(name)
        self.step_count += 1
        for name, p in self.params.items():
            grad = p.grad if p.grad is not None else torch.zeros_like(p)
            adam_step(p, grad, self.exp_avg[name], self.exp_avg_sq[name],
                      self.step_count, lr, self.beta1, self.beta2, self.eps)

    def reset(self):
        """Zero both moments and restart bias correction."""
        for name in self.params:
            self.exp_avg[name].zero_()
            self.exp_avg_sq[name].zero_()
        self.step_count = 0

    def state_arrays(self):
        out = {}
        for name in self.params:
            out[f"adam.m.{name}"] = self.exp_avg[name]
            out[f"adam.v.{name}"] = self.exp_avg_sq[name]
        return out

    def load_state_arrays(self, arrays, step_count):
        for name in self.params:
            self.exp_avg[name].copy_(arrays[f"adam.m.{name}"])
            self.exp_avg_sq[name].copy_(arrays[f"adam.v.{name}"])
        self.step_count = step_count
