"""Coordinate-ascent driver shared by the flat and hierarchical models."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DPLRError, ELBODecreaseError, NumericalError

ELBO_SLACK = 1e-8


@dataclass
class FitTrace:
    elbo_per_iteration: list = field(default_factory=list)
    active_components_per_iteration: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0

    def append(self, elbo, active):
        self.elbo_per_iteration.append(float(elbo))
        self.active_components_per_iteration.append(int(active))
        self.iterations = len(self.elbo_per_iteration)

    def is_monotone(self, slack=ELBO_SLACK) -> bool:
        e = np.asarray(self.elbo_per_iteration)
        return bool(np.all(e[1:] >= e[:-1] - slack * np.abs(e[:-1])))

    def to_rows(self):
        return [
            (i + 1, e, a)
            for i, (e, a) in enumerate(zip(self.elbo_per_iteration, self.active_components_per_iteration))
        ]


def run_vbem(model, design, e_step, m_step, elbo, count_active, tol, max_iters,
             check_monotone=True, callback=None):
    """Alternate E and M steps until the relative ELBO change drops below ``tol``.

    ``e_step(model, design) -> resp``, ``m_step(model, design, resp) -> model`` and
    ``elbo(model, design, resp) -> float`` operate on already-transformed data.
    """
    trace = FitTrace()
    prev = None
    for it in range(1, max_iters + 1):
        try:
            resp = e_step(model, design)
            model = m_step(model, design, resp)
            value = elbo(model, design, resp)
        except DPLRError as exc:
            raise type(exc)(f"iteration {it}: {exc}") from exc
        if not np.isfinite(value):
            raise NumericalError(f"iteration {it}: ELBO is not finite")
        trace.append(value, count_active(resp))
        if callback is not None:
            callback(it, model, value)
        if prev is not None:
            if check_monotone and value < prev - ELBO_SLACK * abs(prev):
                raise ELBODecreaseError(
                    f"iteration {it}: ELBO decreased from {prev!r} to {value!r}"
                )
            if abs(value - prev) <= tol * abs(prev):
                trace.converged = True
                break
        prev = value
    return model, trace
