from typing import Callable, Dict, Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field

from cgebd.nn.tensor import ParamSet, make_rng
from cgebd.utils.errors import NumericError


class ParamCheck(BaseModel):
    name: str
    checked: int = Field(description="Number of entries compared")
    max_rel_err: float


class GradCheckReport(BaseModel):
    """Outcome of comparing analytic gradients with central finite differences."""

    tolerance: float
    max_rel_err: float
    passed: bool
    params: Dict[str, ParamCheck] = Field(default_factory=dict)


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1.0, abs(analytic), abs(numeric))


def gradient_check(
    loss_and_grad: Callable[[], float],
    params: ParamSet,
    tolerance: float = 1e-6,
    step: float = 1e-6,
    samples_per_param: Optional[int] = None,
    seed: int = 0,
) -> GradCheckReport:
    """
    Compare every parameter's analytic gradient with central differences.

    Args:
        loss_and_grad: evaluates the scalar loss at the current parameter values
            and adds the analytic gradients into ``params``.
        samples_per_param: if set, compare only that many seeded entries per
            parameter instead of all of them.
    """
    params.zero_grad()
    loss = loss_and_grad()
    if not np.isfinite(loss):
        raise NumericError(f"Non-finite loss {loss} in gradient check")
    analytic = {name: p.grad.copy() for name, p in params.items()}

    rng = make_rng(seed, 1)
    report = GradCheckReport(tolerance=tolerance, max_rel_err=0.0, passed=True)

    for name, param in params.items():
        flat = param.value.reshape(-1)
        indices = np.arange(flat.size)
        if samples_per_param is not None and flat.size > samples_per_param:
            indices = np.sort(rng.choice(flat.size, size=samples_per_param, replace=False))

        worst = 0.0
        for index in indices:
            original = flat[index]
            flat[index] = original + step
            plus = loss_and_grad()
            flat[index] = original - step
            minus = loss_and_grad()
            flat[index] = original

            if not (np.isfinite(plus) and np.isfinite(minus)):
                raise NumericError(f"Non-finite loss while perturbing {name}[{index}]")
            numeric = (plus - minus) / (2 * step)
            worst = max(worst, relative_error(float(analytic[name].reshape(-1)[index]), numeric))

        report.params[name] = ParamCheck(name=name, checked=len(indices), max_rel_err=worst)
        report.max_rel_err = max(report.max_rel_err, worst)

    params.zero_grad()
    report.passed = report.max_rel_err < tolerance
    level = "INFO" if report.passed else "WARNING"
    logger.log(
        level, f"Gradient check max rel-err {report.max_rel_err:.3e} (tolerance {tolerance:.0e})"
    )
    return report
