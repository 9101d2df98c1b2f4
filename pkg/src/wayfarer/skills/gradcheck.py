"""Central finite-difference verification of analytic gradients."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ParamVector

DEFAULT_H = 1e-5
DEFAULT_COORDS = 200
# Relative-error floor: coordinates whose true derivative is ~0 would
# otherwise divide float roundoff by itself. Inactive for any gradient
# of real magnitude.
ERROR_FLOOR = 1e-2


@dataclass
class GradReport:
    block_errors: dict[str, float] = field(default_factory=dict)
    coords_checked: dict[str, int] = field(default_factory=dict)

    @property
    def max_relative_error(self) -> float:
        return max(self.block_errors.values()) if self.block_errors else 0.0

    def passed(self, tol: float = 1e-4) -> bool:
        return self.max_relative_error < tol

    def worst_block(self) -> str:
        return max(self.block_errors, key=self.block_errors.get)

    def __str__(self) -> str:
        lines = [f"{name}: {err:.3e} ({self.coords_checked[name]} coords)" for name, err in self.block_errors.items()]
        return "\n".join(lines)


def grad_check(
    loss_fn,
    pv: ParamVector,
    rng: np.random.Generator,
    coords_per_block: int = DEFAULT_COORDS,
    h: float = DEFAULT_H,
) -> GradReport:
    """loss_fn(pv) -> (loss, flat_grad). Checks >= coords_per_block random
    coordinates of every named block against central differences."""
    _, analytic = loss_fn(pv)
    analytic = np.asarray(analytic, dtype=np.float64)
    work = pv.copy()
    report = GradReport()
    for name in pv.block_names():
        sl = work.block_slice(name)
        size = sl.stop - sl.start
        count = min(coords_per_block, size)
        if count == size:
            coords = np.arange(size)
        else:
            coords = rng.choice(size, size=count, replace=False)
        worst = 0.0
        for c in coords:
            idx = sl.start + int(c)
            keep = work.flat[idx]
            work.flat[idx] = keep + h
            up, _ = loss_fn(work)
            work.flat[idx] = keep - h
            down, _ = loss_fn(work)
            work.flat[idx] = keep
            numeric = (up - down) / (2.0 * h)
            a = analytic[idx]
            err = abs(a - numeric) / max(abs(a), abs(numeric), ERROR_FLOOR)
            worst = max(worst, err)
        report.block_errors[name] = worst
        report.coords_checked[name] = count
    return report
