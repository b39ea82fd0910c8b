"""
Energy ledger and bootstrap envelope monitor for nonlinear runs.

The ledger keeps one row per sampled state: the multiplier-weighted energies,
the ten pairing terms, their bracket ratios and the pointwise norms that make
up the left-hand sides of the three ansatz bounds. The monitor accumulates
those left-hand sides in time and compares them with C eps nu^alpha,
C eps nu^beta and C~ eps nu^delta.
"""
import asyncio
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field, model_validator
from scipy.integrate import cumulative_trapezoid, trapezoid

from src.monitor.energy import (
    THIRD,
    bracket_ratios,
    compute_I_terms,
    full_symbol,
    iterm_brackets,
    m_weighted_energy,
)
from src.multipliers.symbols import MultiplierSymbol
from src.nonlinear.state import SystemState
from src.spectral.operators import (
    gradient_weighted_norm,
    inverse_laplacian_sqrt,
    product_bound_ratio,
    project_nonzero,
    weighted_norm,
)
from src.spectral.params import PhysParams

logger = logging.getLogger(__name__)

IMPROVEMENT_TARGET = 0.5
RICHARDSON_TOLERANCE = 0.01
THRESHOLD_SLACK = 1e-12
DISPLAYS = ("theta", "wj", "theta_dx")
W_RATIO_TERMS = ("I2", "I3+I7", "I4", "I6", "I9")
PRODUCT_PAIRS = (("w", "theta"), ("j", "theta"), ("w", "j"))


class BootstrapEnvelope(BaseModel):
    """
    Size and constants of the ansatz bounds.

    C defaults to the smallest value meeting C >= 80 and C >= 40 sqrt(C2) C~.
    """

    eps: float = Field(ge=0.0)
    alpha: float
    beta: float
    delta: float
    C: Optional[float] = Field(default=None, gt=0.0)
    Ctilde: float = Field(default=32.0, gt=0.0)
    C2: float = Field(default=1.0, gt=0.0, description="Estimate of the (w, j) pairing constant")

    @model_validator(mode="after")
    def check_thresholds(self) -> "BootstrapEnvelope":
        """Check the exponent thresholds and the closing conditions on the constants"""
        if self.beta < 5.5 - THRESHOLD_SLACK:
            raise ValueError(f"beta must be >= 11/2, got {self.beta}")
        if self.delta < self.beta + 13.0 / 3.0 - THRESHOLD_SLACK:
            raise ValueError(f"delta must be >= beta + 13/3, got delta={self.delta}, beta={self.beta}")
        if self.alpha < self.delta - self.beta + 14.0 / 3.0 - THRESHOLD_SLACK:
            raise ValueError(f"alpha must be >= delta - beta + 14/3, got alpha={self.alpha}")
        if self.Ctilde < 32.0:
            raise ValueError(f"Ctilde must be >= 32, got {self.Ctilde}")
        closing = 40.0 * math.sqrt(self.C2) * self.Ctilde
        if self.C is None:
            self.C = max(80.0, closing)
        if self.C < 80.0:
            raise ValueError(f"C must be >= 80, got {self.C}")
        if self.C < closing * (1.0 - THRESHOLD_SLACK):
            raise ValueError(f"C must be >= 40 sqrt(C2) Ctilde = {closing:.6g}, got {self.C}")
        return self

    def bounds(self, nu: float) -> Dict[str, float]:
        return {
            "theta": self.C * self.eps * nu**self.alpha,
            "wj": self.C * self.eps * nu**self.beta,
            "theta_dx": self.Ctilde * self.eps * nu**self.delta,
        }


def _sample_norms(state: SystemState, t: float, b: float) -> Dict[str, float]:
    """Pointwise-in-time norms entering the ansatz left-hand sides."""
    row: Dict[str, float] = {}
    fields = state.fields()
    for name in ("theta", "w", "j"):
        f = fields[name]
        row[f"{name}_sup"] = weighted_norm(f, t, b)
        row[f"{name}_grad2"] = gradient_weighted_norm(f, t, b) ** 2
        row[f"{name}_dx2"] = weighted_norm(f, t, b, THIRD) ** 2
        row[f"{name}_low2"] = weighted_norm(inverse_laplacian_sqrt(project_nonzero(f)), t, b) ** 2
    theta = state.theta
    row["thetadx_sup"] = weighted_norm(theta, t, b, THIRD)
    row["thetadx_grad2"] = gradient_weighted_norm(theta, t, b, THIRD) ** 2
    row["thetadx_dx2"] = weighted_norm(theta, t, b, 2.0 * THIRD) ** 2
    row["thetadx_low2"] = weighted_norm(inverse_laplacian_sqrt(project_nonzero(theta)), t, b, THIRD) ** 2
    # algebra constant of Lambda_t^b for b > 1
    row["product_ratio"] = max(product_bound_ratio(fields[f], fields[g], t, b) for f, g in PRODUCT_PAIRS)
    return row


@dataclass
class EnergyLedger:
    """Time series of energies, pairing terms and ansatz norms, one row per sample."""

    params: PhysParams
    b: float
    symbol: Optional[MultiplierSymbol] = None
    rows: List[Dict[str, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.symbol = full_symbol(self.params, self.symbol)

    def record(self, state: SystemState) -> Dict[str, float]:
        """
        Append the row of one sampled state.

        Raises:
            ValueError: If the sample is not later than the last one or a value is not finite
        """
        t = float(state.t)
        if self.rows and t <= self.rows[-1]["t"]:
            raise ValueError(f"Ledger samples must increase in time: {t} after {self.rows[-1]['t']}")
        row: Dict[str, float] = {"t": t}
        for name, f in state.fields().items():
            row[f"E_{name}"] = m_weighted_energy(f, t, self.b, symbol=self.symbol)
        row["E_theta_dx"] = m_weighted_energy(state.theta, t, self.b, THIRD, symbol=self.symbol)
        terms = compute_I_terms(state, t, self.b, self.symbol)
        row.update(terms)
        ratios = bracket_ratios(terms, iterm_brackets(state, t, self.b))
        row.update({f"ratio_{name}": value for name, value in ratios.items()})
        row.update(_sample_norms(state, t, self.b))
        bad = [key for key, value in row.items() if not math.isfinite(value)]
        if bad:
            raise ValueError(f"Non-finite ledger entries at t={t}: {', '.join(bad)}")
        self.rows.append(row)
        logger.debug(f"Ledger row {len(self.rows) - 1} at t={t:.6g}")
        return row

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def times(self) -> np.ndarray:
        return self.column("t")

    def column(self, name: str) -> np.ndarray:
        return np.array([row[name] for row in self.rows], dtype=float)

    def ansatz_lhs(self, stride: int = 1) -> Dict[str, np.ndarray]:
        """
        Accumulated left-hand sides of the three ansatz bounds at every kept sample.

        Sup terms are running maxima, L2-in-time terms cumulative trapezoid
        integrals over the samples kept by ``stride``.

        Returns:
            Mapping display name ("theta", "wj", "theta_dx") to arrays; the
            (w, j) display is also split into "w" and "j"
        """
        if not self.rows:
            return {name: np.zeros(0) for name in DISPLAYS + ("w", "j")}
        nu = self.params.nu
        times = self.times[::stride]

        def running_sup(name: str) -> np.ndarray:
            return np.maximum.accumulate(self.column(name)[::stride])

        def running_l2(name: str) -> np.ndarray:
            values = self.column(name)[::stride]
            if times.size < 2:
                return np.zeros_like(values)
            return np.sqrt(np.maximum(cumulative_trapezoid(values, times, initial=0.0), 0.0))

        def display(prefix: str) -> np.ndarray:
            return (
                running_sup(f"{prefix}_sup")
                + nu**0.5 * running_l2(f"{prefix}_grad2")
                + nu ** (1.0 / 6.0) * running_l2(f"{prefix}_dx2")
                + running_l2(f"{prefix}_low2")
            )

        w, j = display("w"), display("j")
        return {"theta": display("theta"), "wj": w + j, "theta_dx": display("thetadx"), "w": w, "j": j}

    def measured_constants(self) -> Dict[str, float]:
        """Largest |I_m| / bracket ratios grouped by the estimate they feed."""
        if not self.rows:
            return {"C1": 0.0, "C2": 0.0, "C3": 0.0, "product": 0.0}
        return {
            "C1": float(np.max(self.column("ratio_I1"))),
            "C2": float(max(np.max(self.column(f"ratio_{name}")) for name in W_RATIO_TERMS)),
            "C3": float(np.max(self.column("ratio_I10"))),
            "product": float(np.max(self.column("product_ratio"))),
        }

    def richardson_change(self) -> Dict[str, float]:
        """
        Relative change of each accumulated L2-in-time norm under Richardson
        extrapolation from half to full sampling.
        """
        n = len(self.rows)
        usable = n if n % 2 == 1 else n - 1
        out: Dict[str, float] = {}
        if usable < 3:
            return out
        times = self.times[:usable]
        for key in self.rows[0]:
            if not key.endswith(("_grad2", "_dx2", "_low2")):
                continue
            values = self.column(key)[:usable]
            fine = trapezoid(values, times)
            coarse = trapezoid(values[::2], times[::2])
            extrapolated = fine + (fine - coarse) / 3.0
            full, best = math.sqrt(max(fine, 0.0)), math.sqrt(max(extrapolated, 0.0))
            out[key] = abs(best - full) / full if full > 0.0 else 0.0
        return out

    def to_columns(self, envelope: Optional[BootstrapEnvelope] = None) -> Dict[str, np.ndarray]:
        """Column view for the CSV writer, with ansatz left-hand sides and margins."""
        cols: Dict[str, np.ndarray] = {}
        if not self.rows:
            return cols
        for key in self.rows[0]:
            cols[key] = self.column(key)
        lhs = self.ansatz_lhs()
        for name in DISPLAYS + ("w", "j"):
            cols[f"lhs_{name}"] = lhs[name]
        if envelope is not None:
            for name, bound in envelope.bounds(self.params.nu).items():
                cols[f"margin_{name}"] = bound - lhs[name]
        return cols


class BootstrapVerdict(BaseModel):
    """Margins of the ansatz bounds along a run"""

    times: List[float]
    bounds: Dict[str, float]
    margins: Dict[str, List[float]]
    min_margins: Dict[str, float]
    improvement: List[float]
    max_improvement: float
    measured_constants: Dict[str, float]
    closing_condition: bool = Field(description="C >= 40 sqrt(measured C2) C~")
    richardson_change: Dict[str, float]
    richardson_ok: bool
    passed: bool


def bootstrap_monitor(ledger: EnergyLedger, envelope: BootstrapEnvelope) -> BootstrapVerdict:
    """
    Compare the accumulated ansatz left-hand sides with their bounds.

    The improvement factor at a sample is the largest measured / bound ratio
    over the three displays; the verdict passes when every margin is
    non-negative and the improvement factor stays at or below 1/2.

    Args:
        ledger: Ledger of a run
        envelope: Validated envelope

    Returns:
        BootstrapVerdict
    """
    nu = ledger.params.nu
    bounds = envelope.bounds(nu)
    lhs = ledger.ansatz_lhs()
    margins = {name: (bounds[name] - lhs[name]).tolist() for name in DISPLAYS}
    n = len(ledger)
    improvement = np.zeros(n)
    for name in DISPLAYS:
        ratio = np.zeros(n)
        if bounds[name] > 0.0:
            ratio = lhs[name] / bounds[name]
        else:
            ratio[lhs[name] > 0.0] = math.inf
        improvement = np.maximum(improvement, ratio)
    min_margins = {name: float(min(values)) if values else 0.0 for name, values in margins.items()}
    max_improvement = float(np.max(improvement)) if n else 0.0

    constants = ledger.measured_constants()
    closing = envelope.C >= 40.0 * math.sqrt(constants["C2"]) * envelope.Ctilde
    richardson = ledger.richardson_change()
    richardson_ok = all(v <= RICHARDSON_TOLERANCE for v in richardson.values())
    passed = all(m >= 0.0 for m in min_margins.values()) and max_improvement <= IMPROVEMENT_TARGET
    verdict = BootstrapVerdict(
        times=ledger.times.tolist(),
        bounds=bounds,
        margins=margins,
        min_margins=min_margins,
        improvement=improvement.tolist(),
        max_improvement=max_improvement,
        measured_constants=constants,
        closing_condition=closing,
        richardson_change=richardson,
        richardson_ok=richardson_ok,
        passed=passed,
    )
    if passed:
        logger.info(f"Bootstrap envelopes hold; max improvement factor {max_improvement:.3e}")
    else:
        logger.warning(f"Bootstrap envelopes violated: min margins {min_margins}, improvement {max_improvement:.3e}")
    if not closing:
        logger.warning(f"Measured C2={constants['C2']:.3e} breaks the closing condition for C={envelope.C:.6g}")
    return verdict


class LedgerMonitor:
    """
    Consumer of trajectory_sample events.

    Runs on its own task and is the only writer of its ledger.
    """

    def __init__(self, ledger: EnergyLedger, queue: asyncio.Queue):
        self.ledger = ledger
        self.queue = queue
        self.errors: List[str] = []
        self._task: Optional[asyncio.Task] = None

    def start(self) -> None:
        self._task = asyncio.create_task(self._consume())

    async def _consume(self) -> None:
        while True:
            try:
                event = await self.queue.get()
            except asyncio.CancelledError:
                break
            try:
                self.ledger.record(event["data"]["state"])
            except ValueError as e:
                logger.error(f"Ledger rejected sample {event['data'].get('index')}: {e}")
                self.errors.append(str(e))
            except Exception as e:
                # the task must survive so queue.join() in drain() returns
                logger.error(f"Ledger failed on sample {event['data'].get('index')}: {type(e).__name__}: {e}")
                self.errors.append(f"{type(e).__name__}: {e}")
            finally:
                self.queue.task_done()

    async def drain(self) -> None:
        """Wait until every published sample is recorded, then stop the task."""
        await self.queue.join()
        if self._task is not None:
            self._task.cancel()
            await asyncio.gather(self._task, return_exceptions=True)
            self._task = None
