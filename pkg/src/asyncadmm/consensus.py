"""Delayed ratio consensus with finite-time min/max-based termination.

The ratio iteration tracks a numerator vector ``y`` and a positive scalar
mass ``w`` per node.  Every step each node rescales its pair by its broadcast
weight, ships it to all out-neighbors (and to itself, undelayed), and
replaces its state by the sum of everything delivered to it on that tick.
Because the weights are column stochastic, total mass is conserved and the
ratio ``y / w`` at every node converges to the network-wide average of the
initial ``y``.

Termination rides on the same message schedule: each node also maintains a
running componentwise maximum ``M`` and minimum ``m`` of ratio snapshots.
Both mix through the network in at most ``(1 + tau_bar) * D`` steps, so every
that-many steps all nodes hold the same extrema and can decide, simultaneously
and without extra coordination, whether the snapshot spread has dropped below
the tolerance.  If not, the extrema are re-seeded from the current ratios and
the next round begins.

One protocol subtlety: min/max state must not survive a re-seed.  A max fold
never forgets, so a delayed extrema message sent before a re-seed would
re-infect the fresh round with stale values (with the ``+inf`` initial values
it would wedge the check permanently).  Receivers therefore discard extrema
messages sent before the current round started, which every node can decide
locally from the message's send stamp.  Ratio messages are never discarded:
mass conservation requires each one to be consumed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .digraph import Digraph, WeightMatrix, diameter
from .netsim import DelayModel, EventQueue, MessageKind, broadcast

__all__ = [
    "ProtocolError",
    "RatioState",
    "TerminationState",
    "ConsensusResult",
    "ratio_step",
    "minmax_step",
    "run_ratio_consensus",
    "ratio_trajectory",
    "run_minmax_consensus",
    "run_terminating_consensus",
]


class ProtocolError(RuntimeError):
    """The consensus state stopped being well-formed (lost mass, split extrema)."""


@dataclass(slots=True)
class RatioState:
    """One node's ratio-consensus state: numerator ``y``, mass ``w``, estimate ``z``.

    ``w`` starts at one and stays positive: the weights are positive, so
    positivity can only break if mass is lost or corrupted.
    """

    y: np.ndarray
    w: float

    @property
    def z(self) -> np.ndarray:
        return self.y / self.w


@dataclass
class TerminationState:
    """Running extrema of the whole network, one row of ``hi`` / ``lo`` per node.

    ``hi`` starts at ``+inf`` and ``lo`` at ``-inf``; every re-seed snaps both
    to the current ratio estimates, so ``lo <= z <= hi`` rowwise right after.
    ``flag`` flips false -> true at most once per consensus instance;
    ``round_len`` is the check period ``(1 + tau_bar) * D``.
    """

    hi: np.ndarray
    lo: np.ndarray
    flag: bool = False
    round_len: int = 0


@dataclass
class ConsensusResult:
    """Outcome of a terminating consensus instance."""

    z: np.ndarray
    steps: int
    converged: bool
    check_steps: list[int] = field(default_factory=list)


def _fold_ratio(payloads) -> tuple[np.ndarray, float]:
    if not payloads:
        raise ProtocolError("ratio update with no deliveries: the self term is missing")
    y = np.zeros_like(payloads[0][0])
    w = 0.0
    for vec, mass in payloads:
        y += vec
        w += mass
    if w <= 0.0:
        raise ProtocolError(f"nonpositive mass {w} after update")
    return y, w


def ratio_step(payloads) -> RatioState:
    """Fold pre-scaled ``(y, w)`` deliveries into a fresh node state.

    ``payloads`` must be ordered by sender id and must include the node's own
    zero-delay term (the sender scales everything it ships, itself included,
    by ``1 / (1 + out_degree)``).  The fold is strictly sequential so results
    are reproducible bit for bit.

    Raises :class:`ProtocolError` if the accumulated mass is not positive,
    which signals invalid weights or a lost message.
    """
    y, w = _fold_ratio(payloads)
    return RatioState(y=y, w=w)


def minmax_step(hi: np.ndarray, lo: np.ndarray, payloads) -> tuple[np.ndarray, np.ndarray]:
    """Componentwise max/min fold of delivered extrema into the node's own pair."""
    hi_new = hi.copy()
    lo_new = lo.copy()
    for hi_in, lo_in in payloads:
        np.maximum(hi_new, hi_in, out=hi_new)
        np.minimum(lo_new, lo_in, out=lo_new)
    return hi_new, lo_new


class _Engine:
    """Drives one network of ratio (and optionally extrema) states in lockstep."""

    def __init__(
        self,
        g: Digraph,
        weights: WeightMatrix,
        dm: DelayModel,
        y0: np.ndarray,
        with_minmax: bool,
        trace: list[str] | None = None,
    ):
        y0 = np.asarray(y0, dtype=float)
        if y0.ndim == 1:
            y0 = y0[:, None]
        if y0.shape[0] != g.n:
            raise ValueError(f"y0 has {y0.shape[0]} rows for a {g.n}-node digraph")
        self.g = g
        self.dm = dm
        self.n, self.p = y0.shape
        self.y = y0.copy()
        self.w = np.ones(self.n)
        self.z = self.y / self.w[:, None]
        self.with_minmax = with_minmax
        if with_minmax:
            self.term = TerminationState(
                hi=np.full((self.n, self.p), np.inf),
                lo=np.full((self.n, self.p), -np.inf),
            )
        self.queue = EventQueue(trace=trace)
        self.epoch_start = 0
        self._bw = np.array([weights.broadcast_weight(j) for j in range(g.n)])

    @property
    def time(self) -> int:
        return self.queue.time

    def reseed_extrema(self) -> None:
        self.term.hi = self.z.copy()
        self.term.lo = self.z.copy()
        self.epoch_start = self.queue.time

    def extrema_identical(self) -> bool:
        term = self.term
        return bool(np.all(term.hi == term.hi[0]) and np.all(term.lo == term.lo[0]))

    def spread(self) -> float:
        """2-norm of ``M - m`` at node 0 (identical at every check boundary)."""
        diff = self.term.hi[0] - self.term.lo[0]
        return float(np.linalg.norm(diff))

    def step(self) -> None:
        g, q = self.g, self.queue
        # Sender-side scaling, one vectorized pass; elementwise rounding is
        # identical to scaling row by row.  The rows are shipped as views of
        # fresh buffers that are never mutated afterwards.
        scaled_y = self._bw[:, None] * self.y
        scaled_w = self._bw * self.w
        for j in range(self.n):
            broadcast(j, g, MessageKind.RATIO_PAIR, (scaled_y[j], scaled_w[j]), self.dm, q)
            if self.with_minmax:
                broadcast(
                    j, g, MessageKind.MIN_MAX_PAIR, (self.term.hi[j], self.term.lo[j]), self.dm, q
                )
        _, delivered = q.advance()
        ratio_in: list[list[tuple]] = [[] for _ in range(self.n)]
        mm_in: list[list[tuple]] = [[] for _ in range(self.n)]
        for msg in delivered:
            if msg.kind is MessageKind.RATIO_PAIR:
                ratio_in[msg.receiver].append(msg.payload)
            elif msg.kind is MessageKind.MIN_MAX_PAIR and msg.sent_at >= self.epoch_start:
                mm_in[msg.receiver].append(msg.payload)
        y_new = np.empty_like(self.y)
        w_new = np.empty(self.n)
        for j in range(self.n):
            yj, wj = _fold_ratio(ratio_in[j])
            y_new[j] = yj
            w_new[j] = wj
        if self.with_minmax:
            term = self.term
            hi_new = np.empty_like(term.hi)
            lo_new = np.empty_like(term.lo)
            for j in range(self.n):
                hi_new[j], lo_new[j] = minmax_step(term.hi[j], term.lo[j], mm_in[j])
            term.hi, term.lo = hi_new, lo_new
        self.y, self.w = y_new, w_new
        self.z = self.y / self.w[:, None]


def run_ratio_consensus(
    g: Digraph,
    weights: WeightMatrix,
    dm: DelayModel,
    y0: np.ndarray,
    steps: int,
    trace: list[str] | None = None,
) -> np.ndarray:
    """Run the delayed ratio iteration for a fixed number of steps.

    Returns the ``(n, p)`` array of per-node ratio estimates after ``steps``
    updates.  No termination logic is involved.
    """
    engine = _Engine(g, weights, dm, y0, with_minmax=False, trace=trace)
    for _ in range(steps):
        engine.step()
    return engine.z.copy()


def ratio_trajectory(
    g: Digraph,
    weights: WeightMatrix,
    dm: DelayModel,
    y0: np.ndarray,
    steps: int,
) -> list[np.ndarray]:
    """Per-step ratio estimates ``[z^0, z^1, ..., z^steps]``."""
    engine = _Engine(g, weights, dm, y0, with_minmax=False)
    traj = [engine.z.copy()]
    for _ in range(steps):
        engine.step()
        traj.append(engine.z.copy())
    return traj


def run_minmax_consensus(
    g: Digraph,
    dm: DelayModel,
    hi0: np.ndarray,
    lo0: np.ndarray,
    steps: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Standalone asynchronous max- and min-consensus for ``steps`` updates.

    Starting from per-node rows ``hi0`` / ``lo0``, every node repeatedly folds
    whatever extrema deliveries are due each tick into its own pair.  With
    delays bounded by ``tau_bar``, every node holds the global extrema after
    at most ``(1 + tau_bar) * D`` updates.
    """
    hi = np.asarray(hi0, dtype=float)
    lo = np.asarray(lo0, dtype=float)
    if hi.ndim == 1:
        hi = hi[:, None]
    if lo.ndim == 1:
        lo = lo[:, None]
    hi, lo = hi.copy(), lo.copy()
    n = g.n
    q = EventQueue()
    for _ in range(steps):
        for j in range(n):
            broadcast(j, g, MessageKind.MIN_MAX_PAIR, (hi[j].copy(), lo[j].copy()), dm, q)
        _, delivered = q.advance()
        payloads: list[list[tuple]] = [[] for _ in range(n)]
        for msg in delivered:
            payloads[msg.receiver].append(msg.payload)
        hi_new = np.empty_like(hi)
        lo_new = np.empty_like(lo)
        for j in range(n):
            hi_new[j], lo_new[j] = minmax_step(hi[j], lo[j], payloads[j])
        hi, lo = hi_new, lo_new
    return hi, lo


def run_terminating_consensus(
    g: Digraph,
    weights: WeightMatrix,
    dm: DelayModel,
    y0: np.ndarray,
    eps: float,
    step_cap: int,
    graph_diameter: int | None = None,
    trace: list[str] | None = None,
) -> ConsensusResult:
    """Ratio consensus that halts once all nodes agree they are within ``eps``.

    Every ``(1 + tau_bar) * D`` steps each node compares its extrema pair; the
    first check necessarily fails (the pair starts at ``+inf / -inf``) and
    re-seeds the extrema from the current ratios, so the earliest possible
    exit is the second boundary.  On success every node flips its flag at the
    same boundary and the final estimates have pairwise spread at most
    ``eps``.  If ``step_cap`` updates elapse first, the current estimates are
    returned with ``converged=False``.

    Parameters
    ----------
    y0 : ndarray, shape (n, p)
        Initial numerator rows; masses start at one.
    eps : float
        Spread tolerance (2-norm over the ``p`` components), must be > 0.
    step_cap : int
        Upper bound on ratio updates before giving up.
    graph_diameter : int, optional
        Pass a precomputed diameter to skip the all-pairs BFS.
    """
    if eps <= 0.0:
        raise ValueError(f"eps must be > 0, got {eps}")
    if step_cap < 1:
        raise ValueError(f"step_cap must be >= 1, got {step_cap}")
    d = diameter(g) if graph_diameter is None else graph_diameter
    round_len = (1 + dm.tau_bar) * max(d, 1)
    engine = _Engine(g, weights, dm, y0, with_minmax=True, trace=trace)
    engine.term.round_len = round_len
    check_steps: list[int] = []
    while True:
        k = engine.time
        if k != 0 and k % round_len == 0:
            if not engine.extrema_identical():
                raise ProtocolError(f"extrema disagree across nodes at check boundary {k}")
            check_steps.append(k)
            if engine.spread() < eps:
                engine.term.flag = True
                return ConsensusResult(
                    z=engine.z.copy(), steps=k, converged=True, check_steps=check_steps
                )
            engine.reseed_extrema()
        if k >= step_cap:
            return ConsensusResult(
                z=engine.z.copy(), steps=k, converged=False, check_steps=check_steps
            )
        engine.step()
