"""Right-continuous piecewise-constant functions of x with exact L1/TV calculus.

A function is stored as strictly increasing breakpoints ``x_0 < ... < x_{m-1}``
and ``m+1`` state values; the value on ``[x_j, x_{j+1})`` is ``values[j+1]``
and the value on ``(-inf, x_0)`` is ``values[0]``.  All integrals and
variation functionals are computed by exact breakpoint merging, never by
quadrature, so inequality checks downstream carry no integration noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Interval",
    "PiecewiseConstantFn",
    "l1_distance",
    "signed_integral",
    "integrate_piecewise",
    "total_variation",
    "w_functional",
    "partition",
    "refine_partition",
    "project_piecewise",
    "to_text",
    "from_text",
]


@dataclass(frozen=True)
class Interval:
    """Interval of the real line with per-endpoint closure flags.

    ``include_a``/``include_b`` matter only for jump-counting functionals
    (total variation); they are irrelevant for integrals.
    """

    a: float
    b: float
    include_a: bool = False
    include_b: bool = False

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError(f"empty interval: a={self.a} b={self.b}")

    @property
    def bounded(self) -> bool:
        return np.isfinite(self.a) and np.isfinite(self.b)


class PiecewiseConstantFn:
    """Immutable right-continuous piecewise-constant function R -> R^n."""

    __slots__ = ("xs", "vals")

    def __init__(self, breakpoints, values):
        xs = np.asarray(breakpoints, dtype=float).reshape(-1)
        vals = np.asarray(values, dtype=float)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1)
        if vals.shape[0] != xs.shape[0] + 1:
            raise ValueError(
                f"need {xs.shape[0] + 1} values for {xs.shape[0]} breakpoints, "
                f"got {vals.shape[0]}"
            )
        if xs.size and not np.all(np.diff(xs) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(vals))):
            raise ValueError("breakpoints and values must be finite")
        # canonical form: drop breakpoints that carry no jump
        if xs.size:
            jump = np.linalg.norm(np.diff(vals, axis=0), axis=1)
            keep = jump > 0.0
            if not keep.all():
                xs = xs[keep]
                vals = vals[np.concatenate(([True], keep))]
        self.xs = xs
        self.vals = vals
        self.xs.setflags(write=False)
        self.vals.setflags(write=False)

    @classmethod
    def constant(cls, value) -> "PiecewiseConstantFn":
        v = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(np.empty(0), v.reshape(1, -1))

    @classmethod
    def from_sorted(cls, breakpoints, values) -> "PiecewiseConstantFn":
        """Build from possibly-coincident sorted breakpoints.

        Coincident breakpoints are merged; the values between them (zero-width
        pieces) are discarded.
        """
        xs = np.asarray(breakpoints, dtype=float).reshape(-1)
        vals = np.asarray(values, dtype=float)
        if vals.ndim == 1:
            vals = vals.reshape(-1, 1)
        if xs.size:
            if np.any(np.diff(xs) < 0):
                raise ValueError("breakpoints must be sorted")
            keep = np.concatenate((np.diff(xs) > 0, [True]))
            xs = xs[keep]
            vals = vals[np.concatenate(([True], keep))]
        return cls(xs, vals)

    @property
    def n(self) -> int:
        return self.vals.shape[1]

    @property
    def npieces(self) -> int:
        return self.vals.shape[0]

    def value(self, x: float) -> np.ndarray:
        """State at x (right-continuous)."""
        return self.vals[int(np.searchsorted(self.xs, x, side="right"))]

    def left_value(self, x: float) -> np.ndarray:
        """Left trace at x."""
        return self.vals[int(np.searchsorted(self.xs, x, side="left"))]

    def values_at(self, x) -> np.ndarray:
        """Vectorized right-continuous evaluation; x of shape (k,)."""
        idx = np.searchsorted(self.xs, np.asarray(x, dtype=float), side="right")
        return self.vals[idx]

    def jumps(self):
        """(locations, vector jumps) across all breakpoints."""
        return self.xs, np.diff(self.vals, axis=0)

    def shift(self, dx: float) -> "PiecewiseConstantFn":
        return PiecewiseConstantFn(self.xs + dx, self.vals)

    def is_compactly_varying(self) -> bool:
        return bool(np.array_equal(self.vals[0], self.vals[-1]))

    def __eq__(self, other):
        if not isinstance(other, PiecewiseConstantFn):
            return NotImplemented
        return np.array_equal(self.xs, other.xs) and np.array_equal(
            self.vals, other.vals
        )

    def __hash__(self):
        return hash((self.xs.tobytes(), self.vals.tobytes()))

    def __repr__(self):
        return f"PiecewiseConstantFn(n={self.n}, pieces={self.npieces})"


def merge_values(f: PiecewiseConstantFn, g: PiecewiseConstantFn):
    """Common refinement of two functions.

    Returns (edges, fv, gv): edges shape (k,), and per-piece values of shape
    (k+1, n) aligned so piece j lives on (edges[j-1], edges[j]) with the usual
    infinite first/last pieces.
    """
    if f.n != g.n:
        raise ValueError("dimension mismatch")
    edges = np.union1d(f.xs, g.xs)
    if edges.size == 0:
        return edges, f.vals, g.vals
    fv = np.concatenate((f.vals[:1], f.values_at(edges)), axis=0)
    gv = np.concatenate((g.vals[:1], g.values_at(edges)), axis=0)
    return edges, fv, gv


def _piece_bounds(edges: np.ndarray):
    lo = np.concatenate(([-np.inf], edges))
    hi = np.concatenate((edges, [np.inf]))
    return lo, hi


def _overlap(lo, hi, a, b):
    """Lengths of piece overlaps with [a, b]; infinite overlaps -> inf."""
    left = np.maximum(lo, a)
    right = np.minimum(hi, b)
    out = np.zeros_like(lo)
    pos = right > left
    out[pos] = right[pos] - left[pos]
    return out


def signed_integral(f: PiecewiseConstantFn, g: PiecewiseConstantFn,
                    interval: Interval | None = None) -> np.ndarray:
    """Componentwise exact integral of f - g (over interval, default all of R)."""
    edges, fv, gv = merge_values(f, g)
    diff = fv - gv
    lo, hi = _piece_bounds(edges)
    a = -np.inf if interval is None else interval.a
    b = np.inf if interval is None else interval.b
    lengths = _overlap(lo, hi, a, b)
    unbounded = ~np.isfinite(lengths)
    if np.any(unbounded & np.any(diff != 0.0, axis=1)):
        raise ValueError("integrand does not vanish on an unbounded piece")
    lengths = np.where(unbounded, 0.0, lengths)
    return lengths @ diff


def l1_distance(f: PiecewiseConstantFn, g: PiecewiseConstantFn,
                interval: Interval | None = None) -> float:
    """Exact L1 distance; Euclidean norm pointwise for systems.

    With no interval the difference must vanish near +-inf (equal tail
    values), otherwise the integral does not exist.
    """
    edges, fv, gv = merge_values(f, g)
    diff = np.linalg.norm(fv - gv, axis=1)
    lo, hi = _piece_bounds(edges)
    a = -np.inf if interval is None else interval.a
    b = np.inf if interval is None else interval.b
    lengths = _overlap(lo, hi, a, b)
    unbounded = ~np.isfinite(lengths)
    if np.any(unbounded & (diff != 0.0)):
        raise ValueError("difference does not vanish at infinity; L1 distance undefined")
    lengths = np.where(unbounded, 0.0, lengths)
    return float(np.dot(lengths, diff))


def integrate_piecewise(f: PiecewiseConstantFn, interval: Interval, func) -> float:
    """Exact integral over `interval` of func(u(x)) dx.

    `func` maps an (m, n) array of states to (m,) integrand values.  On an
    unbounded side the integrand must vanish on the tail piece.
    """
    vals = np.asarray(func(f.vals), dtype=float).reshape(-1)
    lo, hi = _piece_bounds(f.xs)
    lengths = _overlap(lo, hi, interval.a, interval.b)
    unbounded = ~np.isfinite(lengths)
    if np.any(unbounded & (vals != 0.0)):
        raise ValueError("integrand does not vanish on an unbounded piece")
    lengths = np.where(unbounded, 0.0, lengths)
    return float(np.dot(lengths, vals))


def total_variation(f: PiecewiseConstantFn, interval: Interval | None = None) -> float:
    """Sum of |jump| over breakpoints inside the interval.

    Endpoint closure flags decide whether a jump sitting exactly on an
    endpoint is counted.
    """
    xs, jumps = f.jumps()
    if xs.size == 0:
        return 0.0
    sizes = np.linalg.norm(jumps, axis=1)
    if interval is None:
        return float(sizes.sum())
    left = xs >= interval.a if interval.include_a else xs > interval.a
    right = xs <= interval.b if interval.include_b else xs < interval.b
    return float(sizes[left & right].sum())


def w_functional(u_at_t: PiecewiseConstantFn, t: float, xi: float, zeta: float) -> float:
    """Variation of u(t) on the shrinking open interval ]xi+t, zeta-t[; 0 once empty."""
    if not xi + t < zeta - t:
        return 0.0
    return total_variation(u_at_t, Interval(xi + t, zeta - t))


def partition(u: PiecewiseConstantFn, eps: float):
    """Greedy variation partition: y_{k+1} = sup{x > y_k : TV ]y_k, x[ <= eps}.

    Returns (points, N) where points are the finite partition points (possibly
    empty) and N = len(points).  Each produced point sits on a jump of u; the
    variation on every open gap is <= eps and on every half-open gap
    ]y_{k-1}, y_k] is >= eps.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    xs, jumps = u.jumps()
    sizes = np.linalg.norm(jumps, axis=1)
    points = []
    start = 0  # first jump index not yet attributed to a closed gap
    while start < xs.size:
        cum = np.cumsum(sizes[start:])
        over = np.nonzero(cum > eps)[0]
        if over.size == 0:
            break
        stop = start + int(over[0])
        points.append(float(xs[stop]))
        start = stop + 1
    return tuple(points), len(points)


def _cum_from_right(sizes):
    # cum[i] = total jump strictly to the right of position i in the list
    out = np.zeros(sizes.size)
    if sizes.size > 1:
        out[:-1] = np.cumsum(sizes[::-1])[::-1][1:]
    return out


def refine_partition(u: PiecewiseConstantFn, y, eps: float):
    """Companion points y'_k < y_k < y''_k with at most eps^2 variation between.

    The chain y_0 < y''_0 <= y'_1 < y_1 < ... is preserved by capping each
    point at the midpoint of its gap.  Points are pushed as far from y_k as
    the eps^2 budget allows, by scanning cumulative jump sums.
    """
    y = [float(v) for v in y]
    if any(b <= a for a, b in zip(y, y[1:])):
        raise ValueError("partition points must be strictly increasing")
    xs, jumps = u.jumps()
    sizes = np.linalg.norm(jumps, axis=1)
    budget = eps * eps

    y_prime, y_dprime = [], []
    for k, yk in enumerate(y):
        gap_lo = y[k - 1] if k > 0 else -np.inf
        gap_hi = y[k + 1] if k + 1 < len(y) else np.inf
        cap_lo = 0.5 * (gap_lo + yk) if np.isfinite(gap_lo) else None
        cap_hi = 0.5 * (yk + gap_hi) if np.isfinite(gap_hi) else None

        # left companion: jumps in (gap_lo, yk), walk backwards from yk
        mask = (xs > gap_lo) & (xs < yk)
        pos, sz = xs[mask], sizes[mask]
        if pos.size == 0:
            yp = cap_lo if cap_lo is not None else yk - 1.0
        else:
            if sz.sum() <= budget:
                # budget never binds: may go past all jumps
                yp = cap_lo if cap_lo is not None else float(pos[0]) - 1.0
            else:
                # placing y' at jump j excludes j itself from ]y', yk[;
                # tail sums are non-increasing in j, take the first admissible
                tail = _cum_from_right(sz)
                yp = float(pos[int(np.argmax(tail <= budget))])
            if cap_lo is not None:
                yp = max(yp, cap_lo)
        y_prime.append(yp)

        # right companion, mirrored
        mask = (xs > yk) & (xs < gap_hi)
        pos, sz = xs[mask], sizes[mask]
        if pos.size == 0:
            yd = cap_hi if cap_hi is not None else yk + 1.0
        else:
            if sz.sum() <= budget:
                yd = cap_hi if cap_hi is not None else float(pos[-1]) + 1.0
            else:
                head = np.concatenate(([0.0], np.cumsum(sz)[:-1]))
                ok = head <= budget
                yd = float(pos[pos.size - 1 - int(np.argmax(ok[::-1]))])
            if cap_hi is not None:
                yd = min(yd, cap_hi)
        y_dprime.append(yd)

    return tuple(y_prime), tuple(y_dprime)


def project_piecewise(u: PiecewiseConstantFn, a: float, b: float, t: float) -> PiecewiseConstantFn:
    """Grid sampling on x_k = a + k*t: the approximation equals u(x_k) on [x_k, x_{k+1}).

    Requires 0 < t < (b-a)/2.  The result is meaningful on [a+t, b-t); it is
    extended constantly outside for convenience.
    """
    if not (0.0 < t < (b - a) / 2.0):
        raise ValueError("need 0 < t < (b-a)/2")
    n_cells = int(np.floor((b - a) / t + 1e-12))
    ks = np.arange(1, n_cells)  # pieces k = 1 .. N-1
    grid = a + ks * t
    samples = u.values_at(grid)
    return PiecewiseConstantFn(grid[1:], samples)


# -- text serialization ------------------------------------------------------

def to_text(f: PiecewiseConstantFn) -> str:
    """One line per piece: left endpoint then state components."""
    lines = [f"n={f.n} pieces={f.npieces}"]
    lefts = np.concatenate(([-np.inf], f.xs))
    for x, v in zip(lefts, f.vals):
        comps = " ".join(repr(float(c)) for c in v)
        lines.append(f"{'-inf' if np.isinf(x) else repr(float(x))} {comps}")
    return "\n".join(lines) + "\n"


def from_text(text: str) -> PiecewiseConstantFn:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty piecewise-constant file")
    header = lines[0].split()
    try:
        fields = dict(part.split("=") for part in header)
        n = int(fields["n"])
        pieces = int(fields["pieces"])
    except (ValueError, KeyError) as exc:
        raise ValueError(f"bad header {lines[0]!r}") from exc
    if len(lines) - 1 != pieces:
        raise ValueError(f"expected {pieces} piece lines, got {len(lines) - 1}")
    xs, vals = [], []
    for lineno, ln in enumerate(lines[1:], start=2):
        parts = ln.split()
        if len(parts) != n + 1:
            raise ValueError(f"line {lineno}: expected {n + 1} fields, got {len(parts)}")
        x = -np.inf if parts[0] == "-inf" else float(parts[0])
        if lineno == 2:
            if np.isfinite(x):
                raise ValueError("line 2: first piece must start at -inf")
        else:
            xs.append(x)
        vals.append([float(p) for p in parts[1:]])
    return PiecewiseConstantFn(np.array(xs), np.array(vals))
