"""The half-line operator T and its powers.

Propagation speed is finite, so stepping a compactly supported input inside a
large enough window is exact: no truncation, only rounding.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

from .errors import WindowError
from .output import write_csv
from .resolvent import residue_closed_form, spatial_green_structured
from .scheme import Scheme
from .spectral import LopatinskiiRoot


@dataclass(frozen=True)
class GridState:
    """Interior values j = 1..J (rows) and the r ghosts nu = 1-r..0.

    Both arrays may carry a trailing axis of independent columns.
    """

    interior: np.ndarray
    ghosts: np.ndarray

    @property
    def J(self) -> int:
        return self.interior.shape[0]

    def full(self) -> np.ndarray:
        """w_{1-r}, ..., w_J stacked along the first axis."""
        return np.concatenate((self.ghosts, self.interior), axis=0)


def ghosts_from(scheme: Scheme, interior: np.ndarray) -> np.ndarray:
    head = interior[: scheme.p_b]
    rows = [np.tensordot(scheme.b_row(nu), head, axes=(0, 0)) for nu in range(1 - scheme.r, 1)]
    return np.stack(rows, axis=0)


def make_state(scheme: Scheme, interior) -> GridState:
    interior = np.asarray(interior)
    if not np.iscomplexobj(interior):
        interior = interior.astype(float)
    return GridState(interior, ghosts_from(scheme, interior))


def dirac(scheme: Scheme, j0: int, J: int) -> GridState:
    u = np.zeros(J)
    u[j0 - 1] = 1.0
    return make_state(scheme, u)


def step(scheme: Scheme, state: GridState, check_edge: bool = True) -> GridState:
    """One application of T: interior stencil first, then ghosts from the new interior."""
    r, p, J = scheme.r, scheme.p, state.J
    if check_edge and np.any(state.interior[J - r:] != 0):
        raise WindowError(f"support reached the last {r} cell(s) of the window J = {J}")
    pad = np.zeros((p,) + state.interior.shape[1:], dtype=state.interior.dtype)
    ext = np.concatenate((state.ghosts, state.interior, pad), axis=0)
    new = np.zeros_like(state.interior)
    for ell in range(-r, p + 1):
        new = new + scheme.coef(ell) * ext[ell + r: ell + r + J]
    return GridState(new, ghosts_from(scheme, new))


def apply_power(scheme: Scheme, state: GridState, n: int) -> GridState:
    for _ in range(n):
        state = step(scheme, state)
    return state


@dataclass(frozen=True)
class TemporalGreenField:
    n: int
    j0: int
    j: np.ndarray  # 1-r .. J
    values: np.ndarray
    alpha: float

    def at(self, j) -> np.ndarray:
        return self.values[np.asarray(j) - self.j[0]]

    def interior(self) -> np.ndarray:
        return self.values[self.j >= 1]


def exact_window(scheme: Scheme, j0: int, n: int) -> int:
    return j0 + scheme.r * n + scheme.p + scheme.r + 1


def _field(scheme: Scheme, state: GridState, n: int, j0: int) -> TemporalGreenField:
    return TemporalGreenField(n, j0, np.arange(1 - scheme.r, state.J + 1), state.full(), scheme.lambda_a)


def temporal_green(scheme: Scheme, j0: int, n: int, J: Optional[int] = None) -> TemporalGreenField:
    """(T^n delta_{j0})_j by n exact steps."""
    need = exact_window(scheme, j0, n)
    J = need if J is None else J
    if J < need:
        raise WindowError(f"window J = {J} too small for exact propagation, need J >= {need}")
    return _field(scheme, apply_power(scheme, dirac(scheme, j0, J), n), n, j0)


def temporal_green_snapshots(scheme: Scheme, j0: int, n_list: Iterable[int],
                             J: Optional[int] = None) -> Dict[int, TemporalGreenField]:
    """Fields at every n in ``n_list`` from a single stepping run."""
    wanted = sorted(set(int(n) for n in n_list))
    need = exact_window(scheme, j0, wanted[-1])
    J = need if J is None else J
    if J < need:
        raise WindowError(f"window J = {J} too small for exact propagation, need J >= {need}")
    state = dirac(scheme, j0, J)
    out, n = {}, 0
    for target in wanted:
        state = apply_power(scheme, state, target - n)
        n = target
        out[n] = _field(scheme, state, n, j0)
    return out


def temporal_green_contour(scheme: Scheme, j0: int, n: int, rho: float = 1.2, n_nodes: int = 512,
                           J: Optional[int] = None) -> TemporalGreenField:
    """(1 / 2 pi i) contour integral of z^n G_z(j, j0) over |z| = rho, trapezoid rule."""
    if not rho > 1:
        raise ValueError(f"rho = {rho} must exceed 1 so the contour lies in the resolvent set")
    if n_nodes < 256 or n_nodes & (n_nodes - 1):
        raise ValueError("n_nodes must be a power of two >= 256")
    J = exact_window(scheme, j0, n) if J is None else J
    acc = np.zeros(J + scheme.r, dtype=complex)
    for m in range(n_nodes):
        z = rho * np.exp(2j * np.pi * m / n_nodes)
        acc += z ** (n + 1) * spatial_green_structured(scheme, z, j0, J).values
    return TemporalGreenField(n, j0, np.arange(1 - scheme.r, J + 1), acc / n_nodes, scheme.lambda_a)


# --------------------------------------------------------------------------
# empirical power norms


@dataclass(frozen=True)
class NormProbe:
    n: np.ndarray
    envelope: np.ndarray  # sup over inputs of |T^n f| / |f|
    worst: np.ndarray  # label of the maximising input at each n
    labels: tuple

    def pairs(self):
        return list(zip(self.n.tolist(), self.envelope.tolist()))


def probe_inputs(scheme: Scheme, J0: int, trials: int, seed: int,
                 roots: Sequence[LopatinskiiRoot] = ()) -> tuple:
    rng = np.random.default_rng(seed)
    cols, labels = [], []
    for t in range(trials):
        cols.append(rng.standard_normal(J0))
        labels.append(f"random-{t}")
    for j0 in range(1, min(5, J0) + 1):
        e = np.zeros(J0)
        e[j0 - 1] = 1.0
        cols.append(e)
        labels.append(f"dirac-{j0}")
    for k, root in enumerate(roots):
        w = residue_closed_form(scheme, root.z, 1, J0)[scheme.r:]
        for part, name in ((w.real, "re"), (w.imag, "im")):
            if np.linalg.norm(part) > 1e-12 * np.linalg.norm(w):
                cols.append(part)
                labels.append(f"surface-{k}-{name}")
    F = np.stack(cols, axis=1)
    return F / np.linalg.norm(F, axis=0), tuple(labels)


def power_norm_probe(scheme: Scheme, n_max: int, J: Optional[int] = None, trials: int = 16,
                     seed: int = 0, J0: int = 20,
                     roots: Sequence[LopatinskiiRoot] = ()) -> NormProbe:
    """Lower envelope of |T^n| from unit inputs supported in [1, J0].

    Inputs are seeded random vectors, Dirac masses at j = 1..5 and the
    (real and imaginary parts of) surface waves of ``roots``.
    """
    F, labels = probe_inputs(scheme, J0, trials, seed, roots)
    need = J0 + scheme.r * n_max + scheme.p + scheme.r + 1
    J = need if J is None else J
    if J < need:
        raise WindowError(f"window J = {J} too small for exact propagation, need J >= {need}")
    interior = np.zeros((J, F.shape[1]))
    interior[:J0] = F
    state = make_state(scheme, interior)
    env = np.empty(n_max + 1)
    worst = np.empty(n_max + 1, dtype=object)
    for n in range(n_max + 1):
        if n:
            state = step(scheme, state)
        norms = np.linalg.norm(state.interior, axis=0)
        k = int(np.argmax(norms))
        env[n], worst[n] = norms[k], labels[k]
    return NormProbe(np.arange(n_max + 1), env, worst, labels)


def write_temporal_csv(fields: Sequence[TemporalGreenField], path) -> str:
    rows = ((f.n, j, v) for f in fields for j, v in zip(f.j, np.real(f.values)))
    return write_csv(path, ("n", "j", "value"), rows)


def write_probe_csv(probe: NormProbe, path) -> str:
    return write_csv(path, ("n", "norm"), zip(probe.n, probe.envelope))
