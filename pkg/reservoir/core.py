"""
Reservoir construction and state update

Random draw order for one build is fixed: adjacency pattern, adjacency values
(repeated together on a degenerate redraw), input weights, bias vector. The
initial reservoir state comes from its own stream, SeedSequence((seed, 1)).
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence, Union

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from .errors import ReservoirError, require

logger = logging.getLogger(__name__)

# Eigenvalue solver settings; tol 0 asks ARPACK for machine precision
SPECTRAL_TOLERANCE = 0.0
DENSE_EIGEN_LIMIT = 64
START_VECTOR_SEED = 7_919
ARPACK_EIGENVALUES = 6

# Raw draws below this radius are rejected
DEGENERATE_RADIUS = 1e-12
MAX_REDRAWS = 16

# Adjacency matrices denser than this are multiplied as dense arrays
DENSE_OPERATOR_FILL = 0.1

STATE_STREAM = 1

Matrix = Union[np.ndarray, sparse.spmatrix]


@dataclass(frozen=True)
class ReservoirConfig:
    """Hyperparameters of one reservoir: (D_r, d, rho, alpha, sigma, lambda) plus dimensions"""

    d_r: int
    density: float
    spectral_radius: float
    leak: float
    input_scale: float
    ridge: float
    d_in: int
    d_out: int
    dt: float = 1.0
    seed: int = 0
    parameter_aware: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """Check the configuration invariants"""
        require(int(self.d_r) >= 1, "d_r must be at least 1", {"d_r": self.d_r})
        require(0.0 <= self.density <= 1.0, "density must lie in [0, 1]", {"density": self.density})
        require(self.spectral_radius > 0.0, "spectral_radius must be positive", {"spectral_radius": self.spectral_radius})
        require(0.0 < self.leak <= 1.0, "leak must lie in (0, 1]", {"leak": self.leak})
        require(self.input_scale > 0.0, "input_scale must be positive", {"input_scale": self.input_scale})
        require(self.ridge >= 0.0, "ridge must be non-negative", {"ridge": self.ridge})
        require(int(self.d_in) >= 1, "d_in must be at least 1", {"d_in": self.d_in})
        require(self.d_in == self.d_out, "d_in must equal d_out", {"d_in": self.d_in, "d_out": self.d_out})
        require(self.dt > 0.0, "dt must be positive", {"dt": self.dt})

    def replace(self, **changes: Any) -> "ReservoirConfig":
        """Return a copy with some fields changed"""
        data = self.to_dict()
        data.update(changes)
        return ReservoirConfig.from_dict(data)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "d_r": int(self.d_r),
            "density": float(self.density),
            "spectral_radius": float(self.spectral_radius),
            "leak": float(self.leak),
            "input_scale": float(self.input_scale),
            "ridge": float(self.ridge),
            "d_in": int(self.d_in),
            "d_out": int(self.d_out),
            "dt": float(self.dt),
            "seed": int(self.seed),
            "parameter_aware": bool(self.parameter_aware),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ReservoirConfig":
        return cls(
            d_r=int(data["d_r"]),
            density=float(data["density"]),
            spectral_radius=float(data["spectral_radius"]),
            leak=float(data["leak"]),
            input_scale=float(data["input_scale"]),
            ridge=float(data["ridge"]),
            d_in=int(data["d_in"]),
            d_out=int(data.get("d_out", data["d_in"])),
            dt=float(data.get("dt", 1.0)),
            seed=int(data.get("seed", 0)),
            parameter_aware=bool(data.get("parameter_aware", True)),
        )


@dataclass(frozen=True, eq=False)
class ReservoirState:
    """Node states r(t) of one trajectory run"""

    r: np.ndarray

    def copy(self) -> "ReservoirState":
        return ReservoirState(self.r.copy())

    def is_bounded(self) -> bool:
        return bool(np.all(np.abs(self.r) <= 1.0))


@dataclass(frozen=True, eq=False)
class Reservoir:
    """Fixed random network: adjacency A, input weights W_in and bias b"""

    a: sparse.csr_matrix
    w_in: np.ndarray
    b: np.ndarray
    config: ReservoirConfig
    operator: Matrix = field(init=False, repr=False)

    def __post_init__(self):
        n = self.config.d_r
        require(self.a.shape == (n, n), "adjacency shape does not match d_r", {"shape": self.a.shape})
        require(self.w_in.shape == (n, self.config.d_in), "w_in shape does not match config", {"shape": self.w_in.shape})
        require(self.b.shape == (n,), "bias shape does not match d_r", {"shape": self.b.shape})

        # Dense products are faster for the heavily filled presets
        if self.a.nnz > DENSE_OPERATOR_FILL * n * n:
            operator = self.a.toarray()
        else:
            operator = self.a
        object.__setattr__(self, "operator", operator)

    @property
    def size(self) -> int:
        return self.config.d_r

    def advance(self, r: np.ndarray, u: np.ndarray, beta: float) -> np.ndarray:
        """Equation r' = (1-alpha) r + alpha tanh(A r + W_in u + beta b) without argument checks"""
        alpha = self.config.leak
        return (1.0 - alpha) * r + alpha * np.tanh(self.operator @ r + self.w_in @ u + beta * self.b)


def estimate_spectral_radius(m: Matrix, tol: float = SPECTRAL_TOLERANCE) -> float:
    """Largest eigenvalue magnitude of a square matrix

    Small matrices use the dense eigenvalue solver. Larger ones ask ARPACK for
    the few eigenvalues of largest magnitude, falling back to the dense solver
    when it does not converge.
    """
    require(m.ndim == 2 and m.shape[0] == m.shape[1], "spectral radius needs a square matrix", {"shape": m.shape})
    n = m.shape[0]
    matrix = m.tocsr() if sparse.issparse(m) else sparse.csr_matrix(np.asarray(m, dtype=float))
    require(bool(np.all(np.isfinite(matrix.data))), "matrix entries must be finite")
    if n == 0 or matrix.nnz == 0:
        return 0.0
    if n <= DENSE_EIGEN_LIMIT:
        return _dense_radius(matrix)

    v0 = np.random.default_rng(START_VECTOR_SEED).random(n)
    k = min(ARPACK_EIGENVALUES, n - 2)
    try:
        eigenvalues = splinalg.eigs(matrix, k=k, which="LM", v0=v0, tol=tol, return_eigenvectors=False)
    except splinalg.ArpackError:
        logger.warning(f"ARPACK did not converge for a {n}x{n} matrix, using the dense solver")
        return _dense_radius(matrix)

    radius = float(np.max(np.abs(eigenvalues)))
    logger.debug(f"Spectral radius {radius:.12g} from the {k} largest eigenvalues")
    return radius


def _dense_radius(matrix: sparse.spmatrix) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(matrix.toarray()))))


def rescale_spectral_radius(m: Matrix, rho: float, radius: Optional[float] = None) -> Matrix:
    """Scale m so that its spectral radius becomes rho"""
    require(rho > 0.0, "target spectral radius must be positive", {"rho": rho})
    if radius is None:
        radius = estimate_spectral_radius(m)
    if radius < DEGENERATE_RADIUS:
        raise ReservoirError(ReservoirError.DEGENERATE_DRAW, "zero spectral radius", {"radius": radius})

    scaled = m * (rho / radius)
    return scaled.tocsr() if sparse.issparse(scaled) else scaled


def build_reservoir(config: ReservoirConfig, seed: Optional[int] = None) -> Reservoir:
    """Draw an Erdos-Renyi reservoir with its spectral radius rescaled to config.spectral_radius"""
    seed = config.seed if seed is None else seed
    if seed != config.seed:
        config = config.replace(seed=seed)
    rng = np.random.default_rng(seed)
    n = config.d_r

    for attempt in range(1, MAX_REDRAWS + 1):
        pattern = rng.random((n, n)) < config.density
        rows, cols = np.nonzero(pattern)
        values = rng.uniform(-1.0, 1.0, rows.size)
        raw = sparse.csr_matrix((values, (rows, cols)), shape=(n, n))

        radius = estimate_spectral_radius(raw)
        if radius >= DEGENERATE_RADIUS:
            break
        logger.warning(f"Reservoir draw {attempt} is degenerate (radius {radius:.3g}), redrawing")
    else:
        raise ReservoirError(
            ReservoirError.DEGENERATE_DRAW, "degenerate reservoir draw", {"seed": seed, "attempts": MAX_REDRAWS}
        )

    a = rescale_spectral_radius(raw, config.spectral_radius, radius)
    w_in = rng.uniform(-config.input_scale, config.input_scale, (n, config.d_in))
    b = rng.uniform(-config.input_scale, config.input_scale, n)
    if not config.parameter_aware:
        b = np.zeros(n)

    logger.info(f"Built reservoir d_r={n} nnz={a.nnz} rho={config.spectral_radius} seed={seed}")
    return Reservoir(a=a, w_in=w_in, b=b, config=config)


def initial_state(config: ReservoirConfig, seed: Optional[int] = None) -> ReservoirState:
    """Uniform [-1, 1] start state drawn from the state stream of the seed"""
    seed = config.seed if seed is None else seed
    rng = np.random.default_rng([seed, STATE_STREAM])
    return ReservoirState(rng.uniform(-1.0, 1.0, config.d_r))


def step(res: Reservoir, state: ReservoirState, u: Sequence[float], beta: float) -> ReservoirState:
    """One reservoir update under input u and control parameter beta"""
    u = np.asarray(u, dtype=float)
    require(u.shape == (res.config.d_in,), "input dimension does not match d_in", {"shape": u.shape})
    require(state.r.shape == (res.size,), "state dimension does not match d_r", {"shape": state.r.shape})
    if not (np.all(np.isfinite(u)) and np.isfinite(beta)):
        raise ReservoirError(ReservoirError.NON_FINITE_DRIVE, "non-finite drive", {"u": u.tolist(), "beta": beta})

    return ReservoirState(res.advance(state.r, u, float(beta)))


def drive(
    res: Reservoir, state0: ReservoirState, inputs: Union[np.ndarray, Sequence[Sequence[float]]], betas: Sequence[float]
) -> np.ndarray:
    """Open-loop drive; column k of the result is the state after the k-th input

    inputs is d_in x L (or a sequence of L input vectors). The last column is
    the final state; state0 is not modified.
    """
    inputs = _as_input_block(inputs, res.config.d_in)
    betas = np.asarray(betas, dtype=float).reshape(-1)
    require(
        inputs.shape[1] == betas.size, "inputs and betas differ in length", {"inputs": inputs.shape[1], "betas": betas.size}
    )
    if not (np.all(np.isfinite(inputs)) and np.all(np.isfinite(betas))):
        raise ReservoirError(ReservoirError.NON_FINITE_DRIVE, "non-finite drive")

    states = np.empty((res.size, betas.size))
    r = state0.r
    for k in range(betas.size):
        r = res.advance(r, inputs[:, k], betas[k])
        states[:, k] = r
    return states


def _as_input_block(inputs: Union[np.ndarray, Sequence[Sequence[float]]], d_in: int) -> np.ndarray:
    """Coerce inputs to a d_in x L array"""
    block = np.asarray(inputs, dtype=float)
    if block.size == 0:
        return np.empty((d_in, 0))
    if block.ndim == 2 and block.shape[0] != d_in and block.shape[1] == d_in:
        block = block.T
    require(block.ndim == 2 and block.shape[0] == d_in, "inputs must be d_in x L", {"shape": block.shape})
    return block
