"""Simulated multiqudit SPAM experiments.

A single state device prepares ``N`` joint states of ``m`` qudits and each
qudit has its own measurement device. States and observables are stored by
their real coefficients in a self-dual Hermitian operator basis::

    rho_a   = R[a, mu_1, ..., mu_m] sigma_mu_1 (x) ... (x) sigma_mu_m
    Sigma^i = W_q[mu, i] sigma^mu

so uncorrelated data is the plain contraction
``S[a, i_1, ..., i_m] = R[a, mu...] W_1[mu_1, i_1] ... W_m[mu_m, i_m]``.

Correlations are injected as seeded perturbations whose direction depends
jointly on the settings being correlated (see :class:`CorrelationConfig`).
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BadDimension, ConditioningFailure, IncompatibleDevices
from .linalg import condition_number

# purpose tags mixed into every RNG stream key
_TAG_DEVICES = 0x5EED
_TAG_SPAM = 0x5BA3
_TAG_NONLOCAL = 0x9017
_TAG_SHOTS = 0x5407

RESAMPLE_BUDGET = 100
DEVICE_KAPPA_MAX = 1e6
# spread of the traceless state coefficients, relative to the trace coefficient
STATE_SPREAD = 0.5


def _rng(*key):
    return np.random.default_rng(np.random.SeedSequence([int(k) & 0xFFFFFFFFFFFFFFFF for k in key]))


@dataclass(frozen=True)
class OperatorBasis:
    d: int
    sigma: np.ndarray  # (d*d, d, d)
    dual: np.ndarray

    def gram(self):
        return np.einsum("aij,bji->ab", self.sigma, self.dual).real

    def expand(self, op):
        """Real coefficients of a Hermitian operator: ``c_mu = Tr(op sigma^mu)``."""
        return np.einsum("ij,aji->a", op, self.dual).real


def make_basis(d):
    """Trace-orthonormal Hermitian basis ``{I/sqrt(d)}`` plus generalized Gell-Mann matrices.

    For ``d = 2`` this is ``{I, X, Y, Z}/sqrt(2)``. The basis is self-dual.
    """
    if int(d) != d or d < 2:
        raise BadDimension(f"qudit dimension must be an integer >= 2, got {d}")
    d = int(d)
    ops = [np.eye(d, dtype=complex) / math.sqrt(d)]
    for j in range(d):
        for k in range(j + 1, d):
            sym = np.zeros((d, d), dtype=complex)
            sym[j, k] = sym[k, j] = 1 / math.sqrt(2)
            asym = np.zeros((d, d), dtype=complex)
            asym[j, k] = -1j / math.sqrt(2)
            asym[k, j] = 1j / math.sqrt(2)
            ops += [sym, asym]
    for l in range(1, d):
        diag = np.zeros(d)
        diag[:l] = 1.0
        diag[l] = -l
        ops.append(np.diag(diag / math.sqrt(l * (l + 1))).astype(complex))
    sigma = np.array(ops)
    return OperatorBasis(d=d, sigma=sigma, dual=sigma.copy())


def kron_all(ops):
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


@dataclass(frozen=True)
class StateDevice:
    R: np.ndarray  # (N, d^2, ..., d^2)
    d: int

    @property
    def N(self):
        return self.R.shape[0]

    @property
    def m(self):
        return self.R.ndim - 1

    def density(self, a, basis=None):
        """Reconstruct ``rho_a`` as a ``d^m x d^m`` complex matrix."""
        basis = basis or make_basis(self.d)
        return coefficients_to_operator(self.R[a], basis)


@dataclass(frozen=True)
class MeasurementDevice:
    qudit_index: int  # 1-based
    W: np.ndarray     # (d^2, M)

    @property
    def M(self):
        return self.W.shape[1]

    @property
    def d(self):
        return math.isqrt(self.W.shape[0])

    def observable(self, i, basis=None):
        basis = basis or make_basis(self.d)
        return np.einsum("a,aij->ij", self.W[:, i], basis.dual)


def coefficients_to_operator(coeffs, basis):
    """``sum coeffs[mu...] sigma_mu (x) ...`` for a coefficient tensor of any order."""
    coeffs = np.asarray(coeffs)
    m = coeffs.ndim
    dim = basis.d ** m
    out = np.zeros((dim, dim), dtype=complex)
    for idx in zip(*np.nonzero(coeffs)):
        out += coeffs[idx] * kron_all([basis.sigma[mu] for mu in idx])
    return out


@dataclass(frozen=True)
class CorrelationConfig:
    """Which correlation to inject.

    ``kind`` is ``"none"``, ``"spam"`` (``qudits=(q,)``: the state depends
    jointly on the preparation and qudit ``q``'s measurement setting) or
    ``"nonlocal"`` (``qudits=(p, q)``: the joint observable of qudits ``p``
    and ``q`` is not a product). Qudits are numbered from 1.
    """

    kind: str = "none"
    qudits: tuple = ()
    strength: float = 0.0
    seed: int = 0

    def __post_init__(self):
        expected = {"none": 0, "spam": 1, "nonlocal": 2}
        if self.kind not in expected:
            raise ValueError(f"unknown correlation kind {self.kind!r}")
        object.__setattr__(self, "qudits", tuple(int(q) for q in self.qudits))
        if len(self.qudits) != expected[self.kind]:
            raise ValueError(f"{self.kind} correlation takes {expected[self.kind]} qudit(s), got {self.qudits}")
        if self.kind == "nonlocal" and self.qudits[0] == self.qudits[1]:
            raise ValueError("nonlocal correlation needs two distinct qudits")
        if not 0.0 <= self.strength <= 1.0:
            raise ValueError(f"strength must lie in [0, 1], got {self.strength}")

    @classmethod
    def parse(cls, text, strength=0.0, seed=0):
        """Parse ``none``, ``spam:q`` or ``nonlocal:p,q``."""
        kind, _, rest = text.strip().partition(":")
        qudits = tuple(int(t) for t in rest.split(",") if t.strip()) if rest else ()
        return cls(kind=kind, qudits=qudits, strength=strength, seed=seed)

    @property
    def label(self):
        if self.kind == "none":
            return "none"
        return f"{self.kind}:{','.join(map(str, self.qudits))}"

    @property
    def active(self):
        return self.kind != "none" and self.strength > 0.0

    def to_dict(self):
        return {"kind": self.kind, "qudits": list(self.qudits),
                "strength": self.strength, "seed": self.seed}


@dataclass
class DataTensor:
    """The full record of an experiment: ``values[a, i_1, ..., i_m]``."""

    m: int
    d: int
    values: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != self.m + 1:
            raise ValueError(f"tensor has {self.values.ndim} axes, expected m+1 = {self.m + 1}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("tensor has non-finite values")

    @property
    def shape(self):
        return self.values.shape


def _state_coefficients(rng, n, m, d):
    anchor = d ** (-m / 2)
    R = STATE_SPREAD * anchor * rng.standard_normal((n,) + (d * d,) * m)
    R[(slice(None),) + (0,) * m] = anchor
    return R


def _observable_coefficients(rng, d, M):
    W = rng.standard_normal((d * d, M))
    # setting 0 is the identity observable, used for "1" (trace-out) slots
    W[:, 0] = 0.0
    W[0, 0] = math.sqrt(d)
    return W


def _well_conditioned(state, measurements, d):
    flat = state.R.reshape(state.N, -1)
    n = min(state.N, flat.shape[1])
    s = np.linalg.svd(flat[:n], compute_uv=False)
    if s[-1] == 0 or s[0] / s[-1] > DEVICE_KAPPA_MAX:
        return False
    for dev in measurements:
        k = min(dev.M, d * d)
        if dev.M >= d * d and condition_number(dev.W[:, :k]) > DEVICE_KAPPA_MAX:
            return False
    return True


def random_devices(m, d, N, M_list, seed):
    """Draw a seeded state device and ``m`` measurement devices.

    States are random Hermitian perturbations of the maximally mixed state
    (trace 1, not necessarily positive). Each measurement device reserves
    setting 0 for the identity. Draws whose leading ``d^2`` settings are
    badly conditioned are resampled with derived seeds.
    """
    if m < 1:
        raise ValueError("need at least one qudit")
    make_basis(d)
    M_list = list(M_list)
    if len(M_list) != m:
        raise IncompatibleDevices(f"{len(M_list)} measurement counts for {m} qudits")
    if N < 1 or any(M < 1 for M in M_list):
        raise ValueError("every device needs at least one setting")
    for attempt in range(RESAMPLE_BUDGET):
        rng = _rng(seed, _TAG_DEVICES, attempt)
        state = StateDevice(R=_state_coefficients(rng, N, m, d), d=d)
        meas = [MeasurementDevice(q + 1, _observable_coefficients(rng, d, M))
                for q, M in enumerate(M_list)]
        if _well_conditioned(state, meas, d):
            return state, meas
    raise ConditioningFailure(f"no well-conditioned devices after {RESAMPLE_BUDGET} draws (seed={seed})")


def contract(R, Ws):
    """``R[a, mu...] * prod_q W_q[mu_q, i_q]`` as an (N, M_1, ..., M_m) array."""
    m = R.ndim - 1
    operands = [R, list(range(m + 1))]
    for q, W in enumerate(Ws, start=1):
        operands += [W, [q, m + q]]
    return np.einsum(*operands, [0] + [m + q for q in range(1, m + 1)], optimize=True)


def spam_perturbation(config, N, M_q, m, d):
    """Unit-trace perturbing states ``tau[a, s, mu...]`` for every (a, s) pair."""
    q = config.qudits[0]
    anchor = d ** (-m / 2)
    tau = np.empty((N, M_q) + (d * d,) * m)
    for a in range(N):
        for s in range(M_q):
            rng = _rng(config.seed, _TAG_SPAM, q, a, s)
            block = STATE_SPREAD * anchor * rng.standard_normal((d * d,) * m)
            block[(0,) * m] = anchor
            tau[a, s] = block
    return tau


def nonlocal_perturbation(config, M_p, M_q, d):
    """Traceless pair operators ``G[i, j, mu, nu]``, one per setting pair."""
    p, q = config.qudits
    G = np.empty((M_p, M_q, d * d, d * d))
    for i in range(M_p):
        for j in range(M_q):
            rng = _rng(config.seed, _TAG_NONLOCAL, p, q, i, j)
            block = rng.standard_normal((d * d, d * d))
            block[0, 0] = 0.0
            G[i, j] = block
    return G


def _check_devices(state, measurements):
    m = state.m
    if len(measurements) != m:
        raise IncompatibleDevices(f"state device has {m} qudits but {len(measurements)} measurement devices given")
    for q, dev in enumerate(measurements, start=1):
        if dev.W.shape[0] != state.d ** 2:
            raise IncompatibleDevices(f"measurement device {q} has dimension {dev.d}, state has {state.d}")
        if dev.qudit_index != q:
            raise IncompatibleDevices(f"measurement device in slot {q} is labelled qudit {dev.qudit_index}")


def synthesize(state, measurements, config=None):
    """Data tensor of the (possibly correlated) experiment.

    ``spam:q`` realizes ``rho' = (1 - eps) rho_a + eps tau(a, i_q)``;
    ``nonlocal:p,q`` realizes ``Sigma_p^i (x) Sigma_q^j + eps Gamma^{ij}``.
    With ``eps == 0`` the result is bit-identical to the uncorrelated data.
    """
    config = config or CorrelationConfig()
    _check_devices(state, measurements)
    m, d = state.m, state.d
    Ws = [dev.W for dev in measurements]
    values = contract(state.R, Ws)
    if config.kind != "none":
        if max(config.qudits) > m or min(config.qudits) < 1:
            raise IncompatibleDevices(f"correlation {config.label} refers to a qudit outside 1..{m}")
    if config.active:
        eps = config.strength
        if config.kind == "spam":
            q = config.qudits[0]
            tau = spam_perturbation(config, state.N, Ws[q - 1].shape[1], m, d)
            # tau axes: a, s, mu_1..mu_m ; s is identified with i_q
            operands = [tau, [0, 2 * m + 1] + list(range(1, m + 1))]
            for r, W in enumerate(Ws, start=1):
                out_axis = 2 * m + 1 if r == q else m + r
                operands += [W, [r, out_axis]]
            out = [0] + [2 * m + 1 if r == q else m + r for r in range(1, m + 1)]
            extra = np.einsum(*operands, out, optimize=True)
        else:
            p, q = config.qudits
            G = nonlocal_perturbation(config, Ws[p - 1].shape[1], Ws[q - 1].shape[1], d)
            operands = [state.R, list(range(m + 1)), G, [m + p, m + q, p, q]]
            for r, W in enumerate(Ws, start=1):
                if r not in (p, q):
                    operands += [W, [r, m + r]]
            extra = np.einsum(*operands, [0] + [m + r for r in range(1, m + 1)], optimize=True)
        values = (1.0 - eps) * values + eps * extra if config.kind == "spam" else values + eps * extra
    provenance = {
        "source": "synthetic",
        "m": m,
        "d": d,
        "correlation": config.to_dict(),
    }
    return DataTensor(m=m, d=d, values=values, provenance=provenance)


def born_rule_tensor(state, measurements, config=None):
    """Independent slow path: ``Tr(rho Sigma_1 (x) ... (x) Sigma_m)`` with explicit operators.

    Loops over every setting tuple and builds the realized operators as
    complex matrices, so it shares no contraction code with :func:`synthesize`.
    Intended for small tensors only.
    """
    config = config or CorrelationConfig()
    _check_devices(state, measurements)
    m, d = state.m, state.d
    basis = make_basis(d)
    shape = (state.N,) + tuple(dev.M for dev in measurements)
    rhos = [state.density(a, basis) for a in range(state.N)]
    obs = [[dev.observable(i, basis) for i in range(dev.M)] for dev in measurements]
    eps = config.strength if config.active else 0.0
    tau = gamma = None
    if eps and config.kind == "spam":
        q = config.qudits[0]
        tau_c = spam_perturbation(config, state.N, shape[q], m, d)
        tau = {(a, s): coefficients_to_operator(tau_c[a, s], basis)
               for a in range(state.N) for s in range(shape[q])}
    elif eps and config.kind == "nonlocal":
        p, q = config.qudits
        G = nonlocal_perturbation(config, shape[p], shape[q], d)
        gamma = {(i, j): np.einsum("mn,mab,ncd->acbd", G[i, j], basis.dual, basis.dual).reshape(d * d, d * d)
                 for i in range(shape[p]) for j in range(shape[q])}
    out = np.empty(shape)
    imag_max = 0.0
    for idx in np.ndindex(*shape):
        a, settings = idx[0], idx[1:]
        rho = rhos[a]
        if tau is not None:
            q = config.qudits[0]
            rho = (1 - eps) * rho + eps * tau[(a, settings[q - 1])]
        if gamma is not None:
            p, q = config.qudits
            pair = np.kron(obs[p - 1][settings[p - 1]], obs[q - 1][settings[q - 1]])
            pair = pair + eps * gamma[(settings[p - 1], settings[q - 1])]
            observable = _embed_pair(pair, [obs[r][settings[r]] for r in range(m)], p, q, d)
        else:
            observable = kron_all([obs[r][settings[r]] for r in range(m)])
        val = np.trace(rho @ observable)
        imag_max = max(imag_max, abs(val.imag))
        out[idx] = val.real
    if imag_max > 1e-12:
        raise ArithmeticError(f"Born-rule values have imaginary residue {imag_max:.3g}")
    return out


def _embed_pair(pair, singles, p, q, d):
    """Place a two-qudit operator on qudits p, q alongside single-qudit ones."""
    m = len(singles)
    others = [r for r in range(1, m + 1) if r not in (p, q)]
    # operator on ordering (p, q, others...), then permute tensor factors
    op = np.kron(pair, kron_all([singles[r - 1] for r in others]))
    order = [p, q] + others
    perm = [order.index(r) for r in range(1, m + 1)]
    op = op.reshape((d,) * (2 * m))
    op = op.transpose(perm + [m + x for x in perm])
    return op.reshape(d ** m, d ** m)


def add_shot_noise(tensor, shots, seed):
    """Gaussian proxy for finite sampling: each entry gets ``N(0, 1/shots)`` noise."""
    if not shots >= 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    provenance = dict(tensor.provenance)
    provenance["shots"] = shots
    provenance["noise_seed"] = seed
    if math.isinf(shots):
        return DataTensor(tensor.m, tensor.d, tensor.values.copy(), provenance)
    rng = _rng(seed, _TAG_SHOTS)
    noise = rng.standard_normal(tensor.values.shape) / math.sqrt(shots)
    return DataTensor(tensor.m, tensor.d, tensor.values + noise, provenance)
