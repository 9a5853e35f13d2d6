"""Compile a model + measurement scheme into kernel-ready step operators.

The measured site is rotated into the measurement eigenbasis once, so that
projectors become diagonal index groups inside the kernels; recorded
probabilities are unchanged by the rotation. Three operator replicas are
built at the parameter values (lambda, lambda+h, lambda-h) for synchronized
central finite differences.
"""

from dataclasses import dataclass

import numpy as np

from . import models
from .linalg import SubsystemLayout, dagger, tensor_embed
from .models import MeasurementScheme, ModelSpec, default_scheme, model_layout

DEFAULT_H = 1e-4
EPS_COND = 1e-12


@dataclass(frozen=True)
class Protocol:
    """Kernel-ready description of one evolve-measure cycle."""

    path: str            # "pure" | "mixed"
    layout: SubsystemLayout
    scheme: MeasurementScheme  # None for synthetic outcome groupings
    lam: float           # None for parameter-free protocols
    h: float
    n_out: int
    ops: np.ndarray      # (3, L, L), step operators in the rotated frame
    group: np.ndarray    # (dim,) outcome label per rotated basis index
    init: np.ndarray     # (L,) rotated initial state (psi or vec(rho))
    rotation: np.ndarray  # (dim, dim) frame map W: W |v_k> = |k>
    reset: bool          # re-prepare the initial state after each collapse

    @property
    def dim(self):
        return self.layout.dim

    def state_to_frame(self, state):
        """Map an original-frame pure state into the rotated frame."""
        return self.rotation @ np.asarray(state, dtype=complex)

    def state_from_frame(self, state):
        """Map a rotated-frame pure state back to the original frame."""
        return dagger(self.rotation) @ np.asarray(state, dtype=complex)


def _check_scheme(scheme, layout):
    if not 0 <= scheme.site < layout.n_sites:
        raise ValueError(f"scheme site {scheme.site} out of range")
    if scheme.local_dim != layout.local_dims[scheme.site]:
        raise ValueError(
            f"scheme local dim {scheme.local_dim} does not match layout "
            f"dim {layout.local_dims[scheme.site]} at site {scheme.site}"
        )


def scheme_rotation(scheme, layout):
    """Full-space unitary sending the measurement basis at the scheme's site
    to the computational basis."""
    return tensor_embed(dagger(scheme.vectors), scheme.site, layout)


def compile_protocol(model, scheme=None, lam=None, h=None, reset=False):
    """Build the Protocol for a model at parameter value `lam`.

    With lam=None the three replicas share one operator (no derivative
    information; sampled f-values are identically zero). `h` defaults to
    1e-4 in the natural units of the unknown parameter.
    """
    if not isinstance(model, ModelSpec):
        raise TypeError("compile_protocol expects a ModelSpec")
    layout = model_layout(model)
    if scheme is None:
        scheme = default_scheme(model)
    _check_scheme(scheme, layout)
    h = DEFAULT_H if h is None else float(h)
    if h <= 0:
        raise ValueError("finite-difference step h must be > 0")

    if lam is None:
        center = model
        specs = (center, center, center)
    else:
        if model.lambda_name is None:
            raise ValueError("model has no lambda_name; cannot vary a parameter")
        center = model.with_lambda(lam)
        specs = (center, model.with_lambda(lam + h), model.with_lambda(lam - h))

    path = "mixed" if model.family == "lindblad_chain" else "pure"
    rot = scheme_rotation(scheme, layout)
    raw_ops = [models.step_operator(s) for s in specs]
    if path == "pure":
        ops = np.stack([rot @ op @ dagger(rot) for op in raw_ops])
        init = rot @ models.initial_state(center).data
    else:
        rot_super = np.kron(rot, rot.conj())
        ops = np.stack([rot_super @ op @ dagger(rot_super) for op in raw_ops])
        rho = models.initial_state(center).data
        init = rot_super @ rho.reshape(-1)

    group = np.ascontiguousarray(layout.site_digits(scheme.site), dtype=np.int64)
    return Protocol(
        path=path,
        layout=layout,
        scheme=scheme,
        lam=None if lam is None else float(lam),
        h=h,
        n_out=scheme.n_outcomes,
        ops=np.ascontiguousarray(ops),
        group=group,
        init=np.ascontiguousarray(init),
        rotation=rot,
        reset=bool(reset),
    )


def custom_protocol(ops, group, init, *, path="pure", h=1.0, lam=None, reset=False):
    """Protocol from explicit operators and an outcome grouping; used for
    synthetic channels in tests and analytic oracle models."""
    ops = np.ascontiguousarray(np.asarray(ops, dtype=complex))
    if ops.ndim == 2:
        ops = np.stack([ops, ops, ops])
    group = np.ascontiguousarray(np.asarray(group, dtype=np.int64))
    dim = group.shape[0]
    return Protocol(
        path=path,
        layout=SubsystemLayout((dim,)),
        scheme=None,
        lam=lam,
        h=float(h),
        n_out=int(group.max()) + 1,
        ops=ops,
        group=group,
        init=np.ascontiguousarray(np.asarray(init, dtype=complex)),
        rotation=np.eye(dim, dtype=complex),
        reset=bool(reset),
    )


def bernoulli_protocol(lam, h=1e-5, reset=True):
    """Single-qubit i.i.d. channel with outcome distribution (1-lam, lam).

    The step rotates |0> by Ry(2 asin sqrt(lam)); with reset=True the
    outcomes are independent Bernoulli draws, the textbook oracle with
    per-step information 1/(lam(1-lam)).
    """
    if not 0.0 < lam < 1.0:
        raise ValueError("bernoulli parameter must be in (0, 1)")

    def ry(p):
        th = 2.0 * np.arcsin(np.sqrt(p))
        c, s = np.cos(th / 2.0), np.sin(th / 2.0)
        return np.array([[c, -s], [s, c]], dtype=complex)

    ops = np.stack([ry(lam), ry(lam + h), ry(lam - h)])
    init = np.array([1.0, 0.0], dtype=complex)
    group = np.array([0, 1], dtype=np.int64)
    return custom_protocol(ops, group, init, path="pure", h=h, lam=lam, reset=reset)
