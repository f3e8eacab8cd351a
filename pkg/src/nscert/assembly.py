"""Discrete operators of the linearized scheme.

All velocity operators are assembled for the full P2 node set; zero
Dirichlet data is imposed afterwards by symmetric elimination of the
boundary dofs (:class:`SaddleSystem`).  Element contributions are
accumulated in element order, so operators are bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fespace import ASSEMBLY_DEGREE, velocity_at_quad


class SolverError(RuntimeError):
    """Direct solve failed to reach the residual tolerance."""

    def __init__(self, message, residual_history):
        super().__init__(f"{message}; residual history {['%.3e' % r for r in residual_history]}")
        self.residual_history = list(residual_history)


def _scatter(local, rows, cols, shape):
    """Sum element matrices ``local`` (nt, nr, nc) into a CSR matrix."""
    r = np.broadcast_to(rows[:, :, None], local.shape).ravel()
    c = np.broadcast_to(cols[:, None, :], local.shape).ravel()
    mat = sp.coo_matrix((local.ravel(), (r, c)), shape=shape).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def _scatter_symmetric(local, dofs, n):
    """Like :func:`_scatter` for symmetric element matrices, exactly symmetric.

    Only entries with global row <= column are summed; the strict upper
    part is then mirrored, so ``(i, j)`` and ``(j, i)`` are the same float.
    """
    r = np.broadcast_to(dofs[:, :, None], local.shape).ravel()
    c = np.broadcast_to(dofs[:, None, :], local.shape).ravel()
    v = local.ravel()
    keep = r <= c
    upper = sp.coo_matrix((v[keep], (r[keep], c[keep])), shape=(n, n)).tocsr()
    upper.sum_duplicates()
    strict = sp.triu(upper, k=1, format="csr")
    mat = (strict + strict.T + sp.diags(upper.diagonal())).tocsr()
    mat.sort_indices()
    return mat


def _vectorize(scalar):
    """Block-diagonal 3x3 copy of a scalar P2 operator (component-major dofs)."""
    return sp.block_diag([scalar] * 3, format="csr")


def _symmetric(local):
    # exact symmetry: a + b == b + a in floating point
    return 0.5 * (local + local.transpose(0, 2, 1))


def _scalar_mass(spaces):
    q = spaces.quad(ASSEMBLY_DEGREE)
    local = _symmetric(np.einsum("tq,qi,qj->tij", q.jxw, q.phi2, q.phi2))
    return _scatter_symmetric(local, spaces.cell_nodes, spaces.num_nodes)


def _scalar_stiffness(spaces):
    q = spaces.quad(ASSEMBLY_DEGREE)
    local = _symmetric(np.einsum("tq,tqik,tqjk->tij", q.jxw, q.dphi2, q.dphi2))
    return _scatter_symmetric(local, spaces.cell_nodes, spaces.num_nodes)


def assemble_mass(spaces):
    """Vector P2 mass matrix, ``(u, v)``."""
    key = "mass"
    if key not in spaces._cache:
        spaces._cache[key] = _vectorize(_scalar_mass(spaces))
    return spaces._cache[key]


def assemble_stiffness(spaces):
    """Vector P2 stiffness matrix, ``(grad u, grad v)``."""
    key = "stiffness"
    if key not in spaces._cache:
        spaces._cache[key] = _vectorize(_scalar_stiffness(spaces))
    return spaces._cache[key]


def assemble_convection(w, spaces):
    """Skew-symmetrized convection operator for the advecting field ``w``.

    Entry ``(i, j)`` is ``1/2 (w . grad phi_j, phi_i) - 1/2 (phi_j, w . grad phi_i)``;
    both terms are integrated separately, which keeps the operator skew at
    quadrature level whether or not ``w`` is divergence free.
    """
    w = np.asarray(w, dtype=float)
    q = spaces.quad(ASSEMBLY_DEGREE)
    wq = velocity_at_quad(w, spaces, ASSEMBLY_DEGREE)  # (3, nt, nq)
    adv = np.einsum("ctq,tqbc->tqb", wq, q.dphi2)  # w . grad phi_b
    first = np.einsum("tq,qi,tqj->tij", q.jxw, q.phi2, adv)
    second = np.einsum("tq,qj,tqi->tij", q.jxw, q.phi2, adv)
    local = 0.5 * first - 0.5 * second
    n = spaces.num_nodes
    return _vectorize(_scatter(local, spaces.cell_nodes, spaces.cell_nodes, (n, n)))


def assemble_divergence(spaces):
    """Pressure-velocity coupling ``B[k, dof] = (div phi_dof, psi_k)``."""
    key = "divergence"
    if key not in spaces._cache:
        q = spaces.quad(ASSEMBLY_DEGREE)
        # (nt, 4, 3, 10): psi_k * d_c phi_i
        local = np.einsum("tq,qk,tqic->tkci", q.jxw, q.phi1, q.dphi2)
        nt = local.shape[0]
        local = local.reshape(nt, 4, 30)
        spaces._cache[key] = _scatter(
            local, spaces.cell_pressure, spaces.cell_velocity_dofs(), (spaces.pressure_dofs, spaces.velocity_dofs)
        )
    return spaces._cache[key]


def assemble_forcing(f, t, spaces, degree=ASSEMBLY_DEGREE):
    """Load vector ``(f(t), phi_i)`` for a vector field ``f``."""
    q = spaces.quad(degree)
    fq = f.at_points(q.points, t)  # (3, nt, nq)
    local = np.einsum("tq,ctq,qi->cti", q.jxw, fq, q.phi2)
    n = spaces.num_nodes
    out = np.zeros(3 * n)
    for c in range(3):
        out[c * n : (c + 1) * n] = np.bincount(spaces.cell_nodes.ravel(), weights=local[c].ravel(), minlength=n)
    return out


@dataclass(eq=False)
class SaddleSystem:
    """Velocity block ``A``, divergence block ``B`` and the pressure-mean row.

    The assembled system, on interior velocity dofs, is::

        [ A    -B^T   0 ] [u]   [rhs_velocity]
        [-B     0     m ] [p] = [0           ]
        [ 0     m^T   0 ] [l]   [pressure_mean]

    where ``m`` integrates a P1 pressure; the multiplier ``l`` vanishes at
    the solution because constants lie in the kernel of ``B^T``.
    """

    A: sp.csr_matrix  # full velocity operator; restricted on solve
    B: sp.csr_matrix
    rhs_velocity: np.ndarray
    zero_mean_constraint: np.ndarray
    pressure_mean: float = 0.0

    def matrix(self, interior):
        A = self.A[interior][:, interior]
        B = self.B[:, interior]
        m = sp.csr_matrix(self.zero_mean_constraint.reshape(-1, 1))
        return sp.bmat([[A, -B.T, None], [-B, None, m], [None, m.T, None]], format="csc")

    def solve(self, spaces, tol=1e-10, max_refinements=3):
        """Direct sparse LU solve with iterative refinement.

        Returns ``(velocity, pressure, relative_residual)``.  Raises
        :class:`SolverError` if the residual stays above ``tol``.
        """
        interior = spaces.interior_velocity_dofs
        K = self.matrix(interior)
        ni = len(interior)
        npr = spaces.pressure_dofs
        rhs = np.concatenate([self.rhs_velocity[interior], np.zeros(npr), [self.pressure_mean]])
        bnorm = np.linalg.norm(rhs)
        history = []
        if bnorm == 0.0:
            x = np.zeros_like(rhs)
            history.append(0.0)
        else:
            try:
                lu = spla.splu(K)
            except RuntimeError as exc:
                raise SolverError(f"factorization failed: {exc}", [np.inf]) from exc
            x = lu.solve(rhs)
            for _ in range(max_refinements + 1):
                r = rhs - K @ x
                history.append(float(np.linalg.norm(r) / bnorm))
                if not np.isfinite(history[-1]):
                    raise SolverError("non-finite residual", history)
                if history[-1] <= tol:
                    break
                x = x + lu.solve(r)
            else:
                raise SolverError("residual above tolerance", history)
        u = np.zeros(spaces.velocity_dofs)
        u[interior] = x[:ni]
        p = x[ni : ni + npr].copy()
        return u, p, history[-1]
