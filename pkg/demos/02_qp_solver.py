"""Exercise the ADMM quadratic-program solver on its own.

Small problems with known answers, then a warm-start demonstration on a
perturbed problem sequence like the one receding-horizon control produces.
"""

import numpy as np

from districtflex import QuadraticProgram, SolverSettings, solve_qp, kkt_residuals

# box-constrained scalar: min (x-2)^2 s.t. 0 <= x <= 1  ->  x* = 1
qp = QuadraticProgram(p_mat=np.array([[2.0]]), q=np.array([-4.0]),
                      a_mat=np.array([[1.0]]), l=np.array([0.0]), u=np.array([1.0]))
sol = solve_qp(qp)
print(f"clamped optimum: x = {sol.x[0]:.6f} ({sol.status.value}, {sol.iterations} iters)")

# equality constrained: min x^2 + y^2 s.t. x + y = 1  ->  (0.5, 0.5)
qp = QuadraticProgram(p_mat=2.0 * np.eye(2), q=np.zeros(2),
                      a_mat=np.array([[1.0, 1.0]]), l=np.array([1.0]), u=np.array([1.0]))
sol = solve_qp(qp)
r_prim, r_dual = kkt_residuals(qp, sol)
print(f"split evenly: x = {np.round(sol.x, 6)}, residuals ({r_prim:.2e}, {r_dual:.2e})")

# a random strictly convex QP, solved cold and then warm-started after a
# small perturbation of the linear term (the receding-horizon pattern)
rng = np.random.default_rng(3)
n, m = 30, 40
b_mat = rng.standard_normal((n, n))
p_mat = b_mat @ b_mat.T + np.eye(n)
a_mat = rng.standard_normal((m, n))
x0 = rng.standard_normal(n) * 0.2
mid = a_mat @ x0
qp = QuadraticProgram(p_mat=p_mat, q=rng.standard_normal(n), a_mat=a_mat,
                      l=mid - 1.0, u=mid + 1.0)
cold = solve_qp(qp)
print(f"\ncold solve: {cold.iterations} iterations, objective {cold.objective:.4f}")

qp2 = QuadraticProgram(p_mat=p_mat, q=qp.q + 0.05 * rng.standard_normal(n),
                       a_mat=a_mat, l=qp.l, u=qp.u)
warm = solve_qp(qp2, warm_start=(cold.x, cold.z_dual))
cold2 = solve_qp(qp2)
print(f"perturbed problem: warm {warm.iterations} vs cold {cold2.iterations} iterations")
print(f"objectives agree to {abs(warm.objective - cold2.objective):.2e}")
