"""Smoke test for the pyvnlearn extension module.

Build and install first:
    pip install --no-build-isolation ./crates/python
"""

import math

import pyvnlearn as vn


def main() -> None:
    u = vn.haar_unitary(3, seed=7)
    gram = [[sum(u[k][r].conjugate() * u[k][c] for k in range(3)) for c in range(3)] for r in range(3)]
    assert all(abs(gram[r][c] - (1 if r == c else 0)) < 1e-12 for r in range(3) for c in range(3))

    terms = vn.lv_expand(2)
    assert sum(c for c, _ in terms) == 1

    # rho (x) identity on one party is a process matrix
    rho = [[0.75, 0.25j], [-0.25j, 0.25]]
    w = [[rho[r // 2][c // 2] * (1 if r % 2 == c % 2 else 0) for c in range(4)] for r in range(4)]
    report = vn.is_process_matrix(w, [2, 2])
    assert report["valid"], report

    sol = vn.solve("causal", 2, 2)
    assert sol.optimal and sol.status == "optimal", sol
    assert abs(sol.objective - 0.8114) <= 2e-3, sol
    assert sol.storage_valid()
    assert abs(sol.fidelity(vn.haar_unitary(2, seed=1)) - sol.objective) < 1e-6
    mean, std = sol.monte_carlo(samples=100, seed=3)
    assert abs(mean - sol.objective) < 1e-6 and std < 1e-3
    assert len(sol.block(0, [1, 0])) == 8

    single = vn.solve("parallel", 3, 1)
    assert math.isclose(single.objective, 4 / 9, abs_tol=2e-3)

    table = vn.reproduce_table(d=2, n_max=2)
    assert len(table) == 6 and all(row["pass"] for row in table)

    try:
        vn.solve("sequential", 2, 1)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown scheme accepted")

    print(f"ok: {sol!r}")


if __name__ == "__main__":
    main()
