import os
import dircalc as dc
import numpy as np
import matplotlib.pyplot as plt
from dircalc.calculus import scale_integrate
from dircalc.dc_math import fit_line, lp_norm

if __name__=="__main__":

    os.makedirs("dev/results", exist_ok=True)

    # Load space
    space = dc.generate("torus_grid", {"d" : 2, "n" : 24})
    spec = dc.decompose(space, verbose=True)
    f = dc.Ensemble(kind="random_signs", count=1, seed=3).fields(spec)[0]

    # Quadrature error of the Calderon formula against the closed form
    ppd_list = np.array([2, 4, 8, 16, 32])
    plt.figure()
    for N in [0.5, 1.0, 2.0]:
        exact = spec.calderon_reconstruct(N, f)
        errors = []
        for ppd in ppd_list:
            grid = dc.ScaleGrid.default(spec, ppd)
            approx = scale_integrate(grid, lambda t: spec.q_op(t, N, f))
            errors.append(lp_norm(approx-exact, space.mu, np.inf)/lp_norm(exact, space.mu, np.inf))
        errors = np.array(errors)
        fit = fit_line(np.log(ppd_list), np.log(errors))
        print("N = {0}: order in points per decade {1}".format(N, -fit["slope"]))
        plt.plot(ppd_list, errors, 'o-', label="$N={0}$".format(N))

    plt.xscale('log')
    plt.yscale('log')
    plt.xlabel('Points per decade')
    plt.ylabel('Relative error')
    plt.legend()
    plt.savefig("dev/results/decomposition_order.pdf")
    plt.close()
