import os
import dircalc as dc
import numpy as np
import matplotlib.pyplot as plt
from dircalc.dc_math import fit_line

if __name__=="__main__":

    os.makedirs("dev/results", exist_ok=True)

    # Dumbbells and tori of growing block size
    n_list = [4, 6, 8]
    constants = {"dumbbell" : [], "torus_grid" : []}
    for n in n_list:
        for kind, params in [("dumbbell", {"d" : 2, "n" : n, "neck" : 2}), ("torus_grid", {"d" : 2, "n" : n})]:
            space = dc.generate(kind, params)
            spec = dc.decompose(space)
            report = dc.run_probe("Pp", space, spec, params={"p" : 2})
            constants[kind].append(report.fit["constant"])

    # Growth against block size
    print()
    print("{0:<15}{1:<20}{2:<20}".format("Kind", "Growth exponent", "Max/min"))
    print("".join(["-"]*55))
    plt.figure()
    for kind, values in constants.items():
        values = np.array(values)
        fit = fit_line(np.log(n_list), np.log(values))
        print("{0:<15}{1:<20.8f}{2:<20.8f}".format(kind, fit["slope"], np.max(values)/np.min(values)))
        plt.plot(n_list, values, 'o-', label=kind)
    plt.xscale('log')
    plt.yscale('log')
    plt.xlabel('Block size $n$')
    plt.ylabel('Poincare constant')
    plt.legend()
    plt.savefig("dev/results/dumbbell_poincare.pdf")
    plt.close()
