import os
import dircalc as dc
import numpy as np
import matplotlib.pyplot as plt
from dircalc.dc_math import fit_line

if __name__=="__main__":

    os.makedirs("dev/results", exist_ok=True)

    # Refinement family
    n_list = [16, 32, 64, 128]
    spaces = [dc.generate("torus_grid", {"d" : 1, "n" : n}) for n in n_list]

    # Run suites
    results = {}
    for name in ["algebra", "equivalence", "chain"]:
        report = dc.run_suite(name, spaces, alpha=0.5, p=2.0, samples=8, verbose=True)
        report.export_json("dev/results/torus_{0}.json".format(name))
        results[name] = report

    # Trend of the maximum ratio under refinement
    print()
    print("{0:<15}{1:<20}{2:<20}".format("Suite", "Max ratio", "Slope in h"))
    print("".join(["-"]*55))
    plt.figure()
    for name, report in results.items():
        h = np.array([s["h"] for s in report.spaces])
        maxima = np.array([s["max"] for s in report.spaces])
        fit = fit_line(np.log(h), np.log(maxima))
        print("{0:<15}{1:<20.8f}{2:<20.8f}".format(name, report.max_ratio, fit["slope"]))
        plt.plot(h, maxima, 'o-', label=name)
    plt.xscale('log')
    plt.yscale('log')
    plt.xlabel('$h$')
    plt.ylabel('Max ratio')
    plt.legend()
    plt.savefig("dev/results/torus_refinement.pdf")
    plt.close()
