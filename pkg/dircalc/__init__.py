from dircalc.space import DirichletSpace, Ball
from dircalc.generators import generate
from dircalc.calculus import SpectralData, ScaleGrid, decompose
from dircalc.paraproduct import Paraproduct
from dircalc.ensembles import Ensemble
from dircalc.probes import ProbeReport, run_probe
from dircalc.suites import SuiteReport, run_suite
from dircalc.exceptions import ValidationError, NumericalError
