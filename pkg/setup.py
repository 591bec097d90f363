"""DirCalc: heat semigroup calculus on finite Dirichlet spaces"""

from setuptools import setup

setup(name = 'DirCalc',
    version = '1.0.0',
    description = "DirCalc: heat semigroup calculus on finite Dirichlet spaces",
    url = 'https://github.com/usuaero/DirCalc',
    author = 'usuaero',
    install_requires = ['numpy>=1.18', 'scipy>=1.5', 'pytest', 'matplotlib'],
    python_requires ='>=3.6.0',
    license = 'MIT',
    packages = ['dircalc'],
    entry_points = {'console_scripts' : ['dircalc = dircalc.cli:main']},
    zip_safe = False)
