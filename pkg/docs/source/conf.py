# Sphinx configuration for the DirCalc documentation.

import os
import sys
sys.path.insert(0, os.path.abspath('../../'))


# -- Project information -----------------------------------------------------

project = 'DirCalc'
copyright = '2021, usuaero'
author = 'usuaero'
release = '1.0.0'


# -- General configuration ---------------------------------------------------

# Markdown pages through recommonmark, API pages through autodoc with numpy docstrings
extensions = ["recommonmark", "sphinx.ext.autodoc", "sphinx.ext.napoleon", "sphinx.ext.mathjax", "sphinx_markdown_tables"]
napoleon_numpy_docstring = True
napoleon_google_docstring = False
autodoc_member_order = 'bysource'

templates_path = ['_templates']
exclude_patterns = []
master_doc = 'index'


# -- Options for HTML output -------------------------------------------------

html_theme = 'alabaster'
html_static_path = ['_static']
