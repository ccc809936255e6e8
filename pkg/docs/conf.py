# Sphinx configuration of the PMM digital twin documentation.
# Build with 'sphinx-build -b html docs docs/html'.

import os
import sys

import sphinx_rtd_theme

sys.path.insert(0, os.path.abspath('..'))

extensions = ['sphinx.ext.autodoc',
              'sphinxcontrib.napoleon',
              'sphinx.ext.mathjax',
              'sphinx.ext.viewcode']
autodoc_member_order = 'bysource'

# Docstrings follow the Google style.
napoleon_google_docstring = True
napoleon_numpy_docstring = False
napoleon_include_init_with_doc = False
napoleon_use_ivar = True

source_suffix = '.rst'
master_doc = 'index'

project = 'PMM digital twin'
copyright = '2018, Daniel Marquina'
author = 'Daniel Marquina'
version = '0.1'
release = '0.1'

exclude_patterns = ['_build', 'html']
pygments_style = 'sphinx'

html_theme = 'sphinx_rtd_theme'
html_theme_path = [sphinx_rtd_theme.get_html_theme_path()]
htmlhelp_basename = 'pmmtwindoc'

man_pages = [(master_doc, 'pmmtwin', 'PMM digital twin documentation',
              [author], 1)]
