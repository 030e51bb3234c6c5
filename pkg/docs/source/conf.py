# -*- coding: utf-8 -*-
#
# FitoSim documentation build configuration file.

import os
import sys

import sphinx_bootstrap_theme

# The package is documented from the source tree
sources_path = os.path.abspath('..' + os.sep + '..')
sys.path.insert(0, sources_path)

from fitosim import __version__

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.doctest',
    'sphinx.ext.intersphinx',
    'sphinx.ext.todo',
    'sphinx.ext.coverage',
    'sphinx.ext.mathjax',
    'sphinx.ext.viewcode',
    'sphinx.ext.githubpages',
    'sphinxcontrib.fulltoc'
]

templates_path = []
source_suffix  = '.rst'
master_doc     = 'index'

project   = u'FitoSim'
copyright = u'FitoSim developers'
author    = u'FitoSim developers'

version = __version__
release = __version__
rst_epilog = '.. |release| replace:: {}'.format(release)

exclude_patterns   = []
pygments_style     = 'sphinx'
todo_include_todos = True

# Members in source order, not alphabetical
autodoc_member_order = 'bysource'

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'numpy': ('https://numpy.org/doc/stable', None),
}

# -- Options for HTML output ----------------------------------------------

html_theme = 'bootstrap'
html_theme_path = sphinx_bootstrap_theme.get_html_theme_path()
html_theme_options = {
  'navbar_sidebarrel': False,
  'navbar_pagenav': True,
  'globaltoc_depth': 3,
  'globaltoc_includehidden': "true",
  'navbar_class': "navbar navbar-inverse",
  'navbar_fixed_top': "true",
  'source_link_position': "footer",

  # CHANGE THIS STYLE TO EASILY SET HOW THE DOCUMENTATION LOOKS LIKE
  'bootswatch_theme': "cosmo",
  'bootstrap_version': "3",
}

html_title = u'FitoSim v{}'.format(release)
html_static_path = []
html_domain_indices = True
html_use_index = True
htmlhelp_basename = 'FitoSimdoc'

# -- Options for LaTeX / man / Texinfo output ------------------------------

latex_documents = [
    (master_doc, 'FitoSim.tex', u'FitoSim Documentation', author, 'manual'),
]

man_pages = [
    (master_doc, 'fitosim', u'FitoSim Documentation', [author], 1)
]

texinfo_documents = [
    (master_doc, 'FitoSim', u'FitoSim Documentation', author, 'FitoSim',
     'FITO vs bilateral SmartNIC offload simulator.', 'Miscellaneous'),
]
