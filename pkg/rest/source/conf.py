# -*- coding: utf-8 -*-
#
# regionflow documentation build configuration file, created by
# sphinx-quickstart.

import sys
import os

# autodoc imports the package from the checkout
sys.path.insert(0, os.path.abspath(os.path.join('..','..')))

import regionflow

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.mathjax',
    'sphinx.ext.viewcode',
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'regionflow'
copyright = u'2026, regionflow developers'
author = u'regionflow developers'

version = regionflow.__version__
release = regionflow.__version__

language = 'en'
exclude_patterns = []
pygments_style = 'sphinx'
todo_include_todos = False

autodoc_member_order = 'bysource'

html_theme = 'alabaster'
html_static_path = ['_static']
htmlhelp_basename = 'regionflowdoc'

latex_elements = {
}
latex_documents = [
  (master_doc, 'regionflow.tex', u'regionflow Documentation',
   u'regionflow developers', 'manual'),
]

man_pages = [
    (master_doc, 'regionflow', u'regionflow Documentation',
     [author], 1)
]

texinfo_documents = [
  (master_doc, 'regionflow', u'regionflow Documentation',
   author, 'regionflow', 'Hospital service regions from patient flows.',
   'Miscellaneous'),
]
